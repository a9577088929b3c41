//! The tokenizer network: a temporal-convolution encoder with two stride-2
//! stages (T x F -> T/4 x d), a mirrored upsampling decoder, and per-dimension
//! feature standardization.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::nn::{gelu_backward, Conv1d, Mat, Param, Upsample2, VisitParams};
use crate::xh3d::PersonFeatures;

use super::codebook::{quantize_latents, Codebook};
use super::{VQConfig, VQError};

/// Residual block: `x + conv1x1(gelu(conv3(x)))`.
#[derive(Debug, Clone)]
struct ResBlock {
    a: Conv1d,
    b: Conv1d,
}

struct ResCache {
    x: Mat,
    pre: Mat,
    hidden: Mat,
}

impl ResBlock {
    fn new(rng: &mut ChaCha8Rng, ch: usize) -> ResBlock {
        ResBlock { a: Conv1d::same(rng, ch, ch), b: Conv1d::new(rng, ch, ch, 1, 1, 0, 0) }
    }

    fn forward(&self, x: &Mat) -> (Mat, ResCache) {
        let pre = self.a.forward(x);
        let hidden = crate::nn::gelu_forward(&pre);
        let mut y = self.b.forward(&hidden);
        y.add_assign(x);
        (y, ResCache { x: x.clone(), pre, hidden })
    }

    fn backward(&mut self, cache: &ResCache, gy: &Mat) -> Mat {
        let ghidden = self.b.backward(&cache.hidden, gy);
        let gpre = gelu_backward(&cache.pre, &ghidden);
        let mut gx = self.a.backward(&cache.x, &gpre);
        gx.add_assign(gy);
        gx
    }

    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        self.a.visit(&format!("{prefix}.a"), f);
        self.b.visit(&format!("{prefix}.b"), f);
    }
}

#[derive(Debug, Clone)]
struct Encoder {
    conv_in: Conv1d,
    down1: Conv1d,
    res1: ResBlock,
    down2: Conv1d,
    res2: ResBlock,
    proj: Conv1d,
}

pub(super) struct EncoderCache {
    x: Mat,
    p0: Mat,
    h0: Mat,
    p1: Mat,
    r1c: ResCache,
    r1: Mat,
    p2: Mat,
    r2c: ResCache,
    r2: Mat,
}

impl Encoder {
    fn new(rng: &mut ChaCha8Rng, cfg: &VQConfig) -> Encoder {
        Encoder {
            conv_in: Conv1d::same(rng, cfg.feature_dim, cfg.hidden_dim),
            down1: Conv1d::halving(rng, cfg.hidden_dim, cfg.hidden_dim),
            res1: ResBlock::new(rng, cfg.hidden_dim),
            down2: Conv1d::halving(rng, cfg.hidden_dim, cfg.hidden_dim),
            res2: ResBlock::new(rng, cfg.hidden_dim),
            proj: Conv1d::same(rng, cfg.hidden_dim, cfg.latent_dim),
        }
    }

    fn forward(&self, x: &Mat) -> (Mat, EncoderCache) {
        let p0 = self.conv_in.forward(x);
        let h0 = crate::nn::gelu_forward(&p0);
        let p1 = self.down1.forward(&h0);
        let h1 = crate::nn::gelu_forward(&p1);
        let (r1, r1c) = self.res1.forward(&h1);
        let p2 = self.down2.forward(&r1);
        let h2 = crate::nn::gelu_forward(&p2);
        let (r2, r2c) = self.res2.forward(&h2);
        let z = self.proj.forward(&r2);
        let cache = EncoderCache { x: x.clone(), p0, h0, p1, r1c, r1, p2, r2c, r2 };
        (z, cache)
    }

    fn backward(&mut self, cache: &EncoderCache, gz: &Mat) {
        let gr2 = self.proj.backward(&cache.r2, gz);
        let gh2 = self.res2.backward(&cache.r2c, &gr2);
        let gp2 = gelu_backward(&cache.p2, &gh2);
        let gr1 = self.down2.backward(&cache.r1, &gp2);
        let gh1 = self.res1.backward(&cache.r1c, &gr1);
        let gp1 = gelu_backward(&cache.p1, &gh1);
        let gh0 = self.down1.backward(&cache.h0, &gp1);
        let gp0 = gelu_backward(&cache.p0, &gh0);
        let _ = self.conv_in.backward(&cache.x, &gp0);
    }

    fn visit(&mut self, f: &mut dyn FnMut(&str, &mut Param)) {
        self.conv_in.visit("enc.conv_in", f);
        self.down1.visit("enc.down1", f);
        self.res1.visit("enc.res1", f);
        self.down2.visit("enc.down2", f);
        self.res2.visit("enc.res2", f);
        self.proj.visit("enc.proj", f);
    }
}

#[derive(Debug, Clone)]
struct Decoder {
    conv_in: Conv1d,
    conv1: Conv1d,
    res1: ResBlock,
    conv2: Conv1d,
    res2: ResBlock,
    proj: Conv1d,
}

pub(super) struct DecoderCache {
    z: Mat,
    p0: Mat,
    u1: Mat,
    p1: Mat,
    r1c: ResCache,
    u2: Mat,
    p2: Mat,
    r2c: ResCache,
    r2: Mat,
}

impl Decoder {
    fn new(rng: &mut ChaCha8Rng, cfg: &VQConfig) -> Decoder {
        Decoder {
            conv_in: Conv1d::same(rng, cfg.latent_dim, cfg.hidden_dim),
            conv1: Conv1d::same(rng, cfg.hidden_dim, cfg.hidden_dim),
            res1: ResBlock::new(rng, cfg.hidden_dim),
            conv2: Conv1d::same(rng, cfg.hidden_dim, cfg.hidden_dim),
            res2: ResBlock::new(rng, cfg.hidden_dim),
            proj: Conv1d::same(rng, cfg.hidden_dim, cfg.feature_dim),
        }
    }

    fn forward(&self, z: &Mat) -> (Mat, DecoderCache) {
        let p0 = self.conv_in.forward(z);
        let h0 = crate::nn::gelu_forward(&p0);
        let u1 = Upsample2::forward(&h0);
        let p1 = self.conv1.forward(&u1);
        let h1 = crate::nn::gelu_forward(&p1);
        let (r1, r1c) = self.res1.forward(&h1);
        let u2 = Upsample2::forward(&r1);
        let p2 = self.conv2.forward(&u2);
        let h2 = crate::nn::gelu_forward(&p2);
        let (r2, r2c) = self.res2.forward(&h2);
        let y = self.proj.forward(&r2);
        let cache = DecoderCache { z: z.clone(), p0, u1, p1, r1c, u2, p2, r2c, r2 };
        (y, cache)
    }

    /// Returns the gradient with respect to the decoder input.
    fn backward(&mut self, cache: &DecoderCache, gy: &Mat) -> Mat {
        let gr2 = self.proj.backward(&cache.r2, gy);
        let gh2 = self.res2.backward(&cache.r2c, &gr2);
        let gp2 = gelu_backward(&cache.p2, &gh2);
        let gu2 = self.conv2.backward(&cache.u2, &gp2);
        let gr1 = Upsample2::backward(&gu2);
        let gh1 = self.res1.backward(&cache.r1c, &gr1);
        let gp1 = gelu_backward(&cache.p1, &gh1);
        let gu1 = self.conv1.backward(&cache.u1, &gp1);
        let gh0 = Upsample2::backward(&gu1);
        let gp0 = gelu_backward(&cache.p0, &gh0);
        self.conv_in.backward(&cache.z, &gp0)
    }

    fn visit(&mut self, f: &mut dyn FnMut(&str, &mut Param)) {
        self.conv_in.visit("dec.conv_in", f);
        self.conv1.visit("dec.conv1", f);
        self.res1.visit("dec.res1", f);
        self.conv2.visit("dec.conv2", f);
        self.res2.visit("dec.res2", f);
        self.proj.visit("dec.proj", f);
    }
}

/// Per-dimension standardization statistics fitted on the training split.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureStats {
    pub fn identity(dim: usize) -> FeatureStats {
        FeatureStats { mean: vec![0.0; dim], std: vec![1.0; dim] }
    }

    /// Fit over all rows of all windows; constant dimensions get unit scale.
    pub fn fit(windows: &[PersonFeatures]) -> FeatureStats {
        let dim = windows.first().map_or(0, |w| w.width());
        let mut mean = vec![0.0; dim];
        let mut count = 0usize;
        for w in windows {
            for t in 0..w.frames {
                for (m, v) in mean.iter_mut().zip(w.row(t)) {
                    *m += v;
                }
                count += 1;
            }
        }
        let n = count.max(1) as f64;
        for m in mean.iter_mut() {
            *m /= n;
        }
        let mut var = vec![0.0; dim];
        for w in windows {
            for t in 0..w.frames {
                for ((s, v), m) in var.iter_mut().zip(w.row(t)).zip(&mean) {
                    let d = v - m;
                    *s += d * d;
                }
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd < 1e-4 {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        FeatureStats { mean, std }
    }

    pub fn normalize(&self, x: &Mat) -> Mat {
        let mut out = x.clone();
        for r in 0..out.rows {
            for (i, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = (*v - self.mean[i]) / self.std[i];
            }
        }
        out
    }

    pub fn denormalize(&self, x: &Mat) -> Mat {
        let mut out = x.clone();
        for r in 0..out.rows {
            for (i, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = *v * self.std[i] + self.mean[i];
            }
        }
        out
    }
}

/// Full tokenizer: encoder, decoder, codebook and normalization stats.
pub struct VQModel {
    pub cfg: VQConfig,
    encoder: Encoder,
    decoder: Decoder,
    pub codebook: Codebook,
    pub stats: FeatureStats,
}

impl VQModel {
    pub fn new(cfg: VQConfig) -> Result<VQModel, VQError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let encoder = Encoder::new(&mut rng, &cfg);
        let decoder = Decoder::new(&mut rng, &cfg);
        let codebook = Codebook::random(&mut rng, cfg.codebook_size, cfg.latent_dim);
        let stats = FeatureStats::identity(cfg.feature_dim);
        Ok(VQModel { cfg, encoder, decoder, codebook, stats })
    }

    fn feature_mat(&self, f: &PersonFeatures) -> Result<Mat, VQError> {
        if f.width() != self.cfg.feature_dim {
            return Err(VQError::FeatureWidth { got: f.width(), want: self.cfg.feature_dim });
        }
        Ok(Mat::from_vec(f.frames, f.width(), f.data.clone()))
    }

    /// Pad to a multiple of 4 frames by repeating the final frame.
    fn pad_to_multiple(x: &Mat) -> Mat {
        let rem = x.rows % 4;
        if rem == 0 {
            return x.clone();
        }
        let extra = 4 - rem;
        let mut out = Mat::zeros(x.rows + extra, x.cols);
        for t in 0..x.rows {
            out.row_mut(t).copy_from_slice(x.row(t));
        }
        let last = x.row(x.rows - 1).to_vec();
        for t in x.rows..x.rows + extra {
            out.row_mut(t).copy_from_slice(&last);
        }
        out
    }

    /// Normalized input -> latent sequence, keeping caches for backward.
    pub(super) fn encode_latents(&self, xn: &Mat) -> (Mat, EncoderCache) {
        self.encoder.forward(xn)
    }

    pub(super) fn decode_latents(&self, z: &Mat) -> (Mat, DecoderCache) {
        self.decoder.forward(z)
    }

    pub(super) fn backward_decoder(&mut self, cache: &DecoderCache, gy: &Mat) -> Mat {
        self.decoder.backward(cache, gy)
    }

    pub(super) fn backward_encoder(&mut self, cache: &EncoderCache, gz: &Mat) {
        self.encoder.backward(cache, gz)
    }

    /// Number of frames produced per token.
    pub fn frames_per_token(&self) -> usize {
        self.cfg.downsample
    }

    /// Joint count implied by the feature width (width = 12*j - 1).
    pub fn joints(&self) -> usize {
        (self.cfg.feature_dim + 1) / 12
    }
}

impl VisitParams for VQModel {
    fn visit_params(&mut self, f: &mut dyn FnMut(&str, &mut Param)) {
        self.encoder.visit(f);
        self.decoder.visit(f);
    }
}

/// Tokenize a feature sequence: T frames -> ceil(T/4) codebook indices.
pub fn vq_encode(f: &PersonFeatures, model: &VQModel) -> Result<Vec<u32>, VQError> {
    if f.frames < 4 {
        return Err(VQError::TooShort(f.frames));
    }
    let x = model.feature_mat(f)?;
    let xn = model.stats.normalize(&VQModel::pad_to_multiple(&x));
    let (z, _) = model.encode_latents(&xn);
    let q = quantize_latents(&z, &model.codebook)?;
    Ok(q.indices.into_iter().map(|i| i as u32).collect())
}

/// Reconstruct features from token indices: L tokens -> 4L frames.
pub fn vq_decode(tokens: &[u32], model: &VQModel, fps: f64) -> Result<PersonFeatures, VQError> {
    let k = model.cfg.codebook_size;
    let mut z = Mat::zeros(tokens.len(), model.cfg.latent_dim);
    for (r, &id) in tokens.iter().enumerate() {
        if id as usize >= k {
            return Err(VQError::TokenOutOfRange { id, size: k });
        }
        z.row_mut(r).copy_from_slice(model.codebook.entry(id as usize));
    }
    let (yn, _) = model.decode_latents(&z);
    let mut y = model.stats.denormalize(&yn);
    // The network emits soft foot contacts; the feature contract is binary.
    let contacts = crate::xh3d::FeatureLayout::new(model.joints()).foot_contacts();
    for r in 0..y.rows {
        for c in contacts.clone() {
            let v = y.row(r)[c];
            y.row_mut(r)[c] = if v >= 0.5 { 1.0 } else { 0.0 };
        }
    }
    Ok(PersonFeatures { joints: model.joints(), fps, frames: y.rows, data: y.data })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg() -> VQConfig {
        VQConfig {
            feature_dim: 59,
            codebook_size: 8,
            latent_dim: 6,
            hidden_dim: 10,
            window: 8,
            batch_size: 2,
            seed: 7,
            ..Default::default()
        }
    }

    fn constant_features(frames: usize) -> PersonFeatures {
        PersonFeatures {
            joints: 5,
            fps: 20.0,
            frames,
            data: (0..frames * 59).map(|i| ((i % 59) as f64) * 0.01).collect(),
        }
    }

    #[test]
    fn token_count_is_quarter_of_frames() {
        let model = VQModel::new(tiny_cfg()).unwrap();
        let f = constant_features(400);
        let tokens = vq_encode(&f, &model).unwrap();
        assert_eq!(tokens.len(), 100);
        assert!(tokens.iter().all(|&t| (t as usize) < 8));
    }

    #[test]
    fn padding_policy_rounds_up() {
        let model = VQModel::new(tiny_cfg()).unwrap();
        let f = constant_features(10);
        let tokens = vq_encode(&f, &model).unwrap();
        assert_eq!(tokens.len(), 3); // ceil(10/4)
    }

    #[test]
    fn too_short_rejected() {
        let model = VQModel::new(tiny_cfg()).unwrap();
        let f = constant_features(3);
        assert_eq!(vq_encode(&f, &model), Err(VQError::TooShort(3)));
    }

    #[test]
    fn encode_is_deterministic() {
        let model = VQModel::new(tiny_cfg()).unwrap();
        let f = constant_features(32);
        assert_eq!(vq_encode(&f, &model).unwrap(), vq_encode(&f, &model).unwrap());
    }

    #[test]
    fn decode_shape_and_bounds() {
        let model = VQModel::new(tiny_cfg()).unwrap();
        let f = vq_decode(&[1], &model, 20.0).unwrap();
        assert_eq!(f.frames, 4);
        assert_eq!(f.width(), 59);
        assert_eq!(
            vq_decode(&[8], &model, 20.0).err(),
            Some(VQError::TokenOutOfRange { id: 8, size: 8 })
        );
    }

    #[test]
    fn stats_fit_handles_constant_dimensions() {
        let f = constant_features(12);
        let stats = FeatureStats::fit(std::slice::from_ref(&f));
        // Every dimension is constant here, so scales fall back to 1.
        assert!(stats.std.iter().all(|&s| s == 1.0));
        let x = Mat::from_vec(f.frames, f.width(), f.data.clone());
        let round = stats.denormalize(&stats.normalize(&x));
        for (a, b) in round.data.iter().zip(&x.data) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
