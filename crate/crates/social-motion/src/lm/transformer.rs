//! Pre-norm encoder-decoder transformer with a shared token embedding,
//! sinusoidal positions and a zero-initialized output projection (a fresh
//! model emits exactly uniform logits, so its cross-entropy is ln |V|).

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::grammar::TOKEN_BOS;
use crate::nn::{
    gelu_backward, softmax_rows, AttentionCache, Embedding, LayerNorm, LayerNormCache, Linear,
    Mat, MultiHeadAttention, Param, VisitParams,
};

use super::{LmError, ModelConfig, TaskPair};

#[derive(Debug, Clone)]
struct FeedForward {
    lin1: Linear,
    lin2: Linear,
}

struct FfnCache {
    x: Mat,
    pre: Mat,
    hidden: Mat,
}

impl FeedForward {
    fn new(rng: &mut ChaCha8Rng, dim: usize, ffn: usize) -> FeedForward {
        FeedForward {
            lin1: Linear::new(rng, dim, ffn, true),
            lin2: Linear::new(rng, ffn, dim, true),
        }
    }

    fn forward(&self, x: &Mat) -> (Mat, FfnCache) {
        let pre = self.lin1.forward(x);
        let hidden = crate::nn::gelu_forward(&pre);
        let y = self.lin2.forward(&hidden);
        (y, FfnCache { x: x.clone(), pre, hidden })
    }

    fn backward(&mut self, cache: &FfnCache, gy: &Mat) -> Mat {
        let ghidden = self.lin2.backward(&cache.hidden, gy);
        let gpre = gelu_backward(&cache.pre, &ghidden);
        self.lin1.backward(&cache.x, &gpre)
    }

    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        self.lin1.visit(&format!("{prefix}.lin1"), f);
        self.lin2.visit(&format!("{prefix}.lin2"), f);
    }
}

#[derive(Debug, Clone)]
struct EncoderLayer {
    ln1: LayerNorm,
    attn: MultiHeadAttention,
    ln2: LayerNorm,
    ffn: FeedForward,
}

struct EncBlockCache {
    ln1c: LayerNormCache,
    ln1_out: Mat,
    attnc: AttentionCache,
    ln2c: LayerNormCache,
    ffnc: FfnCache,
}

impl EncoderLayer {
    fn new(rng: &mut ChaCha8Rng, cfg: &ModelConfig) -> EncoderLayer {
        EncoderLayer {
            ln1: LayerNorm::new(cfg.dim),
            attn: MultiHeadAttention::new(rng, cfg.dim, cfg.heads),
            ln2: LayerNorm::new(cfg.dim),
            ffn: FeedForward::new(rng, cfg.dim, cfg.ffn_dim),
        }
    }

    fn forward(&self, x: &Mat) -> (Mat, EncBlockCache) {
        let (ln1_out, ln1c) = self.ln1.forward(x);
        let (attn_out, attnc) = self.attn.forward(&ln1_out, &ln1_out, false);
        let mut after_attn = x.clone();
        after_attn.add_assign(&attn_out);
        let (ln2_out, ln2c) = self.ln2.forward(&after_attn);
        let (ffn_out, ffnc) = self.ffn.forward(&ln2_out);
        let mut y = after_attn;
        y.add_assign(&ffn_out);
        (y, EncBlockCache { ln1c, ln1_out, attnc, ln2c, ffnc })
    }

    fn backward(&mut self, cache: &EncBlockCache, gy: &Mat) -> Mat {
        let gln2_out = self.ffn.backward(&cache.ffnc, gy);
        let mut g_after = gy.clone();
        g_after.add_assign(&self.ln2.backward(&cache.ln2c, &gln2_out));
        let (gq, gkv) = self.attn.backward(&cache.ln1_out, &cache.ln1_out, &cache.attnc, &g_after);
        let mut gln1_out = gq;
        gln1_out.add_assign(&gkv);
        let mut gx = g_after;
        gx.add_assign(&self.ln1.backward(&cache.ln1c, &gln1_out));
        gx
    }

    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        self.ln1.visit(&format!("{prefix}.ln1"), f);
        self.attn.visit(&format!("{prefix}.attn"), f);
        self.ln2.visit(&format!("{prefix}.ln2"), f);
        self.ffn.visit(&format!("{prefix}.ffn"), f);
    }
}

#[derive(Debug, Clone)]
struct DecoderLayer {
    ln1: LayerNorm,
    self_attn: MultiHeadAttention,
    ln2: LayerNorm,
    cross_attn: MultiHeadAttention,
    ln3: LayerNorm,
    ffn: FeedForward,
}

struct DecBlockCache {
    ln1c: LayerNormCache,
    ln1_out: Mat,
    selfc: AttentionCache,
    ln2c: LayerNormCache,
    ln2_out: Mat,
    crossc: AttentionCache,
    ln3c: LayerNormCache,
    ffnc: FfnCache,
}

impl DecoderLayer {
    fn new(rng: &mut ChaCha8Rng, cfg: &ModelConfig) -> DecoderLayer {
        DecoderLayer {
            ln1: LayerNorm::new(cfg.dim),
            self_attn: MultiHeadAttention::new(rng, cfg.dim, cfg.heads),
            ln2: LayerNorm::new(cfg.dim),
            cross_attn: MultiHeadAttention::new(rng, cfg.dim, cfg.heads),
            ln3: LayerNorm::new(cfg.dim),
            ffn: FeedForward::new(rng, cfg.dim, cfg.ffn_dim),
        }
    }

    fn forward(&self, x: &Mat, enc_out: &Mat) -> (Mat, DecBlockCache) {
        let (ln1_out, ln1c) = self.ln1.forward(x);
        let (sa, selfc) = self.self_attn.forward(&ln1_out, &ln1_out, true);
        let mut after_self = x.clone();
        after_self.add_assign(&sa);
        let (ln2_out, ln2c) = self.ln2.forward(&after_self);
        let (ca, crossc) = self.cross_attn.forward(&ln2_out, enc_out, false);
        let mut after_cross = after_self.clone();
        after_cross.add_assign(&ca);
        let (ln3_out, ln3c) = self.ln3.forward(&after_cross);
        let (ff, ffnc) = self.ffn.forward(&ln3_out);
        let mut y = after_cross.clone();
        y.add_assign(&ff);
        let cache = DecBlockCache {
            ln1c,
            ln1_out,
            selfc,
            ln2c,
            ln2_out,
            crossc,
            ln3c,
            ffnc,
        };
        (y, cache)
    }

    /// Returns (input gradient, encoder-output gradient contribution).
    fn backward(&mut self, cache: &DecBlockCache, enc_out: &Mat, gy: &Mat) -> (Mat, Mat) {
        let gln3_out = self.ffn.backward(&cache.ffnc, gy);
        let mut g_after_cross = gy.clone();
        g_after_cross.add_assign(&self.ln3.backward(&cache.ln3c, &gln3_out));

        let (gln2_out, genc) =
            self.cross_attn.backward(&cache.ln2_out, enc_out, &cache.crossc, &g_after_cross);
        let mut g_after_self = g_after_cross;
        g_after_self.add_assign(&self.ln2.backward(&cache.ln2c, &gln2_out));

        let (gq, gkv) =
            self.self_attn.backward(&cache.ln1_out, &cache.ln1_out, &cache.selfc, &g_after_self);
        let mut gln1_out = gq;
        gln1_out.add_assign(&gkv);
        let mut gx = g_after_self;
        gx.add_assign(&self.ln1.backward(&cache.ln1c, &gln1_out));
        (gx, genc)
    }

    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        self.ln1.visit(&format!("{prefix}.ln1"), f);
        self.self_attn.visit(&format!("{prefix}.self_attn"), f);
        self.ln2.visit(&format!("{prefix}.ln2"), f);
        self.cross_attn.visit(&format!("{prefix}.cross_attn"), f);
        self.ln3.visit(&format!("{prefix}.ln3"), f);
        self.ffn.visit(&format!("{prefix}.ffn"), f);
    }
}

pub struct Seq2SeqModel {
    pub cfg: ModelConfig,
    embed: Embedding,
    enc_layers: Vec<EncoderLayer>,
    enc_final: LayerNorm,
    dec_layers: Vec<DecoderLayer>,
    dec_final: LayerNorm,
    out_proj: Linear,
    pos_table: Mat,
}

/// Activations of one teacher-forced pair kept for the backward pass.
pub struct PairCache {
    enc_ids: Vec<u32>,
    dec_ids: Vec<u32>,
    labels: Vec<u32>,
    enc_drop: Option<Mat>,
    enc_blocks: Vec<EncBlockCache>,
    enc_fc: LayerNormCache,
    enc_out: Mat,
    dec_drop: Option<Mat>,
    dec_blocks: Vec<DecBlockCache>,
    dec_fc: LayerNormCache,
    dec_out: Mat,
    probs: Mat,
    /// Summed cross-entropy over target positions.
    pub loss_sum: f64,
    pub n_tokens: usize,
}

fn sinusoidal_table(max_len: usize, dim: usize) -> Mat {
    let mut table = Mat::zeros(max_len, dim);
    for t in 0..max_len {
        for i in 0..dim {
            let k = (i / 2) as f64;
            let rate = 1.0 / 10_000f64.powf(2.0 * k / dim as f64);
            let angle = t as f64 * rate;
            table.row_mut(t)[i] = if i % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    table
}

impl Seq2SeqModel {
    pub fn new(cfg: ModelConfig) -> Result<Seq2SeqModel, LmError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let embed = Embedding::new(&mut rng, cfg.vocab_size, cfg.dim);
        let enc_layers = (0..cfg.enc_layers).map(|_| EncoderLayer::new(&mut rng, &cfg)).collect();
        let dec_layers = (0..cfg.dec_layers).map(|_| DecoderLayer::new(&mut rng, &cfg)).collect();
        let pos_table = sinusoidal_table(cfg.max_len, cfg.dim);
        Ok(Seq2SeqModel {
            embed,
            enc_final: LayerNorm::new(cfg.dim),
            dec_final: LayerNorm::new(cfg.dim),
            out_proj: Linear::new_zeroed(cfg.dim, cfg.vocab_size, false),
            enc_layers,
            dec_layers,
            pos_table,
            cfg,
        })
    }

    fn embed_with_pos(&self, ids: &[u32]) -> Mat {
        let mut x = self.embed.forward(ids);
        for t in 0..x.rows {
            let pos = self.pos_table.row(t).to_vec();
            for (v, p) in x.row_mut(t).iter_mut().zip(&pos) {
                *v += p;
            }
        }
        x
    }

    fn dropout_mask(&self, rows: usize, rng: &mut ChaCha8Rng) -> Mat {
        let keep = 1.0 - self.cfg.dropout;
        Mat::from_vec(
            rows,
            self.cfg.dim,
            (0..rows * self.cfg.dim)
                .map(|_| if rng.random_range(0.0..1.0) < keep { 1.0 / keep } else { 0.0 })
                .collect(),
        )
    }

    /// Decoder input for teacher forcing: BOS then the target minus its last
    /// token; every target position is predicted once.
    fn decoder_input(target: &[u32]) -> Vec<u32> {
        let mut dec = Vec::with_capacity(target.len());
        dec.push(TOKEN_BOS);
        dec.extend_from_slice(&target[..target.len() - 1]);
        dec
    }

    /// Teacher-forced forward pass of one pair. Dropout applies to the
    /// embedding outputs only when a training rng is supplied.
    pub fn forward_pair(
        &self,
        pair: &TaskPair,
        mut dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<PairCache, LmError> {
        pair.validate(self.cfg.vocab_size, self.cfg.max_len)?;
        if pair.input.is_empty() || pair.target.is_empty() {
            return Err(LmError::SequenceTooShort { got: 0, min: 1 });
        }
        let enc_ids = pair.input.clone();
        let labels = pair.target.clone();
        let dec_ids = Self::decoder_input(&labels);

        let mut enc_x = self.embed_with_pos(&enc_ids);
        let enc_drop = if self.cfg.dropout > 0.0 {
            dropout_rng.as_deref_mut().map(|rng| self.dropout_mask(enc_x.rows, rng))
        } else {
            None
        };
        if let Some(mask) = &enc_drop {
            for (v, m) in enc_x.data.iter_mut().zip(&mask.data) {
                *v *= m;
            }
        }
        let mut x = enc_x.clone();
        let mut enc_blocks = Vec::with_capacity(self.enc_layers.len());
        for layer in &self.enc_layers {
            let (y, cache) = layer.forward(&x);
            enc_blocks.push(cache);
            x = y;
        }
        let (enc_out, enc_fc) = self.enc_final.forward(&x);

        let mut dec_x = self.embed_with_pos(&dec_ids);
        let dec_drop = if self.cfg.dropout > 0.0 {
            dropout_rng.map(|rng| self.dropout_mask(dec_x.rows, rng))
        } else {
            None
        };
        if let Some(mask) = &dec_drop {
            for (v, m) in dec_x.data.iter_mut().zip(&mask.data) {
                *v *= m;
            }
        }
        let mut y = dec_x.clone();
        let mut dec_blocks = Vec::with_capacity(self.dec_layers.len());
        for layer in &self.dec_layers {
            let (out, cache) = layer.forward(&y, &enc_out);
            dec_blocks.push(cache);
            y = out;
        }
        let (dec_out, dec_fc) = self.dec_final.forward(&y);

        let mut probs = self.out_proj.forward(&dec_out);
        softmax_rows(&mut probs);
        let mut loss_sum = 0.0;
        for (t, &label) in labels.iter().enumerate() {
            loss_sum -= probs.row(t)[label as usize].max(1e-300).ln();
        }

        Ok(PairCache {
            enc_ids,
            dec_ids,
            n_tokens: labels.len(),
            labels,
            enc_drop,
            enc_blocks,
            enc_fc,
            enc_out,
            dec_drop,
            dec_blocks,
            dec_fc,
            dec_out,
            probs,
            loss_sum,
        })
    }

    /// Backprop one pair, scaling the loss gradient by `scale`.
    pub fn backward_pair(&mut self, cache: &PairCache, scale: f64) {
        // d(loss)/d(logits) = probs - onehot.
        let mut glogits = cache.probs.clone();
        for (t, &label) in cache.labels.iter().enumerate() {
            glogits.row_mut(t)[label as usize] -= 1.0;
        }
        for v in glogits.data.iter_mut() {
            *v *= scale;
        }
        let gdec_out = self.out_proj.backward(&cache.dec_out, &glogits);
        let mut gdec = self.dec_final.backward(&cache.dec_fc, &gdec_out);

        let mut genc_out = Mat::zeros(cache.enc_out.rows, cache.enc_out.cols);
        for (layer, block) in self.dec_layers.iter_mut().zip(&cache.dec_blocks).rev() {
            let (gx, genc) = layer.backward(block, &cache.enc_out, &gdec);
            gdec = gx;
            genc_out.add_assign(&genc);
        }
        let mut gdec_x = gdec;
        if let Some(mask) = &cache.dec_drop {
            for (v, m) in gdec_x.data.iter_mut().zip(&mask.data) {
                *v *= m;
            }
        }
        self.embed.backward(&cache.dec_ids, &gdec_x);

        let mut genc = self.enc_final.backward(&cache.enc_fc, &genc_out);
        for (layer, block) in self.enc_layers.iter_mut().zip(&cache.enc_blocks).rev() {
            genc = layer.backward(block, &genc);
        }
        let mut genc_x = genc;
        if let Some(mask) = &cache.enc_drop {
            for (v, m) in genc_x.data.iter_mut().zip(&mask.data) {
                *v *= m;
            }
        }
        self.embed.backward(&cache.enc_ids, &genc_x);
    }

    /// Mean per-token cross-entropy of one pair, no gradients.
    pub fn pair_loss(&self, pair: &TaskPair) -> Result<f64, LmError> {
        let cache = self.forward_pair(pair, None)?;
        Ok(cache.loss_sum / cache.n_tokens as f64)
    }

    /// Encoder output for generation (no caches kept).
    pub fn encode_source(&self, ids: &[u32]) -> Result<Mat, LmError> {
        if ids.is_empty() {
            return Err(LmError::SequenceTooShort { got: 0, min: 1 });
        }
        if ids.len() > self.cfg.max_len {
            return Err(LmError::SequenceTooLong { got: ids.len(), max: self.cfg.max_len });
        }
        for &id in ids {
            if id as usize >= self.cfg.vocab_size {
                return Err(LmError::TokenOutOfRange { id, vocab: self.cfg.vocab_size });
            }
        }
        let mut x = self.embed_with_pos(ids);
        for layer in &self.enc_layers {
            let (y, _) = layer.forward(&x);
            x = y;
        }
        let (out, _) = self.enc_final.forward(&x);
        Ok(out)
    }

    /// Logits for the next token after the teacher-forced prefix `dec_in`.
    pub fn next_token_logits(&self, enc_out: &Mat, dec_in: &[u32]) -> Vec<f64> {
        let mut y = self.embed_with_pos(dec_in);
        for layer in &self.dec_layers {
            let (out, _) = layer.forward(&y, enc_out);
            y = out;
        }
        let (out, _) = self.dec_final.forward(&y);
        let last = Mat::from_vec(1, out.cols, out.row(out.rows - 1).to_vec());
        self.out_proj.forward(&last).data
    }
}

impl VisitParams for Seq2SeqModel {
    fn visit_params(&mut self, f: &mut dyn FnMut(&str, &mut Param)) {
        self.embed.visit("embed", f);
        for (i, layer) in self.enc_layers.iter_mut().enumerate() {
            layer.visit(&format!("enc.{i}"), f);
        }
        self.enc_final.visit("enc.final_ln", f);
        for (i, layer) in self.dec_layers.iter_mut().enumerate() {
            layer.visit(&format!("dec.{i}"), f);
        }
        self.dec_final.visit("dec.final_ln", f);
        self.out_proj.visit("out_proj", f);
    }
}
