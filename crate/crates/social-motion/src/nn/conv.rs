//! Temporal 1-D convolution over frames-as-rows feature matrices, plus the
//! nearest-neighbor upsampler used by the decoder mirror stack.

use rand_chacha::ChaCha8Rng;

use super::mat::Mat;
use super::Param;

/// Conv over time: input `[T x in_ch]`, output `[T' x out_ch]` with
/// `T' = (T + pad_left + pad_right - kernel) / stride + 1`. Weights are laid
/// out `[out_ch x (kernel * in_ch)]` so each output frame is one mat-vec
/// against a gathered patch.
#[derive(Debug, Clone)]
pub struct Conv1d {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad_left: usize,
    pub pad_right: usize,
    pub w: Param,
    pub b: Param,
}

impl Conv1d {
    pub fn new(
        rng: &mut ChaCha8Rng,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        pad_left: usize,
        pad_right: usize,
    ) -> Conv1d {
        let fan_in = (kernel * in_ch) as f64;
        let std = (2.0 / fan_in).sqrt();
        Conv1d {
            in_ch,
            out_ch,
            kernel,
            stride,
            pad_left,
            pad_right,
            w: Param::randn(rng, out_ch * kernel * in_ch, std),
            b: Param::zeros(out_ch),
        }
    }

    /// Kernel-3 stride-1 "same" convolution.
    pub fn same(rng: &mut ChaCha8Rng, in_ch: usize, out_ch: usize) -> Conv1d {
        Conv1d::new(rng, in_ch, out_ch, 3, 1, 1, 1)
    }

    /// Kernel-4 stride-2 halving convolution (even input lengths).
    pub fn halving(rng: &mut ChaCha8Rng, in_ch: usize, out_ch: usize) -> Conv1d {
        Conv1d::new(rng, in_ch, out_ch, 4, 2, 1, 1)
    }

    pub fn out_len(&self, t: usize) -> usize {
        (t + self.pad_left + self.pad_right - self.kernel) / self.stride + 1
    }

    pub fn forward(&self, x: &Mat) -> Mat {
        debug_assert_eq!(x.cols, self.in_ch);
        let t_out = self.out_len(x.rows);
        let patch_len = self.kernel * self.in_ch;
        let mut out = Mat::zeros(t_out, self.out_ch);
        let mut patch = vec![0.0; patch_len];
        for t in 0..t_out {
            let start = (t * self.stride) as isize - self.pad_left as isize;
            patch.iter_mut().for_each(|v| *v = 0.0);
            for k in 0..self.kernel {
                let src = start + k as isize;
                if src >= 0 && (src as usize) < x.rows {
                    patch[k * self.in_ch..(k + 1) * self.in_ch]
                        .copy_from_slice(x.row(src as usize));
                }
            }
            let orow = out.row_mut(t);
            for (oc, o) in orow.iter_mut().enumerate() {
                let wrow = &self.w.w[oc * patch_len..(oc + 1) * patch_len];
                let mut s = self.b.w[oc];
                for (a, b) in wrow.iter().zip(&patch) {
                    s += a * b;
                }
                *o = s;
            }
        }
        out
    }

    pub fn backward(&mut self, x: &Mat, gy: &Mat) -> Mat {
        let patch_len = self.kernel * self.in_ch;
        let mut gx = Mat::zeros(x.rows, x.cols);
        let mut patch = vec![0.0; patch_len];
        let mut gpatch = vec![0.0; patch_len];
        for t in 0..gy.rows {
            let start = (t * self.stride) as isize - self.pad_left as isize;
            patch.iter_mut().for_each(|v| *v = 0.0);
            for k in 0..self.kernel {
                let src = start + k as isize;
                if src >= 0 && (src as usize) < x.rows {
                    patch[k * self.in_ch..(k + 1) * self.in_ch]
                        .copy_from_slice(x.row(src as usize));
                }
            }
            gpatch.iter_mut().for_each(|v| *v = 0.0);
            let grow = gy.row(t);
            for (oc, &g) in grow.iter().enumerate() {
                self.b.g[oc] += g;
                if g == 0.0 {
                    continue;
                }
                let wrow = &self.w.w[oc * patch_len..(oc + 1) * patch_len];
                let gwrow = &mut self.w.g[oc * patch_len..(oc + 1) * patch_len];
                for i in 0..patch_len {
                    gwrow[i] += g * patch[i];
                    gpatch[i] += g * wrow[i];
                }
            }
            for k in 0..self.kernel {
                let src = start + k as isize;
                if src >= 0 && (src as usize) < x.rows {
                    let dst = gx.row_mut(src as usize);
                    for (d, s) in dst.iter_mut().zip(&gpatch[k * self.in_ch..(k + 1) * self.in_ch])
                    {
                        *d += s;
                    }
                }
            }
        }
        gx
    }

    pub fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        f(&format!("{prefix}.w"), &mut self.w);
        f(&format!("{prefix}.b"), &mut self.b);
    }
}

/// Nearest-neighbor 2x temporal upsampling.
pub struct Upsample2;

impl Upsample2 {
    pub fn forward(x: &Mat) -> Mat {
        let mut out = Mat::zeros(x.rows * 2, x.cols);
        for t in 0..x.rows {
            out.row_mut(2 * t).copy_from_slice(x.row(t));
            out.row_mut(2 * t + 1).copy_from_slice(x.row(t));
        }
        out
    }

    pub fn backward(gy: &Mat) -> Mat {
        let mut gx = Mat::zeros(gy.rows / 2, gy.cols);
        for t in 0..gx.rows {
            let a = gy.row(2 * t).to_vec();
            let b = gy.row(2 * t + 1);
            let dst = gx.row_mut(t);
            for i in 0..dst.len() {
                dst[i] = a[i] + b[i];
            }
        }
        gx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;

    #[test]
    fn shapes_match_the_4x_pipeline() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let same = Conv1d::same(&mut rng, 7, 5);
        let halve = Conv1d::halving(&mut rng, 5, 5);
        let x = Mat::zeros(16, 7);
        let y = same.forward(&x);
        assert_eq!((y.rows, y.cols), (16, 5));
        let z = halve.forward(&y);
        assert_eq!(z.rows, 8);
        let z2 = halve.forward(&z);
        assert_eq!(z2.rows, 4);
        let up = Upsample2::forward(&z2);
        assert_eq!(up.rows, 8);
    }

    #[test]
    fn conv_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut conv = Conv1d::halving(&mut rng, 3, 2);
        let x = Mat::from_vec(6, 3, (0..18).map(|_| rng.random_range(-1.0..1.0)).collect());
        let weights: Vec<f64> = (0..conv.out_len(6) * 2).map(|i| (i as f64 * 0.7).sin()).collect();
        let loss_of = |c: &Conv1d, x: &Mat| -> f64 {
            c.forward(x).data.iter().zip(&weights).map(|(a, b)| a * b).sum()
        };
        let t_out = conv.out_len(6);
        let gy = Mat::from_vec(t_out, 2, weights.clone());
        let gx = conv.backward(&x, &gy);

        let h = 1e-6;
        for i in 0..x.data.len() {
            let mut xp = x.clone();
            xp.data[i] += h;
            let mut xm = x.clone();
            xm.data[i] -= h;
            let fd = (loss_of(&conv, &xp) - loss_of(&conv, &xm)) / (2.0 * h);
            assert!((fd - gx.data[i]).abs() < 1e-6, "x[{i}]");
        }
        for i in 0..conv.w.w.len() {
            let orig = conv.w.w[i];
            conv.w.w[i] = orig + h;
            let up = loss_of(&conv, &x);
            conv.w.w[i] = orig - h;
            let down = loss_of(&conv, &x);
            conv.w.w[i] = orig;
            let fd = (up - down) / (2.0 * h);
            assert!((fd - conv.w.g[i]).abs() < 1e-6, "w[{i}]");
        }
        for i in 0..conv.b.w.len() {
            let orig = conv.b.w[i];
            conv.b.w[i] = orig + h;
            let up = loss_of(&conv, &x);
            conv.b.w[i] = orig - h;
            let down = loss_of(&conv, &x);
            conv.b.w[i] = orig;
            let fd = (up - down) / (2.0 * h);
            assert!((fd - conv.b.g[i]).abs() < 1e-6, "b[{i}]");
        }
    }

    #[test]
    fn upsample_backward_sums_pairs() {
        let x = Mat::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let y = Upsample2::forward(&x);
        assert_eq!(y.data, vec![1.0, 2.0, 1.0, 2.0, 3.0, 4.0, 3.0, 4.0]);
        let gy = Mat::from_vec(4, 2, vec![1.0; 8]);
        let gx = Upsample2::backward(&gy);
        assert_eq!(gx.data, vec![2.0; 4]);
    }
}
