//! Dense layers: linear, layer norm, embedding and the GELU nonlinearity.

use rand_chacha::ChaCha8Rng;

use super::mat::{matmul, matmul_nt, matmul_tn, Mat};
use super::Param;

const GELU_C: f64 = 0.7978845608028654; // sqrt(2/pi)
const GELU_A: f64 = 0.044715;

pub fn gelu(x: f64) -> f64 {
    let u = GELU_C * (x + GELU_A * x * x * x);
    0.5 * x * (1.0 + u.tanh())
}

pub fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + GELU_A * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

/// Elementwise GELU; returns output, keep the input for the backward pass.
pub fn gelu_forward(x: &Mat) -> Mat {
    Mat::from_vec(x.rows, x.cols, x.data.iter().map(|&v| gelu(v)).collect())
}

pub fn gelu_backward(x: &Mat, gy: &Mat) -> Mat {
    Mat::from_vec(
        x.rows,
        x.cols,
        x.data.iter().zip(&gy.data).map(|(&v, &g)| g * gelu_grad(v)).collect(),
    )
}

/// `y = x W + b`, weight stored `[in x out]`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub in_dim: usize,
    pub out_dim: usize,
    pub w: Param,
    pub b: Option<Param>,
}

impl Linear {
    pub fn new(rng: &mut ChaCha8Rng, in_dim: usize, out_dim: usize, bias: bool) -> Linear {
        let std = (2.0 / (in_dim + out_dim) as f64).sqrt();
        Linear {
            in_dim,
            out_dim,
            w: Param::randn(rng, in_dim * out_dim, std),
            b: bias.then(|| Param::zeros(out_dim)),
        }
    }

    /// All-zero weights; logits start exactly uniform.
    pub fn new_zeroed(in_dim: usize, out_dim: usize, bias: bool) -> Linear {
        Linear {
            in_dim,
            out_dim,
            w: Param::zeros(in_dim * out_dim),
            b: bias.then(|| Param::zeros(out_dim)),
        }
    }

    pub fn forward(&self, x: &Mat) -> Mat {
        debug_assert_eq!(x.cols, self.in_dim);
        let w = Mat { rows: self.in_dim, cols: self.out_dim, data: self.w.w.clone() };
        let mut y = matmul(x, &w);
        if let Some(b) = &self.b {
            for r in 0..y.rows {
                for (v, bv) in y.row_mut(r).iter_mut().zip(&b.w) {
                    *v += bv;
                }
            }
        }
        y
    }

    /// Accumulates weight gradients, returns the input gradient.
    pub fn backward(&mut self, x: &Mat, gy: &Mat) -> Mat {
        let w = Mat { rows: self.in_dim, cols: self.out_dim, data: self.w.w.clone() };
        // gw += x^T gy
        let gw = matmul_tn(x, gy);
        for (g, d) in self.w.g.iter_mut().zip(&gw.data) {
            *g += d;
        }
        if let Some(b) = &mut self.b {
            for r in 0..gy.rows {
                for (g, d) in b.g.iter_mut().zip(gy.row(r)) {
                    *g += d;
                }
            }
        }
        // gx = gy W^T; W rows are exactly the [out]-vectors per input dim.
        matmul_nt(gy, &w)
    }

    pub fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        f(&format!("{prefix}.w"), &mut self.w);
        if let Some(b) = &mut self.b {
            f(&format!("{prefix}.b"), b);
        }
    }
}

/// Per-row layer normalization with learned scale and shift.
#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub dim: usize,
    pub eps: f64,
    pub gamma: Param,
    pub beta: Param,
}

pub struct LayerNormCache {
    xhat: Mat,
    inv_std: Vec<f64>,
}

impl LayerNorm {
    pub fn new(dim: usize) -> LayerNorm {
        LayerNorm {
            dim,
            eps: 1e-5,
            gamma: Param { w: vec![1.0; dim], g: vec![0.0; dim] },
            beta: Param::zeros(dim),
        }
    }

    pub fn forward(&self, x: &Mat) -> (Mat, LayerNormCache) {
        let mut y = Mat::zeros(x.rows, x.cols);
        let mut xhat = Mat::zeros(x.rows, x.cols);
        let mut inv_std = vec![0.0; x.rows];
        let n = x.cols as f64;
        for r in 0..x.rows {
            let row = x.row(r);
            let mean = row.iter().sum::<f64>() / n;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let inv = 1.0 / (var + self.eps).sqrt();
            inv_std[r] = inv;
            let xh = xhat.row_mut(r);
            let yr = y.row_mut(r);
            for i in 0..x.cols {
                xh[i] = (row[i] - mean) * inv;
                yr[i] = xh[i] * self.gamma.w[i] + self.beta.w[i];
            }
        }
        (y, LayerNormCache { xhat, inv_std })
    }

    pub fn backward(&mut self, cache: &LayerNormCache, gy: &Mat) -> Mat {
        let n = gy.cols as f64;
        let mut gx = Mat::zeros(gy.rows, gy.cols);
        for r in 0..gy.rows {
            let xh = cache.xhat.row(r);
            let gyr = gy.row(r);
            for i in 0..gy.cols {
                self.gamma.g[i] += gyr[i] * xh[i];
                self.beta.g[i] += gyr[i];
            }
            let mut sum_g = 0.0;
            let mut sum_gx = 0.0;
            let gxhat: Vec<f64> =
                (0..gy.cols).map(|i| gyr[i] * self.gamma.w[i]).collect();
            for i in 0..gy.cols {
                sum_g += gxhat[i];
                sum_gx += gxhat[i] * xh[i];
            }
            let gxr = gx.row_mut(r);
            for i in 0..gy.cols {
                gxr[i] = cache.inv_std[r] * (gxhat[i] - sum_g / n - xh[i] * sum_gx / n);
            }
        }
        gx
    }

    pub fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        f(&format!("{prefix}.gamma"), &mut self.gamma);
        f(&format!("{prefix}.beta"), &mut self.beta);
    }
}

/// Token embedding table `[vocab x dim]`.
#[derive(Debug, Clone)]
pub struct Embedding {
    pub vocab: usize,
    pub dim: usize,
    pub table: Param,
}

impl Embedding {
    pub fn new(rng: &mut ChaCha8Rng, vocab: usize, dim: usize) -> Embedding {
        Embedding { vocab, dim, table: Param::randn(rng, vocab * dim, 0.02) }
    }

    pub fn forward(&self, ids: &[u32]) -> Mat {
        let mut out = Mat::zeros(ids.len(), self.dim);
        for (r, &id) in ids.iter().enumerate() {
            let src = &self.table.w[id as usize * self.dim..(id as usize + 1) * self.dim];
            out.row_mut(r).copy_from_slice(src);
        }
        out
    }

    pub fn backward(&mut self, ids: &[u32], gy: &Mat) {
        for (r, &id) in ids.iter().enumerate() {
            let dst = &mut self.table.g[id as usize * self.dim..(id as usize + 1) * self.dim];
            for (g, d) in dst.iter_mut().zip(gy.row(r)) {
                *g += d;
            }
        }
    }

    pub fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        f(&format!("{prefix}.table"), &mut self.table);
    }
}

/// Row-wise softmax in place.
pub fn softmax_rows(x: &mut Mat) {
    for r in 0..x.rows {
        let row = x.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

/// Backward through a row-wise softmax given its output `y`.
pub fn softmax_rows_backward(y: &Mat, gy: &Mat) -> Mat {
    let mut gx = Mat::zeros(y.rows, y.cols);
    for r in 0..y.rows {
        let yr = y.row(r);
        let gr = gy.row(r);
        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
        let gxr = gx.row_mut(r);
        for i in 0..y.cols {
            gxr[i] = yr[i] * (gr[i] - dot);
        }
    }
    gx
}
