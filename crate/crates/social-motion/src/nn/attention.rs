//! Multi-head attention with optional causal masking, one sequence at a time.

use rand_chacha::ChaCha8Rng;

use super::layers::{softmax_rows, softmax_rows_backward, Linear};
use super::mat::{matmul, matmul_nt, matmul_tn, Mat};
use super::Param;

#[derive(Debug, Clone)]
pub struct MultiHeadAttention {
    pub dim: usize,
    pub heads: usize,
    pub wq: Linear,
    pub wk: Linear,
    pub wv: Linear,
    pub wo: Linear,
}

pub struct AttentionCache {
    q: Mat,
    k: Mat,
    v: Mat,
    /// Softmax outputs per head.
    attn: Vec<Mat>,
    concat: Mat,
}

impl MultiHeadAttention {
    pub fn new(rng: &mut ChaCha8Rng, dim: usize, heads: usize) -> MultiHeadAttention {
        assert_eq!(dim % heads, 0, "dim must be divisible by heads");
        MultiHeadAttention {
            dim,
            heads,
            wq: Linear::new(rng, dim, dim, false),
            wk: Linear::new(rng, dim, dim, false),
            wv: Linear::new(rng, dim, dim, false),
            wo: Linear::new(rng, dim, dim, false),
        }
    }

    /// `x_q` attends over `x_kv`; with `causal` each query sees keys up to its
    /// own position (self-attention only).
    pub fn forward(&self, x_q: &Mat, x_kv: &Mat, causal: bool) -> (Mat, AttentionCache) {
        let dh = self.dim / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let q = self.wq.forward(x_q);
        let k = self.wk.forward(x_kv);
        let v = self.wv.forward(x_kv);
        let mut concat = Mat::zeros(x_q.rows, self.dim);
        let mut attn = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let qh = q.columns(h * dh, dh);
            let kh = k.columns(h * dh, dh);
            let vh = v.columns(h * dh, dh);
            let mut scores = matmul_nt(&qh, &kh);
            for val in scores.data.iter_mut() {
                *val *= scale;
            }
            if causal {
                debug_assert_eq!(scores.rows, scores.cols);
                for i in 0..scores.rows {
                    for j in (i + 1)..scores.cols {
                        scores.row_mut(i)[j] = f64::NEG_INFINITY;
                    }
                }
            }
            softmax_rows(&mut scores);
            let out_h = matmul(&scores, &vh);
            concat.add_into_columns(h * dh, &out_h);
            attn.push(scores);
        }
        let y = self.wo.forward(&concat);
        (y, AttentionCache { q, k, v, attn, concat })
    }

    /// Returns gradients for `x_q` and `x_kv` (caller adds them; for
    /// self-attention they address the same tensor).
    pub fn backward(
        &mut self,
        x_q: &Mat,
        x_kv: &Mat,
        cache: &AttentionCache,
        gy: &Mat,
    ) -> (Mat, Mat) {
        let dh = self.dim / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let gconcat = self.wo.backward(&cache.concat, gy);

        let mut gq = Mat::zeros(cache.q.rows, self.dim);
        let mut gk = Mat::zeros(cache.k.rows, self.dim);
        let mut gv = Mat::zeros(cache.v.rows, self.dim);
        for h in 0..self.heads {
            let qh = cache.q.columns(h * dh, dh);
            let kh = cache.k.columns(h * dh, dh);
            let vh = cache.v.columns(h * dh, dh);
            let attn = &cache.attn[h];
            let gout_h = gconcat.columns(h * dh, dh);

            let gattn = matmul_nt(&gout_h, &vh);
            let gvh = matmul_tn(attn, &gout_h);
            let mut gscores = softmax_rows_backward(attn, &gattn);
            for v in gscores.data.iter_mut() {
                *v *= scale;
            }
            let gqh = matmul(&gscores, &kh);
            let gkh = matmul_tn(&gscores, &qh);
            gq.add_into_columns(h * dh, &gqh);
            gk.add_into_columns(h * dh, &gkh);
            gv.add_into_columns(h * dh, &gvh);
        }
        let gx_q = self.wq.backward(x_q, &gq);
        let mut gx_kv = self.wk.backward(x_kv, &gk);
        gx_kv.add_assign(&self.wv.backward(x_kv, &gv));
        (gx_q, gx_kv)
    }

    pub fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        self.wq.visit(&format!("{prefix}.q"), f);
        self.wk.visit(&format!("{prefix}.k"), f);
        self.wv.visit(&format!("{prefix}.v"), f);
        self.wo.visit(&format!("{prefix}.o"), f);
    }
}
