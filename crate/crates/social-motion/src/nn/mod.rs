//! Minimal dense neural-network machinery with hand-written backward passes.
//!
//! Everything is `f64`, single threaded and deterministic: parameter init
//! draws from a caller-seeded ChaCha stream and no step depends on iteration
//! order of hashed containers. Gradients accumulate into each [`Param`] until
//! an optimizer step consumes them.

mod adamw;
mod attention;
mod conv;
mod layers;
mod mat;

pub use adamw::{AdamW, AdamWConfig};
pub use attention::{AttentionCache, MultiHeadAttention};
pub use conv::{Conv1d, Upsample2};
pub use layers::{
    gelu, gelu_backward, gelu_forward, softmax_rows, softmax_rows_backward, Embedding,
    LayerNorm, LayerNormCache, Linear,
};
pub use mat::{matmul, matmul_nt, matmul_tn, Mat};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// One parameter tensor with its gradient accumulator.
#[derive(Debug, Clone)]
pub struct Param {
    pub w: Vec<f64>,
    pub g: Vec<f64>,
}

impl Param {
    pub fn zeros(n: usize) -> Param {
        Param { w: vec![0.0; n], g: vec![0.0; n] }
    }

    pub fn randn(rng: &mut ChaCha8Rng, n: usize, std: f64) -> Param {
        Param { w: (0..n).map(|_| std * gaussian(rng)).collect(), g: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.g.iter_mut().for_each(|g| *g = 0.0);
    }
}

/// Standard normal sample (Box-Muller, deterministic under the rng stream).
pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Named mutable access to every parameter tensor, in a fixed order.
pub trait VisitParams {
    fn visit_params(&mut self, f: &mut dyn FnMut(&str, &mut Param));

    fn zero_grad(&mut self) {
        self.visit_params(&mut |_, p| p.zero_grad());
    }

    fn param_count(&mut self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |_, p| n += p.len());
        n
    }

    /// Flattened copy of all parameter values (fd-check and serialization).
    fn flatten_params(&mut self) -> Vec<f64> {
        let mut out = Vec::new();
        self.visit_params(&mut |_, p| out.extend_from_slice(&p.w));
        out
    }

    fn unflatten_params(&mut self, flat: &[f64]) {
        let mut offset = 0;
        self.visit_params(&mut |_, p| {
            let len = p.w.len();
            p.w.copy_from_slice(&flat[offset..offset + len]);
            offset += len;
        });
        assert_eq!(offset, flat.len(), "parameter size mismatch");
    }

    fn flatten_grads(&mut self) -> Vec<f64> {
        let mut out = Vec::new();
        self.visit_params(&mut |_, p| out.extend_from_slice(&p.g));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;

    #[test]
    fn gaussian_moments_are_sane() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 20_000;
        let samples: Vec<f64> = (0..n).map(|_| gaussian(&mut rng)).collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.03, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn param_init_is_deterministic() {
        let a = Param::randn(&mut ChaCha8Rng::seed_from_u64(5), 16, 0.1);
        let b = Param::randn(&mut ChaCha8Rng::seed_from_u64(5), 16, 0.1);
        assert_eq!(a.w, b.w);
    }
}
