//! EMA codebook: nearest-entry quantization plus the moving-average state
//! (cluster counts and sums) that re-estimates entries during training.

use rand_chacha::ChaCha8Rng;

use crate::nn::{gaussian, Mat};

use super::VQError;

#[derive(Debug, Clone)]
pub struct Codebook {
    pub size: usize,
    pub dim: usize,
    /// Entry vectors, `[size x dim]` row-major.
    pub entries: Vec<f64>,
    pub ema_counts: Vec<f64>,
    pub ema_sums: Vec<f64>,
    /// Consecutive training steps each code has gone unassigned.
    pub unused_steps: Vec<u64>,
}

/// Output of nearest-entry quantization.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizeResult {
    pub indices: Vec<usize>,
    /// Exact codebook rows for each latent, `[n x dim]`.
    pub quantized: Mat,
    /// Squared Euclidean error per latent vector.
    pub errors: Vec<f64>,
}

impl Codebook {
    pub fn random(rng: &mut ChaCha8Rng, size: usize, dim: usize) -> Codebook {
        let entries: Vec<f64> = (0..size * dim).map(|_| 0.1 * gaussian(rng)).collect();
        Codebook {
            size,
            dim,
            ema_counts: vec![0.0; size],
            ema_sums: entries.clone(),
            entries,
            unused_steps: vec![0; size],
        }
    }

    pub fn entry(&self, k: usize) -> &[f64] {
        &self.entries[k * self.dim..(k + 1) * self.dim]
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|v| v.is_finite())
            && self.ema_counts.iter().all(|v| v.is_finite() && *v >= 0.0)
            && self.ema_sums.iter().all(|v| v.is_finite())
    }
}

/// Nearest codebook entry per latent row; ties break to the lowest index and
/// quantized rows are bit-identical copies of codebook rows.
pub fn quantize_latents(latents: &Mat, cb: &Codebook) -> Result<QuantizeResult, VQError> {
    if cb.size == 0 {
        return Err(VQError::EmptyCodebook);
    }
    if latents.cols != cb.dim {
        return Err(VQError::LatentWidth { got: latents.cols, want: cb.dim });
    }
    let n = latents.rows;
    let mut indices = Vec::with_capacity(n);
    let mut errors = Vec::with_capacity(n);
    let mut quantized = Mat::zeros(n, cb.dim);
    for r in 0..n {
        let z = latents.row(r);
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for k in 0..cb.size {
            let e = cb.entry(k);
            let mut d = 0.0;
            for (a, b) in z.iter().zip(e) {
                let diff = a - b;
                d += diff * diff;
            }
            if d < best_d {
                best_d = d;
                best = k;
            }
        }
        indices.push(best);
        errors.push(best_d);
        quantized.row_mut(r).copy_from_slice(cb.entry(best));
    }
    Ok(QuantizeResult { indices, quantized, errors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;

    #[test]
    fn exact_match_has_zero_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cb = Codebook::random(&mut rng, 32, 6);
        let mut latents = Mat::zeros(1, 6);
        latents.row_mut(0).copy_from_slice(cb.entry(17));
        let q = quantize_latents(&latents, &cb).unwrap();
        assert_eq!(q.indices, vec![17]);
        assert_eq!(q.errors[0], 0.0);
        assert_eq!(q.quantized.row(0), cb.entry(17));
    }

    #[test]
    fn matches_brute_force_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cb = Codebook::random(&mut rng, 24, 5);
        for _ in 0..50 {
            let latents = Mat::from_vec(
                8,
                5,
                (0..40).map(|_| rng.random_range(-1.0..1.0)).collect(),
            );
            let q = quantize_latents(&latents, &cb).unwrap();
            for r in 0..8 {
                // Independent scan with explicit loops.
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for k in 0..cb.size {
                    let mut d = 0.0;
                    for i in 0..5 {
                        let diff = latents.row(r)[i] - cb.entry(k)[i];
                        d += diff * diff;
                    }
                    if d < best_d {
                        best_d = d;
                        best = k;
                    }
                }
                assert_eq!(q.indices[r], best);
                assert!((q.errors[r] - best_d).abs() < 1e-15);
                assert_eq!(q.quantized.row(r), cb.entry(best));
            }
        }
    }

    #[test]
    fn ties_break_to_lowest_index() {
        let mut cb = Codebook::random(&mut ChaCha8Rng::seed_from_u64(3), 4, 2);
        // Entries 1 and 3 identical; latent exactly on them.
        let dup: Vec<f64> = cb.entry(1).to_vec();
        cb.entries[3 * 2..4 * 2].copy_from_slice(&dup);
        let mut latents = Mat::zeros(1, 2);
        latents.row_mut(0).copy_from_slice(&dup);
        let q = quantize_latents(&latents, &cb).unwrap();
        assert_eq!(q.indices, vec![1]);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let cb = Codebook::random(&mut ChaCha8Rng::seed_from_u64(4), 4, 3);
        let latents = Mat::zeros(2, 5);
        assert_eq!(
            quantize_latents(&latents, &cb),
            Err(VQError::LatentWidth { got: 5, want: 3 })
        );
    }
}
