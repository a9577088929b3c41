//! Frechet distance between Gaussians fitted to two feature sets:
//! `|mu_r - mu_g|^2 + Tr(S_r + S_g - 2 (S_r S_g)^(1/2))`, with the matrix
//! square root taken through the symmetrized product
//! `sqrt(S_r)^T S_g sqrt(S_r)` and a small shrinkage term for small samples.

use super::linalg::{mat_mul_sq, sym_eigen, sym_sqrt, trace};
use super::MetricError;

/// Covariance shrinkage added to both sides, keeps small-sample covariances
/// positive definite.
const SHRINKAGE: f64 = 1e-6;

fn mean_and_cov(feats: &[Vec<f64>], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let n = feats.len() as f64;
    let mut mu = vec![0.0; dim];
    for f in feats {
        for (m, v) in mu.iter_mut().zip(f) {
            *m += v;
        }
    }
    for m in mu.iter_mut() {
        *m /= n;
    }
    let mut cov = vec![0.0; dim * dim];
    for f in feats {
        for i in 0..dim {
            let di = f[i] - mu[i];
            for j in 0..dim {
                cov[i * dim + j] += di * (f[j] - mu[j]);
            }
        }
    }
    let denom = (n - 1.0).max(1.0);
    for v in cov.iter_mut() {
        *v /= denom;
    }
    for i in 0..dim {
        cov[i * dim + i] += SHRINKAGE;
    }
    (mu, cov)
}

pub fn fid(real: &[Vec<f64>], generated: &[Vec<f64>]) -> Result<f64, MetricError> {
    if real.len() < 2 || generated.len() < 2 {
        return Err(MetricError::TooFew {
            what: "feature vectors",
            min: 2,
            got: real.len().min(generated.len()),
        });
    }
    let dim = real[0].len();
    for f in real.iter().chain(generated) {
        if f.len() != dim {
            return Err(MetricError::ShapeMismatch(format!(
                "feature dims {} vs {dim}",
                f.len()
            )));
        }
        if !f.iter().all(|v| v.is_finite()) {
            return Err(MetricError::NonFinite("features"));
        }
    }
    let (mu_r, cov_r) = mean_and_cov(real, dim);
    let (mu_g, cov_g) = mean_and_cov(generated, dim);

    let mean_term: f64 = mu_r.iter().zip(&mu_g).map(|(a, b)| (a - b) * (a - b)).sum();

    let root_r = sym_sqrt(&cov_r, dim);
    let prod = mat_mul_sq(&mat_mul_sq(&root_r, &cov_g, dim), &root_r, dim);
    // Symmetrize against round-off before the eigen solve.
    let mut sym = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            sym[i * dim + j] = 0.5 * (prod[i * dim + j] + prod[j * dim + i]);
        }
    }
    let (eigvals, _) = sym_eigen(&sym, dim);
    let tr_sqrt: f64 = eigvals.iter().map(|&l| l.max(0.0).sqrt()).sum();

    Ok((mean_term + trace(&cov_r, dim) + trace(&cov_g, dim) - 2.0 * tr_sqrt).max(0.0))
}
