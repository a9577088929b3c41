//! Small dense symmetric linear algebra: cyclic Jacobi eigendecomposition
//! and the symmetric matrix square root built on it.

/// Eigendecomposition of a symmetric `n x n` matrix (row-major). Returns
/// eigenvalues and the eigenvector matrix `v` (row-major, columns are
/// eigenvectors): `a = v diag(l) v^T`.
pub fn sym_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let idx = |r: usize, c: usize| r * n + c;
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[idx(p, q)] * m[idx(p, q)];
            }
        }
        if off.sqrt() < 1e-13 * (1.0 + frob(&m)) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[idx(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = m[idx(p, p)];
                let aqq = m[idx(q, q)];
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[idx(k, p)];
                    let mkq = m[idx(k, q)];
                    m[idx(k, p)] = c * mkp - s * mkq;
                    m[idx(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[idx(p, k)];
                    let mqk = m[idx(q, k)];
                    m[idx(p, k)] = c * mpk - s * mqk;
                    m[idx(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[idx(k, p)];
                    let vkq = v[idx(k, q)];
                    v[idx(k, p)] = c * vkp - s * vkq;
                    v[idx(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let eigvals: Vec<f64> = (0..n).map(|i| m[idx(i, i)]).collect();
    (eigvals, v)
}

fn frob(m: &[f64]) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Symmetric positive-semidefinite square root: eigenvalues are clamped at
/// zero before the root.
pub fn sym_sqrt(a: &[f64], n: usize) -> Vec<f64> {
    let (eigvals, v) = sym_eigen(a, n);
    let roots: Vec<f64> = eigvals.iter().map(|&l| l.max(0.0).sqrt()).collect();
    // v diag(roots) v^T
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                s += v[i * n + k] * roots[k] * v[j * n + k];
            }
            out[i * n + j] = s;
        }
    }
    out
}

pub fn mat_mul_sq(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let av = a[i * n + k];
            if av == 0.0 {
                continue;
            }
            for j in 0..n {
                out[i * n + j] += av * b[k * n + j];
            }
        }
    }
    out
}

pub fn trace(a: &[f64], n: usize) -> f64 {
    (0..n).map(|i| a[i * n + i]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = rng.random_range(-1.0..1.0);
                a[i * n + j] = v;
                a[j * n + i] = v;
            }
        }
        a
    }

    #[test]
    fn reconstruction_from_eigenpairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [2usize, 3, 5, 8] {
            let a = random_sym(&mut rng, n);
            let (l, v) = sym_eigen(&a, n);
            for i in 0..n {
                for j in 0..n {
                    let mut s = 0.0;
                    for k in 0..n {
                        s += v[i * n + k] * l[k] * v[j * n + k];
                    }
                    assert!((s - a[i * n + j]).abs() < 1e-10, "n={n} ({i},{j})");
                }
            }
            // Orthonormal eigenvectors.
            for c1 in 0..n {
                for c2 in 0..n {
                    let dot: f64 = (0..n).map(|r| v[r * n + c1] * v[r * n + c2]).sum();
                    let want = if c1 == c2 { 1.0 } else { 0.0 };
                    assert!((dot - want).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn known_2x2_eigenvalues() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3.
        let (mut l, _) = sym_eigen(&[2.0, 1.0, 1.0, 2.0], 2);
        l.sort_by(f64::total_cmp);
        assert!((l[0] - 1.0).abs() < 1e-12);
        assert!((l[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn sqrt_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in [2usize, 4, 6] {
            // PSD matrix: B B^T.
            let b = random_sym(&mut rng, n);
            let a = mat_mul_sq(&b, &b, n);
            let r = sym_sqrt(&a, n);
            let sq = mat_mul_sq(&r, &r, n);
            for (x, y) in sq.iter().zip(&a) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
