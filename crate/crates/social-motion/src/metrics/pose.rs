//! Joint-position error metrics: MPJPE, PA-MPJPE (optimal per-frame
//! similarity alignment) and mean per-joint acceleration error.

use crate::motion::Positions;

use super::linalg::sym_eigen;
use super::MetricError;

fn check_paired(pred: &[Positions], gt: &[Positions]) -> Result<(), MetricError> {
    if pred.len() != gt.len() {
        return Err(MetricError::ShapeMismatch(format!(
            "{} predicted sequences vs {} reference",
            pred.len(),
            gt.len()
        )));
    }
    if pred.is_empty() {
        return Err(MetricError::TooFew { what: "sequences", min: 1, got: 0 });
    }
    for (i, (p, g)) in pred.iter().zip(gt).enumerate() {
        if p.frames != g.frames || p.joints != g.joints {
            return Err(MetricError::ShapeMismatch(format!(
                "sequence {i}: {}x{} vs {}x{}",
                p.frames, p.joints, g.frames, g.joints
            )));
        }
    }
    Ok(())
}

/// Mean Euclidean joint-position error in millimeters over all persons,
/// frames and joints.
pub fn mpjpe(pred: &[Positions], gt: &[Positions]) -> Result<f64, MetricError> {
    check_paired(pred, gt)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (p, g) in pred.iter().zip(gt) {
        for t in 0..p.frames {
            for j in 0..p.joints {
                let a = p.get(t, j);
                let b = g.get(t, j);
                sum += ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2))
                    .sqrt();
                count += 1;
            }
        }
    }
    Ok(1000.0 * sum / count as f64)
}

/// Optimal similarity (rotation + translation + scale) aligning `src` onto
/// `dst`, both `n x 3` point sets flattened row-major. Returns the aligned
/// copy of `src`.
pub fn procrustes_align(src: &[f64], dst: &[f64], frame: usize) -> Result<Vec<f64>, MetricError> {
    let n = src.len() / 3;
    if n < 3 {
        return Err(MetricError::TooFew { what: "joints", min: 3, got: n });
    }
    let mean = |pts: &[f64]| -> [f64; 3] {
        let mut m = [0.0; 3];
        for p in pts.chunks_exact(3) {
            m[0] += p[0];
            m[1] += p[1];
            m[2] += p[2];
        }
        [m[0] / n as f64, m[1] / n as f64, m[2] / n as f64]
    };
    let mu_s = mean(src);
    let mu_d = mean(dst);

    // Cross-covariance H = sum (d - mu_d)(s - mu_s)^T / n and source spread.
    let mut h = [0.0f64; 9];
    let mut var_s = 0.0;
    for (s, d) in src.chunks_exact(3).zip(dst.chunks_exact(3)) {
        let sc = [s[0] - mu_s[0], s[1] - mu_s[1], s[2] - mu_s[2]];
        let dc = [d[0] - mu_d[0], d[1] - mu_d[1], d[2] - mu_d[2]];
        for r in 0..3 {
            for c in 0..3 {
                h[r * 3 + c] += dc[r] * sc[c];
            }
        }
        var_s += sc[0] * sc[0] + sc[1] * sc[1] + sc[2] * sc[2];
    }
    let nf = n as f64;
    for v in h.iter_mut() {
        *v /= nf;
    }
    var_s /= nf;

    // SVD of H via the eigendecomposition of H^T H.
    let mut hth = [0.0f64; 9];
    for i in 0..3 {
        for j in 0..3 {
            let mut s = 0.0;
            for k in 0..3 {
                s += h[k * 3 + i] * h[k * 3 + j];
            }
            hth[i * 3 + j] = s;
        }
    }
    let (eigvals, v) = sym_eigen(&hth, 3);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eigvals[b].total_cmp(&eigvals[a]));
    let sigma: Vec<f64> = order.iter().map(|&i| eigvals[i].max(0.0).sqrt()).collect();
    if sigma[1] < 1e-12 * sigma[0].max(1e-12) {
        return Err(MetricError::DegenerateCloud(frame));
    }
    // Right singular vectors, re-ordered.
    let mut vs = [0.0f64; 9];
    for (col, &src_col) in order.iter().enumerate() {
        for r in 0..3 {
            vs[r * 3 + col] = v[r * 3 + src_col];
        }
    }
    // Left singular vectors: u_i = H v_i / sigma_i; the smallest may need
    // completion by a cross product when sigma_2 ~ 0 (planar clouds).
    let mut us = [0.0f64; 9];
    for col in 0..3 {
        if sigma[col] > 1e-12 * sigma[0].max(1e-12) {
            for r in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += h[r * 3 + k] * vs[k * 3 + col];
                }
                us[r * 3 + col] = s / sigma[col];
            }
        } else {
            let u0 = [us[0], us[3], us[6]];
            let u1 = [us[1], us[4], us[7]];
            let c = [
                u0[1] * u1[2] - u0[2] * u1[1],
                u0[2] * u1[0] - u0[0] * u1[2],
                u0[0] * u1[1] - u0[1] * u1[0],
            ];
            let norm = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt().max(1e-300);
            us[col] = c[0] / norm;
            us[3 + col] = c[1] / norm;
            us[6 + col] = c[2] / norm;
        }
    }
    let det3 = |m: &[f64; 9]| -> f64 {
        m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
            + m[2] * (m[3] * m[7] - m[4] * m[6])
    };
    let d = if det3(&us) * det3(&vs) < 0.0 { -1.0 } else { 1.0 };
    // R = U diag(1,1,d) V^T
    let mut rot = [0.0f64; 9];
    for i in 0..3 {
        for j in 0..3 {
            let mut s = 0.0;
            for k in 0..3 {
                let dk = if k == 2 { d } else { 1.0 };
                s += us[i * 3 + k] * dk * vs[j * 3 + k];
            }
            rot[i * 3 + j] = s;
        }
    }
    let scale = (sigma[0] + sigma[1] + d * sigma[2]) / var_s.max(1e-300);

    let mut out = vec![0.0; src.len()];
    for (o, s) in out.chunks_exact_mut(3).zip(src.chunks_exact(3)) {
        let sc = [s[0] - mu_s[0], s[1] - mu_s[1], s[2] - mu_s[2]];
        for r in 0..3 {
            let mut v = 0.0;
            for c in 0..3 {
                v += rot[r * 3 + c] * sc[c];
            }
            o[r] = scale * v + mu_d[r];
        }
    }
    Ok(out)
}

/// MPJPE after per-frame optimal similarity alignment of the prediction onto
/// the reference.
pub fn pa_mpjpe(pred: &[Positions], gt: &[Positions]) -> Result<f64, MetricError> {
    check_paired(pred, gt)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (p, g) in pred.iter().zip(gt) {
        if p.joints < 3 {
            return Err(MetricError::TooFew { what: "joints", min: 3, got: p.joints });
        }
        for t in 0..p.frames {
            let aligned = procrustes_align(p.frame(t), g.frame(t), t)?;
            for (a, b) in aligned.chunks_exact(3).zip(g.frame(t).chunks_exact(3)) {
                sum += ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2))
                    .sqrt();
                count += 1;
            }
        }
    }
    Ok(1000.0 * sum / count as f64)
}

/// Mean per-joint acceleration error in mm/frame^2: accelerations are second
/// finite differences of the joint trajectories.
pub fn accel_error(pred: &[Positions], gt: &[Positions]) -> Result<f64, MetricError> {
    check_paired(pred, gt)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (p, g) in pred.iter().zip(gt) {
        if p.frames < 3 {
            return Err(MetricError::TooFew { what: "frames", min: 3, got: p.frames });
        }
        for t in 1..p.frames - 1 {
            for j in 0..p.joints {
                let mut d2 = 0.0;
                for axis in 0..3 {
                    let ap = p.get(t + 1, j)[axis] - 2.0 * p.get(t, j)[axis]
                        + p.get(t - 1, j)[axis];
                    let ag = g.get(t + 1, j)[axis] - 2.0 * g.get(t, j)[axis]
                        + g.get(t - 1, j)[axis];
                    d2 += (ap - ag) * (ap - ag);
                }
                sum += d2.sqrt();
                count += 1;
            }
        }
    }
    Ok(1000.0 * sum / count as f64)
}
