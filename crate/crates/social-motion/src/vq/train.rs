//! Tokenizer training: smooth-L1 reconstruction with velocity regularization
//! and a commitment term, straight-through gradients across the quantizer,
//! EMA codebook re-estimation and dead-code resets.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::nn::{AdamW, AdamWConfig, Mat, VisitParams};
use crate::xh3d::PersonFeatures;

use super::codebook::{quantize_latents, Codebook};
use super::model::VQModel;
use super::{VQConfig, VQError};

#[derive(Debug, Error)]
pub enum VQTrainError {
    #[error(transparent)]
    Model(#[from] VQError),
    #[error("empty training batch")]
    EmptyBatch,
    #[error("window length {0} is not a multiple of 4")]
    BadWindowLength(usize),
    #[error("non-finite loss at step {step}; step rejected")]
    NonFiniteLoss { step: usize },
    #[error("training diverged at iteration {iter} (loss {loss:.3e})")]
    Diverged { iter: usize, loss: f64 },
    #[error("assignment shape mismatch: {assignments} assignments for {latents} latents")]
    AssignmentShape { assignments: usize, latents: usize },
}

/// Loss decomposition for one step. `embedding` is the codebook-side term,
/// computed as a diagnostic only: the codebook learns by EMA, not gradients.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossReport {
    pub total: f64,
    pub reconstruction: f64,
    pub velocity: f64,
    pub commitment: f64,
    pub embedding: f64,
}

fn smooth_l1(d: f64) -> f64 {
    if d.abs() < 1.0 {
        0.5 * d * d
    } else {
        d.abs() - 0.5
    }
}

fn smooth_l1_grad(d: f64) -> f64 {
    if d.abs() < 1.0 {
        d
    } else {
        d.signum()
    }
}

struct WindowForward {
    xn: Mat,
    z: Mat,
    assignments: Vec<usize>,
    quantized: Mat,
    y: Mat,
    enc_cache: super::model::EncoderCache,
    dec_cache: super::model::DecoderCache,
    losses: LossReport,
}

fn window_forward(
    model: &VQModel,
    window: &PersonFeatures,
    bypass: Option<&[usize]>,
) -> Result<WindowForward, VQTrainError> {
    if !window.frames.is_multiple_of(4) || window.frames == 0 {
        return Err(VQTrainError::BadWindowLength(window.frames));
    }
    if window.width() != model.cfg.feature_dim {
        return Err(VQTrainError::Model(VQError::FeatureWidth {
            got: window.width(),
            want: model.cfg.feature_dim,
        }));
    }
    let x = Mat::from_vec(window.frames, window.width(), window.data.clone());
    let xn = model.stats.normalize(&x);
    let (z, enc_cache) = model.encode_latents(&xn);

    // With the quantizer bypassed the decoder consumes the latents directly
    // and the commitment term targets the frozen entries: the loss becomes a
    // smooth function of the parameters, which finite differences can probe.
    let (assignments, quantized, dec_input) = match bypass {
        Some(idx) => {
            if idx.len() != z.rows {
                return Err(VQTrainError::AssignmentShape {
                    assignments: idx.len(),
                    latents: z.rows,
                });
            }
            let mut q = Mat::zeros(z.rows, z.cols);
            for (r, &k) in idx.iter().enumerate() {
                q.row_mut(r).copy_from_slice(model.codebook.entry(k));
            }
            (idx.to_vec(), q, z.clone())
        }
        None => {
            let q = quantize_latents(&z, &model.codebook)?;
            (q.indices, q.quantized.clone(), q.quantized)
        }
    };

    let (y, dec_cache) = model.decode_latents(&dec_input);

    let n_el = (y.rows * y.cols) as f64;
    let reconstruction = y
        .data
        .iter()
        .zip(&xn.data)
        .map(|(a, b)| smooth_l1(a - b))
        .sum::<f64>()
        / n_el;

    let n_vel = ((y.rows - 1) * y.cols) as f64;
    let mut velocity = 0.0;
    for t in 0..y.rows - 1 {
        let (ya, yb) = (y.row(t), y.row(t + 1));
        let (xa, xb) = (xn.row(t), xn.row(t + 1));
        for i in 0..y.cols {
            velocity += smooth_l1((yb[i] - ya[i]) - (xb[i] - xa[i]));
        }
    }
    velocity /= n_vel;

    let n_lat = (z.rows * z.cols) as f64;
    let mut sq = 0.0;
    for (a, b) in z.data.iter().zip(&quantized.data) {
        let d = a - b;
        sq += d * d;
    }
    let embedding = sq / n_lat;
    let commitment = model.cfg.commitment_weight * embedding;

    let total = reconstruction + model.cfg.velocity_weight * velocity + commitment;
    Ok(WindowForward {
        xn,
        z,
        assignments,
        quantized,
        y,
        enc_cache,
        dec_cache,
        losses: LossReport { total, reconstruction, velocity, commitment, embedding },
    })
}

/// Gradient of the window loss with respect to the decoder output.
fn output_gradient(model: &VQModel, fwd: &WindowForward, scale: f64) -> Mat {
    let y = &fwd.y;
    let xn = &fwd.xn;
    let n_el = (y.rows * y.cols) as f64;
    let n_vel = ((y.rows - 1) * y.cols) as f64;
    let mut gy = Mat::zeros(y.rows, y.cols);
    for i in 0..y.data.len() {
        gy.data[i] = scale * smooth_l1_grad(y.data[i] - xn.data[i]) / n_el;
    }
    let vw = model.cfg.velocity_weight;
    for t in 0..y.rows - 1 {
        for i in 0..y.cols {
            let d = (y.row(t + 1)[i] - y.row(t)[i]) - (xn.row(t + 1)[i] - xn.row(t)[i]);
            let g = scale * vw * smooth_l1_grad(d) / n_vel;
            gy.row_mut(t + 1)[i] += g;
            gy.row_mut(t)[i] -= g;
        }
    }
    gy
}

/// Backpropagate one window. The quantizer is crossed straight-through: the
/// decoder-input gradient is copied to the encoder output, then the
/// commitment gradient `beta * 2(z - e)/n` is added on top.
fn window_backward(model: &mut VQModel, fwd: &WindowForward, scale: f64) {
    let gy = output_gradient(model, fwd, scale);
    let gdec_in = model.backward_decoder(&fwd.dec_cache, &gy);
    let n_lat = (fwd.z.rows * fwd.z.cols) as f64;
    let beta = model.cfg.commitment_weight;
    let mut gz = gdec_in;
    for i in 0..gz.data.len() {
        gz.data[i] += scale * beta * 2.0 * (fwd.z.data[i] - fwd.quantized.data[i]) / n_lat;
    }
    model.backward_encoder(&fwd.enc_cache, &gz);
}

/// Loss of one window without touching gradients. `bypass` skips the
/// quantizer (identity pass-through) with the commitment term pinned to the
/// given entries, which makes the loss a smooth function of the parameters
/// (used by finite-difference checks).
pub fn vq_loss(
    model: &VQModel,
    window: &PersonFeatures,
    bypass: Option<&[usize]>,
) -> Result<LossReport, VQTrainError> {
    Ok(window_forward(model, window, bypass)?.losses)
}

/// Code assignments the quantizer picks for a window.
pub fn vq_assignments(
    model: &VQModel,
    window: &PersonFeatures,
) -> Result<Vec<usize>, VQTrainError> {
    Ok(window_forward(model, window, None)?.assignments)
}

/// Accumulate gradients of the window loss into the model (no optimizer
/// step). Returns the loss decomposition.
pub fn vq_backward(
    model: &mut VQModel,
    window: &PersonFeatures,
    bypass: Option<&[usize]>,
) -> Result<LossReport, VQTrainError> {
    let fwd = window_forward(model, window, bypass)?;
    window_backward(model, &fwd, 1.0);
    Ok(fwd.losses)
}

/// Latents and assignments gathered for the EMA update after a step.
#[derive(Debug, Clone)]
pub struct StepLatents {
    pub latents: Mat,
    pub assignments: Vec<usize>,
}

/// One encoder/decoder gradient step over a batch of windows. The codebook is
/// untouched; latents and assignments are returned for the EMA update. A
/// non-finite loss rejects the step (gradients cleared, parameters intact).
pub fn vq_train_step(
    batch: &[PersonFeatures],
    model: &mut VQModel,
    opt: &mut AdamW,
) -> Result<(LossReport, StepLatents), VQTrainError> {
    if batch.is_empty() {
        return Err(VQTrainError::EmptyBatch);
    }
    let scale = 1.0 / batch.len() as f64;
    let mut sum = LossReport {
        total: 0.0,
        reconstruction: 0.0,
        velocity: 0.0,
        commitment: 0.0,
        embedding: 0.0,
    };
    let mut all_latents: Vec<f64> = Vec::new();
    let mut all_assignments: Vec<usize> = Vec::new();
    let mut latent_cols = model.cfg.latent_dim;
    for window in batch {
        let fwd = window_forward(model, window, None)?;
        sum.total += scale * fwd.losses.total;
        sum.reconstruction += scale * fwd.losses.reconstruction;
        sum.velocity += scale * fwd.losses.velocity;
        sum.commitment += scale * fwd.losses.commitment;
        sum.embedding += scale * fwd.losses.embedding;
        window_backward(model, &fwd, scale);
        latent_cols = fwd.z.cols;
        all_latents.extend_from_slice(&fwd.z.data);
        all_assignments.extend_from_slice(&fwd.assignments);
    }
    if !sum.total.is_finite() {
        model.zero_grad();
        return Err(VQTrainError::NonFiniteLoss { step: opt.step_count() });
    }
    opt.step(model);
    let rows = all_assignments.len();
    Ok((
        sum,
        StepLatents {
            latents: Mat::from_vec(rows, latent_cols, all_latents),
            assignments: all_assignments,
        },
    ))
}

/// EMA re-estimation: counts and sums decay toward the batch statistics and
/// every entry assigned in this batch moves to sums/counts. Entries with no
/// assignments in the batch stay bit-identical.
pub fn codebook_ema_update(
    assignments: &[usize],
    latents: &Mat,
    cb: &mut Codebook,
    decay: f64,
) -> Result<(), VQTrainError> {
    if assignments.len() != latents.rows {
        return Err(VQTrainError::AssignmentShape {
            assignments: assignments.len(),
            latents: latents.rows,
        });
    }
    if latents.cols != cb.dim {
        return Err(VQTrainError::Model(VQError::LatentWidth {
            got: latents.cols,
            want: cb.dim,
        }));
    }
    let mut batch_counts = vec![0.0f64; cb.size];
    let mut batch_sums = vec![0.0f64; cb.size * cb.dim];
    for (r, &k) in assignments.iter().enumerate() {
        batch_counts[k] += 1.0;
        let dst = &mut batch_sums[k * cb.dim..(k + 1) * cb.dim];
        for (d, v) in dst.iter_mut().zip(latents.row(r)) {
            *d += v;
        }
    }
    for k in 0..cb.size {
        cb.ema_counts[k] = decay * cb.ema_counts[k] + (1.0 - decay) * batch_counts[k];
        for i in 0..cb.dim {
            let idx = k * cb.dim + i;
            cb.ema_sums[idx] = decay * cb.ema_sums[idx] + (1.0 - decay) * batch_sums[idx];
        }
        if batch_counts[k] > 0.0 && cb.ema_counts[k] > 0.0 {
            for i in 0..cb.dim {
                cb.entries[k * cb.dim + i] = cb.ema_sums[k * cb.dim + i] / cb.ema_counts[k];
            }
        }
    }
    Ok(())
}

/// Training record: per-iteration losses and per-epoch codebook utilization.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TrainCurve {
    pub losses: Vec<LossReport>,
    /// Fraction of codes used at least once, sampled once per epoch.
    pub utilization: Vec<f64>,
    pub final_utilization: f64,
}

/// Full tokenizer training loop: gradient steps on encoder/decoder, EMA
/// codebook updates, dead-code resets, divergence guard.
pub fn train_vq(
    windows: &[PersonFeatures],
    cfg: &VQConfig,
) -> Result<(VQModel, TrainCurve), VQTrainError> {
    if windows.is_empty() {
        return Err(VQTrainError::EmptyBatch);
    }
    cfg.validate()?;
    let mut model = VQModel::new(cfg.clone())?;
    model.stats = super::model::FeatureStats::fit(windows);

    // Separate streams so the batch schedule is identical across runs that
    // differ only in codebook size.
    let mut batch_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x5eed_0001));
    let mut reset_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x5eed_0002));

    let mut opt = AdamW::new(AdamWConfig {
        lr: cfg.learning_rate,
        warmup_steps: 20,
        ..Default::default()
    });

    // Data-dependent codebook init: seed entries from encoder latents of a
    // first batch (tiled with noise when the batch is smaller than the
    // codebook) so early quantization spreads over many codes.
    {
        let probe: Vec<&PersonFeatures> = (0..cfg.batch_size.max(4))
            .map(|_| &windows[batch_rng.random_range(0..windows.len())])
            .collect();
        let mut latents: Vec<Vec<f64>> = Vec::new();
        for window in probe {
            let fwd = window_forward(&model, window, None)?;
            for r in 0..fwd.z.rows {
                latents.push(fwd.z.row(r).to_vec());
            }
        }
        let dim = model.codebook.dim;
        for k in 0..cfg.codebook_size {
            let base = &latents[k % latents.len()];
            let noisy: Vec<f64> = base
                .iter()
                .map(|v| v + 0.01 * crate::nn::gaussian(&mut reset_rng))
                .collect();
            model.codebook.entries[k * dim..(k + 1) * dim].copy_from_slice(&noisy);
            model.codebook.ema_sums[k * dim..(k + 1) * dim].copy_from_slice(&noisy);
            model.codebook.ema_counts[k] = 1.0;
        }
    }

    let epoch_len = windows.len().div_ceil(cfg.batch_size).max(1);
    let mut used_this_epoch = vec![false; cfg.codebook_size];
    let mut losses = Vec::with_capacity(cfg.iterations);
    let mut utilization = Vec::new();

    for iter in 0..cfg.iterations {
        let batch: Vec<PersonFeatures> = (0..cfg.batch_size)
            .map(|_| windows[batch_rng.random_range(0..windows.len())].clone())
            .collect();
        let (report, step_latents) = vq_train_step(&batch, &mut model, &mut opt)?;
        if report.total > 1e6 {
            return Err(VQTrainError::Diverged { iter, loss: report.total });
        }

        codebook_ema_update(
            &step_latents.assignments,
            &step_latents.latents,
            &mut model.codebook,
            cfg.ema_decay,
        )?;

        // Dead-code bookkeeping and reset from a random batch latent.
        let mut batch_used = vec![false; cfg.codebook_size];
        for &k in &step_latents.assignments {
            batch_used[k] = true;
            used_this_epoch[k] = true;
        }
        for k in 0..cfg.codebook_size {
            if batch_used[k] {
                model.codebook.unused_steps[k] = 0;
            } else {
                model.codebook.unused_steps[k] += 1;
                if model.codebook.unused_steps[k] >= cfg.dead_code_steps as u64 {
                    let row = reset_rng.random_range(0..step_latents.latents.rows);
                    let latent = step_latents.latents.row(row).to_vec();
                    let dim = model.codebook.dim;
                    model.codebook.entries[k * dim..(k + 1) * dim].copy_from_slice(&latent);
                    model.codebook.ema_sums[k * dim..(k + 1) * dim].copy_from_slice(&latent);
                    model.codebook.ema_counts[k] = 1.0;
                    model.codebook.unused_steps[k] = 0;
                }
            }
        }

        losses.push(report);
        if (iter + 1) % epoch_len == 0 {
            let used = used_this_epoch.iter().filter(|&&u| u).count();
            utilization.push(used as f64 / cfg.codebook_size as f64);
            used_this_epoch.iter_mut().for_each(|u| *u = false);
        }
    }

    let final_utilization = utilization.last().copied().unwrap_or(0.0);
    Ok((model, TrainCurve { losses, utilization, final_utilization }))
}
