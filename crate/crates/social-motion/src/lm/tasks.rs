//! Supervised task-pair construction from tokenized scenes: alignment in
//! both directions, forecasting, reaction generation and in-between
//! completion.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::grammar::{serialize_social, UnifiedVocabulary, TOKEN_EOS};
use crate::relpose::RelPoseBins;

use super::{LmError, TaskPair};

/// A scene after motion and relative-pose tokenization.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TokenizedScene {
    pub caption: String,
    /// Motion codebook indices per person, reference first.
    pub runs: Vec<Vec<u32>>,
    /// One bin triplet per non-reference person.
    pub rel_bins: Vec<RelPoseBins>,
    pub frames: usize,
    pub fps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupervisedTask {
    TextToMotion,
    MotionToText,
    Forecast,
    Reaction,
    Inbetween,
}

impl SupervisedTask {
    pub fn tag(&self) -> &'static str {
        match self {
            SupervisedTask::TextToMotion => "text_to_motion",
            SupervisedTask::MotionToText => "motion_to_text",
            SupervisedTask::Forecast => "motion_prediction",
            SupervisedTask::Reaction => "reaction_generation",
            SupervisedTask::Inbetween => "motion_inbetween",
        }
    }
}

fn run_triplet_ids(
    run: &[u32],
    bins: Option<&RelPoseBins>,
    vocab: &UnifiedVocabulary,
    out: &mut Vec<u32>,
) -> Result<(), LmError> {
    if let Some(b) = bins {
        out.push(vocab.rel_x_token(b.x as u32)?);
        out.push(vocab.rel_z_token(b.z as u32)?);
        out.push(vocab.rel_theta_token(b.theta as u32)?);
    }
    for &code in run {
        out.push(vocab.motion_token(code)?);
    }
    Ok(())
}

/// Assemble a full motion block from per-person runs, allowing a sentinel to
/// stand in for a masked run.
fn assemble_block(
    parts: &[Option<&[u32]>],
    masks: &[Option<u32>],
    bins: &[RelPoseBins],
    vocab: &UnifiedVocabulary,
) -> Result<Vec<u32>, LmError> {
    let mut out = vec![vocab.motion_start()];
    for (i, (part, mask)) in parts.iter().zip(masks).enumerate() {
        if i > 0 {
            let b = &bins[i - 1];
            out.push(vocab.rel_x_token(b.x as u32)?);
            out.push(vocab.rel_z_token(b.z as u32)?);
            out.push(vocab.rel_theta_token(b.theta as u32)?);
        }
        match (part, mask) {
            (Some(run), None) => {
                for &code in *run {
                    out.push(vocab.motion_token(code)?);
                }
            }
            (None, Some(sentinel)) => out.push(*sentinel),
            _ => unreachable!("each slot is either a run or a mask"),
        }
    }
    out.push(vocab.motion_end());
    Ok(out)
}

/// Build one supervised pair from a tokenized scene.
///
/// * text-to-motion: caption -> full serialized scene.
/// * motion-to-text: serialized scene -> caption.
/// * forecasting: the first half of every person's run as input, the
///   remainders (with their triplets) as target.
/// * reaction: one seeded-random person's run replaced by a sentinel, that
///   run as target.
/// * in-between: the middle 50% of every run replaced by per-person
///   sentinels, the removed spans (sentinel-delimited) as target.
pub fn build_task_pair(
    task: SupervisedTask,
    scene: &TokenizedScene,
    vocab: &UnifiedVocabulary,
    seed: u64,
) -> Result<TaskPair, LmError> {
    let n = scene.runs.len();
    if n == 0 {
        return Err(LmError::TooFewPersons { task: task.tag(), min: 1, got: 0 });
    }
    let full = serialize_social(&scene.runs, &scene.rel_bins, vocab)?;
    match task {
        SupervisedTask::TextToMotion => {
            let input = vocab.encode_text(&scene.caption);
            if input.is_empty() {
                return Err(LmError::SequenceTooShort { got: 0, min: 1 });
            }
            Ok(TaskPair { task: task.tag().to_string(), input, target: full })
        }
        SupervisedTask::MotionToText => {
            let mut target = vocab.encode_text(&scene.caption);
            target.push(TOKEN_EOS);
            Ok(TaskPair { task: task.tag().to_string(), input: full, target })
        }
        SupervisedTask::Forecast => {
            let shortest = scene.runs.iter().map(Vec::len).min().unwrap_or(0);
            if shortest < 2 {
                return Err(LmError::RunTooShort { task: task.tag(), min: 2, got: shortest });
            }
            let mut fronts = Vec::with_capacity(n);
            let mut rests = Vec::with_capacity(n);
            for run in &scene.runs {
                let split = run.len() / 2;
                fronts.push(run[..split].to_vec());
                rests.push(run[split..].to_vec());
            }
            let mut input = vocab.encode_text("Predict motion:");
            input.extend(serialize_social(&fronts, &scene.rel_bins, vocab)?);
            let target = serialize_social(&rests, &scene.rel_bins, vocab)?;
            Ok(TaskPair { task: task.tag().to_string(), input, target })
        }
        SupervisedTask::Reaction => {
            if n < 2 {
                return Err(LmError::TooFewPersons { task: task.tag(), min: 2, got: n });
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let masked = rng.random_range(0..n);
            let sentinel = vocab.sentinel(0)?;
            let parts: Vec<Option<&[u32]>> = scene
                .runs
                .iter()
                .enumerate()
                .map(|(i, r)| if i == masked { None } else { Some(r.as_slice()) })
                .collect();
            let masks: Vec<Option<u32>> =
                (0..n).map(|i| if i == masked { Some(sentinel) } else { None }).collect();
            let mut input = vocab.encode_text("Generate Reaction:");
            input.extend(assemble_block(&parts, &masks, &scene.rel_bins, vocab)?);
            let mut target = Vec::with_capacity(scene.runs[masked].len() + 1);
            run_triplet_ids(&scene.runs[masked], None, vocab, &mut target)?;
            target.push(TOKEN_EOS);
            Ok(TaskPair { task: task.tag().to_string(), input, target })
        }
        SupervisedTask::Inbetween => {
            let shortest = scene.runs.iter().map(Vec::len).min().unwrap_or(0);
            if shortest < 2 {
                return Err(LmError::RunTooShort { task: task.tag(), min: 2, got: shortest });
            }
            let mut kept: Vec<Vec<u32>> = Vec::with_capacity(n);
            let mut target = Vec::new();
            for (i, run) in scene.runs.iter().enumerate() {
                let start = run.len() / 4;
                let masked = (run.len() / 2).max(1);
                let sentinel = vocab.sentinel(i as u32)?;
                let mut ids = Vec::with_capacity(run.len() - masked + 1);
                for &code in &run[..start] {
                    ids.push(vocab.motion_token(code)?);
                }
                ids.push(sentinel);
                for &code in &run[start + masked..] {
                    ids.push(vocab.motion_token(code)?);
                }
                kept.push(ids);
                target.push(sentinel);
                for &code in &run[start..start + masked] {
                    target.push(vocab.motion_token(code)?);
                }
            }
            target.push(vocab.sentinel(n as u32)?);
            let mut input = vocab.encode_text("Complete the masked motion:");
            input.push(vocab.motion_start());
            for (i, ids) in kept.iter().enumerate() {
                if i > 0 {
                    let b = &scene.rel_bins[i - 1];
                    input.push(vocab.rel_x_token(b.x as u32)?);
                    input.push(vocab.rel_z_token(b.z as u32)?);
                    input.push(vocab.rel_theta_token(b.theta as u32)?);
                }
                input.extend_from_slice(ids);
            }
            input.push(vocab.motion_end());
            Ok(TaskPair { task: task.tag().to_string(), input, target })
        }
    }
}
