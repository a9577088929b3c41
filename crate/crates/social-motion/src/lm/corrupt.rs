//! Span corruption: random token spans are replaced in the input by sentinel
//! tokens; the target concatenates the removed spans, each introduced by its
//! sentinel, plus a terminal sentinel. Splicing the target back into the
//! input reproduces the original sequence exactly.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::grammar::{UnifiedVocabulary, NUM_SENTINELS};

use super::{LmError, TaskPair};

/// Corrupt roughly `ratio` of the tokens, in spans of mean length
/// `mean_span`, deterministically under `seed`.
pub fn span_corrupt(
    seq: &[u32],
    ratio: f64,
    mean_span: usize,
    seed: u64,
    vocab: &UnifiedVocabulary,
) -> Result<TaskPair, LmError> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(LmError::BadRatio(ratio));
    }
    if seq.len() < 2 {
        return Err(LmError::SequenceTooShort { got: seq.len(), min: 2 });
    }
    let len = seq.len();
    let task = "span_corruption".to_string();
    let n_noise = ((ratio * len as f64).round() as usize).min(len - 1);
    if ratio == 0.0 || n_noise == 0 {
        return Ok(TaskPair { task, input: seq.to_vec(), target: vec![vocab.sentinel(0)?] });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clear = len - n_noise;
    // Span count: bounded by the noise budget, the sentinel budget (one is
    // reserved for the terminal) and the need for a clear token between
    // consecutive spans.
    let n_spans = (((n_noise as f64 / mean_span.max(1) as f64).round() as usize).max(1))
        .min(n_noise)
        .min(NUM_SENTINELS as usize - 1)
        .min(clear + 1);

    // Split n_noise into n_spans positive parts: distinct cuts in 1..n_noise.
    let span_lengths = random_composition(&mut rng, n_noise, n_spans, 1);
    // Split the clear tokens into n_spans+1 gaps; interior gaps >= 1 so spans
    // stay separated.
    let mut gaps = random_composition(&mut rng, clear - (n_spans - 1), n_spans + 1, 0);
    for gap in gaps.iter_mut().take(n_spans).skip(1) {
        *gap += 1;
    }

    let mut input = Vec::with_capacity(len);
    let mut target = Vec::with_capacity(n_noise + n_spans + 1);
    let mut cursor = 0;
    for (i, (&gap, &span)) in gaps.iter().zip(&span_lengths).enumerate() {
        input.extend_from_slice(&seq[cursor..cursor + gap]);
        cursor += gap;
        let sentinel = vocab.sentinel(i as u32)?;
        input.push(sentinel);
        target.push(sentinel);
        target.extend_from_slice(&seq[cursor..cursor + span]);
        cursor += span;
    }
    input.extend_from_slice(&seq[cursor..]);
    target.push(vocab.sentinel(n_spans as u32)?);

    Ok(TaskPair { task, input, target })
}

/// Random split of `total` into `parts` pieces, each at least `floor`.
fn random_composition(
    rng: &mut ChaCha8Rng,
    total: usize,
    parts: usize,
    floor: usize,
) -> Vec<usize> {
    debug_assert!(total >= parts * floor);
    let free = total - parts * floor;
    if parts == 1 {
        return vec![total];
    }
    // parts-1 sorted cut points in [0, free].
    let mut cuts: Vec<usize> = (0..parts - 1).map(|_| rng.random_range(0..=free)).collect();
    cuts.sort_unstable();
    let mut out = Vec::with_capacity(parts);
    let mut prev = 0;
    for &c in &cuts {
        out.push(floor + c - prev);
        prev = c;
    }
    out.push(floor + free - prev);
    out
}
