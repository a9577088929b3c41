//! Autoregressive generation: greedy or top-k/temperature sampling, stopping
//! at any of the caller's stop ids (text EOS or the motion-end delimiter).

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::grammar::TOKEN_BOS;

use super::transformer::Seq2SeqModel;
use super::LmError;

#[derive(Debug, Clone, Copy)]
pub enum Sampling {
    Greedy,
    TopK { k: usize, temperature: f64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerateOutcome {
    /// Generated ids, without the stop token.
    pub ids: Vec<u32>,
    /// The stop id that ended generation, if any.
    pub stopped_at: Option<u32>,
    /// True when `max_new` ran out before a stop id appeared.
    pub truncated: bool,
}

fn argmax(logits: &[f64]) -> u32 {
    let mut best = 0usize;
    let mut best_v = f64::NEG_INFINITY;
    for (i, &v) in logits.iter().enumerate() {
        if v > best_v {
            best_v = v;
            best = i;
        }
    }
    best as u32
}

fn sample_top_k(logits: &[f64], k: usize, temperature: f64, rng: &mut ChaCha8Rng) -> u32 {
    if temperature <= 1e-8 {
        return argmax(logits);
    }
    let mut order: Vec<usize> = (0..logits.len()).collect();
    order.sort_by(|&a, &b| logits[b].total_cmp(&logits[a]).then(a.cmp(&b)));
    let kept = &order[..k.clamp(1, logits.len())];
    let max = logits[kept[0]];
    let weights: Vec<f64> = kept.iter().map(|&i| ((logits[i] - max) / temperature).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut dart = rng.random_range(0.0..1.0) * total;
    for (i, w) in kept.iter().zip(&weights) {
        dart -= w;
        if dart <= 0.0 {
            return *i as u32;
        }
    }
    kept[kept.len() - 1] as u32
}

/// Generate up to `max_new` tokens conditioned on `prompt`, stopping when a
/// stop id is produced. Greedy decoding is a pure function of the model and
/// prompt; truncation is reported, never an error.
pub fn generate(
    model: &Seq2SeqModel,
    prompt: &[u32],
    sampling: Sampling,
    max_new: usize,
    stop_ids: &[u32],
) -> Result<GenerateOutcome, LmError> {
    let enc_out = model.encode_source(prompt)?;
    let mut rng = match sampling {
        Sampling::TopK { seed, .. } => Some(ChaCha8Rng::seed_from_u64(seed)),
        Sampling::Greedy => None,
    };
    let mut dec_in: Vec<u32> = vec![TOKEN_BOS];
    let mut out = Vec::new();
    // The decoder prefix includes BOS, so it can hold max_len - 1 new tokens.
    let budget = max_new.min(model.cfg.max_len - 1);
    for _ in 0..budget {
        let logits = model.next_token_logits(&enc_out, &dec_in);
        let next = match sampling {
            Sampling::Greedy => argmax(&logits),
            Sampling::TopK { k, temperature, .. } => {
                sample_top_k(&logits, k, temperature, rng.as_mut().expect("rng"))
            }
        };
        if stop_ids.contains(&next) {
            return Ok(GenerateOutcome { ids: out, stopped_at: Some(next), truncated: false });
        }
        out.push(next);
        dec_in.push(next);
    }
    Ok(GenerateOutcome { ids: out, stopped_at: None, truncated: true })
}
