//! Training stages: mixed span-corruption + supervised pretraining, then
//! instruction tuning on rendered prompts. Both stages are deterministic
//! under the pipeline seed.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::grammar::UnifiedVocabulary;
use crate::nn::{AdamW, AdamWConfig, VisitParams};

use super::corrupt::span_corrupt;
use super::transformer::Seq2SeqModel;
use super::{LmError, TaskPair};

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct PipelineConfig {
    pub pretrain_steps: usize,
    pub instruct_steps: usize,
    pub batch_size: usize,
    pub pretrain_lr: f64,
    pub instruct_lr: f64,
    pub span_ratio: f64,
    pub mean_span: usize,
    /// Unsupervised samples per supervised sample in stage 2 (1:1 default).
    pub unsup_per_sup: f64,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            pretrain_steps: 300,
            instruct_steps: 200,
            batch_size: 8,
            pretrain_lr: 2e-4,
            instruct_lr: 1e-4,
            span_ratio: 0.15,
            mean_span: 3,
            unsup_per_sup: 1.0,
            seed: 0,
        }
    }
}

/// Training material for the two stages.
#[derive(Debug, Clone, Default)]
pub struct TaskCorpus {
    /// Supervised pretraining pairs (alignment, forecasting, reaction,
    /// in-between).
    pub supervised: Vec<TaskPair>,
    /// Token streams the span-corruption objective draws from.
    pub unsupervised_streams: Vec<Vec<u32>>,
    /// Instruction-rendered pairs for stage 3.
    pub instruction: Vec<TaskPair>,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct StageReport {
    pub losses: Vec<f64>,
    pub unsupervised_samples: usize,
    pub supervised_samples: usize,
}

impl StageReport {
    pub fn final_loss(&self) -> f64 {
        self.losses.last().copied().unwrap_or(f64::NAN)
    }
}

/// One teacher-forced gradient step over a batch of pairs. Cross-entropy is
/// averaged per target token; a non-finite loss rejects the step with
/// gradients cleared and parameters untouched.
pub fn lm_train_step(
    batch: &[TaskPair],
    model: &mut Seq2SeqModel,
    opt: &mut AdamW,
) -> Result<f64, LmError> {
    if batch.is_empty() {
        return Err(LmError::EmptyBatch);
    }
    let mut caches = Vec::with_capacity(batch.len());
    let mut total_tokens = 0usize;
    for pair in batch {
        let cache = model.forward_pair(pair, None)?;
        total_tokens += cache.n_tokens;
        caches.push(cache);
    }
    let loss =
        caches.iter().map(|c| c.loss_sum).sum::<f64>() / total_tokens as f64;
    if !loss.is_finite() {
        model.zero_grad();
        return Err(LmError::NonFiniteLoss { step: opt.step_count() });
    }
    let scale = 1.0 / total_tokens as f64;
    for cache in &caches {
        model.backward_pair(cache, scale);
    }
    opt.step(model);
    Ok(loss)
}

/// Stage 2: motion-language alignment pretraining mixing span corruption and
/// supervised pairs at `unsup_per_sup`. The tokenizer is frozen by this
/// point; only the language model trains.
pub fn train_stage2(
    model: &mut Seq2SeqModel,
    corpus: &TaskCorpus,
    vocab: &UnifiedVocabulary,
    cfg: &PipelineConfig,
) -> Result<StageReport, LmError> {
    if corpus.supervised.is_empty() {
        return Err(LmError::EmptyCorpus("supervised pretraining pairs"));
    }
    if corpus.unsupervised_streams.is_empty() {
        return Err(LmError::EmptyCorpus("unsupervised streams"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x1000));
    let mut opt = AdamW::new(AdamWConfig {
        lr: cfg.pretrain_lr,
        warmup_steps: 20,
        ..Default::default()
    });
    let mut losses = Vec::with_capacity(cfg.pretrain_steps);
    let mut unsup = 0usize;
    let mut sup = 0usize;
    let p_unsup = cfg.unsup_per_sup / (1.0 + cfg.unsup_per_sup);
    for _ in 0..cfg.pretrain_steps {
        let mut batch = Vec::with_capacity(cfg.batch_size);
        for _ in 0..cfg.batch_size {
            if rng.random_range(0.0..1.0) < p_unsup {
                let stream =
                    &corpus.unsupervised_streams[rng.random_range(0..corpus.unsupervised_streams.len())];
                let seed = rng.random_range(0..u64::MAX);
                batch.push(span_corrupt(stream, cfg.span_ratio, cfg.mean_span, seed, vocab)?);
                unsup += 1;
            } else {
                batch.push(corpus.supervised[rng.random_range(0..corpus.supervised.len())].clone());
                sup += 1;
            }
        }
        losses.push(lm_train_step(&batch, model, &mut opt)?);
    }
    Ok(StageReport { losses, unsupervised_samples: unsup, supervised_samples: sup })
}

/// Stage 3: instruction tuning over rendered prompt pairs. Takes the
/// stage-2 model by value so the stage ordering is enforced at the type
/// level: there is no way to instruction-tune without a pretrained model.
pub fn train_stage3(
    mut model: Seq2SeqModel,
    corpus: &TaskCorpus,
    cfg: &PipelineConfig,
) -> Result<(Seq2SeqModel, StageReport), LmError> {
    if corpus.instruction.is_empty() {
        return Err(LmError::EmptyCorpus("instruction pairs"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x2000));
    let mut opt = AdamW::new(AdamWConfig {
        lr: cfg.instruct_lr,
        warmup_steps: 20,
        ..Default::default()
    });
    let mut losses = Vec::with_capacity(cfg.instruct_steps);
    for _ in 0..cfg.instruct_steps {
        let batch: Vec<TaskPair> = (0..cfg.batch_size)
            .map(|_| corpus.instruction[rng.random_range(0..corpus.instruction.len())].clone())
            .collect();
        losses.push(lm_train_step(&batch, &mut model, &mut opt)?);
    }
    let report = StageReport {
        losses,
        unsupervised_samples: 0,
        supervised_samples: cfg.instruct_steps * cfg.batch_size,
    };
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::build_vocabulary;
    use crate::lm::ModelConfig;

    fn vocab() -> UnifiedVocabulary {
        build_vocabulary(&["walk wave turn".to_string()], 32, 8).unwrap()
    }

    fn tiny_model(vocab_size: usize) -> Seq2SeqModel {
        Seq2SeqModel::new(ModelConfig {
            vocab_size,
            dim: 16,
            enc_layers: 1,
            dec_layers: 1,
            heads: 2,
            ffn_dim: 32,
            max_len: 64,
            dropout: 0.0,
            seed: 1,
        })
        .unwrap()
    }

    fn toy_pairs(v: &UnifiedVocabulary) -> Vec<TaskPair> {
        (0..4)
            .map(|i| TaskPair {
                task: "toy".to_string(),
                input: vec![v.motion_token(i).unwrap(), v.motion_token(i + 1).unwrap()],
                target: vec![
                    v.motion_token(i + 2).unwrap(),
                    v.motion_token(i + 3).unwrap(),
                    crate::grammar::TOKEN_EOS,
                ],
            })
            .collect()
    }

    #[test]
    fn loss_decreases_during_memorization() {
        let v = vocab();
        let mut model = tiny_model(v.size() as usize);
        let pairs = toy_pairs(&v);
        let mut opt = AdamW::new(AdamWConfig {
            lr: 3e-3,
            warmup_steps: 10,
            ..Default::default()
        });
        let first = lm_train_step(&pairs, &mut model, &mut opt).unwrap();
        let mut last = first;
        for _ in 0..300 {
            last = lm_train_step(&pairs, &mut model, &mut opt).unwrap();
        }
        assert!(last < first * 0.1, "loss {first} -> {last}");
    }

    #[test]
    fn stage2_mixes_objectives_close_to_requested_ratio() {
        let v = vocab();
        let mut model = tiny_model(v.size() as usize);
        let streams: Vec<Vec<u32>> = (0..3)
            .map(|i| (0..30).map(|j| v.motion_token((i + j) % 32).unwrap()).collect())
            .collect();
        let corpus = TaskCorpus {
            supervised: toy_pairs(&v),
            unsupervised_streams: streams,
            instruction: vec![],
        };
        let cfg = PipelineConfig {
            pretrain_steps: 100,
            batch_size: 8,
            pretrain_lr: 1e-3,
            seed: 5,
            ..Default::default()
        };
        let report = train_stage2(&mut model, &corpus, &v, &cfg).unwrap();
        let total = (report.unsupervised_samples + report.supervised_samples) as f64;
        let frac = report.unsupervised_samples as f64 / total;
        assert!((frac - 0.5).abs() < 0.05, "unsupervised fraction {frac}");
        assert_eq!(report.losses.len(), 100);
    }

    #[test]
    fn stage3_requires_instruction_pairs() {
        let v = vocab();
        let model = tiny_model(v.size() as usize);
        let corpus = TaskCorpus::default();
        let cfg = PipelineConfig::default();
        assert!(matches!(
            train_stage3(model, &corpus, &cfg),
            Err(LmError::EmptyCorpus("instruction pairs"))
        ));
    }

    #[test]
    fn stages_are_deterministic_under_seed() {
        let v = vocab();
        let streams: Vec<Vec<u32>> =
            vec![(0..20).map(|j| v.motion_token(j % 32).unwrap()).collect()];
        let corpus = TaskCorpus {
            supervised: toy_pairs(&v),
            unsupervised_streams: streams,
            instruction: toy_pairs(&v),
        };
        let cfg = PipelineConfig {
            pretrain_steps: 20,
            instruct_steps: 10,
            batch_size: 4,
            seed: 9,
            ..Default::default()
        };
        let run = || {
            let mut model = tiny_model(v.size() as usize);
            let r2 = train_stage2(&mut model, &corpus, &v, &cfg).unwrap();
            let (_, r3) = train_stage3(model, &corpus, &cfg).unwrap();
            (r2.losses, r3.losses)
        };
        assert_eq!(run(), run());
    }
}
