//! Sequence-to-sequence motion-language model over the unified vocabulary:
//! span-corruption pretraining, supervised task pairs, instruction templates,
//! training stages and autoregressive generation.

mod corrupt;
mod generate;
mod tasks;
mod templates;
mod train;
mod transformer;

pub use corrupt::span_corrupt;
pub use generate::{generate, GenerateOutcome, Sampling};
pub use tasks::{build_task_pair, SupervisedTask, TokenizedScene};
pub use templates::{render_instruction, InstructionTemplate, Rendered, TemplateRegistry};
pub use train::{
    lm_train_step, train_stage2, train_stage3, PipelineConfig, StageReport, TaskCorpus,
};
pub use transformer::Seq2SeqModel;

use thiserror::Error;

use crate::grammar::VocabError;

#[derive(Debug, Error)]
pub enum LmError {
    #[error("config invalid: {0}")]
    BadConfig(String),
    #[error("corruption ratio {0} outside [0, 1)")]
    BadRatio(f64),
    #[error("sequence of {got} tokens needs at least {min}")]
    SequenceTooShort { got: usize, min: usize },
    #[error("sequence of {got} tokens exceeds the maximum length {max}")]
    SequenceTooLong { got: usize, max: usize },
    #[error("token id {id} out of range for vocabulary of {vocab}")]
    TokenOutOfRange { id: u32, vocab: usize },
    #[error("task {task} needs at least {min} persons, scene has {got}")]
    TooFewPersons { task: &'static str, min: usize, got: usize },
    #[error("task {task} needs runs of at least {min} tokens, shortest is {got}")]
    RunTooShort { task: &'static str, min: usize, got: usize },
    #[error("unknown template id {0:?}")]
    UnknownTemplate(String),
    #[error("template {template} is missing slot {slot:?}")]
    MissingSlot { template: String, slot: String },
    #[error("empty training batch")]
    EmptyBatch,
    #[error("non-finite loss at step {step}; step rejected")]
    NonFiniteLoss { step: usize },
    #[error("empty task corpus for {0}")]
    EmptyCorpus(&'static str),
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error(transparent)]
    Grammar(#[from] crate::grammar::ParseError),
}

/// Transformer hyperparameters.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub dim: usize,
    pub enc_layers: usize,
    pub dec_layers: usize,
    pub heads: usize,
    pub ffn_dim: usize,
    pub max_len: usize,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            vocab_size: 0,
            dim: 128,
            enc_layers: 2,
            dec_layers: 2,
            heads: 4,
            ffn_dim: 256,
            max_len: 512,
            dropout: 0.0,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), LmError> {
        if self.vocab_size == 0 {
            return Err(LmError::BadConfig("vocab size must be set".to_string()));
        }
        if !self.dim.is_multiple_of(self.heads) {
            return Err(LmError::BadConfig(format!(
                "width {} not divisible by {} heads",
                self.dim, self.heads
            )));
        }
        if self.max_len < 16 {
            return Err(LmError::BadConfig(format!(
                "max length must be >= 16, got {}",
                self.max_len
            )));
        }
        Ok(())
    }
}

/// One training example: a task tag, an input id sequence and a target id
/// sequence, both within the model's maximum length.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct TaskPair {
    pub task: String,
    pub input: Vec<u32>,
    pub target: Vec<u32>,
}

impl TaskPair {
    pub fn validate(&self, vocab_size: usize, max_len: usize) -> Result<(), LmError> {
        for seq in [&self.input, &self.target] {
            if seq.len() > max_len {
                return Err(LmError::SequenceTooLong { got: seq.len(), max: max_len });
            }
            for &id in seq {
                if id as usize >= vocab_size {
                    return Err(LmError::TokenOutOfRange { id, vocab: vocab_size });
                }
            }
        }
        Ok(())
    }
}
