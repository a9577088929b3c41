//! Versioned binary checkpoint container shared by the tokenizer and the
//! language model. Layout, little-endian:
//!
//! ```text
//! magic "SMCK" | version u32 | kind u8 | config JSON (len u32, bytes)
//! | blob count u32 | per blob: name (len u16, utf8), f32 count u32, data
//! | crc32 of everything above
//! ```

use std::collections::HashMap;
use std::path::Path;

use thiserror::Error;

use crate::lm::{ModelConfig, Seq2SeqModel};
use crate::nn::VisitParams;
use crate::vq::{VQConfig, VQModel};

pub const CKPT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"SMCK";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CkptKind {
    Tokenizer = 1,
    LanguageModel = 2,
}

#[derive(Debug, Error)]
pub enum CkptError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic bytes, not a checkpoint")]
    BadMagic,
    #[error("unsupported checkpoint version {found} (supported: {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },
    #[error("checkpoint holds a {found} model, expected {expected}")]
    WrongKind { expected: &'static str, found: &'static str },
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("checkpoint truncated while reading {0}")]
    Truncated(&'static str),
    #[error("config block invalid: {0}")]
    BadConfig(String),
    #[error("missing parameter blob {0:?}")]
    MissingBlob(String),
    #[error("blob {name:?} holds {got} values, model expects {want}")]
    SizeMismatch { name: String, got: usize, want: usize },
    #[error("model invalid after load: {0}")]
    ModelInvalid(String),
}

struct Writer {
    bytes: Vec<u8>,
}

impl Writer {
    fn new(kind: CkptKind, config_json: &str) -> Writer {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&CKPT_VERSION.to_le_bytes());
        bytes.push(kind as u8);
        let cfg = config_json.as_bytes();
        bytes.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
        bytes.extend_from_slice(cfg);
        Writer { bytes }
    }

    fn blobs(&mut self, blobs: &[(String, Vec<f32>)]) {
        self.bytes.extend_from_slice(&(blobs.len() as u32).to_le_bytes());
        for (name, data) in blobs {
            let nb = name.as_bytes();
            self.bytes.extend_from_slice(&(nb.len() as u16).to_le_bytes());
            self.bytes.extend_from_slice(nb);
            self.bytes.extend_from_slice(&(data.len() as u32).to_le_bytes());
            for v in data {
                self.bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
    }

    fn finish(mut self) -> Vec<u8> {
        let crc = crc32fast::hash(&self.bytes);
        self.bytes.extend_from_slice(&crc.to_le_bytes());
        self.bytes
    }
}

struct RawCkpt {
    kind: u8,
    config_json: String,
    blobs: HashMap<String, Vec<f32>>,
}

fn parse(bytes: &[u8]) -> Result<RawCkpt, CkptError> {
    if bytes.len() < 13 {
        return Err(CkptError::Truncated("header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(CkptError::BadMagic);
    }
    let body_len = bytes.len() - 4;
    let stored = u32::from_le_bytes(bytes[body_len..].try_into().unwrap());
    let computed = crc32fast::hash(&bytes[..body_len]);
    if stored != computed {
        return Err(CkptError::ChecksumMismatch { stored, computed });
    }
    let mut pos = 4;
    let mut take = |n: usize, what: &'static str| -> Result<&[u8], CkptError> {
        if pos + n > body_len {
            return Err(CkptError::Truncated(what));
        }
        let s = &bytes[pos..pos + n];
        pos += n;
        Ok(s)
    };
    let version = u32::from_le_bytes(take(4, "version")?.try_into().unwrap());
    if version != CKPT_VERSION {
        return Err(CkptError::UnsupportedVersion { found: version, supported: CKPT_VERSION });
    }
    let kind = take(1, "kind")?[0];
    let cfg_len = u32::from_le_bytes(take(4, "config length")?.try_into().unwrap()) as usize;
    let config_json = String::from_utf8(take(cfg_len, "config")?.to_vec())
        .map_err(|e| CkptError::BadConfig(e.to_string()))?;
    let blob_count = u32::from_le_bytes(take(4, "blob count")?.try_into().unwrap()) as usize;
    let mut blobs = HashMap::with_capacity(blob_count);
    for _ in 0..blob_count {
        let name_len = u16::from_le_bytes(take(2, "blob name length")?.try_into().unwrap());
        let name = String::from_utf8(take(name_len as usize, "blob name")?.to_vec())
            .map_err(|e| CkptError::BadConfig(e.to_string()))?;
        let count = u32::from_le_bytes(take(4, "blob size")?.try_into().unwrap()) as usize;
        let raw = take(count * 4, "blob data")?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        blobs.insert(name, data);
    }
    Ok(RawCkpt { kind, config_json, blobs })
}

fn param_blobs(model: &mut dyn VisitParams) -> Vec<(String, Vec<f32>)> {
    let mut blobs = Vec::new();
    model.visit_params(&mut |name, p| {
        blobs.push((name.to_string(), p.w.iter().map(|&v| v as f32).collect()));
    });
    blobs
}

fn restore_params(
    model: &mut dyn VisitParams,
    blobs: &HashMap<String, Vec<f32>>,
) -> Result<(), CkptError> {
    let mut error = None;
    model.visit_params(&mut |name, p| {
        if error.is_some() {
            return;
        }
        match blobs.get(name) {
            None => error = Some(CkptError::MissingBlob(name.to_string())),
            Some(data) if data.len() != p.w.len() => {
                error = Some(CkptError::SizeMismatch {
                    name: name.to_string(),
                    got: data.len(),
                    want: p.w.len(),
                })
            }
            Some(data) => {
                for (w, v) in p.w.iter_mut().zip(data) {
                    *w = *v as f64;
                }
            }
        }
    });
    match error {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn f32_vec(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

pub fn save_vq(path: &Path, model: &mut VQModel) -> Result<(), CkptError> {
    let config = serde_json::to_string(&model.cfg).expect("serializable config");
    let mut blobs = param_blobs(model);
    blobs.push(("codebook.entries".to_string(), f32_vec(&model.codebook.entries)));
    blobs.push(("codebook.ema_counts".to_string(), f32_vec(&model.codebook.ema_counts)));
    blobs.push(("codebook.ema_sums".to_string(), f32_vec(&model.codebook.ema_sums)));
    blobs.push(("stats.mean".to_string(), f32_vec(&model.stats.mean)));
    blobs.push(("stats.std".to_string(), f32_vec(&model.stats.std)));
    let mut w = Writer::new(CkptKind::Tokenizer, &config);
    w.blobs(&blobs);
    Ok(std::fs::write(path, w.finish())?)
}

pub fn load_vq(path: &Path) -> Result<VQModel, CkptError> {
    let raw = parse(&std::fs::read(path)?)?;
    if raw.kind != CkptKind::Tokenizer as u8 {
        return Err(CkptError::WrongKind { expected: "tokenizer", found: "language model" });
    }
    let cfg: VQConfig =
        serde_json::from_str(&raw.config_json).map_err(|e| CkptError::BadConfig(e.to_string()))?;
    let mut model = VQModel::new(cfg).map_err(|e| CkptError::ModelInvalid(e.to_string()))?;
    restore_params(&mut model, &raw.blobs)?;
    let take = |name: &str, want: usize| -> Result<Vec<f64>, CkptError> {
        let data = raw.blobs.get(name).ok_or_else(|| CkptError::MissingBlob(name.to_string()))?;
        if data.len() != want {
            return Err(CkptError::SizeMismatch {
                name: name.to_string(),
                got: data.len(),
                want,
            });
        }
        Ok(data.iter().map(|&v| v as f64).collect())
    };
    model.codebook.entries = take("codebook.entries", model.codebook.entries.len())?;
    model.codebook.ema_counts = take("codebook.ema_counts", model.codebook.ema_counts.len())?;
    model.codebook.ema_sums = take("codebook.ema_sums", model.codebook.ema_sums.len())?;
    model.stats.mean = take("stats.mean", model.stats.mean.len())?;
    model.stats.std = take("stats.std", model.stats.std.len())?;
    if !model.codebook.is_finite() {
        return Err(CkptError::ModelInvalid("non-finite codebook".to_string()));
    }
    Ok(model)
}

pub fn save_lm(path: &Path, model: &mut Seq2SeqModel) -> Result<(), CkptError> {
    let config = serde_json::to_string(&model.cfg).expect("serializable config");
    let blobs = param_blobs(model);
    let mut w = Writer::new(CkptKind::LanguageModel, &config);
    w.blobs(&blobs);
    Ok(std::fs::write(path, w.finish())?)
}

pub fn load_lm(path: &Path) -> Result<Seq2SeqModel, CkptError> {
    let raw = parse(&std::fs::read(path)?)?;
    if raw.kind != CkptKind::LanguageModel as u8 {
        return Err(CkptError::WrongKind { expected: "language model", found: "tokenizer" });
    }
    let cfg: ModelConfig =
        serde_json::from_str(&raw.config_json).map_err(|e| CkptError::BadConfig(e.to_string()))?;
    let mut model = Seq2SeqModel::new(cfg).map_err(|e| CkptError::ModelInvalid(e.to_string()))?;
    restore_params(&mut model, &raw.blobs)?;
    Ok(model)
}
