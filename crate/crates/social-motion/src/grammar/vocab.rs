//! The unified vocabulary: word-piece text tokens, motion tokens, relative
//! pose tokens and the motion delimiters, laid out as contiguous disjoint id
//! ranges `[text | motion | x | z | theta | Motion_S Motion_E]`.
//!
//! Surface text uses whitespace-separated forms: plain words, `<m_i>`,
//! `<sx_i>`, `<sz_i>`, `<sth_i>`, `<Motion_S>`, `<Motion_E>` and the reserved
//! specials, so any id sequence round-trips losslessly through text.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Reserved text ids.
pub const TOKEN_PAD: u32 = 0;
pub const TOKEN_EOS: u32 = 1;
pub const TOKEN_UNK: u32 = 2;
pub const TOKEN_BOS: u32 = 3;
/// Sentinel ids occupy `[4, 4 + NUM_SENTINELS)` inside the text range.
pub const NUM_SENTINELS: u32 = 100;
const FIRST_WORD: u32 = 4 + NUM_SENTINELS;

#[derive(Debug, Error, PartialEq)]
pub enum VocabError {
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error("unknown surface form {0:?}")]
    UnknownSurface(String),
    #[error("token id {0} out of range")]
    IdOutOfRange(u32),
    #[error("sentinel index {0} out of range")]
    SentinelOutOfRange(u32),
    #[error("vocabulary file invalid: {0}")]
    Invalid(String),
    #[error("io: {0}")]
    Io(String),
}

/// What an id means; decidable in O(1) from the range layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenClass {
    /// Plain text token (includes pad/eos/unk/bos and sentinels).
    Text,
    /// Motion codebook index.
    Motion(u32),
    /// Relative-pose bins, one class per component.
    RelX(u32),
    RelZ(u32),
    RelTheta(u32),
    MotionStart,
    MotionEnd,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UnifiedVocabulary {
    /// Corpus words, ids `FIRST_WORD..FIRST_WORD + words.len()`.
    words: Vec<String>,
    pub motion_codes: u32,
    pub rel_bins: u32,
    #[serde(skip)]
    word_to_id: HashMap<String, u32>,
}

impl UnifiedVocabulary {
    fn rebuild_index(&mut self) {
        self.word_to_id = self
            .words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), FIRST_WORD + i as u32))
            .collect();
    }

    pub fn text_size(&self) -> u32 {
        FIRST_WORD + self.words.len() as u32
    }

    pub fn motion_base(&self) -> u32 {
        self.text_size()
    }

    pub fn rel_x_base(&self) -> u32 {
        self.motion_base() + self.motion_codes
    }

    pub fn rel_z_base(&self) -> u32 {
        self.rel_x_base() + self.rel_bins
    }

    pub fn rel_theta_base(&self) -> u32 {
        self.rel_z_base() + self.rel_bins
    }

    pub fn motion_start(&self) -> u32 {
        self.rel_theta_base() + self.rel_bins
    }

    pub fn motion_end(&self) -> u32 {
        self.motion_start() + 1
    }

    /// Total id count: |V_t| + K + 3*K_rel + 2.
    pub fn size(&self) -> u32 {
        self.motion_end() + 1
    }

    pub fn sentinel(&self, index: u32) -> Result<u32, VocabError> {
        if index >= NUM_SENTINELS {
            return Err(VocabError::SentinelOutOfRange(index));
        }
        Ok(4 + index)
    }

    pub fn is_sentinel(&self, id: u32) -> bool {
        (4..FIRST_WORD).contains(&id)
    }

    pub fn motion_token(&self, code: u32) -> Result<u32, VocabError> {
        if code >= self.motion_codes {
            return Err(VocabError::IdOutOfRange(code));
        }
        Ok(self.motion_base() + code)
    }

    pub fn rel_x_token(&self, bin: u32) -> Result<u32, VocabError> {
        if bin >= self.rel_bins {
            return Err(VocabError::IdOutOfRange(bin));
        }
        Ok(self.rel_x_base() + bin)
    }

    pub fn rel_z_token(&self, bin: u32) -> Result<u32, VocabError> {
        if bin >= self.rel_bins {
            return Err(VocabError::IdOutOfRange(bin));
        }
        Ok(self.rel_z_base() + bin)
    }

    pub fn rel_theta_token(&self, bin: u32) -> Result<u32, VocabError> {
        if bin >= self.rel_bins {
            return Err(VocabError::IdOutOfRange(bin));
        }
        Ok(self.rel_theta_base() + bin)
    }

    pub fn classify(&self, id: u32) -> Result<TokenClass, VocabError> {
        if id < self.text_size() {
            Ok(TokenClass::Text)
        } else if id < self.rel_x_base() {
            Ok(TokenClass::Motion(id - self.motion_base()))
        } else if id < self.rel_z_base() {
            Ok(TokenClass::RelX(id - self.rel_x_base()))
        } else if id < self.rel_theta_base() {
            Ok(TokenClass::RelZ(id - self.rel_z_base()))
        } else if id < self.motion_start() {
            Ok(TokenClass::RelTheta(id - self.rel_theta_base()))
        } else if id == self.motion_start() {
            Ok(TokenClass::MotionStart)
        } else if id == self.motion_end() {
            Ok(TokenClass::MotionEnd)
        } else {
            Err(VocabError::IdOutOfRange(id))
        }
    }

    pub fn surface(&self, id: u32) -> Result<String, VocabError> {
        match self.classify(id)? {
            TokenClass::Text => Ok(match id {
                TOKEN_PAD => "<pad>".to_string(),
                TOKEN_EOS => "<eos>".to_string(),
                TOKEN_UNK => "<unk>".to_string(),
                TOKEN_BOS => "<bos>".to_string(),
                _ if self.is_sentinel(id) => format!("<extra_id_{}>", id - 4),
                _ => self.words[(id - FIRST_WORD) as usize].clone(),
            }),
            TokenClass::Motion(i) => Ok(format!("<m_{i}>")),
            TokenClass::RelX(i) => Ok(format!("<sx_{i}>")),
            TokenClass::RelZ(i) => Ok(format!("<sz_{i}>")),
            TokenClass::RelTheta(i) => Ok(format!("<sth_{i}>")),
            TokenClass::MotionStart => Ok("<Motion_S>".to_string()),
            TokenClass::MotionEnd => Ok("<Motion_E>".to_string()),
        }
    }

    pub fn surface_to_id(&self, form: &str) -> Result<u32, VocabError> {
        match form {
            "<pad>" => return Ok(TOKEN_PAD),
            "<eos>" => return Ok(TOKEN_EOS),
            "<unk>" => return Ok(TOKEN_UNK),
            "<bos>" => return Ok(TOKEN_BOS),
            "<Motion_S>" => return Ok(self.motion_start()),
            "<Motion_E>" => return Ok(self.motion_end()),
            _ => {}
        }
        if let Some(rest) = form.strip_prefix('<').and_then(|f| f.strip_suffix('>')) {
            let parse = |prefix: &str| -> Option<Result<u32, VocabError>> {
                rest.strip_prefix(prefix).map(|n| {
                    n.parse::<u32>().map_err(|_| VocabError::UnknownSurface(form.to_string()))
                })
            };
            if let Some(i) = parse("extra_id_") {
                return self.sentinel(i?).map_err(|_| VocabError::UnknownSurface(form.into()));
            }
            if let Some(i) = parse("m_") {
                return self.motion_token(i?).map_err(|_| VocabError::UnknownSurface(form.into()));
            }
            if let Some(i) = parse("sx_") {
                return self.rel_x_token(i?).map_err(|_| VocabError::UnknownSurface(form.into()));
            }
            if let Some(i) = parse("sz_") {
                return self.rel_z_token(i?).map_err(|_| VocabError::UnknownSurface(form.into()));
            }
            if let Some(i) = parse("sth_") {
                return self
                    .rel_theta_token(i?)
                    .map_err(|_| VocabError::UnknownSurface(form.into()));
            }
            return Err(VocabError::UnknownSurface(form.to_string()));
        }
        self.word_to_id
            .get(form)
            .copied()
            .ok_or_else(|| VocabError::UnknownSurface(form.to_string()))
    }

    /// Tokenize plain text into ids; words outside the table map to `<unk>`.
    pub fn encode_text(&self, text: &str) -> Vec<u32> {
        tokenize_words(text)
            .into_iter()
            .map(|w| self.word_to_id.get(&w).copied().unwrap_or(TOKEN_UNK))
            .collect()
    }

    /// Lossless surface form of an id sequence, whitespace separated.
    pub fn ids_to_text(&self, ids: &[u32]) -> Result<String, VocabError> {
        let parts: Vec<String> = ids.iter().map(|&id| self.surface(id)).collect::<Result<_, _>>()?;
        Ok(parts.join(" "))
    }

    /// Inverse of [`Self::ids_to_text`]: every whitespace-separated form must be known.
    pub fn text_to_ids(&self, text: &str) -> Result<Vec<u32>, VocabError> {
        text.split_whitespace().map(|form| self.surface_to_id(form)).collect()
    }

    /// Mixed-content tokenizer for instruction text: token forms in angle
    /// brackets resolve exactly (trailing punctuation is split off),
    /// everything else goes through the word table.
    pub fn encode_mixed(&self, text: &str) -> Result<Vec<u32>, VocabError> {
        let mut out = Vec::new();
        for piece in text.split_whitespace() {
            if let Some(end) = piece.starts_with('<').then(|| piece.find('>')).flatten() {
                out.push(self.surface_to_id(&piece[..=end])?);
                for w in tokenize_words(&piece[end + 1..]) {
                    out.push(self.word_to_id.get(&w).copied().unwrap_or(TOKEN_UNK));
                }
            } else {
                for w in tokenize_words(piece) {
                    out.push(self.word_to_id.get(&w).copied().unwrap_or(TOKEN_UNK));
                }
            }
        }
        Ok(out)
    }

    pub fn save_json(&self, path: &Path) -> Result<(), VocabError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| VocabError::Io(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| VocabError::Io(e.to_string()))
    }

    pub fn load_json(path: &Path) -> Result<UnifiedVocabulary, VocabError> {
        let text = std::fs::read_to_string(path).map_err(|e| VocabError::Io(e.to_string()))?;
        let mut v: UnifiedVocabulary =
            serde_json::from_str(&text).map_err(|e| VocabError::Invalid(e.to_string()))?;
        if v.motion_codes < 1 || v.rel_bins < 1 {
            return Err(VocabError::Invalid("empty motion or rel-pose ranges".to_string()));
        }
        v.rebuild_index();
        Ok(v)
    }
}

/// Lowercased word pieces: whitespace split, punctuation as single tokens.
pub fn tokenize_words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_whitespace() {
            if !current.is_empty() {
                out.push(std::mem::take(&mut current));
            }
        } else if ch.is_alphanumeric() {
            for lc in ch.to_lowercase() {
                current.push(lc);
            }
        } else {
            if !current.is_empty() {
                out.push(std::mem::take(&mut current));
            }
            out.push(ch.to_string());
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}

/// Deterministic vocabulary from a text corpus: words ranked by frequency
/// (ties broken lexicographically) above the reserved specials and sentinels.
pub fn build_vocabulary(
    corpus: &[String],
    motion_codes: u32,
    rel_bins: u32,
) -> Result<UnifiedVocabulary, VocabError> {
    if corpus.is_empty() || corpus.iter().all(|s| s.trim().is_empty()) {
        return Err(VocabError::EmptyCorpus);
    }
    let mut counts: HashMap<String, u64> = HashMap::new();
    for line in corpus {
        for w in tokenize_words(line) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    let mut ranked: Vec<(String, u64)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let mut v = UnifiedVocabulary {
        words: ranked.into_iter().map(|(w, _)| w).collect(),
        motion_codes,
        rel_bins,
        word_to_id: HashMap::new(),
    };
    v.rebuild_index();
    Ok(v)
}
