//! Unified token vocabulary and the interleaved multi-person sequence format.

mod sequence;
mod vocab;

pub use sequence::{
    parse_social, serialize_social, shuffle_persons, ParseError, ParseErrorKind, ParsedSocial,
};
pub use vocab::{
    build_vocabulary, tokenize_words, TokenClass, UnifiedVocabulary, VocabError, NUM_SENTINELS,
    TOKEN_BOS, TOKEN_EOS, TOKEN_PAD, TOKEN_UNK,
};
