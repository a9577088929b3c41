//! Serializer and validating parser for the interleaved multi-person token
//! format:
//!
//! ```text
//! <Motion_S> run_1 <sx_2> <sz_2> <sth_2> run_2 ... <Motion_E>
//! ```
//!
//! The first (reference) person carries no relative-pose triplet; every
//! subsequent person is introduced by exactly one `x z theta` triplet that
//! both separates individuals and encodes their relative pose.

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::grammar::vocab::{TokenClass, UnifiedVocabulary, VocabError};
use crate::motion::SocialMotion;
use crate::relpose::RelPoseBins;

#[derive(Debug, Error, PartialEq)]
pub enum ParseErrorKind {
    #[error("sequence does not begin with <Motion_S>")]
    MissingMotionStart,
    #[error("sequence ends without <Motion_E>")]
    MissingMotionEnd,
    #[error("person run is empty")]
    EmptyRun,
    #[error("incomplete relative-pose triplet")]
    IncompleteTriplet,
    #[error("relative-pose triplet out of x, z, theta order")]
    MisorderedTriplet,
    #[error("unexpected token inside motion block")]
    UnexpectedToken,
    #[error("tokens after <Motion_E>")]
    TrailingTokens,
    #[error("duplicate <Motion_S>")]
    DuplicateMotionStart,
}

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("{kind} at position {position}")]
    Grammar { kind: ParseErrorKind, position: usize },
    #[error(transparent)]
    Vocab(#[from] VocabError),
}

impl ParseError {
    fn at(kind: ParseErrorKind, position: usize) -> ParseError {
        ParseError::Grammar { kind, position }
    }

    pub fn position(&self) -> Option<usize> {
        match self {
            ParseError::Grammar { position, .. } => Some(*position),
            ParseError::Vocab(_) => None,
        }
    }
}

/// Parsed view of a grammatical sequence: per-person motion-code runs plus
/// the relative-pose bins separating them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedSocial {
    /// Motion codebook indices per person, reference first.
    pub persons: Vec<Vec<u32>>,
    /// One triplet per non-reference person.
    pub relposes: Vec<RelPoseBins>,
}

/// Emit the flat id sequence for per-person motion runs and their separating
/// relative-pose triplets.
pub fn serialize_social(
    runs: &[Vec<u32>],
    relposes: &[RelPoseBins],
    vocab: &UnifiedVocabulary,
) -> Result<Vec<u32>, ParseError> {
    if runs.is_empty() {
        return Err(ParseError::at(ParseErrorKind::EmptyRun, 0));
    }
    if relposes.len() + 1 != runs.len() {
        return Err(ParseError::at(ParseErrorKind::IncompleteTriplet, 0));
    }
    let mut out = Vec::with_capacity(2 + runs.iter().map(Vec::len).sum::<usize>() + 3 * relposes.len());
    out.push(vocab.motion_start());
    for (i, run) in runs.iter().enumerate() {
        if run.is_empty() {
            return Err(ParseError::at(ParseErrorKind::EmptyRun, out.len()));
        }
        if i > 0 {
            let bins = &relposes[i - 1];
            out.push(vocab.rel_x_token(bins.x as u32)?);
            out.push(vocab.rel_z_token(bins.z as u32)?);
            out.push(vocab.rel_theta_token(bins.theta as u32)?);
        }
        for &code in run {
            out.push(vocab.motion_token(code)?);
        }
    }
    out.push(vocab.motion_end());
    Ok(out)
}

/// Validating parser; on failure names the first violation and its position.
pub fn parse_social(
    seq: &[u32],
    vocab: &UnifiedVocabulary,
) -> Result<ParsedSocial, ParseError> {
    let classes: Vec<TokenClass> = seq
        .iter()
        .map(|&id| vocab.classify(id))
        .collect::<Result<_, VocabError>>()?;

    if classes.first() != Some(&TokenClass::MotionStart) {
        return Err(ParseError::at(ParseErrorKind::MissingMotionStart, 0));
    }

    let mut persons: Vec<Vec<u32>> = vec![Vec::new()];
    let mut relposes: Vec<RelPoseBins> = Vec::new();
    let mut pos = 1;
    let mut closed_at: Option<usize> = None;

    while pos < classes.len() {
        match classes[pos] {
            TokenClass::Motion(code) => {
                persons.last_mut().expect("at least one run").push(code);
                pos += 1;
            }
            TokenClass::RelX(x) => {
                if persons.last().is_none_or(Vec::is_empty) {
                    return Err(ParseError::at(ParseErrorKind::EmptyRun, pos));
                }
                let z = match classes.get(pos + 1) {
                    Some(TokenClass::RelZ(z)) => *z,
                    Some(TokenClass::RelX(_)) | Some(TokenClass::RelTheta(_)) => {
                        return Err(ParseError::at(ParseErrorKind::MisorderedTriplet, pos + 1))
                    }
                    _ => return Err(ParseError::at(ParseErrorKind::IncompleteTriplet, pos + 1)),
                };
                let theta = match classes.get(pos + 2) {
                    Some(TokenClass::RelTheta(t)) => *t,
                    Some(TokenClass::RelX(_)) | Some(TokenClass::RelZ(_)) => {
                        return Err(ParseError::at(ParseErrorKind::MisorderedTriplet, pos + 2))
                    }
                    _ => return Err(ParseError::at(ParseErrorKind::IncompleteTriplet, pos + 2)),
                };
                relposes.push(RelPoseBins {
                    x: x as usize,
                    z: z as usize,
                    theta: theta as usize,
                });
                persons.push(Vec::new());
                pos += 3;
            }
            TokenClass::RelZ(_) | TokenClass::RelTheta(_) => {
                return Err(ParseError::at(ParseErrorKind::MisorderedTriplet, pos));
            }
            TokenClass::MotionEnd => {
                closed_at = Some(pos);
                pos += 1;
                break;
            }
            TokenClass::MotionStart => {
                return Err(ParseError::at(ParseErrorKind::DuplicateMotionStart, pos));
            }
            TokenClass::Text => {
                return Err(ParseError::at(ParseErrorKind::UnexpectedToken, pos));
            }
        }
    }

    let end = match closed_at {
        Some(end) => end,
        None => return Err(ParseError::at(ParseErrorKind::MissingMotionEnd, classes.len())),
    };
    if pos < classes.len() {
        return Err(ParseError::at(ParseErrorKind::TrailingTokens, pos));
    }
    if persons.last().is_none_or(Vec::is_empty) {
        return Err(ParseError::at(ParseErrorKind::EmptyRun, end));
    }
    Ok(ParsedSocial { persons, relposes })
}

/// Uniformly random permutation of the persons in a scene. Downstream
/// encoding treats the new first person as the reference, so shuffling both
/// varies the reference and reorders the remaining participants.
pub fn shuffle_persons(scene: &SocialMotion, seed: u64) -> SocialMotion {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = scene.clone();
    out.persons.shuffle(&mut rng);
    out
}
