//! Deterministic stand-in embedder: motions map to standardized summary
//! statistics of their feature channel groups, captions map to a hashed
//! bag-of-words. Both land in the same fixed-dimension space so retrieval
//! metrics are well defined.

use crate::grammar::tokenize_words;
use crate::xh3d::{PersonFeatures, SocialFeatures};

/// Output dimension: 8 channel groups x 4 statistics.
pub const EMBED_DIM: usize = 32;

#[derive(Debug, Clone, Copy, Default)]
pub struct Embedder;

fn stats(values: impl Iterator<Item = f64>) -> [f64; 4] {
    let mut n = 0.0;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        n += 1.0;
        let d = v - mean;
        mean += d / n;
        m2 += d * (v - mean);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if n == 0.0 {
        return [0.0; 4];
    }
    [mean, (m2 / n).sqrt(), lo, hi]
}

fn fnv1a(word: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in word.as_bytes() {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x1000_0000_01b3);
    }
    hash
}

impl Embedder {
    pub fn dim(&self) -> usize {
        EMBED_DIM
    }

    /// Pooled channel-group statistics over every person and frame of the
    /// scene: mean, standard deviation, min and max per group.
    pub fn embed_motion(&self, scene: &SocialFeatures) -> Vec<f64> {
        self.embed_persons(&scene.persons)
    }

    pub fn embed_persons(&self, persons: &[PersonFeatures]) -> Vec<f64> {
        let mut out = Vec::with_capacity(EMBED_DIM);
        let layout = persons.first().map(|p| p.layout());
        let groups: Vec<std::ops::Range<usize>> = match layout {
            Some(l) => vec![
                l.root_yaw_vel()..l.root_yaw_vel() + 1,
                l.root_vel_x()..l.root_vel_z() + 1,
                l.root_height()..l.root_height() + 1,
                l.joint_positions(),
                l.joint_velocities(),
                l.joint_rotations(),
                l.foot_contacts(),
                0..l.width(),
            ],
            None => vec![0..0; 8],
        };
        for range in groups {
            let s = stats(persons.iter().flat_map(|p| {
                (0..p.frames).flat_map({
                    let range = range.clone();
                    move |t| p.row(t)[range.clone()].to_vec()
                })
            }));
            out.extend_from_slice(&s);
        }
        debug_assert_eq!(out.len(), EMBED_DIM);
        out
    }

    /// Hashed bag-of-words, L2-normalized; deterministic across runs and
    /// platforms (FNV-1a).
    pub fn embed_text(&self, text: &str) -> Vec<f64> {
        let mut out = vec![0.0; EMBED_DIM];
        for w in tokenize_words(text) {
            out[(fnv1a(&w) % EMBED_DIM as u64) as usize] += 1.0;
        }
        let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in out.iter_mut() {
                *v /= norm;
            }
        }
        out
    }
}
