//! Sampling-based metrics: Diversity, MModality and batched R-Precision
//! with MM Dist. All are pure functions of (inputs, seed).

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::MetricError;

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Mean distance over `n_pairs` seeded random disjoint pairs.
pub fn diversity(feats: &[Vec<f64>], n_pairs: usize, seed: u64) -> Result<f64, MetricError> {
    if feats.len() < 2 {
        return Err(MetricError::TooFew { what: "features", min: 2, got: feats.len() });
    }
    let available = feats.len() / 2;
    if n_pairs > available {
        return Err(MetricError::NotEnoughPairs { requested: n_pairs, available });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..feats.len()).collect();
    order.shuffle(&mut rng);
    let sum: f64 = (0..n_pairs)
        .map(|i| euclidean(&feats[order[2 * i]], &feats[order[2 * i + 1]]))
        .sum();
    Ok(sum / n_pairs as f64)
}

/// Mean intra-caption pairwise distance, averaged over captions. Groups with
/// up to `n_pairs` pairs use every pair; larger groups sample `n_pairs`
/// seeded random (unordered) pairs.
pub fn multimodality(
    groups: &[Vec<Vec<f64>>],
    n_pairs: usize,
    seed: u64,
) -> Result<f64, MetricError> {
    if groups.is_empty() {
        return Err(MetricError::TooFew { what: "caption groups", min: 1, got: 0 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for (gi, group) in groups.iter().enumerate() {
        if group.len() < 2 {
            return Err(MetricError::GroupTooSmall(gi));
        }
        let all_pairs: Vec<(usize, usize)> = (0..group.len())
            .flat_map(|i| ((i + 1)..group.len()).map(move |j| (i, j)))
            .collect();
        let chosen: Vec<(usize, usize)> = if all_pairs.len() <= n_pairs {
            all_pairs
        } else {
            let mut pairs = all_pairs;
            pairs.shuffle(&mut rng);
            pairs.truncate(n_pairs);
            pairs
        };
        let mean: f64 = chosen.iter().map(|&(i, j)| euclidean(&group[i], &group[j])).sum::<f64>()
            / chosen.len() as f64;
        total += mean;
    }
    Ok(total / groups.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RPrecision {
    pub top1: f64,
    pub top2: f64,
    pub top3: f64,
    pub mm_dist: f64,
    pub batches: usize,
}

/// Batched retrieval accuracy: seeded batches of `batch` items; each motion
/// ranks its true caption among the batch's captions by Euclidean distance.
/// `mm_dist` is the mean true-pair distance over all used items.
pub fn r_precision_mm_dist(
    motion_feats: &[Vec<f64>],
    text_feats: &[Vec<f64>],
    batch: usize,
    seed: u64,
) -> Result<RPrecision, MetricError> {
    if motion_feats.len() != text_feats.len() {
        return Err(MetricError::ShapeMismatch(format!(
            "{} motion features vs {} text features",
            motion_feats.len(),
            text_feats.len()
        )));
    }
    if motion_feats.len() < batch {
        return Err(MetricError::TooFew {
            what: "paired features",
            min: batch,
            got: motion_feats.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..motion_feats.len()).collect();
    order.shuffle(&mut rng);

    let mut hits = [0usize; 3];
    let mut used = 0usize;
    let mut dist_sum = 0.0;
    for chunk in order.chunks_exact(batch) {
        for &m in chunk {
            let d_true = euclidean(&motion_feats[m], &text_feats[m]);
            dist_sum += d_true;
            // Rank counts texts strictly closer than the true caption.
            let rank = chunk
                .iter()
                .filter(|&&t| t != m && euclidean(&motion_feats[m], &text_feats[t]) < d_true)
                .count();
            for (k, hit) in hits.iter_mut().enumerate() {
                if rank <= k {
                    *hit += 1;
                }
            }
            used += 1;
        }
    }
    Ok(RPrecision {
        top1: hits[0] as f64 / used as f64,
        top2: hits[1] as f64 / used as f64,
        top3: hits[2] as f64 / used as f64,
        mm_dist: dist_sum / used as f64,
        batches: used / batch,
    })
}
