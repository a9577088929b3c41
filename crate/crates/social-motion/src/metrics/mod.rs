//! Evaluation metrics: MPJPE, PA-MPJPE, Accel, FID, Diversity, MModality,
//! R-Precision and MM Dist, plus the deterministic stand-in embedder that
//! maps motions and captions into one feature space.

mod embedder;
mod fid;
mod linalg;
mod pose;
mod retrieval;

pub use embedder::Embedder;
pub use fid::fid;
pub use linalg::{sym_eigen, sym_sqrt};
pub use pose::{accel_error, mpjpe, pa_mpjpe, procrustes_align};
pub use retrieval::{diversity, multimodality, r_precision_mm_dist, RPrecision};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("need at least {min} {what}, got {got}")]
    TooFew { what: &'static str, min: usize, got: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("degenerate joint cloud (rank < 2) at frame {0}")]
    DegenerateCloud(usize),
    #[error("{requested} pairs requested but only {available} disjoint pairs available")]
    NotEnoughPairs { requested: usize, available: usize },
    #[error("caption group {0} has fewer than 2 generations")]
    GroupTooSmall(usize),
}

/// One evaluation run's results with the sampling bookkeeping needed to
/// reproduce it.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct MetricsReport {
    pub mpjpe_mm: Option<f64>,
    pub pa_mpjpe_mm: Option<f64>,
    pub accel_mm_per_frame2: Option<f64>,
    pub fid: Option<f64>,
    pub diversity: Option<f64>,
    pub mmodality: Option<f64>,
    pub r_precision_top1: Option<f64>,
    pub r_precision_top2: Option<f64>,
    pub r_precision_top3: Option<f64>,
    pub mm_dist: Option<f64>,
    pub sample_count: usize,
    pub seed: u64,
}

impl MetricsReport {
    pub fn empty(seed: u64) -> MetricsReport {
        MetricsReport {
            mpjpe_mm: None,
            pa_mpjpe_mm: None,
            accel_mm_per_frame2: None,
            fid: None,
            diversity: None,
            mmodality: None,
            r_precision_top1: None,
            r_precision_top2: None,
            r_precision_top3: None,
            mm_dist: None,
            sample_count: 0,
            seed,
        }
    }

    /// Aligned plain-text table, one metric per line.
    pub fn to_table(&self) -> String {
        let mut lines = Vec::new();
        let mut push = |name: &str, v: Option<f64>| {
            if let Some(v) = v {
                lines.push(format!("{name:<22} {v:>14.6}"));
            }
        };
        push("MPJPE (mm)", self.mpjpe_mm);
        push("PA-MPJPE (mm)", self.pa_mpjpe_mm);
        push("Accel (mm/frame^2)", self.accel_mm_per_frame2);
        push("FID", self.fid);
        push("Diversity", self.diversity);
        push("MModality", self.mmodality);
        push("R-Precision top-1", self.r_precision_top1);
        push("R-Precision top-2", self.r_precision_top2);
        push("R-Precision top-3", self.r_precision_top3);
        push("MM Dist", self.mm_dist);
        lines.push(format!("{:<22} {:>14}", "samples", self.sample_count));
        lines.push(format!("{:<22} {:>14}", "seed", self.seed));
        lines.join("\n")
    }
}
