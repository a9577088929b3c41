//! Data plumbing: the binary scene container, frame-rate resampling, clip
//! segmentation, synthetic scene generation and dataset manifests.

mod manifest;
mod resample;
mod scene_file;
mod synth;

pub use manifest::{build_manifest, Manifest, SceneEntry, Split};
pub use resample::{resample_fps, segment_clips};
pub use scene_file::{read_scene, write_scene, SceneFile, SCENE_FILE_VERSION};
pub use synth::{synth_scene, ScenePattern, SynthSpec, MIN_ROOT_DISTANCE, SYNTH_FPS};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic bytes, not a scene file")]
    BadMagic,
    #[error("unsupported scene file version {found} (supported: {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("file truncated while reading {0}")]
    Truncated(&'static str),
    #[error("invalid scene file: {0}")]
    Invalid(String),
    #[error("cannot upsample from {src} to {target} fps")]
    Upsample { src: f64, target: f64 },
    #[error("infeasible synthetic spec: pattern {pattern:?} with {persons} persons")]
    InfeasibleSpec { pattern: ScenePattern, persons: usize },
    #[error("duration {0} s below the 2 s minimum")]
    TooShort(f64),
    #[error("no scene files under {0}")]
    EmptyRoot(String),
    #[error("split ratios {0:?} must be positive and sum to 1")]
    BadSplitRatios([f64; 3]),
    #[error("manifest references missing file {0}")]
    MissingFile(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Motion(#[from] crate::motion::MotionError),
    #[error(transparent)]
    Codec(#[from] crate::xh3d::CodecError),
    #[error(transparent)]
    Bins(#[from] crate::relpose::BinError),
}
