//! Multi-person motion modeling toolkit.
//!
//! The crate covers the full path from raw skeletal motion to language-model
//! tokens and back:
//!
//! * [`skeleton`] / [`motion`] — rotation math, skeleton definitions, forward
//!   kinematics and raw motion containers.
//! * [`xh3d`] — the canonical per-person kinematic feature layout plus
//!   first-frame relative root poses for multi-person scenes.
//! * [`vq`] — a small trainable VQ autoencoder that turns feature sequences
//!   into discrete motion tokens (EMA codebook, straight-through gradients).
//! * [`relpose`] — uniform binning of the relative root pose tuple.
//! * [`grammar`] — the unified token vocabulary and the interleaved
//!   multi-person sequence format (serializer, validating parser, surface text).
//! * [`lm`] — a compact encoder-decoder transformer over the unified
//!   vocabulary: span corruption, task pairs, instruction templates, training
//!   and autoregressive generation.
//! * [`metrics`] — MPJPE, PA-MPJPE, Accel, FID, Diversity, MModality,
//!   R-Precision and MM Dist with a deterministic stand-in embedder.
//! * [`data`] — scene files, resampling, clip segmentation, synthetic scene
//!   generation and dataset manifests.
//! * [`ckpt`] / [`pipeline`] — versioned binary checkpoints and the
//!   scene-to-token glue shared by the CLI and the tests.
//!
//! Everything is deterministic under explicit seeds and runs on a single CPU
//! core; numeric state is `f64` in memory and 32-bit floats on disk.

pub mod ckpt;
pub mod data;
pub mod grammar;
pub mod lm;
pub mod metrics;
pub mod motion;
pub mod nn;
pub mod pipeline;
pub mod relpose;
pub mod rotation;
pub mod skeleton;
pub mod vq;
pub mod xh3d;

pub use motion::{forward_kinematics, PlanarTransform, Positions, RawMotion, SocialMotion};
pub use rotation::{Quaternion, Rot6d};
pub use skeleton::SkeletonDef;
