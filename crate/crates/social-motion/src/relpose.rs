//! Uniform binning of the relative root pose tuple (s_x, s_z, s_theta).
//!
//! Positional ranges come from dataset extrema widened by a margin; the angle
//! keeps its fixed analytic range (-pi, pi]. Out-of-range values clamp to the
//! boundary bins.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::xh3d::RelPose;

/// Widening applied to a degenerate (single-valued) positional range, meters.
const DEGENERATE_HALF_RANGE: f64 = 0.01;

#[derive(Debug, Error, PartialEq)]
pub enum BinError {
    #[error("cannot fit positional bins on an empty dataset")]
    EmptyDataset,
    #[error("bin count must be at least 2, got {0}")]
    BadBinCount(usize),
    #[error("non-finite component {0} in relative pose")]
    NonFinite(&'static str),
    #[error("bin index {index} out of range for {bins} bins")]
    IndexOutOfRange { index: usize, bins: usize },
    #[error("axis range invalid: min {min} >= max {max}")]
    BadRange { min: f64, max: f64 },
}

/// One component's uniform binning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisBins {
    pub min: f64,
    pub max: f64,
    pub bins: usize,
}

impl AxisBins {
    pub fn width(&self) -> f64 {
        (self.max - self.min) / self.bins as f64
    }

    pub fn validate(&self) -> Result<(), BinError> {
        if self.bins < 2 {
            return Err(BinError::BadBinCount(self.bins));
        }
        if !(self.max > self.min) {
            return Err(BinError::BadRange { min: self.min, max: self.max });
        }
        Ok(())
    }

    pub fn encode(&self, v: f64) -> usize {
        let raw = ((v - self.min) / self.width()).floor();
        if raw < 0.0 {
            0
        } else if raw as usize >= self.bins {
            self.bins - 1
        } else {
            raw as usize
        }
    }

    pub fn decode(&self, index: usize) -> Result<f64, BinError> {
        if index >= self.bins {
            return Err(BinError::IndexOutOfRange { index, bins: self.bins });
        }
        Ok(self.min + (index as f64 + 0.5) * self.width())
    }
}

/// Bin layout for the full relative-pose tuple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    pub x: AxisBins,
    pub z: AxisBins,
    pub theta: AxisBins,
}

/// Discretized relative pose: one bin index per component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelPoseBins {
    pub x: usize,
    pub z: usize,
    pub theta: usize,
}

impl BinSpec {
    pub fn validate(&self) -> Result<(), BinError> {
        self.x.validate()?;
        self.z.validate()?;
        self.theta.validate()
    }
}

/// Fit positional ranges from dataset extrema widened by `margin_fraction`
/// each side; the angle range is fixed to (-pi, pi].
pub fn fit_bins(
    dataset: &[RelPose],
    bins: usize,
    margin_fraction: f64,
) -> Result<BinSpec, BinError> {
    if bins < 2 {
        return Err(BinError::BadBinCount(bins));
    }
    if dataset.is_empty() {
        return Err(BinError::EmptyDataset);
    }
    let fit_axis = |values: &mut dyn Iterator<Item = f64>| -> AxisBins {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if (hi - lo).abs() < f64::EPSILON {
            lo -= DEGENERATE_HALF_RANGE;
            hi += DEGENERATE_HALF_RANGE;
        } else {
            let margin = margin_fraction * (hi - lo);
            lo -= margin;
            hi += margin;
        }
        AxisBins { min: lo, max: hi, bins }
    };
    let spec = BinSpec {
        x: fit_axis(&mut dataset.iter().map(|p| p.x)),
        z: fit_axis(&mut dataset.iter().map(|p| p.z)),
        theta: AxisBins { min: -std::f64::consts::PI, max: std::f64::consts::PI, bins },
    };
    spec.validate()?;
    Ok(spec)
}

pub fn bin_encode(p: &RelPose, spec: &BinSpec) -> Result<RelPoseBins, BinError> {
    if !p.x.is_finite() {
        return Err(BinError::NonFinite("s_x"));
    }
    if !p.z.is_finite() {
        return Err(BinError::NonFinite("s_z"));
    }
    if !p.theta.is_finite() {
        return Err(BinError::NonFinite("s_theta"));
    }
    Ok(RelPoseBins {
        x: spec.x.encode(p.x),
        z: spec.z.encode(p.z),
        theta: spec.theta.encode(p.theta),
    })
}

pub fn bin_decode(b: &RelPoseBins, spec: &BinSpec) -> Result<RelPose, BinError> {
    Ok(RelPose {
        x: spec.x.decode(b.x)?,
        z: spec.z.decode(b.z)?,
        theta: spec.theta.decode(b.theta)?,
    })
}
