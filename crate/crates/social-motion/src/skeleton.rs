//! Skeleton definition: joint tree, rest-pose offsets and the special joint
//! index sets used for facing estimation and foot contacts.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SkeletonError {
    #[error("skeleton must have at least 2 joints, got {0}")]
    TooFewJoints(usize),
    #[error("joint 0 must be the root (no parent)")]
    RootHasParent,
    #[error("joint {joint} has parent {parent}, parents must precede children")]
    BadParentOrder { joint: usize, parent: usize },
    #[error("joint {0} above root is missing a parent")]
    MissingParent(usize),
    #[error("{set} set must contain exactly 2 distinct non-root joints")]
    BadContactSet { set: &'static str },
    #[error("facing joint index {0} out of range")]
    BadFacingIndex(usize),
    #[error("field lengths disagree: {0}")]
    LengthMismatch(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Joint tree with rest-pose bone offsets in meters (parent-relative).
///
/// Joint 0 is the root. Parents must precede children so forward kinematics
/// can run in index order. Y is up and XZ is the ground plane.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkeletonDef {
    pub name: String,
    pub joint_names: Vec<String>,
    /// `None` exactly for joint 0.
    pub parents: Vec<Option<usize>>,
    pub offsets: Vec<[f64; 3]>,
    /// Heel joints, left then right.
    pub heels: [usize; 2],
    /// Toe joints, left then right.
    pub toes: [usize; 2],
    pub left_hip: usize,
    pub right_hip: usize,
    pub left_shoulder: usize,
    pub right_shoulder: usize,
}

impl SkeletonDef {
    pub fn joint_count(&self) -> usize {
        self.parents.len()
    }

    /// Contact joint order used in the feature layout: heels then toes.
    pub fn contact_joints(&self) -> [usize; 4] {
        [self.heels[0], self.heels[1], self.toes[0], self.toes[1]]
    }

    pub fn validate(&self) -> Result<(), SkeletonError> {
        let j = self.parents.len();
        if j < 2 {
            return Err(SkeletonError::TooFewJoints(j));
        }
        if self.joint_names.len() != j || self.offsets.len() != j {
            return Err(SkeletonError::LengthMismatch(format!(
                "{} names, {} parents, {} offsets",
                self.joint_names.len(),
                j,
                self.offsets.len()
            )));
        }
        if self.parents[0].is_some() {
            return Err(SkeletonError::RootHasParent);
        }
        for (i, p) in self.parents.iter().enumerate().skip(1) {
            match p {
                None => return Err(SkeletonError::MissingParent(i)),
                Some(parent) if *parent >= i => {
                    return Err(SkeletonError::BadParentOrder { joint: i, parent: *parent })
                }
                _ => {}
            }
        }
        for (set, pair) in [("heel", self.heels), ("toe", self.toes)] {
            if pair[0] == pair[1] || pair.iter().any(|&i| i == 0 || i >= j) {
                return Err(SkeletonError::BadContactSet { set });
            }
        }
        for idx in [self.left_hip, self.right_hip, self.left_shoulder, self.right_shoulder] {
            if idx >= j {
                return Err(SkeletonError::BadFacingIndex(idx));
            }
        }
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<SkeletonDef, SkeletonError> {
        let text = std::fs::read_to_string(path)?;
        let s: SkeletonDef = serde_json::from_str(&text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json_string(&self) -> Result<String, SkeletonError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Built-in 22-joint body skeleton (SMPL body joint order, hands excluded),
    /// T-pose rest offsets in meters, facing +Z with Y up.
    pub fn default_22() -> SkeletonDef {
        let names = [
            "pelvis",
            "left_hip",
            "right_hip",
            "spine1",
            "left_knee",
            "right_knee",
            "spine2",
            "left_ankle",
            "right_ankle",
            "spine3",
            "left_foot",
            "right_foot",
            "neck",
            "left_collar",
            "right_collar",
            "head",
            "left_shoulder",
            "right_shoulder",
            "left_elbow",
            "right_elbow",
            "left_wrist",
            "right_wrist",
        ];
        let parents: [i32; 22] = [
            -1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19,
        ];
        let offsets: [[f64; 3]; 22] = [
            [0.0, 0.0, 0.0],
            [0.09, -0.06, 0.0],
            [-0.09, -0.06, 0.0],
            [0.0, 0.11, 0.0],
            [0.0, -0.38, 0.0],
            [0.0, -0.38, 0.0],
            [0.0, 0.13, 0.0],
            [0.0, -0.40, 0.0],
            [0.0, -0.40, 0.0],
            [0.0, 0.05, 0.0],
            [0.0, -0.06, 0.13],
            [-0.0, -0.06, 0.13],
            [0.0, 0.21, 0.0],
            [0.07, 0.12, 0.0],
            [-0.07, 0.12, 0.0],
            [0.0, 0.09, 0.0],
            [0.09, 0.04, 0.0],
            [-0.09, 0.04, 0.0],
            [0.26, 0.0, 0.0],
            [-0.26, 0.0, 0.0],
            [0.25, 0.0, 0.0],
            [-0.25, 0.0, 0.0],
        ];
        let s = SkeletonDef {
            name: "body22".to_string(),
            joint_names: names.iter().map(|s| s.to_string()).collect(),
            parents: parents
                .iter()
                .map(|&p| if p < 0 { None } else { Some(p as usize) })
                .collect(),
            offsets: offsets.to_vec(),
            heels: [7, 8],
            toes: [10, 11],
            left_hip: 1,
            right_hip: 2,
            left_shoulder: 16,
            right_shoulder: 17,
        };
        debug_assert!(s.validate().is_ok());
        s
    }

    /// Tiny 5-joint chain skeleton for width-formula and oracle tests.
    pub fn toy_5() -> SkeletonDef {
        SkeletonDef {
            name: "toy5".to_string(),
            joint_names: ["root", "a", "b", "c", "d"].iter().map(|s| s.to_string()).collect(),
            parents: vec![None, Some(0), Some(0), Some(1), Some(2)],
            offsets: vec![
                [0.0, 0.0, 0.0],
                [0.1, -0.2, 0.0],
                [-0.1, -0.2, 0.0],
                [0.0, -0.3, 0.05],
                [0.0, -0.3, 0.05],
            ],
            heels: [1, 2],
            toes: [3, 4],
            left_hip: 1,
            right_hip: 2,
            left_shoulder: 3,
            right_shoulder: 4,
        }
    }
}
