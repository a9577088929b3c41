//! Dataset manifest: scene inventory with split tags, the fitted relative
//! pose bins and the feature normalization statistics. Bins and statistics
//! come from the training split only.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::relpose::{fit_bins, AxisBins, BinSpec};
use crate::skeleton::SkeletonDef;
use crate::vq::FeatureStats;
use crate::xh3d::{
    canonicalize_person, compute_relative_pose, encode_person_h3d, RelPose,
};

use super::scene_file::read_scene;
use super::DataError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneEntry {
    /// Path relative to the manifest root.
    pub path: String,
    pub frames: usize,
    pub persons: usize,
    pub captions: Vec<String>,
    pub split: Split,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub root: PathBuf,
    pub skeleton_id: String,
    pub seed: u64,
    pub scenes: Vec<SceneEntry>,
    pub bin_spec: BinSpec,
    pub stats: FeatureStats,
}

impl Manifest {
    pub fn scenes_in(&self, split: Split) -> impl Iterator<Item = &SceneEntry> {
        self.scenes.iter().filter(move |s| s.split == split)
    }

    pub fn scene_path(&self, entry: &SceneEntry) -> PathBuf {
        self.root.join(&entry.path)
    }

    /// Referenced files must exist.
    pub fn validate(&self) -> Result<(), DataError> {
        for entry in &self.scenes {
            let path = self.scene_path(entry);
            if !path.is_file() {
                return Err(DataError::MissingFile(path.display().to_string()));
            }
        }
        Ok(())
    }

    pub fn save_json(&self, path: &Path) -> Result<(), DataError> {
        Ok(std::fs::write(path, serde_json::to_string_pretty(self)?)?)
    }

    pub fn load_json(path: &Path) -> Result<Manifest, DataError> {
        let manifest: Manifest = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        manifest.validate()?;
        Ok(manifest)
    }
}

/// Fallback positional range when the training split has no multi-person
/// scene to fit on.
const DEFAULT_POSITION_RANGE: f64 = 5.0;

/// Scan `root` for `*.scene` files, split them with a seeded shuffle, and
/// fit relative-pose bins plus feature statistics on the training split.
pub fn build_manifest(
    root: &Path,
    ratios: [f64; 3],
    bins: usize,
    margin_fraction: f64,
    seed: u64,
    skel: &SkeletonDef,
) -> Result<Manifest, DataError> {
    if ratios.iter().any(|&r| r < 0.0) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(DataError::BadSplitRatios(ratios));
    }
    let mut paths: Vec<PathBuf> = std::fs::read_dir(root)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e == "scene"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(DataError::EmptyRoot(root.display().to_string()));
    }

    let n = paths.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = (ratios[1] * n as f64).round() as usize;
    let n_test = (ratios[2] * n as f64).round() as usize;
    let n_train = n.saturating_sub(n_val + n_test);
    let mut splits = vec![Split::Train; n];
    for (rank, &idx) in order.iter().enumerate() {
        splits[idx] = if rank < n_train {
            Split::Train
        } else if rank < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
    }

    let mut entries = Vec::with_capacity(n);
    let mut train_relposes: Vec<RelPose> = Vec::new();
    let mut train_features = Vec::new();
    for (i, path) in paths.iter().enumerate() {
        let file = read_scene(path)?;
        let name = path
            .file_name()
            .map(|f| f.to_string_lossy().to_string())
            .unwrap_or_default();
        entries.push(SceneEntry {
            path: name,
            frames: file.scene.frames(),
            persons: file.scene.persons.len(),
            captions: file.captions.clone(),
            split: splits[i],
        });
        if splits[i] == Split::Train {
            for person in &file.scene.persons {
                let (canonical, _) = canonicalize_person(person, skel)?;
                train_features.push(encode_person_h3d(&canonical, skel)?);
            }
            // All ordered reference/other pairs: shuffling makes any person
            // the reference downstream, so bins must cover every choice.
            for a in 0..file.scene.persons.len() {
                for b in 0..file.scene.persons.len() {
                    if a != b {
                        train_relposes.push(compute_relative_pose(
                            &file.scene.persons[a],
                            &file.scene.persons[b],
                            skel,
                        )?);
                    }
                }
            }
        }
    }

    let bin_spec = if train_relposes.is_empty() {
        BinSpec {
            x: AxisBins { min: -DEFAULT_POSITION_RANGE, max: DEFAULT_POSITION_RANGE, bins },
            z: AxisBins { min: -DEFAULT_POSITION_RANGE, max: DEFAULT_POSITION_RANGE, bins },
            theta: AxisBins { min: -std::f64::consts::PI, max: std::f64::consts::PI, bins },
        }
    } else {
        fit_bins(&train_relposes, bins, margin_fraction)?
    };
    let stats = if train_features.is_empty() {
        FeatureStats::identity(crate::xh3d::FeatureLayout::new(skel.joint_count()).width())
    } else {
        FeatureStats::fit(&train_features)
    };

    Ok(Manifest {
        root: root.to_path_buf(),
        skeleton_id: skel.name.clone(),
        seed,
        scenes: entries,
        bin_spec,
        stats,
    })
}
