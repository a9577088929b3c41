//! XH3D codec: per-person canonical kinematic features plus first-frame
//! relative root poses for multi-person scenes.
//!
//! Each person is canonicalized (frame-0 root at the XZ origin facing +Z) and
//! encoded independently as the per-frame tuple
//! `(r_a, r_x, r_z, r_y, j_p, j_v, j_r, c_f)`:
//! root yaw velocity, root planar velocity in the root frame, root height,
//! root-frame joint positions, root-frame joint velocities, local 6D joint
//! rotations and binary foot contacts — 263 values per frame for 22 joints.
//! Scene geometry is carried by one `(s_x, s_z, s_theta)` relative pose per
//! non-reference person.
//!
//! Velocities are per-frame displacements (m/frame); the frame rate is kept
//! as metadata so decode is an exact cumulative sum. The last feature row
//! duplicates the previous row's velocities so the matrix has one row per
//! frame.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::motion::{
    facing_yaw, forward_kinematics, MotionError, PlanarTransform, Positions, RawMotion,
    SocialMotion,
};
use crate::rotation::{wrap_angle, Quaternion, Rot6d, RotationError};
use crate::skeleton::SkeletonDef;

/// Default squared-displacement contact threshold, m^2/frame^2.
pub const FOOT_CONTACT_THRESHOLD: f64 = 2e-3;

/// Tolerance for the frame-0 canonicality check.
const CANONICAL_EPS: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("motion is not canonical at frame 0 (|x|={x:.2e}, |z|={z:.2e}, |yaw|={yaw:.2e})")]
    NotCanonical { x: f64, z: f64, yaw: f64 },
    #[error("encoding needs at least 2 frames, got {0}")]
    TooFewFrames(usize),
    #[error("feature width {got} does not match skeleton width {want}")]
    WidthMismatch { got: usize, want: usize },
    #[error("non-finite feature value at frame {frame}, column {col}")]
    NonFinite { frame: usize, col: usize },
    #[error("relative-pose count {relposes} does not match person count {persons}")]
    RelPoseCount { relposes: usize, persons: usize },
    #[error(transparent)]
    Motion(#[from] MotionError),
    #[error(transparent)]
    Rotation(#[from] RotationError),
}

/// Column ranges of the per-frame feature tuple for a `j`-joint skeleton.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureLayout {
    pub joints: usize,
}

impl FeatureLayout {
    pub fn new(joints: usize) -> FeatureLayout {
        FeatureLayout { joints }
    }

    pub fn width(&self) -> usize {
        let j = self.joints;
        4 + 3 * (j - 1) + 3 * j + 6 * (j - 1) + 4
    }

    pub fn root_yaw_vel(&self) -> usize {
        0
    }

    pub fn root_vel_x(&self) -> usize {
        1
    }

    pub fn root_vel_z(&self) -> usize {
        2
    }

    pub fn root_height(&self) -> usize {
        3
    }

    pub fn joint_positions(&self) -> std::ops::Range<usize> {
        4..4 + 3 * (self.joints - 1)
    }

    pub fn joint_velocities(&self) -> std::ops::Range<usize> {
        let s = self.joint_positions().end;
        s..s + 3 * self.joints
    }

    pub fn joint_rotations(&self) -> std::ops::Range<usize> {
        let s = self.joint_velocities().end;
        s..s + 6 * (self.joints - 1)
    }

    pub fn foot_contacts(&self) -> std::ops::Range<usize> {
        let s = self.joint_rotations().end;
        s..s + 4
    }
}

/// One person's feature matrix, frames x width, row-major.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PersonFeatures {
    pub joints: usize,
    pub fps: f64,
    pub frames: usize,
    pub data: Vec<f64>,
}

impl PersonFeatures {
    pub fn layout(&self) -> FeatureLayout {
        FeatureLayout::new(self.joints)
    }

    pub fn width(&self) -> usize {
        self.layout().width()
    }

    pub fn row(&self, frame: usize) -> &[f64] {
        let w = self.width();
        &self.data[frame * w..(frame + 1) * w]
    }

    pub fn row_mut(&mut self, frame: usize) -> &mut [f64] {
        let w = self.width();
        &mut self.data[frame * w..(frame + 1) * w]
    }

    pub fn validate(&self) -> Result<(), CodecError> {
        let w = self.width();
        if self.data.len() != w * self.frames {
            return Err(CodecError::WidthMismatch { got: self.data.len() / self.frames.max(1), want: w });
        }
        let cf = self.layout().foot_contacts();
        for t in 0..self.frames {
            let row = self.row(t);
            for (c, v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(CodecError::NonFinite { frame: t, col: c });
                }
            }
            for c in cf.clone() {
                if row[c] != 0.0 && row[c] != 1.0 {
                    return Err(CodecError::NonFinite { frame: t, col: c });
                }
            }
        }
        Ok(())
    }
}

/// First-frame relative root pose of one person in the reference's canonical
/// frame: planar offset in meters and facing difference in (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RelPose {
    pub x: f64,
    pub z: f64,
    pub theta: f64,
}

impl RelPose {
    pub fn identity() -> RelPose {
        RelPose { x: 0.0, z: 0.0, theta: 0.0 }
    }

    pub fn as_transform(&self) -> PlanarTransform {
        PlanarTransform { x: self.x, z: self.z, yaw: self.theta }
    }
}

/// Encoded multi-person scene: reference person first, one relative pose per
/// remaining person.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SocialFeatures {
    /// Index of the reference person in the original scene order.
    pub reference: usize,
    pub fps: f64,
    pub persons: Vec<PersonFeatures>,
    pub relposes: Vec<RelPose>,
}

impl SocialFeatures {
    pub fn validate(&self) -> Result<(), CodecError> {
        if self.persons.is_empty() {
            return Err(CodecError::Motion(MotionError::EmptyScene));
        }
        if self.relposes.len() + 1 != self.persons.len() {
            return Err(CodecError::RelPoseCount {
                relposes: self.relposes.len(),
                persons: self.persons.len(),
            });
        }
        let frames = self.persons[0].frames;
        for p in &self.persons {
            if p.frames != frames {
                return Err(CodecError::Motion(MotionError::FrameCountMismatch(
                    self.persons.iter().map(|p| p.frames).collect(),
                )));
            }
            p.validate()?;
        }
        Ok(())
    }
}

/// Decoded person: canonical-frame raw motion plus the joint positions
/// reconstructed directly from the feature matrix.
#[derive(Debug, Clone)]
pub struct DecodedPerson {
    pub motion: RawMotion,
    pub positions: Positions,
}

/// Decoded scene with per-person global joint positions.
#[derive(Debug, Clone)]
pub struct DecodedScene {
    pub motion: SocialMotion,
    pub positions: Vec<Positions>,
}

/// How `encode_social` picks the reference person.
#[derive(Debug, Clone, Copy)]
pub enum ReferenceChoice {
    Index(usize),
    Random(u64),
}

/// Remove the frame-0 planar pose: returns the canonical motion and the
/// planar transform that maps it back to the original.
pub fn canonicalize_person(
    m: &RawMotion,
    skel: &SkeletonDef,
) -> Result<(RawMotion, PlanarTransform), CodecError> {
    m.validate()?;
    let positions = forward_kinematics(m, skel)?;
    let yaw = facing_yaw(&positions, 0, skel)?;
    let root = m.root_pos[0];
    let removed = PlanarTransform { x: root[0], z: root[2], yaw };
    let canonical = removed.inverse().apply_motion(m);
    Ok((canonical, removed))
}

fn check_canonical(positions: &Positions, skel: &SkeletonDef) -> Result<(), CodecError> {
    let root = positions.get(0, 0);
    let yaw = facing_yaw(positions, 0, skel)?;
    if root[0].abs() > CANONICAL_EPS || root[2].abs() > CANONICAL_EPS || yaw.abs() > CANONICAL_EPS {
        return Err(CodecError::NotCanonical {
            x: root[0].abs(),
            z: root[2].abs(),
            yaw: yaw.abs(),
        });
    }
    Ok(())
}

/// Rotate an XZ vector by `yaw` about +Y.
fn rotate_xz(v: [f64; 2], yaw: f64) -> [f64; 2] {
    let (s, c) = yaw.sin_cos();
    [c * v[0] + s * v[1], -s * v[0] + c * v[1]]
}

/// Binary foot contacts from global joint positions: 1 where the squared
/// per-frame displacement of the contact joint stays below `threshold`.
/// Output is frames x 4 in heel-left, heel-right, toe-left, toe-right order;
/// the last frame repeats the previous one.
pub fn detect_foot_contacts(
    positions: &Positions,
    skel: &SkeletonDef,
    threshold: f64,
) -> Vec<[f64; 4]> {
    let m = positions.frames;
    let joints = skel.contact_joints();
    let mut out = vec![[1.0; 4]; m];
    for t in 0..m.saturating_sub(1) {
        for (k, &joint) in joints.iter().enumerate() {
            let a = positions.get(t, joint);
            let b = positions.get(t + 1, joint);
            let d2 = (b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2) + (b[2] - a[2]).powi(2);
            out[t][k] = if d2 < threshold { 1.0 } else { 0.0 };
        }
    }
    if m >= 2 {
        out[m - 1] = out[m - 2];
    }
    out
}

/// Encode one canonical person into the per-frame feature tuple.
pub fn encode_person_h3d(
    m: &RawMotion,
    skel: &SkeletonDef,
) -> Result<PersonFeatures, CodecError> {
    m.validate()?;
    if m.frames() < 2 {
        return Err(CodecError::TooFewFrames(m.frames()));
    }
    let positions = forward_kinematics(m, skel)?;
    check_canonical(&positions, skel)?;

    let j = skel.joint_count();
    let layout = FeatureLayout::new(j);
    let width = layout.width();
    let frames = m.frames();

    let yaws: Vec<f64> = (0..frames)
        .map(|t| facing_yaw(&positions, t, skel))
        .collect::<Result<_, _>>()?;
    let contacts = detect_foot_contacts(&positions, skel, FOOT_CONTACT_THRESHOLD);

    let mut data = vec![0.0; frames * width];
    for t in 0..frames {
        // Velocities at the last frame duplicate the previous step.
        let v = if t + 1 < frames { t } else { frames - 2 };
        let row = &mut data[t * width..(t + 1) * width];

        row[layout.root_yaw_vel()] = wrap_angle(yaws[v + 1] - yaws[v]);
        let root_a = positions.get(v, 0);
        let root_b = positions.get(v + 1, 0);
        let disp = rotate_xz([root_b[0] - root_a[0], root_b[2] - root_a[2]], -yaws[v]);
        row[layout.root_vel_x()] = disp[0];
        row[layout.root_vel_z()] = disp[1];
        row[layout.root_height()] = positions.get(t, 0)[1];

        let root = positions.get(t, 0);
        let jp = layout.joint_positions().start;
        for joint in 1..j {
            let p = positions.get(t, joint);
            let rel = [p[0] - root[0], p[1] - root[1], p[2] - root[2]];
            let xz = rotate_xz([rel[0], rel[2]], -yaws[t]);
            let o = jp + 3 * (joint - 1);
            row[o] = xz[0];
            row[o + 1] = rel[1];
            row[o + 2] = xz[1];
        }

        let jv = layout.joint_velocities().start;
        for joint in 0..j {
            let a = positions.get(v, joint);
            let b = positions.get(v + 1, joint);
            let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
            let xz = rotate_xz([d[0], d[2]], -yaws[v]);
            let o = jv + 3 * joint;
            row[o] = xz[0];
            row[o + 1] = d[1];
            row[o + 2] = xz[1];
        }

        let jr = layout.joint_rotations().start;
        for joint in 1..j {
            let six = Rot6d::from_quaternion(&m.rotations[t][joint])?;
            let o = jr + 6 * (joint - 1);
            row[o..o + 6].copy_from_slice(&six.0);
        }

        let cf = layout.foot_contacts().start;
        row[cf..cf + 4].copy_from_slice(&contacts[t]);
    }

    Ok(PersonFeatures { joints: j, fps: m.fps, frames, data })
}

/// Decode a feature matrix back to canonical-frame motion and positions.
pub fn decode_person_h3d(
    f: &PersonFeatures,
    skel: &SkeletonDef,
) -> Result<DecodedPerson, CodecError> {
    let j = skel.joint_count();
    if f.joints != j {
        return Err(CodecError::WidthMismatch {
            got: FeatureLayout::new(f.joints).width(),
            want: FeatureLayout::new(j).width(),
        });
    }
    f.validate()?;
    let layout = f.layout();
    let frames = f.frames;

    let mut yaw = vec![0.0; frames];
    for t in 1..frames {
        yaw[t] = yaw[t - 1] + f.row(t - 1)[layout.root_yaw_vel()];
    }
    let mut root = vec![[0.0; 3]; frames];
    root[0][1] = f.row(0)[layout.root_height()];
    for t in 1..frames {
        let prev = f.row(t - 1);
        let step = rotate_xz(
            [prev[layout.root_vel_x()], prev[layout.root_vel_z()]],
            yaw[t - 1],
        );
        root[t][0] = root[t - 1][0] + step[0];
        root[t][2] = root[t - 1][2] + step[1];
        root[t][1] = f.row(t)[layout.root_height()];
    }

    let mut positions = Positions::zeros(frames, j);
    let mut rotations = vec![vec![Quaternion::IDENTITY; j]; frames];
    let jp = layout.joint_positions().start;
    let jr = layout.joint_rotations().start;
    for t in 0..frames {
        let row = f.row(t);
        positions.set(t, 0, root[t]);
        rotations[t][0] = Quaternion::from_yaw(yaw[t]);
        for joint in 1..j {
            let o = jp + 3 * (joint - 1);
            let local = [row[o], row[o + 1], row[o + 2]];
            let xz = rotate_xz([local[0], local[2]], yaw[t]);
            positions.set(t, joint, [
                root[t][0] + xz[0],
                root[t][1] + local[1],
                root[t][2] + xz[1],
            ]);
            let o = jr + 6 * (joint - 1);
            let six = Rot6d([row[o], row[o + 1], row[o + 2], row[o + 3], row[o + 4], row[o + 5]]);
            rotations[t][joint] = six.to_quaternion()?;
        }
    }

    Ok(DecodedPerson {
        motion: RawMotion { fps: f.fps, root_pos: root, rotations },
        positions,
    })
}

/// The other person's frame-0 planar root pose expressed in the reference's
/// frame-0 canonical frame.
pub fn compute_relative_pose(
    reference: &RawMotion,
    other: &RawMotion,
    skel: &SkeletonDef,
) -> Result<RelPose, CodecError> {
    let ref_pos = forward_kinematics(reference, skel)?;
    let other_pos = forward_kinematics(other, skel)?;
    let ref_yaw = facing_yaw(&ref_pos, 0, skel)?;
    let other_yaw = facing_yaw(&other_pos, 0, skel)?;
    let r = ref_pos.get(0, 0);
    let o = other_pos.get(0, 0);
    let s = rotate_xz([o[0] - r[0], o[2] - r[2]], -ref_yaw);
    Ok(RelPose { x: s[0], z: s[1], theta: wrap_angle(other_yaw - ref_yaw) })
}

/// Canonicalize and encode every person; relative poses are measured against
/// the chosen reference, which is listed first in the output.
pub fn encode_social(
    scene: &SocialMotion,
    skel: &SkeletonDef,
    reference: ReferenceChoice,
) -> Result<SocialFeatures, CodecError> {
    scene.validate()?;
    let n = scene.persons.len();
    let ref_index = match reference {
        ReferenceChoice::Index(i) => {
            if i >= n {
                return Err(CodecError::Motion(MotionError::PersonOutOfRange {
                    index: i,
                    persons: n,
                }));
            }
            i
        }
        ReferenceChoice::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.random_range(0..n)
        }
    };

    let mut transforms = Vec::with_capacity(n);
    let mut encoded = Vec::with_capacity(n);
    for person in &scene.persons {
        let (canonical, removed) = canonicalize_person(person, skel)?;
        encoded.push(encode_person_h3d(&canonical, skel)?);
        transforms.push(removed);
    }

    let ref_t = transforms[ref_index];
    let mut persons = vec![encoded[ref_index].clone()];
    let mut relposes = Vec::with_capacity(n - 1);
    for i in 0..n {
        if i == ref_index {
            continue;
        }
        let t = transforms[i];
        let s = rotate_xz([t.x - ref_t.x, t.z - ref_t.z], -ref_t.yaw);
        relposes.push(RelPose { x: s[0], z: s[1], theta: wrap_angle(t.yaw - ref_t.yaw) });
        persons.push(encoded[i].clone());
    }

    Ok(SocialFeatures { reference: ref_index, fps: scene.fps, persons, relposes })
}

/// Decode a scene: the reference at the canonical origin, every other person
/// rigidly placed by its relative pose.
pub fn decode_social(f: &SocialFeatures, skel: &SkeletonDef) -> Result<DecodedScene, CodecError> {
    f.validate()?;
    let mut motions = Vec::with_capacity(f.persons.len());
    let mut positions = Vec::with_capacity(f.persons.len());
    for (i, person) in f.persons.iter().enumerate() {
        let decoded = decode_person_h3d(person, skel)?;
        if i == 0 {
            motions.push(decoded.motion);
            positions.push(decoded.positions);
        } else {
            let place = f.relposes[i - 1].as_transform();
            motions.push(place.apply_motion(&decoded.motion));
            let mut placed = Positions::zeros(decoded.positions.frames, decoded.positions.joints);
            for t in 0..decoded.positions.frames {
                for joint in 0..decoded.positions.joints {
                    placed.set(t, joint, place.apply_point(decoded.positions.get(t, joint)));
                }
            }
            positions.push(placed);
        }
    }
    Ok(DecodedScene { motion: SocialMotion { fps: f.fps, persons: motions }, positions })
}
