//! Raw motion containers, planar rigid transforms, forward kinematics and
//! facing-direction estimation.

use thiserror::Error;

use crate::rotation::{cross3, wrap_angle, Quaternion};
use crate::skeleton::SkeletonDef;

#[derive(Debug, Error)]
pub enum MotionError {
    #[error("motion must have at least {min} frames, got {got}")]
    TooFewFrames { min: usize, got: usize },
    #[error("frame rate must be positive, got {0}")]
    BadFps(f64),
    #[error("non-finite value in motion data")]
    NonFinite,
    #[error("motion has {got} joints, skeleton has {want}")]
    JointCountMismatch { got: usize, want: usize },
    #[error("frame {frame}: across-body vector norm {norm:.2e} below 1e-8, pose is collapsed")]
    DegenerateFacing { frame: usize, norm: f64 },
    #[error("persons disagree on frame count: {0:?}")]
    FrameCountMismatch(Vec<usize>),
    #[error("scene has no persons")]
    EmptyScene,
    #[error("person index {index} out of range for {persons} persons")]
    PersonOutOfRange { index: usize, persons: usize },
}

/// One person's raw motion: per-frame root translation plus per-joint local
/// rotations (joint 0 carries the global root orientation).
#[derive(Debug, Clone, PartialEq)]
pub struct RawMotion {
    pub fps: f64,
    /// M frames of root translation in meters.
    pub root_pos: Vec<[f64; 3]>,
    /// M frames x J joints of rotations.
    pub rotations: Vec<Vec<Quaternion>>,
}

impl RawMotion {
    pub fn frames(&self) -> usize {
        self.root_pos.len()
    }

    pub fn joints(&self) -> usize {
        self.rotations.first().map_or(0, |f| f.len())
    }

    pub fn validate(&self) -> Result<(), MotionError> {
        if self.root_pos.is_empty() {
            return Err(MotionError::TooFewFrames { min: 1, got: 0 });
        }
        if !(self.fps > 0.0) {
            return Err(MotionError::BadFps(self.fps));
        }
        let j = self.joints();
        if self.rotations.len() != self.root_pos.len() {
            return Err(MotionError::FrameCountMismatch(vec![
                self.rotations.len(),
                self.root_pos.len(),
            ]));
        }
        for (p, frame) in self.root_pos.iter().zip(&self.rotations) {
            if frame.len() != j {
                return Err(MotionError::JointCountMismatch { got: frame.len(), want: j });
            }
            if !p.iter().all(|v| v.is_finite()) || !frame.iter().all(|q| q.is_finite()) {
                return Err(MotionError::NonFinite);
            }
        }
        Ok(())
    }

    /// Round every float through f32, the on-disk precision.
    pub fn quantize_f32(&mut self) {
        for p in self.root_pos.iter_mut() {
            for v in p.iter_mut() {
                *v = *v as f32 as f64;
            }
        }
        for frame in self.rotations.iter_mut() {
            for q in frame.iter_mut() {
                *q = Quaternion::new(
                    q.w as f32 as f64,
                    q.x as f32 as f64,
                    q.y as f32 as f64,
                    q.z as f32 as f64,
                );
            }
        }
    }
}

/// A multi-person scene sharing one frame rate and frame count.
#[derive(Debug, Clone, PartialEq)]
pub struct SocialMotion {
    pub fps: f64,
    pub persons: Vec<RawMotion>,
}

impl SocialMotion {
    pub fn frames(&self) -> usize {
        self.persons.first().map_or(0, |p| p.frames())
    }

    pub fn validate(&self) -> Result<(), MotionError> {
        if self.persons.is_empty() {
            return Err(MotionError::EmptyScene);
        }
        let counts: Vec<usize> = self.persons.iter().map(|p| p.frames()).collect();
        if counts.windows(2).any(|w| w[0] != w[1]) {
            return Err(MotionError::FrameCountMismatch(counts));
        }
        for p in &self.persons {
            p.validate()?;
        }
        Ok(())
    }
}

/// Global joint positions, frames x joints x 3, meters.
#[derive(Debug, Clone, PartialEq)]
pub struct Positions {
    pub frames: usize,
    pub joints: usize,
    data: Vec<f64>,
}

impl Positions {
    pub fn zeros(frames: usize, joints: usize) -> Positions {
        Positions { frames, joints, data: vec![0.0; frames * joints * 3] }
    }

    pub fn get(&self, frame: usize, joint: usize) -> [f64; 3] {
        let i = (frame * self.joints + joint) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set(&mut self, frame: usize, joint: usize, v: [f64; 3]) {
        let i = (frame * self.joints + joint) * 3;
        self.data[i] = v[0];
        self.data[i + 1] = v[1];
        self.data[i + 2] = v[2];
    }

    pub fn frame(&self, frame: usize) -> &[f64] {
        &self.data[frame * self.joints * 3..(frame + 1) * self.joints * 3]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Rigid transform in the ground plane: rotate by `yaw` about +Y, then
/// translate by `(x, 0, z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarTransform {
    pub x: f64,
    pub z: f64,
    pub yaw: f64,
}

impl PlanarTransform {
    pub const IDENTITY: PlanarTransform = PlanarTransform { x: 0.0, z: 0.0, yaw: 0.0 };

    pub fn apply_point(&self, p: [f64; 3]) -> [f64; 3] {
        let (s, c) = self.yaw.sin_cos();
        [c * p[0] + s * p[2] + self.x, p[1], -s * p[0] + c * p[2] + self.z]
    }

    pub fn inverse(&self) -> PlanarTransform {
        let (s, c) = self.yaw.sin_cos();
        // p = R(yaw) q + t  =>  q = R(-yaw)(p - t)
        PlanarTransform {
            x: -(c * self.x - s * self.z),
            z: -(s * self.x + c * self.z),
            yaw: -self.yaw,
        }
    }

    /// `self` after `other`: (self ∘ other)(p) = self(other(p)).
    pub fn compose(&self, other: &PlanarTransform) -> PlanarTransform {
        let t = self.apply_point([other.x, 0.0, other.z]);
        PlanarTransform { x: t[0], z: t[2], yaw: wrap_angle(self.yaw + other.yaw) }
    }

    /// Apply to a whole motion: root path and root orientation.
    pub fn apply_motion(&self, m: &RawMotion) -> RawMotion {
        let yaw_q = Quaternion::from_yaw(self.yaw);
        let mut out = m.clone();
        for (p, frame) in out.root_pos.iter_mut().zip(out.rotations.iter_mut()) {
            *p = self.apply_point(*p);
            frame[0] = yaw_q.mul(&frame[0]);
        }
        out
    }
}

/// Global joint positions from local rotations and root translation.
///
/// Each joint's global position is its parent's global position plus the
/// parent's global rotation applied to the rest offset; the root takes the
/// root translation and joint-0 rotation directly.
pub fn forward_kinematics(m: &RawMotion, skel: &SkeletonDef) -> Result<Positions, MotionError> {
    let j = skel.joint_count();
    if m.joints() != j {
        return Err(MotionError::JointCountMismatch { got: m.joints(), want: j });
    }
    let frames = m.frames();
    let mut out = Positions::zeros(frames, j);
    let mut global_rot = vec![Quaternion::IDENTITY; j];
    for t in 0..frames {
        for joint in 0..j {
            match skel.parents[joint] {
                None => {
                    global_rot[joint] = m.rotations[t][joint];
                    out.set(t, joint, m.root_pos[t]);
                }
                Some(parent) => {
                    let rotated = global_rot[parent].rotate(skel.offsets[joint]);
                    let base = out.get(t, parent);
                    out.set(t, joint, [
                        base[0] + rotated[0],
                        base[1] + rotated[1],
                        base[2] + rotated[2],
                    ]);
                    global_rot[joint] = global_rot[parent].mul(&m.rotations[t][joint]);
                }
            }
        }
    }
    Ok(out)
}

/// Yaw of the body's forward direction for one frame of global positions.
///
/// The across-body vector averages left-minus-right for hips and shoulders,
/// projected to the ground plane; forward is across x up. Range (-pi, pi].
pub fn facing_yaw(
    positions: &Positions,
    frame: usize,
    skel: &SkeletonDef,
) -> Result<f64, MotionError> {
    let lh = positions.get(frame, skel.left_hip);
    let rh = positions.get(frame, skel.right_hip);
    let ls = positions.get(frame, skel.left_shoulder);
    let rs = positions.get(frame, skel.right_shoulder);
    let across = [
        0.5 * ((lh[0] - rh[0]) + (ls[0] - rs[0])),
        0.0,
        0.5 * ((lh[2] - rh[2]) + (ls[2] - rs[2])),
    ];
    let norm = (across[0] * across[0] + across[2] * across[2]).sqrt();
    if norm < 1e-8 {
        return Err(MotionError::DegenerateFacing { frame, norm });
    }
    let forward = cross3(across, [0.0, 1.0, 0.0]);
    Ok(wrap_angle(forward[0].atan2(forward[2])))
}
