//! Rotation math: unit quaternions, 3x3 matrices and the 6D rotation format
//! (the first two columns of the rotation matrix).

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RotationError {
    #[error("non-finite component in rotation input")]
    NonFinite,
    #[error("quaternion norm {0} too close to zero")]
    ZeroNorm(f64),
    #[error("degenerate 6D input: columns do not span a plane")]
    DegenerateSixD,
}

/// Unit quaternion, scalar-first (w, x, y, z).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// First two columns of a rotation matrix, column-major: (m00,m10,m20, m01,m11,m21).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rot6d(pub [f64; 6]);

/// Row-major 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3(pub [f64; 9]);

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quaternion { w, x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(&self) -> Result<Quaternion, RotationError> {
        if !self.is_finite() {
            return Err(RotationError::NonFinite);
        }
        let n = self.norm();
        if n < 1e-12 {
            return Err(RotationError::ZeroNorm(n));
        }
        Ok(Quaternion::new(self.w / n, self.x / n, self.y / n, self.z / n))
    }

    /// Rotation of `angle` radians about a unit `axis`.
    pub fn from_axis_angle(axis: [f64; 3], angle: f64) -> Quaternion {
        let half = 0.5 * angle;
        let s = half.sin();
        Quaternion::new(half.cos(), axis[0] * s, axis[1] * s, axis[2] * s)
    }

    /// Yaw rotation about the +Y (up) axis.
    pub fn from_yaw(yaw: f64) -> Quaternion {
        Quaternion::from_axis_angle([0.0, 1.0, 0.0], yaw)
    }

    pub fn conjugate(&self) -> Quaternion {
        Quaternion::new(self.w, -self.x, -self.y, -self.z)
    }

    /// Hamilton product `self * rhs` (applies `rhs` first).
    pub fn mul(&self, rhs: &Quaternion) -> Quaternion {
        Quaternion::new(
            self.w * rhs.w - self.x * rhs.x - self.y * rhs.y - self.z * rhs.z,
            self.w * rhs.x + self.x * rhs.w + self.y * rhs.z - self.z * rhs.y,
            self.w * rhs.y - self.x * rhs.z + self.y * rhs.w + self.z * rhs.x,
            self.w * rhs.z + self.x * rhs.y - self.y * rhs.x + self.z * rhs.w,
        )
    }

    pub fn rotate(&self, v: [f64; 3]) -> [f64; 3] {
        // q v q* expanded; assumes unit norm.
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        let (vx, vy, vz) = (v[0], v[1], v[2]);
        // t = 2 * (q_vec x v)
        let tx = 2.0 * (y * vz - z * vy);
        let ty = 2.0 * (z * vx - x * vz);
        let tz = 2.0 * (x * vy - y * vx);
        [
            vx + w * tx + (y * tz - z * ty),
            vy + w * ty + (z * tx - x * tz),
            vz + w * tz + (x * ty - y * tx),
        ]
    }

    pub fn to_matrix(&self) -> Mat3 {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        Mat3([
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ])
    }

    /// Spherical interpolation between unit quaternions, shortest arc.
    pub fn slerp(&self, other: &Quaternion, t: f64) -> Quaternion {
        let mut b = *other;
        let mut dot = self.w * b.w + self.x * b.x + self.y * b.y + self.z * b.z;
        if dot < 0.0 {
            b = Quaternion::new(-b.w, -b.x, -b.y, -b.z);
            dot = -dot;
        }
        if dot > 1.0 - 1e-10 {
            // Nearly parallel: linear blend, renormalize.
            let q = Quaternion::new(
                self.w + t * (b.w - self.w),
                self.x + t * (b.x - self.x),
                self.y + t * (b.y - self.y),
                self.z + t * (b.z - self.z),
            );
            return q.normalized().unwrap_or(Quaternion::IDENTITY);
        }
        let theta = dot.clamp(-1.0, 1.0).acos();
        let s = theta.sin();
        let a = ((1.0 - t) * theta).sin() / s;
        let c = (t * theta).sin() / s;
        Quaternion::new(
            a * self.w + c * b.w,
            a * self.x + c * b.x,
            a * self.y + c * b.y,
            a * self.z + c * b.z,
        )
    }

    /// Angle in radians between two rotations, in [0, pi].
    pub fn angle_to(&self, other: &Quaternion) -> f64 {
        let d = (self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z).abs();
        2.0 * d.clamp(-1.0, 1.0).acos()
    }
}

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3([1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.0[3 * r + c]
    }

    pub fn col(&self, c: usize) -> [f64; 3] {
        [self.0[c], self.0[3 + c], self.0[6 + c]]
    }

    pub fn mul(&self, rhs: &Mat3) -> Mat3 {
        let mut out = [0.0; 9];
        for r in 0..3 {
            for c in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += self.get(r, k) * rhs.get(k, c);
                }
                out[3 * r + c] = s;
            }
        }
        Mat3(out)
    }

    pub fn transpose(&self) -> Mat3 {
        let m = &self.0;
        Mat3([m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]])
    }

    pub fn apply(&self, v: [f64; 3]) -> [f64; 3] {
        [
            self.0[0] * v[0] + self.0[1] * v[1] + self.0[2] * v[2],
            self.0[3] * v[0] + self.0[4] * v[1] + self.0[5] * v[2],
            self.0[6] * v[0] + self.0[7] * v[1] + self.0[8] * v[2],
        ]
    }

    pub fn trace(&self) -> f64 {
        self.0[0] + self.0[4] + self.0[8]
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
            + m[2] * (m[3] * m[7] - m[4] * m[6])
    }

    /// Robust matrix -> quaternion (Shepperd's branch selection).
    pub fn to_quaternion(&self) -> Quaternion {
        let m = &self.0;
        let trace = self.trace();
        let q = if trace > 0.0 {
            let s = (trace + 1.0).sqrt() * 2.0;
            Quaternion::new(0.25 * s, (m[7] - m[5]) / s, (m[2] - m[6]) / s, (m[3] - m[1]) / s)
        } else if m[0] > m[4] && m[0] > m[8] {
            let s = (1.0 + m[0] - m[4] - m[8]).sqrt() * 2.0;
            Quaternion::new((m[7] - m[5]) / s, 0.25 * s, (m[1] + m[3]) / s, (m[2] + m[6]) / s)
        } else if m[4] > m[8] {
            let s = (1.0 + m[4] - m[0] - m[8]).sqrt() * 2.0;
            Quaternion::new((m[2] - m[6]) / s, (m[1] + m[3]) / s, 0.25 * s, (m[5] + m[7]) / s)
        } else {
            let s = (1.0 + m[8] - m[0] - m[4]).sqrt() * 2.0;
            Quaternion::new((m[3] - m[1]) / s, (m[2] + m[6]) / s, (m[5] + m[7]) / s, 0.25 * s)
        };
        q.normalized().unwrap_or(Quaternion::IDENTITY)
    }
}

pub fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm3(a: [f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

impl Rot6d {
    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Gram-Schmidt reconstruction of the full rotation matrix.
    pub fn to_matrix(&self) -> Result<Mat3, RotationError> {
        if !self.is_finite() {
            return Err(RotationError::NonFinite);
        }
        let c0 = [self.0[0], self.0[1], self.0[2]];
        let c1 = [self.0[3], self.0[4], self.0[5]];
        let n0 = norm3(c0);
        if n0 < 1e-8 {
            return Err(RotationError::DegenerateSixD);
        }
        let a = [c0[0] / n0, c0[1] / n0, c0[2] / n0];
        let d = dot3(a, c1);
        let b_raw = [c1[0] - d * a[0], c1[1] - d * a[1], c1[2] - d * a[2]];
        let nb = norm3(b_raw);
        if nb < 1e-8 {
            return Err(RotationError::DegenerateSixD);
        }
        let b = [b_raw[0] / nb, b_raw[1] / nb, b_raw[2] / nb];
        let c = cross3(a, b);
        Ok(Mat3([a[0], b[0], c[0], a[1], b[1], c[1], a[2], b[2], c[2]]))
    }

    pub fn to_quaternion(&self) -> Result<Quaternion, RotationError> {
        Ok(self.to_matrix()?.to_quaternion())
    }

    pub fn from_quaternion(q: &Quaternion) -> Result<Rot6d, RotationError> {
        let q = q.normalized()?;
        let m = q.to_matrix();
        let c0 = m.col(0);
        let c1 = m.col(1);
        Ok(Rot6d([c0[0], c0[1], c0[2], c1[0], c1[1], c1[2]]))
    }
}

/// Wrap an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut r = a % two_pi;
    if r <= -std::f64::consts::PI {
        r += two_pi;
    } else if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}
