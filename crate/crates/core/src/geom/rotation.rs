//! Rotation matrices and the continuous 6D parameterization.
//!
//! A 6D rotation stores the first two columns of the matrix, `[c0 | c1]`.
//! Mapping back uses Gram–Schmidt, which makes the representation invariant
//! to positive scaling of the first column and to shearing the second
//! column along the first.

use nalgebra::{Matrix3, Unit, UnitQuaternion, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ORTHO_TOL: f64 = 1e-6;
const DEGENERATE_NORM: f64 = 1e-9;

/// Proper rotation (orthonormal, det = +1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 9]", into = "[f64; 9]")]
pub struct RotationMatrix(Matrix3<f64>);

impl RotationMatrix {
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        if !m.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidRotation("non-finite entry".into()));
        }
        let err = (m.transpose() * m - Matrix3::identity()).abs().max();
        if err > ORTHO_TOL {
            return Err(Error::InvalidRotation(format!("not orthonormal (max error {err:e})")));
        }
        let det = m.determinant();
        if (det - 1.0).abs() > ORTHO_TOL {
            return Err(Error::InvalidRotation(format!("determinant {det}")));
        }
        Ok(Self(m))
    }

    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    pub fn from_row_major(v: [f64; 9]) -> Result<Self> {
        Self::new(Matrix3::from_row_slice(&v))
    }

    pub fn to_row_major(&self) -> [f64; 9] {
        let m = &self.0;
        [m[(0, 0)], m[(0, 1)], m[(0, 2)], m[(1, 0)], m[(1, 1)], m[(1, 2)], m[(2, 0)], m[(2, 1)], m[(2, 2)]]
    }

    /// Rotation of `angle` radians about `axis` (right-hand rule).
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let axis = Unit::new_normalize(*axis);
        Self(*nalgebra::Rotation3::from_axis_angle(&axis, angle).matrix())
    }

    pub fn from_quaternion(q: &UnitQuaternion<f64>) -> Self {
        Self(*q.to_rotation_matrix().matrix())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn compose(&self, other: &RotationMatrix) -> Self {
        Self(self.0 * other.0)
    }

    pub fn apply(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }

    /// Re-orthonormalizes a matrix that drifted numerically (e.g. after
    /// repeated products). Inputs far from a rotation are rejected.
    pub fn renormalized(m: &Matrix3<f64>) -> Result<Self> {
        let r6 = Rotation6D([m[(0, 0)], m[(1, 0)], m[(2, 0)], m[(0, 1)], m[(1, 1)], m[(2, 1)]]);
        rot6d_to_matrix(&r6)
    }
}

impl TryFrom<[f64; 9]> for RotationMatrix {
    type Error = Error;

    fn try_from(v: [f64; 9]) -> Result<Self> {
        Self::from_row_major(v)
    }
}

impl From<RotationMatrix> for [f64; 9] {
    fn from(r: RotationMatrix) -> Self {
        r.to_row_major()
    }
}

/// First two matrix columns, `[c0.x, c0.y, c0.z, c1.x, c1.y, c1.z]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rotation6D(pub [f64; 6]);

impl Rotation6D {
    pub fn first(&self) -> Vector3<f64> {
        Vector3::new(self.0[0], self.0[1], self.0[2])
    }

    pub fn second(&self) -> Vector3<f64> {
        Vector3::new(self.0[3], self.0[4], self.0[5])
    }

    pub fn from_columns(a1: &Vector3<f64>, a2: &Vector3<f64>) -> Self {
        Self([a1.x, a1.y, a1.z, a2.x, a2.y, a2.z])
    }
}

/// Per-component dataset statistics used to whiten 6D rotations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rot6dStats {
    pub mean: [f64; 6],
    pub std: [f64; 6],
}

impl Rot6dStats {
    pub fn new(mean: [f64; 6], std: [f64; 6]) -> Result<Self> {
        if std.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidArgument("6D std components must be positive".into()));
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidArgument("6D mean must be finite".into()));
        }
        Ok(Self { mean, std })
    }

    pub fn identity() -> Self {
        Self { mean: [0.0; 6], std: [1.0; 6] }
    }

    pub fn normalize(&self, r: &Rotation6D) -> Rotation6D {
        Rotation6D(std::array::from_fn(|i| (r.0[i] - self.mean[i]) / self.std[i]))
    }

    pub fn denormalize(&self, r: &Rotation6D) -> Rotation6D {
        Rotation6D(std::array::from_fn(|i| r.0[i] * self.std[i] + self.mean[i]))
    }
}

pub fn rot6d_to_matrix(r6: &Rotation6D) -> Result<RotationMatrix> {
    let a1 = r6.first();
    let a2 = r6.second();
    if !(a1.iter().chain(a2.iter()).all(|v| v.is_finite())) {
        return Err(Error::Degenerate6D);
    }
    let n1 = a1.norm();
    if n1 <= DEGENERATE_NORM {
        return Err(Error::Degenerate6D);
    }
    let b1 = a1 / n1;
    let ortho = a2 - b1 * a2.dot(&b1);
    let n2 = ortho.norm();
    if n2 <= DEGENERATE_NORM {
        return Err(Error::Degenerate6D);
    }
    let b2 = ortho / n2;
    let b3 = b1.cross(&b2);
    Ok(RotationMatrix(Matrix3::from_columns(&[b1, b2, b3])))
}

pub fn matrix_to_rot6d(r: &RotationMatrix) -> Rotation6D {
    let m = r.matrix();
    Rotation6D::from_columns(&m.column(0).into_owned(), &m.column(1).into_owned())
}

/// Geodesic angle of a rotation, in degrees within `[0, 180]`.
pub fn rotation_angle_deg(r: &RotationMatrix) -> f64 {
    let cos = ((r.matrix().trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    cos.acos().to_degrees()
}

/// Uniformly distributed rotation (Shoemake's unit-quaternion construction).
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> RotationMatrix {
    let u1: f64 = rng.random();
    let u2: f64 = rng.random();
    let u3: f64 = rng.random();
    let tau = std::f64::consts::TAU;
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let q = nalgebra::Quaternion::new(b * (tau * u3).cos(), a * (tau * u2).sin(), a * (tau * u2).cos(), b * (tau * u3).sin());
    RotationMatrix::from_quaternion(&UnitQuaternion::from_quaternion(q))
}
