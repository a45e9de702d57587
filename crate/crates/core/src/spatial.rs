//! Rotation and rigid-transform algebra.
//!
//! Rotations are stored as 3×3 matrices. The two operators every controller
//! consumes are [`skew`], the antisymmetric part `(A − Aᵀ)/2`, and [`vee`],
//! which reads the three coordinates out of a skew-symmetric matrix:
//!
//! ```text
//!         ⎡  0  −z   y ⎤
//! hat(v) = ⎢  z   0  −x ⎥ ,  vee(hat(v)) = v = (x, y, z)
//!         ⎣ −y   x   0 ⎦
//! ```
//!
//! [`orientation_error`] is `vee(skew(R · R_desᵀ))`. For small errors it is the
//! rotation vector taking `R_des` to `R`; its magnitude is `sin θ`, so it falls
//! back to zero as the error approaches a half turn. No special handling is
//! applied near π.

use std::fmt;
use std::ops::Mul;

use nalgebra::{Matrix3, Matrix4, Vector3, Vector6};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::tolerance;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpatialError {
    #[error("matrix is not skew-symmetric (‖S + Sᵀ‖ = {0:e})")]
    NotSkew(f64),
    #[error("matrix is not a rotation: {0}")]
    NotRotation(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

/// Antisymmetric part of a 3×3 matrix, `(A − Aᵀ)/2`.
pub fn skew(a: &Matrix3<f64>) -> Matrix3<f64> {
    (a - a.transpose()) * 0.5
}

/// Skew-symmetric matrix of a 3-vector, so that `hat(v) * w == v × w`.
pub fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Coordinates of a skew-symmetric matrix. Inverse of [`hat`].
pub fn vee(s: &Matrix3<f64>) -> Result<Vector3<f64>, SpatialError> {
    let asym = (s + s.transpose()).norm();
    if !asym.is_finite() {
        return Err(SpatialError::NonFinite("vee input"));
    }
    if asym >= tolerance::SKEW {
        return Err(SpatialError::NotSkew(asym));
    }
    Ok(vee_unchecked(s))
}

fn vee_unchecked(s: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(s[(2, 1)], s[(0, 2)], s[(1, 0)])
}

/// `vee(skew(R · R_desᵀ))`: zero iff the two rotations coincide.
pub fn orientation_error(r: &Rotation3, r_des: &Rotation3) -> Vector3<f64> {
    vee_unchecked(&skew(&(r.0 * r_des.0.transpose())))
}

/// Elementary rotation about +z.
pub fn rot_z(theta: f64) -> Rotation3 {
    Rotation3::rot_z(theta)
}

pub fn compose(a: &Transform, b: &Transform) -> Transform {
    a * b
}

pub fn invert(t: &Transform) -> Transform {
    t.inverse()
}

/// A proper rotation matrix.
#[derive(Clone, Copy, PartialEq)]
pub struct Rotation3(Matrix3<f64>);

impl Rotation3 {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Validates orthonormality and a positive determinant.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, SpatialError> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(SpatialError::NonFinite("rotation"));
        }
        let ortho = (m.transpose() * m - Matrix3::identity()).norm();
        if ortho >= tolerance::ROTATION {
            return Err(SpatialError::NotRotation(format!("‖RᵀR − I‖ = {ortho:e}")));
        }
        let det = m.determinant();
        if (det - 1.0).abs() >= tolerance::ROTATION {
            return Err(SpatialError::NotRotation(format!("det = {det}")));
        }
        Ok(Self(m))
    }

    /// Wraps a matrix the caller knows to be a rotation (e.g. a product of
    /// rotations).
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Self(m)
    }

    pub fn from_row_slice(values: &[f64]) -> Result<Self, SpatialError> {
        if values.len() != 9 {
            return Err(SpatialError::NotRotation(format!(
                "expected 9 entries, got {}",
                values.len()
            )));
        }
        Self::from_matrix(Matrix3::from_row_slice(values))
    }

    pub fn rot_z(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self(Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
    }

    /// Rotation by `angle` about a unit `axis` (Rodrigues' formula).
    pub fn about_axis(axis: &Vector3<f64>, angle: f64) -> Self {
        let k = hat(axis);
        let (s, c) = angle.sin_cos();
        Self(Matrix3::identity() + k * s + k * k * (1.0 - c))
    }

    /// Rotation whose axis-angle vector is `w` (`exp(hat(w))`).
    pub fn exp(w: &Vector3<f64>) -> Self {
        let angle = w.norm();
        if angle < 1e-300 {
            return Self::identity();
        }
        Self::about_axis(&(w / angle), angle)
    }

    /// Roll/pitch/yaw (`R = Rz(yaw)·Ry(pitch)·Rx(roll)`).
    pub fn from_rpy(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self::rot_z(yaw)
            * Self::about_axis(&Vector3::y(), pitch)
            * Self::about_axis(&Vector3::x(), roll)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn inverse(&self) -> Self {
        self.transpose()
    }

    /// Heading of the body x-axis projected on the ground plane.
    pub fn yaw(&self) -> f64 {
        self.0[(1, 0)].atan2(self.0[(0, 0)])
    }

    /// Intrinsic Z-Y-X angles `(yaw, pitch, roll)`.
    pub fn zyx_angles(&self) -> (f64, f64, f64) {
        let m = &self.0;
        let yaw = m[(1, 0)].atan2(m[(0, 0)]);
        let pitch = (-m[(2, 0)]).clamp(-1.0, 1.0).asin();
        let roll = m[(2, 1)].atan2(m[(2, 2)]);
        (yaw, pitch, roll)
    }

    pub fn to_row_array(&self) -> [f64; 9] {
        let m = &self.0;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ]
    }
}

impl Default for Rotation3 {
    fn default() -> Self {
        Self::identity()
    }
}

impl fmt::Debug for Rotation3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Rotation3").field(&self.to_row_array()).finish()
    }
}

impl Mul for Rotation3 {
    type Output = Rotation3;
    fn mul(self, rhs: Rotation3) -> Rotation3 {
        Rotation3(self.0 * rhs.0)
    }
}

impl Mul<Vector3<f64>> for Rotation3 {
    type Output = Vector3<f64>;
    fn mul(self, rhs: Vector3<f64>) -> Vector3<f64> {
        self.0 * rhs
    }
}

impl Mul<&Vector3<f64>> for &Rotation3 {
    type Output = Vector3<f64>;
    fn mul(self, rhs: &Vector3<f64>) -> Vector3<f64> {
        self.0 * rhs
    }
}

impl Serialize for Rotation3 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_row_array().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Rotation3 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let values = <[f64; 9]>::deserialize(d)?;
        Rotation3::from_row_slice(&values).map_err(serde::de::Error::custom)
    }
}

/// Rigid-body pose: `x ↦ R x + p`.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Transform {
    pub rotation: Rotation3,
    pub translation: Vector3<f64>,
}

impl Transform {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn new(rotation: Rotation3, translation: Vector3<f64>) -> Self {
        Self { rotation, translation }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self::new(Rotation3::identity(), translation)
    }

    pub fn from_rotation(rotation: Rotation3) -> Self {
        Self::new(rotation, Vector3::zeros())
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self::new(rt, -(rt.0 * self.translation))
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.0 * p + self.translation
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut h = Matrix4::identity();
        h.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation.0);
        h.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        h
    }

    pub fn from_homogeneous(h: &Matrix4<f64>) -> Result<Self, SpatialError> {
        let r = Rotation3::from_matrix(h.fixed_view::<3, 3>(0, 0).into_owned())?;
        Ok(Self::new(r, h.fixed_view::<3, 1>(0, 3).into_owned()))
    }

    pub fn is_finite(&self) -> bool {
        self.translation.iter().all(|v| v.is_finite())
            && self.rotation.0.iter().all(|v| v.is_finite())
    }
}

impl Mul for Transform {
    type Output = Transform;
    fn mul(self, rhs: Transform) -> Transform {
        &self * &rhs
    }
}

impl Mul<&Transform> for &Transform {
    type Output = Transform;
    fn mul(self, rhs: &Transform) -> Transform {
        Transform::new(
            self.rotation * rhs.rotation,
            self.rotation.0 * rhs.translation + self.translation,
        )
    }
}

/// Linear and angular velocity of a frame, both in the inertial frame.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Twist {
    pub linear: Vector3<f64>,
    pub angular: Vector3<f64>,
}

impl Twist {
    pub fn new(linear: Vector3<f64>, angular: Vector3<f64>) -> Self {
        Self { linear, angular }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    /// Stacked linear-then-angular, matching Jacobian row order.
    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.linear.x,
            self.linear.y,
            self.linear.z,
            self.angular.x,
            self.angular.y,
            self.angular.z,
        )
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self::new(
            Vector3::new(v[0], v[1], v[2]),
            Vector3::new(v[3], v[4], v[5]),
        )
    }

    pub fn is_finite(&self) -> bool {
        self.linear.iter().chain(self.angular.iter()).all(|v| v.is_finite())
    }
}

/// Wraps an angle to `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut w = a.rem_euclid(two_pi);
    if w > std::f64::consts::PI {
        w -= two_pi;
    }
    w
}
