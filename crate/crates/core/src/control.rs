//! DCM tracking and ZMP-CoM controllers on top of the linear inverted
//! pendulum `ẍ = ω² (x − r)`.
//!
//! The DCM controller picks a ZMP reference
//!
//! ```text
//! r_ref = ξ_ref − ξ̇_ref/ω + K_p (ξ − ξ_ref) + K_i ∫(ξ − ξ_ref)
//! ```
//!
//! and the ZMP-CoM controller turns it into a CoM velocity command
//!
//! ```text
//! ẋ* = ẋ_ref − K_zmp (r_ref − r) + K_com (x_ref − x)
//! ```

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Standard gravity, m/s².
pub const GRAVITY: f64 = 9.81;

/// Default anti-windup bound on the DCM integral, m·s.
pub const INTEGRAL_BOUND: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GainError {
    #[error("omega must be positive and finite, got {0}")]
    Omega(f64),
    #[error("gain `{name}` violates {bound} (smallest eigenvalue of the symmetric part {min_eig:.6})")]
    Bound { name: &'static str, bound: &'static str, min_eig: f64 },
    #[error("gain `{0}` has non-finite entries")]
    NonFinite(&'static str),
}

/// Smallest eigenvalue of the symmetric part `(M + Mᵀ)/2`.
pub fn min_sym_eigenvalue(m: &Matrix2<f64>) -> f64 {
    let a = m[(0, 0)];
    let c = m[(1, 1)];
    let b = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    0.5 * (a + c) - (0.25 * (a - c) * (a - c) + b * b).sqrt()
}

/// `xᵀ M x > 0` for all non-zero `x`.
pub fn is_positive_definite(m: &Matrix2<f64>) -> bool {
    min_sym_eigenvalue(m) > 0.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainSet {
    k_p: Matrix2<f64>,
    k_i: Matrix2<f64>,
    k_zmp: Matrix2<f64>,
    k_com: Matrix2<f64>,
    omega: f64,
}

impl GainSet {
    /// Validates `K_p > I`, `K_i > 0`, `K_com > ωI` and `0 < K_zmp < ωI`.
    pub fn new(
        k_p: Matrix2<f64>,
        k_i: Matrix2<f64>,
        k_zmp: Matrix2<f64>,
        k_com: Matrix2<f64>,
        omega: f64,
    ) -> Result<Self, GainError> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(GainError::Omega(omega));
        }
        for (name, m) in [("k_p", &k_p), ("k_i", &k_i), ("k_zmp", &k_zmp), ("k_com", &k_com)] {
            if m.iter().any(|v| !v.is_finite()) {
                return Err(GainError::NonFinite(name));
            }
        }
        let w = Matrix2::identity() * omega;
        let checks = [
            ("k_p", "K_p > I", k_p - Matrix2::identity()),
            ("k_i", "K_i > 0", k_i),
            ("k_com", "K_com > ω I", k_com - w),
            ("k_zmp", "0 < K_zmp < ω I", k_zmp),
            ("k_zmp", "0 < K_zmp < ω I", w - k_zmp),
        ];
        for (name, bound, m) in checks {
            let min_eig = min_sym_eigenvalue(&m);
            if !(min_eig > 0.0) {
                return Err(GainError::Bound { name, bound, min_eig });
            }
        }
        Ok(Self { k_p, k_i, k_zmp, k_com, omega })
    }

    /// Diagonal gains given as scalars.
    pub fn scalar(k_p: f64, k_i: f64, k_zmp: f64, k_com: f64, omega: f64) -> Result<Self, GainError> {
        let d = |v: f64| Matrix2::identity() * v;
        Self::new(d(k_p), d(k_i), d(k_zmp), d(k_com), omega)
    }

    pub fn k_p(&self) -> &Matrix2<f64> {
        &self.k_p
    }
    pub fn k_i(&self) -> &Matrix2<f64> {
        &self.k_i
    }
    pub fn k_zmp(&self) -> &Matrix2<f64> {
        &self.k_zmp
    }
    pub fn k_com(&self) -> &Matrix2<f64> {
        &self.k_com
    }
    pub fn omega(&self) -> f64 {
        self.omega
    }
}

/// `ω = sqrt(g / z)` for a pendulum of height `z`.
pub fn omega_from_height(z_com: f64, gravity: f64) -> f64 {
    (gravity / z_com).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipmState {
    /// CoM ground projection, m.
    pub pos: Vector2<f64>,
    pub vel: Vector2<f64>,
}

impl LipmState {
    pub fn at_rest(pos: Vector2<f64>) -> Self {
        Self { pos, vel: Vector2::zeros() }
    }

    pub fn is_finite(&self) -> bool {
        self.pos.iter().chain(self.vel.iter()).all(|v| v.is_finite())
    }
}

/// Clamped running integral of the DCM error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralState {
    pub value: Vector2<f64>,
    pub bound: f64,
}

impl Default for IntegralState {
    fn default() -> Self {
        Self::new(INTEGRAL_BOUND)
    }
}

impl IntegralState {
    pub fn new(bound: f64) -> Self {
        Self { value: Vector2::zeros(), bound }
    }

    /// Add `err·dt` and clamp componentwise to `±bound`.
    #[must_use]
    pub fn accumulate(self, err: &Vector2<f64>, dt: f64) -> Self {
        let b = self.bound;
        let value = (self.value + err * dt).map(|v| v.clamp(-b, b));
        Self { value, bound: b }
    }
}

pub fn dcm_from_state(state: &LipmState, omega: f64) -> Vector2<f64> {
    state.pos + state.vel / omega
}

/// ZMP reference from the DCM tracking law.
pub fn dcm_controller(
    xi: &Vector2<f64>,
    xi_ref: &Vector2<f64>,
    xi_ref_dot: &Vector2<f64>,
    integral: &IntegralState,
    gains: &GainSet,
) -> Vector2<f64> {
    xi_ref - xi_ref_dot / gains.omega + gains.k_p * (xi - xi_ref) + gains.k_i * integral.value
}

/// CoM velocity command from the ZMP-CoM law. The ZMP term keeps the sign
/// `−K_zmp (r_ref − r)`.
pub fn zmp_com_controller(
    x_ref_dot: &Vector2<f64>,
    zmp_ref: &Vector2<f64>,
    zmp: &Vector2<f64>,
    x_ref: &Vector2<f64>,
    x: &Vector2<f64>,
    gains: &GainSet,
) -> Vector2<f64> {
    x_ref_dot - gains.k_zmp * (zmp_ref - zmp) + gains.k_com * (x_ref - x)
}

/// Exact LIPM flow over `dt` with the ZMP held at `zmp`.
pub fn lipm_step(state: &LipmState, zmp: &Vector2<f64>, omega: f64, dt: f64) -> LipmState {
    let (ch, sh) = ((omega * dt).cosh(), (omega * dt).sinh());
    let d = state.pos - zmp;
    LipmState {
        pos: zmp + d * ch + state.vel * (sh / omega),
        vel: d * (omega * sh) + state.vel * ch,
    }
}
