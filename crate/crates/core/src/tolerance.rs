//! Numeric tolerances used across the crate, collected in one place.
//!
//! | Constant | Value | Used by |
//! |----------|-------|---------|
//! | [`ROTATION`] | 1e-9 | orthonormality / determinant checks on rotations |
//! | [`SKEW`] | 1e-9 | accepting a matrix as skew-symmetric in `vee` |
//! | [`RANK`] | 1e-10 | relative singular-value cutoff for QP constraint rank |
//! | [`QP_RESIDUAL`] | 1e-8 | constraint and stationarity residual on QP success |
//! | [`QP_REGULARIZATION`] | 1e-9 | diagonal added to the QP Hessian |
//! | [`DCM_CONTINUITY`] | 1e-9 | position/velocity agreement at DCM piece boundaries |
//! | [`AXIS_NORM`] | 1e-9 | unit-norm check of joint axes |

/// Orthonormality (`RᵀR = I`) and `det R = 1` tolerance.
pub const ROTATION: f64 = 1e-9;

/// Maximum `‖S + Sᵀ‖` for a matrix to count as skew-symmetric.
pub const SKEW: f64 = 1e-9;

/// Relative singular-value threshold below which constraint rows are
/// considered linearly dependent.
pub const RANK: f64 = 1e-10;

/// Residual bound reported as success by the whole-body QP.
pub const QP_RESIDUAL: f64 = 1e-8;

/// Tikhonov term added to the QP Hessian diagonal.
pub const QP_REGULARIZATION: f64 = 1e-9;

/// Agreement of adjacent DCM pieces at their shared boundary.
pub const DCM_CONTINUITY: f64 = 1e-9;

/// Joint axes must have `|‖a‖ − 1|` below this.
pub const AXIS_NORM: f64 = 1e-9;
