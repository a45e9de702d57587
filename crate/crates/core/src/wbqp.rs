//! Velocity-level whole-body inverse kinematics.
//!
//! Minimizes a weighted sum of soft task residuals
//!
//! ```text
//! f(ν) = Σ_k (v*_k − J_k ν)ᵀ W_k (v*_k − J_k ν)
//! ```
//!
//! (torso orientation with unit weight, both hands with `K_H`, posture with
//! `Λ` acting on the joint part of `ν`) subject to hard equalities for the
//! CoM and both feet. The problem has no inequalities, so it is solved in
//! one shot through its KKT system.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix6, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::BASE_DOFS;
use crate::spatial::{orientation_error, Rotation3, Transform, Twist};
use crate::tolerance;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("task `{task}`: expected {expected}, got {got}")]
    Dimension { task: String, expected: String, got: String },
    #[error("{rows} hard constraint rows exceed {dim} decision variables")]
    TooManyConstraints { rows: usize, dim: usize },
    #[error("hard constraints are degenerate: rank {rank} < {rows} rows (tasks: {tasks:?})")]
    RankDeficient { rank: usize, rows: usize, tasks: Vec<String> },
    #[error("task weights not symmetric positive definite: {0:?}")]
    IndefiniteWeight(Vec<String>),
    #[error("task `{0}` has non-finite entries")]
    NonFinite(String),
    #[error("KKT residuals too large: constraint {constraint:.3e}, stationarity {stationarity:.3e}")]
    Residual { constraint: f64, stationarity: f64 },
    #[error("gain `{0}` is not symmetric positive definite")]
    Gain(String),
}

/// Sign applied to the hand feedback term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HandErrorConvention {
    /// `+K_p e + K_i ∫e`, `+K_ω vee(sk(R R*ᵀ))` with `e = p − p*`.
    AsPrinted,
    /// Same terms negated, which drives the hand towards its target.
    #[default]
    Corrective,
}

impl HandErrorConvention {
    pub fn sign(self) -> f64 {
        match self {
            HandErrorConvention::AsPrinted => 1.0,
            HandErrorConvention::Corrective => -1.0,
        }
    }
}

/// Symmetric within a relative tolerance and with positive eigenvalues.
pub fn is_spd(m: &DMatrix<f64>) -> bool {
    if m.nrows() != m.ncols() || m.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > 1e-12 * scale {
        return false;
    }
    if is_diagonal(m) {
        return m.diagonal().iter().all(|&d| d > 0.0);
    }
    m.clone().symmetric_eigenvalues().iter().all(|&e| e > 0.0)
}

fn is_diagonal(m: &DMatrix<f64>) -> bool {
    (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| i == j || m[(i, j)] == 0.0))
}

fn spd3(m: &Matrix3<f64>) -> bool {
    is_spd(&DMatrix::from_column_slice(3, 3, m.as_slice()))
}

/// Proportional, integral and orientation gains of a pose task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseGains {
    pub kp: Matrix3<f64>,
    pub ki: Matrix3<f64>,
    pub kw: Matrix3<f64>,
}

impl PoseGains {
    pub fn scalar(kp: f64, ki: f64, kw: f64) -> Self {
        Self { kp: Matrix3::identity() * kp, ki: Matrix3::identity() * ki, kw: Matrix3::identity() * kw }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskGains {
    pub torso_kw: Matrix3<f64>,
    pub hand: PoseGains,
    pub hand_weight: Matrix6<f64>,
    pub foot: PoseGains,
    pub com_kp: Matrix3<f64>,
    pub com_ki: Matrix3<f64>,
    /// `K_s`, n×n.
    pub posture_ks: DMatrix<f64>,
    /// `Λ`, n×n.
    pub posture_weight: DMatrix<f64>,
    pub hand_convention: HandErrorConvention,
}

impl TaskGains {
    /// Every gain and weight must be symmetric positive definite; failures
    /// are reported by name.
    pub fn validate(&self, joints: usize) -> Result<(), QpError> {
        let mut bad = Vec::new();
        let m3 = [
            ("torso_kw", &self.torso_kw),
            ("hand.kp", &self.hand.kp),
            ("hand.ki", &self.hand.ki),
            ("hand.kw", &self.hand.kw),
            ("foot.kp", &self.foot.kp),
            ("foot.ki", &self.foot.ki),
            ("foot.kw", &self.foot.kw),
            ("com_kp", &self.com_kp),
            ("com_ki", &self.com_ki),
        ];
        for (name, m) in m3 {
            if !spd3(m) {
                bad.push(name);
            }
        }
        if !is_spd(&DMatrix::from_column_slice(6, 6, self.hand_weight.as_slice())) {
            bad.push("hand_weight");
        }
        for (name, m) in [("posture_ks", &self.posture_ks), ("posture_weight", &self.posture_weight)] {
            if m.nrows() != joints || m.ncols() != joints {
                return Err(QpError::Dimension {
                    task: name.into(),
                    expected: format!("{joints}x{joints}"),
                    got: format!("{}x{}", m.nrows(), m.ncols()),
                });
            }
            if !is_spd(m) {
                bad.push(name);
            }
        }
        match bad.first() {
            None => Ok(()),
            Some(_) => Err(QpError::Gain(bad.join(", "))),
        }
    }
}

/// `v*_T = −K_ωT · vee(sk(R_T R*_Tᵀ))`.
pub fn desired_torso_velocity(r: &Rotation3, r_des: &Rotation3, k: &Matrix3<f64>) -> Vector3<f64> {
    -(k * orientation_error(r, r_des))
}

/// Hand twist target from the pose error `e = p − p*`, its integral and the
/// orientation error, with the sign chosen by `convention`.
pub fn desired_hand_velocity(
    pose: &Transform,
    target: &Transform,
    integral: &Vector3<f64>,
    gains: &PoseGains,
    convention: HandErrorConvention,
) -> Twist {
    let sign = convention.sign();
    let e = pose.translation - target.translation;
    Twist {
        linear: (gains.kp * e + gains.ki * integral) * sign,
        angular: (gains.kw * orientation_error(&pose.rotation, &target.rotation)) * sign,
    }
}

/// Foot twist target: linear feed-forward minus PI position feedback,
/// orientation feedback with no angular feed-forward.
pub fn desired_foot_velocity(
    pose: &Transform,
    target: &Transform,
    feedforward: &Vector3<f64>,
    integral: &Vector3<f64>,
    gains: &PoseGains,
) -> Twist {
    let e = pose.translation - target.translation;
    Twist {
        linear: feedforward - (gains.kp * e + gains.ki * integral),
        angular: -(gains.kw * orientation_error(&pose.rotation, &target.rotation)),
    }
}

/// `v*_C = ẋ* − K_p (x − x*) − K_i ∫(x − x*)`.
pub fn desired_com_velocity(
    xdot_star: &Vector3<f64>,
    x: &Vector3<f64>,
    x_star: &Vector3<f64>,
    integral: &Vector3<f64>,
    kp: &Matrix3<f64>,
    ki: &Matrix3<f64>,
) -> Vector3<f64> {
    xdot_star - kp * (x - x_star) - ki * integral
}

/// `ṡ* = −K_s (s − s^d)`.
pub fn desired_postural_velocity(s: &DVector<f64>, s_d: &DVector<f64>, ks: &DMatrix<f64>) -> DVector<f64> {
    -(ks * (s - s_d))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub name: String,
    pub jacobian: DMatrix<f64>,
    pub target: DVector<f64>,
    /// Soft tasks only.
    pub weight: Option<DMatrix<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSet {
    dim: usize,
    hard: Vec<Task>,
    soft: Vec<Task>,
}

impl TaskSet {
    /// Empty set over `dim` decision variables (`6 + n`).
    pub fn new(dim: usize) -> Self {
        Self { dim, hard: Vec::new(), soft: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hard(&self) -> &[Task] {
        &self.hard
    }

    pub fn soft(&self) -> &[Task] {
        &self.soft
    }

    fn check(&self, name: &str, j: &DMatrix<f64>, v: &DVector<f64>) -> Result<(), QpError> {
        if j.ncols() != self.dim || j.nrows() != v.len() {
            return Err(QpError::Dimension {
                task: name.into(),
                expected: format!("{}x{} Jacobian and {}-vector", v.len(), self.dim, j.nrows()),
                got: format!("{}x{} and {}", j.nrows(), j.ncols(), v.len()),
            });
        }
        if j.iter().chain(v.iter()).any(|x| !x.is_finite()) {
            return Err(QpError::NonFinite(name.into()));
        }
        Ok(())
    }

    /// `J ν = v` exactly.
    pub fn add_hard(&mut self, name: &str, jacobian: DMatrix<f64>, target: DVector<f64>) -> Result<(), QpError> {
        self.check(name, &jacobian, &target)?;
        self.hard.push(Task { name: name.into(), jacobian, target, weight: None });
        Ok(())
    }

    /// `(v − J ν)ᵀ W (v − J ν)` added to the cost.
    pub fn add_soft(
        &mut self,
        name: &str,
        jacobian: DMatrix<f64>,
        target: DVector<f64>,
        weight: DMatrix<f64>,
    ) -> Result<(), QpError> {
        self.check(name, &jacobian, &target)?;
        if weight.nrows() != target.len() || weight.ncols() != target.len() {
            return Err(QpError::Dimension {
                task: name.into(),
                expected: format!("{0}x{0} weight", target.len()),
                got: format!("{}x{}", weight.nrows(), weight.ncols()),
            });
        }
        self.soft.push(Task { name: name.into(), jacobian, target, weight: Some(weight) });
        Ok(())
    }

    /// Posture term on the joint block of `ν`.
    pub fn add_postural(&mut self, s_dot_star: DVector<f64>, weight: DMatrix<f64>) -> Result<(), QpError> {
        let n = s_dot_star.len();
        if n + BASE_DOFS != self.dim {
            return Err(QpError::Dimension {
                task: "posture".into(),
                expected: format!("{}-vector", self.dim - BASE_DOFS),
                got: n.to_string(),
            });
        }
        let mut sel = DMatrix::zeros(n, self.dim);
        sel.view_mut((0, BASE_DOFS), (n, n)).fill_with_identity();
        self.add_soft("posture", sel, s_dot_star, weight)
    }

    pub fn hard_rows(&self) -> usize {
        self.hard.iter().map(|t| t.target.len()).sum()
    }

    /// Stacked `(A, b)` of the hard constraints.
    pub fn constraints(&self) -> (DMatrix<f64>, DVector<f64>) {
        let m = self.hard_rows();
        let mut a = DMatrix::zeros(m, self.dim);
        let mut b = DVector::zeros(m);
        let mut r = 0;
        for t in &self.hard {
            let k = t.target.len();
            a.view_mut((r, 0), (k, self.dim)).copy_from(&t.jacobian);
            b.rows_mut(r, k).copy_from(&t.target);
            r += k;
        }
        (a, b)
    }

    /// Hessian `H = Σ JᵀWJ` and gradient `g = −Σ JᵀWv` of `f/2`.
    pub fn cost(&self) -> (DMatrix<f64>, DVector<f64>) {
        let mut h = DMatrix::zeros(self.dim, self.dim);
        let mut g = DVector::zeros(self.dim);
        for t in &self.soft {
            let w = t.weight.as_ref().expect("soft task has a weight");
            let jtw = t.jacobian.transpose() * w;
            h += &jtw * &t.jacobian;
            g -= &jtw * &t.target;
        }
        (h, g)
    }

    /// `f(ν)` without regularization.
    pub fn objective(&self, nu: &DVector<f64>) -> f64 {
        self.soft
            .iter()
            .map(|t| {
                let r = &t.target - &t.jacobian * nu;
                let w = t.weight.as_ref().expect("soft task has a weight");
                r.dot(&(w * &r))
            })
            .sum()
    }

    /// Weighted residual norm of one soft task.
    pub fn soft_residual(&self, name: &str, nu: &DVector<f64>) -> Option<f64> {
        self.soft.iter().find(|t| t.name == name).map(|t| (&t.target - &t.jacobian * nu).norm())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub nu: DVector<f64>,
    /// Multipliers of the hard constraints.
    pub lambda: DVector<f64>,
    pub constraint_residual: f64,
    pub stationarity_residual: f64,
    pub objective: f64,
}

/// Solve the equality-constrained QP.
pub fn solve(tasks: &TaskSet) -> Result<QpSolution, QpError> {
    let n = tasks.dim;
    let bad: Vec<String> = tasks
        .soft
        .iter()
        .filter(|t| !is_spd(t.weight.as_ref().expect("soft task has a weight")))
        .map(|t| t.name.clone())
        .collect();
    if !bad.is_empty() {
        return Err(QpError::IndefiniteWeight(bad));
    }

    let (a, b) = tasks.constraints();
    let m = a.nrows();
    if m > n {
        return Err(QpError::TooManyConstraints { rows: m, dim: n });
    }
    if m > 0 {
        let sv = a.clone().singular_values();
        let smax = sv.max();
        let rank = sv.iter().filter(|&&s| s > tolerance::RANK * smax.max(f64::MIN_POSITIVE)).count();
        if rank < m {
            return Err(QpError::RankDeficient {
                rank,
                rows: m,
                tasks: tasks.hard.iter().map(|t| t.name.clone()).collect(),
            });
        }
    }

    let (mut h, g) = tasks.cost();
    for i in 0..n {
        h[(i, i)] += tolerance::QP_REGULARIZATION;
    }
    let mut kkt = DMatrix::zeros(n + m, n + m);
    kkt.view_mut((0, 0), (n, n)).copy_from(&h);
    kkt.view_mut((n, 0), (m, n)).copy_from(&a);
    kkt.view_mut((0, n), (n, m)).copy_from(&a.transpose());
    let mut rhs = DVector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(&(-&g));
    rhs.rows_mut(n, m).copy_from(&b);

    let lu = kkt.clone().lu();
    let mut x = lu.solve(&rhs).ok_or(QpError::Residual { constraint: f64::NAN, stationarity: f64::NAN })?;
    // One round of iterative refinement.
    let r = &rhs - &kkt * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    let nu = x.rows(0, n).into_owned();
    let lambda = x.rows(n, m).into_owned();
    let constraint_residual = if m > 0 { (&a * &nu - &b).norm() } else { 0.0 };
    let stationarity_residual = (&h * &nu + &g + a.transpose() * &lambda).norm();
    if !(constraint_residual < tolerance::QP_RESIDUAL && stationarity_residual < tolerance::QP_RESIDUAL) {
        return Err(QpError::Residual { constraint: constraint_residual, stationarity: stationarity_residual });
    }
    let objective = tasks.objective(&nu);
    Ok(QpSolution { nu, lambda, constraint_residual, stationarity_residual, objective })
}

/// Uniformly shrink `ν` so no joint velocity exceeds its limit. Returns the
/// applied factor (1 when nothing was scaled).
pub fn scale_to_velocity_limits(nu: &mut DVector<f64>, limits: &DVector<f64>) -> f64 {
    let mut factor: f64 = 1.0;
    for (i, lim) in limits.iter().enumerate() {
        let v = nu[BASE_DOFS + i].abs();
        if v > *lim {
            factor = factor.min(lim / v);
        }
    }
    if factor < 1.0 {
        *nu *= factor;
    }
    factor
}
