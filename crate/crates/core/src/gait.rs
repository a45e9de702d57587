//! Footstep planning, swing-foot splines and piecewise DCM references.
//!
//! The walking command drives a unicycle: its forward component is the
//! linear speed and its lateral component, times `heading_gain`, the turning
//! rate. Feet are dropped at `±w/2` from the unicycle axis once per step
//! period and then clamped to the reachable region around the stance foot.
//!
//! Each step is a double-support (DS) phase followed by single support (SS).
//! The DCM reference is exponential during SS,
//!
//! ```text
//! ξ(t) = r + e^{ωt} (ξ₀ − r)
//! ```
//!
//! and a cubic Hermite bridge during DS. The initial DCM of every step comes
//! from a backward recursion that ends on the final stance midpoint.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::SoleGeometry;
use crate::retarget::{ComCommand, Side};
use crate::spatial::{wrap_angle, Rotation3, Transform, Twist};
use crate::support::{double_support, single_support, ConvexPolygon};

/// Slack when comparing tick times against planned event times.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("degenerate stance: feet are {0:.3e} m apart")]
    DegenerateStance(f64),
    #[error("invalid gait parameter `{name}`: {reason}")]
    Param { name: &'static str, reason: String },
    #[error("inconsistent plan timing at step {step}: {reason}")]
    Timing { step: usize, reason: String },
    #[error("time {t} outside step domain [0, {duration}]")]
    OutsideDomain { t: f64, duration: f64 },
    #[error("omega must be positive, got {0}")]
    Omega(f64),
}

/// Planar pose on the ground.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Self { x, y, yaw }
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    /// Point expressed in this pose's frame, mapped to the world.
    pub fn apply(&self, local: &Vector2<f64>) -> Vector2<f64> {
        let (s, c) = self.yaw.sin_cos();
        self.position() + Vector2::new(c * local.x - s * local.y, s * local.x + c * local.y)
    }

    /// World point expressed in this pose's frame.
    pub fn local(&self, world: &Vector2<f64>) -> Vector2<f64> {
        let (s, c) = self.yaw.sin_cos();
        let d = world - self.position();
        Vector2::new(c * d.x + s * d.y, -s * d.x + c * d.y)
    }

    /// 3D transform with the sole on the ground plane.
    pub fn to_transform(&self) -> Transform {
        Transform::new(Rotation3::rot_z(self.yaw), Vector3::new(self.x, self.y, 0.0))
    }

    pub fn from_transform(t: &Transform) -> Self {
        Self::new(t.translation.x, t.translation.y, t.rotation.yaw())
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.yaw.is_finite()
    }
}

/// Poses of both feet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stance {
    pub left: Pose2,
    pub right: Pose2,
}

impl Stance {
    pub fn get(&self, side: Side) -> Pose2 {
        match side {
            Side::Left => self.left,
            Side::Right => self.right,
        }
    }

    pub fn set(&mut self, side: Side, pose: Pose2) {
        match side {
            Side::Left => self.left = pose,
            Side::Right => self.right = pose,
        }
    }

    pub fn midpoint(&self) -> Vector2<f64> {
        (self.left.position() + self.right.position()) / 2.0
    }

    /// Circular mean of the two foot yaws.
    pub fn mean_yaw(&self) -> f64 {
        self.right.yaw + wrap_angle(self.left.yaw - self.right.yaw) / 2.0
    }

    pub fn separation(&self) -> f64 {
        (self.left.position() - self.right.position()).norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Footstep {
    pub foot: Side,
    pub pose: Pose2,
    /// Landing time, s.
    pub impact_time: f64,
    /// DS plus SS duration of this step, s.
    pub step_duration: f64,
    /// Leading double-support duration, s.
    pub ds_duration: f64,
}

impl Footstep {
    pub fn start_time(&self) -> f64 {
        self.impact_time - self.step_duration
    }

    /// Lift-off time of the swing foot.
    pub fn swing_start(&self) -> f64 {
        self.start_time() + self.ds_duration
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FootstepPlan {
    pub start_time: f64,
    pub initial: Stance,
    pub steps: Vec<Footstep>,
}

impl FootstepPlan {
    pub fn standing(start_time: f64, initial: Stance) -> Self {
        Self { start_time, initial, steps: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Stance after all steps have landed.
    pub fn final_stance(&self) -> Stance {
        let mut s = self.initial;
        for st in &self.steps {
            s.set(st.foot, st.pose);
        }
        s
    }

    /// Stance in force while step `k` is executing (before it lands).
    pub fn stance_before(&self, k: usize) -> Stance {
        let mut s = self.initial;
        for st in &self.steps[..k] {
            s.set(st.foot, st.pose);
        }
        s
    }

    pub fn end_time(&self) -> f64 {
        self.steps.last().map_or(self.start_time, |s| s.impact_time)
    }

    /// Timing consistency: contiguous steps, positive SS phases.
    pub fn check_timing(&self) -> Result<(), PlanError> {
        let mut prev = self.start_time;
        for (k, st) in self.steps.iter().enumerate() {
            if !(st.ds_duration >= 0.0 && st.step_duration > st.ds_duration) {
                return Err(PlanError::Timing {
                    step: k,
                    reason: format!(
                        "step duration {} must exceed ds duration {}",
                        st.step_duration, st.ds_duration
                    ),
                });
            }
            if (st.start_time() - prev).abs() > TIME_EPS {
                return Err(PlanError::Timing {
                    step: k,
                    reason: format!("starts at {} but previous event ends at {}", st.start_time(), prev),
                });
            }
            prev = st.impact_time;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaitParams {
    /// DS plus SS duration of a regular step, s.
    pub step_duration: f64,
    pub ds_duration: f64,
    /// Leading DS of the first step after standing, s.
    pub start_ds_duration: f64,
    /// Final DS that brings the DCM to rest, s.
    pub end_ds_duration: f64,
    pub apex_height: f64,
    /// Lateral foot spacing `w`, m.
    pub nominal_width: f64,
    pub min_width: f64,
    pub max_width: f64,
    /// Forward reach relative to the stance foot, m.
    pub max_step_length: f64,
    pub max_step_back: f64,
    /// Yaw change relative to the stance foot, rad.
    pub max_turn: f64,
    /// Heading rate per unit of lateral command, rad/s.
    pub heading_gain: f64,
    /// Commands with smaller norm mean "stand".
    pub deadband: f64,
    pub horizon_steps: usize,
}

impl Default for GaitParams {
    fn default() -> Self {
        Self {
            step_duration: 1.0,
            ds_duration: 0.2,
            start_ds_duration: 0.6,
            end_ds_duration: 0.6,
            apex_height: 0.03,
            nominal_width: 0.12,
            min_width: 0.10,
            max_width: 0.22,
            max_step_length: 0.18,
            max_step_back: 0.08,
            max_turn: 0.3,
            heading_gain: 1.0,
            deadband: 0.05,
            horizon_steps: 3,
        }
    }
}

impl GaitParams {
    pub fn validate(&self) -> Result<(), PlanError> {
        fn bad(name: &'static str, reason: impl Into<String>) -> Result<(), PlanError> {
            Err(PlanError::Param { name, reason: reason.into() })
        }
        let finite = [
            self.step_duration,
            self.ds_duration,
            self.start_ds_duration,
            self.end_ds_duration,
            self.apex_height,
            self.nominal_width,
            self.min_width,
            self.max_width,
            self.max_step_length,
            self.max_step_back,
            self.max_turn,
            self.heading_gain,
            self.deadband,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("gait", "all parameters must be finite");
        }
        if self.step_duration <= 0.0 {
            return bad("step_duration", "must be > 0");
        }
        if self.ds_duration < 0.0 || self.ds_duration >= self.step_duration {
            return bad("ds_duration", "must satisfy 0 <= ds_duration < step_duration");
        }
        let ss = self.step_duration - self.ds_duration;
        if self.start_ds_duration < 0.0 {
            return bad("start_ds_duration", "must be >= 0");
        }
        if ss <= 0.0 {
            return bad("ds_duration", "single support must last > 0");
        }
        if self.end_ds_duration <= 0.0 {
            return bad("end_ds_duration", "must be > 0");
        }
        if self.apex_height < 0.0 {
            return bad("apex_height", format!("must be >= 0, got {}", self.apex_height));
        }
        if !(self.min_width > 0.0 && self.min_width <= self.nominal_width && self.nominal_width <= self.max_width) {
            return bad("nominal_width", "must satisfy 0 < min_width <= nominal_width <= max_width");
        }
        if self.max_step_length <= 0.0 {
            return bad("max_step_length", "must be > 0");
        }
        if self.max_step_back < 0.0 {
            return bad("max_step_back", "must be >= 0");
        }
        if self.max_turn <= 0.0 {
            return bad("max_turn", "must be > 0");
        }
        if self.deadband < 0.0 {
            return bad("deadband", "must be >= 0");
        }
        if self.horizon_steps == 0 {
            return bad("horizon_steps", "must be >= 1");
        }
        Ok(())
    }

    pub fn ss_duration(&self) -> f64 {
        self.step_duration - self.ds_duration
    }
}

/// Where the next plan starts from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanRequest {
    pub start_time: f64,
    pub stance: Stance,
    /// Foot that swings first; `None` picks by turning direction.
    pub next_swing: Option<Side>,
    /// Use `start_ds_duration` for the first step.
    pub from_rest: bool,
}

#[derive(Debug, Clone, Copy)]
struct Unicycle {
    x: f64,
    y: f64,
    theta: f64,
}

impl Unicycle {
    /// Exact flow for constant speed `v` and turn rate `w` over `dt`.
    fn advance(&mut self, v: f64, w: f64, dt: f64) {
        if (w * dt).abs() < 1e-12 {
            self.x += v * dt * self.theta.cos();
            self.y += v * dt * self.theta.sin();
        } else {
            let th1 = self.theta + w * dt;
            self.x += v / w * (th1.sin() - self.theta.sin());
            self.y -= v / w * (th1.cos() - self.theta.cos());
            self.theta = th1;
        }
    }

    fn pose(&self) -> Pose2 {
        Pose2::new(self.x, self.y, self.theta)
    }
}

/// Sub-steps per step period when integrating a time-varying command.
const UNICYCLE_SUBSTEPS: usize = 50;

/// Plan up to `horizon_steps` footsteps from a command profile.
///
/// `commands` is evaluated at absolute times; the plan is empty when the
/// command at the start time is inside the deadband.
pub fn plan_footsteps<F>(commands: F, request: &PlanRequest, params: &GaitParams) -> Result<FootstepPlan, PlanError>
where
    F: Fn(f64) -> ComCommand,
{
    params.validate()?;
    let sep = request.stance.separation();
    if !sep.is_finite() || sep < 1e-3 {
        return Err(PlanError::DegenerateStance(sep));
    }
    let t0 = request.start_time;
    let mut plan = FootstepPlan::standing(t0, request.stance);
    let first_cmd = commands(t0);
    if first_cmd.norm() < params.deadband {
        return Ok(plan);
    }

    let mut stance = request.stance;
    let mut swing = request
        .next_swing
        .unwrap_or(if first_cmd.y >= 0.0 { Side::Left } else { Side::Right });
    // The unicycle axis sits w/2 inboard of the first support foot.
    let support = stance.get(swing.other());
    let axis = support.apply(&Vector2::new(0.0, swing.sign() * params.nominal_width / 2.0));
    let mut uni = Unicycle { x: axis.x, y: axis.y, theta: support.yaw };
    let mut clock = t0;
    let mut impact = t0;
    let period = params.step_duration;
    let h = period / UNICYCLE_SUBSTEPS as f64;

    for k in 0..params.horizon_steps {
        for i in 0..UNICYCLE_SUBSTEPS {
            let c = commands(clock + (i as f64 + 0.5) * h);
            uni.advance(c.x, params.heading_gain * c.y, h);
        }
        clock += period;

        let support = stance.get(swing.other());
        let dyaw = wrap_angle(uni.theta - support.yaw).clamp(-params.max_turn, params.max_turn);
        uni.theta = support.yaw + dyaw;
        let lateral = Vector2::new(0.0, swing.sign() * params.nominal_width / 2.0);
        let raw = uni.pose().apply(&lateral);
        let mut rel = support.local(&raw);
        rel.x = rel.x.clamp(-params.max_step_back, params.max_step_length);
        let dy = (swing.sign() * rel.y).clamp(params.min_width, params.max_width);
        rel.y = swing.sign() * dy;
        let foot_pos = support.apply(&rel);
        let foot = Pose2::new(foot_pos.x, foot_pos.y, uni.theta);

        // Re-anchor the unicycle on the (possibly clamped) footstep.
        let axis = foot.apply(&-lateral);
        uni.x = axis.x;
        uni.y = axis.y;

        let ds = if k == 0 && request.from_rest { params.start_ds_duration } else { params.ds_duration };
        let step_duration = ds + params.ss_duration();
        impact += step_duration;
        plan.steps.push(Footstep { foot: swing, pose: foot, impact_time: impact, step_duration, ds_duration: ds });
        stance.set(swing, foot);
        swing = swing.other();
    }
    Ok(plan)
}

/// Same as [`plan_footsteps`] with a constant command.
pub fn plan_footsteps_constant(
    command: ComCommand,
    request: &PlanRequest,
    params: &GaitParams,
) -> Result<FootstepPlan, PlanError> {
    plan_footsteps(|_| command, request, params)
}

/// Cubic `3u² − 2u³` and its derivative with respect to `u`.
fn smoothstep(u: f64) -> (f64, f64) {
    (u * u * (3.0 - 2.0 * u), 6.0 * u * (1.0 - u))
}

/// Swing-foot pose and twist at `t` seconds after the step starts.
///
/// The step opens with `ds_duration` of double support during which the foot
/// rests at `from`; afterwards planar position and yaw follow a cubic with
/// zero end velocities while the height rises to `apex` at mid-swing and
/// lands at zero. Outside `[0, step_duration]` the foot rests at the nearer
/// end.
pub fn swing_trajectory(
    from: &Pose2,
    to: &Pose2,
    step_duration: f64,
    ds_duration: f64,
    apex: f64,
    t: f64,
) -> (Transform, Twist) {
    let swing = step_duration - ds_duration;
    if t <= ds_duration || swing <= 0.0 {
        return (from.to_transform(), Twist::zero());
    }
    if t >= step_duration {
        return (to.to_transform(), Twist::zero());
    }
    let u = (t - ds_duration) / swing;
    let (s, ds) = smoothstep(u);
    let dyaw = wrap_angle(to.yaw - from.yaw);
    let dp = to.position() - from.position();

    // Height: two cubics meeting at the apex with zero slope.
    let (v, dv) = if u <= 0.5 { smoothstep(2.0 * u) } else { smoothstep(2.0 - 2.0 * u) };
    let dz_du = if u <= 0.5 { 2.0 * dv } else { -2.0 * dv };

    let p = from.position() + dp * s;
    let yaw = from.yaw + dyaw * s;
    let pose = Transform::new(Rotation3::rot_z(yaw), Vector3::new(p.x, p.y, apex * v));
    let rate = ds / swing;
    let twist = Twist {
        linear: Vector3::new(dp.x * rate, dp.y * rate, apex * dz_du / swing),
        angular: Vector3::new(0.0, 0.0, dyaw * rate),
    };
    (pose, twist)
}

/// Single-support DCM at `t` seconds into a step of length `duration`.
pub fn dcm_ss(
    zmp: &Vector2<f64>,
    xi0: &Vector2<f64>,
    omega: f64,
    t: f64,
    duration: f64,
) -> Result<Vector2<f64>, PlanError> {
    if !(omega > 0.0) {
        return Err(PlanError::Omega(omega));
    }
    if !(0.0..=duration).contains(&t) {
        return Err(PlanError::OutsideDomain { t, duration });
    }
    Ok(zmp + (xi0 - zmp) * (omega * t).exp())
}

/// `ξ̇ = ω (ξ − r)`.
pub fn dcm_velocity(xi: &Vector2<f64>, zmp: &Vector2<f64>, omega: f64) -> Vector2<f64> {
    (xi - zmp) * omega
}

/// Cubic Hermite coefficients `[a₀, a₁, a₂, a₃]` matching position and
/// velocity at both ends of a `duration`-long interval.
pub fn dcm_ds_coeffs(
    xi_start: &Vector2<f64>,
    v_start: &Vector2<f64>,
    xi_end: &Vector2<f64>,
    v_end: &Vector2<f64>,
    duration: f64,
) -> [Vector2<f64>; 4] {
    let d = duration;
    let dx = xi_end - xi_start;
    let a2 = (dx * 3.0 - (v_start * 2.0 + v_end) * d) / (d * d);
    let a3 = (-dx * 2.0 + (v_start + v_end) * d) / (d * d * d);
    [*xi_start, *v_start, a2, a3]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DcmSample {
    pub position: Vector2<f64>,
    pub velocity: Vector2<f64>,
}

impl DcmSample {
    pub fn at_rest(position: Vector2<f64>) -> Self {
        Self { position, velocity: Vector2::zeros() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "lowercase")]
pub enum DcmPiece {
    /// Exponential around a fixed ZMP; `xi0` is the value at `t0`.
    Ss { t0: f64, t1: f64, zmp: Vector2<f64>, xi0: Vector2<f64>, omega: f64 },
    /// Cubic in `t − t0`.
    Ds { t0: f64, t1: f64, coeffs: [Vector2<f64>; 4] },
}

impl DcmPiece {
    pub fn t0(&self) -> f64 {
        match self {
            DcmPiece::Ss { t0, .. } | DcmPiece::Ds { t0, .. } => *t0,
        }
    }

    pub fn t1(&self) -> f64 {
        match self {
            DcmPiece::Ss { t1, .. } | DcmPiece::Ds { t1, .. } => *t1,
        }
    }

    /// Evaluate at an absolute time (not clamped to the interval).
    pub fn eval(&self, t: f64) -> DcmSample {
        match self {
            DcmPiece::Ss { t0, zmp, xi0, omega, .. } => {
                let position = zmp + (xi0 - zmp) * (omega * (t - t0)).exp();
                DcmSample { position, velocity: dcm_velocity(&position, zmp, *omega) }
            }
            DcmPiece::Ds { t0, coeffs: [a0, a1, a2, a3], .. } => {
                let s = t - t0;
                DcmSample {
                    position: a0 + a1 * s + a2 * (s * s) + a3 * (s * s * s),
                    velocity: a1 + a2 * (2.0 * s) + a3 * (3.0 * s * s),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcmTrajectory {
    pub pieces: Vec<DcmPiece>,
}

impl DcmTrajectory {
    pub fn start_time(&self) -> f64 {
        self.pieces.first().map_or(0.0, DcmPiece::t0)
    }

    pub fn end_time(&self) -> f64 {
        self.pieces.last().map_or(0.0, DcmPiece::t1)
    }

    /// Reference at `t`; before the start the first piece is held at its
    /// start, after the end the final value is held at rest.
    pub fn sample(&self, t: f64) -> DcmSample {
        let Some(first) = self.pieces.first() else {
            return DcmSample::at_rest(Vector2::zeros());
        };
        if t <= first.t0() {
            return first.eval(first.t0());
        }
        let last = self.pieces.last().expect("non-empty");
        if t >= last.t1() {
            return DcmSample::at_rest(last.eval(last.t1()).position);
        }
        let i = self.pieces.partition_point(|p| p.t1() < t);
        self.pieces[i.min(self.pieces.len() - 1)].eval(t)
    }

    /// Largest position/velocity jump across internal boundaries.
    pub fn max_boundary_mismatch(&self) -> (f64, f64) {
        self.pieces.windows(2).fold((0.0_f64, 0.0_f64), |(mp, mv), w| {
            let a = w[0].eval(w[0].t1());
            let b = w[1].eval(w[1].t0());
            (mp.max((a.position - b.position).norm()), mv.max((a.velocity - b.velocity).norm()))
        })
    }
}

/// Initial DCM of each step from a terminal value, stepping backwards
/// through `ξ₀ = r + e^{−ωT}(ξ_end − r)`.
pub fn backward_recursion(
    zmps: &[Vector2<f64>],
    durations: &[f64],
    omega: f64,
    terminal: &Vector2<f64>,
) -> Vec<Vector2<f64>> {
    let mut out = vec![Vector2::zeros(); zmps.len()];
    let mut next = *terminal;
    for k in (0..zmps.len()).rev() {
        next = zmps[k] + (next - zmps[k]) * (-omega * durations[k]).exp();
        out[k] = next;
    }
    out
}

/// Assemble the DCM reference for a footstep plan.
///
/// Each step is treated as a whole-step exponential about its support-foot
/// centre, chained backwards from `terminal`, so the last SS piece ends
/// exactly at `terminal`. The leading DS of each step is replaced by a cubic
/// bridge from the previous piece (or from `initial` for the first step) and
/// a final DS of `end_ds_duration` brings the DCM to rest at `terminal`.
pub fn plan_dcm(
    plan: &FootstepPlan,
    omega: f64,
    terminal: &Vector2<f64>,
    initial: &DcmSample,
    end_ds_duration: f64,
) -> Result<DcmTrajectory, PlanError> {
    if !(omega > 0.0) {
        return Err(PlanError::Omega(omega));
    }
    if !(end_ds_duration > 0.0) {
        return Err(PlanError::Param { name: "end_ds_duration", reason: "must be > 0".into() });
    }
    plan.check_timing()?;
    let t_start = plan.start_time;
    let mut pieces = Vec::with_capacity(2 * plan.steps.len() + 1);

    if plan.steps.is_empty() {
        let coeffs = dcm_ds_coeffs(&initial.position, &initial.velocity, terminal, &Vector2::zeros(), end_ds_duration);
        pieces.push(DcmPiece::Ds { t0: t_start, t1: t_start + end_ds_duration, coeffs });
        return Ok(DcmTrajectory { pieces });
    }

    let zmps: Vec<Vector2<f64>> = (0..plan.steps.len())
        .map(|k| plan.stance_before(k).get(plan.steps[k].foot.other()).position())
        .collect();
    let durations: Vec<f64> = plan.steps.iter().map(|s| s.step_duration).collect();
    let xi_step = backward_recursion(&zmps, &durations, omega, terminal);

    let mut prev = *initial;
    for (k, st) in plan.steps.iter().enumerate() {
        let z = zmps[k];
        let ss_t0 = st.swing_start();
        let xi_ss0 = z + (xi_step[k] - z) * (omega * st.ds_duration).exp();
        if st.ds_duration > 0.0 {
            let coeffs = dcm_ds_coeffs(
                &prev.position,
                &prev.velocity,
                &xi_ss0,
                &dcm_velocity(&xi_ss0, &z, omega),
                st.ds_duration,
            );
            pieces.push(DcmPiece::Ds { t0: st.start_time(), t1: ss_t0, coeffs });
        }
        let piece = DcmPiece::Ss { t0: ss_t0, t1: st.impact_time, zmp: z, xi0: xi_ss0, omega };
        prev = piece.eval(st.impact_time);
        pieces.push(piece);
    }
    let t_end = plan.end_time();
    let coeffs = dcm_ds_coeffs(&prev.position, &prev.velocity, terminal, &Vector2::zeros(), end_ds_duration);
    pieces.push(DcmPiece::Ds { t0: t_end, t1: t_end + end_ds_duration, coeffs });
    Ok(DcmTrajectory { pieces })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaitPhase {
    Standing,
    DoubleSupport,
    /// Single support with the named foot in the air.
    SingleSupport(Side),
}

impl GaitPhase {
    pub fn label(self) -> &'static str {
        match self {
            GaitPhase::Standing => "stand",
            GaitPhase::DoubleSupport => "ds",
            GaitPhase::SingleSupport(Side::Left) => "ss_left_swing",
            GaitPhase::SingleSupport(Side::Right) => "ss_right_swing",
        }
    }
}

/// Receding-horizon walking state: replans on every landing from the most
/// recent command and owns the current footstep plan and DCM reference.
#[derive(Debug, Clone)]
pub struct GaitScheduler {
    params: GaitParams,
    omega: f64,
    stance: Stance,
    plan: FootstepPlan,
    dcm: DcmTrajectory,
    next_swing: Option<Side>,
    replans: usize,
}

impl GaitScheduler {
    /// Start standing; the DCM reference moves from `dcm` to the stance
    /// midpoint over one end DS.
    pub fn new(stance: Stance, t0: f64, omega: f64, dcm: DcmSample, params: GaitParams) -> Result<Self, PlanError> {
        params.validate()?;
        let plan = FootstepPlan::standing(t0, stance);
        let traj = plan_dcm(&plan, omega, &stance.midpoint(), &dcm, params.end_ds_duration)?;
        Ok(Self { params, omega, stance, plan, dcm: traj, next_swing: None, replans: 0 })
    }

    pub fn params(&self) -> &GaitParams {
        &self.params
    }

    pub fn stance(&self) -> &Stance {
        &self.stance
    }

    pub fn plan(&self) -> &FootstepPlan {
        &self.plan
    }

    pub fn dcm(&self) -> &DcmTrajectory {
        &self.dcm
    }

    pub fn replans(&self) -> usize {
        self.replans
    }

    fn replan(&mut self, t0: f64, cmd: ComCommand, from_rest: bool) -> Result<(), PlanError> {
        let initial = self.dcm.sample(t0);
        let request = PlanRequest { start_time: t0, stance: self.stance, next_swing: self.next_swing, from_rest };
        let mut plan = plan_footsteps_constant(cmd, &request, &self.params)?;
        if plan.is_empty() && !from_rest {
            if let Some(step) = self.closing_step(t0) {
                plan.steps.push(step);
            }
        }
        let terminal = plan.final_stance().midpoint();
        self.dcm = plan_dcm(&plan, self.omega, &terminal, &initial, self.params.end_ds_duration)?;
        if plan.is_empty() {
            self.next_swing = None;
        }
        self.plan = plan;
        self.replans += 1;
        Ok(())
    }

    /// Step that sets the pending swing foot beside the support foot at the
    /// nominal width, so a stop issued mid-walk ends on a regular SS piece
    /// instead of a single DS bridge. `None` when the feet are already there.
    fn closing_step(&self, t0: f64) -> Option<Footstep> {
        let swing = self.next_swing?;
        let support = self.stance.get(swing.other());
        let target = support.apply(&Vector2::new(0.0, swing.sign() * self.params.nominal_width));
        let pose = Pose2::new(target.x, target.y, support.yaw);
        let current = self.stance.get(swing);
        if (current.position() - target).norm() < 1e-6 && wrap_angle(current.yaw - pose.yaw).abs() < 1e-6 {
            return None;
        }
        let step_duration = self.params.step_duration;
        Some(Footstep { foot: swing, pose, impact_time: t0 + step_duration, step_duration, ds_duration: self.params.ds_duration })
    }

    /// Advance to time `t` with the latest walking command. Returns true when
    /// a new plan was generated.
    pub fn update(&mut self, t: f64, cmd: ComCommand) -> Result<bool, PlanError> {
        let mut replanned = false;
        while let Some(first) = self.plan.steps.first().copied() {
            if t + TIME_EPS < first.impact_time {
                break;
            }
            self.stance.set(first.foot, first.pose);
            self.next_swing = Some(first.foot.other());
            self.replan(first.impact_time, cmd, false)?;
            replanned = true;
        }
        if self.plan.is_empty() && cmd.norm() >= self.params.deadband {
            self.replan(t, cmd, true)?;
            replanned = true;
        }
        Ok(replanned)
    }

    pub fn phase(&self, t: f64) -> GaitPhase {
        match self.plan.steps.first() {
            None => GaitPhase::Standing,
            Some(st) if t + TIME_EPS < st.swing_start() => GaitPhase::DoubleSupport,
            Some(st) => GaitPhase::SingleSupport(st.foot),
        }
    }

    pub fn dcm_reference(&self, t: f64) -> DcmSample {
        self.dcm.sample(t)
    }

    /// Foot pose and twist reference.
    pub fn foot_reference(&self, side: Side, t: f64) -> (Transform, Twist) {
        let rest = self.stance.get(side);
        match self.plan.steps.first() {
            Some(st) if st.foot == side => swing_trajectory(
                &rest,
                &st.pose,
                st.step_duration,
                st.ds_duration,
                self.params.apex_height,
                t - st.start_time(),
            ),
            _ => (rest.to_transform(), Twist::zero()),
        }
    }

    pub fn support_polygon(&self, t: f64, sole: &SoleGeometry) -> ConvexPolygon {
        match self.phase(t) {
            GaitPhase::SingleSupport(swing) => single_support(&self.stance.get(swing.other()), sole),
            _ => double_support(&self.stance.left, &self.stance.right, sole),
        }
    }

    /// True once no steps are pending and the DCM reference has settled.
    pub fn is_idle(&self, t: f64) -> bool {
        self.plan.is_empty() && t >= self.dcm.end_time()
    }
}
