//! Closed-loop simulator: retargeting, gait planning, DCM/ZMP control and the
//! whole-body QP around a LIPM plant plus a velocity-integrated kinematic
//! robot.
//!
//! The pendulum is the "measured" plant for the DCM and ZMP-CoM laws. The
//! kinematic robot follows the QP's `ν` exactly; the horizontal distance
//! between the two CoMs is reported as `com_gap`.

use std::collections::VecDeque;
use std::io::Write;
use std::path::PathBuf;

use nalgebra::{DVector, Vector2, Vector3};
use serde::Serialize;
use thiserror::Error;

use crate::commands::{read_command_file, CommandError, CommandStream};
use crate::config::{ConfigError, ScenarioConfig};
use crate::control::{dcm_controller, dcm_from_state, lipm_step, zmp_com_controller, GainSet, IntegralState, LipmState};
use crate::gait::{DcmSample, FootstepPlan, GaitScheduler, PlanError, Pose2, Stance};
use crate::model::{Kinematics, ModelError, RobotModel, RobotState, BASE_DOFS};
use crate::retarget::{
    head_target, neck_targets, retargeted_hand_target, robot_yaw, treadmill_to_com_command, ComCommand,
    OperatorCommand, RetargetCalibration, Side,
};
use crate::spatial::{orientation_error, rot_z, Transform};
use crate::telemetry::{TelemetryError, TelemetryRecord, TelemetryWriter};
use crate::wbqp::{
    desired_com_velocity, desired_foot_velocity, desired_hand_velocity, desired_postural_velocity,
    desired_torso_velocity, scale_to_velocity_limits, solve, QpError, TaskGains, TaskSet,
};

const SETTLE_ITERS: usize = 60;
const SETTLE_TOL: f64 = 1e-14;
/// Slack on the support-polygon membership test.
const INSIDE_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("model: {0}")]
    Model(#[from] ModelError),
    #[error("commands: {0}")]
    Commands(#[from] CommandError),
    #[error("telemetry: {0}")]
    Telemetry(#[from] TelemetryError),
    #[error("initial posture did not settle: {0}")]
    Settle(String),
    #[error("plan: {source}")]
    Plan { tick: u64, source: PlanError },
    #[error("qp: {source}")]
    Qp { tick: u64, source: QpError },
    #[error("state became non-finite")]
    NonFinite { tick: u64 },
}

impl SimError {
    /// Tick of a runtime abort. Not part of the message.
    pub fn tick(&self) -> Option<u64> {
        match self {
            SimError::Plan { tick, .. } | SimError::Qp { tick, .. } | SimError::NonFinite { tick } => Some(*tick),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct FrameIds {
    feet: [usize; 2],
    hands: [usize; 2],
    torso: usize,
    head: usize,
    neck_yaw: usize,
    neck_pitch: usize,
}

impl FrameIds {
    fn resolve(model: &RobotModel, cfg: &ScenarioConfig) -> Result<Self, ModelError> {
        let f = &cfg.model.frames;
        let joint = |name: &str| model.joint_index(name).ok_or_else(|| ModelError::UnknownFrame(name.into()));
        Ok(Self {
            feet: [model.frame_index(&f.left_foot)?, model.frame_index(&f.right_foot)?],
            hands: [model.frame_index(&f.left_hand)?, model.frame_index(&f.right_hand)?],
            torso: model.frame_index(&f.torso)?,
            head: model.frame_index(&f.head)?,
            neck_yaw: joint(&f.neck_yaw)?,
            neck_pitch: joint(&f.neck_pitch)?,
        })
    }
}

fn idx(side: Side) -> usize {
    match side {
        Side::Left => 0,
        Side::Right => 1,
    }
}

fn xy(v: &Vector3<f64>) -> Vector2<f64> {
    Vector2::new(v.x, v.y)
}

fn clamp3(v: Vector3<f64>, b: f64) -> Vector3<f64> {
    v.map(|x| x.clamp(-b, b))
}

/// One simulated robot with all controller state.
#[derive(Debug, Clone)]
pub struct Simulation {
    model: RobotModel,
    ids: FrameIds,
    dt: f64,
    omega: f64,
    gains: GainSet,
    tasks: TaskGains,
    calib: RetargetCalibration,
    saturate: bool,
    wb_bound: f64,
    state: RobotState,
    gait: GaitScheduler,
    lipm: LipmState,
    zmp_queue: VecDeque<Vector2<f64>>,
    dcm_integral: IntegralState,
    x_ref: Vector2<f64>,
    com_star: Vector3<f64>,
    com_integral: Vector3<f64>,
    foot_integral: [Vector3<f64>; 2],
    hand_integral: [Vector3<f64>; 2],
    /// Hand poses relative to the head frame held while no command has arrived.
    rest_hands: [Transform; 2],
    hand_targets: [Transform; 2],
    s_rest: DVector<f64>,
    tick: u64,
}

impl Simulation {
    /// Validates `cfg` against `model`, places the robot on the ground in its
    /// home posture and settles the CoM over the foot midpoint.
    pub fn new(cfg: &ScenarioConfig, model: RobotModel) -> Result<Self, SimError> {
        cfg.check(&model)?;
        let ids = FrameIds::resolve(&model, cfg)?;
        let gains = cfg.gain_set().map_err(|i| ConfigError::Invalid(vec![i]))?;
        let tasks = cfg.task_gains(&model).map_err(ConfigError::Invalid)?;
        let omega = cfg.omega();

        let mut state = RobotState::home(&model);
        let kin = Kinematics::compute(&model, &state)?;
        let lift = -0.5 * (kin.frame_pose(ids.feet[0]).translation.z + kin.frame_pose(ids.feet[1]).translation.z);
        state.base_pose.translation.z += lift;
        let stance = {
            let kin = Kinematics::compute(&model, &state)?;
            let p = |i: usize| {
                let mut p = Pose2::from_transform(&kin.frame_pose(ids.feet[i]));
                p.yaw = 0.0;
                p
            };
            Stance { left: p(0), right: p(1) }
        };
        settle(&model, &ids, &mut state, &stance)?;

        let kin = Kinematics::compute(&model, &state)?;
        let head = kin.frame_pose(ids.head);
        let rest_hands = [0, 1].map(|i| &head.inverse() * &kin.frame_pose(ids.hands[i]));
        let hand_targets = [0, 1].map(|i| kin.frame_pose(ids.hands[i]));
        let com = kin.com();
        let mid = stance.midpoint();
        let offset = Vector2::new(cfg.sim.initial_com_offset[0], cfg.sim.initial_com_offset[1]);
        let lipm = LipmState {
            pos: mid + offset,
            vel: Vector2::new(cfg.sim.initial_com_velocity[0], cfg.sim.initial_com_velocity[1]),
        };
        let gait = GaitScheduler::new(stance, 0.0, omega, DcmSample::at_rest(mid), cfg.gait)
            .map_err(|source| SimError::Plan { tick: 0, source })?;
        let delay = cfg.sim.zmp_delay_ticks;
        Ok(Self {
            ids,
            dt: cfg.sim.dt,
            omega,
            gains,
            tasks,
            calib: cfg.calibration(),
            saturate: cfg.sim.saturate_zmp,
            wb_bound: cfg.wbqp.integral_bound,
            s_rest: state.joint_positions.clone(),
            state,
            gait,
            lipm,
            zmp_queue: std::iter::repeat_n(mid, delay).collect(),
            dcm_integral: IntegralState::new(cfg.dcm.integral_bound),
            x_ref: mid,
            com_star: com,
            com_integral: Vector3::zeros(),
            foot_integral: [Vector3::zeros(); 2],
            hand_integral: [Vector3::zeros(); 2],
            rest_hands,
            hand_targets,
            tick: 0,
            model,
        })
    }

    pub fn model(&self) -> &RobotModel {
        &self.model
    }

    pub fn state(&self) -> &RobotState {
        &self.state
    }

    pub fn gait(&self) -> &GaitScheduler {
        &self.gait
    }

    pub fn lipm(&self) -> &LipmState {
        &self.lipm
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.dt
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Hand poses relative to the head frame in the settled posture, left
    /// then right. Used as targets until the first command arrives.
    pub fn rest_hands(&self) -> &[Transform; 2] {
        &self.rest_hands
    }

    /// World hand targets used on the last tick, left then right.
    pub fn hand_targets(&self) -> &[Transform; 2] {
        &self.hand_targets
    }

    /// Robot heading `θ_r`: yaw of the torso frame. The pelvis yaws with
    /// every swing, the torso is held on the mean foot yaw.
    pub fn heading(&self) -> Result<f64, ModelError> {
        let kin = Kinematics::compute(&self.model, &self.state)?;
        Ok(robot_yaw(&kin.frame_pose(self.ids.torso)))
    }

    pub fn plan(&self) -> &FootstepPlan {
        self.gait.plan()
    }

    pub fn com(&self) -> Result<Vector3<f64>, ModelError> {
        Ok(Kinematics::compute(&self.model, &self.state)?.com())
    }

    /// Advance one tick. `cmd` is the latest operator sample, if any.
    pub fn step(&mut self, cmd: Option<&OperatorCommand>) -> Result<TelemetryRecord, SimError> {
        let tick = self.tick;
        let t = self.time();
        let dt = self.dt;
        let plan_err = |source| SimError::Plan { tick, source };
        let qp_err = |source| SimError::Qp { tick, source };

        let kin = Kinematics::compute(&self.model, &self.state)?;
        let theta_r = robot_yaw(&kin.frame_pose(self.ids.torso));
        let com_cmd = cmd.map_or(ComCommand::default(), |c| treadmill_to_com_command(c.v_u, c.theta_u, theta_r));
        self.gait.update(t, com_cmd).map_err(plan_err)?;
        let phase = self.gait.phase(t);

        // Simplified-model layer on the pendulum plant.
        let xi = dcm_from_state(&self.lipm, self.omega);
        let reference = self.gait.dcm_reference(t);
        let zmp_ref = dcm_controller(&xi, &reference.position, &reference.velocity, &self.dcm_integral, &self.gains);
        self.zmp_queue.push_back(zmp_ref);
        let delayed = self.zmp_queue.pop_front().unwrap_or(zmp_ref);
        let polygon = self.gait.support_polygon(t, &self.model.sole);
        let zmp = if self.saturate { polygon.saturate(&delayed) } else { delayed };
        let zmp_inside = polygon.contains(&zmp, INSIDE_TOL);
        let x_ref_dot = (reference.position - self.x_ref) * self.omega;
        let com_vel_star = zmp_com_controller(&x_ref_dot, &zmp_ref, &zmp, &self.x_ref, &self.lipm.pos, &self.gains);

        // Whole-body layer.
        let n = self.model.dofs();
        let mut tasks = TaskSet::new(BASE_DOFS + n);
        let tg = &self.tasks;

        let com = kin.com();
        let com_vel = Vector3::new(com_vel_star.x, com_vel_star.y, 0.0);
        let v_com = desired_com_velocity(&com_vel, &com, &self.com_star, &self.com_integral, &tg.com_kp, &tg.com_ki);
        tasks.add_hard("com", kin.com_jacobian(), DVector::from_column_slice(v_com.as_slice())).map_err(qp_err)?;

        let mut foot_targets = [Transform::identity(); 2];
        let mut foot_yaw = [0.0; 2];
        for side in [Side::Left, Side::Right] {
            let i = idx(side);
            let (target, twist) = self.gait.foot_reference(side, t);
            let pose = kin.frame_pose(self.ids.feet[i]);
            let v = desired_foot_velocity(&pose, &target, &twist.linear, &self.foot_integral[i], &tg.foot);
            let name = format!("{}_foot", side.as_str());
            tasks.add_hard(&name, kin.frame_jacobian(self.ids.feet[i]), DVector::from_column_slice(v.to_vector().as_slice())).map_err(qp_err)?;
            foot_yaw[i] = target.rotation.yaw();
            foot_targets[i] = target;
        }

        let torso = kin.frame_pose(self.ids.torso);
        let torso_des = rot_z(foot_yaw[0] + 0.5 * crate::spatial::wrap_angle(foot_yaw[1] - foot_yaw[0]));
        let w_torso = desired_torso_velocity(&torso.rotation, &torso_des, &tg.torso_kw);
        let j_torso = kin.frame_jacobian(self.ids.torso).rows(3, 3).into_owned();
        tasks.add_soft("torso", j_torso, DVector::from_column_slice(w_torso.as_slice()), nalgebra::DMatrix::identity(3, 3)).map_err(qp_err)?;

        let head = kin.frame_pose(self.ids.head);
        let mut hand_err = [Vector3::zeros(); 2];
        let mut hand_rot = [Vector3::zeros(); 2];
        for side in [Side::Left, Side::Right] {
            let i = idx(side);
            let rel = match cmd {
                Some(c) => retargeted_hand_target(c, &self.calib, side),
                None => self.rest_hands[i],
            };
            let target = &head * &rel;
            let pose = kin.frame_pose(self.ids.hands[i]);
            let v = desired_hand_velocity(&pose, &target, &self.hand_integral[i], &tg.hand, tg.hand_convention);
            let name = format!("{}_hand", side.as_str());
            let w = nalgebra::DMatrix::from_column_slice(6, 6, tg.hand_weight.as_slice());
            tasks.add_soft(&name, kin.frame_jacobian(self.ids.hands[i]), DVector::from_column_slice(v.to_vector().as_slice()), w).map_err(qp_err)?;
            hand_err[i] = pose.translation - target.translation;
            hand_rot[i] = orientation_error(&pose.rotation, &target.rotation);
            self.hand_targets[i] = target;
        }

        let mut s_d = self.s_rest.clone();
        if let Some(c) = cmd {
            let ny = &self.model.joints()[self.ids.neck_yaw];
            let np = &self.model.joints()[self.ids.neck_pitch];
            let (yaw, pitch) = neck_targets(&head_target(&c.head, c.theta_u), (ny.lower, ny.upper), (np.lower, np.upper));
            s_d[self.ids.neck_yaw] = yaw;
            s_d[self.ids.neck_pitch] = pitch;
        }
        let s_dot = desired_postural_velocity(&self.state.joint_positions, &s_d, &tg.posture_ks);
        tasks.add_postural(s_dot, tg.posture_weight.clone()).map_err(qp_err)?;

        let sol = solve(&tasks).map_err(qp_err)?;
        let mut nu = sol.nu.clone();
        let velocity_scale = scale_to_velocity_limits(&mut nu, &self.model.velocity_limits());

        let record = TelemetryRecord {
            tick,
            time: t,
            phase,
            xi,
            xi_ref: reference.position,
            zmp_ref,
            zmp,
            zmp_inside,
            com: self.lipm.pos,
            com_ref: self.x_ref,
            com_vel_star,
            com_kin: com,
            com_gap: (xy(&com) - self.lipm.pos).norm(),
            hand_pos_err: hand_err,
            hand_rot_err: hand_rot,
            base_x: self.state.base_pose.translation.x,
            base_y: self.state.base_pose.translation.y,
            heading: theta_r,
            qp_objective: sol.objective,
            qp_residual: sol.constraint_residual.max(sol.stationarity_residual),
            velocity_scale,
            joints: self.state.joint_positions.iter().copied().collect(),
        };

        // Advance every integrator to t + dt.
        self.dcm_integral = self.dcm_integral.accumulate(&(xi - reference.position), dt);
        self.lipm = lipm_step(&self.lipm, &zmp, self.omega, dt);
        self.x_ref = reference.position + (self.x_ref - reference.position) * (-self.omega * dt).exp();
        self.com_star = Vector3::new(self.lipm.pos.x, self.lipm.pos.y, self.com_star.z);
        let b = self.wb_bound;
        self.com_integral = clamp3(self.com_integral + (com - self.com_star) * dt, b);
        for i in 0..2 {
            let foot = kin.frame_pose(self.ids.feet[i]).translation;
            self.foot_integral[i] = clamp3(self.foot_integral[i] + (foot - foot_targets[i].translation) * dt, b);
            self.hand_integral[i] = clamp3(self.hand_integral[i] + hand_err[i] * dt, b);
        }
        self.state.integrate(&nu, dt);
        self.tick += 1;
        if !self.state.is_finite() || !self.lipm.is_finite() {
            return Err(SimError::NonFinite { tick });
        }
        Ok(record)
    }
}

/// Newton iterations on the hard tasks: CoM over the foot midpoint at its
/// current height, feet flat on their stance poses, torso upright. Everything
/// else is held by zero-velocity soft tasks.
fn settle(model: &RobotModel, ids: &FrameIds, state: &mut RobotState, stance: &Stance) -> Result<(), SimError> {
    let mid = stance.midpoint();
    let n = model.dofs();
    let mut err = f64::INFINITY;
    for _ in 0..SETTLE_ITERS {
        let kin = Kinematics::compute(model, state)?;
        let com = kin.com();
        let mut tasks = TaskSet::new(BASE_DOFS + n);
        let dc = Vector3::new(mid.x - com.x, mid.y - com.y, 0.0);
        err = dc.norm();
        let settle_err = |e: QpError| SimError::Settle(e.to_string());
        tasks.add_hard("com", kin.com_jacobian(), DVector::from_column_slice(dc.as_slice())).map_err(settle_err)?;
        for (i, side) in [Side::Left, Side::Right].into_iter().enumerate() {
            let target = stance.get(side).to_transform();
            let pose = kin.frame_pose(ids.feet[i]);
            let lin = target.translation - pose.translation;
            let ang = -orientation_error(&pose.rotation, &target.rotation);
            err = err.max(lin.norm()).max(ang.norm());
            let v = DVector::from_iterator(6, lin.iter().chain(ang.iter()).copied());
            tasks.add_hard(side.as_str(), kin.frame_jacobian(ids.feet[i]), v).map_err(settle_err)?;
        }
        let torso = kin.frame_pose(ids.torso);
        let w = -orientation_error(&torso.rotation, &crate::spatial::Rotation3::identity());
        err = err.max(w.norm());
        let j_torso = kin.frame_jacobian(ids.torso).rows(3, 3).into_owned();
        tasks.add_hard("torso", j_torso, DVector::from_column_slice(w.as_slice())).map_err(settle_err)?;
        for &h in &ids.hands {
            tasks
                .add_soft("hand", kin.frame_jacobian(h), DVector::zeros(6), nalgebra::DMatrix::identity(6, 6))
                .map_err(settle_err)?;
        }
        tasks.add_postural(DVector::zeros(n), nalgebra::DMatrix::identity(n, n)).map_err(settle_err)?;
        if err < SETTLE_TOL {
            return Ok(());
        }
        let sol = solve(&tasks).map_err(settle_err)?;
        state.integrate(&sol.nu, 1.0);
    }
    state.velocity.fill(0.0);
    if err < 1e-12 {
        Ok(())
    } else {
        Err(SimError::Settle(format!("residual {err:.3e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Aborted { tick: u64, reason: String },
}

/// Exit summary of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    #[serde(flatten)]
    pub status: RunStatus,
    pub ticks: u64,
    pub dt: f64,
    /// Horizontal displacement of the kinematic CoM, m.
    pub distance: f64,
    /// Forward (x) displacement of the kinematic CoM, m.
    pub distance_x: f64,
    pub dcm_rms: f64,
    pub max_qp_residual: f64,
    pub zmp_always_inside: bool,
    /// Mean hand position error norm over the summary window, both hands.
    pub hand_error: f64,
    /// RMS of the tick-to-tick change of arm joint velocities over the
    /// summary window, rad/s.
    pub arm_oscillation: f64,
    pub final_yaw: f64,
    pub replans: usize,
}

impl RunSummary {
    pub fn is_ok(&self) -> bool {
        self.status == RunStatus::Ok
    }
}

impl std::fmt::Display for RunSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.status {
            RunStatus::Ok => writeln!(f, "status=ok")?,
            RunStatus::Aborted { tick, reason } => writeln!(f, "status=aborted tick={tick} reason={reason}")?,
        }
        writeln!(f, "ticks={} dt={}", self.ticks, self.dt)?;
        writeln!(f, "distance={:.4} m (x {:.4} m)", self.distance, self.distance_x)?;
        writeln!(f, "dcm_rms={:.3e} m", self.dcm_rms)?;
        writeln!(f, "max_qp_residual={:.3e}", self.max_qp_residual)?;
        writeln!(f, "zmp_always_inside={}", self.zmp_always_inside)?;
        writeln!(f, "hand_error={:.4e} m", self.hand_error)?;
        writeln!(f, "arm_oscillation={:.4e} rad/s", self.arm_oscillation)?;
        write!(f, "final_yaw={:.4} rad replans={}", self.final_yaw, self.replans)
    }
}

/// Accumulates the exit summary one telemetry record at a time.
#[derive(Debug, Clone)]
pub struct SummaryBuilder {
    arms: Vec<usize>,
    dt: f64,
    saturate: bool,
    window_start: u64,
    start: Vector3<f64>,
    ticks: u64,
    dcm_sq: f64,
    max_res: f64,
    inside: bool,
    hand_sum: f64,
    hand_n: u64,
    prev_q: Option<DVector<f64>>,
    prev_v: Option<DVector<f64>>,
    osc_sum: f64,
    osc_n: u64,
}

impl SummaryBuilder {
    pub fn new(cfg: &ScenarioConfig, sim: &Simulation) -> Result<Self, ModelError> {
        let ticks = (cfg.sim.duration / cfg.sim.dt).round() as u64;
        let window = ((cfg.sim.summary_window / cfg.sim.dt).round() as u64).max(1);
        Ok(Self {
            arms: cfg.arm_joints(sim.model()),
            dt: cfg.sim.dt,
            saturate: cfg.sim.saturate_zmp,
            window_start: ticks.saturating_sub(window),
            start: sim.com()?,
            ticks: 0,
            dcm_sq: 0.0,
            max_res: 0.0,
            inside: true,
            hand_sum: 0.0,
            hand_n: 0,
            prev_q: None,
            prev_v: None,
            osc_sum: 0.0,
            osc_n: 0,
        })
    }

    pub fn observe(&mut self, rec: &TelemetryRecord) {
        self.ticks += 1;
        self.dcm_sq += (rec.xi - rec.xi_ref).norm_squared();
        self.max_res = self.max_res.max(rec.qp_residual);
        self.inside &= rec.zmp_inside || !self.saturate;
        let in_window = rec.tick >= self.window_start;
        if in_window {
            self.hand_sum += rec.hand_pos_err[0].norm() + rec.hand_pos_err[1].norm();
            self.hand_n += 2;
        }
        let q = DVector::from_iterator(self.arms.len(), self.arms.iter().map(|&j| rec.joints[j]));
        if let Some(pq) = &self.prev_q {
            let v = (&q - pq) / self.dt;
            if let (Some(pv), true) = (&self.prev_v, in_window) {
                self.osc_sum += (&v - pv).norm_squared();
                self.osc_n += self.arms.len() as u64;
            }
            self.prev_v = Some(v);
        }
        self.prev_q = Some(q);
    }

    pub fn finish(self, sim: &Simulation, status: RunStatus) -> Result<RunSummary, ModelError> {
        let end = sim.com()?;
        let mean = |s: f64, n: u64| if n == 0 { 0.0 } else { s / n as f64 };
        Ok(RunSummary {
            status,
            ticks: self.ticks,
            dt: self.dt,
            distance: (xy(&end) - xy(&self.start)).norm(),
            distance_x: end.x - self.start.x,
            dcm_rms: mean(self.dcm_sq, self.ticks).sqrt(),
            max_qp_residual: self.max_res,
            zmp_always_inside: self.inside,
            hand_error: mean(self.hand_sum, self.hand_n),
            arm_oscillation: mean(self.osc_sum, self.osc_n).sqrt(),
            final_yaw: sim.heading()?,
            replans: sim.gait().replans(),
        })
    }
}

/// Runs the loop over a recorded stream, streaming telemetry to `out`.
/// A runtime abort ends the run early and is reported in the summary.
pub fn run<W: Write>(
    cfg: &ScenarioConfig,
    model: RobotModel,
    stream: &CommandStream,
    out: Option<W>,
) -> Result<RunSummary, SimError> {
    let joint_names: Vec<String> = model.joints().iter().map(|j| j.name.clone()).collect();
    let mut sim = Simulation::new(cfg, model)?;
    let mut writer = out.map(|w| TelemetryWriter::new(w, &joint_names)).transpose()?;
    let mut summary = SummaryBuilder::new(cfg, &sim)?;
    let ticks = (cfg.sim.duration / cfg.sim.dt).round() as u64;
    let mut status = RunStatus::Ok;
    for _ in 0..ticks {
        let rec = match sim.step(stream.sample(sim.time())) {
            Ok(r) => r,
            Err(e) => match e.tick() {
                Some(tick) => {
                    status = RunStatus::Aborted { tick, reason: e.to_string() };
                    break;
                }
                None => return Err(e),
            },
        };
        if let Some(w) = writer.as_mut() {
            w.write(&rec)?;
        }
        summary.observe(&rec);
    }
    if let Some(w) = writer {
        w.finish()?;
    }
    Ok(summary.finish(&sim, status)?)
}

/// Loads the model and command file named by `cfg`, runs, and writes
/// telemetry to `out` (or the configured path) when one is given.
pub fn run_scenario(cfg: &ScenarioConfig, out: Option<PathBuf>) -> Result<RunSummary, SimError> {
    let model = cfg.load_model()?;
    let stream = match cfg.command_path() {
        Some(p) => read_command_file(&p)?,
        None => CommandStream::default(),
    };
    let out = out.or_else(|| cfg.output.telemetry.as_ref().map(PathBuf::from));
    match out {
        Some(path) => {
            let file = std::fs::File::create(&path)
                .map_err(|source| SimError::Telemetry(TelemetryError::Io(std::io::Error::new(source.kind(), format!("{}: {source}", path.display())))))?;
            run(cfg, model, &stream, Some(std::io::BufWriter::new(file)))
        }
        None => run::<std::io::Sink>(cfg, model, &stream, None),
    }
}
