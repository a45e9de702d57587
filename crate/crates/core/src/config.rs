//! Scenario configuration: TOML file, dotted `key=value` overrides, and
//! validation that reports every problem with its config path.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Matrix6, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bundled;
use crate::control::{omega_from_height, GainSet, GRAVITY, INTEGRAL_BOUND};
use crate::gait::{GaitParams, PlanError};
use crate::model::{load_model, ModelError, RobotModel};
use crate::retarget::RetargetCalibration;
use crate::spatial::{Rotation3, Transform};
use crate::wbqp::{is_spd, HandErrorConvention, PoseGains, TaskGains};

/// Model path that selects the built-in desk biped.
pub const BUNDLED_MODEL: &str = "bundled:desk_biped";

/// One validation failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfigIssue {
    /// Dotted path into the config, e.g. `dcm.k_zmp`.
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn issue(path: impl Into<String>, message: impl Into<String>) -> ConfigIssue {
    ConfigIssue { path: path.into(), message: message.into() }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{origin}: {message}")]
    Parse { origin: String, message: String },
    #[error("override `{key}`: {message}")]
    Override { key: String, message: String },
    #[error("invalid configuration:\n{}", .0.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<ConfigIssue>),
    #[error("model: {0}")]
    Model(#[from] ModelError),
}

/// A matrix given as a scalar (times identity), a diagonal, or rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Scalar(f64),
    Diagonal(Vec<f64>),
    Full(Vec<Vec<f64>>),
}

impl MatrixSpec {
    pub fn to_matrix(&self, n: usize) -> Result<DMatrix<f64>, String> {
        match self {
            MatrixSpec::Scalar(v) => Ok(DMatrix::identity(n, n) * *v),
            MatrixSpec::Diagonal(d) if d.len() == n => Ok(DMatrix::from_diagonal(&DVector::from_column_slice(d))),
            MatrixSpec::Diagonal(d) => Err(format!("diagonal has {} entries, expected {n}", d.len())),
            MatrixSpec::Full(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(format!("expected a {n}x{n} matrix"));
                }
                Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
            }
        }
    }
}

impl From<f64> for MatrixSpec {
    fn from(v: f64) -> Self {
        MatrixSpec::Scalar(v)
    }
}

/// Pose given as translation plus roll/pitch/yaw.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoseSpec {
    pub xyz: [f64; 3],
    pub rpy: [f64; 3],
}

impl PoseSpec {
    pub fn to_transform(&self) -> Transform {
        Transform::new(
            Rotation3::from_rpy(self.rpy[0], self.rpy[1], self.rpy[2]),
            Vector3::from_column_slice(&self.xyz),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrameNames {
    pub left_foot: String,
    pub right_foot: String,
    pub left_hand: String,
    pub right_hand: String,
    pub torso: String,
    pub head: String,
    pub neck_yaw: String,
    pub neck_pitch: String,
}

impl Default for FrameNames {
    fn default() -> Self {
        Self {
            left_foot: "l_foot".into(),
            right_foot: "r_foot".into(),
            left_hand: "l_hand".into(),
            right_hand: "r_hand".into(),
            torso: "torso".into(),
            head: "head".into(),
            neck_yaw: "neck_yaw".into(),
            neck_pitch: "neck_pitch".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// `bundled:desk_biped` or a path to a model TOML.
    pub path: String,
    pub frames: FrameNames,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { path: BUNDLED_MODEL.into(), frames: FrameNames::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub dt: f64,
    pub duration: f64,
    /// Pendulum height used for `ω = sqrt(g / z)`.
    pub com_height: f64,
    pub gravity: f64,
    /// Ticks between commanding a ZMP and the plant applying it.
    pub zmp_delay_ticks: usize,
    pub saturate_zmp: bool,
    /// Initial LIPM offset from the stance midpoint, m.
    pub initial_com_offset: [f64; 2],
    pub initial_com_velocity: [f64; 2],
    /// Window at the end of the run used for steady-state summaries, s.
    pub summary_window: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            duration: 10.0,
            com_height: 0.53,
            gravity: GRAVITY,
            zmp_delay_ticks: 0,
            saturate_zmp: true,
            initial_com_offset: [0.0, 0.0],
            initial_com_velocity: [0.0, 0.0],
            summary_window: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandSource {
    #[default]
    File,
    Live,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CommandConfig {
    pub source: CommandSource,
    /// Command CSV, relative to the config file.
    pub path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Telemetry CSV, relative to the working directory.
    pub telemetry: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DcmConfig {
    pub k_p: MatrixSpec,
    pub k_i: MatrixSpec,
    pub k_zmp: MatrixSpec,
    pub k_com: MatrixSpec,
    pub integral_bound: f64,
}

impl Default for DcmConfig {
    fn default() -> Self {
        Self {
            k_p: 3.0.into(),
            k_i: 0.5.into(),
            k_zmp: 1.0.into(),
            k_com: 6.0.into(),
            integral_bound: INTEGRAL_BOUND,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PostureWeights {
    pub default: f64,
    /// Joints on a hand chain that are not on the torso chain.
    pub arms: f64,
    /// Per-joint overrides by name.
    pub joints: BTreeMap<String, f64>,
}

impl Default for PostureWeights {
    fn default() -> Self {
        Self { default: 1.0, arms: 0.25, joints: BTreeMap::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WbqpConfig {
    pub torso_kw: MatrixSpec,
    pub hand_kp: MatrixSpec,
    pub hand_ki: MatrixSpec,
    pub hand_kw: MatrixSpec,
    pub hand_weight: MatrixSpec,
    pub foot_kp: MatrixSpec,
    pub foot_ki: MatrixSpec,
    pub foot_kw: MatrixSpec,
    pub com_kp: MatrixSpec,
    pub com_ki: MatrixSpec,
    pub posture_ks: MatrixSpec,
    pub posture_weight: PostureWeights,
    pub hand_convention: HandErrorConvention,
    /// Anti-windup bound of the hand, foot and CoM integrals.
    pub integral_bound: f64,
}

impl Default for WbqpConfig {
    fn default() -> Self {
        Self {
            torso_kw: 10.0.into(),
            hand_kp: 8.0.into(),
            hand_ki: 0.2.into(),
            hand_kw: 8.0.into(),
            hand_weight: MatrixSpec::Diagonal(vec![10.0, 10.0, 10.0, 1.0, 1.0, 1.0]),
            foot_kp: 30.0.into(),
            foot_ki: 0.5.into(),
            foot_kw: 30.0.into(),
            com_kp: 20.0.into(),
            com_ki: 0.5.into(),
            posture_ks: 2.0.into(),
            posture_weight: PostureWeights::default(),
            hand_convention: HandErrorConvention::Corrective,
            integral_bound: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetargetConfig {
    pub scale_ratio: f64,
    pub head_to_retarget: PoseSpec,
    pub left_hand_offset: PoseSpec,
    pub right_hand_offset: PoseSpec,
}

impl Default for RetargetConfig {
    fn default() -> Self {
        Self {
            scale_ratio: 1.0,
            head_to_retarget: PoseSpec::default(),
            left_hand_offset: PoseSpec::default(),
            right_hand_offset: PoseSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BridgeConfig {
    pub port: u16,
    pub state_rate_hz: f64,
    /// Seconds a vanished operator's last command is held.
    pub grace_period: f64,
    /// Time constant of the `v_u` decay after the grace period, s.
    pub decay_time_constant: f64,
    /// Simulated seconds per wall-clock second; 0 runs unthrottled.
    pub realtime_factor: f64,
    /// Depth of the outbound state queue.
    pub state_queue: usize,
}

impl Default for BridgeConfig {
    fn default() -> Self {
        Self {
            port: 8765,
            state_rate_hz: 30.0,
            grace_period: 0.5,
            decay_time_constant: 0.5,
            realtime_factor: 1.0,
            state_queue: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub model: ModelConfig,
    pub sim: SimConfig,
    pub commands: CommandConfig,
    pub output: OutputConfig,
    pub gait: GaitParams,
    pub dcm: DcmConfig,
    pub wbqp: WbqpConfig,
    pub retarget: RetargetConfig,
    pub bridge: BridgeConfig,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Split `a.b.c=value` into its key and raw value.
pub fn parse_override(s: &str) -> Result<(String, String), ConfigError> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(ConfigError::Override { key: s.into(), message: "expected key=value".into() }),
    }
}

fn override_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

/// Set a dotted key inside a TOML table, creating intermediate tables.
pub fn apply_override(root: &mut toml::Table, key: &str, raw: &str) -> Result<(), ConfigError> {
    let parts: Vec<&str> = key.split('.').collect();
    let (last, path) = parts.split_last().expect("split yields at least one part");
    let mut table = root;
    for p in path {
        let entry = table.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry.as_table_mut().ok_or_else(|| ConfigError::Override {
            key: key.into(),
            message: format!("`{p}` is not a table"),
        })?;
    }
    table.insert(last.to_string(), override_value(raw));
    Ok(())
}

impl ScenarioConfig {
    /// Parse TOML text, apply overrides, and deserialize. Does not validate.
    pub fn from_toml_str(text: &str, origin: &str, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| ConfigError::Parse { origin: origin.into(), message: e.to_string() })?;
        for (k, v) in overrides {
            apply_override(&mut table, k, v)?;
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse { origin: origin.into(), message: e.to_string() })
    }

    /// Read a config file; relative paths inside resolve against its folder.
    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let mut cfg = Self::from_toml_str(&text, &path.display().to_string(), overrides)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// Defaults plus overrides, for runs without a file.
    pub fn with_overrides(overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        Self::from_toml_str("", "<defaults>", overrides)
    }

    pub fn resolve(&self, p: &str) -> PathBuf {
        let path = Path::new(p);
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn command_path(&self) -> Option<PathBuf> {
        self.commands.path.as_deref().map(|p| self.resolve(p))
    }

    pub fn load_model(&self) -> Result<RobotModel, ConfigError> {
        if self.model.path == BUNDLED_MODEL {
            return Ok(bundled::desk_biped());
        }
        let path = self.resolve(&self.model.path);
        let text = std::fs::read_to_string(&path).map_err(|source| ConfigError::Io { path: path.clone(), source })?;
        Ok(load_model(&text)?)
    }

    pub fn omega(&self) -> f64 {
        omega_from_height(self.sim.com_height, self.sim.gravity)
    }

    pub fn gain_set(&self) -> Result<GainSet, ConfigIssue> {
        let m2 = |name: &str, spec: &MatrixSpec| -> Result<Matrix2<f64>, ConfigIssue> {
            let m = spec.to_matrix(2).map_err(|e| issue(format!("dcm.{name}"), e))?;
            Ok(Matrix2::from_column_slice(m.as_slice()))
        };
        let kp = m2("k_p", &self.dcm.k_p)?;
        let ki = m2("k_i", &self.dcm.k_i)?;
        let kz = m2("k_zmp", &self.dcm.k_zmp)?;
        let kc = m2("k_com", &self.dcm.k_com)?;
        GainSet::new(kp, ki, kz, kc, self.omega()).map_err(|e| {
            let path = match &e {
                crate::control::GainError::Bound { name, .. } | crate::control::GainError::NonFinite(name) => {
                    format!("dcm.{name}")
                }
                crate::control::GainError::Omega(_) => "sim.com_height".into(),
            };
            issue(path, e.to_string())
        })
    }

    /// Joints on a hand chain that are not also on the torso chain.
    pub fn arm_joints(&self, model: &RobotModel) -> Vec<usize> {
        let chain_of = |frame: &str| -> Vec<usize> {
            model
                .frame_index(frame)
                .map(|f| model.chain(model.frames()[f].link).to_vec())
                .unwrap_or_default()
        };
        let torso = chain_of(&self.model.frames.torso);
        let mut arms: Vec<usize> = [&self.model.frames.left_hand, &self.model.frames.right_hand]
            .iter()
            .flat_map(|f| chain_of(f))
            .filter(|j| !torso.contains(j))
            .collect();
        arms.sort_unstable();
        arms.dedup();
        arms
    }

    pub fn posture_weight(&self, model: &RobotModel) -> Result<DMatrix<f64>, ConfigIssue> {
        let w = &self.wbqp.posture_weight;
        let arms = self.arm_joints(model);
        let mut diag = DVector::from_element(model.dofs(), w.default);
        for &j in &arms {
            diag[j] = w.arms;
        }
        for (name, v) in &w.joints {
            let j = model
                .joint_index(name)
                .ok_or_else(|| issue(format!("wbqp.posture_weight.joints.{name}"), "unknown joint"))?;
            diag[j] = *v;
        }
        Ok(DMatrix::from_diagonal(&diag))
    }

    pub fn task_gains(&self, model: &RobotModel) -> Result<TaskGains, Vec<ConfigIssue>> {
        let q = &self.wbqp;
        let mut issues = Vec::new();
        let mut m3 = |name: &str, spec: &MatrixSpec| -> Matrix3<f64> {
            match spec.to_matrix(3) {
                Ok(m) => {
                    if !is_spd(&m) {
                        issues.push(issue(format!("wbqp.{name}"), "must be symmetric positive definite"));
                    }
                    Matrix3::from_column_slice(m.as_slice())
                }
                Err(e) => {
                    issues.push(issue(format!("wbqp.{name}"), e));
                    Matrix3::identity()
                }
            }
        };
        let torso_kw = m3("torso_kw", &q.torso_kw);
        let hand = PoseGains { kp: m3("hand_kp", &q.hand_kp), ki: m3("hand_ki", &q.hand_ki), kw: m3("hand_kw", &q.hand_kw) };
        let foot = PoseGains { kp: m3("foot_kp", &q.foot_kp), ki: m3("foot_ki", &q.foot_ki), kw: m3("foot_kw", &q.foot_kw) };
        let com_kp = m3("com_kp", &q.com_kp);
        let com_ki = m3("com_ki", &q.com_ki);
        let mut hand_weight = Matrix6::identity();
        match q.hand_weight.to_matrix(6) {
            Ok(m) if is_spd(&m) => hand_weight = Matrix6::from_column_slice(m.as_slice()),
            Ok(_) => issues.push(issue("wbqp.hand_weight", "must be symmetric positive definite")),
            Err(e) => issues.push(issue("wbqp.hand_weight", e)),
        }
        let n = model.dofs();
        let posture_ks = match q.posture_ks.to_matrix(n) {
            Ok(m) => {
                if !is_spd(&m) {
                    issues.push(issue("wbqp.posture_ks", "must be symmetric positive definite"));
                }
                m
            }
            Err(e) => {
                issues.push(issue("wbqp.posture_ks", e));
                DMatrix::identity(n, n)
            }
        };
        let posture_weight = match self.posture_weight(model) {
            Ok(m) => {
                if !is_spd(&m) {
                    issues.push(issue("wbqp.posture_weight", "all weights must be positive"));
                }
                m
            }
            Err(e) => {
                issues.push(e);
                DMatrix::identity(n, n)
            }
        };
        if !(q.integral_bound >= 0.0) {
            issues.push(issue("wbqp.integral_bound", "must be >= 0"));
        }
        if issues.is_empty() {
            Ok(TaskGains {
                torso_kw,
                hand,
                hand_weight,
                foot,
                com_kp,
                com_ki,
                posture_ks,
                posture_weight,
                hand_convention: q.hand_convention,
            })
        } else {
            Err(issues)
        }
    }

    pub fn calibration(&self) -> RetargetCalibration {
        RetargetCalibration {
            scale_ratio: self.retarget.scale_ratio,
            head_to_retarget: self.retarget.head_to_retarget.to_transform(),
            left_hand_offset: self.retarget.left_hand_offset.to_transform(),
            right_hand_offset: self.retarget.right_hand_offset.to_transform(),
        }
    }

    /// Every check that does not need a simulation run.
    pub fn validate(&self, model: &RobotModel) -> Vec<ConfigIssue> {
        let mut out = Vec::new();
        let s = &self.sim;
        if !(s.dt.is_finite() && s.dt > 0.0) {
            out.push(issue("sim.dt", format!("must be > 0, got {}", s.dt)));
        }
        if !(s.duration.is_finite() && s.duration >= 0.0) {
            out.push(issue("sim.duration", format!("must be >= 0, got {}", s.duration)));
        }
        if !(s.com_height.is_finite() && s.com_height > 0.0) {
            out.push(issue("sim.com_height", format!("must be > 0, got {}", s.com_height)));
        }
        if !(s.gravity.is_finite() && s.gravity > 0.0) {
            out.push(issue("sim.gravity", format!("must be > 0, got {}", s.gravity)));
        }
        if s.zmp_delay_ticks > 5 {
            out.push(issue("sim.zmp_delay_ticks", "supported range is 0..=5"));
        }
        if !(s.summary_window >= 0.0) {
            out.push(issue("sim.summary_window", "must be >= 0"));
        }
        if let Err(e) = self.gait.validate() {
            let path = match &e {
                PlanError::Param { name, .. } => format!("gait.{name}"),
                _ => "gait".into(),
            };
            out.push(issue(path, e.to_string()));
        }
        if s.com_height > 0.0 && s.gravity > 0.0 {
            if let Err(e) = self.gain_set() {
                out.push(e);
            }
        }
        if !(self.dcm.integral_bound >= 0.0) {
            out.push(issue("dcm.integral_bound", "must be >= 0"));
        }
        if let Err(mut e) = self.task_gains(model) {
            out.append(&mut e);
        }
        if let Err(e) = self.calibration().validate() {
            out.push(issue("retarget", e.to_string()));
        }
        let f = &self.model.frames;
        for (key, name) in [
            ("left_foot", &f.left_foot),
            ("right_foot", &f.right_foot),
            ("left_hand", &f.left_hand),
            ("right_hand", &f.right_hand),
            ("torso", &f.torso),
            ("head", &f.head),
        ] {
            if model.frame_index(name).is_err() {
                out.push(issue(format!("model.frames.{key}"), format!("unknown frame `{name}`")));
            }
        }
        for (key, name) in [("neck_yaw", &f.neck_yaw), ("neck_pitch", &f.neck_pitch)] {
            if model.joint_index(name).is_none() {
                out.push(issue(format!("model.frames.{key}"), format!("unknown joint `{name}`")));
            }
        }
        let b = &self.bridge;
        if !(b.state_rate_hz > 0.0) {
            out.push(issue("bridge.state_rate_hz", "must be > 0"));
        }
        if !(b.grace_period >= 0.0) {
            out.push(issue("bridge.grace_period", "must be >= 0"));
        }
        if !(b.decay_time_constant > 0.0) {
            out.push(issue("bridge.decay_time_constant", "must be > 0"));
        }
        if !(b.realtime_factor >= 0.0) {
            out.push(issue("bridge.realtime_factor", "must be >= 0"));
        }
        if b.state_queue == 0 {
            out.push(issue("bridge.state_queue", "must be >= 1"));
        }
        out
    }

    /// Validate and fail with all issues at once.
    pub fn check(&self, model: &RobotModel) -> Result<(), ConfigError> {
        let issues = self.validate(model);
        if issues.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(issues))
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}
