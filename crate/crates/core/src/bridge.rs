//! Live teleoperation plumbing without the network: the JSON wire protocol,
//! the latest-command mailbox, bounded per-client state queues and the
//! sim-side session that turns mailbox snapshots into operator commands.
//!
//! Frames are JSON objects `{"kind": ..., "seq": n, "payload": {...}}`.
//! `seq` increases strictly per direction and connection. Both sides open
//! with `hello`.

use std::io::Write;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use crossbeam_queue::ArrayQueue;
use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ScenarioConfig;
use crate::gait::Pose2;
use crate::model::RobotModel;
use crate::retarget::{OperatorCommand, Side};
use crate::sim::{RunStatus, RunSummary, SimError, Simulation, SummaryBuilder};
use crate::spatial::Transform;
use crate::telemetry::{TelemetryRecord, TelemetryWriter};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("malformed frame: {0}")]
    Malformed(String),
    #[error("protocol version {got} not supported (server speaks {expected})")]
    Version { expected: u32, got: u32 },
    #[error("seq {got} does not increase (last {last})")]
    Sequence { last: u64, got: u64 },
    #[error("first frame must be `hello`, got `{0}`")]
    NoHello(String),
    #[error("command rejected: {0}")]
    Command(String),
}

impl ProtocolError {
    /// Short machine-readable code for `error` frames.
    pub fn code(&self) -> &'static str {
        match self {
            ProtocolError::Malformed(_) => "malformed",
            ProtocolError::Version { .. } => "version",
            ProtocolError::Sequence { .. } => "sequence",
            ProtocolError::NoHello(_) => "handshake",
            ProtocolError::Command(_) => "command",
        }
    }

    /// Errors after which the session cannot continue.
    pub fn is_fatal(&self) -> bool {
        matches!(self, ProtocolError::Version { .. } | ProtocolError::NoHello(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Server,
    /// Sends commands. At most one per server.
    Operator,
    /// Receives state only.
    Observer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub name: String,
    pub dofs: usize,
    pub joints: Vec<String>,
    pub dt: f64,
}

impl ModelSummary {
    pub fn new(model: &RobotModel, dt: f64) -> Self {
        Self {
            name: model.name.clone(),
            dofs: model.dofs(),
            joints: model.joints().iter().map(|j| j.name.clone()).collect(),
            dt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hello {
    pub protocol: u32,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FootstepView {
    pub foot: Side,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub impact_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FootView {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl From<Pose2> for FootView {
    fn from(p: Pose2) -> Self {
        Self { x: p.x, y: p.y, yaw: p.yaw }
    }
}

/// State snapshot sent to clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatePayload {
    pub tick: u64,
    pub t: f64,
    pub phase: String,
    pub xi: Vector2<f64>,
    pub xi_ref: Vector2<f64>,
    pub zmp: Vector2<f64>,
    pub zmp_ref: Vector2<f64>,
    pub com: Vector2<f64>,
    pub heading: f64,
    pub base: Vector2<f64>,
    /// Left then right.
    pub hand_pos_err: [[f64; 3]; 2],
    pub hand_rot_err: [[f64; 3]; 2],
    pub hand_targets: [Transform; 2],
    pub stance: [FootView; 2],
    pub footsteps: Vec<FootstepView>,
    pub qp_residual: f64,
    pub operator_connected: bool,
}

impl StatePayload {
    pub fn new(rec: &TelemetryRecord, sim: &Simulation, operator_connected: bool) -> Self {
        let stance = sim.gait().stance();
        Self {
            tick: rec.tick,
            t: rec.time,
            phase: rec.phase.label().into(),
            xi: rec.xi,
            xi_ref: rec.xi_ref,
            zmp: rec.zmp,
            zmp_ref: rec.zmp_ref,
            com: rec.com,
            heading: rec.heading,
            base: Vector2::new(rec.base_x, rec.base_y),
            hand_pos_err: rec.hand_pos_err.map(|v| [v.x, v.y, v.z]),
            hand_rot_err: rec.hand_rot_err.map(|v| [v.x, v.y, v.z]),
            hand_targets: *sim.hand_targets(),
            stance: [stance.left.into(), stance.right.into()],
            footsteps: sim
                .plan()
                .steps
                .iter()
                .map(|s| FootstepView { foot: s.foot, x: s.pose.x, y: s.pose.y, yaw: s.pose.yaw, impact_time: s.impact_time })
                .collect(),
            qp_residual: rec.qp_residual,
            operator_connected,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorPayload {
    pub code: String,
    pub message: String,
}

impl From<&ProtocolError> for ErrorPayload {
    fn from(e: &ProtocolError) -> Self {
        Self { code: e.code().into(), message: e.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Body {
    Hello(Hello),
    State(Box<StatePayload>),
    Command(OperatorCommand),
    Error(ErrorPayload),
}

impl Body {
    pub fn kind(&self) -> &'static str {
        match self {
            Body::Hello(_) => "hello",
            Body::State(_) => "state",
            Body::Command(_) => "command",
            Body::Error(_) => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeMessage {
    pub seq: u64,
    #[serde(flatten)]
    pub body: Body,
}

impl BridgeMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("bridge messages serialize")
    }

    /// Unknown kinds and malformed payloads are rejected. Commands are
    /// validated.
    pub fn parse(text: &str) -> Result<Self, ProtocolError> {
        let msg: BridgeMessage = serde_json::from_str(text).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
        if let Body::Command(c) = &msg.body {
            c.validate().map_err(|e| ProtocolError::Command(e.to_string()))?;
        }
        Ok(msg)
    }
}

/// Assigns outbound sequence numbers.
#[derive(Debug, Default)]
pub struct Outbox {
    next: u64,
}

impl Outbox {
    pub fn frame(&mut self, body: Body) -> BridgeMessage {
        let seq = self.next;
        self.next += 1;
        BridgeMessage { seq, body }
    }
}

/// Checks one inbound direction: `hello` first, matching protocol version,
/// strictly increasing `seq`.
#[derive(Debug, Default)]
pub struct Inbox {
    last: Option<u64>,
    hello: Option<Hello>,
}

impl Inbox {
    pub fn hello(&self) -> Option<&Hello> {
        self.hello.as_ref()
    }

    pub fn accept(&mut self, text: &str) -> Result<BridgeMessage, ProtocolError> {
        let msg = BridgeMessage::parse(text)?;
        if let Some(last) = self.last {
            if msg.seq <= last {
                return Err(ProtocolError::Sequence { last, got: msg.seq });
            }
        }
        match (&self.hello, &msg.body) {
            (None, Body::Hello(h)) => {
                if h.protocol != PROTOCOL_VERSION {
                    return Err(ProtocolError::Version { expected: PROTOCOL_VERSION, got: h.protocol });
                }
                self.hello = Some(h.clone());
            }
            (None, other) => return Err(ProtocolError::NoHello(other.kind().into())),
            _ => {}
        }
        self.last = Some(msg.seq);
        Ok(msg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MailboxSnapshot {
    pub command: Option<OperatorCommand>,
    pub connected: bool,
}

/// Latest-command slot shared between the network side and the loop.
/// Writers overwrite; the loop reads one snapshot per tick.
#[derive(Debug)]
pub struct Mailbox {
    slot: Mutex<MailboxSnapshot>,
    received: AtomicU64,
}

impl Default for Mailbox {
    fn default() -> Self {
        Self { slot: Mutex::new(MailboxSnapshot { command: None, connected: false }), received: AtomicU64::new(0) }
    }
}

impl Mailbox {
    pub fn put(&self, cmd: OperatorCommand) {
        let mut s = self.slot.lock().unwrap_or_else(|p| p.into_inner());
        s.command = Some(cmd);
        s.connected = true;
        self.received.fetch_add(1, Ordering::Relaxed);
    }

    pub fn set_connected(&self, connected: bool) {
        self.slot.lock().unwrap_or_else(|p| p.into_inner()).connected = connected;
    }

    pub fn snapshot(&self) -> MailboxSnapshot {
        *self.slot.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn received(&self) -> u64 {
        self.received.load(Ordering::Relaxed)
    }
}

/// Bounded state queue for one client. When full the oldest entry is
/// dropped; pushing never blocks.
#[derive(Debug)]
pub struct StateQueue {
    queue: ArrayQueue<StatePayload>,
    dropped: AtomicU64,
}

impl StateQueue {
    pub fn new(capacity: usize) -> Self {
        Self { queue: ArrayQueue::new(capacity.max(1)), dropped: AtomicU64::new(0) }
    }

    pub fn push(&self, s: StatePayload) {
        if self.queue.force_push(s).is_some() {
            self.dropped.fetch_add(1, Ordering::Relaxed);
        }
    }

    pub fn pop(&self) -> Option<StatePayload> {
        self.queue.pop()
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn dropped(&self) -> u64 {
        self.dropped.load(Ordering::Relaxed)
    }
}

/// Fan-out of state snapshots to every connected client.
#[derive(Debug)]
pub struct StateHub {
    capacity: usize,
    clients: Mutex<Vec<Arc<StateQueue>>>,
}

impl StateHub {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, clients: Mutex::new(Vec::new()) }
    }

    pub fn subscribe(&self) -> Arc<StateQueue> {
        let q = Arc::new(StateQueue::new(self.capacity));
        self.clients.lock().unwrap_or_else(|p| p.into_inner()).push(q.clone());
        q
    }

    pub fn unsubscribe(&self, q: &Arc<StateQueue>) {
        self.clients.lock().unwrap_or_else(|p| p.into_inner()).retain(|c| !Arc::ptr_eq(c, q));
    }

    pub fn publish(&self, s: &StatePayload) {
        let clients = self.clients.lock().unwrap_or_else(|p| p.into_inner()).clone();
        for c in clients {
            c.push(s.clone());
        }
    }

    pub fn clients(&self) -> usize {
        self.clients.lock().unwrap_or_else(|p| p.into_inner()).len()
    }
}

/// Turns mailbox snapshots into per-tick operator commands on the loop's
/// clock. A command is stamped with the loop time at which it was first
/// seen. After the operator disconnects the last command is held for
/// `grace` seconds, then `v_u` decays as `exp(−(t − t_d − grace)/τ)`.
#[derive(Debug, Clone)]
pub struct LiveCommandSource {
    grace: f64,
    tau: f64,
    last: Option<OperatorCommand>,
    disconnected_at: Option<f64>,
}

impl LiveCommandSource {
    pub fn new(grace: f64, tau: f64) -> Self {
        Self { grace, tau, last: None, disconnected_at: None }
    }

    pub fn sample(&mut self, t: f64, snap: MailboxSnapshot) -> Option<OperatorCommand> {
        if let Some(mut c) = snap.command {
            let fresh = self.last.is_none_or(|l| OperatorCommand { time: l.time, ..c } != l);
            if fresh {
                c.time = t;
                self.last = Some(c);
            }
        }
        if snap.connected {
            self.disconnected_at = None;
        } else if self.last.is_some() && self.disconnected_at.is_none() {
            self.disconnected_at = Some(t);
        }
        let mut out = self.last?;
        if let Some(td) = self.disconnected_at {
            let late = t - td - self.grace;
            if late > 0.0 {
                out.v_u *= (-late / self.tau).exp();
            }
        }
        Some(out)
    }
}

/// The loop side of a live session: one simulation fed from a mailbox.
pub struct LiveSession {
    pub sim: Simulation,
    source: LiveCommandSource,
    mailbox: Arc<Mailbox>,
}

impl LiveSession {
    pub fn new(sim: Simulation, mailbox: Arc<Mailbox>, grace: f64, tau: f64) -> Self {
        Self { sim, source: LiveCommandSource::new(grace, tau), mailbox }
    }

    pub fn mailbox(&self) -> &Arc<Mailbox> {
        &self.mailbox
    }

    /// Reads exactly one mailbox snapshot and advances one tick.
    pub fn step(&mut self) -> Result<(TelemetryRecord, MailboxSnapshot), SimError> {
        let snap = self.mailbox.snapshot();
        let cmd = self.source.sample(self.sim.time(), snap);
        let rec = self.sim.step(cmd.as_ref())?;
        Ok((rec, snap))
    }
}

/// Runs a live session for `cfg.sim.duration` simulated seconds or until
/// `stop` is set. State is published every `1 / state_rate_hz` seconds of
/// simulated time; the loop is paced against the wall clock by
/// `realtime_factor` (0 runs flat out).
pub fn run_live<W: Write>(
    cfg: &ScenarioConfig,
    model: RobotModel,
    mailbox: Arc<Mailbox>,
    hub: &StateHub,
    stop: &AtomicBool,
    out: Option<W>,
) -> Result<RunSummary, SimError> {
    let joint_names: Vec<String> = model.joints().iter().map(|j| j.name.clone()).collect();
    let sim = Simulation::new(cfg, model)?;
    let mut summary = SummaryBuilder::new(cfg, &sim)?;
    let mut session = LiveSession::new(sim, mailbox, cfg.bridge.grace_period, cfg.bridge.decay_time_constant);
    let mut writer = out.map(|w| TelemetryWriter::new(w, &joint_names)).transpose()?;
    let dt = cfg.sim.dt;
    let ticks = (cfg.sim.duration / dt).round() as u64;
    let every = ((1.0 / (cfg.bridge.state_rate_hz * dt)).round() as u64).max(1);
    let rf = cfg.bridge.realtime_factor;
    let start = Instant::now();
    let mut status = RunStatus::Ok;
    for k in 0..ticks {
        if stop.load(Ordering::Relaxed) {
            break;
        }
        let (rec, snap) = match session.step() {
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
        if k % every == 0 {
            hub.publish(&StatePayload::new(&rec, &session.sim, snap.connected));
        }
        if rf > 0.0 {
            let due = start + Duration::from_secs_f64((k + 1) as f64 * dt / rf);
            if let Some(wait) = due.checked_duration_since(Instant::now()) {
                std::thread::sleep(wait);
            }
        }
    }
    if let Some(w) = writer {
        w.finish()?;
    }
    Ok(summary.finish(&session.sim, status)?)
}
