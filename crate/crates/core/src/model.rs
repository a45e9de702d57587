//! Floating-base kinematic tree: description loading, forward kinematics,
//! frame Jacobians and centre of mass.
//!
//! The system velocity is `ν = (ṗ_B, ω_B, ṡ)` with the base linear and
//! angular velocity expressed in the inertial frame. Every Jacobian here maps
//! `ν` to a frame's inertial linear velocity (rows 0..3) and angular velocity
//! (rows 3..6).

use std::collections::{BTreeMap, VecDeque};

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::Deserialize;
use thiserror::Error;

use crate::spatial::{hat, Rotation3, Transform, Twist};
use crate::tolerance;

/// Column count of the floating-base block.
pub const BASE_DOFS: usize = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("model description: {0}")]
    Parse(String),
    #[error("duplicate {kind} name `{name}`")]
    DuplicateName { kind: &'static str, name: String },
    #[error("joint `{joint}` references unknown link `{link}`")]
    UnknownLink { joint: String, link: String },
    #[error("link `{link}` is the child of more than one joint")]
    MultipleParents { link: String },
    #[error("kinematic tree must have exactly one root, found {0:?}")]
    Roots(Vec<String>),
    #[error("links {0:?} are not reachable from the root (cycle)")]
    Cycle(Vec<String>),
    #[error("joint `{joint}` axis is not unit norm (‖a‖ = {norm})")]
    NonUnitAxis { joint: String, norm: f64 },
    #[error("link `{link}` mass must be positive, got {mass}")]
    NonPositiveMass { link: String, mass: f64 },
    #[error("joint `{joint}`: {reason}")]
    BadJoint { joint: String, reason: String },
    #[error("frame `{frame}` references unknown link `{link}`")]
    MissingFrameLink { frame: String, link: String },
    #[error("unknown frame `{0}`")]
    UnknownFrame(String),
    #[error("state dimension mismatch: {what} has {got} entries, model needs {expected}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub name: String,
    pub mass: f64,
    /// Centre of mass in the link frame.
    pub com: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub name: String,
    pub parent: usize,
    pub child: usize,
    /// Unit rotation axis in the joint frame.
    pub axis: Vector3<f64>,
    /// Fixed transform from the parent link frame to the joint frame.
    pub mount: Transform,
    pub lower: f64,
    pub upper: f64,
    pub velocity_limit: f64,
    pub home: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub name: String,
    pub link: usize,
    pub offset: Transform,
}

/// Rectangular sole footprint centred on each foot frame.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct SoleGeometry {
    pub length: f64,
    pub width: f64,
}

impl Default for SoleGeometry {
    fn default() -> Self {
        Self {
            length: 0.12,
            width: 0.06,
        }
    }
}

/// An immutable kinematic tree. Joints are stored so that every joint's
/// parent link is placed before it.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel {
    pub name: String,
    links: Vec<Link>,
    joints: Vec<Joint>,
    frames: Vec<Frame>,
    root: usize,
    parent_joint: Vec<Option<usize>>,
    /// Joint indices on the path from the root to each link.
    chains: Vec<Vec<usize>>,
    pub sole: SoleGeometry,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    name: String,
    #[serde(default)]
    links: Vec<RawLink>,
    #[serde(default)]
    joints: Vec<RawJoint>,
    #[serde(default)]
    frames: BTreeMap<String, RawFrame>,
    sole: Option<SoleGeometry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLink {
    name: String,
    mass: f64,
    #[serde(default)]
    com: [f64; 3],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawJoint {
    name: String,
    parent: String,
    child: String,
    axis: [f64; 3],
    #[serde(default)]
    xyz: [f64; 3],
    #[serde(default)]
    rpy: [f64; 3],
    limits: [f64; 2],
    velocity_limit: f64,
    #[serde(default)]
    home: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFrame {
    link: String,
    #[serde(default)]
    xyz: [f64; 3],
    #[serde(default)]
    rpy: [f64; 3],
}

fn mounting(xyz: [f64; 3], rpy: [f64; 3]) -> Transform {
    Transform::new(
        Rotation3::from_rpy(rpy[0], rpy[1], rpy[2]),
        Vector3::from(xyz),
    )
}

/// Parses and validates a TOML model description.
pub fn load_model(description: &str) -> Result<RobotModel, ModelError> {
    let raw: RawModel = toml::from_str(description).map_err(|e| ModelError::Parse(e.to_string()))?;
    RobotModel::from_raw(raw)
}

impl RobotModel {
    fn from_raw(raw: RawModel) -> Result<Self, ModelError> {
        let mut link_index = BTreeMap::new();
        let mut links = Vec::with_capacity(raw.links.len());
        for l in raw.links {
            if link_index.insert(l.name.clone(), links.len()).is_some() {
                return Err(ModelError::DuplicateName {
                    kind: "link",
                    name: l.name,
                });
            }
            if !(l.mass > 0.0 && l.mass.is_finite()) {
                return Err(ModelError::NonPositiveMass {
                    link: l.name,
                    mass: l.mass,
                });
            }
            links.push(Link {
                name: l.name,
                mass: l.mass,
                com: Vector3::from(l.com),
            });
        }

        let mut joint_names = BTreeMap::new();
        let mut unordered = Vec::with_capacity(raw.joints.len());
        let mut parent_joint: Vec<Option<usize>> = vec![None; links.len()];
        for j in raw.joints {
            if joint_names.insert(j.name.clone(), ()).is_some() {
                return Err(ModelError::DuplicateName {
                    kind: "joint",
                    name: j.name,
                });
            }
            let lookup = |link: &str| {
                link_index
                    .get(link)
                    .copied()
                    .ok_or_else(|| ModelError::UnknownLink {
                        joint: j.name.clone(),
                        link: link.to_string(),
                    })
            };
            let parent = lookup(&j.parent)?;
            let child = lookup(&j.child)?;
            let axis = Vector3::from(j.axis);
            let norm = axis.norm();
            if !((norm - 1.0).abs() < tolerance::AXIS_NORM) {
                return Err(ModelError::NonUnitAxis { joint: j.name, norm });
            }
            let [lower, upper] = j.limits;
            if !(lower < upper) {
                return Err(ModelError::BadJoint {
                    joint: j.name,
                    reason: format!("limits [{lower}, {upper}] are empty"),
                });
            }
            if !(j.velocity_limit > 0.0) {
                return Err(ModelError::BadJoint {
                    joint: j.name,
                    reason: "velocity limit must be positive".into(),
                });
            }
            if !(lower..=upper).contains(&j.home) {
                return Err(ModelError::BadJoint {
                    joint: j.name,
                    reason: format!("home {} outside limits", j.home),
                });
            }
            if parent_joint[child].is_some() {
                return Err(ModelError::MultipleParents {
                    link: links[child].name.clone(),
                });
            }
            parent_joint[child] = Some(unordered.len());
            unordered.push(Joint {
                name: j.name,
                parent,
                child,
                axis,
                mount: mounting(j.xyz, j.rpy),
                lower,
                upper,
                velocity_limit: j.velocity_limit,
                home: j.home,
            });
        }

        let roots: Vec<usize> = (0..links.len()).filter(|&i| parent_joint[i].is_none()).collect();
        if roots.len() != 1 {
            return Err(ModelError::Roots(
                roots.iter().map(|&i| links[i].name.clone()).collect(),
            ));
        }
        let root = roots[0];

        // Breadth-first from the root gives a parent-before-child joint order.
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); links.len()];
        for (ji, j) in unordered.iter().enumerate() {
            children[j.parent].push(ji);
        }
        let mut order = Vec::with_capacity(unordered.len());
        let mut seen = vec![false; links.len()];
        seen[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(l) = queue.pop_front() {
            for &ji in &children[l] {
                let c = unordered[ji].child;
                if !seen[c] {
                    seen[c] = true;
                    order.push(ji);
                    queue.push_back(c);
                }
            }
        }
        if order.len() != unordered.len() {
            let stranded = (0..links.len())
                .filter(|&i| !seen[i])
                .map(|i| links[i].name.clone())
                .collect();
            return Err(ModelError::Cycle(stranded));
        }
        let joints: Vec<Joint> = order.iter().map(|&ji| unordered[ji].clone()).collect();
        let mut parent_joint = vec![None; links.len()];
        for (ji, j) in joints.iter().enumerate() {
            parent_joint[j.child] = Some(ji);
        }

        let mut chains: Vec<Vec<usize>> = vec![Vec::new(); links.len()];
        for (ji, j) in joints.iter().enumerate() {
            let mut chain = chains[j.parent].clone();
            chain.push(ji);
            chains[j.child] = chain;
        }

        let mut frames = Vec::with_capacity(raw.frames.len());
        for (name, f) in raw.frames {
            let link = *link_index.get(&f.link).ok_or_else(|| ModelError::MissingFrameLink {
                frame: name.clone(),
                link: f.link.clone(),
            })?;
            frames.push(Frame {
                name,
                link,
                offset: mounting(f.xyz, f.rpy),
            });
        }

        Ok(Self {
            name: raw.name,
            links,
            joints,
            frames,
            root,
            parent_joint,
            chains,
            sole: raw.sole.unwrap_or_default(),
        })
    }

    pub fn dofs(&self) -> usize {
        self.joints.len()
    }

    /// Length of the system velocity vector, `6 + n`.
    pub fn velocity_dim(&self) -> usize {
        BASE_DOFS + self.joints.len()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn total_mass(&self) -> f64 {
        self.links.iter().map(|l| l.mass).sum()
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    pub fn link_index(&self, name: &str) -> Option<usize> {
        self.links.iter().position(|l| l.name == name)
    }

    pub fn frame_index(&self, name: &str) -> Result<usize, ModelError> {
        self.frames
            .iter()
            .position(|f| f.name == name)
            .ok_or_else(|| ModelError::UnknownFrame(name.to_string()))
    }

    /// Joint indices between the root and `link`, root first.
    pub fn chain(&self, link: usize) -> &[usize] {
        &self.chains[link]
    }

    pub fn parent_joint(&self, link: usize) -> Option<usize> {
        self.parent_joint[link]
    }

    pub fn home_posture(&self) -> DVector<f64> {
        DVector::from_iterator(self.joints.len(), self.joints.iter().map(|j| j.home))
    }

    pub fn velocity_limits(&self) -> DVector<f64> {
        DVector::from_iterator(self.joints.len(), self.joints.iter().map(|j| j.velocity_limit))
    }
}

/// A joint whose position lies outside its limits.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitViolation {
    pub joint: String,
    pub position: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Floating-base configuration and velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotState {
    pub base_pose: Transform,
    pub joint_positions: DVector<f64>,
    /// `ν = (ṗ_B, ω_B, ṡ)`.
    pub velocity: DVector<f64>,
}

impl RobotState {
    pub fn new(base_pose: Transform, joint_positions: DVector<f64>) -> Self {
        let n = joint_positions.len();
        Self {
            base_pose,
            joint_positions,
            velocity: DVector::zeros(BASE_DOFS + n),
        }
    }

    pub fn zero(model: &RobotModel) -> Self {
        Self::new(Transform::identity(), DVector::zeros(model.dofs()))
    }

    pub fn home(model: &RobotModel) -> Self {
        Self::new(Transform::identity(), model.home_posture())
    }

    pub fn check_dimensions(&self, model: &RobotModel) -> Result<(), ModelError> {
        if self.joint_positions.len() != model.dofs() {
            return Err(ModelError::Dimension {
                what: "joint positions",
                expected: model.dofs(),
                got: self.joint_positions.len(),
            });
        }
        if self.velocity.len() != model.velocity_dim() {
            return Err(ModelError::Dimension {
                what: "velocity",
                expected: model.velocity_dim(),
                got: self.velocity.len(),
            });
        }
        Ok(())
    }

    /// Joints outside their position limits. Positions are never clamped here.
    pub fn limit_violations(&self, model: &RobotModel) -> Vec<LimitViolation> {
        model
            .joints()
            .iter()
            .zip(self.joint_positions.iter())
            .filter(|(j, &q)| q < j.lower || q > j.upper)
            .map(|(j, &q)| LimitViolation {
                joint: j.name.clone(),
                position: q,
                lower: j.lower,
                upper: j.upper,
            })
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.base_pose.is_finite()
            && self.joint_positions.iter().all(|v| v.is_finite())
            && self.velocity.iter().all(|v| v.is_finite())
    }

    /// Advances the configuration by `ν·dt`: joints and base position
    /// explicitly, base orientation by the exponential of `ω_B dt`.
    pub fn integrate(&mut self, nu: &DVector<f64>, dt: f64) {
        let v = Vector3::new(nu[0], nu[1], nu[2]);
        let w = Vector3::new(nu[3], nu[4], nu[5]);
        self.base_pose.translation += v * dt;
        self.base_pose.rotation = Rotation3::exp(&(w * dt)) * self.base_pose.rotation;
        let n = self.joint_positions.len();
        for i in 0..n {
            self.joint_positions[i] += nu[BASE_DOFS + i] * dt;
        }
        self.velocity.copy_from(nu);
    }
}

/// Link poses and world joint axes for one configuration. All frame
/// quantities for a tick are read from one of these.
#[derive(Debug, Clone)]
pub struct Kinematics<'m> {
    model: &'m RobotModel,
    base: Transform,
    link_poses: Vec<Transform>,
    joint_axes: Vec<Vector3<f64>>,
    joint_origins: Vec<Vector3<f64>>,
}

impl<'m> Kinematics<'m> {
    pub fn compute(model: &'m RobotModel, state: &RobotState) -> Result<Self, ModelError> {
        if state.joint_positions.len() != model.dofs() {
            return Err(ModelError::Dimension {
                what: "joint positions",
                expected: model.dofs(),
                got: state.joint_positions.len(),
            });
        }
        let mut link_poses = vec![Transform::identity(); model.links.len()];
        link_poses[model.root] = state.base_pose;
        let mut joint_axes = Vec::with_capacity(model.dofs());
        let mut joint_origins = Vec::with_capacity(model.dofs());
        for (j, q) in model.joints.iter().zip(state.joint_positions.iter()) {
            let joint_frame = &link_poses[j.parent] * &j.mount;
            joint_axes.push(joint_frame.rotation * j.axis);
            joint_origins.push(joint_frame.translation);
            link_poses[j.child] =
                &joint_frame * &Transform::from_rotation(Rotation3::about_axis(&j.axis, *q));
        }
        Ok(Self {
            model,
            base: state.base_pose,
            link_poses,
            joint_axes,
            joint_origins,
        })
    }

    pub fn model(&self) -> &RobotModel {
        self.model
    }

    pub fn link_pose(&self, link: usize) -> &Transform {
        &self.link_poses[link]
    }

    pub fn frame_pose(&self, frame: usize) -> Transform {
        let f = &self.model.frames[frame];
        &self.link_poses[f.link] * &f.offset
    }

    /// 6×(6+n) Jacobian of a point rigidly attached to `link`, with the
    /// angular rows of that link.
    pub fn point_jacobian(&self, link: usize, point: &Vector3<f64>) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(6, self.model.velocity_dim());
        let r = point - self.base.translation;
        let transport = -hat(&r);
        for i in 0..3 {
            jac[(i, i)] = 1.0;
            jac[(3 + i, 3 + i)] = 1.0;
        }
        jac.fixed_view_mut::<3, 3>(0, 3).copy_from(&transport);
        for &ji in self.model.chain(link) {
            let a = self.joint_axes[ji];
            let lin = a.cross(&(point - self.joint_origins[ji]));
            let col = BASE_DOFS + ji;
            for i in 0..3 {
                jac[(i, col)] = lin[i];
                jac[(3 + i, col)] = a[i];
            }
        }
        jac
    }

    pub fn frame_jacobian(&self, frame: usize) -> DMatrix<f64> {
        let f = &self.model.frames[frame];
        self.point_jacobian(f.link, &self.frame_pose(frame).translation)
    }

    pub fn frame_twist(&self, frame: usize, nu: &DVector<f64>) -> Twist {
        let v = self.frame_jacobian(frame) * nu;
        Twist::new(
            Vector3::new(v[0], v[1], v[2]),
            Vector3::new(v[3], v[4], v[5]),
        )
    }

    pub fn link_com(&self, link: usize) -> Vector3<f64> {
        self.link_poses[link].transform_point(&self.model.links[link].com)
    }

    pub fn com(&self) -> Vector3<f64> {
        let total = self.model.total_mass();
        self.model
            .links
            .iter()
            .enumerate()
            .map(|(i, l)| self.link_com(i) * l.mass)
            .sum::<Vector3<f64>>()
            / total
    }

    /// 3×(6+n) CoM Jacobian: mass-weighted sum of link-CoM point Jacobians.
    pub fn com_jacobian(&self) -> DMatrix<f64> {
        let total = self.model.total_mass();
        let mut jac = DMatrix::zeros(3, self.model.velocity_dim());
        for (i, l) in self.model.links.iter().enumerate() {
            let pj = self.point_jacobian(i, &self.link_com(i));
            jac += pj.rows(0, 3) * (l.mass / total);
        }
        jac
    }
}

/// Pose of every named frame.
pub fn forward_kinematics(
    model: &RobotModel,
    state: &RobotState,
) -> Result<BTreeMap<String, Transform>, ModelError> {
    let kin = Kinematics::compute(model, state)?;
    Ok(model
        .frames
        .iter()
        .enumerate()
        .map(|(i, f)| (f.name.clone(), kin.frame_pose(i)))
        .collect())
}

pub fn frame_jacobian(
    model: &RobotModel,
    state: &RobotState,
    frame: &str,
) -> Result<DMatrix<f64>, ModelError> {
    let idx = model.frame_index(frame)?;
    Ok(Kinematics::compute(model, state)?.frame_jacobian(idx))
}

pub fn com_position(model: &RobotModel, state: &RobotState) -> Result<Vector3<f64>, ModelError> {
    Ok(Kinematics::compute(model, state)?.com())
}

pub fn com_jacobian(model: &RobotModel, state: &RobotState) -> Result<DMatrix<f64>, ModelError> {
    Ok(Kinematics::compute(model, state)?.com_jacobian())
}

/// Rotation of a joint frame for angle `q`; exposed for tests and tools.
pub fn joint_rotation(joint: &Joint, q: f64) -> Matrix3<f64> {
    *Rotation3::about_axis(&joint.axis, q).matrix()
}
