//! Operator-to-robot retargeting.
//!
//! Two readouts drive the robot. The treadmill gives a walking speed `v_u`
//! and the operator yaw `θ_u`; comparing `θ_u` with the robot yaw `θ_r`
//! yields a planar command in the robot's foot-midpoint frame (x forward,
//! y left). The headset gives hand poses in the VR inertial frame `V`; they
//! are re-expressed in the heading-aligned retargeting frame `R`
//! (`ᴿT_V = [Rz(−θ_u), 0; 0, 1]`), scaled to robot size, and chained onto the
//! robot head frame:
//!
//! ```text
//! ᴴT_Hr = ᴴT_R · scale(ᴿT_V · ⱽT_Hu) · ᴴᵘT_Hr
//! ```

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spatial::{rot_z, Rotation3, Transform};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RetargetError {
    #[error("walking speed must be finite and non-negative, got {0}")]
    Speed(f64),
    #[error("operator yaw must be finite")]
    Yaw,
    #[error("{0} pose is not finite")]
    Pose(&'static str),
    #[error("scale ratio must lie in (0, 1.5], got {0}")]
    Scale(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    /// +1 for left, −1 for right (the sign of the lateral axis).
    pub fn sign(self) -> f64 {
        match self {
            Side::Left => 1.0,
            Side::Right => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

/// One sample of the operator's devices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorCommand {
    /// Seconds.
    pub time: f64,
    /// Treadmill walking speed, m/s.
    pub v_u: f64,
    /// Operator yaw on the treadmill, rad.
    pub theta_u: f64,
    /// Left hand pose in the VR frame.
    pub left_hand: Transform,
    pub right_hand: Transform,
    /// Headset orientation in the VR frame.
    pub head: Rotation3,
}

impl OperatorCommand {
    pub fn standing(time: f64, left_hand: Transform, right_hand: Transform) -> Self {
        Self {
            time,
            v_u: 0.0,
            theta_u: 0.0,
            left_hand,
            right_hand,
            head: Rotation3::identity(),
        }
    }

    pub fn hand(&self, side: Side) -> &Transform {
        match side {
            Side::Left => &self.left_hand,
            Side::Right => &self.right_hand,
        }
    }

    pub fn validate(&self) -> Result<(), RetargetError> {
        if !(self.v_u.is_finite() && self.v_u >= 0.0) {
            return Err(RetargetError::Speed(self.v_u));
        }
        if !self.theta_u.is_finite() || !self.time.is_finite() {
            return Err(RetargetError::Yaw);
        }
        if !self.left_hand.is_finite() {
            return Err(RetargetError::Pose("left hand"));
        }
        if !self.right_hand.is_finite() {
            return Err(RetargetError::Pose("right hand"));
        }
        Ok(())
    }
}

/// Constant operator/robot calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetargetCalibration {
    /// Robot-to-human limb length ratio applied to hand positions.
    pub scale_ratio: f64,
    /// `ᴴT_R`: retargeting frame expressed in the robot head frame.
    pub head_to_retarget: Transform,
    /// `ᴴᵘT_Hr` for the left hand.
    pub left_hand_offset: Transform,
    pub right_hand_offset: Transform,
}

impl Default for RetargetCalibration {
    fn default() -> Self {
        Self {
            scale_ratio: 1.0,
            head_to_retarget: Transform::identity(),
            left_hand_offset: Transform::identity(),
            right_hand_offset: Transform::identity(),
        }
    }
}

impl RetargetCalibration {
    pub fn validate(&self) -> Result<(), RetargetError> {
        if !(self.scale_ratio > 0.0 && self.scale_ratio <= 1.5) {
            return Err(RetargetError::Scale(self.scale_ratio));
        }
        for (name, t) in [
            ("head-to-retarget", &self.head_to_retarget),
            ("left hand offset", &self.left_hand_offset),
            ("right hand offset", &self.right_hand_offset),
        ] {
            if !t.is_finite() {
                return Err(RetargetError::Pose(name));
            }
        }
        Ok(())
    }

    pub fn hand_offset(&self, side: Side) -> &Transform {
        match side {
            Side::Left => &self.left_hand_offset,
            Side::Right => &self.right_hand_offset,
        }
    }
}

/// Planar walking command in the foot-midpoint frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ComCommand {
    /// Forward component.
    pub x: f64,
    /// Leftward component.
    pub y: f64,
}

impl ComCommand {
    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// `(x, y) = v_u (cos(θ_u − θ_r), sin(θ_u − θ_r))`.
pub fn treadmill_to_com_command(v_u: f64, theta_u: f64, theta_r: f64) -> ComCommand {
    let (s, c) = (theta_u - theta_r).sin_cos();
    ComCommand {
        x: v_u * c,
        y: v_u * s,
    }
}

/// Hand pose in the retargeting frame: `ᴿT_V · ⱽT_Hu`.
pub fn vr_to_retargeting(vr_pose: &Transform, theta_u: f64) -> Transform {
    &Transform::from_rotation(rot_z(-theta_u)) * vr_pose
}

/// Scales the translation, leaving the rotation untouched.
pub fn scale_position(t: &Transform, scale_ratio: f64) -> Transform {
    Transform::new(t.rotation, t.translation * scale_ratio)
}

/// Robot hand target relative to the robot head frame, `ᴴT_Hr`.
pub fn retargeted_hand_target(
    cmd: &OperatorCommand,
    calib: &RetargetCalibration,
    side: Side,
) -> Transform {
    let in_retarget = scale_position(&vr_to_retargeting(cmd.hand(side), cmd.theta_u), calib.scale_ratio);
    &(&calib.head_to_retarget * &in_retarget) * calib.hand_offset(side)
}

/// Operator head orientation in the retargeting frame, `Rz(−θ_u) · R_head`.
pub fn head_target(head: &Rotation3, theta_u: f64) -> Rotation3 {
    rot_z(-theta_u) * *head
}

/// Neck yaw/pitch set-points: intrinsic Z-Y-X angles of the head target,
/// each clamped to its joint range.
pub fn neck_targets(target: &Rotation3, yaw_range: (f64, f64), pitch_range: (f64, f64)) -> (f64, f64) {
    let (yaw, pitch, _roll) = target.zyx_angles();
    (
        yaw.clamp(yaw_range.0, yaw_range.1),
        pitch.clamp(pitch_range.0, pitch_range.1),
    )
}

/// Robot heading used as `θ_r`: yaw of the base x-axis on the ground plane.
pub fn robot_yaw(base: &Transform) -> f64 {
    base.rotation.yaw()
}

/// Translation-only helper for building VR hand poses.
pub fn hand_pose(x: f64, y: f64, z: f64, rotation: Rotation3) -> Transform {
    Transform::new(rotation, Vector3::new(x, y, z))
}
