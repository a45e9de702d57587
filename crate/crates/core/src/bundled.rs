//! Descriptions shipped with the crate.

use crate::model::{load_model, RobotModel};

/// TOML source of the desk-scale biped.
pub const DESK_BIPED: &str = include_str!("../assets/desk_biped.toml");

pub fn desk_biped() -> RobotModel {
    load_model(DESK_BIPED).expect("bundled desk biped is valid")
}
