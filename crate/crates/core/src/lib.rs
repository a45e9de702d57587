pub mod bundled;
pub mod model;
pub mod spatial;
pub mod tolerance;
pub mod retarget;
pub mod gait;
pub mod support;
pub mod control;
pub mod wbqp;
pub mod config;
pub mod commands;
pub mod telemetry;
pub mod sim;
pub mod bridge;

/// Chapters of the guide in `book/`, compiled so their examples run as
/// doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/retargeting.md")]
    mod retargeting {}
    #[doc = include_str!("../../../book/src/kinematics.md")]
    mod kinematics {}
    #[doc = include_str!("../../../book/src/walking.md")]
    mod walking {}
    #[doc = include_str!("../../../book/src/balance.md")]
    mod balance {}
    #[doc = include_str!("../../../book/src/whole_body.md")]
    mod whole_body {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios {}
    #[doc = include_str!("../../../book/src/bridge.md")]
    mod bridge {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../README.md")]
    mod readme {}
}
