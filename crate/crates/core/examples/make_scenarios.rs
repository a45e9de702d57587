//! Regenerates the command files under `scenarios/`.
//!
//! Hand poses are the settled rest poses of the bundled robot expressed in
//! the head frame, so a scenario that does not move the hands starts without
//! a jump in the hand targets.
//!
//! `cargo run -p telewalk --example make_scenarios -- scenarios`

use std::path::PathBuf;

use telewalk::bundled::desk_biped;
use telewalk::commands::{write_command_stream, CommandStream};
use telewalk::config::ScenarioConfig;
use telewalk::retarget::OperatorCommand;
use telewalk::sim::Simulation;
use telewalk::spatial::{rot_z, Transform};

fn sample(t: f64, v_u: f64, theta_u: f64, hands: &[Transform; 2]) -> OperatorCommand {
    // The retargeting frame removes θ_u, so the VR poses carry it.
    let rz = Transform::from_rotation(rot_z(theta_u));
    OperatorCommand {
        time: t,
        v_u,
        theta_u,
        left_hand: &rz * &hands[0],
        right_hand: &rz * &hands[1],
        head: rot_z(theta_u),
    }
}

fn main() -> anyhow::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "scenarios".into()));
    std::fs::create_dir_all(&dir)?;
    let sim = Simulation::new(&ScenarioConfig::default(), desk_biped())?;
    let rest = *sim.rest_hands();

    let write = |name: &str, records: Vec<OperatorCommand>| -> anyhow::Result<()> {
        let file = std::fs::File::create(dir.join(name))?;
        write_command_stream(&CommandStream::new(records)?, file)?;
        Ok(())
    };

    write("straight_walk.csv", vec![sample(0.0, 0.0, 0.0, &rest), sample(0.5, 0.2, 0.0, &rest)])?;
    write("heading.csv", vec![sample(0.0, 0.0, 0.5, &rest), sample(0.5, 0.1, 0.5, &rest)])?;

    let mut reach = vec![sample(0.0, 0.0, 0.0, &rest), sample(0.5, 0.15, 0.0, &rest)];
    for k in 1..=20 {
        let s = k as f64 / 20.0;
        let mut hands = rest;
        for h in &mut hands {
            h.translation.x += 0.06 * s;
            h.translation.z += 0.04 * s;
        }
        reach.push(sample(1.0 + 0.1 * k as f64, 0.15, 0.0, &hands));
    }
    write("hand_reach.csv", reach)?;
    write("standing.csv", vec![])?;
    Ok(())
}
