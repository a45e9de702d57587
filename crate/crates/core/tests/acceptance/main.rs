//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

#[path = "../common/mod.rs"]
mod common;

mod equations;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use telewalk::bundled::desk_biped;
use telewalk::commands::read_command_file;
use telewalk::config::{MatrixSpec, ScenarioConfig};
use telewalk::control::dcm_from_state;
use telewalk::gait::{plan_dcm, plan_footsteps_constant, DcmPiece, DcmSample, GaitParams, PlanRequest, Pose2, Stance};
use telewalk::retarget::{
    head_target, retargeted_hand_target, treadmill_to_com_command, vr_to_retargeting, ComCommand, OperatorCommand,
    RetargetCalibration, Side,
};
use telewalk::sim::{run, RunSummary, Simulation};
use telewalk::spatial::{rot_z, Rotation3, Transform};
use telewalk::telemetry::TelemetryTable;

type Outcome = Result<String, String>;

fn scenario_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn load(name: &str, overrides: &[(&str, &str)]) -> ScenarioConfig {
    let o: Vec<(String, String)> = overrides.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    ScenarioConfig::load(&scenario_dir().join(format!("{name}.toml")), &o).expect("bundled scenario loads")
}

/// Run a scenario, returning its summary and telemetry bytes.
fn run_with_telemetry(cfg: &ScenarioConfig) -> Result<(RunSummary, Vec<u8>), String> {
    let model = cfg.load_model().map_err(|e| e.to_string())?;
    let stream = match cfg.command_path() {
        Some(p) => read_command_file(&p).map_err(|e| e.to_string())?,
        None => Default::default(),
    };
    let mut bytes = Vec::new();
    let summary = run(cfg, model, &stream, Some(&mut bytes)).map_err(|e| e.to_string())?;
    if !summary.is_ok() {
        return Err(format!("run aborted: {:?}", summary.status));
    }
    Ok((summary, bytes))
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let results = equations::all();
    let elapsed = start.elapsed().as_secs_f64();
    let failed: Vec<String> =
        results.iter().filter_map(|(name, r)| r.as_ref().err().map(|e| format!("{name}: {e}"))).collect();
    let detail = format!("{} oracle checks, {} failed, {elapsed:.1} s", results.len(), failed.len());
    if !failed.is_empty() {
        return Err(format!("{detail}; {}", failed.join("; ")));
    }
    check(elapsed < 60.0, detail)
}

fn criterion_2() -> Outcome {
    let omega = ScenarioConfig::default().omega();
    let mut worst_jump: f64 = 0.0;
    let mut worst_ode: f64 = 0.0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = GaitParams { horizon_steps: rng.gen_range(4..=8), ..Default::default() };
        let yaw = rng.gen_range(-3.0..3.0);
        let centre = Pose2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), yaw);
        let half = params.nominal_width / 2.0;
        let stance = Stance {
            left: Pose2::new(centre.apply(&Vector2::new(0.0, half)).x, centre.apply(&Vector2::new(0.0, half)).y, yaw),
            right: Pose2::new(centre.apply(&Vector2::new(0.0, -half)).x, centre.apply(&Vector2::new(0.0, -half)).y, yaw),
        };
        let cmd = ComCommand { x: rng.gen_range(0.08..0.3), y: rng.gen_range(-0.2..0.2) };
        let request = PlanRequest { start_time: rng.gen_range(0.0..5.0), stance, next_swing: None, from_rest: rng.gen() };
        let plan = plan_footsteps_constant(cmd, &request, &params).map_err(|e| e.to_string())?;
        if plan.steps.len() != params.horizon_steps {
            return Err(format!("seed {seed}: {} steps planned", plan.steps.len()));
        }
        let initial = DcmSample {
            position: stance.midpoint() + Vector2::new(rng.gen_range(-0.02..0.02), rng.gen_range(-0.02..0.02)),
            velocity: Vector2::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1)),
        };
        let terminal = plan.final_stance().midpoint();
        let traj = plan_dcm(&plan, omega, &terminal, &initial, params.end_ds_duration).map_err(|e| e.to_string())?;
        let (dp, dv) = traj.max_boundary_mismatch();
        worst_jump = worst_jump.max(dp).max(dv);

        // ξ̇ = ω (ξ − r) by central differences inside each single-support piece.
        let h = 1e-5;
        for piece in &traj.pieces {
            if let DcmPiece::Ss { t0, t1, zmp, .. } = piece {
                for i in 1..10 {
                    let t = t0 + (t1 - t0) * i as f64 / 10.0;
                    let fd = (piece.eval(t + h).position - piece.eval(t - h).position) / (2.0 * h);
                    let rhs = (piece.eval(t).position - zmp) * omega;
                    worst_ode = worst_ode.max((fd - rhs).norm());
                }
            }
        }
    }
    check(
        worst_jump < 1e-8 && worst_ode < 1e-8,
        format!("100 plans, boundary jump {worst_jump:.2e}, ODE residual {worst_ode:.2e} (limit 1e-8)"),
    )
}

fn criterion_3() -> Outcome {
    let model = desk_biped();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for trial in 0..20 {
        let mut cfg = ScenarioConfig::default();
        let omega = cfg.omega();
        let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let rot = nalgebra::Rotation2::new(phi);
        let kp = rot.matrix() * Matrix2::new(rng.gen_range(2.0..6.0), 0.0, 0.0, rng.gen_range(2.0..6.0)) * rot.matrix().transpose();
        let full = |m: Matrix2<f64>| MatrixSpec::Full(vec![vec![m[(0, 0)], m[(0, 1)]], vec![m[(1, 0)], m[(1, 1)]]]);
        cfg.dcm.k_p = full(kp);
        cfg.dcm.k_i = MatrixSpec::Diagonal(vec![rng.gen_range(0.005..0.05), rng.gen_range(0.005..0.05)]);
        cfg.dcm.k_zmp = MatrixSpec::Scalar(rng.gen_range(0.05..0.95) * omega);
        cfg.dcm.k_com = MatrixSpec::Scalar(omega * rng.gen_range(1.05..3.0));
        let dir: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        cfg.sim.initial_com_offset = [0.05 * dir.cos(), 0.05 * dir.sin()];
        let mut sim = Simulation::new(&cfg, model.clone()).map_err(|e| format!("trial {trial}: {e}"))?;
        let ticks = (2.0 / cfg.sim.dt).round() as usize;
        for _ in 0..ticks {
            sim.step(None).map_err(|e| format!("trial {trial}: {e}"))?;
        }
        let xi = dcm_from_state(sim.lipm(), sim.omega());
        let xi_ref = sim.gait().dcm_reference(sim.time()).position;
        worst = worst.max((xi - xi_ref).norm());
    }
    check(worst < 1e-3, format!("20 gain sets, worst |ξ − ξ_ref| at 2 s = {worst:.2e} m (limit 1e-3)"))
}

fn criterion_4() -> Outcome {
    let (walk, _) = run_with_telemetry(&load("straight_walk", &[]))?;
    let walk_ok = walk.distance > 0.5 && walk.dcm_rms < 0.01 && walk.zmp_always_inside;

    let (_, bytes) = run_with_telemetry(&load("heading", &[]))?;
    let table = TelemetryTable::parse(bytes.as_slice()).map_err(|e| e.to_string())?;
    let heading = table.column("heading").map_err(|e| e.to_string())?;
    let phase = table.text_column("phase").ok_or("no phase column")?;
    // The gait has a two-step period and the torso yaw wobbles within it, so
    // sample once per stride: at the start of double support after each
    // landing of the same foot. Both feet's sequences must decrease strictly.
    let onsets: Vec<usize> = (1..phase.len()).filter(|&i| phase[i] == "ds" && phase[i - 1] != "ds").collect();
    let strides: Vec<Vec<f64>> = (0..2)
        .map(|parity| onsets.iter().skip(parity).step_by(2).map(|&i| (0.5 - heading[i]).abs()).collect())
        .collect();
    let monotone = strides.iter().all(|s| s.len() >= 3 && s.windows(2).all(|w| w[1] < w[0]));
    let final_err = (0.5 - heading.last().copied().unwrap_or(0.0)).abs();
    check(
        walk_ok && monotone,
        format!(
            "distance {:.3} m, DCM RMS {:.2e} m, ZMP inside {}, per-stride heading error over {} landings strictly decreasing: {monotone} (0.5 rad to {final_err:.3} rad)",
            walk.distance,
            walk.dcm_rms,
            walk.zmp_always_inside,
            onsets.len()
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut rows = Vec::new();
    for arms in ["1.0", "0.25", "0.05"] {
        let (s, _) = run_with_telemetry(&load("hand_reach", &[("wbqp.posture_weight.arms", arms)]))?;
        rows.push((arms, s.hand_error, s.arm_oscillation));
    }
    let decreasing = rows.windows(2).all(|w| w[1].1 < w[0].1);
    let trade_off = rows[2].2 > rows[1].2;
    let detail = rows
        .iter()
        .map(|(a, e, o)| format!("Λ={a}: error {e:.4} m, oscillation {o:.4}"))
        .collect::<Vec<_>>()
        .join(", ");
    check(decreasing && trade_off, detail)
}

fn criterion_6() -> Outcome {
    let mut names: Vec<String> = std::fs::read_dir(scenario_dir())
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .filter_map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .collect();
    names.sort();
    let mut mismatched = Vec::new();
    for name in &names {
        let cfg = load(name, &[]);
        let a = Sha256::digest(run_with_telemetry(&cfg)?.1);
        let b = Sha256::digest(run_with_telemetry(&cfg)?.1);
        if a != b {
            mismatched.push(name.clone());
        }
    }
    check(
        mismatched.is_empty() && !names.is_empty(),
        format!("{} scenarios ({}), mismatched: {mismatched:?}", names.len(), names.join(", ")),
    )
}

fn random_transform(rng: &mut ChaCha8Rng) -> Transform {
    let w = nalgebra::Vector3::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
    let p = nalgebra::Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    Transform::new(Rotation3::exp(&w), p)
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_pose: f64 = 0.0;
    let mut worst_norm: f64 = 0.0;
    for _ in 0..100 {
        let calib = RetargetCalibration {
            scale_ratio: rng.gen_range(0.5..1.5),
            head_to_retarget: random_transform(&mut rng),
            left_hand_offset: random_transform(&mut rng),
            right_hand_offset: random_transform(&mut rng),
        };
        let theta = rng.gen_range(-4.0..4.0);
        let delta = rng.gen_range(-4.0..4.0);
        let cmd = OperatorCommand {
            time: 0.0,
            v_u: rng.gen_range(0.0..2.0),
            theta_u: theta,
            left_hand: random_transform(&mut rng),
            right_hand: random_transform(&mut rng),
            head: random_transform(&mut rng).rotation,
        };
        let spin = Transform::from_rotation(rot_z(delta));
        let turned = OperatorCommand {
            theta_u: theta + delta,
            left_hand: &spin * &cmd.left_hand,
            right_hand: &spin * &cmd.right_hand,
            head: rot_z(delta) * cmd.head,
            ..cmd
        };
        let gap = |a: &Transform, b: &Transform| {
            (a.to_homogeneous() - b.to_homogeneous()).amax()
        };
        for side in [Side::Left, Side::Right] {
            worst_pose = worst_pose.max(gap(
                &retargeted_hand_target(&cmd, &calib, side),
                &retargeted_hand_target(&turned, &calib, side),
            ));
            worst_pose = worst_pose.max(gap(
                &vr_to_retargeting(cmd.hand(side), theta),
                &vr_to_retargeting(turned.hand(side), theta + delta),
            ));
        }
        worst_pose = worst_pose.max(
            (head_target(&cmd.head, theta).matrix() - head_target(&turned.head, theta + delta).matrix()).amax(),
        );
        let c = treadmill_to_com_command(cmd.v_u, theta, rng.gen_range(-4.0..4.0));
        worst_norm = worst_norm.max((c.norm() - cmd.v_u).abs());
    }
    check(
        worst_pose < 1e-12 && worst_norm < 1e-12,
        format!("100 trials, co-rotation deviation {worst_pose:.2e}, |‖c‖ − v_u| {worst_norm:.2e} (limit 1e-12)"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("equation-level oracles", criterion_1),
        ("DCM plan continuity and ODE residual", criterion_2),
        ("closed-loop DCM regulation", criterion_3),
        ("end-to-end walking and heading", criterion_4),
        ("posture weight ladder", criterion_5),
        ("deterministic telemetry", criterion_6),
        ("retargeting invariances", criterion_7),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} PASS {name} [{secs:.1} s]: {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {} FAIL {name} [{secs:.1} s]: {detail}", i + 1);
            }
        }
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
