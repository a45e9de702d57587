//! Equation-level examples, each checked against an oracle that does not go
//! through the function under test.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Matrix4, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use telewalk::bundled::desk_biped;
use telewalk::control::{dcm_controller, dcm_from_state, lipm_step, zmp_com_controller, GainSet, IntegralState, LipmState};
use telewalk::gait::{
    backward_recursion, dcm_ds_coeffs, dcm_ss, dcm_velocity, plan_footsteps_constant, GaitParams, PlanRequest, Pose2,
    Stance,
};
use telewalk::model::{load_model, Kinematics, RobotState};
use telewalk::retarget::{head_target, retargeted_hand_target, treadmill_to_com_command, ComCommand, OperatorCommand, RetargetCalibration, Side};
use telewalk::spatial::{orientation_error, rot_z, Rotation3, Transform};
use telewalk::wbqp::{
    desired_com_velocity, desired_foot_velocity, desired_hand_velocity, desired_torso_velocity, solve,
    HandErrorConvention, PoseGains, TaskSet,
};

use crate::common;

type Check = Result<(), String>;

fn close(what: &str, got: f64, want: f64, tol: f64) -> Check {
    if (got - want).abs() <= tol {
        Ok(())
    } else {
        Err(format!("{what}: got {got:e}, want {want:e} (tol {tol:e})"))
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn rand_vec3(r: &mut ChaCha8Rng, a: f64) -> Vector3<f64> {
    Vector3::new(r.gen_range(-a..a), r.gen_range(-a..a), r.gen_range(-a..a))
}

fn rand_vec2(r: &mut ChaCha8Rng, a: f64) -> Vector2<f64> {
    Vector2::new(r.gen_range(-a..a), r.gen_range(-a..a))
}

fn rand_rotation(r: &mut ChaCha8Rng) -> Rotation3 {
    Rotation3::exp(&rand_vec3(r, 3.0))
}

fn rand_transform(r: &mut ChaCha8Rng) -> Transform {
    Transform::new(rand_rotation(r), rand_vec3(r, 1.0))
}

/// Plain 4×4 homogeneous matrix, built entry by entry.
fn homogeneous(rot: &Matrix3<f64>, p: &Vector3<f64>) -> Matrix4<f64> {
    let mut h = Matrix4::zeros();
    for i in 0..3 {
        for j in 0..3 {
            h[(i, j)] = rot[(i, j)];
        }
        h[(i, 3)] = p[i];
    }
    h[(3, 3)] = 1.0;
    h
}

/// `(S − Sᵀ)/2` read off as a vector, written out by components.
fn vee_of_skew(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

fn orientation_small_angle() -> Check {
    let e = orientation_error(&Rotation3::rot_z(1e-6), &Rotation3::identity());
    close("x", e.x, 0.0, 1e-15)?;
    close("y", e.y, 0.0, 1e-15)?;
    // sin(ε) = ε − ε³/6 + …
    close("z", e.z, 1e-6, 1e-17)
}

fn orientation_antisymmetry() -> Check {
    let mut r = rng(11);
    for _ in 0..100 {
        let (a, b) = (rand_rotation(&mut r), rand_rotation(&mut r));
        let sum = orientation_error(&a, &b) + orientation_error(&b, &a);
        close("e(R, R*) + e(R*, R)", sum.amax(), 0.0, 1e-15)?;
        let direct = vee_of_skew(&(a.matrix() * b.matrix().transpose()));
        close("vee(sk(R R*ᵀ))", (orientation_error(&a, &b) - direct).amax(), 0.0, 1e-15)?;
    }
    Ok(())
}

fn joint_count() -> Check {
    let m = desk_biped();
    if m.dofs() == 25 {
        Ok(())
    } else {
        Err(format!("{} joints", m.dofs()))
    }
}

fn zero_pose_chain() -> Check {
    let m = desk_biped();
    let kin = Kinematics::compute(&m, &RobotState::zero(&m)).map_err(|e| e.to_string())?;
    let fi = m.frame_index("l_hand").map_err(|e| e.to_string())?;
    let f = &m.frames()[fi];
    let mut link = f.link;
    let mut h = homogeneous(f.offset.rotation.matrix(), &f.offset.translation);
    while let Some(j) = m.parent_joint(link) {
        let joint = &m.joints()[j];
        h = homogeneous(joint.mount.rotation.matrix(), &joint.mount.translation) * h;
        link = joint.parent;
    }
    close("l_hand chain", (kin.frame_pose(fi).to_homogeneous() - h).amax(), 0.0, 1e-14)
}

fn fd_jacobians() -> Check {
    let worst = common::worst_jacobian_error(7, 100);
    close("Jacobian vs central differences", worst, 0.0, 1e-6)
}

fn com_golden() -> Check {
    let m = desk_biped();
    let home = Kinematics::compute(&m, &RobotState::home(&m)).map_err(|e| e.to_string())?.com();
    close("home CoM", (home - Vector3::from(common::HOME_COM)).amax(), 0.0, 1e-12)?;
    let kin = Kinematics::compute(&m, &common::oracle_state(&m)).map_err(|e| e.to_string())?;
    close("displaced CoM", (kin.com() - Vector3::from(common::ORACLE_COM)).amax(), 0.0, 1e-12)?;
    for (name, p, rot) in common::ORACLE_FRAMES {
        let pose = kin.frame_pose(m.frame_index(name).map_err(|e| e.to_string())?);
        close(name, (pose.translation - Vector3::from(p)).amax(), 0.0, 1e-12)?;
        close(name, (pose.rotation.matrix() - Matrix3::from_row_slice(&rot)).amax(), 0.0, 1e-12)?;
    }
    Ok(())
}

fn treadmill_scalar() -> Check {
    let c = treadmill_to_com_command(0.5, 0.1, 0.4);
    close("x", c.x, 0.5 * (-0.3_f64).cos(), 1e-15)?;
    close("y", c.y, 0.5 * (-0.3_f64).sin(), 1e-15)?;
    // The printed values are truncated to five places.
    close("x printed", c.x, 0.47766, 1e-5)?;
    close("y printed", c.y, -0.14776, 1e-5)
}

fn hand_target_matrix_product() -> Check {
    let mut r = rng(12);
    for _ in 0..50 {
        let calib = RetargetCalibration {
            scale_ratio: r.gen_range(0.5..1.5),
            head_to_retarget: rand_transform(&mut r),
            left_hand_offset: rand_transform(&mut r),
            right_hand_offset: rand_transform(&mut r),
        };
        let theta = r.gen_range(-3.0..3.0);
        let cmd = OperatorCommand {
            time: 0.0,
            v_u: 0.0,
            theta_u: theta,
            left_hand: rand_transform(&mut r),
            right_hand: rand_transform(&mut r),
            head: rand_rotation(&mut r),
        };
        let (c, s) = (theta.cos(), theta.sin());
        let rz = Matrix3::new(c, s, 0.0, -s, c, 0.0, 0.0, 0.0, 1.0);
        for side in [Side::Left, Side::Right] {
            let hu = cmd.hand(side);
            let mut rv = homogeneous(&rz, &Vector3::zeros()) * homogeneous(hu.rotation.matrix(), &hu.translation);
            for i in 0..3 {
                rv[(i, 3)] *= calib.scale_ratio;
            }
            let off = calib.hand_offset(side);
            let h2r = &calib.head_to_retarget;
            let want = homogeneous(h2r.rotation.matrix(), &h2r.translation)
                * rv
                * homogeneous(off.rotation.matrix(), &off.translation);
            let got = retargeted_hand_target(&cmd, &calib, side).to_homogeneous();
            close("hand target", (got - want).amax(), 0.0, 1e-12)?;
        }
        let head = head_target(&cmd.head, theta);
        close("head target", (head.matrix() - rz * cmd.head.matrix()).amax(), 0.0, 1e-15)?;
    }
    Ok(())
}

fn stance(w: f64) -> Stance {
    Stance { left: Pose2::new(0.0, w / 2.0, 0.0), right: Pose2::new(0.0, -w / 2.0, 0.0) }
}

fn unicycle_straight() -> Check {
    let params = GaitParams { nominal_width: 0.16, max_width: 0.3, max_step_length: 0.25, ..Default::default() };
    let req = PlanRequest { start_time: 0.0, stance: stance(0.16), next_swing: None, from_rest: false };
    let plan = plan_footsteps_constant(ComCommand { x: 0.2, y: 0.0 }, &req, &params).map_err(|e| e.to_string())?;
    // A unicycle at 0.2 m/s covers 0.2 m per 1 s period; feet sit ±w/2 off its axis.
    for (k, st) in plan.steps.iter().enumerate() {
        let y = if k % 2 == 0 { 0.08 } else { -0.08 };
        close("step x", st.pose.x, 0.2 * (k + 1) as f64, 1e-12)?;
        close("step y", st.pose.y, y, 1e-12)?;
        close("step yaw", st.pose.yaw, 0.0, 1e-12)?;
    }
    Ok(())
}

fn unicycle_turn() -> Check {
    let params = GaitParams::default();
    let req = PlanRequest { start_time: 0.0, stance: stance(0.12), next_swing: None, from_rest: false };
    let plan = plan_footsteps_constant(ComCommand { x: 0.0, y: 1.0 }, &req, &params).map_err(|e| e.to_string())?;
    // Zero forward speed: the axis stays at the origin and each step's yaw
    // change saturates at max_turn, so foot k sits at angle (k+1)·max_turn.
    for (k, st) in plan.steps.iter().enumerate() {
        let yaw = params.max_turn * (k + 1) as f64;
        let side = if k % 2 == 0 { 1.0 } else { -1.0 };
        close("turn yaw", st.pose.yaw, yaw, 1e-12)?;
        close("turn x", st.pose.x, -side * 0.06 * yaw.sin(), 1e-12)?;
        close("turn y", st.pose.y, side * 0.06 * yaw.cos(), 1e-12)?;
    }
    Ok(())
}

fn dcm_ss_scalar() -> Check {
    let xi = dcm_ss(&Vector2::zeros(), &Vector2::new(0.01, 0.0), 3.0, 0.5, 1.0).map_err(|e| e.to_string())?;
    close("ξ_x", xi.x, 0.01 * 1.5_f64.exp(), 1e-15)?;
    close("ξ_x printed", xi.x, 0.044817, 5e-7)?;
    close("ξ_y", xi.y, 0.0, 0.0)
}

fn dcm_ss_derivative() -> Check {
    let mut r = rng(13);
    for _ in 0..50 {
        let (z, x0) = (rand_vec2(&mut r, 0.2), rand_vec2(&mut r, 0.2));
        let omega = r.gen_range(2.0..5.0);
        let t = r.gen_range(0.1..0.7);
        let h = 1e-6;
        let f = |t| dcm_ss(&z, &x0, omega, t, 0.8).unwrap();
        let fd = (f(t + h) - f(t - h)) / (2.0 * h);
        close("dξ/dt", (fd - dcm_velocity(&f(t), &z, omega)).amax(), 0.0, 1e-8)?;
    }
    Ok(())
}

fn hermite_example() -> Check {
    let c = dcm_ds_coeffs(&Vector2::zeros(), &Vector2::zeros(), &Vector2::new(0.1, 0.0), &Vector2::zeros(), 0.2);
    let want = [0.0, 0.0, 7.5, -25.0];
    for (k, w) in want.iter().enumerate() {
        close("a_k.x", c[k].x, *w, 1e-12)?;
        close("a_k.y", c[k].y, 0.0, 1e-12)?;
    }
    Ok(())
}

fn hermite_residual() -> Check {
    let mut r = rng(14);
    for _ in 0..100 {
        let (x0, v0, x1, v1) = (rand_vec2(&mut r, 1.0), rand_vec2(&mut r, 1.0), rand_vec2(&mut r, 1.0), rand_vec2(&mut r, 1.0));
        let d = r.gen_range(0.05..1.0);
        let [a0, a1, a2, a3] = dcm_ds_coeffs(&x0, &v0, &x1, &v1, d);
        // Rows of the 4×4 boundary system: p(0), p'(0), p(d), p'(d).
        let m = Matrix4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, d, d * d, d * d * d, 0.0, 1.0, 2.0 * d, 3.0 * d * d);
        for axis in 0..2 {
            let a = nalgebra::Vector4::new(a0[axis], a1[axis], a2[axis], a3[axis]);
            let b = nalgebra::Vector4::new(x0[axis], v0[axis], x1[axis], v1[axis]);
            close("boundary residual", (m * a - b).amax(), 0.0, 1e-12)?;
        }
    }
    Ok(())
}

fn recursion_forward_replay() -> Check {
    let omega = 4.3;
    let zmps = [Vector2::new(0.0, 0.06), Vector2::new(0.2, -0.06), Vector2::new(0.4, 0.06), Vector2::new(0.6, -0.06)];
    let durations = [1.2, 1.0, 1.0, 1.0];
    let terminal = zmps[3];
    let xi0 = backward_recursion(&zmps, &durations, omega, &terminal);
    // Forward: each initial DCM, flowed for its step, lands on the next one.
    for k in 0..zmps.len() {
        let end = zmps[k] + (xi0[k] - zmps[k]) * (omega * durations[k]).exp();
        let next = if k + 1 < zmps.len() { xi0[k + 1] } else { terminal };
        close("ξ at step end", (end - next).amax(), 0.0, 1e-12)?;
    }
    close("last step", (xi0[3] - terminal).amax(), 0.0, 0.0)
}

fn dcm_closed_loop_rate() -> Check {
    let omega = 3.0;
    let dt = 1e-3;
    for kp in [1.5, 2.0, 3.0] {
        let gains = GainSet::scalar(kp, 0.01, 1.0, 6.0, omega).map_err(|e| e.to_string())?;
        let integral = IntegralState::default();
        let xi_ref = Vector2::zeros();
        let mut state = LipmState::at_rest(Vector2::new(0.05, 0.0));
        let steps = 500;
        for _ in 0..steps {
            let xi = dcm_from_state(&state, omega);
            let zmp = dcm_controller(&xi, &xi_ref, &Vector2::zeros(), &integral, &gains);
            state = lipm_step(&state, &zmp, omega, dt);
        }
        let e = dcm_from_state(&state, omega).norm();
        let rate = (0.05 / e).ln() / (steps as f64 * dt);
        let want = omega * (kp - 1.0);
        if (rate - want).abs() > 0.05 * want {
            return Err(format!("k_p {kp}: decay rate {rate}, want {want}"));
        }
    }
    Ok(())
}

fn zmp_com_scratch() -> Check {
    let mut r = rng(15);
    for _ in 0..50 {
        let (kz, kc) = (r.gen_range(0.1..4.0), r.gen_range(4.5..10.0));
        let gains = GainSet::scalar(2.0, 0.01, kz, kc, 4.3).map_err(|e| e.to_string())?;
        let v: Vec<Vector2<f64>> = (0..5).map(|_| rand_vec2(&mut r, 1.0)).collect();
        let got = zmp_com_controller(&v[0], &v[1], &v[2], &v[3], &v[4], &gains);
        for i in 0..2 {
            let want = v[0][i] - kz * (v[1][i] - v[2][i]) + kc * (v[3][i] - v[4][i]);
            close("ẋ*", got[i], want, 1e-14)?;
        }
    }
    Ok(())
}

fn lipm_cosh_sinh() -> Check {
    let s = lipm_step(&LipmState::at_rest(Vector2::new(0.01, 0.0)), &Vector2::zeros(), 3.0, 0.1);
    close("x", s.pos.x, 0.01 * 0.3_f64.cosh(), 1e-17)?;
    close("ẋ", s.vel.x, 0.01 * 3.0 * 0.3_f64.sinh(), 1e-17)?;
    close("x printed", s.pos.x, 0.0104534, 5e-8)?;
    close("ẋ printed", s.vel.x, 0.0091356, 5e-8)
}

fn lipm_dcm_identity() -> Check {
    let mut r = rng(16);
    for _ in 0..100 {
        let s = LipmState { pos: rand_vec2(&mut r, 0.2), vel: rand_vec2(&mut r, 0.5) };
        let zmp = rand_vec2(&mut r, 0.2);
        let (omega, dt) = (r.gen_range(2.0..6.0), r.gen_range(0.001..0.1));
        let after = dcm_from_state(&lipm_step(&s, &zmp, omega, dt), omega);
        let want = zmp + (dcm_from_state(&s, omega) - zmp) * (omega * dt).exp();
        close("ξ(dt)", (after - want).amax(), 0.0, 1e-12)?;
    }
    Ok(())
}

fn torso_small_angle() -> Check {
    let mut r = rng(17);
    let target = rand_rotation(&mut r);
    let v = desired_torso_velocity(&(Rotation3::rot_z(1e-6) * target), &target, &Matrix3::identity());
    close("x", v.x, 0.0, 1e-15)?;
    close("y", v.y, 0.0, 1e-15)?;
    close("z", v.z, -1e-6, 1e-15)
}

fn gains(r: &mut ChaCha8Rng) -> PoseGains {
    let spd = |r: &mut ChaCha8Rng| {
        let a = Matrix3::from_fn(|_, _| r.gen_range(-1.0..1.0));
        a * a.transpose() + Matrix3::identity()
    };
    PoseGains { kp: spd(r), ki: spd(r), kw: spd(r) }
}

fn hand_foot_com_scratch() -> Check {
    let mut r = rng(18);
    for _ in 0..50 {
        let g = gains(&mut r);
        let (pose, target) = (rand_transform(&mut r), rand_transform(&mut r));
        let integral = rand_vec3(&mut r, 0.1);
        let e = pose.translation - target.translation;
        let rot = vee_of_skew(&(pose.rotation.matrix() * target.rotation.matrix().transpose()));
        for convention in [HandErrorConvention::AsPrinted, HandErrorConvention::Corrective] {
            let sign = if convention == HandErrorConvention::AsPrinted { 1.0 } else { -1.0 };
            let h = desired_hand_velocity(&pose, &target, &integral, &g, convention);
            close("hand linear", (h.linear - (g.kp * e + g.ki * integral) * sign).amax(), 0.0, 1e-14)?;
            close("hand angular", (h.angular - g.kw * rot * sign).amax(), 0.0, 1e-14)?;
        }
        let ff = rand_vec3(&mut r, 0.3);
        let f = desired_foot_velocity(&pose, &target, &ff, &integral, &g);
        close("foot linear", (f.linear - (ff - g.kp * e - g.ki * integral)).amax(), 0.0, 1e-14)?;
        close("foot angular", (f.angular + g.kw * rot).amax(), 0.0, 1e-14)?;

        let (xd, x, xs) = (rand_vec3(&mut r, 0.3), rand_vec3(&mut r, 0.3), rand_vec3(&mut r, 0.3));
        let c = desired_com_velocity(&xd, &x, &xs, &integral, &g.kp, &g.ki);
        close("CoM", (c - (xd - g.kp * (x - xs) - g.ki * integral)).amax(), 0.0, 1e-14)?;
    }
    Ok(())
}

const PENDULUM: &str = r#"
name = "pendulum"
[[links]]
name = "base"
mass = 1.0
[[links]]
name = "bob"
mass = 0.5
com = [0.0, 0.0, -0.5]
[[joints]]
name = "swing"
parent = "base"
child = "bob"
axis = [0.0, 1.0, 0.0]
limits = [-1.5, 1.5]
velocity_limit = 3.0
[frames]
base = { link = "base" }
"#;

fn pendulum_kkt() -> Check {
    // Torso task on the base angular rows, posture on the joint, no
    // constraints: base angular velocity equals the torso target, the joint
    // equals ṡ*, and the unconstrained linear part is zero.
    let model = load_model(PENDULUM).map_err(|e| e.to_string())?;
    let kin = Kinematics::compute(&model, &RobotState::new(Transform::identity(), DVector::from_vec(vec![0.4])))
        .map_err(|e| e.to_string())?;
    let jt = kin.frame_jacobian(model.frame_index("base").map_err(|e| e.to_string())?).rows(3, 3).into_owned();
    let mut ts = TaskSet::new(7);
    ts.add_soft("torso", jt, DVector::from_vec(vec![0.1, -0.2, 0.05]), DMatrix::identity(3, 3))
        .map_err(|e| e.to_string())?;
    ts.add_postural(DVector::from_vec(vec![0.7]), DMatrix::identity(1, 1)).map_err(|e| e.to_string())?;
    let nu = solve(&ts).map_err(|e| e.to_string())?.nu;
    let want = DVector::from_vec(vec![0.0, 0.0, 0.0, 0.1, -0.2, 0.05, 0.7]);
    close("ν", (nu - want).amax(), 0.0, 1e-8)
}

fn biped_kkt() -> Check {
    for seed in 0..10 {
        let ts = common::Problem::random(seed).taskset();
        let sol = solve(&ts).map_err(|e| e.to_string())?;
        let reference = common::qp_oracle(&ts);
        close("ν vs minimizer", (&sol.nu - &reference).amax(), 0.0, 1e-6)?;
        close("objective", sol.objective, ts.objective(&reference), 1e-6 * (1.0 + sol.objective))?;
    }
    Ok(())
}

fn dcm_controller_feedthrough() -> Check {
    let g = GainSet::new(Matrix2::new(2.0, 0.3, 0.3, 3.0), Matrix2::identity() * 0.01, Matrix2::identity(), Matrix2::identity() * 6.0, 4.3)
        .map_err(|e| e.to_string())?;
    let mut r = rng(19);
    for _ in 0..50 {
        let (xi, xr, xrd) = (rand_vec2(&mut r, 0.2), rand_vec2(&mut r, 0.2), rand_vec2(&mut r, 0.5));
        let integral = IntegralState { value: rand_vec2(&mut r, 0.05), bound: 1.0 };
        let got = dcm_controller(&xi, &xr, &xrd, &integral, &g);
        let e = xi - xr;
        let want = Vector2::new(
            xr.x - xrd.x / 4.3 + 2.0 * e.x + 0.3 * e.y + 0.01 * integral.value.x,
            xr.y - xrd.y / 4.3 + 0.3 * e.x + 3.0 * e.y + 0.01 * integral.value.y,
        );
        close("r_zmp_ref", (got - want).amax(), 0.0, 1e-14)?;
    }
    Ok(())
}

fn heading_rotation_is_rz() -> Check {
    let mut r = rng(20);
    for _ in 0..20 {
        let t = r.gen_range(-4.0..4.0);
        let m = rot_z(t);
        let want = Matrix3::new(t.cos(), -t.sin(), 0.0, t.sin(), t.cos(), 0.0, 0.0, 0.0, 1.0);
        close("rot_z", (m.matrix() - want).amax(), 0.0, 1e-15)?;
    }
    Ok(())
}

pub fn all() -> Vec<(&'static str, Check)> {
    let checks: [(&'static str, fn() -> Check); 26] = [
        ("orientation error small angle", orientation_small_angle),
        ("orientation error antisymmetry", orientation_antisymmetry),
        ("desk biped joint count", joint_count),
        ("zero pose mount chain", zero_pose_chain),
        ("Jacobians vs central differences", fd_jacobians),
        ("CoM and FK vs numpy oracle", com_golden),
        ("treadmill command scalar", treadmill_scalar),
        ("hand and head targets vs 4x4 products", hand_target_matrix_product),
        ("unicycle straight line", unicycle_straight),
        ("unicycle turn in place", unicycle_turn),
        ("DCM single support scalar", dcm_ss_scalar),
        ("DCM single support derivative", dcm_ss_derivative),
        ("Hermite example", hermite_example),
        ("Hermite boundary residual", hermite_residual),
        ("backward recursion forward replay", recursion_forward_replay),
        ("DCM closed-loop decay rate", dcm_closed_loop_rate),
        ("DCM controller scratch", dcm_controller_feedthrough),
        ("ZMP-CoM controller scratch", zmp_com_scratch),
        ("LIPM cosh/sinh", lipm_cosh_sinh),
        ("LIPM flow and DCM exponential", lipm_dcm_identity),
        ("torso velocity small angle", torso_small_angle),
        ("hand, foot and CoM targets scratch", hand_foot_com_scratch),
        ("pendulum KKT", pendulum_kkt),
        ("biped KKT vs null-space minimizer", biped_kkt),
        ("rot_z entries", heading_rotation_is_rz),
        ("treadmill norm", || {
            close("‖c‖", treadmill_to_com_command(0.7, 1.0, -2.0).norm(), 0.7, 1e-15)
        }),
    ];
    checks.iter().map(|(name, f)| (*name, f())).collect()
}
