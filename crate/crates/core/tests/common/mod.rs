//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use telewalk::bundled::desk_biped;
use telewalk::model::{Kinematics, RobotModel, RobotState};
use telewalk::spatial::{skew, vee, Rotation3, Transform};
use telewalk::tolerance::QP_REGULARIZATION;
use telewalk::wbqp::TaskSet;

/// CoM of the displaced [`oracle_state`], from the numpy implementation.
pub const ORACLE_COM: [f64; 3] = [0.11725875556065923, -0.19812881272397792, 0.5240142722296699];

pub const HOME_COM: [f64; 3] = [0.01355584872182318, 0.0, 0.02430113269352011];

pub const HOME_LEFT_HAND: [f64; 3] = [0.1365406779224202, 0.14396633558111865, 0.05698859488398436];

/// Frame name, position and row-major rotation at [`oracle_state`].
pub const ORACLE_FRAMES: [(&str, [f64; 3], [f64; 9]); 3] = [
    (
        "l_hand",
        [0.18213125708764621, -0.015827653421947932, 0.5886026118440767],
        [
            0.6448279835787939, -0.4593859489741203, -0.6108693980539976,
            0.07272985492189121, 0.8324765640322939, -0.549265999803398,
            0.7608595401233708, 0.30975364440492525, 0.57021525758359,
        ],
    ),
    (
        "r_foot",
        [0.1102612928719022, -0.1619601321227065, -0.003668639184312983],
        [
            0.9285014051855596, -0.35559737039209566, -0.10693760208022134,
            0.33181905408253193, 0.9238241919502452, -0.19090567753540003,
            0.16667710075536687, 0.14177225588140707, 0.9757660434479579,
        ],
    ),
    (
        "head",
        [0.14512812529994906, -0.25221762012955906, 0.8460804519210703],
        [
            0.9500976821503073, -0.31161085571276315, -0.014596882357979431,
            0.30179294778580673, 0.9299927809148173, -0.2098438565054448,
            0.07896461890851167, 0.1949669255240076, 0.9776259442712993,
        ],
    ),
];

pub fn oracle_state(model: &RobotModel) -> RobotState {
    let base = Transform::new(Rotation3::from_rpy(0.1, -0.05, 0.3), Vector3::new(0.1, -0.2, 0.5));
    // Offsets follow the joint order of the asset file; the model stores
    // joints breadth-first, so they are assigned by name.
    const FILE_ORDER: [&str; 25] = [
        "l_hip_yaw", "l_hip_roll", "l_hip_pitch", "l_knee", "l_ankle_pitch", "l_ankle_roll",
        "r_hip_yaw", "r_hip_roll", "r_hip_pitch", "r_knee", "r_ankle_pitch", "r_ankle_roll",
        "torso_yaw", "torso_roll", "torso_pitch", "neck_yaw", "neck_pitch",
        "l_shoulder_pitch", "l_shoulder_roll", "l_shoulder_yaw", "l_elbow",
        "r_shoulder_pitch", "r_shoulder_roll", "r_shoulder_yaw", "r_elbow",
    ];
    let mut q = model.home_posture();
    for (i, name) in FILE_ORDER.iter().enumerate() {
        q[model.joint_index(name).unwrap()] += 0.1 * ((i + 1) as f64).sin();
    }
    RobotState::new(base, q)
}

pub fn random_state(m: &RobotModel, rng: &mut ChaCha8Rng) -> RobotState {
    let base = Transform::new(
        Rotation3::from_rpy(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-3.0..3.0)),
        Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.0..1.0)),
    );
    let q = DVector::from_iterator(
        m.dofs(),
        m.joints().iter().map(|j| rng.gen_range(j.lower.max(-2.0)..j.upper.min(2.0))),
    );
    RobotState::new(base, q)
}

pub fn nudged(state: &RobotState, dir: usize, h: f64) -> RobotState {
    let mut s = state.clone();
    let mut nu = DVector::zeros(state.velocity.len());
    nu[dir] = 1.0;
    s.integrate(&nu, h);
    s
}

pub fn fd_frame_jacobian(m: &RobotModel, state: &RobotState, frame: usize, h: f64) -> DMatrix<f64> {
    let n = state.velocity.len();
    let mut jac = DMatrix::zeros(6, n);
    for k in 0..n {
        let plus = Kinematics::compute(m, &nudged(state, k, h)).unwrap().frame_pose(frame);
        let minus = Kinematics::compute(m, &nudged(state, k, -h)).unwrap().frame_pose(frame);
        let lin = (plus.translation - minus.translation) / (2.0 * h);
        let r0 = *Kinematics::compute(m, state).unwrap().frame_pose(frame).rotation.matrix();
        let rdot = (plus.rotation.matrix() - minus.rotation.matrix()) / (2.0 * h);
        let ang = vee(&skew(&(rdot * r0.transpose()))).unwrap();
        jac.fixed_view_mut::<3, 1>(0, k).copy_from(&lin);
        jac.fixed_view_mut::<3, 1>(3, k).copy_from(&ang);
    }
    jac
}

pub fn fd_com_jacobian(m: &RobotModel, state: &RobotState, h: f64) -> DMatrix<f64> {
    let n = state.velocity.len();
    let mut jac = DMatrix::zeros(3, n);
    for k in 0..n {
        let plus = Kinematics::compute(m, &nudged(state, k, h)).unwrap().com();
        let minus = Kinematics::compute(m, &nudged(state, k, -h)).unwrap().com();
        jac.fixed_view_mut::<3, 1>(0, k).copy_from(&((plus - minus) / (2.0 * h)));
    }
    jac
}

/// Largest deviation between analytic and central-difference Jacobians
/// (frame and CoM) over `trials` random states.
pub fn worst_jacobian_error(seed: u64, trials: usize) -> f64 {
    let m = desk_biped();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames: Vec<usize> = ["l_hand", "r_hand", "l_foot", "r_foot", "head", "torso"]
        .iter()
        .map(|f| m.frame_index(f).unwrap())
        .collect();
    let mut worst: f64 = 0.0;
    for trial in 0..trials {
        let s = random_state(&m, &mut rng);
        let kin = Kinematics::compute(&m, &s).unwrap();
        let f = frames[trial % frames.len()];
        let err = (kin.frame_jacobian(f) - fd_frame_jacobian(&m, &s, f, 1e-6)).amax();
        let com_err = (kin.com_jacobian() - fd_com_jacobian(&m, &s, 1e-6)).amax();
        worst = worst.max(err).max(com_err);
    }
    worst
}

pub struct Problem {
    pub hard: Vec<(&'static str, DMatrix<f64>, DVector<f64>)>,
    pub soft: Vec<(&'static str, DMatrix<f64>, DVector<f64>, DMatrix<f64>)>,
}

impl Problem {
    pub fn random(seed: u64) -> Self {
        let model = desk_biped();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = RobotState::home(&model);
        for v in state.joint_positions.iter_mut() {
            *v += rng.gen_range(-0.3..0.3);
        }
        state.base_pose = Transform::new(
            Rotation3::from_rpy(rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2), rng.gen_range(-3.0..3.0)),
            Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.5),
        );
        let kin = Kinematics::compute(&model, &state).unwrap();
        let frame = |f: &str| kin.frame_jacobian(model.frame_index(f).unwrap());
        let mut rv = |k: usize| DVector::from_fn(k, |_, _| rng.gen_range(-0.5..0.5));
        let n = model.dofs();
        let mut posture = DMatrix::zeros(n, n + 6);
        posture.view_mut((0, 6), (n, n)).fill_with_identity();
        let hand_w = DMatrix::from_diagonal(&DVector::from_vec(vec![10.0, 10.0, 10.0, 1.0, 1.0, 1.0]));
        Self {
            hard: vec![
                ("com", kin.com_jacobian(), rv(3)),
                ("l_foot", frame("l_foot"), rv(6)),
                ("r_foot", frame("r_foot"), rv(6)),
            ],
            soft: vec![
                ("torso", frame("torso").rows(3, 3).into_owned(), rv(3), DMatrix::identity(3, 3)),
                ("l_hand", frame("l_hand"), rv(6), hand_w.clone()),
                ("r_hand", frame("r_hand"), rv(6), hand_w),
                ("posture", posture, rv(n), DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| 0.05 + (i % 4) as f64))),
            ],
        }
    }

    pub fn taskset(&self) -> TaskSet {
        let dim = self.hard[0].1.ncols();
        let mut ts = TaskSet::new(dim);
        for (name, j, v) in &self.hard {
            ts.add_hard(name, j.clone(), v.clone()).unwrap();
        }
        for (name, j, v, w) in &self.soft {
            ts.add_soft(name, j.clone(), v.clone(), w.clone()).unwrap();
        }
        ts
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            hard: self.hard.iter().map(|(n, j, v)| (*n, j.clone(), v * alpha)).collect(),
            soft: self.soft.iter().map(|(n, j, v, w)| (*n, j.clone(), v * alpha, w.clone())).collect(),
        }
    }
}

/// Orthonormal bases of range(Aᵀ) and null(A) for full-row-rank `A`.
pub fn split(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (m, n) = a.shape();
    // Columns of U span range(Aᵀ); complete them to an orthonormal basis of Rⁿ.
    let u = a.transpose().svd(true, false).u.unwrap();
    let mut basis = DMatrix::<f64>::identity(n, n);
    basis.view_mut((0, 0), (n, m)).copy_from(&u);
    let q = basis.qr().q();
    (q.columns(0, m).into_owned(), q.columns(m, n - m).into_owned())
}

/// Particular solution in range(Aᵀ) plus CG over the null space.
pub fn qp_oracle(ts: &TaskSet) -> DVector<f64> {
    let (a, b) = ts.constraints();
    let (h, g) = ts.cost();
    let n = ts.dim();
    let h = h + DMatrix::identity(n, n) * QP_REGULARIZATION;
    let m = a.nrows();
    let (range, z) = split(&a);
    let nu0 = &range * (&a * &range).lu().solve(&b).unwrap();

    let hz = z.transpose() * &h * &z;
    let rhs = -(z.transpose() * (&h * &nu0 + &g));
    let mut x = DVector::zeros(n - m);
    let mut r = rhs.clone();
    let mut p = r.clone();
    let mut rr = r.dot(&r);
    for _ in 0..20 * n {
        if rr.sqrt() < 1e-15 * (1.0 + rhs.norm()) {
            break;
        }
        let hp = &hz * &p;
        let step = rr / p.dot(&hp);
        x += &p * step;
        r -= &hp * step;
        let next = r.dot(&r);
        p = &r + &p * (next / rr);
        rr = next;
    }
    nu0 + z * x
}

