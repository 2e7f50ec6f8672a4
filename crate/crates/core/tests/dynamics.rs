use dhtsmc::dynamics::{
    bias_forces, forward_dynamics, friction_torque, gravity_torque, inertia_matrix,
    inverse_dynamics, kinetic_energy, oracle::inertia_matrix_crba, step_plant, JointState,
};
use dhtsmc::model::{DhRow, JointParams, ManipulatorModel};
use nalgebra::{DMatrix, DVector, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_q(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-3.0..3.0)).collect()
}

fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max() / b.abs().max()
}

/// Two-link planar arm with off-axis centres of mass and full tensors.
fn two_link() -> ManipulatorModel {
    let mut j1 = JointParams::point_mass(1.3);
    j1.com = Vector3::new(-0.2, 0.01, 0.02);
    j1.inertia = DMatrix::from_row_slice(3, 3, &[0.02, 0.001, 0.0, 0.001, 0.03, 0.0, 0.0, 0.0, 0.04])
        .fixed_view::<3, 3>(0, 0)
        .into_owned();
    j1.gear_ratio = 30.0;
    j1.motor_inertia = 2e-5;
    let mut j2 = JointParams::point_mass(0.8);
    j2.com = Vector3::new(-0.15, 0.0, 0.01);
    ManipulatorModel::new(
        "two-link",
        vec![DhRow::new(0.3, 0.4, 0.1, 0.0), DhRow::new(0.0, 0.3, 0.0, 0.2)],
        vec![j1, j2],
        Vector3::new(0.0, 0.0, -9.81),
    )
    .unwrap()
}

fn pendulum() -> ManipulatorModel {
    ManipulatorModel::new(
        "pendulum",
        vec![DhRow::new(0.0, 0.7, 0.0, 0.0)],
        vec![JointParams::point_mass(1.5)],
        Vector3::new(0.0, -9.81, 0.0),
    )
    .unwrap()
}

#[test]
fn rne_and_crba_agree_for_one_two_and_six_joints() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for model in [pendulum(), two_link(), ManipulatorModel::fanuc_lr_mate_200id()] {
        for _ in 0..100 {
            let q = random_q(&mut rng, model.n());
            let rne = inertia_matrix(&model, &q);
            let crba = inertia_matrix_crba(&model, &q);
            assert!(rel_diff(&rne, &crba) < 1e-8, "{}: {}", model.name, rel_diff(&rne, &crba));
        }
    }
}

#[test]
fn inertia_matrix_is_symmetric_positive_definite() {
    let model = ManipulatorModel::fanuc_lr_mate_200id();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10_000 {
        let q = random_q(&mut rng, 6);
        let m = inertia_matrix(&model, &q);
        assert!((&m - m.transpose()).abs().max() < 1e-9);
        assert!(m.cholesky().is_some());
    }
}

#[test]
fn pendulum_free_fall_acceleration() {
    let p = pendulum();
    for q in [0.0, 0.5, -2.0] {
        let s = JointState::at_rest(DVector::from_element(1, q));
        let ddq = forward_dynamics(&p, &s, &DVector::zeros(1), &DVector::zeros(1)).unwrap();
        assert!((ddq[0] + 9.81 / 0.7 * q.cos()).abs() < 1e-12);
    }
}

#[test]
fn balanced_torque_gives_zero_acceleration() {
    let model = ManipulatorModel::fanuc_lr_mate_200id();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let q = random_q(&mut rng, 6);
        let dq = random_q(&mut rng, 6);
        let d = DVector::from_vec(random_q(&mut rng, 6));
        let tau = bias_forces(&model, &q, &dq) + friction_torque(&model, &dq) + &d;
        let s = JointState::new(DVector::from_vec(q), DVector::from_vec(dq));
        let ddq = forward_dynamics(&model, &s, &tau, &d).unwrap();
        assert!(ddq.amax() < 1e-9, "{}", ddq.amax());
    }
}

#[test]
fn forward_dynamics_residual() {
    let model = ManipulatorModel::fanuc_lr_mate_200id();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let q = random_q(&mut rng, 6);
        let dq = random_q(&mut rng, 6);
        let tau = DVector::from_vec(random_q(&mut rng, 6)) * 50.0;
        let d = DVector::from_vec(random_q(&mut rng, 6));
        let s = JointState::new(DVector::from_column_slice(&q), DVector::from_column_slice(&dq));
        let ddq = forward_dynamics(&model, &s, &tau, &d).unwrap();
        let residual = inertia_matrix(&model, &q) * &ddq
            + bias_forces(&model, &q, &dq)
            + friction_torque(&model, &dq)
            + &d
            - &tau;
        assert!(residual.amax() < 1e-9, "{}", residual.amax());
    }
}

#[test]
fn inverse_dynamics_is_linear_in_acceleration() {
    let model = two_link();
    let q = [0.4, -1.1];
    let dq = [0.3, 0.9];
    let ddq = [2.0, -1.0];
    let full = inverse_dynamics(&model, &q, &dq, &ddq, true);
    let split = inertia_matrix(&model, &q) * DVector::from_column_slice(&ddq)
        + bias_forces(&model, &q, &dq);
    assert!((full - split).amax() < 1e-12);
}

#[test]
fn coriolis_skew_symmetry() {
    // q̇ᵀ(Ṁ − 2C)q̇ = 0 with Ṁ from a central difference along q̇
    let model = ManipulatorModel::fanuc_lr_mate_200id().with_gravity(Vector3::zeros());
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let h = 1e-6;
    for _ in 0..200 {
        let q = random_q(&mut rng, 6);
        let dq = random_q(&mut rng, 6);
        let v = DVector::from_column_slice(&dq);
        let qp: Vec<f64> = q.iter().zip(&dq).map(|(a, b)| a + h * b).collect();
        let qm: Vec<f64> = q.iter().zip(&dq).map(|(a, b)| a - h * b).collect();
        let m_dot = (inertia_matrix(&model, &qp) - inertia_matrix(&model, &qm)) / (2.0 * h);
        let c_dq = bias_forces(&model, &q, &dq);
        let passivity = v.dot(&(m_dot * &v)) - 2.0 * v.dot(&c_dq);
        assert!(passivity.abs() < 1e-7, "{passivity}");
    }
}

#[test]
fn kinetic_energy_conserved_without_friction_or_gravity() {
    let model = ManipulatorModel::fanuc_lr_mate_200id()
        .frictionless()
        .with_gravity(Vector3::zeros());
    let mut s = JointState::new(
        DVector::from_vec(vec![0.1, -0.3, 0.4, 0.2, -1.2, 0.5]),
        DVector::from_vec(vec![0.6, -0.4, 0.8, 1.0, -0.7, 1.5]),
    );
    let e0 = kinetic_energy(&model, s.q.as_slice(), s.dq.as_slice());
    let zero = DVector::zeros(6);
    let dt = 0.25e-3;
    let mut worst: f64 = 0.0;
    for _ in 0..4000 {
        s = step_plant(&model, &s, &zero, &zero, dt).unwrap();
        let e = kinetic_energy(&model, s.q.as_slice(), s.dq.as_slice());
        worst = worst.max(((e - e0) / e0).abs());
    }
    assert!(worst < 1e-3, "relative drift {worst}");
}

#[test]
fn semi_implicit_euler_converges_first_order() {
    let p = pendulum();
    let run = |dt: f64| {
        let mut s = JointState::at_rest(DVector::from_element(1, 0.3));
        let steps = (0.1 / dt).round() as usize;
        for _ in 0..steps {
            s = step_plant(&p, &s, &DVector::zeros(1), &DVector::zeros(1), dt).unwrap();
        }
        s.q[0]
    };
    let (a, b, c) = (run(1e-3), run(0.5e-3), run(0.25e-3));
    let ratio = (a - b).abs() / (b - c).abs();
    assert!((ratio - 2.0).abs() < 0.2, "refinement ratio {ratio}");
}

proptest! {
    #[test]
    fn gravity_torque_matches_potential_gradient(q in prop::collection::vec(-3.0f64..3.0, 6)) {
        let model = ManipulatorModel::fanuc_lr_mate_200id();
        let potential = |q: &[f64]| -> f64 {
            // V = -Σ m gᵀ c
            let frames = dhtsmc::kinematics::link_frames(&model, q);
            model.joints.iter().enumerate().map(|(i, j)| {
                let t = &frames[i + 1];
                let rot = t.fixed_view::<3, 3>(0, 0).into_owned();
                let o: Vector3<f64> = t.fixed_view::<3, 1>(0, 3).into_owned();
                -j.link_mass * model.gravity.dot(&(o + rot * j.com))
            }).sum()
        };
        let g = gravity_torque(&model, &q);
        let h = 1e-6;
        for i in 0..6 {
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[i] += h;
            qm[i] -= h;
            let fd = (potential(&qp) - potential(&qm)) / (2.0 * h);
            prop_assert!((fd - g[i]).abs() < 1e-6, "joint {}: {} vs {}", i, fd, g[i]);
        }
    }
}
