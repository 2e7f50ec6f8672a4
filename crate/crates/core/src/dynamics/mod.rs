//! Rigid-body dynamics of the chain: inertia matrix, Coriolis/centrifugal and
//! gravity torques, friction, and the forward integrator of the true plant.
//!
//! Everything is evaluated with one recursive Newton–Euler pass
//! ([`inverse_dynamics`]): the bias vector is a zero-acceleration pass and
//! the inertia matrix is assembled column by column from unit-acceleration
//! probes. [`oracle`] holds an independent composite-rigid-body evaluation of
//! the inertia matrix used to cross-check it.

pub mod oracle;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::kinematics::link_frames;
use crate::model::ManipulatorModel;

/// Velocity scale of the smoothed sign `tanh(q̇ / ε)` applied to Coulomb
/// friction (rad/s).
pub const FRICTION_SMOOTHING: f64 = 1e-3;

/// Joint positions, velocities and accelerations.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    pub q: DVector<f64>,
    pub dq: DVector<f64>,
    pub ddq: DVector<f64>,
}

impl JointState {
    pub fn at_rest(q: DVector<f64>) -> Self {
        let n = q.len();
        Self {
            q,
            dq: DVector::zeros(n),
            ddq: DVector::zeros(n),
        }
    }

    pub fn new(q: DVector<f64>, dq: DVector<f64>) -> Self {
        let n = q.len();
        Self {
            q,
            dq,
            ddq: DVector::zeros(n),
        }
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(&self.dq).chain(&self.ddq).all(|x| x.is_finite())
    }
}

/// The terms of the joint-space equation of motion at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsTerms {
    pub mass: DMatrix<f64>,
    /// `C(q, q̇) q̇ + G(q)`
    pub bias: DVector<f64>,
    pub friction: DVector<f64>,
}

/// Per-link geometry in the base frame at one configuration.
pub(crate) struct ChainGeometry {
    pub axis: Vec<Vector3<f64>>,
    /// Point on joint `i`'s axis (origin of frame `i-1`).
    pub joint_origin: Vec<Vector3<f64>>,
    /// Origin of link `i`'s own frame.
    pub link_origin: Vec<Vector3<f64>>,
    pub com: Vec<Vector3<f64>>,
    pub inertia: Vec<Matrix3<f64>>,
}

impl ChainGeometry {
    pub fn new(model: &ManipulatorModel, q: &[f64]) -> Self {
        let frames = link_frames(model, q);
        let n = model.n();
        let mut g = ChainGeometry {
            axis: Vec::with_capacity(n),
            joint_origin: Vec::with_capacity(n),
            link_origin: Vec::with_capacity(n),
            com: Vec::with_capacity(n),
            inertia: Vec::with_capacity(n),
        };
        for (i, joint) in model.joints.iter().enumerate() {
            let prev = &frames[i];
            let cur = &frames[i + 1];
            let rot: Matrix3<f64> = cur.fixed_view::<3, 3>(0, 0).into_owned();
            let origin: Vector3<f64> = cur.fixed_view::<3, 1>(0, 3).into_owned();
            g.axis.push(prev.fixed_view::<3, 1>(0, 2).into_owned());
            g.joint_origin.push(prev.fixed_view::<3, 1>(0, 3).into_owned());
            g.link_origin.push(origin);
            g.com.push(origin + rot * joint.com);
            g.inertia.push(rot * joint.inertia * rot.transpose());
        }
        g
    }
}

/// Recursive Newton–Euler over precomputed geometry. `base_accel` is the
/// linear acceleration of the base origin (set to `-gravity` to fold gravity
/// in). Includes gear-reflected motor inertia, excludes friction.
fn rne(
    model: &ManipulatorModel,
    geo: &ChainGeometry,
    dq: &[f64],
    ddq: &[f64],
    base_accel: Vector3<f64>,
) -> DVector<f64> {
    let n = model.n();
    let mut omega = Vec::with_capacity(n);
    let mut alpha = Vec::with_capacity(n);
    let mut com_accel = Vec::with_capacity(n);

    let mut w = Vector3::zeros();
    let mut dw = Vector3::zeros();
    // acceleration of the current joint-axis point
    let mut a = base_accel;
    for i in 0..n {
        let z = geo.axis[i];
        let spin = z * dq[i];
        dw += z * ddq[i] + w.cross(&spin);
        w += spin;
        let rc = geo.com[i] - geo.joint_origin[i];
        com_accel.push(a + dw.cross(&rc) + w.cross(&w.cross(&rc)));
        let r = geo.link_origin[i] - geo.joint_origin[i];
        a += dw.cross(&r) + w.cross(&w.cross(&r));
        omega.push(w);
        alpha.push(dw);
    }

    let mut tau = DVector::zeros(n);
    let mut f_next = Vector3::zeros();
    let mut n_next = Vector3::zeros();
    for i in (0..n).rev() {
        let m = model.joints[i].link_mass;
        let inertia = &geo.inertia[i];
        let force = m * com_accel[i];
        let moment = inertia * alpha[i] + omega[i].cross(&(inertia * omega[i]));
        let o = geo.joint_origin[i];
        // moment about the joint-axis point
        let n_i = moment
            + (geo.com[i] - o).cross(&force)
            + n_next
            + (geo.link_origin[i] - o).cross(&f_next);
        let f_i = force + f_next;
        tau[i] = geo.axis[i].dot(&n_i) + model.joints[i].reflected_inertia() * ddq[i];
        f_next = f_i;
        n_next = n_i;
    }
    tau
}

fn check_len(model: &ManipulatorModel, what: &'static str, v: &[f64]) {
    assert_eq!(v.len(), model.n(), "{what} must have one entry per joint");
}

/// `M(q) q̈ + C(q, q̇) q̇ + G(q)`, with gravity optional.
pub fn inverse_dynamics(
    model: &ManipulatorModel,
    q: &[f64],
    dq: &[f64],
    ddq: &[f64],
    with_gravity: bool,
) -> DVector<f64> {
    check_len(model, "q", q);
    check_len(model, "dq", dq);
    check_len(model, "ddq", ddq);
    let geo = ChainGeometry::new(model, q);
    let base = if with_gravity {
        -model.gravity
    } else {
        Vector3::zeros()
    };
    rne(model, &geo, dq, ddq, base)
}

fn mass_from_geometry(model: &ManipulatorModel, geo: &ChainGeometry) -> DMatrix<f64> {
    let n = model.n();
    let zero = vec![0.0; n];
    let mut unit = vec![0.0; n];
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        unit[j] = 1.0;
        let col = rne(model, geo, &zero, &unit, Vector3::zeros());
        m.set_column(j, &col);
        unit[j] = 0.0;
    }
    // probes are symmetric only up to rounding
    (&m + m.transpose()) * 0.5
}

/// Joint-space inertia matrix, including `R²·J_motor` on the diagonal.
pub fn inertia_matrix(model: &ManipulatorModel, q: &[f64]) -> DMatrix<f64> {
    check_len(model, "q", q);
    mass_from_geometry(model, &ChainGeometry::new(model, q))
}

/// `C(q, q̇) q̇ + G(q)`, friction excluded.
pub fn bias_forces(model: &ManipulatorModel, q: &[f64], dq: &[f64]) -> DVector<f64> {
    let zero = vec![0.0; model.n()];
    inverse_dynamics(model, q, dq, &zero, true)
}

/// Gravity torques `G(q)`.
pub fn gravity_torque(model: &ManipulatorModel, q: &[f64]) -> DVector<f64> {
    let zero = vec![0.0; model.n()];
    inverse_dynamics(model, q, &zero, &zero, true)
}

/// Coulomb-plus-viscous friction on the link and motor sides, reflected to
/// the joint. Odd in `dq`.
pub fn friction_torque(model: &ManipulatorModel, dq: &[f64]) -> DVector<f64> {
    check_len(model, "dq", dq);
    DVector::from_iterator(
        model.n(),
        model.joints.iter().zip(dq).map(|(j, &v)| {
            let motor_v = j.gear_ratio * v;
            let link = j.link_coulomb * smooth_sign(v) + j.link_viscous * v;
            let motor = j.motor_coulomb * smooth_sign(motor_v) + j.motor_viscous * motor_v;
            link + j.gear_ratio * motor
        }),
    )
}

fn smooth_sign(v: f64) -> f64 {
    (v / FRICTION_SMOOTHING).tanh()
}

pub fn dynamics_terms(model: &ManipulatorModel, q: &[f64], dq: &[f64]) -> DynamicsTerms {
    check_len(model, "q", q);
    check_len(model, "dq", dq);
    let geo = ChainGeometry::new(model, q);
    let zero = vec![0.0; model.n()];
    DynamicsTerms {
        mass: mass_from_geometry(model, &geo),
        bias: rne(model, &geo, dq, &zero, -model.gravity),
        friction: friction_torque(model, dq),
    }
}

/// Solves `M q̈ = τ − C q̇ − G − F_f − d` for `q̈`.
pub fn forward_dynamics(
    model: &ManipulatorModel,
    state: &JointState,
    tau: &DVector<f64>,
    disturbance: &DVector<f64>,
) -> Result<DVector<f64>> {
    let terms = dynamics_terms(model, state.q.as_slice(), state.dq.as_slice());
    let rhs = tau - &terms.bias - &terms.friction - disturbance;
    let chol = terms.mass.cholesky().ok_or(Error::SingularInertia)?;
    Ok(chol.solve(&rhs))
}

/// One semi-implicit Euler step: velocity first, then position with the new
/// velocity. The returned state carries the acceleration used.
pub fn step_plant(
    model: &ManipulatorModel,
    state: &JointState,
    tau: &DVector<f64>,
    disturbance: &DVector<f64>,
    dt: f64,
) -> Result<JointState> {
    assert!(dt > 0.0, "plant step must be positive");
    let ddq = forward_dynamics(model, state, tau, disturbance)?;
    let dq = &state.dq + &ddq * dt;
    let q = &state.q + &dq * dt;
    Ok(JointState { q, dq, ddq })
}

/// One step of the sampled model `q⁺ = q + T q̇`, `q̇⁺ = q̇ + T q̈`
/// (explicit Euler at the controller interval).
pub fn step_discrete_model(
    model: &ManipulatorModel,
    state: &JointState,
    tau: &DVector<f64>,
    disturbance: &DVector<f64>,
    dt: f64,
) -> Result<JointState> {
    assert!(dt > 0.0, "sample interval must be positive");
    let ddq = forward_dynamics(model, state, tau, disturbance)?;
    let q = &state.q + &state.dq * dt;
    let dq = &state.dq + &ddq * dt;
    Ok(JointState { q, dq, ddq })
}

/// `½ q̇ᵀ M(q) q̇`, including reflected motor inertia.
pub fn kinetic_energy(model: &ManipulatorModel, q: &[f64], dq: &[f64]) -> f64 {
    let m = inertia_matrix(model, q);
    let v = DVector::from_column_slice(dq);
    0.5 * v.dot(&(m * &v))
}
