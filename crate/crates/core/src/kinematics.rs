//! Forward and inverse kinematics over the D-H chain, and ZYX Euler angles.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, Rotation3, UnitQuaternion, Vector3};

use crate::error::{Error, Result};
use crate::model::{DhRow, ManipulatorModel};

/// End-effector position and orientation in the base frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub rotation: Matrix3<f64>,
}

impl Pose {
    pub fn new(position: Vector3<f64>, rotation: Matrix3<f64>) -> Self {
        Self { position, rotation }
    }

    pub fn from_euler(position: Vector3<f64>, euler: EulerZyx) -> Self {
        Self::new(position, euler_zyx_to_rotation(euler))
    }

    pub fn identity() -> Self {
        Self::new(Vector3::zeros(), Matrix3::identity())
    }

    pub fn from_homogeneous(t: &Matrix4<f64>) -> Self {
        Self::new(
            t.fixed_view::<3, 1>(0, 3).into_owned(),
            t.fixed_view::<3, 3>(0, 0).into_owned(),
        )
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut t = Matrix4::identity();
        t.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        t.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.position);
        t
    }

    /// Max deviation of `RᵀR` from identity, and `|det R - 1|`.
    pub fn orthonormality_error(&self) -> (f64, f64) {
        let r = &self.rotation;
        let ortho = (r.transpose() * r - Matrix3::identity()).abs().max();
        (ortho, (r.determinant() - 1.0).abs())
    }

    /// Position distance (m) and rotation angle (rad) between two poses.
    pub fn distance(&self, other: &Pose) -> (f64, f64) {
        let dp = (self.position - other.position).norm();
        (dp, rotation_angle(&(self.rotation.transpose() * other.rotation)))
    }
}

/// Yaw about Z, then pitch about the new Y, then roll about the new X:
/// `R = Rz(yaw) · Ry(pitch) · Rx(roll)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EulerZyx {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

impl EulerZyx {
    pub const fn new(yaw: f64, pitch: f64, roll: f64) -> Self {
        Self { yaw, pitch, roll }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.yaw, self.pitch, self.roll]
    }
}

/// Returned by [`rotation_to_euler_zyx`] when the pitch is within `1e-9` of
/// ±π/2. Yaw and roll are then not separable; `euler` carries the split
/// with roll fixed to zero.
#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("gimbal lock (pitch {:.12} rad)", .euler.pitch)]
pub struct GimbalLock {
    pub euler: EulerZyx,
}

const GIMBAL_TOLERANCE: f64 = 1e-9;

pub fn euler_zyx_to_rotation(e: EulerZyx) -> Matrix3<f64> {
    let (sy, cy) = e.yaw.sin_cos();
    let (sp, cp) = e.pitch.sin_cos();
    let (sr, cr) = e.roll.sin_cos();
    Matrix3::new(
        cy * cp,
        cy * sp * sr - sy * cr,
        cy * sp * cr + sy * sr,
        sy * cp,
        sy * sp * sr + cy * cr,
        sy * sp * cr - cy * sr,
        -sp,
        cp * sr,
        cp * cr,
    )
}

pub fn rotation_to_euler_zyx(r: &Matrix3<f64>) -> Result<EulerZyx, GimbalLock> {
    let pitch = (-r[(2, 0)]).atan2(r[(0, 0)].hypot(r[(1, 0)]));
    if FRAC_PI_2 - pitch.abs() < GIMBAL_TOLERANCE {
        let yaw = (-r[(0, 1)]).atan2(r[(1, 1)]);
        return Err(GimbalLock {
            euler: EulerZyx::new(yaw, pitch.signum() * FRAC_PI_2, 0.0),
        });
    }
    Ok(EulerZyx::new(
        r[(1, 0)].atan2(r[(0, 0)]),
        pitch,
        r[(2, 1)].atan2(r[(2, 2)]),
    ))
}

/// Rotation angle of `r` in `[0, π]`.
pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    rotation_vector(r).norm()
}

/// Axis-angle vector of a rotation matrix.
pub fn rotation_vector(r: &Matrix3<f64>) -> Vector3<f64> {
    // via the quaternion, which stays well conditioned near angle π
    let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*r));
    q.scaled_axis()
}

/// Homogeneous transform of one D-H row at joint angle `q`.
pub fn dh_transform(row: &DhRow, q: f64) -> Matrix4<f64> {
    let (st, ct) = (q + row.theta_offset).sin_cos();
    let (sa, ca) = row.alpha.sin_cos();
    Matrix4::new(
        ct,
        -st * ca,
        st * sa,
        row.a * ct,
        st,
        ct * ca,
        -ct * sa,
        row.a * st,
        0.0,
        sa,
        ca,
        row.d,
        0.0,
        0.0,
        0.0,
        1.0,
    )
}

/// Base-frame transforms of frames `0..=n` (frame 0 is the base).
pub fn link_frames(model: &ManipulatorModel, q: &[f64]) -> Vec<Matrix4<f64>> {
    assert_eq!(q.len(), model.n(), "joint vector length");
    let mut frames = Vec::with_capacity(model.n() + 1);
    let mut t = Matrix4::identity();
    frames.push(t);
    for (row, &qi) in model.dh.iter().zip(q) {
        t *= dh_transform(row, qi);
        frames.push(t);
    }
    frames
}

pub fn forward_kinematics(model: &ManipulatorModel, q: &[f64]) -> Pose {
    let frames = link_frames(model, q);
    Pose::from_homogeneous(frames.last().expect("non-empty chain"))
}

/// 6×n geometric Jacobian; rows 0..3 linear, 3..6 angular, base frame.
pub fn geometric_jacobian(model: &ManipulatorModel, q: &[f64]) -> DMatrix<f64> {
    let frames = link_frames(model, q);
    jacobian_from_frames(&frames)
}

fn jacobian_from_frames(frames: &[Matrix4<f64>]) -> DMatrix<f64> {
    let n = frames.len() - 1;
    let tip: Vector3<f64> = frames[n].fixed_view::<3, 1>(0, 3).into_owned();
    let mut j = DMatrix::zeros(6, n);
    for (i, frame) in frames[..n].iter().enumerate() {
        // joint i+1 turns about z of frame i
        let z: Vector3<f64> = frame.fixed_view::<3, 1>(0, 2).into_owned();
        let o: Vector3<f64> = frame.fixed_view::<3, 1>(0, 3).into_owned();
        let v = z.cross(&(tip - o));
        j.fixed_view_mut::<3, 1>(0, i).copy_from(&v);
        j.fixed_view_mut::<3, 1>(3, i).copy_from(&z);
    }
    j
}

/// Damped least-squares settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkOptions {
    pub damping: f64,
    pub max_iterations: usize,
    /// Stop once both position (m) and orientation (rad) residuals are below.
    pub tolerance: f64,
    /// Largest joint change per iteration (rad).
    pub max_step: f64,
}

impl Default for IkOptions {
    fn default() -> Self {
        Self {
            damping: 1e-3,
            max_iterations: 200,
            tolerance: 1e-10,
            max_step: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IkSolution {
    pub q: DVector<f64>,
    pub iterations: usize,
    pub position_residual: f64,
    pub orientation_residual: f64,
}

/// Pose error twist `[p_target - p; rotvec(R_target Rᵀ)]` in the base frame.
pub fn pose_error(target: &Pose, current: &Pose) -> (Vector3<f64>, Vector3<f64>) {
    (
        target.position - current.position,
        rotation_vector(&(target.rotation * current.rotation.transpose())),
    )
}

pub fn inverse_kinematics(
    model: &ManipulatorModel,
    target: &Pose,
    q_seed: &[f64],
) -> Result<IkSolution> {
    inverse_kinematics_with(model, target, q_seed, &IkOptions::default())
}

pub fn inverse_kinematics_with(
    model: &ManipulatorModel,
    target: &Pose,
    q_seed: &[f64],
    opts: &IkOptions,
) -> Result<IkSolution> {
    let n = model.n();
    if q_seed.len() != n {
        return Err(Error::Dimension {
            what: "IK seed",
            expected: n,
            got: q_seed.len(),
        });
    }
    let mut q = DVector::from_column_slice(q_seed);
    project_limits(model, &mut q);
    let mut lambda = opts.damping;

    let evaluate = |q: &DVector<f64>| {
        let frames = link_frames(model, q.as_slice());
        let pose = Pose::from_homogeneous(&frames[n]);
        let (ep, ew) = pose_error(target, &pose);
        (frames, ep, ew)
    };
    let (mut frames, mut ep, mut ew) = evaluate(&q);
    for iter in 0..=opts.max_iterations {
        let (rp, rw) = (ep.norm(), ew.norm());
        if rp <= opts.tolerance && rw <= opts.tolerance {
            return Ok(IkSolution {
                q,
                iterations: iter,
                position_residual: rp,
                orientation_residual: rw,
            });
        }
        if iter == opts.max_iterations {
            break;
        }
        let j = jacobian_from_frames(&frames);
        let mut e = DVector::zeros(6);
        e.fixed_rows_mut::<3>(0).copy_from(&ep);
        e.fixed_rows_mut::<3>(3).copy_from(&ew);
        let jjt = &j * j.transpose();
        // Levenberg-style: shrink the damping after a successful step, grow
        // it and retry after a failed one
        loop {
            let damped = &jjt + DMatrix::identity(6, 6) * (lambda * lambda);
            let Some(chol) = damped.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let mut dq = j.transpose() * chol.solve(&e);
            let biggest = dq.amax();
            if biggest > opts.max_step {
                dq *= opts.max_step / biggest;
            }
            let mut trial = &q + dq;
            project_limits(model, &mut trial);
            let (f, p, w) = evaluate(&trial);
            if p.norm_squared() + w.norm_squared() < rp * rp + rw * rw || lambda >= MAX_DAMPING {
                q = trial;
                (frames, ep, ew) = (f, p, w);
                lambda = (lambda * 0.1).max(MIN_DAMPING);
                break;
            }
            lambda = (lambda * 10.0).min(MAX_DAMPING);
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iterations,
        position_residual: ep.norm(),
        orientation_residual: ew.norm(),
        best: q.as_slice().to_vec(),
        context: None,
    })
}

const MIN_DAMPING: f64 = 1e-9;
const MAX_DAMPING: f64 = 1e2;

fn project_limits(model: &ManipulatorModel, q: &mut DVector<f64>) {
    for (qi, j) in q.iter_mut().zip(&model.joints) {
        if let Some((lo, hi)) = j.limits {
            *qi = qi.clamp(lo, hi);
        }
    }
}
