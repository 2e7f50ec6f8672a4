use std::f64::consts::PI;

use nalgebra::Vector3;

use super::SimTrace;
use crate::error::{Error, Result};
use crate::kinematics::{forward_kinematics, rotation_to_euler_zyx, EulerZyx};
use crate::model::ManipulatorModel;

/// Corner frequency of the high-pass filter used for chattering (Hz).
pub const CHATTER_CUTOFF_HZ: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JointMetrics {
    /// rad
    pub max_abs: f64,
    /// rad
    pub rms: f64,
    /// Mean |error| over the final hold (rad).
    pub steady_offset: f64,
    /// Peak-to-peak of high-pass filtered torque over the second half of the
    /// final hold (N·m).
    pub chattering: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub joints: Vec<JointMetrics>,
    /// m
    pub max_position_error: f64,
    /// Largest |yaw|, |pitch|, |roll| of the error rotation (rad).
    pub max_euler_error: [f64; 3],
}

impl Metrics {
    pub fn max_euler_error_overall(&self) -> f64 {
        self.max_euler_error.iter().copied().fold(0.0, f64::max)
    }
}

/// End-effector error at one tick, measured against the pose the reference
/// joints produce.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartesianError {
    pub t: f64,
    /// `p − p_ref` (m).
    pub position: Vector3<f64>,
    /// ZYX angles of `R_refᵀ·R` (rad).
    pub euler: EulerZyx,
}

pub fn cartesian_errors(trace: &SimTrace, model: &ManipulatorModel) -> Vec<CartesianError> {
    trace
        .rows
        .iter()
        .map(|row| {
            let reference = forward_kinematics(model, row.r.as_slice());
            let actual = forward_kinematics(model, row.q.as_slice());
            let rel = reference.rotation.transpose() * actual.rotation;
            let euler = rotation_to_euler_zyx(&rel).unwrap_or_else(|g| g.euler);
            CartesianError {
                t: row.t,
                position: actual.position - reference.position,
                euler,
            }
        })
        .collect()
}

/// Index of the first row of the trailing stretch with a constant reference.
fn final_hold_start(trace: &SimTrace) -> usize {
    let rows = &trace.rows;
    let last = &rows[rows.len() - 1].r;
    let mut k = rows.len() - 1;
    while k > 0 && rows[k - 1].r == *last {
        k -= 1;
    }
    k
}

/// First-order high-pass filter.
pub fn high_pass(x: &[f64], dt: f64, cutoff_hz: f64) -> Vec<f64> {
    let rc = 1.0 / (2.0 * PI * cutoff_hz);
    let a = rc / (rc + dt);
    let mut out = Vec::with_capacity(x.len());
    let mut y = 0.0;
    for k in 0..x.len() {
        if k > 0 {
            y = a * (y + x[k] - x[k - 1]);
        }
        out.push(y);
    }
    out
}

pub fn compute_metrics(trace: &SimTrace, model: &ManipulatorModel) -> Result<Metrics> {
    if trace.is_empty() {
        return Err(Error::Contract("non-empty trace required".into()));
    }
    let hold = final_hold_start(trace);
    let len = trace.len();
    let quiet = hold + (len - hold) / 2;
    let joints = (0..trace.n)
        .map(|i| {
            let e = trace.error(i);
            let max_abs = e.iter().map(|v| v.abs()).fold(0.0, f64::max);
            let rms = (e.iter().map(|v| v * v).sum::<f64>() / len as f64).sqrt();
            let steady_offset =
                e[hold..].iter().map(|v| v.abs()).sum::<f64>() / (len - hold) as f64;
            let tau: Vec<f64> = trace.rows.iter().map(|r| r.tau[i]).collect();
            let hp = high_pass(&tau, trace.period, CHATTER_CUTOFF_HZ);
            let window = &hp[quiet..];
            let hi = window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = window.iter().copied().fold(f64::INFINITY, f64::min);
            JointMetrics {
                max_abs,
                rms,
                steady_offset,
                chattering: hi - lo,
            }
        })
        .collect();
    let cart = cartesian_errors(trace, model);
    let max_position_error = cart.iter().map(|c| c.position.norm()).fold(0.0, f64::max);
    let mut max_euler_error = [0.0f64; 3];
    for c in &cart {
        for (m, v) in max_euler_error
            .iter_mut()
            .zip([c.euler.yaw, c.euler.pitch, c.euler.roll])
        {
            *m = m.max(v.abs());
        }
    }
    Ok(Metrics {
        joints,
        max_position_error,
        max_euler_error,
    })
}
