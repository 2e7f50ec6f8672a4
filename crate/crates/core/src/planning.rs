//! Reference generation: jerk-limited S-curve time scaling, straight-line
//! Cartesian tours with dwell phases, and the joint-space references the
//! controllers track.

use nalgebra::{DVector, Rotation3, UnitQuaternion, Vector3};

use crate::error::{Error, Result};
use crate::kinematics::{forward_kinematics, inverse_kinematics_with, EulerZyx, IkOptions, Pose};
use crate::model::ManipulatorModel;

/// Default jerk limit as a multiple of the acceleration limit (1/s).
pub const DEFAULT_JERK_FACTOR: f64 = 100.0;

/// A Cartesian waypoint and the motion that reaches it.
#[derive(Debug, Clone, PartialEq)]
pub struct Waypoint {
    pub position: Vector3<f64>,
    pub euler: EulerZyx,
    /// Path acceleration limit of the segment ending here (m/s²). Ignored on
    /// the first waypoint.
    pub accel_limit: f64,
    /// Hold time after arriving (s).
    pub dwell_after: f64,
}

impl Waypoint {
    pub fn pose(&self) -> Pose {
        Pose::from_euler(self.position, self.euler)
    }
}

/// A joint-space waypoint.
#[derive(Debug, Clone, PartialEq)]
pub struct JointWaypoint {
    pub q: Vec<f64>,
    /// Acceleration limit of the synchronized move ending here (rad/s²).
    pub accel_limit: f64,
    pub dwell_after: f64,
}

/// Whether a sample belongs to a hold or to the move into waypoint `index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Dwell { waypoint: usize },
    Move { segment: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub phase: Phase,
    pub pose: Pose,
    pub q_ref: DVector<f64>,
    pub dq_ref: DVector<f64>,
}

/// Position, velocity and acceleration along a 1-D profile.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ProfileSample {
    pub pos: f64,
    pub vel: f64,
    pub acc: f64,
}

/// Symmetric seven-segment jerk-limited rest-to-rest profile without a
/// velocity limit (the cruise segment is always empty).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SCurve {
    pub distance: f64,
    pub jerk: f64,
    /// Acceleration plateau actually reached (≤ the limit).
    pub peak_acc: f64,
    /// Duration of each jerk ramp.
    pub ramp: f64,
    /// Duration of each constant-acceleration plateau.
    pub plateau: f64,
}

impl SCurve {
    pub fn new(distance: f64, a_max: f64, j_max: f64) -> Self {
        assert!(distance >= 0.0, "distance must be non-negative");
        assert!(a_max > 0.0 && j_max > 0.0, "limits must be positive");
        if distance == 0.0 {
            return Self {
                distance,
                jerk: j_max,
                peak_acc: 0.0,
                ramp: 0.0,
                plateau: 0.0,
            };
        }
        let ramp = a_max / j_max;
        // distance covered when the plateau has zero length
        if distance >= 2.0 * a_max * ramp * ramp {
            let plateau = 0.5 * (-3.0 * ramp + (ramp * ramp + 4.0 * distance / a_max).sqrt());
            Self {
                distance,
                jerk: j_max,
                peak_acc: a_max,
                ramp,
                plateau: plateau.max(0.0),
            }
        } else {
            let peak = (0.5 * distance * j_max * j_max).cbrt().min(a_max);
            Self {
                distance,
                jerk: j_max,
                peak_acc: peak,
                ramp: peak / j_max,
                plateau: 0.0,
            }
        }
    }

    pub fn duration(&self) -> f64 {
        2.0 * (2.0 * self.ramp + self.plateau)
    }

    pub fn peak_velocity(&self) -> f64 {
        self.peak_acc * (self.ramp + self.plateau)
    }

    /// Accelerating half, `0 ≤ t ≤ duration / 2`.
    fn rising(&self, t: f64) -> ProfileSample {
        let j = self.jerk;
        let a = self.peak_acc;
        let tj = self.ramp;
        if t < tj {
            return ProfileSample {
                pos: j * t * t * t / 6.0,
                vel: 0.5 * j * t * t,
                acc: j * t,
            };
        }
        let v1 = 0.5 * a * tj;
        let p1 = a * tj * tj / 6.0;
        let t2 = t - tj;
        if t2 < self.plateau {
            return ProfileSample {
                pos: p1 + v1 * t2 + 0.5 * a * t2 * t2,
                vel: v1 + a * t2,
                acc: a,
            };
        }
        let tp = self.plateau;
        let v2 = v1 + a * tp;
        let p2 = p1 + v1 * tp + 0.5 * a * tp * tp;
        let t3 = (t2 - tp).min(tj);
        ProfileSample {
            pos: p2 + v2 * t3 + 0.5 * a * t3 * t3 - j * t3 * t3 * t3 / 6.0,
            vel: v2 + a * t3 - 0.5 * j * t3 * t3,
            acc: (a - j * t3).max(0.0),
        }
    }

    pub fn eval(&self, t: f64) -> ProfileSample {
        let total = self.duration();
        if t <= 0.0 || self.distance == 0.0 {
            return ProfileSample::default();
        }
        if t >= total {
            return ProfileSample {
                pos: self.distance,
                vel: 0.0,
                acc: 0.0,
            };
        }
        if t <= 0.5 * total {
            self.rising(t)
        } else {
            // mirrored deceleration, pinned to the exact end position
            let m = self.rising(total - t);
            ProfileSample {
                pos: self.distance - m.pos,
                vel: m.vel,
                acc: -m.acc,
            }
        }
    }
}

/// Samples an S-curve every `dt` from rest to rest. The last sample lies at
/// the first tick at or after the end of motion and sits exactly at
/// `distance`.
pub fn s_curve_profile(distance: f64, a_max: f64, j_max: f64, dt: f64) -> Vec<ProfileSample> {
    assert!(dt > 0.0, "sample interval must be positive");
    let curve = SCurve::new(distance, a_max, j_max);
    let ticks = ticks_for(curve.duration(), dt);
    (0..=ticks).map(|k| curve.eval(k as f64 * dt)).collect()
}

fn ticks_for(duration: f64, dt: f64) -> usize {
    if duration <= 0.0 {
        return 0;
    }
    // guard against 0.30000000000000004 / 0.1 style rounding
    (duration / dt - 1e-9).ceil().max(1.0) as usize
}

fn dwell_ticks(dwell: f64, dt: f64) -> usize {
    (dwell / dt).round() as usize
}

/// Options for reference generation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanOptions {
    /// Jerk limit = `jerk_factor · accel_limit`.
    pub jerk_factor: f64,
    pub ik: IkOptions,
}

impl Default for PlanOptions {
    fn default() -> Self {
        Self {
            jerk_factor: DEFAULT_JERK_FACTOR,
            ik: IkOptions::default(),
        }
    }
}

/// Plans a Cartesian tour through `waypoints` and converts it to joint
/// references by inverse kinematics continued from `q_seed`.
pub fn plan_tour(
    model: &ManipulatorModel,
    waypoints: &[Waypoint],
    dt: f64,
    q_seed: &[f64],
    opts: &PlanOptions,
) -> Result<Vec<TrajectorySample>> {
    let Some(first) = waypoints.first() else {
        return Err(Error::Contract("at least one waypoint required".into()));
    };
    validate_timing(dt, waypoints.iter().map(|w| (w.accel_limit, w.dwell_after)))?;

    let mut q = DVector::from_column_slice(q_seed);
    let mut out = Vec::new();
    let start = first.pose();
    q = solve(model, &start, &q, opts, "waypoint 1")?;
    push_dwell(&mut out, &start, &q, first.dwell_after, dt, 0, true);

    for (seg, pair) in waypoints.windows(2).enumerate() {
        let (from, to) = (&pair[0], &pair[1]);
        let p0 = from.position;
        let delta = to.position - p0;
        let r0 = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(
            from.pose().rotation,
        ));
        let r1 = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(
            to.pose().rotation,
        ));
        let length = delta.norm();
        // pure reorientation runs on the rotation angle instead
        let distance = if length > 0.0 { length } else { r0.angle_to(&r1) };
        let profile = s_curve_profile(
            distance,
            to.accel_limit,
            opts.jerk_factor * to.accel_limit,
            dt,
        );
        for sample in profile.iter().skip(1) {
            let u = if distance > 0.0 {
                sample.pos / distance
            } else {
                1.0
            };
            let rot = r0.slerp(&r1, u).to_rotation_matrix().into_inner();
            let pose = Pose::new(p0 + delta * u, rot);
            q = solve(model, &pose, &q, opts, &format!("segment {}", seg + 1))?;
            out.push(TrajectorySample {
                t: out.len() as f64 * dt,
                phase: Phase::Move { segment: seg + 1 },
                pose,
                q_ref: q.clone(),
                dq_ref: DVector::zeros(q.len()),
            });
        }
        // the last motion sample is exactly the waypoint; dwell repeats it
        let end = out.last().map(|s| s.pose).unwrap_or_else(|| to.pose());
        push_dwell(&mut out, &end, &q, to.dwell_after, dt, seg + 1, false);
    }
    fill_velocities(&mut out, dt);
    Ok(out)
}

/// Plans synchronized straight-line joint moves through `waypoints`, each
/// joint scaled along one S-curve on the largest joint displacement.
pub fn plan_joint_moves(
    model: &ManipulatorModel,
    waypoints: &[JointWaypoint],
    dt: f64,
    opts: &PlanOptions,
) -> Result<Vec<TrajectorySample>> {
    let Some(first) = waypoints.first() else {
        return Err(Error::Contract("at least one waypoint required".into()));
    };
    validate_timing(dt, waypoints.iter().map(|w| (w.accel_limit, w.dwell_after)))?;
    for w in waypoints {
        if w.q.len() != model.n() {
            return Err(Error::Dimension {
                what: "joint waypoint",
                expected: model.n(),
                got: w.q.len(),
            });
        }
    }
    let mut out = Vec::new();
    let q0 = DVector::from_column_slice(&first.q);
    let pose0 = forward_kinematics(model, &first.q);
    push_dwell(&mut out, &pose0, &q0, first.dwell_after, dt, 0, true);
    for (seg, pair) in waypoints.windows(2).enumerate() {
        let from = DVector::from_column_slice(&pair[0].q);
        let to = DVector::from_column_slice(&pair[1].q);
        let delta = &to - &from;
        let distance = delta.amax();
        let a = pair[1].accel_limit;
        let profile = s_curve_profile(distance, a, opts.jerk_factor * a, dt);
        let mut q = from.clone();
        for sample in profile.iter().skip(1) {
            q = if distance > 0.0 {
                &from + &delta * (sample.pos / distance)
            } else {
                to.clone()
            };
            out.push(TrajectorySample {
                t: out.len() as f64 * dt,
                phase: Phase::Move { segment: seg + 1 },
                pose: forward_kinematics(model, q.as_slice()),
                q_ref: q.clone(),
                dq_ref: DVector::zeros(q.len()),
            });
        }
        let pose = forward_kinematics(model, q.as_slice());
        push_dwell(&mut out, &pose, &q, pair[1].dwell_after, dt, seg + 1, false);
    }
    fill_velocities(&mut out, dt);
    Ok(out)
}

fn validate_timing(dt: f64, items: impl Iterator<Item = (f64, f64)>) -> Result<()> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invariant("sample interval"));
    }
    for (i, (accel, dwell)) in items.enumerate() {
        if i > 0 && !(accel.is_finite() && accel > 0.0) {
            return Err(Error::invariant(format!("accel_limit (waypoint {})", i + 1)));
        }
        if !(dwell.is_finite() && dwell >= 0.0) {
            return Err(Error::invariant(format!("dwell_after (waypoint {})", i + 1)));
        }
    }
    Ok(())
}

fn solve(
    model: &ManipulatorModel,
    pose: &Pose,
    seed: &DVector<f64>,
    opts: &PlanOptions,
    what: &str,
) -> Result<DVector<f64>> {
    inverse_kinematics_with(model, pose, seed.as_slice(), &opts.ik)
        .map(|s| s.q)
        .map_err(|e| e.with_context(what.to_string()))
}

fn push_dwell(
    out: &mut Vec<TrajectorySample>,
    pose: &Pose,
    q: &DVector<f64>,
    dwell: f64,
    dt: f64,
    waypoint: usize,
    at_start: bool,
) {
    let mut count = dwell_ticks(dwell, dt);
    if at_start && count == 0 {
        count = 1;
    }
    for _ in 0..count {
        out.push(TrajectorySample {
            t: out.len() as f64 * dt,
            phase: Phase::Dwell { waypoint },
            pose: *pose,
            q_ref: q.clone(),
            dq_ref: DVector::zeros(q.len()),
        });
    }
}

/// Central differences inside, one-sided at both ends.
fn fill_velocities(samples: &mut [TrajectorySample], dt: f64) {
    let n = samples.len();
    if n < 2 {
        return;
    }
    let qs: Vec<DVector<f64>> = samples.iter().map(|s| s.q_ref.clone()).collect();
    for (k, s) in samples.iter_mut().enumerate() {
        s.dq_ref = if k == 0 {
            (&qs[1] - &qs[0]) / dt
        } else if k == n - 1 {
            (&qs[n - 1] - &qs[n - 2]) / dt
        } else {
            (&qs[k + 1] - &qs[k - 1]) / (2.0 * dt)
        };
    }
}
