#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;

use dhtsmc::control::{
    dhtsmc_torque, region_ratio, sig_pow, sliding_surface, ControlMode, ControllerConfig,
    ReferencePair, Region, RegionForm, SlidingHistory, TdeState,
};
use dhtsmc::dynamics::{step_discrete_model, JointState};
use dhtsmc::model::ManipulatorModel;
use dhtsmc::planning::{plan_joint_moves, JointWaypoint, PlanOptions, TrajectorySample};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const HOME: [f64; 6] = [0.0, 0.0, 0.0, 0.0, -FRAC_PI_2, 0.0];

/// Gains inside the one-step stability limit (≈ 408 1/s at 1 ms).
pub fn compliant_cfg(n: usize, mode: ControlMode) -> ControllerConfig {
    ControllerConfig {
        a1: vec![5.0; n],
        a2: vec![0.5; n],
        eta: 0.6,
        order: 1,
        b_base: vec![vec![300.0; n], vec![100.0; n]],
        b_slope: vec![vec![0.001; n], vec![0.0; n]],
        period: 1e-3,
        alpha: vec![0.5],
        mode,
    }
}

/// Every joint 0 → `deg` → 0 with S-curve moves and holds between.
pub fn joint_swing(model: &ManipulatorModel, deg: f64, dwell: f64, dt: f64) -> Vec<TrajectorySample> {
    let n = model.n();
    let up: Vec<f64> = HOME.iter().map(|q| q + deg.to_radians()).collect();
    let wps = vec![
        JointWaypoint {
            q: HOME[..n].to_vec(),
            accel_limit: 0.0,
            dwell_after: dwell,
        },
        JointWaypoint {
            q: up[..n].to_vec(),
            accel_limit: 20.0,
            dwell_after: dwell,
        },
        JointWaypoint {
            q: HOME[..n].to_vec(),
            accel_limit: 20.0,
            dwell_after: dwell,
        },
    ];
    plan_joint_moves(model, &wps, dt, &PlanOptions::default()).unwrap()
}

/// Closes the loop on the sampled model with plant = nominal and no
/// disturbance, starting off the reference, and returns the worst
/// `|s_{k+1} − target_k| / max(‖target_k‖∞, ‖s_k‖∞)` over all ticks.
pub fn one_step_consistency(
    model: &ManipulatorModel,
    cfg: &ControllerConfig,
    refs: &[TrajectorySample],
    offset: &[f64],
) -> f64 {
    let n = model.n();
    let mut hist = SlidingHistory::new(cfg.order, n);
    let mut tde = TdeState::default();
    let mut state = JointState::new(
        &refs[0].q_ref + DVector::from_column_slice(offset),
        DVector::zeros(n),
    );
    let zero = DVector::zeros(n);
    let mut worst: f64 = 0.0;
    for k in 0..refs.len() - 1 {
        let pair = ReferencePair {
            r: &refs[k].q_ref,
            dr: &refs[k].dq_ref,
            r_next: &refs[k + 1].q_ref,
            dr_next: &refs[k + 1].dq_ref,
        };
        let out = dhtsmc_torque(model, cfg, &state, pair, &mut hist, &mut tde).unwrap();
        state = step_discrete_model(model, &state, &out.tau, &zero, cfg.period).unwrap();
        let s_next = sliding_surface(
            cfg,
            &(&state.q - &refs[k + 1].q_ref),
            &(&state.dq - &refs[k + 1].dq_ref),
        );
        let scale = out.target.amax().max(out.s.amax());
        if scale > 0.0 {
            worst = worst.max((s_next - &out.target).amax() / scale);
        }
    }
    worst
}

/// One draw of the Lyapunov check: compliant gains, weights, exponent, a
/// bounded estimation error, and a history whose largest entry lies outside
/// the region.
#[derive(Debug, Clone)]
pub struct LyapunovDraw {
    pub alpha_ext: Vec<f64>,
    pub bt: Vec<f64>,
    pub eta: f64,
    pub e_bound: f64,
    pub e: f64,
    pub s: Vec<f64>,
}

impl LyapunovDraw {
    /// `U_{k+1} − U_k` with `s_{k+1}` from the reaching recursion plus `E`.
    pub fn delta_u(&self) -> f64 {
        let r = self.bt.len() - 1;
        let next = -(0..=r)
            .map(|j| self.bt[j] * sig_pow(self.s[j], self.eta))
            .sum::<f64>()
            + self.e;
        let u0: f64 = (0..=r).map(|j| self.alpha_ext[j] * self.s[j] * self.s[j]).sum();
        let u1: f64 = next * next
            + (1..=r)
                .map(|j| self.alpha_ext[j] * self.s[j - 1] * self.s[j - 1])
                .sum::<f64>();
        u1 - u0
    }
}

pub fn lyapunov_draw(rng: &mut ChaCha8Rng, form: RegionForm) -> Option<LyapunovDraw> {
    let r = rng.random_range(0..4usize);
    let mut alpha: Vec<f64> = (0..r).map(|_| rng.random_range(0.0..1.0)).collect();
    alpha.sort_by(|a, b| b.total_cmp(a));
    let mut alpha_ext = vec![1.0];
    alpha_ext.extend(&alpha);
    alpha_ext.push(0.0);
    let eta = rng.random_range(0.01..0.99);
    let bt: Vec<f64> = (0..=r)
        .map(|j| {
            let limit = ((alpha_ext[j] - alpha_ext[j + 1]) / (r as f64 + 2.0)).sqrt();
            rng.random_range(0.0..1.0) * limit
        })
        .collect();
    let e_bound = rng.random_range(0.0..1.0);
    let Region::Guaranteed { s_squared, .. } = region_ratio(&alpha_ext, &bt, e_bound, form) else {
        return None;
    };
    let mut s: Vec<f64> = (0..=r).map(|_| rng.random_range(-1.0..1.0)).collect();
    let peak = s.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let scale = (s_squared * (1.0 + rng.random_range(0.0..2.0))).sqrt() / peak;
    for v in &mut s {
        *v *= scale;
    }
    let e = rng.random_range(-e_bound..=e_bound);
    Some(LyapunovDraw {
        alpha_ext,
        bt,
        eta,
        e_bound,
        e,
        s,
    })
}

/// Runs `count` accepted draws and returns the violations (ΔU ≥ 0).
pub fn lyapunov_violations(count: usize, seed: u64, form: RegionForm) -> Vec<LyapunovDraw> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut accepted = 0;
    let mut bad = Vec::new();
    while accepted < count {
        if let Some(d) = lyapunov_draw(&mut rng, form) {
            accepted += 1;
            if d.delta_u() >= 0.0 {
                bad.push(d);
            }
        }
    }
    bad
}

/// Compliant gains and a history just outside the stated region for which
/// the Lyapunov candidate still grows.
pub fn stated_region_counterexample() -> LyapunovDraw {
    let alpha_ext = vec![1.0, 0.72, 0.0];
    let bt = vec![0.18, 0.15];
    let e_bound = 0.0275;
    let Region::Guaranteed { s_squared, .. } =
        region_ratio(&alpha_ext, &bt, e_bound, RegionForm::Stated)
    else {
        unreachable!()
    };
    let s0 = 1.01 * s_squared.sqrt();
    LyapunovDraw {
        alpha_ext,
        bt,
        eta: 0.02,
        e_bound,
        e: -e_bound,
        s: vec![s0, 0.04],
    }
}
