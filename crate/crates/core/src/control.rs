//! Terminal sliding-mode control with time-delay estimation.
//!
//! The surface is `s = a₁e + a₂·sig^β(e)(e) + ė` with the error-dependent
//! exponent `β(e) = (|e| + 0.5)/(|e| + 1)`. The reaching law drives
//! `s_{k+1} = −Σⱼ bⱼ(q̈)·T·sig^η(s_{k−j})`, and the torque is solved from the
//! one-step discrete model `q_{k+1} = q_k + T·q̇_k`, `q̇_{k+1} = q̇_k + T·q̈_k`
//! with the lumped uncertainty replaced by its value one tick earlier.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{bias_forces, friction_torque, inertia_matrix, inverse_dynamics, JointState};
use crate::error::{Error, Result};
use crate::model::ManipulatorModel;

/// `|x|^p · sign(x)`, zero at zero.
pub fn sig_pow(x: f64, p: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.abs().powf(p).copysign(x)
    }
}

/// Error-dependent exponent of the surface, in `[0.5, 1)`.
pub fn beta_exponent(e: f64) -> f64 {
    (e.abs() + 0.5) / (e.abs() + 1.0)
}

/// How the torque law closes the loop on the reaching law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlMode {
    /// Torque makes the predicted `s_{k+1}` equal the reaching target exactly.
    ReachingLawFaithful,
    /// Linear-history arrangement: `M̄((1 − b₀T)s_k − Σ_{j≥1} bⱼT·s_{k−j})`
    /// with linear `s` terms and `β` evaluated at `e_k`.
    PaperLiteral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    pub a1: Vec<f64>,
    pub a2: Vec<f64>,
    pub eta: f64,
    pub order: usize,
    /// `(order + 1) × n` gain offsets (1/s).
    pub b_base: Vec<Vec<f64>>,
    /// `(order + 1) × n` gain slopes per rad/s² of joint acceleration.
    pub b_slope: Vec<Vec<f64>>,
    /// Controller interval T (s).
    pub period: f64,
    /// Lyapunov weights `α₁ > … > α_r`, strictly inside (0, 1).
    pub alpha: Vec<f64>,
    pub mode: ControlMode,
}

impl ControllerConfig {
    /// Gains used for the Cartesian tour at a 1 ms interval.
    pub fn sim_paper() -> Self {
        Self::paper_gains(&[10.0, 100.0, 100.0, 15.0, 100.0, 10.0], 0.01, 4.5e5, 0.005, 2.25e5)
    }

    /// Gains used for the joint-space 0° → 20° → 0° experiment.
    pub fn exp_paper() -> Self {
        Self::paper_gains(&[1.0, 20.0, 13.0, 2.0, 15.0, 3.0], 0.015, 1e5, 0.002, 0.25e5)
    }

    fn paper_gains(a1: &[f64], a2: f64, b0: f64, b0_slope: f64, b1: f64) -> Self {
        let n = a1.len();
        Self {
            a1: a1.to_vec(),
            a2: vec![a2; n],
            eta: 0.6,
            order: 1,
            b_base: vec![vec![b0; n], vec![b1; n]],
            b_slope: vec![vec![b0_slope; n], vec![0.0; n]],
            period: 1e-3,
            alpha: vec![0.5],
            mode: ControlMode::PaperLiteral,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "sim-paper" => Some(Self::sim_paper()),
            "exp-paper" => Some(Self::exp_paper()),
            _ => None,
        }
    }

    pub fn n(&self) -> usize {
        self.a1.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 {
            return Err(Error::invariant("a1"));
        }
        if self.a2.len() != n {
            return Err(Error::Dimension {
                what: "a2",
                expected: n,
                got: self.a2.len(),
            });
        }
        if !self.a1.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(Error::invariant("a1"));
        }
        if !self.a2.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(Error::invariant("a2"));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::invariant("eta"));
        }
        if !(self.period.is_finite() && self.period > 0.0) {
            return Err(Error::invariant("period"));
        }
        for (name, table) in [("b_base", &self.b_base), ("b_slope", &self.b_slope)] {
            if table.len() != self.order + 1 {
                return Err(Error::Dimension {
                    what: "gain taps",
                    expected: self.order + 1,
                    got: table.len(),
                });
            }
            for row in table {
                if row.len() != n {
                    return Err(Error::Dimension {
                        what: "gain row",
                        expected: n,
                        got: row.len(),
                    });
                }
                if !row.iter().all(|v| v.is_finite()) {
                    return Err(Error::invariant(name));
                }
            }
        }
        if self.alpha.len() != self.order {
            return Err(Error::Dimension {
                what: "alpha",
                expected: self.order,
                got: self.alpha.len(),
            });
        }
        let mut prev = 1.0;
        for &a in &self.alpha {
            if !(a > 0.0 && a < prev) {
                return Err(Error::invariant("alpha"));
            }
            prev = a;
        }
        Ok(())
    }

    /// `α₀ = 1, α₁, …, α_r, α_{r+1} = 0`.
    fn alpha_extended(&self) -> Vec<f64> {
        let mut a = Vec::with_capacity(self.order + 2);
        a.push(1.0);
        a.extend_from_slice(&self.alpha);
        a.push(0.0);
        a
    }
}

/// `a₁e + a₂·sig^{β(e)}(e) + ė`, element-wise.
pub fn sliding_surface(cfg: &ControllerConfig, e: &DVector<f64>, de: &DVector<f64>) -> DVector<f64> {
    surface_with(cfg, e, de, beta_exponent)
}

fn surface_with(
    cfg: &ControllerConfig,
    e: &DVector<f64>,
    de: &DVector<f64>,
    beta: impl Fn(f64) -> f64,
) -> DVector<f64> {
    DVector::from_fn(e.len(), |i, _| {
        cfg.a1[i] * e[i] + cfg.a2[i] * sig_pow(e[i], beta(e[i])) + de[i]
    })
}

/// The last `order + 1` sliding vectors, newest first. Slots before the
/// first push read as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SlidingHistory {
    buf: VecDeque<DVector<f64>>,
}

impl SlidingHistory {
    pub fn new(order: usize, n: usize) -> Self {
        Self {
            buf: std::iter::repeat_n(DVector::zeros(n), order + 1).collect(),
        }
    }

    pub fn push(&mut self, s: DVector<f64>) {
        self.buf.pop_back();
        self.buf.push_front(s);
    }

    /// `s_{k−j}`.
    pub fn get(&self, j: usize) -> &DVector<f64> {
        &self.buf[j]
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }
}

/// `b_j(q̈) = base + slope·q̈`, floored at zero.
pub fn variable_gain(cfg: &ControllerConfig, tap: usize, ddq: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(ddq.len(), |i, _| {
        (cfg.b_base[tap][i] + cfg.b_slope[tap][i] * ddq[i]).max(0.0)
    })
}

/// `−Σⱼ bⱼ(q̈)·T·sig^η(s_{k−j})`.
pub fn reaching_target(
    cfg: &ControllerConfig,
    hist: &SlidingHistory,
    ddq: &DVector<f64>,
) -> DVector<f64> {
    let mut out = DVector::zeros(ddq.len());
    for j in 0..=cfg.order {
        let b = variable_gain(cfg, j, ddq);
        let s = hist.get(j);
        for i in 0..out.len() {
            out[i] -= b[i] * cfg.period * sig_pow(s[i], cfg.eta);
        }
    }
    out
}

/// Data from the previous controller tick kept for time-delay estimation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TdeState {
    /// State at k−1 with `ddq = (q̇_k − q̇_{k−1})/T` filled in once q̇_k is
    /// known.
    pub prev_state: Option<JointState>,
    pub prev_tau: Option<DVector<f64>>,
    pub prev_estimate: Option<DVector<f64>>,
}

impl TdeState {
    /// Completes the k−1 record with the backward-difference acceleration and
    /// returns it (zero on the first tick).
    fn observe(&mut self, dq: &DVector<f64>, period: f64) -> DVector<f64> {
        match self.prev_state.as_mut() {
            Some(prev) => {
                prev.ddq = (dq - &prev.dq) / period;
                prev.ddq.clone()
            }
            None => DVector::zeros(dq.len()),
        }
    }

    fn commit(&mut self, q: &DVector<f64>, dq: &DVector<f64>, tau: &DVector<f64>, hhat: DVector<f64>) {
        self.prev_state = Some(JointState::new(q.clone(), dq.clone()));
        self.prev_tau = Some(tau.clone());
        self.prev_estimate = Some(hhat);
    }
}

/// `Ĥ_k = τ_{k−1} − M̄(q_{k−1})q̈_{k−1} − C̄q̇_{k−1} − Ḡ − F̄`, zero before the
/// first torque has been applied.
pub fn tde_estimate(nominal: &ManipulatorModel, tde: &TdeState) -> DVector<f64> {
    match (&tde.prev_state, &tde.prev_tau) {
        (Some(s), Some(tau)) => {
            let q = s.q.as_slice();
            tau - inverse_dynamics(nominal, q, s.dq.as_slice(), s.ddq.as_slice(), true)
                - friction_torque(nominal, s.dq.as_slice())
        }
        _ => DVector::zeros(nominal.n()),
    }
}

/// Reference at ticks k and k+1.
#[derive(Debug, Clone, Copy)]
pub struct ReferencePair<'a> {
    pub r: &'a DVector<f64>,
    pub dr: &'a DVector<f64>,
    pub r_next: &'a DVector<f64>,
    pub dr_next: &'a DVector<f64>,
}

/// What a controller tick produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutput {
    pub tau: DVector<f64>,
    /// `s_k` from the measured state.
    pub s: DVector<f64>,
    pub hhat: DVector<f64>,
    /// Acceleration estimate `q̈_{k−1}` fed to the variable gains.
    pub ddq_estimate: DVector<f64>,
    /// Reaching-law target for `s_{k+1}`.
    pub target: DVector<f64>,
}

fn check_dims(nominal: &ManipulatorModel, cfg: &ControllerConfig, state: &JointState) -> Result<()> {
    let n = nominal.n();
    for (what, got) in [("controller gains", cfg.n()), ("joint state", state.n())] {
        if got != n {
            return Err(Error::Dimension {
                what,
                expected: n,
                got,
            });
        }
    }
    Ok(())
}

/// One DHTSMC tick. Pushes `s_k` into `hist` and records this tick for the
/// next time-delay estimate.
pub fn dhtsmc_torque(
    nominal: &ManipulatorModel,
    cfg: &ControllerConfig,
    state: &JointState,
    reference: ReferencePair<'_>,
    hist: &mut SlidingHistory,
    tde: &mut TdeState,
) -> Result<ControlOutput> {
    check_dims(nominal, cfg, state)?;
    let t = cfg.period;
    let (q, dq) = (&state.q, &state.dq);
    let e = q - reference.r;
    let s = sliding_surface(cfg, &e, &(dq - reference.dr));
    hist.push(s.clone());

    let ddq_est = tde.observe(dq, t);
    let hhat = tde_estimate(nominal, tde);
    let target = reaching_target(cfg, hist, &ddq_est);

    // predicted tracking error at k+1 from the discrete model
    let e_next = q + dq * t - reference.r_next;
    let s_pred = match cfg.mode {
        ControlMode::ReachingLawFaithful => surface_with(cfg, &e_next, &DVector::zeros(e.len()), |ei| {
            beta_exponent(ei)
        }),
        ControlMode::PaperLiteral => DVector::from_fn(e.len(), |i, _| {
            cfg.a1[i] * e_next[i] + cfg.a2[i] * sig_pow(e_next[i], beta_exponent(e[i]))
        }),
    };
    let mut accel = (reference.dr_next - s_pred - dq) / t;
    match cfg.mode {
        ControlMode::ReachingLawFaithful => accel += &target / t,
        ControlMode::PaperLiteral => {
            let b0 = variable_gain(cfg, 0, &ddq_est);
            let mut lin = s.component_mul(&b0.map(|b| 1.0 - b * t));
            for j in 1..=cfg.order {
                let b = variable_gain(cfg, j, &ddq_est);
                lin -= hist.get(j).component_mul(&(b * t));
            }
            accel += lin;
        }
    }

    let tau = inertia_matrix(nominal, q.as_slice()) * accel
        + bias_forces(nominal, q.as_slice(), dq.as_slice())
        + friction_torque(nominal, dq.as_slice())
        + &hhat;
    if !tau.iter().all(|v| v.is_finite()) {
        return Err(Error::Contract("controller produced a non-finite torque".into()));
    }
    tde.commit(q, dq, &tau, hhat.clone());
    Ok(ControlOutput {
        tau,
        s,
        hhat,
        ddq_estimate: ddq_est,
        target,
    })
}

/// Exponent used by the baseline's surface in place of `β(e)`.
pub const FF_TSMC_BETA: f64 = 0.75;

/// Feedforward-plus-TSMC baseline: nominal inverse dynamics along the
/// reference, first-order terminal feedback `−M̄·b₀T·sig^η(s_k)` on a surface
/// with fixed exponent, and the same time-delay compensation.
pub fn ff_tsmc_torque(
    nominal: &ManipulatorModel,
    cfg: &ControllerConfig,
    state: &JointState,
    reference: ReferencePair<'_>,
    tde: &mut TdeState,
) -> Result<ControlOutput> {
    check_dims(nominal, cfg, state)?;
    let t = cfg.period;
    let (q, dq) = (&state.q, &state.dq);
    let e = q - reference.r;
    let s = surface_with(cfg, &e, &(dq - reference.dr), |_| FF_TSMC_BETA);
    let ddq_est = tde.observe(dq, t);
    let hhat = tde_estimate(nominal, tde);

    let ddr = (reference.dr_next - reference.dr) / t;
    let feedforward = inverse_dynamics(
        nominal,
        reference.r.as_slice(),
        reference.dr.as_slice(),
        ddr.as_slice(),
        true,
    ) + friction_torque(nominal, reference.dr.as_slice());
    let b0 = variable_gain(cfg, 0, &ddq_est);
    let push = DVector::from_fn(s.len(), |i, _| b0[i] * t * sig_pow(s[i], cfg.eta));
    let target = -&push;
    let tau = feedforward - inertia_matrix(nominal, q.as_slice()) * push + &hhat;
    if !tau.iter().all(|v| v.is_finite()) {
        return Err(Error::Contract("controller produced a non-finite torque".into()));
    }
    tde.commit(q, dq, &tau, hhat.clone());
    Ok(ControlOutput {
        tau,
        s,
        hhat,
        ddq_estimate: ddq_est,
        target,
    })
}

/// Which controller a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerKind {
    Dhtsmc,
    FfTsmc,
}

impl ControllerKind {
    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::Dhtsmc => "dhtsmc",
            ControllerKind::FfTsmc => "ff-tsmc",
        }
    }
}

impl std::str::FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dhtsmc" => Ok(ControllerKind::Dhtsmc),
            "ff-tsmc" => Ok(ControllerKind::FfTsmc),
            other => Err(Error::Parse(format!("unknown controller `{other}`"))),
        }
    }
}

/// A controller instance owning its history and delay-estimation state.
#[derive(Debug, Clone)]
pub struct Controller {
    pub kind: ControllerKind,
    pub cfg: ControllerConfig,
    pub nominal: ManipulatorModel,
    pub hist: SlidingHistory,
    pub tde: TdeState,
}

impl Controller {
    pub fn new(kind: ControllerKind, cfg: ControllerConfig, nominal: ManipulatorModel) -> Result<Self> {
        cfg.validate()?;
        let n = nominal.n();
        if cfg.n() != n {
            return Err(Error::Dimension {
                what: "controller gains",
                expected: n,
                got: cfg.n(),
            });
        }
        Ok(Self {
            kind,
            hist: SlidingHistory::new(cfg.order, n),
            cfg,
            nominal,
            tde: TdeState::default(),
        })
    }

    pub fn step(&mut self, state: &JointState, reference: ReferencePair<'_>) -> Result<ControlOutput> {
        match self.kind {
            ControllerKind::Dhtsmc => dhtsmc_torque(
                &self.nominal,
                &self.cfg,
                state,
                reference,
                &mut self.hist,
                &mut self.tde,
            ),
            ControllerKind::FfTsmc => {
                ff_tsmc_torque(&self.nominal, &self.cfg, state, reference, &mut self.tde)
            }
        }
    }
}

/// Gain limit per tap (1/s), `(1/T)·sqrt((α_n − α_{n+1})/(r + 2))`.
pub fn gain_bounds(cfg: &ControllerConfig) -> Vec<f64> {
    let a = cfg.alpha_extended();
    let r = cfg.order as f64;
    (0..=cfg.order)
        .map(|n| ((a[n] - a[n + 1]) / (r + 2.0)).sqrt() / cfg.period)
        .collect()
}

/// Largest gain per tap and joint over an acceleration interval. The gains
/// are affine in q̈, so the endpoints suffice.
pub fn worst_gains(cfg: &ControllerConfig, ddq_range: (f64, f64)) -> Vec<Vec<f64>> {
    let n = cfg.n();
    (0..=cfg.order)
        .map(|j| {
            let lo = variable_gain(cfg, j, &DVector::from_element(n, ddq_range.0));
            let hi = variable_gain(cfg, j, &DVector::from_element(n, ddq_range.1));
            lo.iter().zip(hi.iter()).map(|(a, b)| a.max(*b)).collect()
        })
        .collect()
}

/// Numerator used for the convergence region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegionForm {
    /// `(r+2)E² + Σ(bⱼT)²`, as the theorem states it.
    Stated,
    /// `(r+2)(E² + Σ(bⱼT)²)`, the constant the proof's inequality chain
    /// actually carries.
    ProofConsistent,
}

/// Per-joint convergence region as a bound on `s²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    Guaranteed { s_squared: f64, worst_tap: usize },
    NonGuaranteed,
}

impl Region {
    pub fn s_squared(&self) -> Option<f64> {
        match self {
            Region::Guaranteed { s_squared, .. } => Some(*s_squared),
            Region::NonGuaranteed => None,
        }
    }
}

/// Region ratio for one joint given the gains `bⱼT` (dimensionless).
pub fn region_ratio(
    alpha_ext: &[f64],
    bt: &[f64],
    e_bound: f64,
    form: RegionForm,
) -> Region {
    let r2 = bt.len() as f64 + 1.0;
    let sum_sq: f64 = bt.iter().map(|b| b * b).sum();
    let numerator = match form {
        RegionForm::Stated => r2 * e_bound * e_bound + sum_sq,
        RegionForm::ProofConsistent => r2 * (e_bound * e_bound + sum_sq),
    };
    let mut worst: Option<(f64, usize)> = None;
    for (m, b) in bt.iter().enumerate() {
        let gap = alpha_ext[m] - alpha_ext[m + 1];
        let denom = gap - r2 * b * b;
        // gains sitting on the bound leave only rounding in the denominator
        if denom <= 1e-12 * gap {
            return Region::NonGuaranteed;
        }
        let ratio = numerator / denom;
        if worst.is_none_or(|(w, _)| ratio > w) {
            worst = Some((ratio, m));
        }
    }
    match worst {
        Some((s_squared, worst_tap)) => Region::Guaranteed {
            s_squared,
            worst_tap,
        },
        None => Region::NonGuaranteed,
    }
}

/// Convergence region per joint for the worst gains over `ddq_range`.
pub fn convergence_region(
    cfg: &ControllerConfig,
    e_bound: &[f64],
    ddq_range: (f64, f64),
    form: RegionForm,
) -> Vec<Region> {
    let alpha = cfg.alpha_extended();
    let gains = worst_gains(cfg, ddq_range);
    (0..cfg.n())
        .map(|i| {
            let bt: Vec<f64> = gains.iter().map(|g| g[i] * cfg.period).collect();
            region_ratio(&alpha, &bt, e_bound.get(i).copied().unwrap_or(0.0), form)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainViolation {
    pub tap: usize,
    pub joint: usize,
    pub gain: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    /// Admissible gain per tap (1/s), identical across joints.
    pub bounds: Vec<f64>,
    /// Worst gain per tap and joint over the acceleration range.
    pub worst: Vec<Vec<f64>>,
    pub ddq_range: (f64, f64),
    pub compliant: bool,
    pub violations: Vec<GainViolation>,
    /// Assumed bound on `M̄⁻¹Ȟ` per joint.
    pub e_bound: Vec<f64>,
    pub form: RegionForm,
    pub region: Vec<Region>,
}

/// Checks every tap and joint against the gain limit, with the region
/// evaluated for a zero delay-estimation error.
pub fn stability_margin(cfg: &ControllerConfig, ddq_range: (f64, f64)) -> StabilityReport {
    stability_report(cfg, ddq_range, &vec![0.0; cfg.n()], RegionForm::ProofConsistent)
}

pub fn stability_report(
    cfg: &ControllerConfig,
    ddq_range: (f64, f64),
    e_bound: &[f64],
    form: RegionForm,
) -> StabilityReport {
    let bounds = gain_bounds(cfg);
    let worst = worst_gains(cfg, ddq_range);
    let mut violations = Vec::new();
    for (tap, row) in worst.iter().enumerate() {
        for (joint, &gain) in row.iter().enumerate() {
            if gain > bounds[tap] {
                violations.push(GainViolation {
                    tap,
                    joint,
                    gain,
                    bound: bounds[tap],
                });
            }
        }
    }
    StabilityReport {
        compliant: violations.is_empty(),
        region: convergence_region(cfg, e_bound, ddq_range, form),
        bounds,
        worst,
        ddq_range,
        violations,
        e_bound: e_bound.to_vec(),
        form,
    }
}

impl std::fmt::Display for StabilityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "gain check over q̈ in [{}, {}] rad/s²: {}",
            self.ddq_range.0,
            self.ddq_range.1,
            if self.compliant { "compliant" } else { "NOT compliant" }
        )?;
        for (tap, bound) in self.bounds.iter().enumerate() {
            let worst = self.worst[tap].iter().copied().fold(0.0, f64::max);
            writeln!(f, "  b{tap}: limit {bound:.3} 1/s, worst {worst:.3} 1/s")?;
        }
        for v in &self.violations {
            writeln!(
                f,
                "  violation: b{} on joint {} is {:.3} > {:.3}",
                v.tap,
                v.joint + 1,
                v.gain,
                v.bound
            )?;
        }
        let form = match self.form {
            RegionForm::Stated => "stated",
            RegionForm::ProofConsistent => "proof-consistent",
        };
        writeln!(f, "convergence region ({form} form, bound on s²):")?;
        for (i, region) in self.region.iter().enumerate() {
            match region {
                Region::Guaranteed {
                    s_squared,
                    worst_tap,
                } => writeln!(
                    f,
                    "  joint {}: s² < {s_squared:.6e} (tap {worst_tap}, E = {})",
                    i + 1,
                    self.e_bound[i]
                )?,
                Region::NonGuaranteed => writeln!(f, "  joint {}: not guaranteed", i + 1)?,
            }
        }
        Ok(())
    }
}

/// Inverse of the nominal inertia for scaling a torque residual to the
/// acceleration-level error `E = M̄⁻¹Ȟ`.
pub fn acceleration_error(nominal: &ManipulatorModel, q: &[f64], h_check: &DVector<f64>) -> Result<DVector<f64>> {
    let m: DMatrix<f64> = inertia_matrix(nominal, q);
    m.cholesky()
        .map(|c| c.solve(h_check))
        .ok_or(Error::SingularInertia)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig_pow_cases() {
        assert_eq!(sig_pow(4.0, 0.5), 2.0);
        assert_eq!(sig_pow(-1.0, 0.75), -1.0);
        assert_eq!(sig_pow(0.0, 0.3), 0.0);
        assert_eq!(sig_pow(-0.0, 2.0), 0.0);
    }

    #[test]
    fn beta_cases() {
        assert_eq!(beta_exponent(0.0), 0.5);
        assert_eq!(beta_exponent(1.0), 0.75);
        assert_eq!(beta_exponent(3.0), 0.875);
        assert_eq!(beta_exponent(-3.0), 0.875);
    }

    fn scalar_cfg(a1: f64, a2: f64) -> ControllerConfig {
        ControllerConfig {
            a1: vec![a1],
            a2: vec![a2],
            eta: 0.5,
            order: 1,
            b_base: vec![vec![300.0], vec![200.0]],
            b_slope: vec![vec![0.0], vec![0.0]],
            period: 1e-3,
            alpha: vec![0.5],
            mode: ControlMode::ReachingLawFaithful,
        }
    }

    #[test]
    fn surface_cases() {
        let cfg = scalar_cfg(1.0, 1e-300);
        let s = sliding_surface(&cfg, &DVector::from_element(1, 0.1), &DVector::from_element(1, -0.1));
        assert!(s[0].abs() < 1e-15);
        let cfg = scalar_cfg(10.0, 0.01);
        let s = sliding_surface(&cfg, &DVector::from_element(1, 1.0), &DVector::zeros(1));
        assert!((s[0] - 10.01).abs() < 1e-14);
        let zero = sliding_surface(&cfg, &DVector::zeros(1), &DVector::zeros(1));
        assert_eq!(zero[0], 0.0);
    }

    #[test]
    fn variable_gain_presets() {
        let sim = ControllerConfig::sim_paper();
        let z = DVector::zeros(6);
        assert_eq!(variable_gain(&sim, 0, &z)[0], 4.5e5);
        assert_eq!(variable_gain(&sim, 1, &z)[0], 2.25e5);
        assert_eq!(variable_gain(&sim, 0, &DVector::from_element(6, 100.0))[2], 4.5e5 + 0.5);
        let exp = ControllerConfig::exp_paper();
        assert_eq!(variable_gain(&exp, 0, &z)[5], 1e5);
        assert_eq!(variable_gain(&exp, 1, &z)[5], 0.25e5);
        // floored at zero
        assert_eq!(variable_gain(&sim, 0, &DVector::from_element(6, -1e9))[0], 0.0);
    }

    #[test]
    fn reaching_target_cases() {
        let cfg = scalar_cfg(1.0, 1.0);
        let z = DVector::zeros(1);
        let mut hist = SlidingHistory::new(1, 1);
        assert_eq!(reaching_target(&cfg, &hist, &z)[0], 0.0);
        hist.push(DVector::from_element(1, 1.0));
        assert!((reaching_target(&cfg, &hist, &z)[0] + 0.3).abs() < 1e-15);
        hist.push(DVector::from_element(1, 0.0));
        assert!((reaching_target(&cfg, &hist, &z)[0] + 0.2).abs() < 1e-15);
    }

    #[test]
    fn gain_bound_value_and_scaling() {
        let mut cfg = ControllerConfig::sim_paper();
        let b = gain_bounds(&cfg);
        assert!((b[0] - 408.248).abs() < 1e-3);
        assert!((b[1] - 408.248).abs() < 1e-3);
        cfg.period *= 0.5;
        let half = gain_bounds(&cfg);
        assert!((half[0] - 2.0 * b[0]).abs() < 1e-9);
    }

    #[test]
    fn region_example() {
        let r = region_ratio(&[1.0, 0.5, 0.0], &[0.3, 0.3], 0.0, RegionForm::Stated);
        let v = r.s_squared().unwrap();
        assert!((v - 0.18 / 0.23).abs() < 1e-12);
        let at_bound = (0.5f64 / 3.0).sqrt();
        assert_eq!(
            region_ratio(&[1.0, 0.5, 0.0], &[at_bound, 0.1], 0.0, RegionForm::Stated),
            Region::NonGuaranteed
        );
    }

    #[test]
    fn config_validation() {
        let mut cfg = ControllerConfig::sim_paper();
        assert!(cfg.validate().is_ok());
        cfg.alpha = vec![1.0];
        assert!(cfg.validate().is_err());
        let mut cfg = ControllerConfig::sim_paper();
        cfg.eta = 1.0;
        assert!(cfg.validate().is_err());
    }
}
