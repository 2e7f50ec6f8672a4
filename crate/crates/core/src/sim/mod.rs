//! Closed-loop simulation: the plant integrates at a fine step while the
//! controller runs at its own interval with a zero-order hold in between.

mod metrics;
mod output;
mod scenario;
mod trace;

pub use metrics::{cartesian_errors, compute_metrics, CartesianError, JointMetrics, Metrics};
pub use output::{emit_comparison, emit_outputs};
pub use scenario::{
    load_scenario, load_scenario_file, preset_scenario, Integrator, NoiseConfig, RunOptions,
    Scenario, ScenarioFile, PRESETS,
};
pub use trace::{parse_trace, trace_csv, SimTrace, TraceRow};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::control::{Controller, ControllerKind, ReferencePair};
use crate::dynamics::{bias_forces, friction_torque, inertia_matrix, step_discrete_model, step_plant, JointState};
use crate::error::{Error, Result};

/// Whole plant steps in `interval`, if it is an integer multiple.
pub fn steps_per(interval: f64, plant_step: f64) -> Option<usize> {
    let ratio = interval / plant_step;
    let k = ratio.round();
    (k >= 1.0 && (ratio - k).abs() < 1e-9 * k).then_some(k as usize)
}

/// Sample-and-hold uniform noise, one row per plant step. A fresh draw per
/// joint is taken every `hold_interval`.
pub fn band_limited_noise(
    cfg: &NoiseConfig,
    n: usize,
    duration: f64,
    plant_step: f64,
) -> Result<Vec<DVector<f64>>> {
    let hold = steps_per(cfg.hold_interval, plant_step)
        .ok_or_else(|| Error::invariant("noise.hold_interval (multiple of the plant step)"))?;
    if !(cfg.amplitude.is_finite() && cfg.amplitude >= 0.0) {
        return Err(Error::invariant("noise.amplitude"));
    }
    let steps = (duration / plant_step).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(steps);
    let mut current = DVector::zeros(n);
    for k in 0..steps {
        if k % hold == 0 {
            current = DVector::from_fn(n, |_, _| {
                let u: f64 = rng.random_range(-1.0..=1.0);
                cfg.amplitude * u
            });
        }
        out.push(current.clone());
    }
    Ok(out)
}

/// Runs one controller against the scenario's plant.
pub fn run_simulation(scenario: &Scenario, kind: ControllerKind) -> Result<SimTrace> {
    let refs = &scenario.trajectory;
    if refs.len() < 2 {
        return Err(Error::Contract("trajectory needs at least two samples".into()));
    }
    let n = scenario.plant.n();
    let period = scenario.controller.period;
    let (substeps, h) = match scenario.run.integrator {
        Integrator::SemiImplicit => (
            steps_per(period, scenario.run.plant_step).ok_or_else(|| {
                Error::invariant("run.plant_step (controller interval must be an integer multiple)")
            })?,
            scenario.run.plant_step,
        ),
        Integrator::DiscreteModel => (1, period),
    };
    let ticks = refs.len() - 1;
    let noise = band_limited_noise(&scenario.noise, n, ticks as f64 * period, h)?;
    let mut controller = Controller::new(kind, scenario.controller.clone(), scenario.nominal.clone())?;

    let offset = DVector::from_column_slice(&scenario.run.initial_offset);
    let mut state = JointState::at_rest(&refs[0].q_ref + offset);
    let mut trace = SimTrace::new(n, period);
    for k in 0..ticks {
        let pair = ReferencePair {
            r: &refs[k].q_ref,
            dr: &refs[k].dq_ref,
            r_next: &refs[k + 1].q_ref,
            dr_next: &refs[k + 1].dq_ref,
        };
        let out = controller.step(&state, pair).map_err(|e| tick_context(e, k))?;
        let start = state.clone();
        let d = noise[k * substeps].clone();
        let mut taken = 0;
        for sub in 0..substeps {
            let dk = &noise[k * substeps + sub];
            state = match scenario.run.integrator {
                Integrator::SemiImplicit => step_plant(&scenario.plant, &state, &out.tau, dk, h),
                Integrator::DiscreteModel => step_discrete_model(&scenario.plant, &state, &out.tau, dk, h),
            }
            .map_err(|e| tick_context(e, k))?;
            taken += 1;
        }
        assert_eq!(taken, substeps, "rate contract: plant sub-steps per controller tick");
        if !state.is_finite() {
            return Err(Error::Contract(format!("plant state diverged at tick {k}")));
        }
        // mean acceleration over the tick, the sampled model's q̈_k
        let ddq = (&state.dq - &start.dq) / period;
        let q = start.q.as_slice();
        let h_true = &out.tau
            - inertia_matrix(&scenario.nominal, q) * &ddq
            - bias_forces(&scenario.nominal, q, start.dq.as_slice())
            - friction_torque(&scenario.nominal, start.dq.as_slice());
        trace.push(trace::TraceRow {
            t: k as f64 * period,
            r: refs[k].q_ref.clone(),
            q: start.q,
            dq: start.dq,
            ddq,
            tau: out.tau,
            s: out.s,
            hhat: out.hhat,
            h: h_true,
            d,
        });
    }
    Ok(trace)
}

fn tick_context(e: Error, k: usize) -> Error {
    match e {
        Error::SingularInertia => Error::Contract(format!("inertia matrix not positive definite at tick {k}")),
        other => other.with_context(format!("tick {k}")),
    }
}
