use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::control::ControllerConfig;
use crate::error::{Error, Result};
use crate::kinematics::EulerZyx;
use crate::model::{load_model, perturb_model, Angle, ManipulatorModel, UncertaintySpec};
use crate::planning::{plan_joint_moves, plan_tour, JointWaypoint, PlanOptions, TrajectorySample, Waypoint};

pub const SCENARIO_FORMAT_VERSION: u32 = 1;

/// Scenario files shipped with the crate, by name.
pub const PRESETS: &[(&str, &str)] = &[
    ("sim-paper", include_str!("../../../../scenarios/sim-paper.toml")),
    ("exp-paper", include_str!("../../../../scenarios/exp-paper.toml")),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Time between fresh draws (s).
    pub hold_interval: f64,
    /// Half-width of the uniform draw per joint (N·m).
    pub amplitude: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            hold_interval: 0.1,
            amplitude: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    /// Semi-implicit Euler at the plant step.
    #[default]
    SemiImplicit,
    /// The sampled model `q⁺ = q + Tq̇, q̇⁺ = q̇ + Tq̈` once per controller tick.
    DiscreteModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub plant_step: f64,
    pub integrator: Integrator,
    /// Initial `q − r₀` (rad).
    pub initial_offset: Vec<f64>,
    /// Acceleration interval for the gain check (rad/s²).
    pub ddq_range: (f64, f64),
    /// Assumed bound on `M̄⁻¹Ȟ` per joint for the convergence region.
    pub e_bound: Vec<f64>,
}

/// A fully resolved scenario: models, planned reference and settings.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub nominal: ManipulatorModel,
    pub plant: ManipulatorModel,
    pub uncertainty: UncertaintySpec,
    pub controller: ControllerConfig,
    pub trajectory: Vec<TrajectorySample>,
    pub noise: NoiseConfig,
    pub run: RunOptions,
}

// ---------------------------------------------------------------------------
// File layout
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub format_version: u32,
    pub name: String,
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub uncertainty: UncertaintySpec,
    pub trajectory: TrajectorySection,
    pub controller: toml::Table,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// Model file, relative to the scenario file.
    #[serde(default)]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrajectoryKind {
    Cartesian,
    Joint,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySection {
    pub kind: TrajectoryKind,
    pub sample_interval: f64,
    #[serde(default = "default_jerk_factor")]
    pub jerk_factor: f64,
    /// IK seed for the first Cartesian waypoint (rad).
    #[serde(default)]
    pub q_seed: Option<Vec<Angle>>,
    #[serde(rename = "waypoint")]
    pub waypoints: Vec<WaypointEntry>,
}

fn default_jerk_factor() -> f64 {
    crate::planning::DEFAULT_JERK_FACTOR
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaypointEntry {
    #[serde(default)]
    pub position: Option<[f64; 3]>,
    /// ZYX Euler angles (yaw, pitch, roll), rad or pi expressions.
    #[serde(default)]
    pub euler: Option<[Angle; 3]>,
    /// Joint target in degrees, for joint-space trajectories.
    #[serde(default)]
    pub q_deg: Option<Vec<f64>>,
    #[serde(default)]
    pub accel_limit: f64,
    #[serde(default)]
    pub dwell_after: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub plant_step: f64,
    pub integrator: Integrator,
    pub initial_offset: Option<Vec<f64>>,
    pub ddq_range: [f64; 2],
    pub e_bound: Option<Vec<f64>>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            plant_step: 0.25e-3,
            integrator: Integrator::SemiImplicit,
            initial_offset: None,
            ddq_range: [-100.0, 100.0],
            e_bound: None,
        }
    }
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if file.format_version != SCENARIO_FORMAT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported scenario format_version {} (expected {SCENARIO_FORMAT_VERSION})",
                file.format_version
            )));
        }
        Ok(file)
    }

    /// Replaces both the plant-perturbation and the noise seed.
    pub fn override_seed(&mut self, seed: u64) {
        self.uncertainty.seed = seed;
        self.noise.seed = seed;
    }

    /// Builds models, controller and reference. Relative model paths are
    /// taken from `base_dir`.
    pub fn resolve(&self, base_dir: Option<&Path>) -> Result<Scenario> {
        let nominal = match &self.model.file {
            None => ManipulatorModel::fanuc_lr_mate_200id(),
            Some(p) => {
                let path = match base_dir {
                    Some(dir) if p.is_relative() => dir.join(p),
                    _ => p.clone(),
                };
                let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                load_model(&text)?
            }
        };
        let n = nominal.n();
        self.uncertainty.validate()?;
        let plant = perturb_model(&nominal, &self.uncertainty);
        let controller = controller_config(&self.controller)?;
        if controller.n() != n {
            return Err(Error::Dimension {
                what: "controller gains",
                expected: n,
                got: controller.n(),
            });
        }
        if controller.period != self.trajectory.sample_interval {
            return Err(Error::invariant(
                "trajectory.sample_interval (must equal controller.period)",
            ));
        }
        let trajectory = self.plan(&nominal)?;
        let run = &self.run;
        let vector = |v: &Option<Vec<f64>>, what: &'static str| -> Result<Vec<f64>> {
            match v {
                None => Ok(vec![0.0; n]),
                Some(v) if v.len() == n => Ok(v.clone()),
                Some(v) => Err(Error::Dimension {
                    what,
                    expected: n,
                    got: v.len(),
                }),
            }
        };
        if !(run.plant_step.is_finite() && run.plant_step > 0.0) {
            return Err(Error::invariant("run.plant_step"));
        }
        if !(self.noise.hold_interval.is_finite() && self.noise.hold_interval > 0.0) {
            return Err(Error::invariant("noise.hold_interval"));
        }
        Ok(Scenario {
            name: self.name.clone(),
            plant,
            uncertainty: self.uncertainty.clone(),
            controller,
            trajectory,
            noise: self.noise.clone(),
            run: RunOptions {
                plant_step: run.plant_step,
                integrator: run.integrator,
                initial_offset: vector(&run.initial_offset, "run.initial_offset")?,
                ddq_range: (run.ddq_range[0], run.ddq_range[1]),
                e_bound: vector(&run.e_bound, "run.e_bound")?,
            },
            nominal,
        })
    }

    fn plan(&self, model: &ManipulatorModel) -> Result<Vec<TrajectorySample>> {
        let tr = &self.trajectory;
        let opts = PlanOptions {
            jerk_factor: tr.jerk_factor,
            ..PlanOptions::default()
        };
        let missing = |i: usize, what: &str| Error::Parse(format!("trajectory.waypoint {}: missing `{what}`", i + 1));
        match tr.kind {
            TrajectoryKind::Cartesian => {
                let mut wps = Vec::new();
                for (i, w) in tr.waypoints.iter().enumerate() {
                    let p = w.position.ok_or_else(|| missing(i, "position"))?;
                    let e = w.euler.as_ref().ok_or_else(|| missing(i, "euler"))?;
                    wps.push(Waypoint {
                        position: Vector3::from(p),
                        euler: EulerZyx::new(e[0].radians()?, e[1].radians()?, e[2].radians()?),
                        accel_limit: w.accel_limit,
                        dwell_after: w.dwell_after,
                    });
                }
                let seed = match &tr.q_seed {
                    Some(q) => q.iter().map(Angle::radians).collect::<Result<Vec<_>>>()?,
                    None => vec![0.0; model.n()],
                };
                if seed.len() != model.n() {
                    return Err(Error::Dimension {
                        what: "trajectory.q_seed",
                        expected: model.n(),
                        got: seed.len(),
                    });
                }
                plan_tour(model, &wps, tr.sample_interval, &seed, &opts)
            }
            TrajectoryKind::Joint => {
                let mut wps = Vec::new();
                for (i, w) in tr.waypoints.iter().enumerate() {
                    let q = w.q_deg.as_ref().ok_or_else(|| missing(i, "q_deg"))?;
                    wps.push(JointWaypoint {
                        q: q.iter().map(|d| d.to_radians()).collect(),
                        accel_limit: w.accel_limit,
                        dwell_after: w.dwell_after,
                    });
                }
                plan_joint_moves(model, &wps, tr.sample_interval, &opts)
            }
        }
    }
}

/// `preset = "..."` supplies every field; other keys in the section replace
/// the preset's values.
fn controller_config(section: &toml::Table) -> Result<ControllerConfig> {
    let mut table = match section.get("preset") {
        None => toml::Table::new(),
        Some(toml::Value::String(name)) => {
            let preset = ControllerConfig::preset(name)
                .ok_or_else(|| Error::Parse(format!("unknown controller preset `{name}`")))?;
            toml::Table::try_from(&preset).map_err(|e| Error::Parse(e.to_string()))?
        }
        Some(_) => return Err(Error::Parse("controller.preset must be a string".into())),
    };
    for (k, v) in section {
        if k != "preset" {
            table.insert(k.clone(), v.clone());
        }
    }
    let cfg: ControllerConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Parse(format!("controller: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_scenario(text: &str, base_dir: Option<&Path>, seed: Option<u64>) -> Result<Scenario> {
    let mut file = ScenarioFile::parse(text)?;
    if let Some(s) = seed {
        file.override_seed(s);
    }
    file.resolve(base_dir)
}

pub fn preset_scenario(name: &str, seed: Option<u64>) -> Option<Result<Scenario>> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| load_scenario(text, None, seed))
}

/// Reads a scenario from `path`, trying `path.toml` and then the shipped
/// presets by file stem when `path` does not exist.
pub fn load_scenario_file(path: &Path, seed: Option<u64>) -> Result<Scenario> {
    let mut with_ext = path.as_os_str().to_owned();
    with_ext.push(".toml");
    let with_ext = PathBuf::from(with_ext);
    for candidate in [path, with_ext.as_path()] {
        if candidate.is_file() {
            let text = std::fs::read_to_string(candidate).map_err(|e| Error::io(candidate, e))?;
            return load_scenario(&text, candidate.parent(), seed);
        }
    }
    if let Some(found) = path
        .file_stem()
        .and_then(|s| s.to_str())
        .and_then(|stem| preset_scenario(stem, seed))
    {
        return found;
    }
    Err(Error::io(
        path,
        std::io::Error::new(std::io::ErrorKind::NotFound, "scenario file not found"),
    ))
}
