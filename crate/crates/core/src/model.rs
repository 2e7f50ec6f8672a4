//! Manipulator parameterization: D-H chain, per-joint inertial, friction and
//! gear data, the structured-text model file, and perturbed "true plant"
//! copies of a nominal model.
//!
//! Lengths are stored in metres. Model files may declare `length_unit = "mm"`
//! and are converted at load time.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Text of the bundled FANUC LR Mate 200iD model file.
pub const FANUC_LR_MATE_200ID: &str = include_str!("../../../models/fanuc_lr_mate_200id.toml");

/// Current model file format.
pub const FORMAT_VERSION: u32 = 1;

/// One row of the D-H table.
///
/// The joint transform is `Rot_z(q + theta_offset) · Trans_z(d) · Trans_x(a) · Rot_x(alpha)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DhRow {
    pub alpha: f64,
    pub a: f64,
    pub d: f64,
    pub theta_offset: f64,
}

impl DhRow {
    pub const fn new(alpha: f64, a: f64, d: f64, theta_offset: f64) -> Self {
        Self {
            alpha,
            a,
            d,
            theta_offset,
        }
    }
}

/// Inertial, friction and transmission data of one joint and the link it
/// drives.
#[derive(Debug, Clone, PartialEq)]
pub struct JointParams {
    pub gear_ratio: f64,
    pub link_mass: f64,
    /// Motor-side rotor inertia (kg·m²), reflected through `gear_ratio²`.
    pub motor_inertia: f64,
    pub link_coulomb: f64,
    /// Link viscous coefficient, applied as N·m·s/rad.
    pub link_viscous: f64,
    pub motor_coulomb: f64,
    pub motor_viscous: f64,
    /// Centre of mass in the link's own D-H frame (m).
    pub com: Vector3<f64>,
    /// Inertia tensor about the centre of mass, in the link frame (kg·m²).
    pub inertia: Matrix3<f64>,
    /// Optional joint limits (rad), honoured by inverse kinematics.
    pub limits: Option<(f64, f64)>,
}

impl JointParams {
    /// A joint with the given mass, no friction, no motor and a point-mass
    /// link located at the frame origin.
    pub fn point_mass(mass: f64) -> Self {
        Self {
            gear_ratio: 1.0,
            link_mass: mass,
            motor_inertia: 0.0,
            link_coulomb: 0.0,
            link_viscous: 0.0,
            motor_coulomb: 0.0,
            motor_viscous: 0.0,
            com: Vector3::zeros(),
            inertia: Matrix3::zeros(),
            limits: None,
        }
    }

    /// Gear-reflected motor inertia as seen at the joint.
    pub fn reflected_inertia(&self) -> f64 {
        self.gear_ratio * self.gear_ratio * self.motor_inertia
    }
}

/// A serial chain of revolute joints.
#[derive(Debug, Clone, PartialEq)]
pub struct ManipulatorModel {
    pub name: String,
    pub dh: Vec<DhRow>,
    pub joints: Vec<JointParams>,
    /// Gravity acceleration in the base frame (m/s²).
    pub gravity: Vector3<f64>,
}

impl ManipulatorModel {
    pub fn new(
        name: impl Into<String>,
        dh: Vec<DhRow>,
        joints: Vec<JointParams>,
        gravity: Vector3<f64>,
    ) -> Result<Self> {
        let model = Self {
            name: name.into(),
            dh,
            joints,
            gravity,
        };
        model.validate()?;
        Ok(model)
    }

    /// The bundled 6-DOF FANUC LR Mate 200iD model.
    pub fn fanuc_lr_mate_200id() -> Self {
        load_model(FANUC_LR_MATE_200ID).expect("bundled model file is valid")
    }

    pub fn n(&self) -> usize {
        self.dh.len()
    }

    /// Sum of all link lengths, an upper bound on the distance from the base
    /// origin to the flange.
    pub fn reach(&self) -> f64 {
        self.dh.iter().map(|r| r.a.abs() + r.d.abs()).sum()
    }

    /// Same model with every friction coefficient set to zero.
    pub fn frictionless(&self) -> Self {
        let mut m = self.clone();
        for j in &mut m.joints {
            j.link_coulomb = 0.0;
            j.link_viscous = 0.0;
            j.motor_coulomb = 0.0;
            j.motor_viscous = 0.0;
        }
        m
    }

    pub fn with_gravity(&self, gravity: Vector3<f64>) -> Self {
        Self {
            gravity,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dh.len() != self.joints.len() {
            return Err(Error::invariant(format!(
                "joint count (dh rows {} != joints {})",
                self.dh.len(),
                self.joints.len()
            )));
        }
        if self.dh.is_empty() {
            return Err(Error::invariant("joint count (empty chain)"));
        }
        if !self.gravity.iter().all(|g| g.is_finite()) {
            return Err(Error::invariant("gravity"));
        }
        for (i, (row, j)) in self.dh.iter().zip(&self.joints).enumerate() {
            let at = |field: &str| Error::invariant(format!("{field} (joint {})", i + 1));
            for (name, v) in [("a", row.a), ("d", row.d)] {
                if !v.is_finite() {
                    return Err(at(name));
                }
            }
            for (name, v) in [("alpha", row.alpha), ("theta_offset", row.theta_offset)] {
                if !(v.is_finite() && v > -PI && v <= PI) {
                    return Err(at(name));
                }
            }
            if !(j.gear_ratio.is_finite() && j.gear_ratio > 0.0) {
                return Err(at("gear_ratio"));
            }
            for (name, v) in [
                ("link_mass", j.link_mass),
                ("motor_inertia", j.motor_inertia),
                ("link_coulomb", j.link_coulomb),
                ("link_viscous", j.link_viscous),
                ("motor_coulomb", j.motor_coulomb),
                ("motor_viscous", j.motor_viscous),
            ] {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(at(name));
                }
            }
            if !j.com.iter().all(|c| c.is_finite()) {
                return Err(at("com_offset"));
            }
            if !inertia_is_valid(&j.inertia) {
                return Err(at("link_inertia"));
            }
            if let Some((lo, hi)) = j.limits {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(at("limits"));
                }
            }
        }
        Ok(())
    }
}

fn inertia_is_valid(m: &Matrix3<f64>) -> bool {
    if !m.iter().all(|x| x.is_finite()) {
        return false;
    }
    let scale = m.abs().max().max(f64::MIN_POSITIVE);
    if (m - m.transpose()).abs().max() > 1e-12 * scale {
        return false;
    }
    let eig = m.symmetric_eigenvalues();
    eig.iter().all(|&e| e >= -1e-12 * scale)
}

/// Default link inertial data: centre of mass halfway along the link's D-H
/// displacement, inertia of a uniform thin rod along that displacement.
pub fn default_link_inertia(row: &DhRow, mass: f64) -> (Vector3<f64>, Matrix3<f64>) {
    // origin of frame i-1 seen from frame i
    let back = -Vector3::new(row.a, row.d * row.alpha.sin(), row.d * row.alpha.cos());
    let com = 0.5 * back;
    let len = back.norm();
    if len == 0.0 {
        return (com, Matrix3::zeros());
    }
    let u = back / len;
    let inertia = (mass * len * len / 12.0) * (Matrix3::identity() - u * u.transpose());
    (com, inertia)
}

// ---------------------------------------------------------------------------
// Model file
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
pub enum LengthUnit {
    #[default]
    M,
    Mm,
}

impl LengthUnit {
    fn to_si(self, v: f64) -> f64 {
        match self {
            LengthUnit::M => v,
            LengthUnit::Mm => v / 1000.0,
        }
    }
}

/// An angle written either as a number (rad) or as a multiple of pi such as
/// `"-pi/2"` or `"3*pi/4"`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Angle {
    Value(f64),
    Expr(String),
}

impl Angle {
    pub fn radians(&self) -> Result<f64> {
        match self {
            Angle::Value(v) => Ok(*v),
            Angle::Expr(s) => parse_angle(s),
        }
    }
}

impl Default for Angle {
    fn default() -> Self {
        Angle::Value(0.0)
    }
}

fn parse_angle(text: &str) -> Result<f64> {
    let bad = || Error::Parse(format!("cannot read angle {text:?}"));
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let (sign, body) = match s.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, s.strip_prefix('+').unwrap_or(&s)),
    };
    let (num, den) = match body.split_once('/') {
        Some((n, d)) => (n, d.parse::<f64>().map_err(|_| bad())?),
        None => (body, 1.0),
    };
    let num = if num == "pi" {
        PI
    } else if let Some(k) = num.strip_suffix("*pi") {
        k.parse::<f64>().map_err(|_| bad())? * PI
    } else {
        num.parse::<f64>().map_err(|_| bad())?
    };
    if den == 0.0 {
        return Err(bad());
    }
    Ok(sign * num / den)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u32,
    #[serde(default)]
    name: String,
    #[serde(default)]
    length_unit: LengthUnit,
    gravity: [f64; 3],
    joint: Vec<JointEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DhEntry {
    alpha: Angle,
    a: f64,
    d: f64,
    #[serde(default)]
    theta_offset: Angle,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JointEntry {
    dh: DhEntry,
    gear_ratio: f64,
    link_mass: f64,
    motor_inertia: f64,
    link_coulomb: f64,
    link_viscous: f64,
    motor_coulomb: f64,
    motor_viscous: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    com_offset: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    link_inertia: Option<[[f64; 3]; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    limits: Option<[f64; 2]>,
}

/// Parses a model file.
pub fn load_model(config_text: &str) -> Result<ManipulatorModel> {
    let file: ModelFile = toml::from_str(config_text).map_err(|e| Error::Parse(e.to_string()))?;
    if file.format_version != FORMAT_VERSION {
        return Err(Error::Parse(format!(
            "unsupported format_version {} (expected {FORMAT_VERSION})",
            file.format_version
        )));
    }
    let unit = file.length_unit;
    let mut dh = Vec::with_capacity(file.joint.len());
    let mut joints = Vec::with_capacity(file.joint.len());
    for entry in &file.joint {
        let row = DhRow {
            alpha: entry.dh.alpha.radians()?,
            a: unit.to_si(entry.dh.a),
            d: unit.to_si(entry.dh.d),
            theta_offset: entry.dh.theta_offset.radians()?,
        };
        let (default_com, default_inertia) = default_link_inertia(&row, entry.link_mass);
        let com = entry
            .com_offset
            .map(|c| Vector3::new(unit.to_si(c[0]), unit.to_si(c[1]), unit.to_si(c[2])))
            .unwrap_or(default_com);
        let inertia = entry
            .link_inertia
            .map(|m| Matrix3::from_fn(|r, c| m[r][c]))
            .unwrap_or(default_inertia);
        dh.push(row);
        joints.push(JointParams {
            gear_ratio: entry.gear_ratio,
            link_mass: entry.link_mass,
            motor_inertia: entry.motor_inertia,
            link_coulomb: entry.link_coulomb,
            link_viscous: entry.link_viscous,
            motor_coulomb: entry.motor_coulomb,
            motor_viscous: entry.motor_viscous,
            com,
            inertia,
            limits: entry.limits.map(|l| (l[0], l[1])),
        });
    }
    ManipulatorModel::new(file.name, dh, joints, Vector3::from(file.gravity))
}

/// Writes a model file in SI units with every derived quantity explicit, so
/// that `load_model(&serialize_model(m))` reproduces `m` exactly.
pub fn serialize_model(model: &ManipulatorModel) -> String {
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        name: model.name.clone(),
        length_unit: LengthUnit::M,
        gravity: model.gravity.into(),
        joint: model
            .dh
            .iter()
            .zip(&model.joints)
            .map(|(row, j)| JointEntry {
                dh: DhEntry {
                    alpha: Angle::Value(row.alpha),
                    a: row.a,
                    d: row.d,
                    theta_offset: Angle::Value(row.theta_offset),
                },
                gear_ratio: j.gear_ratio,
                link_mass: j.link_mass,
                motor_inertia: j.motor_inertia,
                link_coulomb: j.link_coulomb,
                link_viscous: j.link_viscous,
                motor_coulomb: j.motor_coulomb,
                motor_viscous: j.motor_viscous,
                com_offset: Some(j.com.into()),
                link_inertia: Some(std::array::from_fn(|r| {
                    std::array::from_fn(|c| j.inertia[(r, c)])
                })),
                limits: j.limits.map(|(lo, hi)| [lo, hi]),
            })
            .collect(),
    };
    toml::to_string(&file).expect("model serializes")
}

// ---------------------------------------------------------------------------
// Uncertainty
// ---------------------------------------------------------------------------

/// Relative perturbation bounds used to derive a "true" plant from a nominal
/// model. Every parameter of a class is multiplied by `1 + δ`, `δ` uniform in
/// `[-bound, bound]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UncertaintySpec {
    pub mass: f64,
    pub motor_inertia: f64,
    pub link_inertia: f64,
    pub com: f64,
    pub friction: f64,
    pub gear_ratio: f64,
    pub seed: u64,
}

impl Default for UncertaintySpec {
    fn default() -> Self {
        Self::exact(0)
    }
}

impl UncertaintySpec {
    /// No perturbation at all.
    pub fn exact(seed: u64) -> Self {
        Self {
            mass: 0.0,
            motor_inertia: 0.0,
            link_inertia: 0.0,
            com: 0.0,
            friction: 0.0,
            gear_ratio: 0.0,
            seed,
        }
    }

    /// The same bound on every parameter class.
    pub fn uniform(bound: f64, seed: u64) -> Self {
        Self {
            mass: bound,
            motor_inertia: bound,
            link_inertia: bound,
            com: bound,
            friction: bound,
            gear_ratio: bound,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, b) in [
            ("mass", self.mass),
            ("motor_inertia", self.motor_inertia),
            ("link_inertia", self.link_inertia),
            ("com", self.com),
            ("friction", self.friction),
            ("gear_ratio", self.gear_ratio),
        ] {
            if !(b.is_finite() && (0.0..1.0).contains(&b)) {
                return Err(Error::invariant(format!("uncertainty.{name}")));
            }
        }
        Ok(())
    }
}

/// Returns a copy of `model` with every parameter scaled by an independent
/// factor `1 + δ`. The random stream does not depend on the bounds, so
/// changing one class's bound leaves the draws of the others untouched.
pub fn perturb_model(model: &ManipulatorModel, spec: &UncertaintySpec) -> ManipulatorModel {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut factor = |bound: f64| -> f64 {
        let u: f64 = rng.random_range(-1.0..=1.0);
        1.0 + bound * u
    };
    let mut out = model.clone();
    for j in &mut out.joints {
        j.gear_ratio *= factor(spec.gear_ratio);
        j.link_mass *= factor(spec.mass);
        j.motor_inertia *= factor(spec.motor_inertia);
        // a scalar multiple keeps the tensor symmetric PSD
        j.inertia *= factor(spec.link_inertia);
        for c in j.com.iter_mut() {
            *c *= factor(spec.com);
        }
        j.link_coulomb *= factor(spec.friction);
        j.link_viscous *= factor(spec.friction);
        j.motor_coulomb *= factor(spec.friction);
        j.motor_viscous *= factor(spec.friction);
    }
    out
}
