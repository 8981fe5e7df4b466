//! Physical parameter sets and their on-disk schema.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::control::pi::PiGains;
use crate::error::{Error, Result};
use crate::lti::Signal;
use crate::units::{Dimension, RawQuantity};

/// Tolerance on `k_t * i_nominal` against a separately quoted nominal torque.
pub const NOMINAL_TORQUE_TOL: f64 = 0.02;

/// Electrical and rotor parameters, SI units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MotorParams {
    /// Phase-to-phase winding resistance `R`, ohm.
    pub resistance: f64,
    /// Phase-to-phase winding inductance `L`, H.
    pub inductance: f64,
    /// `k_t`, Nm/A.
    pub torque_constant: f64,
    /// `k_b`, V*s/rad.
    pub back_emf_constant: f64,
    /// Rotor viscous friction `b_m`, Nm*s/rad.
    pub friction: f64,
    /// Rotor inertia `J_m`, kg*m^2.
    pub inertia: f64,
    /// Supply voltage, also the saturation limit on the voltage command.
    pub max_voltage: f64,
    pub nominal_current: f64,
    /// Datasheet nominal torque, if quoted separately from `k_t * i_nominal`.
    pub nominal_torque: Option<f64>,
}

impl MotorParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("resistance", self.resistance),
            ("inductance", self.inductance),
            ("torque_constant", self.torque_constant),
            ("back_emf_constant", self.back_emf_constant),
            ("friction", self.friction),
            ("inertia", self.inertia),
            ("max_voltage", self.max_voltage),
            ("nominal_current", self.nominal_current),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("motor.{name} must be positive, got {v}")));
            }
        }
        if let Some(t) = self.nominal_torque {
            if !(t > 0.0) {
                return Err(Error::Config(format!("motor.nominal_torque must be positive, got {t}")));
            }
        }
        Ok(())
    }

    /// `k_t * i_nominal`.
    pub fn derived_nominal_torque(&self) -> f64 {
        self.torque_constant * self.nominal_current
    }

    /// Relative gap between the quoted nominal torque and `k_t * i_nominal`,
    /// when it exceeds [`NOMINAL_TORQUE_TOL`].
    pub fn nominal_torque_mismatch(&self) -> Option<f64> {
        let quoted = self.nominal_torque?;
        let rel = (self.derived_nominal_torque() - quoted).abs() / quoted;
        (rel > NOMINAL_TORQUE_TOL).then_some(rel)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransmissionParams {
    /// Motor turns per output turn, `n`.
    pub gear_ratio: f64,
    /// `k_c`, Nm/rad.
    pub stiffness: f64,
    /// `b_c`, Nm*s/rad.
    pub damping: f64,
}

impl TransmissionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gear_ratio > 0.0) || !self.gear_ratio.is_finite() {
            return Err(Error::Config(format!(
                "transmission.gear_ratio must be positive, got {}",
                self.gear_ratio
            )));
        }
        if !(self.stiffness > 0.0) || !self.stiffness.is_finite() {
            return Err(Error::Config(format!(
                "transmission.stiffness must be positive, got {}",
                self.stiffness
            )));
        }
        if !(self.damping >= 0.0) || !self.damping.is_finite() {
            return Err(Error::Config(format!(
                "transmission.damping must be non-negative, got {}",
                self.damping
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Paradigm {
    Conventional,
    Sea,
    Qdd,
    Custom,
}

impl Paradigm {
    pub const PRESETS: [Paradigm; 3] = [Paradigm::Conventional, Paradigm::Sea, Paradigm::Qdd];

    pub fn as_str(&self) -> &'static str {
        match self {
            Paradigm::Conventional => "conventional",
            Paradigm::Sea => "sea",
            Paradigm::Qdd => "qdd",
            Paradigm::Custom => "custom",
        }
    }
}

impl fmt::Display for Paradigm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Paradigm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conventional" => Ok(Paradigm::Conventional),
            "sea" => Ok(Paradigm::Sea),
            "qdd" => Ok(Paradigm::Qdd),
            "custom" => Ok(Paradigm::Custom),
            other => Err(Error::Config(format!("unknown actuation paradigm {other:?}"))),
        }
    }
}

/// One actuation paradigm's complete parameter set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActuatorSpec {
    pub label: Paradigm,
    pub name: String,
    pub motor_model: Option<String>,
    pub motor: MotorParams,
    pub transmission: TransmissionParams,
    /// Tuned low-level torque-loop gains shipped with the spec, if any.
    pub gains: Option<PiGains>,
}

impl ActuatorSpec {
    pub fn validate(&self) -> Result<()> {
        self.motor.validate()?;
        self.transmission.validate()?;
        if let Some(g) = &self.gains {
            g.validate()?;
        }
        Ok(())
    }

    /// Non-fatal inconsistencies in the quoted data.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(rel) = self.motor.nominal_torque_mismatch() {
            out.push(format!(
                "{}: k_t * i_nominal = {:.4} Nm differs from quoted nominal torque {:.4} Nm by {:.1}%",
                self.name,
                self.motor.derived_nominal_torque(),
                self.motor.nominal_torque.unwrap_or(f64::NAN),
                rel * 100.0
            ));
        }
        out
    }

    pub fn preset(label: Paradigm) -> Result<Self> {
        let text = match label {
            Paradigm::Conventional => include_str!("../../presets/conventional.toml"),
            Paradigm::Sea => include_str!("../../presets/sea.toml"),
            Paradigm::Qdd => include_str!("../../presets/qdd.toml"),
            Paradigm::Custom => {
                return Err(Error::Config("there is no built-in custom preset".into()))
            }
        };
        Self::from_toml(text)
    }

    pub fn presets() -> Result<Vec<Self>> {
        Paradigm::PRESETS.iter().map(|p| Self::preset(*p)).collect()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: SpecFile = toml::from_str(text).map_err(|e| Error::Schema(e.message().to_string()))?;
        file.resolve()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Preset label (`"qdd"`) or path to a spec file.
    pub fn resolve_ref(reference: &str, base: Option<&Path>) -> Result<Self> {
        if let Ok(p) = reference.parse::<Paradigm>() {
            if p != Paradigm::Custom {
                return Self::preset(p);
            }
        }
        let path = match base {
            Some(dir) if Path::new(reference).is_relative() => dir.join(reference),
            _ => Path::new(reference).to_path_buf(),
        };
        if !path.exists() {
            return Err(Error::Config(format!(
                "spec {reference:?} is neither a preset label nor an existing file"
            )));
        }
        Self::load(&path)
    }

    /// Copy with a different gear ratio, relabelled custom.
    pub fn with_gear_ratio(&self, n: f64) -> Self {
        let mut s = self.clone();
        s.transmission.gear_ratio = n;
        s.label = Paradigm::Custom;
        s.name = format!("{}-n{n}", self.name);
        s.gains = None;
        s
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    label: Paradigm,
    name: Option<String>,
    motor: MotorFile,
    transmission: TransmissionFile,
    control: Option<ControlFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MotorFile {
    model: Option<String>,
    nominal_voltage: RawQuantity,
    nominal_current: RawQuantity,
    nominal_torque: Option<RawQuantity>,
    resistance: RawQuantity,
    inductance: RawQuantity,
    friction: RawQuantity,
    torque_constant: RawQuantity,
    back_emf_constant: Option<RawQuantity>,
    inertia: RawQuantity,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransmissionFile {
    gear_ratio: GearRatio,
    stiffness: RawQuantity,
    damping: RawQuantity,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ControlFile {
    kp: RawQuantity,
    ki: RawQuantity,
    feedforward: RawQuantity,
    integrator_limit: RawQuantity,
}

/// Either a plain number or `"n:1"`.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum GearRatio {
    Number(f64),
    Text(String),
}

impl GearRatio {
    fn value(&self) -> Result<f64> {
        match self {
            GearRatio::Number(v) => Ok(*v),
            GearRatio::Text(s) => {
                let parse = |t: &str| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("cannot parse gear ratio {s:?}")))
                };
                match s.split_once(':') {
                    Some((a, b)) => Ok(parse(a)? / parse(b)?),
                    None => parse(s),
                }
            }
        }
    }
}

impl SpecFile {
    fn resolve(self) -> Result<ActuatorSpec> {
        let m = &self.motor;
        let torque_constant = m.torque_constant.resolve(Dimension::TorqueConstant, "motor.torque_constant")?;
        let back_emf_constant = match &m.back_emf_constant {
            Some(q) => q.resolve(Dimension::BackEmf, "motor.back_emf_constant")?,
            // ideal machine in SI units
            None => torque_constant,
        };
        let motor = MotorParams {
            resistance: m.resistance.resolve(Dimension::Resistance, "motor.resistance")?,
            inductance: m.inductance.resolve(Dimension::Inductance, "motor.inductance")?,
            torque_constant,
            back_emf_constant,
            friction: m.friction.resolve(Dimension::RotaryDamping, "motor.friction")?,
            inertia: m.inertia.resolve(Dimension::Inertia, "motor.inertia")?,
            max_voltage: m.nominal_voltage.resolve(Dimension::Voltage, "motor.nominal_voltage")?,
            nominal_current: m.nominal_current.resolve(Dimension::Current, "motor.nominal_current")?,
            nominal_torque: m
                .nominal_torque
                .as_ref()
                .map(|q| q.resolve(Dimension::Torque, "motor.nominal_torque"))
                .transpose()?,
        };
        let t = &self.transmission;
        let transmission = TransmissionParams {
            gear_ratio: t.gear_ratio.value()?,
            stiffness: t.stiffness.resolve(Dimension::Stiffness, "transmission.stiffness")?,
            damping: t.damping.resolve(Dimension::RotaryDamping, "transmission.damping")?,
        };
        let gains = self
            .control
            .as_ref()
            .map(|c| -> Result<PiGains> {
                Ok(PiGains {
                    kp: c.kp.resolve(Dimension::ProportionalGain, "control.kp")?,
                    ki: c.ki.resolve(Dimension::IntegralGain, "control.ki")?,
                    feedforward: c.feedforward.resolve(Dimension::ProportionalGain, "control.feedforward")?,
                    integrator_limit: c.integrator_limit.resolve(Dimension::Voltage, "control.integrator_limit")?,
                })
            })
            .transpose()?;
        let spec = ActuatorSpec {
            label: self.label,
            name: self.name.unwrap_or_else(|| self.label.to_string()),
            motor_model: self.motor.model.clone(),
            motor,
            transmission,
            gains,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Prescribed hip trajectory: angle and its time derivative.
#[derive(Clone)]
pub struct HipMotion {
    pub angle: Signal,
    pub rate: Signal,
}

/// Human side of the coupled model.
#[derive(Clone)]
pub struct HumanParams {
    /// Limb plus brace inertia about the hip `J_h`, kg*m^2.
    pub inertia: f64,
    /// Muscle torque `tau_l(t)`, used when the hip is free.
    pub muscle_torque: Signal,
    /// Hip angle imposed on the output, used when the hip is prescribed.
    pub prescribed: Option<HipMotion>,
}

/// Order-of-magnitude leg inertia about the hip.
pub const DEFAULT_LIMB_INERTIA: f64 = 1.0;

impl Default for HumanParams {
    fn default() -> Self {
        Self {
            inertia: DEFAULT_LIMB_INERTIA,
            muscle_torque: crate::lti::sim::zero_signal(),
            prescribed: None,
        }
    }
}

impl HumanParams {
    pub fn prescribed(motion: HipMotion) -> Self {
        Self {
            prescribed: Some(motion),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.inertia > 0.0) || !self.inertia.is_finite() {
            return Err(Error::Config(format!(
                "limb inertia must be positive, got {}",
                self.inertia
            )));
        }
        Ok(())
    }
}

impl fmt::Debug for HumanParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HumanParams")
            .field("inertia", &self.inertia)
            .field("prescribed", &self.prescribed.is_some())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qdd_preset_round_trips_table_values() {
        let s = ActuatorSpec::preset(Paradigm::Qdd).unwrap();
        assert_eq!(s.motor.resistance, 0.58);
        assert_eq!(s.motor.inductance, 0.21e-3);
        assert_eq!(s.motor.torque_constant, 0.2886);
        assert_eq!(s.motor.back_emf_constant, 0.2886);
        assert_eq!(s.motor.friction, 0.08);
        assert_eq!(s.motor.inertia, 8.95e-5);
        assert_eq!(s.transmission.gear_ratio, 8.0);
        assert_eq!(s.transmission.stiffness, 500.0);
        assert_eq!(s.transmission.damping, 0.01);
        assert_eq!(s.motor.max_voltage, 42.0);
        assert_eq!(s.motor.nominal_current, 7.5);
        assert!(s.motor.nominal_torque_mismatch().is_none());
    }

    #[test]
    fn other_presets_load() {
        let c = ActuatorSpec::preset(Paradigm::Conventional).unwrap();
        assert_eq!(c.transmission.gear_ratio, 50.0);
        assert_eq!(c.motor.inertia, 1.81e-5);
        assert_eq!(c.motor.max_voltage, 24.0);
        let s = ActuatorSpec::preset(Paradigm::Sea).unwrap();
        assert_eq!(s.transmission.stiffness, 120.0);
        assert_eq!(s.motor.inertia, 3.06e-4);
        assert_eq!(s.motor.max_voltage, 48.0);
    }

    #[test]
    fn datasheet_torque_gaps_are_warnings() {
        // quoted nominal torques of the two catalogue motors sit ~7.5% above k_t * i_nominal
        for p in [Paradigm::Conventional, Paradigm::Sea] {
            let s = ActuatorSpec::preset(p).unwrap();
            assert_eq!(s.warnings().len(), 1, "{p}");
        }
        assert!(ActuatorSpec::preset(Paradigm::Qdd).unwrap().warnings().is_empty());
    }

    #[test]
    fn unknown_key_is_a_schema_error() {
        let text = include_str!("../../presets/qdd.toml").replace("gear_ratio", "gearRatioo");
        match ActuatorSpec::from_toml(&text) {
            Err(Error::Schema(msg)) => assert!(msg.contains("gearRatioo"), "{msg}"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn bare_number_is_a_unit_error() {
        let text = include_str!("../../presets/qdd.toml").replace("\"500 Nm/rad\"", "500");
        assert!(matches!(ActuatorSpec::from_toml(&text), Err(Error::Unit(_))));
    }

    #[test]
    fn non_positive_parameters_rejected() {
        let text = include_str!("../../presets/qdd.toml").replace("\"0.58 ohm\"", "\"0 ohm\"");
        assert!(matches!(ActuatorSpec::from_toml(&text), Err(Error::Config(_))));
    }

    #[test]
    fn gear_ratio_accepts_ratio_notation() {
        let text = include_str!("../../presets/qdd.toml").replace("gear_ratio = 8", "gear_ratio = \"8:1\"");
        assert_eq!(ActuatorSpec::from_toml(&text).unwrap().transmission.gear_ratio, 8.0);
    }
}
