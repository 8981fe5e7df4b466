//! Unit-suffixed quantities ("0.21 mH", "895 g*cm^2", "10 deg") resolved to SI.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Voltage,
    Current,
    Torque,
    Resistance,
    Inductance,
    /// Nm*s/rad
    RotaryDamping,
    /// Nm/A
    TorqueConstant,
    /// V*s/rad
    BackEmf,
    Inertia,
    /// Nm/rad
    Stiffness,
    Angle,
    Frequency,
    Time,
    AngularVelocity,
    /// V/Nm
    ProportionalGain,
    /// V/(Nm*s)
    IntegralGain,
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Dimension::Voltage => "voltage (V)",
            Dimension::Current => "current (A)",
            Dimension::Torque => "torque (Nm)",
            Dimension::Resistance => "resistance (ohm)",
            Dimension::Inductance => "inductance (H)",
            Dimension::RotaryDamping => "rotary damping (Nm*s/rad)",
            Dimension::TorqueConstant => "torque constant (Nm/A)",
            Dimension::BackEmf => "back-EMF constant (V*s/rad)",
            Dimension::Inertia => "inertia (kg*m^2)",
            Dimension::Stiffness => "stiffness (Nm/rad)",
            Dimension::Angle => "angle (rad)",
            Dimension::Frequency => "frequency (Hz)",
            Dimension::Time => "time (s)",
            Dimension::AngularVelocity => "angular velocity (rad/s)",
            Dimension::ProportionalGain => "proportional gain (V/Nm)",
            Dimension::IntegralGain => "integral gain (V/(Nm*s))",
        };
        f.write_str(s)
    }
}

fn canonical_unit(raw: &str) -> String {
    raw.chars()
        .filter(|c| !c.is_whitespace())
        .collect::<String>()
        .replace(['·', '⋅', '.'], "*")
        .replace('²', "^2")
        .replace(['Ω', 'Ω'], "ohm")
        .replace(['µ', 'μ'], "u")
        .replace('°', "deg")
        .replace("N*m", "Nm")
}

/// SI scale factor of `unit` for `dim`, or `None` if the unit is not an
/// accepted spelling of that dimension.
fn scale(dim: Dimension, unit: &str) -> Option<Scale> {
    let u = canonical_unit(unit);
    let s = match (dim, u.as_str()) {
        (Dimension::Voltage, "V") => 1.0,
        (Dimension::Voltage, "mV") => 1e-3,
        (Dimension::Current, "A") => 1.0,
        (Dimension::Current, "mA") => 1e-3,
        (Dimension::Torque, "Nm") => 1.0,
        (Dimension::Torque, "mNm") => 1e-3,
        (Dimension::Resistance, "ohm" | "Ohm") => 1.0,
        (Dimension::Resistance, "mohm" | "mOhm") => 1e-3,
        (Dimension::Inductance, "H") => 1.0,
        (Dimension::Inductance, "mH") => 1e-3,
        (Dimension::Inductance, "uH") => 1e-6,
        (Dimension::RotaryDamping, "Nm*s/rad" | "Nms/rad") => 1.0,
        (Dimension::RotaryDamping, "mNm*s/rad" | "mNms/rad") => 1e-3,
        (Dimension::TorqueConstant, "Nm/A") => 1.0,
        (Dimension::TorqueConstant, "mNm/A") => 1e-3,
        (Dimension::BackEmf, "V*s/rad" | "V/(rad/s)" | "Vs/rad") => 1.0,
        (Dimension::BackEmf, "mV*s/rad" | "mV/(rad/s)") => 1e-3,
        (Dimension::BackEmf, "V/rpm") => 60.0 / (2.0 * PI),
        (Dimension::BackEmf, "V/krpm") => 60.0 / (2.0 * PI) / 1e3,
        (Dimension::Inertia, "kg*m^2" | "kgm^2") => 1.0,
        (Dimension::Inertia, "kg*cm^2" | "kgcm^2") => 1e-4,
        (Dimension::Inertia, "g*cm^2" | "gcm^2") => 1e-7,
        (Dimension::Stiffness, "Nm/rad") => 1.0,
        (Dimension::Stiffness, "Nm/deg") => 180.0 / PI,
        (Dimension::Angle, "rad") => 1.0,
        (Dimension::Angle, "deg") => PI / 180.0,
        (Dimension::Frequency, "Hz") => 1.0,
        (Dimension::Frequency, "kHz") => 1e3,
        (Dimension::Frequency, "rad/s") => 1.0 / (2.0 * PI),
        (Dimension::Time, "s") => 1.0,
        (Dimension::Time, "ms") => 1e-3,
        (Dimension::Time, "us") => 1e-6,
        (Dimension::Time, "min") => 60.0,
        (Dimension::AngularVelocity, "rad/s") => 1.0,
        (Dimension::AngularVelocity, "deg/s") => PI / 180.0,
        (Dimension::AngularVelocity, "rpm" | "RPM") => 2.0 * PI / 60.0,
        (Dimension::ProportionalGain, "V/Nm") => 1.0,
        (Dimension::IntegralGain, "V/(Nm*s)" | "V/Nm/s") => 1.0,
        _ => return None,
    };
    let exp = s.log10();
    if (exp - exp.round()).abs() < 1e-12 {
        return Some(Scale::Decimal(exp.round() as i32));
    }
    Some(Scale::Mul(s))
}

#[derive(Clone, Copy)]
enum Scale {
    Mul(f64),
    /// Power-of-ten prefix, applied to the decimal text so "0.21 mH" parses
    /// to the correctly rounded 2.1e-4.
    Decimal(i32),
}

fn parse_number(num: &str, text: &str) -> Result<f64> {
    num.parse()
        .map_err(|_| Error::Unit(format!("cannot parse a number from {text:?}")))
}

/// Parse `"<number> <unit>"` into SI units of `dim`.
pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64> {
    let text = text.trim();
    let split = text
        .char_indices()
        .find(|(_, c)| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')))
        .map(|(i, _)| i)
        .unwrap_or(text.len());
    // an exponent marker directly followed by a non-digit belongs to the unit
    let (mut num, mut unit) = text.split_at(split);
    if num.ends_with(['e', 'E']) {
        num = &text[..split - 1];
        unit = &text[split - 1..];
    }
    let value = parse_number(num, text)?;
    let unit = unit.trim();
    if unit.is_empty() {
        return Err(Error::Unit(format!(
            "{text:?} has no unit; expected {dim}"
        )));
    }
    match scale(dim, unit) {
        Some(Scale::Mul(k)) => Ok(value * k),
        Some(Scale::Decimal(shift)) => {
            let (mantissa, exp) = match num.find(['e', 'E']) {
                Some(i) => (&num[..i], num[i + 1..].parse::<i32>().unwrap_or(0)),
                None => (num, 0),
            };
            parse_number(&format!("{mantissa}e{}", exp + shift), text)
        }
        None => Err(Error::Unit(format!(
            "unit {unit:?} in {text:?} is not a valid {dim}"
        ))),
    }
}

/// A dimensional value as written in a config file: either a unit-suffixed
/// string or a bare number (always rejected when resolved).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RawQuantity {
    Text(String),
    Number(f64),
}

impl RawQuantity {
    pub fn resolve(&self, dim: Dimension, field: &str) -> Result<f64> {
        match self {
            RawQuantity::Text(s) => parse_quantity(s, dim)
                .map_err(|e| match e {
                    Error::Unit(msg) => Error::Unit(format!("{field}: {msg}")),
                    other => other,
                }),
            RawQuantity::Number(v) => Err(Error::Unit(format!(
                "{field}: {v} has no unit; expected {dim}"
            ))),
        }
    }
}

impl From<&str> for RawQuantity {
    fn from(s: &str) -> Self {
        RawQuantity::Text(s.to_string())
    }
}
