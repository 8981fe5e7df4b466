//! Assistance torque as a periodic lookup table over gait phase.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_TABLE_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    Walking,
    Squatting,
    Custom,
}

impl fmt::Display for ProfileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProfileKind::Walking => "walking",
            ProfileKind::Squatting => "squatting",
            ProfileKind::Custom => "custom",
        })
    }
}

impl FromStr for ProfileKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "walking" => Ok(ProfileKind::Walking),
            "squatting" => Ok(ProfileKind::Squatting),
            "custom" => Ok(ProfileKind::Custom),
            _ => Err(Error::Config(format!("unknown profile kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TorqueProfile {
    pub kind: ProfileKind,
    /// `(phase %, torque Nm)`, phase strictly increasing in `[0, 100)`.
    table: Vec<(f64, f64)>,
    /// Multiplier on the table torques.
    pub peak_scale: f64,
}

#[derive(Debug, Deserialize)]
struct Row {
    phase_pct: f64,
    torque_nm: f64,
}

impl TorqueProfile {
    pub fn new(kind: ProfileKind, table: Vec<(f64, f64)>, peak_scale: f64) -> Result<Self> {
        if table.len() < MIN_TABLE_POINTS {
            return Err(Error::Config(format!(
                "torque profile needs at least {MIN_TABLE_POINTS} points, got {}",
                table.len()
            )));
        }
        if table.iter().any(|(p, t)| !(0.0..100.0).contains(p) || !t.is_finite()) {
            return Err(Error::Config("profile phases must lie in [0, 100)".into()));
        }
        if table.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Config("profile phases must be strictly increasing".into()));
        }
        if !peak_scale.is_finite() {
            return Err(Error::Config(format!("peak scale must be finite, got {peak_scale}")));
        }
        Ok(Self {
            kind,
            table,
            peak_scale,
        })
    }

    /// Two-column CSV with header `phase_pct,torque_nm`.
    pub fn from_csv(kind: ProfileKind, text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let mut table = Vec::new();
        for row in reader.deserialize::<Row>() {
            let row = row.map_err(|e| Error::Schema(format!("torque profile: {e}")))?;
            table.push((row.phase_pct, row.torque_nm));
        }
        Self::new(kind, table, 1.0)
    }

    pub fn load(kind: ProfileKind, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_csv(kind, &text)
    }

    /// Stand-in biological walking curve: an extension lobe over 0-25% and a
    /// flexion lobe over 50-75%, peaking at 20 Nm.
    pub fn walking() -> Self {
        Self::from_csv(ProfileKind::Walking, include_str!("../../profiles/walking.csv"))
            .expect("built-in walking profile")
    }

    /// One sine period per squat cycle, peaking at 20 Nm.
    pub fn squatting() -> Self {
        Self::from_csv(ProfileKind::Squatting, include_str!("../../profiles/squatting.csv"))
            .expect("built-in squatting profile")
    }

    pub fn builtin(kind: ProfileKind) -> Result<Self> {
        match kind {
            ProfileKind::Walking => Ok(Self::walking()),
            ProfileKind::Squatting => Ok(Self::squatting()),
            ProfileKind::Custom => Err(Error::Config("custom profiles must be loaded from a file".into())),
        }
    }

    pub fn table(&self) -> &[(f64, f64)] {
        &self.table
    }

    /// Largest `|torque|` in the unscaled table.
    pub fn table_peak(&self) -> f64 {
        self.table.iter().map(|(_, t)| t.abs()).fold(0.0, f64::max)
    }

    /// Rescale so the largest table magnitude becomes `peak` Nm.
    pub fn with_peak(mut self, peak: f64) -> Self {
        let p = self.table_peak();
        self.peak_scale = if p > 0.0 { peak / p } else { 0.0 };
        self
    }
}

/// Linear interpolation between the bracketing table points, periodic in 100%.
pub fn profile_torque(profile: &TorqueProfile, phase: f64) -> Result<f64> {
    if !(0.0..100.0).contains(&phase) {
        return Err(Error::OutOfRange {
            what: "gait phase (%)",
            value: phase,
            min: 0.0,
            max: 100.0,
        });
    }
    let t = &profile.table;
    let idx = t.partition_point(|(p, _)| *p <= phase);
    let ((p0, y0), (p1, y1)) = match idx {
        0 => {
            let (pl, yl) = t[t.len() - 1];
            ((pl - 100.0, yl), t[0])
        }
        i if i == t.len() => {
            let (pf, yf) = t[0];
            (t[i - 1], (pf + 100.0, yf))
        }
        i => (t[i - 1], t[i]),
    };
    let y = if phase == p0 { y0 } else { y0 + (y1 - y0) * (phase - p0) / (p1 - p0) };
    Ok(profile.peak_scale * y)
}
