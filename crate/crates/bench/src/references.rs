//! Published comparison values, kept verbatim and never used as oracles.

use exosim::actuator::Paradigm;

/// Closed-loop torque bandwidth, Hz.
pub fn bandwidth_hz(p: Paradigm) -> Option<f64> {
    match p {
        Paradigm::Conventional => Some(5.1),
        Paradigm::Sea => Some(4.2),
        Paradigm::Qdd => Some(73.3),
        Paradigm::Custom => None,
    }
}

/// Peak backdrive torque under the 0-1 Hz, 10 deg sweep, Nm.
pub fn backdrive_nm(p: Paradigm) -> Option<f64> {
    match p {
        Paradigm::Conventional => Some(2.88),
        Paradigm::Sea => Some(6.10),
        Paradigm::Qdd => Some(0.97),
        Paradigm::Custom => None,
    }
}

/// Hardware tracking RMS error per condition, Nm.
pub const TRACKING_RMS_NM: [(&str, f64); 4] = [
    ("walking 0.8 m/s", 1.15),
    ("walking 1.1 m/s", 1.23),
    ("walking 1.4 m/s", 1.27),
    ("squatting 2 s cadence", 0.73),
];

/// Hardware tracking RMS error and its share of the desired peak.
pub const TRACKING_SUMMARY_NM: f64 = 1.09;
pub const TRACKING_SUMMARY_PCT: f64 = 5.4;

/// Phase-estimator test R^2 on human recordings.
pub const PHASE_TEST_R2: f64 = 0.997;
