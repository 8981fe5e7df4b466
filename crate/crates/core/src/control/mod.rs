//! Hierarchical controller: gait-phase estimation, torque-profile lookup and
//! the low-level saturated torque loop.

pub mod gait;
pub mod mlp;
pub mod pi;
pub mod profile;
pub mod torque_loop;
pub mod tracking;
pub mod tuning;

pub use gait::{synthesize_gait, GaitConfig, GaitDataset, HipCurve, Sample};
pub use mlp::{mlp_forward, mlp_init, mlp_train, standardize, Normalization, PhaseEstimator, TrainConfig, TrainOutcome};
pub use pi::{pi_step, PiGains, PiOutput, PiState};
pub use profile::{profile_torque, ProfileKind, TorqueProfile};
pub use torque_loop::{ClosedLoop, TorqueLoopProbe};
pub use tracking::{run_tracking, TrackConfig, TrackResult, TrackTrace};
pub use tuning::{closed_loop_tf, gains_for, tune_pi, TunedLoop, TuningPolicy};
