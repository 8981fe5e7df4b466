//! Linear-systems toolbox: rational transfer functions, pole analysis,
//! fixed-step integration, test signals and frequency-response measurement.

pub mod frf;
pub mod poly;
pub mod signal;
pub mod sim;
pub mod ss;
pub mod tf;

pub use frf::{bandwidth_3db, log_space, measure_frf, FrequencyResponse, SineProbe, SteppedSine};
pub use signal::{chirp_value, ChirpSpec};
pub use sim::{integrate, integrate_decimated, simulate, Signal, System, Trace};
pub use ss::{LinearSystem, StateSpace};
pub use tf::TransferFunction;
