use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("improper system: numerator degree {num_degree} exceeds denominator degree {den_degree}")]
    ImproperSystem { num_degree: usize, den_degree: usize },

    #[error("singular evaluation: denominator vanishes at omega = {omega} rad/s")]
    SingularEvaluation { omega: f64 },

    #[error("root finding failed to converge (worst residual {worst_residual:e}, tolerance {tolerance:e})")]
    NumericFailure {
        residuals: Vec<f64>,
        worst_residual: f64,
        tolerance: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} = {value} outside [{min}, {max}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("simulation diverged at t = {time} s{}", .frequency.map(|f| format!(" (drive frequency {f} Hz)")).unwrap_or_default())]
    Divergence { time: f64, frequency: Option<f64> },

    #[error("step too large: |lambda|*dt = {product:.4} exceeds 0.1 (dt = {dt:e} s, max stable dt = {max_dt:e} s)")]
    StepTooLarge { dt: f64, max_dt: f64, product: f64 },

    #[error("closed loop unstable at configured gains (pole at {pole_re} + {pole_im}j, drive frequency {frequency} Hz)")]
    Instability {
        frequency: f64,
        pole_re: f64,
        pole_im: f64,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("degenerate channel {channel}: standard deviation {std:e} below 1e-9")]
    DegenerateChannel { channel: usize, std: f64 },

    #[error("training diverged at epoch {epoch} (loss is not finite)")]
    TrainingDivergence { epoch: usize },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("unit error: {0}")]
    Unit(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
