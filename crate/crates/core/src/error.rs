use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown scheme `{0}`")]
    UnknownScheme(String),

    #[error("gamma {0} outside [0, 1/2]")]
    GammaOutOfRange(f64),

    #[error("scheme `{0}` takes no gamma parameter")]
    GammaNotAccepted(String),

    #[error("tableau parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid tableau: {0}")]
    InvalidTableau(String),

    #[error("no closed form available for `{0}`")]
    NoClosedForm(String),

    #[error("pole of the stability function at z = {re} + {im}i")]
    Pole { re: f64, im: f64 },

    #[error("stage {stage} solve failed: {msg}")]
    StageSolve { stage: usize, msg: String },

    #[error("conjugate gradients did not converge: residual {residual:.3e} after {iterations} iterations")]
    CgNotConverged { iterations: usize, residual: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("time step underflow: dt = {dt:.3e} at t = {time:.6e}")]
    DtUnderflow { dt: f64, time: f64 },

    #[error("non-finite state after step {step}")]
    NonFinite { step: usize },

    #[error("simulation failed at step {step}: {msg}")]
    SimulationFailed { step: usize, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Pole { .. }
                | Error::StageSolve { .. }
                | Error::CgNotConverged { .. }
                | Error::DtUnderflow { .. }
                | Error::NonFinite { .. }
                | Error::SimulationFailed { .. }
        )
    }
}
