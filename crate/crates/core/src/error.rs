use thiserror::Error;

/// Errors raised anywhere in the simulation and analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("model rejected by validation: {0}")]
    ModelRejected(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("divergent integral: {0}")]
    DivergentIntegral(String),

    #[error("domination violated for neuron {neuron} at t={time}: rate {rate} exceeds bound {bound}")]
    DominationViolation {
        neuron: usize,
        time: f64,
        rate: f64,
        bound: f64,
    },

    #[error("spike count exceeded cap of {0}")]
    SpikeOverflow(u64),

    #[error("event tie at t={0}")]
    EventTie(f64),

    #[error("rate curve covers [0, {covered}] but [0, {requested}] was requested")]
    CurveCoverage { covered: f64, requested: f64 },

    #[error("Picard iteration did not converge after {iterations} sweeps (last residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("negative density value {value} at t={time}")]
    NegativeDensity { time: f64, value: f64 },

    #[error("jump size mismatch at t={time}: direct {direct}, closed form {closed_form}")]
    BranchMismatch {
        time: f64,
        direct: f64,
        closed_form: f64,
    },

    #[error("insufficient replicas: {got} < {required}")]
    InsufficientReplicas { got: usize, required: usize },

    #[error("Galerkin closure blew up at t={time}: |eta(x^D)| = {value}")]
    ClosureInstability { time: f64, value: f64 },

    #[error("covariance factorization removed {removed:e} of trace {trace:e}")]
    CovarianceFactorization { removed: f64, trace: f64 },

    #[error("serialization: {0}")]
    Serialization(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by numerical breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DivergentIntegral(_)
                | Error::DominationViolation { .. }
                | Error::SpikeOverflow(_)
                | Error::EventTie(_)
                | Error::NonConvergence { .. }
                | Error::NegativeDensity { .. }
                | Error::BranchMismatch { .. }
                | Error::ClosureInstability { .. }
                | Error::CovarianceFactorization { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
