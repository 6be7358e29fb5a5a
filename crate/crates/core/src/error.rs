use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("parameter `{name}` = {value} outside its domain {domain}")]
    ParameterDomain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("time grid has no steps")]
    EmptyPath,

    #[error("requested window [{requested_start}, {requested_end}] not covered by recorded window [{available_start}, {available_end}]")]
    OutOfWindow {
        requested_start: f64,
        requested_end: f64,
        available_start: f64,
        available_end: f64,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("pullback attractor did not collapse: diameter {diameter:e} at horizon {horizon}")]
    NotCollapsed { diameter: f64, horizon: f64 },

    #[error("density not strictly positive: p[{index}] = {value:e}")]
    PositivityViolation { index: usize, value: f64 },

    #[error("stationary solver did not converge after {steps} steps (last residual {last:e})")]
    NonConvergence {
        steps: usize,
        last: f64,
        history: Vec<f64>,
    },

    #[error("invalid input: {0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, domain: &'static str) -> Self {
        Error::ParameterDomain {
            name,
            value,
            domain,
        }
    }
}
