use thiserror::Error;

/// Errors raised by the simulator. Messages carry the originating module so
/// CLI diagnostics can be traced without a backtrace.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{module}: {what} did not converge: {detail}")]
    NonConvergence {
        module: &'static str,
        what: String,
        detail: String,
    },

    #[error("{module}: invalid input: {detail}")]
    InvalidInput { module: &'static str, detail: String },

    #[error("{module}: point {point} lies outside the static domain")]
    OutsideDomain { module: &'static str, point: String },

    #[error("drive: time {t} outside tabulated range [{start}, {end}]")]
    TimeOutOfRange { t: f64, start: f64, end: f64 },

    #[error("dynamics: time step {dt} too coarse, need at most {max_dt} ({reason})")]
    StepTooCoarse { dt: f64, max_dt: f64, reason: String },

    #[error("dynamics: observable `{0}` requested from a trajectory without stored states")]
    MissingStates(&'static str),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("io: malformed matrix csv at line {line}: {detail}")]
    MalformedCsv { line: usize, detail: String },
}

impl Error {
    pub(crate) fn invalid(module: &'static str, detail: impl Into<String>) -> Self {
        Error::InvalidInput {
            module,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
