use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("structural mismatch: {0}")]
    Structure(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("out of range: {0}")]
    Range(String),

    #[error("singular mode: {0}")]
    SingularMode(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("vacuum: minimum density {min_density:.6e} below guard {threshold:.6e} at t = {time}")]
    Vacuum {
        time: f64,
        min_density: f64,
        threshold: f64,
    },

    #[error("numerical blow-up at t = {time}: {detail}")]
    BlowUp { time: f64, detail: String },

    #[error("step size rejected: CFL {cfl:.4} (dt = {dt}) exceeds limit {limit}")]
    StepSize { dt: f64, cfl: f64, limit: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid value for `{key}`: {message}")]
    ConfigKey { key: String, message: String },

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Numerical failures of a running simulation (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Vacuum { .. } | Error::BlowUp { .. } | Error::StepSize { .. }
        )
    }

    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::ConfigKey { .. })
    }

    /// Process exit status: 2 for configuration, 3 for numerical failures,
    /// 1 otherwise. Certification failures (4) are not errors.
    pub fn exit_code(&self) -> i32 {
        if self.is_config() {
            2
        } else if self.is_numerical() {
            3
        } else {
            1
        }
    }
}
