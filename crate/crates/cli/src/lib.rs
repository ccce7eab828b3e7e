//! Library half of the rank-verify command line tool: input ingestion,
//! deterministic JSON rendering, and the subcommand implementations. The
//! binary in `main.rs` only parses flags and forwards here, so integration
//! tests can drive every command without spawning a process.

pub mod commands;
pub mod input;
pub mod json;

use rank_verify::Error as CoreError;

/// Anything a command can fail with. Core errors keep their structure so
/// the renderer can map them to stable kind slugs and exit codes.
#[derive(Debug)]
pub enum CliError {
    Core(CoreError),
    Io { path: String, source: std::io::Error },
    Parse { path: String, message: String },
    Usage { message: String },
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io { path, source } => write!(f, "{path}: {source}"),
            CliError::Parse { path, message } => write!(f, "{path}: {message}"),
            CliError::Usage { message } => write!(f, "{message}"),
        }
    }
}

impl CliError {
    /// Stable machine-readable slug for the error object.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "io",
            CliError::Parse { .. } => "parse",
            CliError::Usage { .. } => "usage",
            CliError::Core(e) => match e {
                CoreError::NonFinite { .. } => "non-finite",
                CoreError::InvalidProbability { .. } => "invalid-probability",
                CoreError::QuantileDomain { .. } => "quantile-domain",
                CoreError::DegenerateTruncation { .. } => "degenerate-truncation",
                CoreError::InvalidModel { .. } => "invalid-model",
                CoreError::BoundaryTie { .. } => "boundary-tie",
                CoreError::InvalidK { .. } => "invalid-k",
                CoreError::WrongSide { .. } => "wrong-side",
                CoreError::NotPsd { .. } => "not-psd",
                CoreError::SigmaMismatch => "sigma-mismatch",
                CoreError::AlphaMismatch { .. } => "alpha-mismatch",
                CoreError::InsufficientConditioning { .. } => "insufficient-conditioning",
                CoreError::InvalidScenario { .. } => "invalid-scenario",
                CoreError::TooFewReps { .. } => "too-few-reps",
                CoreError::ZeroCount { .. } => "zero-count",
                CoreError::CountMismatch { .. } => "count-mismatch",
                CoreError::TooFewRows { .. } => "too-few-rows",
                CoreError::ConstantColumn { .. } => "constant-column",
                CoreError::RhoOutOfRange { .. } => "rho-out-of-range",
                CoreError::InvalidTolerance { .. } => "invalid-tolerance",
            },
        }
    }

    /// Exit code for this error: insufficient conditioning gets its own
    /// code so pipelines can distinguish "ran out of events" from misuse.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(CoreError::InsufficientConditioning { .. }) => 3,
            _ => 2,
        }
    }

    /// The machine-readable object written to standard error.
    pub fn to_json(&self) -> String {
        let mut obj = serde_json::Map::new();
        let mut inner = serde_json::Map::new();
        inner.insert("kind".into(), serde_json::Value::String(self.kind().into()));
        inner.insert("message".into(), serde_json::Value::String(self.to_string()));
        if let CliError::Core(CoreError::InsufficientConditioning { events, reps, rate, needed }) =
            self
        {
            inner.insert("events".into(), (*events).into());
            inner.insert("reps".into(), (*reps).into());
            inner.insert("needed".into(), (*needed).into());
            if let Some(r) = serde_json::Number::from_f64(*rate) {
                inner.insert("rate".into(), serde_json::Value::Number(r));
            }
        }
        obj.insert("error".into(), serde_json::Value::Object(inner));
        json::canonical(&serde_json::Value::Object(obj))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
