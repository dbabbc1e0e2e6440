use std::fmt;
use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug)]
pub enum Error {
    Io { path: PathBuf, source: std::io::Error },
    Csv(csv::Error),
    Json(serde_json::Error),
    /// A file was readable but contained no usable rows.
    NoData { path: PathBuf },
    /// Caller violated an operation precondition.
    InvalidInput(String),
    /// Every value of a series fell outside the cleaning bounds.
    AllOutOfRange { lo: f64, hi: f64 },
    /// Sensors in a room share no common time span.
    EmptyOverlap { room_id: String },
    /// Series too short for the requested window.
    SpanTooShort { needed_secs: i64, available_secs: i64 },
    /// Correlation is undefined because one input is constant.
    ZeroVariance(&'static str),
    /// Telemetry does not cover the requested analysis windows.
    InsufficientCoverage(String),
    /// The inlet temperature reaches the hot-surface temperature.
    InfeasibleCooling { t_inlet: f64, t_hot: f64 },
    /// A finite difference straddles the economizer/chiller switch.
    ModeBoundary { t_inlet: f64 },
    DegenerateGroups(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Io { path, source } => write!(f, "{}: {}", path.display(), source),
            Error::Csv(e) => write!(f, "csv: {e}"),
            Error::Json(e) => write!(f, "json: {e}"),
            Error::NoData { path } => write!(f, "{}: no parseable rows", path.display()),
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::AllOutOfRange { lo, hi } => {
                write!(f, "every value lies outside [{lo}, {hi}]")
            }
            Error::EmptyOverlap { room_id } => {
                write!(f, "room {room_id}: sensors have no common time span")
            }
            Error::SpanTooShort { needed_secs, available_secs } => write!(
                f,
                "series spans {available_secs} s but at least {needed_secs} s are required"
            ),
            Error::ZeroVariance(which) => {
                write!(f, "correlation undefined: {which} has zero variance")
            }
            Error::InsufficientCoverage(msg) => write!(f, "insufficient coverage: {msg}"),
            Error::InfeasibleCooling { t_inlet, t_hot } => write!(
                f,
                "inlet temperature {t_inlet} °C cannot cool surfaces at {t_hot} °C"
            ),
            Error::ModeBoundary { t_inlet } => write!(
                f,
                "sensitivity undefined at {t_inlet} °C: economizer mode switches within the difference step"
            ),
            Error::DegenerateGroups(msg) => write!(f, "degenerate groups: {msg}"),
        }
    }
}

// Display already carries the wrapped error's message.
impl std::error::Error for Error {}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e)
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e)
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
