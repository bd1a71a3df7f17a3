use thiserror::Error;

/// Everything that can go wrong between integrating a trajectory and
/// issuing a Krawczyk verdict.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("integration diverged at step {step}")]
    Divergence { step: usize },

    #[error("curvature is degenerate (|z_t ^ z_tt| below threshold)")]
    DegenerateCurvature,

    #[error("torsion is degenerate")]
    DegenerateTorsion,

    #[error("matrix is not orthogonal (deviation {deviation:e})")]
    NonOrthogonal { deviation: f64 },

    #[error("no local extremum of the similarity torsion in the first window")]
    NoExtremum,

    #[error("crossing at t = {t} is tangential (|zdot| = {zdot:e})")]
    TangentialCrossing { t: f64, zdot: f64 },

    #[error("arc contains no section crossings")]
    NoCrossings,

    #[error("word {word} is not a whole power of a shorter word")]
    NotPeriodicRepetition { word: String },

    #[error("invalid symbol {0:?}; expected 'L' or 'R'")]
    InvalidSymbol(char),

    #[error("no return to the section within {max_time} time units")]
    NoReturn { max_time: f64 },

    #[error("return time {t} outside the one-revolution bracket")]
    ReturnTimeOutOfRange { t: f64 },

    #[error("Newton did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("converged to {found}, expected {expected}")]
    LabelMismatch { expected: String, found: String },

    #[error("no seed available for sequence {0}")]
    SeedUnavailable(String),

    #[error("interval division by an interval containing zero")]
    DivisionByZeroInterval,

    #[error("interval enclosure blew up (width {width:e})")]
    EnclosureBlowup { width: f64 },

    #[error("section crossing could not be isolated")]
    CrossingNotIsolated,

    #[error("Krawczyk preconditioner is singular (condition {condition:e})")]
    SingularM { condition: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("I/O error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input or I/O).
    pub fn is_numerical(&self) -> bool {
        !matches!(self, Error::InvalidInput(_) | Error::Io(_) | Error::Parse(_) | Error::InvalidSymbol(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            Error::Io(e.to_string())
        } else {
            Error::Parse(e.to_string())
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            Error::Io(e.to_string())
        } else {
            Error::Parse(e.to_string())
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
