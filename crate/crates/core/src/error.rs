use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dims: {0}")]
    InvalidDims(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed file contents. `line` is a 1-based line number for text
    /// formats and a byte offset for binary ones.
    #[error("format error at {location}: {message}")]
    Format { location: String, message: String },

    #[error("no free cell with clearance >= {clearance} m")]
    NoFreeSpace { clearance: f64 },

    #[error("goal lies in an occupied cell")]
    GoalInObstacle,

    #[error("heading undefined: horizontal gradient vanishes")]
    UndefinedHeading,

    #[error("no path between cells under clearance {clearance} m")]
    NoPath { clearance: f64 },

    #[error("waypoint has zero length")]
    ZeroWaypoint,

    #[error("ill-conditioned trajectory system (condition estimate {condition:e})")]
    SingularSystem { condition: f64 },

    #[error("time {t} outside trajectory domain [0, {duration}]")]
    OutOfDomain { t: f64, duration: f64 },

    #[error("path is empty")]
    EmptyPath,

    #[error("every candidate endpoint is unreachable")]
    AllCandidatesUnreachable,

    #[error("camera lies in an occupied cell")]
    CameraInObstacle,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("no valid episode after {attempts} attempts")]
    NoValidEpisode { attempts: usize },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format_line(line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            location: format!("line {line}"),
            message: message.into(),
        }
    }

    pub(crate) fn format_offset(offset: usize, message: impl Into<String>) -> Self {
        Error::Format {
            location: format!("byte {offset}"),
            message: message.into(),
        }
    }
}
