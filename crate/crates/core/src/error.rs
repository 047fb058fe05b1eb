use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid mesh: {0}")]
    Validation(#[from] ValidationError),

    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("format error in {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn shape(context: &'static str, expected: impl ToString, actual: impl ToString) -> Self {
        Error::Shape {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit code for the command-line tool: 2 validation, 3 numeric, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. }
            | Error::Validation(_)
            | Error::Shape { .. }
            | Error::Invalid(_) => 2,
            Error::Numeric(_) => 3,
            Error::Format { .. } | Error::Io { .. } => 4,
        }
    }
}

/// Mesh validation failures, each naming the offending element.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("mesh has no triangles")]
    Empty,
    #[error("triangle {triangle} references vertex {vertex}, but only {count} vertices exist")]
    IndexOutOfRange {
        triangle: usize,
        vertex: usize,
        count: usize,
    },
    #[error("triangle {triangle} repeats a vertex")]
    RepeatedVertex { triangle: usize },
    #[error("triangle {triangle} is degenerate (area {area:e})")]
    Degenerate { triangle: usize, area: f64 },
    #[error("edge ({a}, {b}) is shared by more than two triangles")]
    NonManifoldEdge { a: usize, b: usize },
    #[error("edge ({a}, {b}) is traversed in the same direction by two triangles (inconsistent orientation)")]
    InconsistentOrientation { a: usize, b: usize },
    #[error("vertex {vertex} is not manifold (its triangle fan is disconnected)")]
    NonManifoldVertex { vertex: usize },
    #[error("vertex {vertex} is not referenced by any triangle")]
    IsolatedVertex { vertex: usize },
    #[error("mesh has {components} connected components, expected 1")]
    Disconnected { components: usize },
    #[error("mesh is not a topological disk: {reason}")]
    NotDisk { reason: String },
    #[error("mesh has zero extent")]
    ZeroExtent,
}
