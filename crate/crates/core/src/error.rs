use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("no faces in mesh")]
    NoFaces,

    #[error("unsupported PLY format `{0}` (only ascii is supported)")]
    UnsupportedFormat(String),

    #[error("element `{element}`: header declares {declared}, body has {found}")]
    CountMismatch {
        element: String,
        declared: usize,
        found: usize,
    },

    #[error("non-manifold edge ({0}, {1}) shared by {2} faces")]
    NonManifoldEdge(usize, usize, usize),

    #[error("face {0} has zero area")]
    DegenerateFace(usize),

    #[error("label {0} has no palette entry")]
    MissingPalette(usize),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("covariance is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    /// Whether the error came from reading a mesh, CSV or JSON document.
    pub fn is_parse(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::NoFaces
                | Error::UnsupportedFormat(_)
                | Error::CountMismatch { .. }
                | Error::NonManifoldEdge(..)
                | Error::DegenerateFace(_)
        )
    }

    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_) | Error::NotPositiveDefinite(_))
    }
}
