use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("inverted element {element} (det = {det:e}) at quadrature point {point}")]
    InvertedElement { element: usize, point: usize, det: f64 },

    #[error("exponent Q = {q} exceeds overflow guard")]
    EnergyOverflow { q: f64 },

    #[error("non-finite residual in row {row}")]
    NonFiniteResidual { row: usize },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("degenerate face geometry on element {element}, face {face}")]
    DegenerateFace { element: usize, face: usize },

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("root finder failed: {0}")]
    RootFinder(String),

    #[error("solver did not converge at s = {s}: {reason}")]
    Continuation { s: f64, reason: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}
