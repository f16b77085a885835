use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid material: {0}")]
    InvalidMaterial(String),

    #[error("invalid cohesive parameters: {0}")]
    InvalidCohesive(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("element {element}: {reason}")]
    Element { element: usize, reason: String },

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("equilibrium direction undefined at zero equivalent separation")]
    UndefinedDirection,

    #[error("singular system at equation {equation} (pivot ratio {pivot_ratio:.3e})")]
    Singular { equation: usize, pivot_ratio: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("solver aborted at increment {step}: {reason}")]
    SolverAbort { step: usize, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }
}
