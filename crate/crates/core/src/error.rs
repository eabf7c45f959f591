use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{function}: argument {re}{im:+}i outside the supported domain ({reason})")]
    Domain {
        function: &'static str,
        re: f64,
        im: f64,
        reason: &'static str,
    },
    #[error("kernel evaluated at coincident points near ({x}, {y})")]
    Coincident { x: f64, y: f64 },
    #[error("invalid material: {0}")]
    Material(String),
    #[error("geometry: {0}")]
    Geometry(String),
    #[error("quadrature: {0}")]
    Quadrature(String),
    #[error("source at ({x}, {y}) is not strictly inside its domain: {reason}")]
    Source { x: f64, y: f64, reason: String },
    #[error("quadrature did not converge for element pair ({m}, {n})")]
    NonConverged { m: usize, n: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is singular to working precision at pivot {pivot}")]
    SingularMatrix { pivot: usize },
    #[error("level {level}: {source}")]
    Level {
        level: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("reference: {0}")]
    Reference(String),
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// True for errors caused by bad user input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Config { .. }
            | Error::Validation(_)
            | Error::Source { .. }
            | Error::Material(_)
            | Error::Geometry(_) => true,
            Error::Level { source, .. } => source.is_validation(),
            _ => false,
        }
    }

    pub(crate) fn at_level(self, level: usize) -> Error {
        Error::Level {
            level,
            source: Box::new(self),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
