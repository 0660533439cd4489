use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("singular kernel evaluation at zero distance")]
    SingularKernel,
    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },
    #[error("mesh mismatch: {0}")]
    MeshMismatch(String),
    #[error("matrix is ill-conditioned (condition estimate {condition:.3e} exceeds {limit:.1e})")]
    IllConditioned { condition: f64, limit: f64 },
    #[error("radiation matrix is indefinite: eigenvalue {eigenvalue:.6e} below tolerance {tolerance:.6e}")]
    IndefiniteRadiationMatrix { eigenvalue: f64, tolerance: f64 },
    #[error("observation point at {distance:.3e} from the wire axis lies inside the wire (radius {radius:.3e})")]
    ObservationOnWire { distance: f64, radius: f64 },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    /// A computed result violates an identity it must satisfy.
    #[error("numerical check failed: {0}")]
    CheckFailed(String),
    #[error("bundle format error: {0}")]
    Bundle(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
