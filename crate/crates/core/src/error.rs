use thiserror::Error;

/// Errors produced by the geometry, solver and pose routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("mirror surface is empty for A={a}, B={b}, C={c}")]
    EmptySurface { a: f64, b: f64, c: f64 },
    #[error("camera center lies on the mirror surface")]
    CenterOnMirror,
    #[error("degenerate mirror normal at {0:?}")]
    DegenerateNormal([f64; 3]),
    #[error("point is behind the camera")]
    BehindCamera,
    #[error("camera ray misses the mirror")]
    RayMissesMirror,
    #[error("no reflection point found for the scene point")]
    NoSolution,
    #[error("zero polynomial")]
    ZeroPolynomial,
    #[error("rank-deficient system: {0}")]
    RankDeficient(String),
    #[error("interpolation residual {residual:e} exceeds tolerance {tolerance:e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },
    #[error("degenerate quadratic in y (a1 = {0:e})")]
    DegenerateQuadratic(f64),
    #[error("direction is degenerate for this rig")]
    DegenerateDirection,
    #[error("point is not a valid vanishing point: {0}")]
    InconsistentVanishingPoint(String),
    #[error("rig is not central: {0}")]
    RigNotCentral(String),
    #[error("all directions are parallel")]
    AllParallel,
    #[error("vanishing curve is empty in the visible region")]
    EmptyCurve,
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("config error: {0}")]
    Config(String),
}

/// Coarse classification used by the command-line front end for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numerical,
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidInput(_)
            | Error::EmptySurface { .. }
            | Error::CenterOnMirror
            | Error::RigNotCentral(_)
            | Error::AllParallel
            | Error::Config(_) => ErrorKind::Validation,
            Error::Io(_) => ErrorKind::Io,
            _ => ErrorKind::Numerical,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
