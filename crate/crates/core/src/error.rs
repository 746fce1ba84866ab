use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid annulus: {0}")]
    InvalidAnnulus(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("fields live on different meshes")]
    MeshMismatch,

    #[error("field is not admissible: |u| deviates from 1 by {deviation:.3e} at boundary node ({i}, {j})")]
    NotAdmissible { i: usize, j: usize, deviation: f64 },

    #[error("boundary projection undefined: |u| = 0 at boundary node ({i}, {j})")]
    ZeroOnBoundary { i: usize, j: usize },

    #[error("degree undefined: |u| = {modulus:.3e} on contour node ({i}, {j})")]
    DegreeUndefined { i: usize, j: usize, modulus: f64 },

    #[error("linear solver did not converge: relative residual {residual:.3e} after {iterations} iterations")]
    SolverDiverged { iterations: usize, residual: f64 },

    #[error("series truncation tail {tail:.3e} exceeds 1e-3; increase K")]
    TruncationTooCoarse { tail: f64 },

    #[error("requested degrees unreachable at this resolution: {0}")]
    UnreachableDegrees(String),

    #[error("spacing rule violated: radial spacing {spacing:.4e} exceeds eps/4 = {limit:.4e}")]
    SpacingRule { spacing: f64, limit: f64 },

    #[error("abdeg {abdeg:.4} of the initial field is outside the open window ({lo}, {hi})")]
    WindowViolation { abdeg: f64, lo: f64, hi: f64 },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
