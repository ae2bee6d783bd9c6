use thiserror::Error;

/// Errors raised across the mesh → assembly → solve → analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("mesh file line {line}: {msg}")]
    MeshFormat { line: usize, msg: String },

    #[error("mesh validation failed: {0}")]
    MeshValidation(String),

    #[error("interface edge {edge} ({a} -> {b}) is not oriented with its normal pointing from region 2 into region 1")]
    InconsistentOrientation { edge: usize, a: usize, b: usize },

    #[error("mesh is under-resolved: {0}")]
    UnderResolved(String),

    #[error("relative permittivity {name} = {value} must be real, finite and >= 1")]
    Permittivity { name: &'static str, value: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{0} is not positive definite")]
    NotPositiveDefinite(&'static str),

    #[error("companion dimension {dim} exceeds the dense solver cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("zero vector")]
    ZeroVector,

    #[error("gamma^2 = {gamma_sq} is within {tol:e} of eps = {eps}; the transverse-field reduction is singular there")]
    Degeneration { gamma_sq: String, eps: f64, tol: f64 },

    #[error("config{}: {msg}", line.map(|l| format!(" line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
