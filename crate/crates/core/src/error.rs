use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid mesh: {0}")]
    Mesh(String),

    #[error("fields live on different meshes")]
    MeshMismatch,

    #[error("assembly failed: {0}")]
    Assembly(String),

    #[error("singular system ({dofs} dofs): {detail}")]
    Singular { dofs: usize, detail: String },

    #[error("linear solve inaccurate: residual {residual:e} exceeds tolerance {tolerance:e}")]
    SolveAccuracy { residual: f64, tolerance: f64 },

    #[error("level set is constant, no shift can reach the requested volume")]
    NoBracket,

    #[error("degenerate sphere update: angle {0:e} rad")]
    DegenerateUpdate(f64),

    #[error("zero-norm field in angle computation")]
    ZeroNorm,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("vtk: {0}")]
    Vtk(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
