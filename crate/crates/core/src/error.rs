use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("degenerate triangle {face}: edge lengths {lengths:?} have zero area")]
    DegenerateFace { face: usize, lengths: [f64; 3] },

    #[error("zero-capacity Steklov boundary")]
    ZeroCapacity,

    #[error("Steklov set fails to pin the kernel: component containing vertex {vertex} has no Steklov boundary")]
    UnpinnedComponent { vertex: usize },

    #[error("factorization failed: non-positive pivot {pivot:e} at row {row}")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("density weight {weight} at boundary vertex {vertex} is not positive")]
    NonPositiveWeight { vertex: usize, weight: f64 },

    #[error("requested modes exceed discrete space: asked for {requested}, have {available}")]
    ModesExceedSpace { requested: usize, available: usize },

    #[error("eigenvalue sigma_{k} is clustered (multiplicity {size}); use subgradient path")]
    ClusteredEigenvalue { k: usize, size: usize },

    #[error("eigensolver failed: {0}")]
    EigenSolver(String),

    #[error("composition index {k} is not representable by the given tables")]
    CompositionOutOfRange { k: usize },

    #[error("upper bound violated: sigma_bar_{k} = {value} > {bound}")]
    BoundViolation { k: usize, value: f64, bound: f64 },

    #[error("at parameter {parameter}: {source}")]
    AtParameter {
        parameter: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn mesh(msg: impl Into<String>) -> Self {
        Error::InvalidMesh(msg.into())
    }
}
