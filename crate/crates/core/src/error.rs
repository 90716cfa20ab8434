use thiserror::Error;

/// Errors produced by the mesh generation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("node index ({i}, {j}) out of range for {nx}x{ny} grid")]
    IndexOutOfRange { i: usize, j: usize, nx: usize, ny: usize },

    #[error("point ({x}, {y}) lies outside the grid rectangle")]
    OutsideGrid { x: f64, y: f64 },

    #[error("point ({x}, {y}) is not on the domain boundary")]
    NotOnBoundary { x: f64, y: f64 },

    #[error("path start ({x}, {y}) is not strictly inside the domain")]
    StartNotInterior { x: f64, y: f64 },

    #[error("non-positive monitor weight {value} at index {index}")]
    NonPositiveWeight { index: usize, value: f64 },

    #[error("field length {got} does not match grid size {expected}")]
    FieldSize { expected: usize, got: usize },

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("at least one path is required")]
    NoPaths,

    #[error("grid of {nodes} nodes cannot be split into {parts} parts of at least 3 node lines")]
    PartitionTooSmall { nodes: usize, parts: usize },

    #[error("interface needs at least 2 anchors, found {0}")]
    TooFewAnchors(usize),

    #[error("interpolation abscissae must be strictly increasing")]
    NonIncreasingAbscissae,

    #[error("missing Dirichlet data on {edge} edge: expected {expected} values, got {got}")]
    MissingDirichlet {
        edge: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("singular matrix: zero pivot in column {0}")]
    SingularMatrix(usize),

    #[error("linear solve residual {0:e} exceeds tolerance")]
    Residual(f64),

    #[error("grids do not match")]
    GridMismatch,

    #[error("cannot fit rate: {0}")]
    DegenerateFit(String),

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error("{stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
