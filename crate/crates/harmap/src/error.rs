use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported spatial dimension {0}, expected 2 or 3")]
    Dimension(usize),
    #[error("unsupported target dimension {0}, expected 2 or 3")]
    TargetDimension(usize),
    #[error("refinement level {0} outside 1..=12")]
    Level(u32),
    #[error("level {level} in dimension {dim} overflows the u32 vertex index")]
    IndexOverflow { dim: usize, level: u32 },
    #[error("point {0:?} lies outside the closed cube")]
    OutsideDomain([f64; 3]),
    #[error("singular projection: |xi| = {norm:e}{}", element.map(|e| format!(" in element {e}")).unwrap_or_default())]
    SingularProjection { norm: f64, element: Option<usize> },
    #[error("vector is not tangent at its base point (defect {0:e})")]
    NotTangent(f64),
    #[error("vector is not of unit length (|x| = {0})")]
    NotUnit(f64),
    #[error("nodal value {node} is not of unit length (|u| = {norm})")]
    NonUnitNode { node: usize, norm: f64 },
    #[error("zero nodal value at node {0}")]
    ZeroNode(usize),
    #[error("unsupported polynomial order {0}, expected 1 or 2")]
    Order(usize),
    #[error("no quadrature rule of exactness {exactness} in dimension {dim}")]
    Quadrature { dim: usize, exactness: usize },
    #[error("error values must be positive, got {0}")]
    NonPositiveError(f64),
    #[error("predicted decrease {0:e} is not positive")]
    DegenerateModel(f64),
    #[error("linear solver stopped after {iterations} iterations at relative residual {residual:e}")]
    LinearSolver { iterations: usize, residual: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unknown problem id `{0}`")]
    UnknownProblem(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn at_element(self, element: usize) -> Self {
        match self {
            Error::SingularProjection { norm, .. } => Error::SingularProjection {
                norm,
                element: Some(element),
            },
            other => other,
        }
    }
}
