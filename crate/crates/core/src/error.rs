use thiserror::Error;

use crate::torus::VortexSolution;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("paths are not composable: source of left path is not the target of right path")]
    NonComposable,
    #[error("product term of length {len} exceeds maximum path length {max}")]
    LengthOverflow { len: usize, max: usize },
    #[error("relations on twisted arrows are not supported (arrow {arrow})")]
    TwistedRelationUnsupported { arrow: String },
    #[error("invalid relation: {0}")]
    InvalidRelation(String),
    #[error("invalid quiver: {0}")]
    InvalidQuiver(String),
    #[error("shape mismatch on {what}: {detail}")]
    ShapeMismatch { what: String, detail: String },
    #[error("representations live on different quivers or twists")]
    QuiverMismatch,
    #[error("vertex sets differ")]
    VertexSetMismatch,
    #[error("subspace dimension exceeds ambient dimension at vertex {vertex}")]
    DimensionOverflow { vertex: String },
    #[error("module table does not define a representation: {0}")]
    InvalidModule(String),
    #[error("module conversion does not support twisted arrows")]
    TwistedModuleUnsupported,
    #[error("total weighted rank is zero")]
    ZeroTotalRank,
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("rescale factor must be positive, got {0}")]
    NonpositiveScale(f64),
    #[error("limit direction has no spectral separation (spectrum {spectrum:?})")]
    NoSeparation { spectrum: Vec<f64> },
    #[error("flow report is not divergent")]
    NotDivergent,
    #[error("metric is not a solution: residual {residual:e}")]
    NotASolution { residual: f64 },
    #[error("metric is numerically singular (condition number {cond:e})")]
    SingularMetric { cond: f64 },
    #[error("eigendecomposition failed reconstruction check (error {err:e})")]
    IllConditionedSpectrum { err: f64 },
    #[error("parameters are not admissible (defect {defect:e})")]
    InadmissibleParameters { defect: f64 },
    #[error("gauge condition violated by {0:e}")]
    GaugeViolation(f64),
    #[error("Newton iteration stalled at sup residual {:e}", .0.sup_residual)]
    NewtonStall(Box<VortexSolution>),
    #[error("arrow {arrow} joins bundles of different degree; only d_t = d_h is supported")]
    UnsupportedDegrees { arrow: String },
    #[error("system is not in the flat case: {0}")]
    NotFlatCase(String),
    #[error("schema validation failed")]
    Schema { issues: Vec<SchemaIssue> },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SchemaIssue {
    pub pointer: String,
    pub message: String,
}

impl Error {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NonComposable => "NonComposable",
            Error::LengthOverflow { .. } => "LengthOverflow",
            Error::TwistedRelationUnsupported { .. } => "TwistedRelationUnsupported",
            Error::InvalidRelation(_) => "InvalidRelation",
            Error::InvalidQuiver(_) => "InvalidQuiver",
            Error::ShapeMismatch { .. } => "ShapeMismatch",
            Error::QuiverMismatch => "QuiverMismatch",
            Error::VertexSetMismatch => "VertexSetMismatch",
            Error::DimensionOverflow { .. } => "DimensionOverflow",
            Error::InvalidModule(_) => "InvalidModule",
            Error::TwistedModuleUnsupported => "TwistedModuleUnsupported",
            Error::ZeroTotalRank => "ZeroTotalRank",
            Error::InvalidParameters(_) => "InvalidParameters",
            Error::NonpositiveScale(_) => "NonpositiveScale",
            Error::NoSeparation { .. } => "NoSeparation",
            Error::NotDivergent => "NotDivergent",
            Error::NotASolution { .. } => "NotASolution",
            Error::SingularMetric { .. } => "SingularMetric",
            Error::IllConditionedSpectrum { .. } => "IllConditionedSpectrum",
            Error::InadmissibleParameters { .. } => "InadmissibleParameters",
            Error::GaugeViolation(_) => "GaugeViolation",
            Error::NewtonStall(_) => "NewtonStall",
            Error::UnsupportedDegrees { .. } => "UnsupportedDegrees",
            Error::NotFlatCase(_) => "NotFlatCase",
            Error::Schema { .. } => "SchemaError",
            Error::Io(_) => "IoError",
        }
    }
}

pub(crate) fn shape(what: impl Into<String>, detail: impl Into<String>) -> Error {
    Error::ShapeMismatch {
        what: what.into(),
        detail: detail.into(),
    }
}
