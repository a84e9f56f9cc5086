use thiserror::Error;

/// Errors raised by the geometry routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point {point:?} lies outside the chart")]
    OutOfDomain { point: Vec<f64> },
    #[error("derivative order {0} is not supported (expected 1..=3)")]
    OrderUnsupported(usize),
    #[error("matrix is not symmetric positive definite (pivot {pivot:.3e})")]
    NotSpd { pivot: f64 },
    #[error("derivative evaluation failed: {0}")]
    DerivativeFailure(String),
    #[error("invalid chart: {0}")]
    InvalidChart(String),
    #[error("field and chart disagree: {0}")]
    DomainMismatch(String),
    #[error("vector field is not parallel (transport defect {defect:.3e})")]
    NotParallel { defect: f64 },
    #[error("wedge of degrees {p} and {q} exceeds dimension {n}")]
    DegreeOverflow { p: usize, q: usize, n: usize },
    #[error("operation needs a form of positive degree")]
    DegreeUnderflow,
    #[error("rank mismatch: {0}")]
    RankMismatch(String),
    #[error("path leaves the chart at {point:?}")]
    PathEscapesChart { point: Vec<f64> },
    #[error("transport step size underflow at parameter {t}")]
    StepSizeUnderflow { t: f64 },
    #[error("transport too far from identity for a principal logarithm (min cos {min_cos:.3})")]
    LogBranchFailure { min_cos: f64 },
    #[error("commutant element has clustered spectrum after {attempts} attempts")]
    CommutantDegenerate { attempts: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("warping function is constant")]
    ConstantWarping,
    #[error("distributions are not orthogonal (defect {defect:.3e})")]
    NotOrthogonal { defect: f64 },
    #[error("metrics are not conformal with the given factor (defect {defect:.3e})")]
    NotConformal { defect: f64 },
    #[error("expression error: {0}")]
    Expr(String),
    #[error("field cannot be differentiated in this representation: {0}")]
    NotDifferentiable(String),
}

pub type Result<T> = std::result::Result<T, Error>;
