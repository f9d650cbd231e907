use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid interval [{lower}, {upper}]: bounds must be finite with lower < upper")]
    InvalidInterval { lower: f64, upper: f64 },
    #[error("pieces do not tile an interval (break after piece {index})")]
    ChainBroken { index: usize },
    #[error("pieces are not chained and sorted (break after piece {index})")]
    NotChained { index: usize },
    #[error("piecewise function has no pieces")]
    Empty,
    #[error("discontinuity of {jump:e} at breakpoint {at}")]
    Discontinuous { at: f64, jump: f64 },
    #[error("point {x} is outside the function domain")]
    OutOfDomain { x: f64 },
    #[error("invalid problem: {0}")]
    InvalidProblem(&'static str),
    #[error("feasible set is empty at stage {stage}")]
    Infeasible { stage: usize },
    #[error("no candidate input law covers x = {at} at stage {stage}")]
    CoverageGap { stage: usize, at: f64 },
    #[error("convexity check failed at stage {stage} near x = {at}")]
    NonConvex { stage: usize, at: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(&'static str),
    #[error("feature map mismatch: expected {expected}, found {found}")]
    FeatureMapMismatch {
        expected: &'static str,
        found: &'static str,
    },
    #[error("input has length {found}, network expects {expected}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("region {index} is too narrow for stencil step {step}")]
    RegionTooNarrow { index: usize, step: f64 },
    #[error("rejection sampling stalled: {accepted} of {draws} draws accepted")]
    SamplingStalled { accepted: usize, draws: usize },
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
}
