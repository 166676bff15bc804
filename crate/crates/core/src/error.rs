use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("input vector is not unit length (norm {norm})")]
    NotUnit { norm: f64 },

    #[error("finite-difference step {0} outside (0, 1e-2]")]
    StepOutOfRange(f64),

    #[error("function `{label}` returned a non-finite value at {at:?}")]
    NonFinite { label: String, at: [f64; 3] },

    #[error("function `{0}` is only continuous; mollify it before differentiating")]
    SmoothnessRequired(String),

    #[error("frame base {frame:?} does not match evaluation point {point:?}")]
    FrameMismatch { frame: [f64; 3], point: [f64; 3] },

    #[error("matrix is not a rotation: {0}")]
    NotRotation(String),

    #[error("Q(h, u) is not positive definite at {at:?} (smallest eigenvalue {lambda_min})")]
    NotPositiveDefinite { at: [f64; 3], lambda_min: f64 },

    #[error("invalid body: {0}")]
    InvalidBody(String),

    #[error("negative weight {0} in Minkowski combination")]
    NegativeWeight(f64),

    #[error("unsupported body/measure combination: {0}")]
    Unsupported(String),

    #[error("functional is negative ({value}) under the concave-root form")]
    NegativeFunctional { value: f64 },

    #[error("perturbation range is degenerate: {0}")]
    DegeneratePerturbation(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("parameter ladder exhausted: {reason} (best value {best})")]
    LadderExhausted { reason: String, best: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub(crate) fn arr(v: &nalgebra::Vector3<f64>) -> [f64; 3] {
    [v.x, v.y, v.z]
}
