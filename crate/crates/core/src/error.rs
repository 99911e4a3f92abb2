use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("measure is not uniformly log-concave: min V'' = {min_value} at x = {at} (coordinate {coordinate})")]
    NotUlc { coordinate: usize, min_value: f64, at: f64 },

    #[error("integral `{name}` did not stabilize under refinement: {coarse} vs {fine}")]
    DivergentIntegral { name: String, coarse: f64, fine: f64 },

    #[error("recurrence coefficients unavailable: {0}")]
    MomentOverflow(String),

    #[error("basis lost orthogonality: Gram residual {residual} exceeds {limit}")]
    LossOfOrthogonality { residual: f64, limit: f64 },

    #[error("degree overflow: {0}")]
    DegreeOverflow(String),

    #[error("truncation loss: {0}")]
    TruncationLoss(String),

    #[error("tensor level overflow: degree {degree} exceeds cap {cap}")]
    LevelOverflow { degree: usize, cap: usize },

    #[error("truncation mismatch: {0}")]
    TruncationMismatch(String),

    #[error("sampler failure: {0}")]
    SamplerFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;
