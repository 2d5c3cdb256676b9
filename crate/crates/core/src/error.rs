use thiserror::Error;

/// Errors raised while evaluating or optimizing a (validated) portfolio.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unknown gdf `{0}`")]
    UnknownGdf(String),
    #[error("gdf `{gdf}` has no attack `{attack}`")]
    UnknownAttack { gdf: String, attack: String },
    #[error("spend must be finite and >= 0, got {0}")]
    InvalidSpend(f64),
    #[error("degenerate curve range: s_max = {s_max}, samples = {samples} (need s_max > 0 and samples >= 2)")]
    DegenerateRange { s_max: f64, samples: usize },
    #[error("dependency cycle detected at `{0}`")]
    CycleDetected(String),
    #[error("gdf `{0}` is not mandatory")]
    NotMandatory(String),
    #[error("the literal cost mode is not concave; water-filling does not apply")]
    NonConcaveMode,
}
