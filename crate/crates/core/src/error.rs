use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("alpha must lie in (1/2, 1), got {0}")]
    Alpha(f64),
    #[error("p must lie in [0, 1], got {0}")]
    P(f64),
    #[error("increments are at most +1, got {0}")]
    Increment(i64),
    #[error("{0}")]
    Invalid(String),
}

/// Which resource cap stopped a computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetKind {
    Steps,
    Level,
    Vertices,
    Skeleton,
    Rejections,
}

impl std::fmt::Display for BudgetKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            BudgetKind::Steps => "step",
            BudgetKind::Level => "level",
            BudgetKind::Vertices => "vertex",
            BudgetKind::Skeleton => "skeleton",
            BudgetKind::Rejections => "rejection",
        };
        f.write_str(s)
    }
}

/// A budget overrun that still hands back whatever was computed.
#[derive(Debug, Clone, Error)]
#[error("{kind} budget exceeded")]
pub struct BudgetExceeded<T> {
    pub kind: BudgetKind,
    pub partial: T,
}
