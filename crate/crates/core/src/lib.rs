//! Small weighted coresets for robust k-median and robust (k,z)-clustering
//! with m outliers.
//!
//! The pipeline decomposes a dataset around an approximate solution into far
//! points, layered ring instances, and an inner instance, builds a coreset
//! for each piece, and merges them with an explicit additive-error ledger.
//! The [`verify`] module certifies the resulting (eps, m, delta) guarantee
//! empirically against exact robust-cost evaluation.

pub mod coreset;
pub mod cost;
pub mod decompose;
pub mod exec;
pub mod io;
pub mod solver;
pub mod types;
pub mod verify;

pub use types::{
    make_rk_instance, CenterSet, CoresetReport, Decomposition, DistanceMatrix, MetricSpace,
    Params, Point, RegularInstance, RkInstance, WeightedPointSet,
};

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("outlier budget exceeds total weight (t={budget}, total={total})")]
    BudgetExceedsWeight { budget: f64, total: f64 },

    #[error("oracle instance too large: {0} points (max 12)")]
    OracleTooLarge(usize),

    #[error("combinatorial budget exceeded: {subsets} candidate k-subsets (max {max}); use the heuristic solver")]
    CombinatorialBudget { subsets: u128, max: u128 },

    #[error("exhaustive certification pool too large: {0} points (max 25)")]
    PoolTooLarge(usize),

    #[error("overlapping point identities in merge (id {0})")]
    OverlappingIds(usize),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
