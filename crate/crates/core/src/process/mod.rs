//! Process evaluation over visualization collections.

mod blocked;
mod eval;
mod primitives;
mod represent;
mod viz;

use thiserror::Error;

pub use blocked::{
    cache_aware_eval, cell_bytes, default_cache_bytes, is_tileable, DEFAULT_CACHE_BYTES,
};
pub use eval::{
    apply_limiter, eval_process, eval_process_instrumented, EvalStats, ProcessEnv, ProcessOutput,
};
pub use primitives::{
    d_euclidean, join_on_x, t_slope, z_normalize, DistanceFn, PlugFn, PrimitiveError, Registry,
    TrendFn, UnknownPrimitive,
};
pub use represent::k_medoids;
pub use viz::{Axis, CellSpec, Group, GroupId, Groups, UnitViz, VisCollection};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProcessError {
    #[error("unknown collection `{0}`")]
    UnknownCollection(String),
    #[error("variable `{0}` is not bound to any group")]
    UnboundVariable(String),
    #[error("collection `{collection}` cannot be indexed: {detail}")]
    MisalignedAxes { collection: String, detail: String },
    #[error("reduction over `{0}` has an empty domain")]
    EmptyReduce(String),
    #[error("primitive failed at {at}: {source}")]
    Primitive { at: String, source: PrimitiveError },
    #[error("candidate {index} scored {score}")]
    NonFiniteScore { index: usize, score: f64 },
    #[error("unknown plug-in `{0}`")]
    UnknownPrimitive(String),
    #[error("loop over `{0}` re-binds a variable that is already iterated")]
    LoopConflict(String),
    /// Raised inside a candidate's evaluation when a cell has no data; the candidate is dropped.
    #[error("visualization at {0} has no data")]
    NoData(String),
    #[error("cannot pick {k} representatives from {n} candidates")]
    BadK { k: usize, n: usize },
}
