//! Query planning and execution: the node DAG, request batching, speculative
//! prefetch and the executor.

mod cost;
mod dag;
mod exec;
mod fetch;
mod realize;
mod speculate;
mod trace;

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};

use thiserror::Error;

use crate::process::ProcessError;
use crate::store::StoreError;

pub use cost::{
    combine_phase, combined_cardinality, efgv, predict_cost, request_cardinality, singleton_phase,
    slot_counts, BatchPlan, CombinedGroup, CostModel, Phase,
};
pub use dag::{build_dag, NodeKind, PlanDag, PlanNode};
pub use exec::{run, Backend, Engine, OutputCollection, ResultSet};
pub use trace::{ExecutionTrace, NodeStep, TraceRecord};

/// Execution strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// One request per phase, one node at a time.
    NoOpt,
    /// Every ready node per wave, one phase per wave.
    Parallel,
    /// Parallel plus superset prefetch of process-dependent rows.
    Speculate,
    /// Speculate plus cost-based request combination.
    SmartFuse,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::NoOpt,
        Strategy::Parallel,
        Strategy::Speculate,
        Strategy::SmartFuse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::NoOpt => "noopt",
            Strategy::Parallel => "parallel",
            Strategy::Speculate => "speculate",
            Strategy::SmartFuse => "smartfuse",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let k: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == k)
            .ok_or_else(|| {
                format!("unknown strategy `{s}` (expected noopt, parallel, speculate or smartfuse)")
            })
    }
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("not supported: {0}")]
    NotSupported(String),
    #[error("unbounded domain: {0}")]
    UnboundedDomain(String),
    #[error("cycle through {0}")]
    CycleDetected(String),
    #[error("index {index} out of range for {len} visualizations")]
    IndexOutOfRange { index: i64, len: usize },
    #[error("malformed query: {0}")]
    Malformed(String),
    #[error("internal planner error: {0}")]
    Internal(String),
    #[error("{node}: {source}")]
    Store { node: String, source: StoreError },
    #[error("{node}: {source}")]
    Process { node: String, source: ProcessError },
    #[error("{node}: {source}")]
    InNode {
        node: String,
        source: Box<PlanError>,
    },
}

static SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Forces sequential execution process-wide.
pub fn set_sequential(on: bool) {
    SEQUENTIAL.store(on, Ordering::Relaxed);
}

pub fn is_parallel_build() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(feature = "parallel")]
pub(crate) fn par_map<T: Sync, R: Send>(
    parallel: bool,
    items: &[T],
    f: impl Fn(&T) -> R + Sync + Send,
) -> Vec<R> {
    use rayon::prelude::*;
    if parallel && items.len() > 1 && !SEQUENTIAL.load(Ordering::Relaxed) {
        items.par_iter().map(f).collect()
    } else {
        items.iter().map(f).collect()
    }
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn par_map<T: Sync, R: Send>(
    _parallel: bool,
    items: &[T],
    f: impl Fn(&T) -> R + Sync + Send,
) -> Vec<R> {
    items.iter().map(f).collect()
}
