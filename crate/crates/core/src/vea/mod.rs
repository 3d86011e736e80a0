//! The visual exploration algebra over ordered bags of visual sources, and a
//! harness that replays each operator as a query and compares the results.

pub mod bag;
mod group;
mod harness;
mod ops;

use thiserror::Error;

use crate::plan::PlanError;
use crate::process::PrimitiveError;
use crate::store::StoreError;

pub use group::{materialize, select_universe, Attr, Theta, VisualGroup, VisualSource};
pub use harness::{
    completeness_check, completeness_suite, evaluate, operator_applications, random_relation,
    to_zql, via_zql, Application, CheckOutcome, Operator, OperatorReport, OPERATORS,
};
pub use ops::{
    dedup_v, diff_v, dist_v, find_v, intersect_v, limit_v, sel_v, sort_v, swap_v, union_v, Context,
    Functional, Limit,
};

#[derive(Debug, Error)]
pub enum VeaError {
    #[error("index {index} out of range for {len} sources")]
    IndexOutOfRange { index: i64, len: usize },
    #[error("operator `{0}` is not allowed in a visual selection")]
    IllegalOperator(String),
    #[error("selection is undefined in strict mode: {0}")]
    UndefinedSelection(String),
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("undefined match: {0}")]
    UndefinedMatch(String),
    #[error("reference group must hold exactly one source, found {0}")]
    NonSingletonReference(usize),
    #[error("arity mismatch: expected {expected} columns, found {found}")]
    ArityMismatch { expected: usize, found: usize },
    #[error("unbounded: {0}")]
    Unbounded(String),
    #[error("malformed: {0}")]
    Malformed(String),
    #[error("not expressible as a query: {0}")]
    NotExpressible(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Primitive(#[from] PrimitiveError),
    #[error("query failed: {0}")]
    Query(String),
    #[error(transparent)]
    Plan(#[from] PlanError),
}
