//! ZQL: a tabular query language for visual exploration, with a DAG planner,
//! an in-memory group-by backend, a process interpreter and the visual
//! exploration algebra.

pub mod plan;
pub mod process;
pub mod store;
pub mod value;
pub mod vea;
pub mod workload;
pub mod zql;

pub use value::{Selector, Value};
