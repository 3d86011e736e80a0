//! In-memory columnar relation and the group-by backend.

mod agg;
mod predicate;
mod request;
mod sql;
mod table;

pub use agg::{AggFn, AggState, ExactSum};
pub use predicate::{Atom, CmpOp, CompiledPredicate, Predicate};
pub use request::{
    combined_group_count, execute, execute_combined, AggregateRequest, Binning, GroupedResult,
    Series,
};
pub use sql::{emit_sql, emit_sql_combined};
pub use table::{
    load_table, AttributeCatalog, Cardinalities, Column, ColumnKind, ColumnTable, DimensionKind,
    Schema, CROSS,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StoreError {
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("binning requires a numeric x attribute, `{0}` is categorical")]
    BinningOnCategorical(String),
    #[error("header does not match schema: {0}")]
    SchemaMismatch(String),
    #[error("parse error at data row {row} column `{column}`: `{value}`")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },
    #[error("bad schema: {0}")]
    BadSchema(String),
    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),
    #[error("column `{0}` has a different length")]
    LengthMismatch(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("io: {0}")]
    Io(String),
}

/// The four-row example relation (year, month, product, location, sales, profit).
pub fn sample_sales() -> ColumnTable {
    let ord = ColumnKind::Dimension(DimensionKind::Ordinal);
    ColumnTable::new(
        "sales",
        vec![
            Column::numeric("year", ord, [2016.0; 4]),
            Column::numeric("month", ord, [4.0, 3.0, 4.0, 4.0]),
            Column::categorical("product", ["chair", "chair", "table", "chair"]),
            Column::categorical("location", ["US", "US", "US", "UK"]),
            Column::numeric(
                "sales",
                ColumnKind::Measure,
                [623000.0, 789000.0, 258000.0, 130000.0],
            ),
            Column::numeric(
                "profit",
                ColumnKind::Measure,
                [314000.0, 410000.0, 169000.0, 63000.0],
            ),
        ],
    )
    .expect("sample relation is well formed")
}
