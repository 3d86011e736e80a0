//! The tabular query language: syntax tree, parser, printer and validation.

mod ast;
mod parse;
mod print;
mod validate;

pub use ast::*;
pub use parse::{parse_query, SyntaxError};
pub use validate::{
    validate, validate_with, BindSite, RowInfo, ValidatedQuery, ValidationError, VarInfo, VarRole,
};
