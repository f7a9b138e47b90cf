//! The Integrated Data Model: Database, UI and TestCase levels in one
//! relational schema, its text format, validation and DDL.

mod ddl;
mod model;
mod parse;
mod render;
mod resolve;
mod validate;

pub use ddl::{dependency_order, emit_ddl};
pub use model::*;
pub use parse::{parse_schema, parse_schema_unchecked};
pub use resolve::{resolve_attribute, AttrName, ResolveError, ResolvedAttr};
pub use validate::{validate_schema, Diagnostic, Invariant};

use crate::ident::Ident;
use crate::lex::{Span, SyntaxError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SchemaError {
    #[error("schema syntax error at {0}")]
    Syntax(#[from] SyntaxError),
    #[error("{span}: duplicate entity {name}")]
    DuplicateEntity { name: Ident, span: Span },
    #[error("{span}: unknown level `{level}` (expected Database, UI or TestCase)")]
    UnknownLevel { level: String, span: Span },
    #[error("no entities declared")]
    NoEntities,
    #[error("invalid schema:\n{}", .0.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Diagnostic>),
    #[error("cyclic foreign-key dependency: {}", .0.iter().map(|e| e.as_str()).collect::<Vec<_>>().join(" -> "))]
    FkCycle(Vec<Ident>),
}
