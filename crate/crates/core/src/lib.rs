//! Specification-based test adequacy for database applications.
//!
//! The user interface and the database are modelled as one Integrated Data
//! Model ([`idm`]). Business rules written in a small DSL ([`rules`]) are
//! compiled to SQL ([`compiler`]) and expanded by a masking-MCDC criterion
//! into coverage rules ([`mcdc`]). The [`eval`] module loads test inputs,
//! executes the coverage rules and reports which test requirements are
//! covered, cross-checked by a reference interpreter.

pub mod ident;
pub mod idm;
pub mod lex;
pub mod compiler;
pub mod eval;
pub mod mcdc;
pub mod rules;
pub mod value;

pub use ident::Ident;
pub use idm::{IdmSchema, SchemaError};
pub use value::{Truth, Value};
