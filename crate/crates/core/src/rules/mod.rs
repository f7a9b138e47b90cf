//! The business-rule language: paths, frames, value and quantification
//! conditions, constraint and derivation rules.

pub mod ast;
mod bind;
mod bound;
mod parser;
mod render;

pub use ast::{Comparator, RuleFile, RuleForm};
pub use bind::{bind_rules, BindError};
pub use bound::*;
pub use parser::parse_rules;

use crate::idm::IdmSchema;
use crate::ident::Ident;
use crate::lex::{Span, SyntaxError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RuleError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("{span}: path or frame {name} is declared twice")]
    DuplicateName { name: Ident, span: Span },
    #[error("{span}: {error}")]
    Bind { span: Span, error: BindError },
}

impl RuleError {
    pub fn span(&self) -> Span {
        match self {
            RuleError::Syntax(e) => e.span(),
            RuleError::DuplicateName { span, .. } | RuleError::Bind { span, .. } => *span,
        }
    }
}

/// Parses and binds a rules file in one step.
pub fn load_rules(source: &str, schema: &IdmSchema) -> Result<Vec<BusinessRule>, RuleError> {
    bind_rules(&parse_rules(source)?, schema)
}
