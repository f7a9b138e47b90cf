//! Unbound syntax tree of a rules file.

use crate::ident::Ident;
use crate::lex::Span;
use crate::value::{ArithOp, Value};

/// A dotted reference such as `P2.i_data`, `P2.Stock.s_data` or `P1.UI_Order`.
#[derive(Debug, Clone, PartialEq)]
pub struct RefPath {
    pub parts: Vec<Ident>,
    pub span: Span,
}

impl RefPath {
    pub fn text(&self) -> String {
        self.parts.iter().map(|p| p.as_str()).collect::<Vec<_>>().join(".")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Lit(Value),
    Ref(RefPath),
    Neg(Box<Expr>),
    Bin(ArithOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Comparator {
    AtLeast,
    AtMost,
    Exactly,
    DifferentTo,
    Like,
    Range,
}

impl Comparator {
    pub fn phrase(self) -> &'static str {
        match self {
            Comparator::AtLeast => "at least",
            Comparator::AtMost => "at most",
            Comparator::Exactly => "exactly",
            Comparator::DifferentTo => "different to",
            Comparator::Like => "like",
            Comparator::Range => "at least",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CondDecl {
    /// `each` written before this condition.
    pub each: bool,
    pub subject: RefPath,
    pub comparator: Comparator,
    pub bound_p: Expr,
    pub bound_q: Option<Expr>,
    /// Counted entity of a quantification condition (`... has at least 5 P.S`).
    pub object: Option<RefPath>,
    pub span: Span,
}

impl CondDecl {
    pub fn is_quantification(&self) -> bool {
        self.object.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CondExpr {
    Cond(CondDecl),
    And(Vec<CondExpr>),
    Or(Vec<CondExpr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum RuleForm {
    Constraint,
    Derivation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionDecl {
    pub target: RefPath,
    pub value: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleDecl {
    pub name: Option<Ident>,
    pub form: RuleForm,
    pub condition: CondExpr,
    pub actions: Vec<ActionDecl>,
    pub span: Span,
}

/// Equality conjunct of an explicit path predicate.
#[derive(Debug, Clone, PartialEq)]
pub struct PredConjunct {
    pub left: Expr,
    pub right: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathDecl {
    pub name: Ident,
    pub steps: Vec<(Ident, Span)>,
    /// One entry per adjacent pair; `None` for `[]`.
    pub predicates: Vec<Option<Vec<PredConjunct>>>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameDecl {
    pub name: Ident,
    pub path: Ident,
    pub group: Vec<RefPath>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RuleFile {
    pub assignment: Option<Ident>,
    pub paths: Vec<PathDecl>,
    pub frames: Vec<FrameDecl>,
    pub rules: Vec<RuleDecl>,
}
