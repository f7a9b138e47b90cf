//! Business rules bound against an [`IdmSchema`](crate::idm::IdmSchema).

use std::fmt;

use super::ast::{Comparator, RuleForm};
use crate::idm::AttrKind;
use crate::ident::Ident;
use crate::lex::Span;
use crate::value::{ArithOp, CmpOp, Truth, Value};

/// An attribute bound to one position of the rule's path.
#[derive(Debug, Clone, PartialEq)]
pub struct AttrRef {
    pub step: usize,
    pub entity: Ident,
    pub attribute: Ident,
    pub kind: AttrKind,
    pub nullable: bool,
    /// The reference as written in the rule, e.g. `P2.i_data`.
    pub written: String,
}

impl AttrRef {
    pub fn same_column(&self, other: &AttrRef) -> bool {
        self.step == other.step && self.attribute == other.attribute
    }
}

/// An entity occurrence on the path, as used by quantification conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityRef {
    pub step: usize,
    pub entity: Ident,
    pub written: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum JoinOperand {
    Attr(AttrRef),
    Const(Value),
}

#[derive(Debug, Clone, PartialEq)]
pub struct JoinConjunct {
    pub left: JoinOperand,
    pub right: JoinOperand,
}

/// Predicate joining path steps `i` and `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct JoinPredicate {
    pub conjuncts: Vec<JoinConjunct>,
    /// Relationship the predicate was materialized from, for `[]` joins.
    pub relationship: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathExpr {
    pub name: Ident,
    pub steps: Vec<Ident>,
    /// `predicates[i]` joins `steps[i]` and `steps[i + 1]`.
    pub predicates: Vec<JoinPredicate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameExpr {
    pub name: Ident,
    pub path: Ident,
    pub group_attrs: Vec<AttrRef>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArithExpr {
    Attr(AttrRef),
    Lit(Value),
    Neg(Box<ArithExpr>),
    Bin(ArithOp, Box<ArithExpr>, Box<ArithExpr>),
}

impl ArithExpr {
    /// Value of the expression when it references no attribute.
    pub fn fold(&self) -> Option<Value> {
        match self {
            ArithExpr::Attr(_) => None,
            ArithExpr::Lit(v) => Some(v.clone()),
            ArithExpr::Neg(e) => Some(Value::Integer(0).arith(ArithOp::Sub, &e.fold()?)),
            ArithExpr::Bin(op, a, b) => Some(a.fold()?.arith(*op, &b.fold()?)),
        }
    }

    pub fn attrs(&self) -> Vec<&AttrRef> {
        let mut out = Vec::new();
        self.collect_attrs(&mut out);
        out
    }

    fn collect_attrs<'a>(&'a self, out: &mut Vec<&'a AttrRef>) {
        match self {
            ArithExpr::Attr(a) => out.push(a),
            ArithExpr::Lit(_) => {}
            ArithExpr::Neg(e) => e.collect_attrs(out),
            ArithExpr::Bin(_, a, b) => {
                a.collect_attrs(out);
                b.collect_attrs(out);
            }
        }
    }

    /// Evaluates the expression with `lookup` supplying attribute values.
    pub fn eval(&self, lookup: &dyn Fn(&AttrRef) -> Value) -> Value {
        match self {
            ArithExpr::Attr(a) => lookup(a),
            ArithExpr::Lit(v) => v.clone(),
            ArithExpr::Neg(e) => Value::Integer(0).arith(ArithOp::Sub, &e.eval(lookup)),
            ArithExpr::Bin(op, a, b) => a.eval(lookup).arith(*op, &b.eval(lookup)),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            ArithExpr::Bin(ArithOp::Add | ArithOp::Sub, ..) => 1,
            ArithExpr::Bin(..) => 2,
            _ => 3,
        }
    }
}

impl fmt::Display for ArithExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArithExpr::Attr(a) => f.write_str(&a.written),
            ArithExpr::Lit(v) => f.write_str(&v.to_sql()),
            ArithExpr::Neg(e) if e.precedence() < 3 || matches!(**e, ArithExpr::Neg(_)) => write!(f, "-({e})"),
            ArithExpr::Neg(e) => write!(f, "-{e}"),
            ArithExpr::Bin(op, a, b) => {
                let p = self.precedence();
                if a.precedence() < p {
                    write!(f, "({a})")?;
                } else {
                    write!(f, "{a}")?;
                }
                write!(f, " {} ", op.symbol())?;
                if b.precedence() <= p {
                    write!(f, "({b})")
                } else {
                    write!(f, "{b}")
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueCondition {
    pub operand: AttrRef,
    pub comparator: Comparator,
    pub bound_p: ArithExpr,
    pub bound_q: Option<ArithExpr>,
    /// Written as `each G.A ...`.
    pub universal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantCondition {
    pub r: EntityRef,
    pub s: EntityRef,
    pub comparator: Comparator,
    pub bound_p: ArithExpr,
    pub bound_q: Option<ArithExpr>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Condition {
    Value(ValueCondition),
    Quant(QuantCondition),
}

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum BoolExpr {
    Cond(Condition),
    And(Vec<BoolExpr>),
    Or(Vec<BoolExpr>),
}

impl BoolExpr {
    pub fn conditions(&self) -> Vec<&Condition> {
        fn walk<'a>(e: &'a BoolExpr, out: &mut Vec<&'a Condition>) {
            match e {
                BoolExpr::Cond(c) => out.push(c),
                BoolExpr::And(v) | BoolExpr::Or(v) => v.iter().for_each(|x| walk(x, out)),
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub enum RuleKind {
    ConstraintValues,
    ConstraintCardinality,
    DerivationSomeTuple,
    DerivationAllFrame,
    DerivationCardinality,
}

impl RuleKind {
    pub const ALL: [RuleKind; 5] = [
        RuleKind::ConstraintValues,
        RuleKind::ConstraintCardinality,
        RuleKind::DerivationSomeTuple,
        RuleKind::DerivationAllFrame,
        RuleKind::DerivationCardinality,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RuleKind::ConstraintValues => "ConstraintValues",
            RuleKind::ConstraintCardinality => "ConstraintCardinality",
            RuleKind::DerivationSomeTuple => "DerivationSomeTuple",
            RuleKind::DerivationAllFrame => "DerivationAllFrame",
            RuleKind::DerivationCardinality => "DerivationCardinality",
        }
    }

    pub fn is_cardinality(self) -> bool {
        matches!(self, RuleKind::ConstraintCardinality | RuleKind::DerivationCardinality)
    }
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    pub target: AttrRef,
    pub value: ArithExpr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BusinessRule {
    pub name: Ident,
    pub assignment: Option<Ident>,
    pub form: RuleForm,
    pub kind: RuleKind,
    /// Name the rule's references are qualified with (path, frame or entity).
    pub context: Ident,
    pub path: PathExpr,
    pub frame: Option<FrameExpr>,
    pub condition: BoolExpr,
    pub actions: Vec<Action>,
    /// Canonical source text of the rule statement.
    pub text: String,
    pub span: Span,
}

/// Relational test of one atomic condition.
#[derive(Debug, Clone, PartialEq)]
pub enum AtomTest {
    Value { operand: AttrRef, op: AtomOp, bound: ArithExpr },
    Count { r: EntityRef, s: EntityRef, op: CmpOp, bound: ArithExpr },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtomOp {
    Cmp(CmpOp),
    Like,
}

/// An atomic condition after range decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub test: AtomTest,
    pub universal: bool,
    /// Natural-language rendering, e.g. `P2.i_data is like '%ORIGINAL%'`.
    pub text: String,
}

impl Atom {
    /// Attributes whose value the atom reads, operand first.
    pub fn attrs(&self) -> Vec<&AttrRef> {
        match &self.test {
            AtomTest::Value { operand, bound, .. } => {
                let mut v = vec![operand];
                v.extend(bound.attrs());
                v
            }
            AtomTest::Count { bound, .. } => bound.attrs(),
        }
    }

    pub fn reads(&self, attr: &AttrRef) -> bool {
        self.attrs().iter().any(|a| a.same_column(attr))
    }
}

/// Boolean structure over atom indices.
#[derive(Debug, Clone, PartialEq)]
pub enum Decision {
    Atom(usize),
    And(Vec<Decision>),
    Or(Vec<Decision>),
}

impl Decision {
    pub fn eval(&self, values: &[bool]) -> bool {
        match self {
            Decision::Atom(i) => values[*i],
            Decision::And(v) => v.iter().all(|d| d.eval(values)),
            Decision::Or(v) => v.iter().any(|d| d.eval(values)),
        }
    }

    pub fn eval3(&self, values: &[Truth]) -> Truth {
        match self {
            Decision::Atom(i) => values[*i],
            Decision::And(v) => v.iter().fold(Truth::True, |acc, d| acc.and(d.eval3(values))),
            Decision::Or(v) => v.iter().fold(Truth::False, |acc, d| acc.or(d.eval3(values))),
        }
    }
}

fn comparator_ops(c: Comparator) -> Vec<AtomOp> {
    match c {
        Comparator::AtLeast => vec![AtomOp::Cmp(CmpOp::Ge)],
        Comparator::AtMost => vec![AtomOp::Cmp(CmpOp::Le)],
        Comparator::Exactly => vec![AtomOp::Cmp(CmpOp::Eq)],
        Comparator::DifferentTo => vec![AtomOp::Cmp(CmpOp::Ne)],
        Comparator::Like => vec![AtomOp::Like],
        Comparator::Range => vec![AtomOp::Cmp(CmpOp::Ge), AtomOp::Cmp(CmpOp::Le)],
    }
}

pub(crate) fn op_phrase(op: AtomOp) -> &'static str {
    match op {
        AtomOp::Cmp(CmpOp::Ge) => "at least",
        AtomOp::Cmp(CmpOp::Le) => "at most",
        AtomOp::Cmp(CmpOp::Eq) => "exactly",
        AtomOp::Cmp(CmpOp::Ne) => "different to",
        AtomOp::Cmp(CmpOp::Gt) => "more than",
        AtomOp::Cmp(CmpOp::Lt) => "less than",
        AtomOp::Like => "like",
    }
}

impl BusinessRule {
    /// Decomposes the condition into atoms (ranges become two) and the
    /// boolean structure over them. Atom order follows the source.
    pub fn atoms(&self) -> (Vec<Atom>, Decision) {
        fn walk(e: &BoolExpr, atoms: &mut Vec<Atom>) -> Decision {
            match e {
                BoolExpr::And(v) => Decision::And(v.iter().map(|x| walk(x, atoms)).collect()),
                BoolExpr::Or(v) => Decision::Or(v.iter().map(|x| walk(x, atoms)).collect()),
                BoolExpr::Cond(c) => {
                    let mut parts = Vec::new();
                    match c {
                        Condition::Value(v) => {
                            let bounds = [Some(&v.bound_p), v.bound_q.as_ref()];
                            for (op, bound) in comparator_ops(v.comparator).into_iter().zip(bounds.into_iter().flatten()) {
                                let each = if v.universal { "each " } else { "" };
                                let text = format!("{each}{} is {} {bound}", v.operand.written, op_phrase(op));
                                parts.push(atoms.len());
                                atoms.push(Atom {
                                    test: AtomTest::Value { operand: v.operand.clone(), op, bound: bound.clone() },
                                    universal: v.universal,
                                    text,
                                });
                            }
                        }
                        Condition::Quant(q) => {
                            let bounds = [Some(&q.bound_p), q.bound_q.as_ref()];
                            for (op, bound) in comparator_ops(q.comparator).into_iter().zip(bounds.into_iter().flatten()) {
                                let AtomOp::Cmp(cmp) = op else { unreachable!("like is rejected for counts") };
                                let text = format!("{} has {} {bound} {}", q.r.written, op_phrase(op), q.s.written);
                                parts.push(atoms.len());
                                atoms.push(Atom {
                                    test: AtomTest::Count { r: q.r.clone(), s: q.s.clone(), op: cmp, bound: bound.clone() },
                                    universal: false,
                                    text,
                                });
                            }
                        }
                    }
                    if parts.len() == 1 {
                        Decision::Atom(parts[0])
                    } else {
                        Decision::And(parts.into_iter().map(Decision::Atom).collect())
                    }
                }
            }
        }
        let mut atoms = Vec::new();
        let decision = walk(&self.condition, &mut atoms);
        (atoms, decision)
    }

    /// Distinct nullable attributes read by the atoms, in first-occurrence order.
    pub fn nullable_attrs(&self) -> Vec<AttrRef> {
        let (atoms, _) = self.atoms();
        let mut out: Vec<AttrRef> = Vec::new();
        for atom in &atoms {
            for a in atom.attrs() {
                if a.nullable && !out.iter().any(|o| o.same_column(a)) {
                    out.push(a.clone());
                }
            }
        }
        out
    }

    /// Cardinality rules share one (R, S) pair across atoms.
    pub fn quantified_pair(&self) -> Option<(&EntityRef, &EntityRef)> {
        self.condition.conditions().into_iter().find_map(|c| match c {
            Condition::Quant(q) => Some((&q.r, &q.s)),
            Condition::Value(_) => None,
        })
    }
}

/// Kind of a bound rule, derived from its form, atom types and `each` flags.
pub fn classify_rule(rule: &BusinessRule) -> RuleKind {
    classify(rule.form, &rule.condition.conditions())
}

pub(crate) fn classify(form: RuleForm, conds: &[&Condition]) -> RuleKind {
    let quant = conds.iter().any(|c| matches!(c, Condition::Quant(_)));
    let universal = conds.iter().any(|c| matches!(c, Condition::Value(v) if v.universal));
    match (form, quant) {
        (RuleForm::Constraint, false) => RuleKind::ConstraintValues,
        (RuleForm::Constraint, true) => RuleKind::ConstraintCardinality,
        (RuleForm::Derivation, true) => RuleKind::DerivationCardinality,
        (RuleForm::Derivation, false) if universal => RuleKind::DerivationAllFrame,
        (RuleForm::Derivation, false) => RuleKind::DerivationSomeTuple,
    }
}

/// Number of rules per kind, in [`RuleKind::ALL`] order.
pub fn kind_tally(rules: &[BusinessRule]) -> [usize; 5] {
    let mut out = [0; 5];
    for r in rules {
        let k = classify_rule(r);
        out[RuleKind::ALL.iter().position(|x| *x == k).expect("listed")] += 1;
    }
    out
}
