//! Derivation of coverage rules: executable test requirements, one SQL
//! query each, covered when the query returns at least one row.

mod filter;
mod masking;

pub use filter::{dedupe_filter, Removal};
pub use masking::{derive_condition_variants, masked_determining, MaskingError, Variant, MAX_ATOMS};

use crate::compiler::{compile_context, variant_select, AtomForm, CompileError, ContextQuery, Select, Shape, SqlExpr};
use crate::idm::{IdmSchema, TypeClass};
use crate::ident::Ident;
use crate::rules::{Atom, AtomOp, AtomTest, AttrRef, BusinessRule};
use crate::value::{ArithOp, CmpOp, Value};

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum Requirement {
    JoinViolation { predicate: usize },
    AllTrue,
    ConditionFlip { atom: usize, assignment: Vec<bool> },
    NullValue { attribute: String },
    Boundary { atom: usize, delta: i64 },
}

impl Requirement {
    pub fn class(&self) -> &'static str {
        match self {
            Requirement::JoinViolation { .. } => "join_violation",
            Requirement::AllTrue => "all_true",
            Requirement::ConditionFlip { .. } => "condition_flip",
            Requirement::NullValue { .. } => "null_value",
            Requirement::Boundary { .. } => "boundary",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageRule {
    /// `<rule>.<class>.<ordinal>`
    pub id: String,
    pub source_rule: Ident,
    pub assignment: Option<Ident>,
    pub requirement: Requirement,
    pub sql: String,
    /// The same query projecting the columns reported as a witness.
    pub witness_sql: String,
    pub description: String,
    pub select: Select,
    /// The shape the query was built from.
    pub shape: Shape,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DeriveOptions {
    pub boundaries: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DeriveError {
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error("rule {rule}: {error}")]
    Masking { rule: Ident, error: MaskingError },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Derivation {
    pub rules: Vec<CoverageRule>,
    pub removed: Vec<Removal>,
}

struct Draft {
    requirement: Requirement,
    shape: Shape,
    description: String,
}

fn all_true(atoms: &[usize]) -> Vec<(usize, AtomForm)> {
    atoms.iter().map(|&i| (i, AtomForm::True)).collect()
}

fn list(items: &[&str]) -> String {
    match items {
        [] => String::new(),
        [one] => one.to_string(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

fn conditions_are(items: &[&str], state: &str) -> String {
    if items.len() == 1 {
        format!("the condition {} is {state}", items[0])
    } else {
        format!("the conditions {} are {state}", list(items))
    }
}

fn capitalise(s: String) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => s,
    }
}

struct Describer<'a> {
    rule: &'a BusinessRule,
    atoms: &'a [Atom],
}

impl Describer<'_> {
    fn path(&self) -> &str {
        self.rule.path.name.as_str()
    }

    fn predicates_hold(&self) -> String {
        if self.rule.path.predicates.is_empty() {
            String::new()
        } else {
            format!(" Besides, all predicates of {} are fulfilled.", self.path())
        }
    }

    fn join_violation(&self, j: usize, dropped: &[usize]) -> String {
        let steps = &self.rule.path.steps;
        let others = self.rule.path.predicates.len() - 1;
        let mut s = format!("The predicate of {} that connects {} and {} is not fulfilled", self.path(), steps[j], steps[j + 1]);
        match others {
            0 => {}
            1 => s.push_str(&format!(" and the other predicate of {} is fulfilled", self.path())),
            _ => s.push_str(&format!(" and the other predicates of {} are fulfilled", self.path())),
        }
        s.push('.');
        if dropped.len() < self.atoms.len() {
            s.push_str(" Besides, all conditions of the business rule are found to hold true");
            if !dropped.is_empty() {
                s.push_str(" where they can be evaluated");
            }
            s.push('.');
        }
        if !dropped.is_empty() {
            let texts: Vec<&str> = dropped.iter().map(|&i| self.atoms[i].text.as_str()).collect();
            s.push_str(&format!(" {}.", capitalise(conditions_are(&texts, "not evaluated"))));
        }
        s
    }

    fn all_true(&self) -> String {
        if self.rule.path.predicates.is_empty() {
            "All conditions of the business rule are found to hold true.".into()
        } else {
            format!("All predicates of the path {} are fulfilled and all conditions of the business rule are found to hold true.", self.path())
        }
    }

    fn flip(&self, assignment: &[bool]) -> String {
        let t: Vec<&str> = (0..self.atoms.len()).filter(|&i| assignment[i]).map(|i| self.atoms[i].text.as_str()).collect();
        let f: Vec<&str> = (0..self.atoms.len()).filter(|&i| !assignment[i]).map(|i| self.atoms[i].text.as_str()).collect();
        let mut parts = Vec::new();
        if !t.is_empty() {
            parts.push(conditions_are(&t, "true"));
        }
        parts.push(conditions_are(&f, "false"));
        format!("{}.{}", capitalise(parts.join(" and ")), self.predicates_hold())
    }

    fn null(&self, attr: &AttrRef, rest: &[usize]) -> String {
        let mut s = format!("The path attribute {} has a missing value", attr.written);
        if !rest.is_empty() {
            let texts: Vec<&str> = rest.iter().map(|&i| self.atoms[i].text.as_str()).collect();
            s.push_str(&format!(" and {}", conditions_are(&texts, "true")));
        }
        s.push('.');
        s + &self.predicates_hold()
    }

    fn boundary(&self, atom: usize, value: &str) -> String {
        let a = &self.atoms[atom];
        let subject = match &a.test {
            AtomTest::Value { operand, .. } => format!("{} is", operand.written),
            AtomTest::Count { r, s, .. } => format!("the number of {} per {} is", s.written, r.written),
        };
        let others = if self.atoms.len() > 1 { " and the other conditions hold" } else { "" };
        format!("{} {value}, at the edge of the condition {}{others}.{}", capitalise(subject), a.text, self.predicates_hold())
    }
}

fn numeric_step(atom: &Atom) -> Option<f64> {
    match &atom.test {
        AtomTest::Value { operand, op: AtomOp::Cmp(_), .. } if operand.kind.class() == TypeClass::Numeric => operand.kind.step(),
        AtomTest::Count { .. } => Some(1.0),
        _ => None,
    }
}

fn edges(op: CmpOp) -> &'static [i64] {
    match op {
        CmpOp::Ge => &[-1, 0],
        CmpOp::Le => &[0, 1],
        CmpOp::Gt => &[0, 1],
        CmpOp::Lt => &[-1, 0],
        CmpOp::Eq | CmpOp::Ne => &[-1, 0, 1],
    }
}

fn offset(bound: &SqlExpr, folded: Option<&Value>, step: f64, delta: i64) -> (SqlExpr, String) {
    let d = if step == 1.0 { Value::Integer(delta.abs()) } else { Value::Real(step * delta.abs() as f64) };
    if let Some(v) = folded {
        let out = match delta {
            0 => v.clone(),
            k if k > 0 => v.arith(ArithOp::Add, &d),
            _ => v.arith(ArithOp::Sub, &d),
        };
        let out = match out {
            Value::Real(r) => {
                let digits = (-step.log10()).round().max(0.0) as usize;
                Value::Real(format!("{r:.digits$}").parse().expect("formatted float parses"))
            }
            other => other,
        };
        return (SqlExpr::Lit(out.clone()), out.to_string());
    }
    let e = match delta {
        0 => bound.clone(),
        k => SqlExpr::Arith(if k > 0 { ArithOp::Add } else { ArithOp::Sub }, Box::new(bound.clone()), Box::new(SqlExpr::Lit(d))),
    };
    let text = e.to_string();
    (e, text)
}

/// All coverage rules of one business rule, before filtering.
pub fn derive_coverage_rules(
    rule: &BusinessRule,
    schema: &IdmSchema,
    opts: DeriveOptions,
) -> Result<Vec<CoverageRule>, DeriveError> {
    let ctx = compile_context(rule, schema)?;
    let (atoms, decision) = rule.atoms();
    let n = atoms.len();
    let describe = Describer { rule, atoms: &atoms };
    let every: Vec<usize> = (0..n).collect();
    let mut drafts: Vec<Draft> = Vec::new();

    for j in 0..ctx.predicates.len() {
        let kept_steps = ctx.anchored_side(j).0;
        let (kept, dropped): (Vec<usize>, Vec<usize>) =
            every.iter().partition(|&&i| ctx.atoms[i].steps.iter().all(|s| kept_steps.contains(s)));
        drafts.push(Draft {
            requirement: Requirement::JoinViolation { predicate: j },
            shape: Shape { violate: Some(j), atoms: all_true(&kept), nulls: vec![] },
            description: describe.join_violation(j, &dropped),
        });
    }

    let variants = derive_condition_variants(&decision, n)
        .map_err(|error| DeriveError::Masking { rule: rule.name.clone(), error })?;
    for v in &variants {
        let forms = v.assignment.iter().enumerate().map(|(i, &b)| (i, if b { AtomForm::True } else { AtomForm::False })).collect();
        let shape = Shape { violate: None, atoms: forms, nulls: vec![] };
        match v.shows {
            None => drafts.push(Draft { requirement: Requirement::AllTrue, shape, description: describe.all_true() }),
            Some(atom) => drafts.push(Draft {
                requirement: Requirement::ConditionFlip { atom, assignment: v.assignment.clone() },
                shape,
                description: describe.flip(&v.assignment),
            }),
        }
    }

    for attr in rule.nullable_attrs() {
        let rest: Vec<usize> = every.iter().copied().filter(|&i| !atoms[i].reads(&attr)).collect();
        drafts.push(Draft {
            requirement: Requirement::NullValue { attribute: attr.written.clone() },
            description: describe.null(&attr, &rest),
            shape: Shape { violate: None, atoms: all_true(&rest), nulls: vec![attr] },
        });
    }

    if opts.boundaries {
        for (i, atom) in atoms.iter().enumerate() {
            let Some(step) = numeric_step(atom) else { continue };
            let (op, bound) = match &atom.test {
                AtomTest::Value { op: AtomOp::Cmp(op), bound, .. } | AtomTest::Count { op, bound, .. } => (*op, bound),
                _ => continue,
            };
            let folded = bound.fold();
            let bound_sql = crate::compiler::arith_sql(bound, &ctx);
            for &delta in edges(op) {
                let (pin, text) = offset(&bound_sql, folded.as_ref(), step, delta);
                if atom_is_count(atom) && matches!(&pin, SqlExpr::Lit(v) if v.as_f64().is_some_and(|x| x < 0.0)) {
                    continue;
                }
                let mut forms: Vec<(usize, AtomForm)> = every.iter().filter(|&&k| k != i).map(|&k| (k, AtomForm::True)).collect();
                forms.insert(i, (i, AtomForm::Equals(pin)));
                drafts.push(Draft {
                    requirement: Requirement::Boundary { atom: i, delta },
                    description: describe.boundary(i, &text),
                    shape: Shape { violate: None, atoms: forms, nulls: vec![] },
                });
            }
        }
    }

    let mut ordinals: Vec<(&'static str, usize)> = Vec::new();
    Ok(drafts
        .into_iter()
        .map(|d| {
            let class = d.requirement.class();
            let ord = match ordinals.iter_mut().find(|(c, _)| *c == class) {
                Some((_, k)) => {
                    *k += 1;
                    *k
                }
                None => {
                    ordinals.push((class, 1));
                    1
                }
            };
            build(rule, &ctx, schema, d, format!("{}.{class}.{ord}", rule.name))
        })
        .collect())
}

fn atom_is_count(a: &Atom) -> bool {
    matches!(a.test, AtomTest::Count { .. })
}

fn build(rule: &BusinessRule, ctx: &ContextQuery, schema: &IdmSchema, d: Draft, id: String) -> CoverageRule {
    let select = variant_select(ctx, &d.shape);
    CoverageRule {
        id,
        source_rule: rule.name.clone(),
        assignment: rule.assignment.clone(),
        sql: select.to_string(),
        witness_sql: select.with_witness_projection(schema).to_string(),
        requirement: d.requirement,
        description: d.description,
        select,
        shape: d.shape,
    }
}

/// Derives and filters the coverage rules of every business rule, in
/// rule order. Duplicates are removed within a business rule only, so two
/// rules sharing a path each keep their own join-violation requirement.
pub fn derive_all(rules: &[BusinessRule], schema: &IdmSchema, opts: DeriveOptions) -> Result<Derivation, DeriveError> {
    let mut out = Derivation::default();
    for r in rules {
        let (kept, removed) = dedupe_filter(derive_coverage_rules(r, schema, opts)?);
        out.rules.extend(kept);
        out.removed.extend(removed);
    }
    Ok(out)
}

#[derive(serde::Serialize)]
struct BundleRecord<'a> {
    id: &'a str,
    class: &'a str,
    business_rule: &'a str,
    description: &'a str,
    sql: &'a str,
}

#[derive(serde::Serialize)]
struct Bundle<'a> {
    rule: Vec<BundleRecord<'a>>,
}

/// The coverage-rule bundle as TOML, one `[[rule]]` table per rule.
pub fn render_bundle(rules: &[CoverageRule]) -> String {
    let bundle = Bundle {
        rule: rules
            .iter()
            .map(|r| BundleRecord {
                id: &r.id,
                class: r.requirement.class(),
                business_rule: r.source_rule.as_str(),
                description: &r.description,
                sql: &r.sql,
            })
            .collect(),
    };
    toml::to_string(&bundle).expect("bundle fields are plain strings")
}
