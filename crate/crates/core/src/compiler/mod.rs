//! Compiles bound business rules to SQL over the IDM database.
//!
//! [`compile_context`] builds the join chain of a rule's path, anchored to
//! the TestCase entity, plus true/false/null fragments for every atom.
//! [`variant_select`] turns a [`Shape`] (which atoms hold, which fail, which
//! predicate is broken) into one executable query.

mod sql;

pub use sql::*;

use crate::idm::{IdmSchema, TEST_CASE_ENTITY};
use crate::ident::Ident;
use crate::rules::{
    ArithExpr, AtomOp, AtomTest, AttrRef, BusinessRule, Comparator, Decision, QuantCondition, RuleKind, ValueCondition,
};
use crate::value::CmpOp;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CompileError {
    #[error("rule {rule}: no foreign-key route connects {entity} to {}", TEST_CASE_ENTITY)]
    NoAnchorRoute { rule: Ident, entity: Ident },
    #[error("rule {rule}: the path reaches the test case only through the counted entities; put {entity} before them")]
    AnchorInsideCount { rule: Ident, entity: Ident },
}

/// One table of the anchor chain; the first has no join condition.
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub table: TableRef,
    pub on: Option<SqlExpr>,
}

/// Row-level SQL fragments of one atom. For counting atoms the forms are
/// HAVING conditions over `COUNT(<S key>)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomSql {
    /// The tested value: the operand column, or the count.
    pub subject: SqlExpr,
    pub true_form: SqlExpr,
    pub false_form: SqlExpr,
    pub null_forms: Vec<(AttrRef, SqlExpr)>,
    /// Path steps the atom reads.
    pub steps: Vec<usize>,
    pub count: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextQuery {
    pub rule: Ident,
    pub kind: RuleKind,
    pub anchors: Vec<Link>,
    /// Primary-key columns of each anchor table.
    pub anchor_keys: Vec<Vec<Ident>>,
    /// Table of each path step.
    pub steps: Vec<TableRef>,
    pub keys: Vec<Vec<Ident>>,
    /// Path step the anchor chain joins.
    pub attach: Option<usize>,
    pub attach_on: Option<SqlExpr>,
    /// `predicates[i]` joins steps `i` and `i + 1`.
    pub predicates: Vec<SqlExpr>,
    /// Join order of path steps: the attach step, then outwards.
    pub order: Vec<usize>,
    pub atoms: Vec<AtomSql>,
    pub decision: Decision,
    /// Frame grouping columns with their path steps.
    pub grouping: Option<Vec<(usize, SqlExpr)>>,
    /// (R, S) steps of counting rules.
    pub quantified: Option<(usize, usize)>,
}

/// How one atom is constrained in a variant query.
#[derive(Debug, Clone, PartialEq)]
pub enum AtomForm {
    True,
    False,
    /// Tested value pinned to an expression (boundary variants).
    Equals(SqlExpr),
}

/// A test requirement's query shape.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Shape {
    /// Path predicate to violate with an anti-join.
    pub violate: Option<usize>,
    pub atoms: Vec<(usize, AtomForm)>,
    /// Attributes required to be NULL.
    pub nulls: Vec<AttrRef>,
}

pub fn arith_sql(e: &ArithExpr, ctx: &ContextQuery) -> SqlExpr {
    match e {
        ArithExpr::Attr(a) => ctx.column(a),
        ArithExpr::Lit(v) => SqlExpr::Lit(v.clone()),
        ArithExpr::Neg(x) => SqlExpr::Neg(Box::new(arith_sql(x, ctx))),
        ArithExpr::Bin(op, a, b) => SqlExpr::Arith(*op, Box::new(arith_sql(a, ctx)), Box::new(arith_sql(b, ctx))),
    }
}

fn equalities(pairs: Vec<(SqlExpr, SqlExpr)>) -> SqlExpr {
    SqlExpr::and(pairs.into_iter().map(|(a, b)| SqlExpr::cmp(CmpOp::Eq, a, b)).collect())
}

fn null_forms(attrs: Vec<&AttrRef>, ctx: &ContextQuery) -> Vec<(AttrRef, SqlExpr)> {
    let mut out: Vec<(AttrRef, SqlExpr)> = Vec::new();
    for a in attrs {
        if a.nullable && !out.iter().any(|(o, _)| o.same_column(a)) {
            out.push((a.clone(), SqlExpr::is_null(ctx.column(a))));
        }
    }
    out
}

/// Builds the anchored join chain of `rule`'s path and the SQL fragments of
/// its atoms.
pub fn compile_context(rule: &BusinessRule, schema: &IdmSchema) -> Result<ContextQuery, CompileError> {
    let path = &rule.path;
    let route = schema
        .anchor_route(&path.steps)
        .map_err(|entity| CompileError::NoAnchorRoute { rule: rule.name.clone(), entity })?;
    let mut used: Vec<String> = Vec::new();
    let mut alias = |e: &Ident| {
        let base = e.as_str().to_string();
        let mut name = base.clone();
        let mut n = 1;
        while used.iter().any(|u| u.eq_ignore_ascii_case(&name)) {
            n += 1;
            name = format!("{base}{n}");
        }
        used.push(name.clone());
        TableRef { entity: e.clone(), alias: name }
    };
    let key_of = |e: &Ident| schema.entity(e).expect("bound entity").primary_key.clone();

    let mut anchors: Vec<Link> = Vec::new();
    let mut anchor_keys = Vec::new();
    let (attach, mut attach_on_rel) = (route.as_ref().map(|r| r.attach), None);
    if let Some(route) = &route {
        for (entity, rel) in &route.joins {
            let table = alias(entity);
            let on = rel.map(|ri| {
                let prev = anchors.last().expect("first anchor has no relationship");
                let pairs = schema.relationships[ri].pairs_oriented(&prev.table.entity);
                equalities(
                    pairs.into_iter().map(|(a, b)| (SqlExpr::col(&prev.table.alias, &a), SqlExpr::col(&table.alias, &b))).collect(),
                )
            });
            anchor_keys.push(key_of(entity));
            anchors.push(Link { table, on });
        }
        attach_on_rel = route.attach_relationship;
    }
    let steps: Vec<TableRef> = path.steps.iter().map(&mut alias).collect();
    let keys = path.steps.iter().map(key_of).collect();

    let attach_on = attach_on_rel.map(|ri| {
        let prev = anchors.last().expect("attach relationship implies an anchor");
        let at = &steps[attach.expect("route attaches")];
        let pairs = schema.relationships[ri].pairs_oriented(&prev.table.entity);
        equalities(pairs.into_iter().map(|(a, b)| (SqlExpr::col(&prev.table.alias, &a), SqlExpr::col(&at.alias, &b))).collect())
    });

    let mut ctx = ContextQuery {
        rule: rule.name.clone(),
        kind: rule.kind,
        anchors,
        anchor_keys,
        steps,
        keys,
        attach,
        attach_on,
        predicates: Vec::new(),
        order: Vec::new(),
        atoms: Vec::new(),
        decision: Decision::And(vec![]),
        grouping: None,
        quantified: rule.quantified_pair().map(|(r, s)| (r.step, s.step)),
    };

    ctx.predicates = path
        .predicates
        .iter()
        .map(|p| {
            let operand = |o: &crate::rules::JoinOperand| match o {
                crate::rules::JoinOperand::Attr(a) => ctx.column(a),
                crate::rules::JoinOperand::Const(v) => SqlExpr::Lit(v.clone()),
            };
            equalities(p.conjuncts.iter().map(|c| (operand(&c.left), operand(&c.right))).collect())
        })
        .collect();

    let n = path.steps.len();
    let base = attach.unwrap_or(0);
    ctx.order = std::iter::once(base).chain((0..base).rev()).chain(base + 1..n).collect();

    if let (Some((r, _)), Some(a)) = (ctx.quantified, attach) {
        if a > r {
            return Err(CompileError::AnchorInsideCount { rule: rule.name.clone(), entity: path.steps[a].clone() });
        }
    }

    let (atoms, decision) = rule.atoms();
    ctx.atoms = atoms
        .iter()
        .map(|atom| match &atom.test {
            AtomTest::Value { operand, op, bound } => {
                let x = ctx.column(operand);
                let b = arith_sql(bound, &ctx);
                let tf = match op {
                    AtomOp::Cmp(c) => SqlExpr::cmp(*c, x.clone(), b),
                    AtomOp::Like => SqlExpr::Like(Box::new(x.clone()), Box::new(b)),
                };
                let ff = if operand.nullable {
                    SqlExpr::And(vec![SqlExpr::is_not_null(x.clone()), SqlExpr::negate(tf.clone())])
                } else {
                    SqlExpr::negate(tf.clone())
                };
                let mut steps: Vec<usize> = atom.attrs().iter().map(|a| a.step).collect();
                steps.sort();
                steps.dedup();
                AtomSql { subject: x, true_form: tf, false_form: ff, null_forms: null_forms(atom.attrs(), &ctx), steps, count: false }
            }
            AtomTest::Count { r, s, op, bound } => {
                let cnt = ctx.count_expr(s.step);
                let tf = SqlExpr::cmp(*op, cnt.clone(), arith_sql(bound, &ctx));
                let mut steps: Vec<usize> = (r.step..=s.step).chain(bound.attrs().iter().map(|a| a.step)).collect();
                steps.sort();
                steps.dedup();
                AtomSql {
                    subject: cnt,
                    false_form: SqlExpr::negate(tf.clone()),
                    true_form: tf,
                    null_forms: null_forms(atom.attrs(), &ctx),
                    steps,
                    count: true,
                }
            }
        })
        .collect();
    ctx.decision = decision;
    ctx.grouping = rule.frame.as_ref().map(|f| f.group_attrs.iter().map(|a| (a.step, ctx.column(a))).collect());
    Ok(ctx)
}

/// True, false and null forms of a whole value condition (ranges joined).
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionSql {
    pub true_form: SqlExpr,
    pub false_form: SqlExpr,
    pub null_forms: Vec<SqlExpr>,
}

pub fn compile_value_condition(cond: &ValueCondition, ctx: &ContextQuery) -> ConditionSql {
    let x = ctx.column(&cond.operand);
    let test = |c: CmpOp, b: &ArithExpr| SqlExpr::cmp(c, x.clone(), arith_sql(b, ctx));
    let tf = match cond.comparator {
        Comparator::AtLeast => test(CmpOp::Ge, &cond.bound_p),
        Comparator::AtMost => test(CmpOp::Le, &cond.bound_p),
        Comparator::Exactly => test(CmpOp::Eq, &cond.bound_p),
        Comparator::DifferentTo => test(CmpOp::Ne, &cond.bound_p),
        Comparator::Like => SqlExpr::Like(Box::new(x.clone()), Box::new(arith_sql(&cond.bound_p, ctx))),
        Comparator::Range => SqlExpr::And(vec![
            test(CmpOp::Ge, &cond.bound_p),
            test(CmpOp::Le, cond.bound_q.as_ref().expect("range has two bounds")),
        ]),
    };
    let ff = if cond.operand.nullable {
        SqlExpr::And(vec![SqlExpr::is_not_null(x.clone()), SqlExpr::negate(tf.clone())])
    } else {
        SqlExpr::negate(tf.clone())
    };
    let mut attrs = vec![&cond.operand];
    attrs.extend(cond.bound_p.attrs());
    if let Some(q) = &cond.bound_q {
        attrs.extend(q.attrs());
    }
    ConditionSql { true_form: tf, false_form: ff, null_forms: null_forms(attrs, ctx).into_iter().map(|(_, e)| e).collect() }
}

/// Grouped query counting S tuples per R tuple, with the condition's
/// comparison in HAVING.
pub fn compile_quantification(cond: &QuantCondition, ctx: &ContextQuery) -> Select {
    let cnt = ctx.count_expr(cond.s.step);
    let test = |c: CmpOp, b: &ArithExpr| SqlExpr::cmp(c, cnt.clone(), arith_sql(b, ctx));
    let having = match cond.comparator {
        Comparator::AtLeast => vec![test(CmpOp::Ge, &cond.bound_p)],
        Comparator::AtMost => vec![test(CmpOp::Le, &cond.bound_p)],
        Comparator::Exactly => vec![test(CmpOp::Eq, &cond.bound_p)],
        Comparator::DifferentTo | Comparator::Like => vec![test(CmpOp::Ne, &cond.bound_p)],
        Comparator::Range => {
            vec![test(CmpOp::Ge, &cond.bound_p), test(CmpOp::Le, cond.bound_q.as_ref().expect("range has two bounds"))]
        }
    };
    let mut q = ctx.build(None, true, Vec::new(), Vec::new());
    q.having = having;
    q
}

/// The two grouped forms of an all-tuples-of-a-frame rule.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameQueries {
    /// Frames in which every tuple satisfies the condition.
    pub all_satisfy: Select,
    /// Frames in which some tuple does not satisfy it.
    pub some_violate: Select,
}

pub fn compile_frame_universal(ctx: &ContextQuery) -> FrameQueries {
    let cond = ctx.decision_sql();
    let mut all = ctx.build(None, false, Vec::new(), Vec::new());
    all.having = vec![
        SqlExpr::cmp(CmpOp::Eq, SqlExpr::sum_case(cond.clone(), 0, 1), SqlExpr::int(0)),
        SqlExpr::cmp(CmpOp::Ge, SqlExpr::CountStar, SqlExpr::int(1)),
    ];
    let mut some = all.clone();
    some.having = vec![SqlExpr::cmp(CmpOp::Ge, SqlExpr::sum_case(cond, 0, 1), SqlExpr::int(1))];
    FrameQueries { all_satisfy: all, some_violate: some }
}

/// The query for one test requirement.
pub fn variant_select(ctx: &ContextQuery, shape: &Shape) -> Select {
    let kept = match shape.violate {
        Some(j) => ctx.anchored_side(j).0,
        None => (0..ctx.steps.len()).collect(),
    };
    let counting = ctx.quantified.is_some() && shape.atoms.iter().any(|(i, _)| ctx.atoms[*i].count);
    let frame = ctx.grouping.is_some();
    let lift = |cond: SqlExpr, all: bool| {
        if all {
            SqlExpr::cmp(CmpOp::Eq, SqlExpr::sum_case(cond, 0, 1), SqlExpr::int(0))
        } else {
            SqlExpr::cmp(CmpOp::Ge, SqlExpr::sum_case(cond, 1, 0), SqlExpr::int(1))
        }
    };
    let mut filter = Vec::new();
    let mut having = Vec::new();
    for (i, form) in &shape.atoms {
        let a = &ctx.atoms[*i];
        let (cond, all) = match form {
            AtomForm::True => (a.true_form.clone(), true),
            AtomForm::False => (a.false_form.clone(), false),
            AtomForm::Equals(v) => (SqlExpr::cmp(CmpOp::Eq, a.subject.clone(), v.clone()), false),
        };
        if a.count {
            having.push(cond);
        } else if frame {
            having.push(lift(cond, all));
        } else {
            filter.push(cond);
        }
    }
    for n in &shape.nulls {
        let cond = SqlExpr::is_null(ctx.column(n));
        if frame {
            having.push(lift(cond, false));
        } else {
            filter.push(cond);
        }
    }
    if frame {
        having.push(SqlExpr::cmp(CmpOp::Ge, SqlExpr::CountStar, SqlExpr::int(1)));
    }
    let bound_cols: Vec<SqlExpr> = shape
        .atoms
        .iter()
        .filter(|(i, _)| ctx.atoms[*i].count)
        .flat_map(|(i, _)| collect_columns(&ctx.atoms[*i].true_form))
        .collect();
    let mut q = ctx.build_with(shape.violate, &kept, counting, filter, bound_cols);
    q.having.extend(having);
    q
}

fn collect_columns(e: &SqlExpr) -> Vec<SqlExpr> {
    let mut out = Vec::new();
    fn walk(e: &SqlExpr, out: &mut Vec<SqlExpr>) {
        match e {
            SqlExpr::Column { .. } => out.push(e.clone()),
            SqlExpr::Count(_) | SqlExpr::CountStar | SqlExpr::Lit(_) => {}
            SqlExpr::Neg(x) | SqlExpr::IsNull(x) | SqlExpr::IsNotNull(x) | SqlExpr::Not(x) | SqlExpr::Sum(x) => walk(x, out),
            SqlExpr::Arith(_, a, b) | SqlExpr::Cmp(_, a, b) | SqlExpr::Like(a, b) => {
                walk(a, out);
                walk(b, out);
            }
            SqlExpr::And(v) | SqlExpr::Or(v) => v.iter().for_each(|x| walk(x, out)),
            SqlExpr::Case { when, then, otherwise } => {
                walk(when, out);
                walk(then, out);
                walk(otherwise, out);
            }
        }
    }
    walk(e, &mut out);
    out
}

impl ContextQuery {
    pub fn column(&self, a: &AttrRef) -> SqlExpr {
        SqlExpr::col(&self.steps[a.step].alias, &a.attribute)
    }

    fn count_expr(&self, s: usize) -> SqlExpr {
        SqlExpr::Count(Box::new(SqlExpr::col(&self.steps[s].alias, &self.keys[s][0])))
    }

    /// Steps kept when predicate `j` is violated (the side holding the
    /// anchor), and the step on the far side of `j`.
    pub fn anchored_side(&self, j: usize) -> (Vec<usize>, usize) {
        let base = self.attach.unwrap_or(0);
        if base <= j {
            ((0..=j).collect(), j + 1)
        } else {
            ((j + 1..self.steps.len()).collect(), j)
        }
    }

    /// The rule's decision over the atoms' true forms.
    pub fn decision_sql(&self) -> SqlExpr {
        fn walk(d: &Decision, ctx: &ContextQuery) -> SqlExpr {
            match d {
                Decision::Atom(i) => ctx.atoms[*i].true_form.clone(),
                Decision::And(v) => SqlExpr::and(v.iter().map(|x| walk(x, ctx)).collect()),
                Decision::Or(v) => SqlExpr::Or(v.iter().map(|x| walk(x, ctx)).collect()),
            }
        }
        walk(&self.decision, self)
    }

    /// The plain context: every path predicate holds, no condition applied.
    pub fn base_select(&self) -> Select {
        self.build(None, false, Vec::new(), Vec::new())
    }

    fn build(&self, violate: Option<usize>, counting: bool, filter: Vec<SqlExpr>, extra_group: Vec<SqlExpr>) -> Select {
        let kept: Vec<usize> = match violate {
            Some(j) => self.anchored_side(j).0,
            None => (0..self.steps.len()).collect(),
        };
        self.build_with(violate, &kept, counting, filter, extra_group)
    }

    fn build_with(
        &self,
        violate: Option<usize>,
        kept: &[usize],
        counting: bool,
        mut filter: Vec<SqlExpr>,
        extra_group: Vec<SqlExpr>,
    ) -> Select {
        let left_chain = match (counting, self.quantified) {
            (true, Some((r, s))) => (r + 1..=s).collect::<Vec<_>>(),
            _ => vec![],
        };
        let mut tables: Vec<(JoinKind, TableRef, Option<SqlExpr>)> = Vec::new();
        for link in &self.anchors {
            tables.push((JoinKind::Inner, link.table.clone(), link.on.clone()));
        }
        let mut joined: Vec<usize> = Vec::new();
        for &i in self.order.iter().filter(|i| kept.contains(i)) {
            let on = if Some(i) == self.attach && !self.anchors.is_empty() {
                self.attach_on.clone()
            } else if joined.contains(&(i + 1)) {
                Some(self.predicates[i].clone())
            } else if i > 0 && joined.contains(&(i - 1)) {
                Some(self.predicates[i - 1].clone())
            } else {
                None
            };
            let kind = if left_chain.contains(&i) { JoinKind::Left } else { JoinKind::Inner };
            tables.push((kind, self.steps[i].clone(), on));
            joined.push(i);
        }
        if let Some(j) = violate {
            let far = self.anchored_side(j).1;
            tables.push((JoinKind::Left, self.steps[far].clone(), Some(self.predicates[j].clone())));
            filter.push(SqlExpr::is_null(SqlExpr::col(&self.steps[far].alias, &self.keys[far][0])));
        }
        let mut iter = tables.into_iter();
        let (_, from, _) = iter.next().expect("a path has at least one step");
        let joins = iter
            .map(|(kind, table, on)| Join { kind, table, on: on.unwrap_or(SqlExpr::int(1)) })
            .collect();

        let mut group_by: Vec<SqlExpr> = Vec::new();
        let mut grouped = false;
        if let Some(g) = &self.grouping {
            grouped = true;
            group_by.extend(g.iter().filter(|(s, _)| kept.contains(s)).map(|(_, c)| c.clone()));
        } else if counting {
            grouped = true;
            for (link, key) in self.anchors.iter().zip(&self.anchor_keys) {
                group_by.extend(key.iter().map(|k| SqlExpr::col(&link.table.alias, k)));
            }
            for &i in self.order.iter().filter(|i| kept.contains(i) && !left_chain.contains(i)) {
                group_by.extend(self.keys[i].iter().map(|k| SqlExpr::col(&self.steps[i].alias, k)));
            }
            for c in extra_group {
                if !group_by.contains(&c) {
                    group_by.push(c);
                }
            }
        }
        let projection = if !grouped {
            Projection::Star
        } else if group_by.is_empty() {
            Projection::Columns(vec![(SqlExpr::CountStar, "count".into())])
        } else {
            Projection::Columns(
                group_by
                    .iter()
                    .map(|c| {
                        let label = match c {
                            SqlExpr::Column { table, column } => format!("{table}.{column}"),
                            other => other.to_string(),
                        };
                        (c.clone(), label)
                    })
                    .collect(),
            )
        };
        Select { projection, from, joins, filter, group_by, having: Vec::new() }
    }
}

#[cfg(test)]
mod tests;
