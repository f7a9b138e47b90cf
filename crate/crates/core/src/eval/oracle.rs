//! Reference interpreter: decides a requirement directly over a snapshot,
//! by filtered Cartesian product under three-valued logic. Shares no code
//! with the SQL compiler; it exists to check it.

use crate::idm::IdmSchema;
use crate::ident::Ident;
use crate::mcdc::Requirement;
use crate::rules::{ArithExpr, Atom, AtomOp, AtomTest, AttrRef, BusinessRule, JoinOperand};
use crate::value::{ArithOp, CmpOp, Truth, Value};

use super::snapshot::DbSnapshot;

/// Largest intermediate join the interpreter will build.
pub const ROW_BUDGET: usize = 200_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("context of rule {rule} exceeds {ROW_BUDGET} rows")]
    Budget { rule: Ident },
    #[error("rule {rule}: no route to the test case")]
    NoRoute { rule: Ident },
    #[error("rule {rule}: requirement does not fit the rule")]
    Mismatch { rule: Ident },
}

#[derive(Clone)]
enum Operand {
    Col { slot: usize, attr: usize },
    Const(Value),
}

/// Conjunction of equalities between slots.
#[derive(Clone)]
struct Link {
    pairs: Vec<(Operand, Operand)>,
}

/// One binding per slot: index of the tuple in its entity's table.
type Row = Vec<Option<usize>>;

struct World<'a> {
    rule: &'a BusinessRule,
    snap: &'a DbSnapshot,
    schema: &'a IdmSchema,
    /// Entity per slot: anchors first, then path steps.
    entities: Vec<Ident>,
    anchors: usize,
    attach: Option<usize>,
    /// (slots joined, condition)
    links: Vec<(Vec<usize>, Link)>,
    /// `predicates[i]` joins path steps i and i + 1.
    predicates: Vec<Link>,
}

impl<'a> World<'a> {
    fn new(rule: &'a BusinessRule, schema: &'a IdmSchema, snap: &'a DbSnapshot) -> Result<Self, OracleError> {
        let route = schema.anchor_route(&rule.path.steps).map_err(|_| OracleError::NoRoute { rule: rule.name.clone() })?;
        let mut entities: Vec<Ident> = Vec::new();
        let mut links = Vec::new();
        let mut attach = None;
        let idx = |e: &Ident, a: &Ident| schema.entity(e).and_then(|d| d.attribute_index(a)).expect("bound attribute");
        if let Some(route) = &route {
            for (k, (e, rel)) in route.joins.iter().enumerate() {
                if let Some(ri) = rel {
                    let prev = &entities[k - 1];
                    let pairs = schema.relationships[*ri]
                        .pairs_oriented(prev)
                        .iter()
                        .map(|(a, b)| (Operand::Col { slot: k - 1, attr: idx(prev, a) }, Operand::Col { slot: k, attr: idx(e, b) }))
                        .collect();
                    links.push((vec![k - 1, k], Link { pairs }));
                }
                entities.push(e.clone());
            }
            attach = Some(route.attach);
        }
        let anchors = entities.len();
        entities.extend(rule.path.steps.iter().cloned());
        if let (Some(route), Some(at)) = (&route, attach) {
            if let Some(ri) = route.attach_relationship {
                let last = anchors - 1;
                let target = &entities[anchors + at];
                let pairs = schema.relationships[ri]
                    .pairs_oriented(&entities[last])
                    .iter()
                    .map(|(a, b)| {
                        (Operand::Col { slot: last, attr: idx(&entities[last], a) }, Operand::Col { slot: anchors + at, attr: idx(target, b) })
                    })
                    .collect();
                links.push((vec![last, anchors + at], Link { pairs }));
            }
        }
        let predicates = rule
            .path
            .predicates
            .iter()
            .map(|p| {
                let op = |o: &JoinOperand| match o {
                    JoinOperand::Attr(a) => Operand::Col { slot: anchors + a.step, attr: idx(&a.entity, &a.attribute) },
                    JoinOperand::Const(v) => Operand::Const(v.clone()),
                };
                Link { pairs: p.conjuncts.iter().map(|c| (op(&c.left), op(&c.right))).collect() }
            })
            .collect();
        Ok(World { rule, snap, schema, entities, anchors, attach, links, predicates })
    }

    fn value(&self, row: &Row, slot: usize, attr: usize) -> Value {
        match row[slot] {
            Some(t) => self.snap.rows(&self.entities[slot])[t][attr].clone(),
            None => Value::Null,
        }
    }

    fn holds(&self, row: &Row, link: &Link) -> bool {
        link.pairs.iter().all(|(a, b)| {
            let get = |o: &Operand| match o {
                Operand::Col { slot, attr } => self.value(row, *slot, *attr),
                Operand::Const(v) => v.clone(),
            };
            get(a).compare(CmpOp::Eq, &get(b)).is_true()
        })
    }

    fn attr(&self, row: &Row, a: &AttrRef) -> Value {
        let slot = self.anchors + a.step;
        let idx = self.schema.entity(&a.entity).and_then(|e| e.attribute_index(&a.attribute)).expect("bound attribute");
        self.value(row, slot, idx)
    }

    fn arith(&self, row: &Row, e: &ArithExpr) -> Value {
        e.eval(&|a| self.attr(row, a))
    }

    /// Path-step slot links: anchors, the attach join, and predicates
    /// between two steps both in `steps`.
    fn join(&self, steps: &[usize]) -> Result<Vec<Row>, OracleError> {
        let mut slots: Vec<usize> = (0..self.anchors).collect();
        slots.extend(steps.iter().map(|s| self.anchors + s));
        let mut conds: Vec<(Vec<usize>, &Link)> = self.links.iter().map(|(s, l)| (s.clone(), l)).collect();
        for (i, p) in self.predicates.iter().enumerate() {
            if steps.contains(&i) && steps.contains(&(i + 1)) {
                conds.push((vec![self.anchors + i, self.anchors + i + 1], p));
            }
        }
        let mut rows: Vec<Row> = vec![vec![None; self.entities.len()]];
        let mut bound: Vec<usize> = Vec::new();
        for &slot in &slots {
            bound.push(slot);
            let ready: Vec<&Link> =
                conds.iter().filter(|(s, _)| s.contains(&slot) && s.iter().all(|x| bound.contains(x))).map(|(_, l)| *l).collect();
            let n = self.snap.rows(&self.entities[slot]).len();
            let mut next = Vec::new();
            for row in &rows {
                for t in 0..n {
                    let mut r = row.clone();
                    r[slot] = Some(t);
                    if ready.iter().all(|l| self.holds(&r, l)) {
                        next.push(r);
                        if next.len() > ROW_BUDGET {
                            return Err(OracleError::Budget { rule: self.rule.name.clone() });
                        }
                    }
                }
            }
            rows = next;
        }
        Ok(rows)
    }

    /// Rows for which no tuple of `far` satisfies predicate `j`.
    fn anti_join(&self, rows: Vec<Row>, j: usize, far: usize) -> Vec<Row> {
        let slot = self.anchors + far;
        let n = self.snap.rows(&self.entities[slot]).len();
        rows.into_iter()
            .filter(|row| {
                !(0..n).any(|t| {
                    let mut r = row.clone();
                    r[slot] = Some(t);
                    self.holds(&r, &self.predicates[j])
                })
            })
            .collect()
    }

    /// Number of complete chains over steps r+1..=s hanging off `row`.
    fn chains(&self, row: &Row, r: usize, s: usize) -> usize {
        fn go(w: &World, row: &mut Row, step: usize, s: usize) -> usize {
            if step > s {
                return 1;
            }
            let slot = w.anchors + step;
            let mut total = 0;
            for t in 0..w.snap.rows(&w.entities[slot]).len() {
                row[slot] = Some(t);
                if w.holds(row, &w.predicates[step - 1]) {
                    total += go(w, row, step + 1, s);
                }
            }
            row[slot] = None;
            total
        }
        go(self, &mut row.clone(), r + 1, s)
    }
}

/// What a requirement asks of one atom.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Want {
    True,
    False,
    Pinned(i64),
}

fn atom_steps(a: &Atom) -> Vec<usize> {
    match &a.test {
        AtomTest::Value { operand, bound, .. } => std::iter::once(operand.step).chain(bound.attrs().iter().map(|x| x.step)).collect(),
        AtomTest::Count { r, s, bound, .. } => (r.step..=s.step).chain(bound.attrs().iter().map(|x| x.step)).collect(),
    }
}

fn step_of(a: &Atom) -> f64 {
    match &a.test {
        AtomTest::Value { operand, .. } => operand.kind.step().unwrap_or(1.0),
        AtomTest::Count { .. } => 1.0,
    }
}

/// The pinned value `bound + delta * step`, rounded like a literal when
/// the bound is constant.
fn pin(bound: &ArithExpr, value: Value, delta: i64, step: f64) -> Value {
    if delta == 0 {
        return value;
    }
    let d = if step == 1.0 { Value::Integer(delta.abs()) } else { Value::Real(step * delta.abs() as f64) };
    let op = if delta > 0 { ArithOp::Add } else { ArithOp::Sub };
    let out = value.arith(op, &d);
    match (bound.fold(), out) {
        (Some(_), Value::Real(r)) => {
            let digits = (-step.log10()).round().max(0.0) as usize;
            Value::Real(format!("{r:.digits$}").parse().expect("formatted float parses"))
        }
        (_, out) => out,
    }
}

/// Decides whether `snap` covers requirement `req` of `rule`.
pub fn reference_evaluate(rule: &BusinessRule, req: &Requirement, schema: &IdmSchema, snap: &DbSnapshot) -> Result<bool, OracleError> {
    let w = World::new(rule, schema, snap)?;
    let (atoms, _) = rule.atoms();
    let n_steps = rule.path.steps.len();
    let all: Vec<usize> = (0..n_steps).collect();
    let mismatch = || OracleError::Mismatch { rule: rule.name.clone() };

    let mut wants: Vec<(usize, Want)> = Vec::new();
    let mut nulls: Vec<AttrRef> = Vec::new();
    let mut kept = all.clone();
    let mut violation = None;
    match req {
        Requirement::JoinViolation { predicate } => {
            let j = *predicate;
            if j + 1 >= n_steps {
                return Err(mismatch());
            }
            let anchor_step = w.attach.unwrap_or(0);
            let far = if anchor_step <= j { j + 1 } else { j };
            kept = if anchor_step <= j { (0..=j).collect() } else { (j + 1..n_steps).collect() };
            violation = Some((j, far));
            for (i, a) in atoms.iter().enumerate() {
                if atom_steps(a).iter().all(|s| kept.contains(s)) {
                    wants.push((i, Want::True));
                }
            }
        }
        Requirement::AllTrue => wants = (0..atoms.len()).map(|i| (i, Want::True)).collect(),
        Requirement::ConditionFlip { assignment, .. } => {
            if assignment.len() != atoms.len() {
                return Err(mismatch());
            }
            wants = assignment.iter().enumerate().map(|(i, &b)| (i, if b { Want::True } else { Want::False })).collect();
        }
        Requirement::NullValue { attribute } => {
            let a = atoms.iter().flat_map(|a| a.attrs()).find(|a| &a.written == attribute).ok_or_else(mismatch)?.clone();
            wants = (0..atoms.len()).filter(|&i| !atoms[i].reads(&a)).map(|i| (i, Want::True)).collect();
            nulls.push(a);
        }
        Requirement::Boundary { atom, delta } => {
            if *atom >= atoms.len() {
                return Err(mismatch());
            }
            wants = (0..atoms.len()).map(|i| (i, if i == *atom { Want::Pinned(*delta) } else { Want::True })).collect();
        }
    }

    let counting = wants.iter().any(|(i, _)| matches!(atoms[*i].test, AtomTest::Count { .. }));
    if counting {
        let Some((r, s)) = rule.quantified_pair().map(|(r, s)| (r.step, s.step)) else { return Err(mismatch()) };
        let prefix: Vec<usize> = kept.iter().copied().filter(|&k| k <= r).collect();
        let mut rows = w.join(&prefix)?;
        if let Some((j, far)) = violation {
            rows = w.anti_join(rows, j, far);
        }
        return Ok(rows.iter().any(|row| {
            let count = Value::Integer(w.chains(row, r, s) as i64);
            nulls.iter().all(|a| w.attr(row, a).is_null())
                && wants.iter().all(|&(i, want)| {
                    let AtomTest::Count { op, bound, .. } = &atoms[i].test else { return false };
                    let b = w.arith(row, bound);
                    match want {
                        Want::True => count.compare(*op, &b) == Truth::True,
                        Want::False => count.compare(*op, &b) == Truth::False,
                        Want::Pinned(d) => count.compare(CmpOp::Eq, &pin(bound, b, d, 1.0)).is_true(),
                    }
                })
        }));
    }

    let mut rows = w.join(&kept)?;
    if let Some((j, far)) = violation {
        rows = w.anti_join(rows, j, far);
    }
    let truth = |row: &Row, i: usize| -> Truth {
        match &atoms[i].test {
            AtomTest::Value { operand, op, bound } => {
                let v = w.attr(row, operand);
                let b = w.arith(row, bound);
                match op {
                    AtomOp::Cmp(c) => v.compare(*c, &b),
                    AtomOp::Like => v.like(&b),
                }
            }
            AtomTest::Count { .. } => Truth::Unknown,
        }
    };
    let pinned = |row: &Row, i: usize, d: i64| -> bool {
        let AtomTest::Value { operand, bound, .. } = &atoms[i].test else { return false };
        let b = w.arith(row, bound);
        w.attr(row, operand).compare(CmpOp::Eq, &pin(bound, b, d, step_of(&atoms[i]))).is_true()
    };

    let Some(frame) = &rule.frame else {
        return Ok(rows.iter().any(|row| {
            nulls.iter().all(|a| w.attr(row, a).is_null())
                && wants.iter().all(|&(i, want)| match want {
                    Want::True => truth(row, i) == Truth::True,
                    Want::False => truth(row, i) == Truth::False,
                    Want::Pinned(d) => pinned(row, i, d),
                })
        }));
    };

    let keys: Vec<&AttrRef> = frame.group_attrs.iter().filter(|a| kept.contains(&a.step)).collect();
    let mut groups: Vec<(Vec<Value>, Vec<&Row>)> = Vec::new();
    for row in &rows {
        let key: Vec<Value> = keys.iter().map(|a| w.attr(row, a)).collect();
        match groups.iter_mut().find(|(k, _)| k.iter().zip(&key).all(|(a, b)| a.group_eq(b))) {
            Some((_, members)) => members.push(row),
            None => groups.push((key, vec![row])),
        }
    }
    Ok(groups.iter().any(|(_, members)| {
        !members.is_empty()
            && nulls.iter().all(|a| members.iter().any(|row| w.attr(row, a).is_null()))
            && wants.iter().all(|&(i, want)| match want {
                Want::True => members.iter().all(|row| truth(row, i) == Truth::True),
                Want::False => members.iter().any(|row| truth(row, i) == Truth::False),
                Want::Pinned(d) => members.iter().any(|row| pinned(row, i, d)),
            })
    }))
}
