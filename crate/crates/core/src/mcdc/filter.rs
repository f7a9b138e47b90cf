//! Duplicate and static-contradiction removal.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};

use crate::compiler::{Select, SqlExpr};
use crate::value::{ArithOp, CmpOp, Value};

use super::CoverageRule;

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Removal {
    pub id: String,
    pub reason: String,
}

/// Drops rules whose canonical SQL repeats an earlier rule, and rules whose
/// conjuncts contradict each other on constants.
pub fn dedupe_filter(rules: Vec<CoverageRule>) -> (Vec<CoverageRule>, Vec<Removal>) {
    let mut seen: BTreeMap<String, String> = BTreeMap::new();
    let mut kept = Vec::new();
    let mut removed = Vec::new();
    for r in rules {
        let canon = r.select.canonical();
        if let Some(first) = seen.get(&canon) {
            removed.push(Removal { id: r.id.clone(), reason: format!("duplicate of {first}") });
            continue;
        }
        if let Some(why) = contradiction(&r.select) {
            removed.push(Removal { id: r.id.clone(), reason: format!("statically unsatisfiable: {why}") });
            continue;
        }
        seen.insert(canon, r.id.clone());
        kept.push(r);
    }
    (kept, removed)
}

fn fold(e: &SqlExpr) -> Option<Value> {
    match e {
        SqlExpr::Lit(v) => Some(v.clone()),
        SqlExpr::Neg(x) => Some(Value::Integer(0).arith(ArithOp::Sub, &fold(x)?)),
        SqlExpr::Arith(op, a, b) => Some(fold(a)?.arith(*op, &fold(b)?)),
        _ => None,
    }
}

fn flip(op: CmpOp) -> CmpOp {
    match op {
        CmpOp::Ge => CmpOp::Le,
        CmpOp::Le => CmpOp::Ge,
        CmpOp::Gt => CmpOp::Lt,
        CmpOp::Lt => CmpOp::Gt,
        other => other,
    }
}

fn flatten<'a>(e: &'a SqlExpr, out: &mut Vec<&'a SqlExpr>) {
    match e {
        SqlExpr::And(v) => v.iter().for_each(|x| flatten(x, out)),
        other => out.push(other),
    }
}

/// First reason the conjunction cannot hold, if any. Comparisons reject
/// NULL, so `NOT (x op c)` is treated as `x negate(op) c`.
fn unsat(conjuncts: &[&SqlExpr]) -> Option<String> {
    let mut facts: BTreeMap<String, Vec<(CmpOp, Value)>> = BTreeMap::new();
    let mut null: HashSet<String> = HashSet::new();
    let mut not_null: HashSet<String> = HashSet::new();
    for c in conjuncts {
        let (op, a, b) = match c {
            SqlExpr::Cmp(op, a, b) => (*op, a, b),
            SqlExpr::Not(x) => match &**x {
                SqlExpr::Cmp(op, a, b) => (op.negate(), a, b),
                _ => continue,
            },
            SqlExpr::IsNull(x) => {
                null.insert(x.to_string());
                continue;
            }
            SqlExpr::IsNotNull(x) => {
                not_null.insert(x.to_string());
                continue;
            }
            _ => continue,
        };
        match (fold(a), fold(b)) {
            (Some(x), Some(y)) => {
                if !x.compare(op, &y).is_true() {
                    return Some(format!("{c} is never true"));
                }
            }
            (None, Some(v)) => facts.entry(a.to_string()).or_default().push((op, v)),
            (Some(v), None) => facts.entry(b.to_string()).or_default().push((flip(op), v)),
            (None, None) => {
                not_null.insert(a.to_string());
                not_null.insert(b.to_string());
            }
        }
    }
    for s in &null {
        if not_null.contains(s) || facts.contains_key(s) {
            return Some(format!("{s} is both null and compared"));
        }
    }
    for (subject, fs) in &facts {
        if fs.iter().any(|(_, v)| v.is_null()) {
            return Some(format!("{subject} is compared with NULL"));
        }
        // every constraint is of the form subject op v; a value satisfying
        // all of them exists among the constants and their midpoints
        let mut probes: Vec<Value> = fs.iter().map(|(_, v)| v.clone()).collect();
        let nums: Vec<f64> = fs.iter().filter_map(|(_, v)| v.as_f64()).collect();
        if nums.len() == fs.len() {
            let mut sorted = nums.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
            sorted.dedup();
            probes.extend(sorted.windows(2).map(|w| Value::Real((w[0] + w[1]) / 2.0)));
            if let (Some(lo), Some(hi)) = (sorted.first(), sorted.last()) {
                probes.push(Value::Real(lo - 1.0));
                probes.push(Value::Real(hi + 1.0));
            }
        } else {
            continue;
        }
        if !probes.iter().any(|p| fs.iter().all(|(op, v)| p.compare(*op, v).is_true())) {
            let parts: Vec<String> = fs.iter().map(|(op, v)| format!("{subject} {} {}", op.symbol(), v.to_sql())).collect();
            return Some(parts.join(" AND "));
        }
    }
    None
}

fn contradiction(q: &Select) -> Option<String> {
    let mut w = Vec::new();
    q.filter.iter().for_each(|e| flatten(e, &mut w));
    if let Some(r) = unsat(&w) {
        return Some(r);
    }
    let mut h = Vec::new();
    q.having.iter().for_each(|e| flatten(e, &mut h));
    unsat(&h)
}
