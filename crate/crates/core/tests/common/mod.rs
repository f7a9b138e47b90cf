#![allow(dead_code)]

use std::collections::HashSet;

use idmcov_core::eval::{first_row, materialize, reference_evaluate, DbSnapshot};
use idmcov_core::idm::{dependency_order, parse_schema, AttrKind, IdmSchema};
use idmcov_core::mcdc::{derive_all, CoverageRule, DeriveOptions};
use idmcov_core::rules::{load_rules, BusinessRule};
use idmcov_core::Value;
use rand::seq::SliceRandom;
use rand::Rng;

pub const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/neworder");

pub fn neworder() -> IdmSchema {
    parse_schema(&std::fs::read_to_string(format!("{FIXTURE}/schema.idm")).unwrap()).unwrap()
}

pub fn neworder_rules(schema: &IdmSchema) -> Vec<BusinessRule> {
    load_rules(&std::fs::read_to_string(format!("{FIXTURE}/rules/neworder.rules")).unwrap(), schema).unwrap()
}

const TEXTS: &[&str] = &["B", "G", "ORIGINAL", "xORIGINALx", "original", "plain", "error", "ok", ""];
const INTS: &[i64] = &[-1, 0, 1, 2, 3, 4, 5, 10, 11, 15, 16];
const DECIMALS: &[f64] = &[0.0, 0.5, 1.0, 2.5, 2.51, 2.49, 3.0, 12.25];

fn fits(v: f64, precision: u32, scale: u32) -> bool {
    v.abs() < 10f64.powi((precision - scale) as i32) && (v * 10f64.powi(scale as i32)).fract() == 0.0
}

/// Value domains of one snapshot: at most four values per kind.
struct Domains {
    ints: Vec<i64>,
    decimals: Vec<f64>,
    texts: Vec<&'static str>,
}

impl Domains {
    fn sample(rng: &mut impl Rng) -> Self {
        let ints = INTS.choose_multiple(rng, 4).copied().collect();
        let decimals = DECIMALS.choose_multiple(rng, 4).copied().collect();
        let texts = TEXTS.choose_multiple(rng, 4).copied().collect();
        Domains { ints, decimals, texts }
    }

    fn value(&self, kind: AttrKind, rng: &mut impl Rng) -> Value {
        match kind {
            AttrKind::Integer => Value::Integer(*self.ints.choose(rng).unwrap()),
            AttrKind::Boolean => Value::Integer(rng.gen_range(0..2)),
            AttrKind::Decimal { precision, scale } => {
                let pool: Vec<f64> = self.decimals.iter().copied().filter(|&d| fits(d, precision, scale)).collect();
                Value::Real(*pool.choose(rng).unwrap_or(&0.0))
            }
            AttrKind::Text { max_len } => Value::Text(self.texts.choose(rng).unwrap().chars().take(max_len as usize).collect()),
            AttrKind::DateTime => Value::Text(["2024-01-01", "2024-06-30 12:00:00"].choose(rng).unwrap().to_string()),
        }
    }
}

/// Random snapshot that passes dataset validation, drawing each kind from
/// at most four values plus null. Foreign keys between
/// test-case and UI entities always resolve; other references resolve
/// most of the time so joins both hit and miss.
pub fn random_snapshot(schema: &IdmSchema, rng: &mut impl Rng, max_rows: usize) -> DbSnapshot {
    let mut snap = DbSnapshot::default();
    let domains = Domains::sample(rng);
    let anchor: HashSet<usize> = schema.anchor_edges().map(|(i, _)| i).collect();
    for idx in dependency_order(schema).unwrap() {
        let e = &schema.entities[idx];
        let target = rng.gen_range(0..=max_rows);
        let mut keys = HashSet::new();
        for _ in 0..target * 2 {
            if keys.len() >= target {
                break;
            }
            let mut row: Vec<Value> = e
                .attributes
                .iter()
                .map(|a| if a.nullable && rng.gen_bool(0.15) { Value::Null } else { domains.value(a.kind, rng) })
                .collect();
            let mut ok = true;
            for (ri, r) in schema.relationships.iter().enumerate() {
                if r.from_entity != e.name || !r.declared_as_fk || r.to_entity == e.name {
                    continue;
                }
                let strict = anchor.contains(&ri);
                let parents = snap.rows(&r.to_entity);
                let parent_def = schema.entity(&r.to_entity).unwrap();
                let cols: Vec<(usize, usize)> = r
                    .join_pairs
                    .iter()
                    .map(|(a, b)| (e.attribute_index(a).unwrap(), parent_def.attribute_index(b).unwrap()))
                    .collect();
                let nullable = cols.iter().all(|&(c, _)| e.attributes[c].nullable);
                if strict {
                    if nullable && (parents.is_empty() || rng.gen_bool(0.1)) {
                        cols.iter().for_each(|&(c, _)| row[c] = Value::Null);
                    } else if let Some(p) = parents.choose(rng) {
                        cols.iter().for_each(|&(c, pc)| row[c] = p[pc].clone());
                    } else {
                        ok = false;
                    }
                } else if rng.gen_bool(0.75) {
                    if let Some(p) = parents.choose(rng) {
                        cols.iter().for_each(|&(c, pc)| row[c] = p[pc].clone());
                    }
                }
            }
            let key: Vec<String> = e.key_indices().iter().map(|&k| row[k].to_sql()).collect();
            if ok && keys.insert(key) {
                snap.push(&e.name, row);
            }
        }
    }
    snap
}

pub fn derive(rules: &[BusinessRule], schema: &IdmSchema, boundaries: bool) -> Vec<CoverageRule> {
    derive_all(rules, schema, DeriveOptions { boundaries }).unwrap().rules
}

/// Runs every coverage rule both through SQLite and through the reference
/// interpreter; returns the ids on which they disagree.
pub fn disagreements(business: &[BusinessRule], coverage: &[CoverageRule], schema: &IdmSchema, snap: &DbSnapshot) -> Vec<String> {
    let conn = materialize(schema, snap, ":memory:", false).unwrap();
    coverage
        .iter()
        .filter_map(|c| {
            let rule = business.iter().find(|b| b.name == c.source_rule).unwrap();
            let sql = first_row(&conn, &c.witness_sql).unwrap_or_else(|e| panic!("{}: {e}\n{}", c.id, c.witness_sql)).is_some();
            let oracle = reference_evaluate(rule, &c.requirement, schema, snap).unwrap_or_else(|e| panic!("{}: {e}", c.id));
            (sql != oracle).then(|| format!("{} sql={sql} oracle={oracle}", c.id))
        })
        .collect()
}

/// A toy schema: TestCase, a UI entity `UI_U` and a chain of Database
/// entities D1..D3 joined by foreign keys. Every entity carries integer
/// attributes `a<i>`, `b<i>` and a text `t<i>`; `nullable` decides, per
/// attribute name, whether it admits nulls.
pub fn toy_schema(nullable: &dyn Fn(&str) -> bool) -> String {
    let n = |name: &str| if nullable(name) { " null" } else { "" };
    let mut s = String::from("entity TestCase level TestCase {\n  tc_id : integer;\n  key(tc_id)\n}\n");
    s.push_str(&format!(
        "entity UI_U level UI {{\n  u_tc_id : integer input;\n  u_ui_id : integer input;\n  u_ref : integer null input;\n  \
         a0 : integer{} input;\n  b0 : integer{} input;\n  t0 : text(12){} input;\n  out0 : integer null output;\n  key(u_tc_id, u_ui_id)\n}}\n",
        n("a0"),
        n("b0"),
        n("t0")
    ));
    s.push_str("relationship tc_u fk from UI_U(u_tc_id) to TestCase(tc_id)\nrelationship u_d1 fk from UI_U(u_ref) to D1(d1_id)\n");
    for i in 1..=3 {
        s.push_str(&format!(
            "entity D{i} level Database {{\n  d{i}_id : integer;\n  d{i}_ref : integer null;\n  a{i} : integer{};\n  b{i} : integer{};\n  t{i} : text(12){};\n  key(d{i}_id)\n}}\n",
            n(&format!("a{i}")),
            n(&format!("b{i}")),
            n(&format!("t{i}"))
        ));
        if i < 3 {
            s.push_str(&format!("relationship d{i}_d{} fk from D{i}(d{i}_ref) to D{}(d{}_id)\n", i + 1, i + 1, i + 1));
        }
    }
    s
}

/// A random rule over the path UI_U[]D1..Dj: `n` atoms, each on a distinct
/// attribute, joined by `and` (or, when `mixed`, by a random and/or tree).
/// Returns the rule text and the attributes it reads.
pub fn toy_rule(rng: &mut impl Rng, j: usize, n: usize, mixed: bool) -> (String, Vec<String>) {
    let mut attrs: Vec<String> = (0..=j).flat_map(|i| [format!("a{i}"), format!("b{i}"), format!("t{i}")]).collect();
    attrs.shuffle(rng);
    attrs.truncate(n);
    let atoms: Vec<String> = attrs
        .iter()
        .map(|a| {
            if a.starts_with('t') {
                format!("P.{a} is like '%{}%'", ["ORIGINAL", "o", "B"].choose(rng).unwrap())
            } else {
                let c = ["at least", "at most", "exactly", "different to"].choose(rng).unwrap();
                format!("P.{a} is {c} {}", rng.gen_range(0..4))
            }
        })
        .collect();
    let condition = if mixed { random_tree(rng, &atoms) } else { atoms.join(" and ") };
    let path: Vec<String> = std::iter::once("UI_U".to_string()).chain((1..=j).map(|i| format!("D{i}"))).collect();
    (format!("Path P is {}\nIf {condition} then P.out0 = 1\n", path.join("[]")), attrs)
}

fn random_tree(rng: &mut impl Rng, atoms: &[String]) -> String {
    if atoms.len() == 1 {
        return atoms[0].clone();
    }
    let cut = rng.gen_range(1..atoms.len());
    let op = if rng.gen_bool(0.5) { "and" } else { "or" };
    format!("({}) {op} ({})", random_tree(rng, &atoms[..cut]), random_tree(rng, &atoms[cut..]))
}
