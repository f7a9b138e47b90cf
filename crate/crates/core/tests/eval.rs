mod common;

use common::*;
use idmcov_core::eval::{build_report, evaluate_coverage, materialize, validate, DbSnapshot, Status};
use idmcov_core::{Ident, Value};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn int(i: i64) -> Value {
    Value::Integer(i)
}

fn text(s: &str) -> Value {
    Value::Text(s.into())
}

/// One order line whose stock and item both mention ORIGINAL, with the
/// brand wrongly left as 'G'.
fn brand_snapshot(s_data: Value) -> DbSnapshot {
    let mut s = DbSnapshot::default();
    s.push(&Ident::new("TestCase"), vec![int(1), Value::Null]);
    s.push(&Ident::new("UI_Order"), vec![int(1), int(1), int(1), int(1), int(1), Value::Null, Value::Null]);
    s.push(&Ident::new("UI_OrderLine"), vec![int(1), int(1), int(1), int(7), int(1), int(3), text("G"), Value::Null]);
    s.push(&Ident::new("Item"), vec![int(7), text("pen"), Value::Real(1.5), text("xxORIGINALxx")]);
    s.push(&Ident::new("Stock"), vec![int(1), int(7), int(40), s_data]);
    s
}

#[test]
fn empty_database_covers_nothing() {
    let schema = neworder();
    let business = neworder_rules(&schema);
    let rules = derive(&business, &schema, false);
    let conn = materialize(&schema, &DbSnapshot::default(), ":memory:", false).unwrap();
    let out = evaluate_coverage(&rules, &conn).unwrap();
    assert_eq!(out.len(), 24);
    assert!(out.iter().all(|o| o.status == Status::Uncovered && o.witness.is_none()));
    let report = build_report(&business, &out, &schema, &DbSnapshot::default());
    assert_eq!(report.assignments[0].coverage_rules, 24);
    assert_eq!(report.assignments[0].percent, Some(0.0));
    assert!(!report.all_covered());
}

#[test]
fn original_item_with_plain_stock_covers_the_stock_flip() {
    let schema = neworder();
    let business = neworder_rules(&schema);
    let rules = derive(&business, &schema, false);
    let snap = brand_snapshot(text("plain"));
    validate(&schema, &snap).unwrap();
    let conn = materialize(&schema, &snap, ":memory:", false).unwrap();
    let out = evaluate_coverage(&rules, &conn).unwrap();
    let covered: Vec<&str> = out.iter().filter(|o| o.status == Status::Covered).map(|o| o.id.as_str()).collect();
    assert!(covered.contains(&"R3.condition_flip.1"), "{covered:?}");
    assert!(!covered.contains(&"R3.null_value.2"), "{covered:?}");
    let flip = out.iter().find(|o| o.id == "R3.condition_flip.1").unwrap();
    let witness = flip.witness.as_ref().unwrap();
    assert!(witness.iter().any(|(k, v)| k == "Stock.s_data" && v == &text("plain")), "{witness:?}");
}

#[test]
fn null_stock_data_is_a_null_requirement_not_a_flip() {
    let schema = neworder();
    let business = neworder_rules(&schema);
    let rules = derive(&business, &schema, false);
    let snap = brand_snapshot(Value::Null);
    let conn = materialize(&schema, &snap, ":memory:", false).unwrap();
    let out = evaluate_coverage(&rules, &conn).unwrap();
    let status = |id: &str| out.iter().find(|o| o.id == id).unwrap().status;
    assert_eq!(status("R3.condition_flip.1"), Status::Uncovered);
    assert_eq!(status("R3.null_value.2"), Status::Covered);
}

#[test]
fn five_lines_meet_the_lower_bound() {
    let schema = neworder();
    let business = neworder_rules(&schema);
    let rules = derive(&business, &schema, true);
    let mut s = DbSnapshot::default();
    s.push(&Ident::new("TestCase"), vec![int(1), Value::Null]);
    s.push(&Ident::new("UI_Order"), vec![int(1), int(1), Value::Null, Value::Null, Value::Null, Value::Null, Value::Null]);
    for n in 1..=5 {
        s.push(&Ident::new("UI_OrderLine"), vec![int(1), int(1), int(n), Value::Null, Value::Null, int(2), Value::Null, Value::Null]);
    }
    let conn = materialize(&schema, &s, ":memory:", false).unwrap();
    let out = evaluate_coverage(&rules, &conn).unwrap();
    let r2: Vec<(&str, Status)> = out.iter().filter(|o| o.business_rule == "R2").map(|o| (o.id.as_str(), o.status)).collect();
    let covered: Vec<&str> = r2.iter().filter(|(_, s)| *s == Status::Covered).map(|(id, _)| *id).collect();
    assert!(covered.contains(&"R2.all_true.1"), "{r2:?}");
    assert!(covered.iter().any(|id| id.starts_with("R2.boundary")), "{r2:?}");
    assert!(!covered.iter().any(|id| id.starts_with("R2.condition_flip")), "{r2:?}");
    assert_eq!(disagreements(&business, &rules, &schema, &s), Vec::<String>::new());
}

#[test]
fn sql_agrees_with_reference_interpreter_on_random_snapshots() {
    let schema = neworder();
    let business = neworder_rules(&schema);
    let rules = derive(&business, &schema, true);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut seen_covered = vec![false; rules.len()];
    for _ in 0..150 {
        let snap = random_snapshot(&schema, &mut rng, 6);
        validate(&schema, &snap).unwrap();
        assert_eq!(disagreements(&business, &rules, &schema, &snap), Vec::<String>::new());
        let conn = materialize(&schema, &snap, ":memory:", false).unwrap();
        for (i, o) in evaluate_coverage(&rules, &conn).unwrap().iter().enumerate() {
            seen_covered[i] |= o.status == Status::Covered;
        }
    }
    let hit = seen_covered.iter().filter(|&&b| b).count();
    assert!(hit * 2 > rules.len(), "random snapshots reach only {hit} of {} rules", rules.len());
}
