//! Per-assignment coverage report, as JSON and as an aligned text table.

use std::collections::BTreeSet;

use serde_json::{json, Map, Value as Json};

use crate::idm::{IdmSchema, Level, TEST_CASE_ENTITY};
use crate::ident::Ident;
use crate::rules::{kind_tally, BusinessRule, RuleKind};

use super::snapshot::{DbSnapshot, LevelCounts};
use super::{RuleOutcome, Status};

pub const UNASSIGNED: &str = "(unassigned)";

#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentReport {
    pub name: String,
    pub business_rules: usize,
    pub rules_by_kind: [usize; 5],
    pub coverage_rules: usize,
    pub covered: usize,
    /// `None` when there are no coverage rules.
    pub percent: Option<f64>,
    /// TestCase tuples used by the assignment, tuples of its UI entities,
    /// and all Database tuples (that level is shared by every assignment).
    pub tuples: LevelCounts,
    pub test_cases: usize,
    pub rules: Vec<RuleOutcome>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoverageReport {
    pub assignments: Vec<AssignmentReport>,
}

/// covered / total as a percentage, rounded half-up to one decimal.
pub fn percent(covered: usize, total: usize) -> Option<f64> {
    if total == 0 {
        return None;
    }
    let tenths = (covered as u128 * 2000 + total as u128) / (2 * total as u128);
    Some(tenths as f64 / 10.0)
}

fn test_case_ids(schema: &IdmSchema, snap: &DbSnapshot, root: &Ident) -> BTreeSet<String> {
    let mut ids = BTreeSet::new();
    let Some(e) = schema.entity(root) else { return ids };
    for (_, r) in schema.anchor_edges() {
        if !r.connects(root, &Ident::new(TEST_CASE_ENTITY)) {
            continue;
        }
        let cols: Vec<usize> = r.pairs_oriented(root).iter().filter_map(|(a, _)| e.attribute_index(a)).collect();
        for row in snap.rows(root) {
            if cols.iter().all(|&c| !row[c].is_null()) {
                ids.insert(cols.iter().map(|&c| row[c].to_sql()).collect::<Vec<_>>().join(","));
            }
        }
    }
    ids
}

/// Groups outcomes by the assignment of their business rule. Every
/// assignment declared in the schema appears, even without rules.
pub fn build_report(business: &[BusinessRule], outcomes: &[RuleOutcome], schema: &IdmSchema, snap: &DbSnapshot) -> CoverageReport {
    let mut names: Vec<String> = schema.assignments.iter().map(|a| a.name.to_string()).collect();
    let label = |a: &Option<Ident>| a.as_ref().map_or(UNASSIGNED.to_string(), |n| n.to_string());
    for r in business {
        let l = label(&r.assignment);
        if !names.iter().any(|n| n.eq_ignore_ascii_case(&l)) {
            names.push(l);
        }
    }
    let database = snap.by_level(schema).database;
    let assignments = names
        .into_iter()
        .map(|name| {
            let mine: Vec<BusinessRule> = business.iter().filter(|r| label(&r.assignment).eq_ignore_ascii_case(&name)).cloned().collect();
            let rules: Vec<RuleOutcome> = outcomes
                .iter()
                .filter(|o| o.assignment.as_deref().unwrap_or(UNASSIGNED).eq_ignore_ascii_case(&name))
                .cloned()
                .collect();
            let covered = rules.iter().filter(|o| o.status == Status::Covered).count();
            let root = schema.assignments.iter().find(|a| a.name.eq_str(&name)).map(|a| a.root.clone());
            let (test_cases, ui) = match &root {
                Some(root) => (
                    test_case_ids(schema, snap, root).len(),
                    schema.assignment_entities(root).iter().filter(|e| schema.level_of(e) == Some(Level::Ui)).map(|e| snap.rows(e).len()).sum(),
                ),
                None => (0, 0),
            };
            AssignmentReport {
                business_rules: mine.len(),
                rules_by_kind: kind_tally(&mine),
                coverage_rules: rules.len(),
                covered,
                percent: percent(covered, rules.len()),
                tuples: LevelCounts { testcase: test_cases, ui, database },
                test_cases,
                rules,
                name,
            }
        })
        .collect();
    CoverageReport { assignments }
}

fn format_percent(p: Option<f64>) -> String {
    p.map_or("n/a".to_string(), |p| format!("{p:.1}%"))
}

impl CoverageReport {
    pub fn all_covered(&self) -> bool {
        self.assignments.iter().all(|a| a.covered == a.coverage_rules)
    }

    pub fn to_json(&self) -> Json {
        let assignments: Vec<Json> = self
            .assignments
            .iter()
            .map(|a| {
                let kinds: Map<String, Json> = RuleKind::ALL.iter().zip(a.rules_by_kind).map(|(k, n)| (k.name().to_string(), json!(n))).collect();
                let rules: Vec<Json> = a
                    .rules
                    .iter()
                    .map(|r| {
                        let witness = r.witness.as_ref().map(|w| Json::Object(w.iter().map(|(k, v)| (k.clone(), json!(v))).collect()));
                        let mut o = json!({
                            "id": r.id,
                            "class": r.class,
                            "description": r.description,
                            "status": r.status.name(),
                            "witness": witness,
                        });
                        if let Some(e) = &r.error {
                            o["error"] = json!(e);
                        }
                        o
                    })
                    .collect();
                json!({
                    "name": a.name,
                    "business_rules": a.business_rules,
                    "rules_by_kind": kinds,
                    "coverage_rules": a.coverage_rules,
                    "covered": a.covered,
                    "percent": a.percent,
                    "tuples": a.tuples,
                    "test_cases": a.test_cases,
                    "rules": rules,
                })
            })
            .collect();
        json!({ "assignments": assignments })
    }

    pub fn to_json_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json()).expect("json values serialize");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let header = ["Assignment", "Business rules", "Coverage rules", "Covered", "Coverage", "TestCase", "UI", "Database", "Test cases"];
        let mut table: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
        for a in &self.assignments {
            table.push(vec![
                a.name.clone(),
                a.business_rules.to_string(),
                a.coverage_rules.to_string(),
                a.covered.to_string(),
                format_percent(a.percent),
                a.tuples.testcase.to_string(),
                a.tuples.ui.to_string(),
                a.tuples.database.to_string(),
                a.test_cases.to_string(),
            ]);
        }
        let mut out = align(&table);
        for a in &self.assignments {
            if a.rules.is_empty() {
                continue;
            }
            out.push_str(&format!("\n{}\n", a.name));
            let rows: Vec<Vec<String>> =
                a.rules.iter().map(|r| vec![format!("  {}", r.id), r.status.name().to_string(), r.description.clone()]).collect();
            out.push_str(&align(&rows));
        }
        out
    }
}

fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols).map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for r in rows {
        let cells: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(c, s)| if c + 1 == r.len() { s.clone() } else { format!("{s:<w$}", w = widths[c]) })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}
