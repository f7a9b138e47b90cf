//! Test-input loading, coverage-rule execution and reporting.

mod csv;
mod db;
mod oracle;
mod report;
mod snapshot;

pub use csv::{parse_csv, CsvError, Record};
pub use db::{database_path, first_row, materialize, materialize_into, open, read_snapshot, DbError};
pub use oracle::{reference_evaluate, OracleError, ROW_BUDGET};
pub use report::{build_report, percent, AssignmentReport, CoverageReport, UNASSIGNED};
pub use snapshot::{coerce, load_dataset, validate, DatasetError, DbSnapshot, LevelCounts};

pub use rusqlite::Connection;

use crate::mcdc::CoverageRule;
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Covered,
    Uncovered,
    Error,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Covered => "covered",
            Status::Uncovered => "uncovered",
            Status::Error => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleOutcome {
    pub id: String,
    pub class: &'static str,
    pub business_rule: String,
    pub assignment: Option<String>,
    pub description: String,
    pub status: Status,
    /// First returned row, labelled `alias.column`.
    pub witness: Option<Vec<(String, Value)>>,
    pub error: Option<String>,
}

/// Executes each coverage rule read-only; a rule is covered when its query
/// returns a row. Query failures are recorded per rule. Outcomes keep the
/// order of `rules`.
pub fn evaluate_coverage(rules: &[CoverageRule], conn: &Connection) -> Result<Vec<RuleOutcome>, DbError> {
    let set = |on: bool| {
        let stmt = format!("PRAGMA query_only = {}", if on { "ON" } else { "OFF" });
        conn.execute_batch(&stmt).map_err(|e| DbError::Engine { statement: stmt, message: e.to_string() })
    };
    set(true)?;
    let outcomes = rules
        .iter()
        .map(|r| {
            let (status, witness, error) = match first_row(conn, &r.witness_sql) {
                Ok(Some(row)) => (Status::Covered, Some(row), None),
                Ok(None) => (Status::Uncovered, None, None),
                Err(e) => (Status::Error, None, Some(e.to_string())),
            };
            RuleOutcome {
                id: r.id.clone(),
                class: r.requirement.class(),
                business_rule: r.source_rule.to_string(),
                assignment: r.assignment.as_ref().map(|a| a.to_string()),
                description: r.description.clone(),
                status,
                witness,
                error,
            }
        })
        .collect();
    set(false)?;
    Ok(outcomes)
}
