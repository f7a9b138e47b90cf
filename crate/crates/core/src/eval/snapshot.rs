//! In-memory database state and the per-entity CSV dataset loader.

#![allow(clippy::result_large_err)]

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::ident::Ident;
use crate::idm::{AttrKind, EntityDef, IdmSchema, Level};
use crate::value::Value;

use super::csv::{parse_csv, CsvError};

/// Tuples per entity, each aligned with the entity's attribute list.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DbSnapshot {
    pub tables: BTreeMap<Ident, Vec<Vec<Value>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
pub struct LevelCounts {
    pub testcase: usize,
    pub ui: usize,
    pub database: usize,
}

impl DbSnapshot {
    pub fn rows(&self, entity: &Ident) -> &[Vec<Value>] {
        self.tables.get(entity).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn push(&mut self, entity: &Ident, row: Vec<Value>) {
        self.tables.entry(entity.clone()).or_default().push(row);
    }

    pub fn total(&self) -> usize {
        self.tables.values().map(Vec::len).sum()
    }

    pub fn by_level(&self, schema: &IdmSchema) -> LevelCounts {
        let mut c = LevelCounts::default();
        for (e, rows) in &self.tables {
            match schema.level_of(e) {
                Some(Level::TestCase) => c.testcase += rows.len(),
                Some(Level::Ui) => c.ui += rows.len(),
                Some(Level::Database) => c.database += rows.len(),
                None => {}
            }
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DatasetError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{file}: no entity named {entity} in the schema")]
    UnknownEntity { file: PathBuf, entity: String },
    #[error("{file}: {error}")]
    Csv { file: PathBuf, error: CsvError },
    #[error("{file}: header: {message}")]
    Header { file: PathBuf, message: String },
    #[error("{file}: line {line}: expected {expected} fields, found {found}")]
    Arity { file: PathBuf, line: usize, expected: usize, found: usize },
    #[error("{file}: line {line}, column {column}: {message}")]
    Coerce { file: PathBuf, line: usize, column: String, message: String },
    #[error("{entity}.{attribute}: {message} in tuple {tuple}")]
    Invalid { entity: Ident, attribute: Ident, message: String, tuple: String },
    #[error("{entity}: duplicate primary key in tuple {tuple}")]
    PrimaryKey { entity: Ident, tuple: String },
    #[error("{entity}: tuple {tuple} references no {target} through {relationship}")]
    ForeignKey { relationship: Ident, entity: Ident, target: Ident, tuple: String },
}

pub(crate) fn render_tuple(e: &EntityDef, row: &[Value]) -> String {
    let mut s = String::from("(");
    for (i, (a, v)) in e.attributes.iter().zip(row).enumerate() {
        if i > 0 {
            s.push_str(", ");
        }
        let _ = write!(s, "{}={}", a.name, v.to_sql());
    }
    s.push(')');
    s
}

const DATETIME_FORMATS: [&str; 3] = ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M"];

fn is_datetime(s: &str) -> bool {
    DATETIME_FORMATS.iter().any(|f| chrono::NaiveDateTime::parse_from_str(s, f).is_ok())
        || chrono::NaiveDate::parse_from_str(s, "%Y-%m-%d").is_ok()
}

fn decimal_fits(text: &str, precision: u32, scale: u32) -> bool {
    let digits = text.trim_start_matches(['-', '+']);
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    let int = int.trim_start_matches('0');
    frac.len() as u32 <= scale && int.len() as u32 <= precision - scale
}

/// Converts one CSV field to a value of `kind`.
pub fn coerce(kind: AttrKind, text: &str) -> Result<Value, String> {
    match kind {
        AttrKind::Integer => text.trim().parse::<i64>().map(Value::Integer).map_err(|_| format!("{text:?} is not an integer")),
        AttrKind::Decimal { precision, scale } => {
            let t = text.trim();
            let v: f64 = t.parse().map_err(|_| format!("{text:?} is not a number"))?;
            if !v.is_finite() || !decimal_fits(t, precision, scale) {
                return Err(format!("{text:?} does not fit decimal({precision},{scale})"));
            }
            Ok(Value::Real(v))
        }
        AttrKind::Text { max_len } => {
            if text.chars().count() > max_len as usize {
                Err(format!("text longer than {max_len} characters"))
            } else {
                Ok(Value::Text(text.to_string()))
            }
        }
        AttrKind::Boolean => match text.trim().to_ascii_lowercase().as_str() {
            "true" | "1" => Ok(Value::Integer(1)),
            "false" | "0" => Ok(Value::Integer(0)),
            _ => Err(format!("{text:?} is not a boolean")),
        },
        AttrKind::DateTime => {
            if is_datetime(text.trim()) {
                Ok(Value::Text(text.trim().to_string()))
            } else {
                Err(format!("{text:?} is not a date or timestamp"))
            }
        }
    }
}

fn conforms(kind: AttrKind, v: &Value) -> bool {
    match (kind, v) {
        (_, Value::Null) => true,
        (AttrKind::Integer, Value::Integer(_)) => true,
        (AttrKind::Decimal { .. }, Value::Integer(_) | Value::Real(_)) => true,
        (AttrKind::Boolean, Value::Integer(0 | 1)) => true,
        (AttrKind::Text { max_len }, Value::Text(s)) => s.chars().count() <= max_len as usize,
        (AttrKind::DateTime, Value::Text(s)) => is_datetime(s),
        _ => false,
    }
}

/// Checks kinds, nullability, primary keys, and the foreign keys among
/// TestCase and UI entities. References into the Database level are left
/// unchecked: a dangling one is exactly what a join-violation requirement
/// asks the tester to supply.
pub fn validate(schema: &IdmSchema, snap: &DbSnapshot) -> Result<(), DatasetError> {
    for (name, rows) in &snap.tables {
        let e = schema.entity(name).ok_or_else(|| DatasetError::UnknownEntity { file: PathBuf::new(), entity: name.to_string() })?;
        let keys = e.key_indices();
        let mut seen = HashSet::new();
        for row in rows {
            for (a, v) in e.attributes.iter().zip(row) {
                let message = if v.is_null() && !a.nullable {
                    "missing value for a non-null attribute".to_string()
                } else if !conforms(a.kind, v) {
                    format!("{} is not a valid {}", v.to_sql(), a.kind)
                } else {
                    continue;
                };
                return Err(DatasetError::Invalid { entity: e.name.clone(), attribute: a.name.clone(), message, tuple: render_tuple(e, row) });
            }
            let key: Vec<String> = keys.iter().map(|&k| row[k].to_sql()).collect();
            if !seen.insert(key) {
                return Err(DatasetError::PrimaryKey { entity: e.name.clone(), tuple: render_tuple(e, row) });
            }
        }
    }
    for (_, r) in schema.anchor_edges() {
        let (from, to) = (schema.entity(&r.from_entity).expect("valid schema"), schema.entity(&r.to_entity).expect("valid schema"));
        let cols: Vec<(usize, usize)> = r
            .join_pairs
            .iter()
            .map(|(a, b)| (from.attribute_index(a).expect("valid schema"), to.attribute_index(b).expect("valid schema")))
            .collect();
        let targets = snap.rows(&to.name);
        for row in snap.rows(&from.name) {
            if cols.iter().any(|&(a, _)| row[a].is_null()) {
                continue;
            }
            let found = targets.iter().any(|t| cols.iter().all(|&(a, b)| row[a].group_eq(&t[b])));
            if !found {
                return Err(DatasetError::ForeignKey {
                    relationship: r.name.clone(),
                    entity: from.name.clone(),
                    target: to.name.clone(),
                    tuple: render_tuple(from, row),
                });
            }
        }
    }
    Ok(())
}

fn io(path: &Path, e: std::io::Error) -> DatasetError {
    DatasetError::Io { path: path.to_path_buf(), message: e.to_string() }
}

fn load_file(e: &EntityDef, file: &Path, text: &str, snap: &mut DbSnapshot) -> Result<(), DatasetError> {
    let records = parse_csv(text).map_err(|error| DatasetError::Csv { file: file.to_path_buf(), error })?;
    let Some((header, body)) = records.split_first() else { return Ok(()) };
    let header_err = |message: String| DatasetError::Header { file: file.to_path_buf(), message };
    let mut columns: Vec<usize> = Vec::new();
    for h in &header.fields {
        let name = h.as_deref().unwrap_or("").trim();
        let idx = e.attribute_index(&Ident::new(name)).ok_or_else(|| header_err(format!("{} has no attribute {name:?}", e.name)))?;
        if columns.contains(&idx) {
            return Err(header_err(format!("column {name} repeated")));
        }
        columns.push(idx);
    }
    if let Some(a) = e.attributes.iter().enumerate().find(|(i, a)| !a.nullable && !columns.contains(i)).map(|(_, a)| a) {
        return Err(header_err(format!("non-null attribute {} has no column", a.name)));
    }
    for rec in body {
        if rec.fields.len() != columns.len() {
            return Err(DatasetError::Arity { file: file.to_path_buf(), line: rec.line, expected: columns.len(), found: rec.fields.len() });
        }
        let mut row = vec![Value::Null; e.attributes.len()];
        for (&idx, field) in columns.iter().zip(&rec.fields) {
            let a = &e.attributes[idx];
            let coerce_err =
                |message: String| DatasetError::Coerce { file: file.to_path_buf(), line: rec.line, column: a.name.to_string(), message };
            row[idx] = match field {
                None if a.nullable => Value::Null,
                None => return Err(coerce_err("missing value for a non-null attribute".into())),
                Some(t) => coerce(a.kind, t).map_err(coerce_err)?,
            };
        }
        snap.push(&e.name, row);
    }
    Ok(())
}

/// Reads `<Entity>.csv` files from `dir` (other files are ignored) and
/// validates the result.
pub fn load_dataset(schema: &IdmSchema, dir: &Path) -> Result<DbSnapshot, DatasetError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| io(dir, e))?
        .filter_map(|d| d.ok().map(|d| d.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
        .collect();
    files.sort();
    let mut snap = DbSnapshot::default();
    for file in files {
        let stem = file.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let e = schema.entity_by_str(&stem).ok_or_else(|| DatasetError::UnknownEntity { file: file.clone(), entity: stem })?;
        let text = std::fs::read_to_string(&file).map_err(|err| io(&file, err))?;
        load_file(e, &file, &text, &mut snap)?;
    }
    validate(schema, &snap)?;
    Ok(snap)
}
