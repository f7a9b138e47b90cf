//! The IDM database on SQLite.

use rusqlite::types::ValueRef;
use rusqlite::Connection;

use crate::ident::quote_ident;
use crate::idm::{emit_ddl, AttrKind, IdmSchema};
use crate::value::Value;

use super::snapshot::{render_tuple, DbSnapshot};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DbError {
    #[error("cannot open {target}: {message}")]
    Open { target: String, message: String },
    #[error("database {target} already holds tables ({tables}); pass --replace to overwrite")]
    NotEmpty { target: String, tables: String },
    #[error("{message}\n  while executing: {statement}")]
    Engine { statement: String, message: String },
    #[error(transparent)]
    Schema(#[from] crate::idm::SchemaError),
}

fn engine(statement: impl Into<String>, e: rusqlite::Error) -> DbError {
    DbError::Engine { statement: statement.into(), message: e.to_string() }
}

/// Strips an optional `sqlite:` or `sqlite://` prefix.
pub fn database_path(conn_str: &str) -> &str {
    conn_str.strip_prefix("sqlite://").or_else(|| conn_str.strip_prefix("sqlite:")).unwrap_or(conn_str)
}

/// Opens a connection with LIKE made case-sensitive, matching the
/// reference interpreter. Foreign keys stay declared in the DDL but are not
/// enforced by the engine: dataset validation checks the test-case and UI
/// ones, and Database-level references may dangle.
pub fn open(conn_str: &str) -> Result<Connection, DbError> {
    let path = database_path(conn_str);
    let conn = Connection::open(path).map_err(|e| DbError::Open { target: conn_str.into(), message: e.to_string() })?;
    let pragmas = "PRAGMA case_sensitive_like = ON; PRAGMA foreign_keys = OFF;";
    conn.execute_batch(pragmas).map_err(|e| engine(pragmas, e))?;
    Ok(conn)
}

fn user_tables(conn: &Connection) -> Result<Vec<String>, DbError> {
    let sql = "SELECT name FROM sqlite_master WHERE type = 'table' AND name NOT LIKE 'sqlite_%' ORDER BY name";
    let mut stmt = conn.prepare(sql).map_err(|e| engine(sql, e))?;
    let names = stmt.query_map([], |r| r.get::<_, String>(0)).map_err(|e| engine(sql, e))?;
    names.collect::<Result<_, _>>().map_err(|e| engine(sql, e))
}

fn to_sql_value(v: &Value) -> rusqlite::types::Value {
    match v {
        Value::Null => rusqlite::types::Value::Null,
        Value::Integer(i) => rusqlite::types::Value::Integer(*i),
        Value::Real(r) => rusqlite::types::Value::Real(*r),
        Value::Text(s) => rusqlite::types::Value::Text(s.clone()),
    }
}

pub fn from_sql_value(v: ValueRef<'_>) -> Value {
    match v {
        ValueRef::Null => Value::Null,
        ValueRef::Integer(i) => Value::Integer(i),
        ValueRef::Real(r) => Value::Real(r),
        ValueRef::Text(t) => Value::Text(String::from_utf8_lossy(t).into_owned()),
        ValueRef::Blob(b) => Value::Text(String::from_utf8_lossy(b).into_owned()),
    }
}

/// Creates the IDM tables in `conn` and inserts the snapshot in
/// foreign-key order, in one transaction. A database that already holds
/// tables is refused unless `replace` is set, in which case they are
/// dropped first.
pub fn materialize_into(conn: &mut Connection, target: &str, schema: &IdmSchema, snap: &DbSnapshot, replace: bool) -> Result<(), DbError> {
    let existing = user_tables(conn)?;
    if !existing.is_empty() && !replace {
        return Err(DbError::NotEmpty { target: target.into(), tables: existing.join(", ") });
    }
    let tx = conn.transaction().map_err(|e| engine("BEGIN", e))?;
    for t in &existing {
        let stmt = format!("DROP TABLE {}", quote_ident(t));
        tx.execute_batch(&stmt).map_err(|e| engine(stmt, e))?;
    }
    let ddl = emit_ddl(schema)?;
    tx.execute_batch(&ddl).map_err(|e| engine(ddl.clone(), e))?;
    for idx in crate::idm::dependency_order(schema)? {
        let e = &schema.entities[idx];
        let cols: Vec<String> = e.attributes.iter().map(|a| quote_ident(a.name.as_str())).collect();
        let marks: Vec<String> = (1..=cols.len()).map(|i| format!("?{i}")).collect();
        let stmt = format!("INSERT INTO {} ({}) VALUES ({})", quote_ident(e.name.as_str()), cols.join(", "), marks.join(", "));
        let mut prepared = tx.prepare(&stmt).map_err(|err| engine(stmt.clone(), err))?;
        for row in snap.rows(&e.name) {
            prepared
                .execute(rusqlite::params_from_iter(row.iter().map(to_sql_value)))
                .map_err(|err| engine(format!("{stmt} with {}", render_tuple(e, row)), err))?;
        }
    }
    tx.commit().map_err(|e| engine("COMMIT", e))
}

/// Opens `target` and materializes the snapshot there.
pub fn materialize(schema: &IdmSchema, snap: &DbSnapshot, target: &str, replace: bool) -> Result<Connection, DbError> {
    let mut conn = open(target)?;
    materialize_into(&mut conn, target, schema, snap, replace)?;
    Ok(conn)
}

/// Reads every entity table back, normalising decimals to reals.
pub fn read_snapshot(conn: &Connection, schema: &IdmSchema) -> Result<DbSnapshot, DbError> {
    let mut snap = DbSnapshot::default();
    for e in &schema.entities {
        let cols: Vec<String> = e.attributes.iter().map(|a| quote_ident(a.name.as_str())).collect();
        let sql = format!("SELECT {} FROM {} ORDER BY rowid", cols.join(", "), quote_ident(e.name.as_str()));
        let mut stmt = conn.prepare(&sql).map_err(|err| engine(sql.clone(), err))?;
        let mut rows = stmt.query([]).map_err(|err| engine(sql.clone(), err))?;
        while let Some(r) = rows.next().map_err(|err| engine(sql.clone(), err))? {
            let row = e
                .attributes
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    let v = from_sql_value(r.get_ref(i).expect("column index in range"));
                    match (a.kind, v) {
                        (AttrKind::Decimal { .. }, Value::Integer(n)) => Value::Real(n as f64),
                        (_, v) => v,
                    }
                })
                .collect();
            snap.push(&e.name, row);
        }
    }
    Ok(snap)
}

/// Runs `sql` and returns its first row as labelled values.
pub fn first_row(conn: &Connection, sql: &str) -> Result<Option<Vec<(String, Value)>>, rusqlite::Error> {
    let mut stmt = conn.prepare(sql)?;
    let names: Vec<String> = stmt.column_names().iter().map(|s| s.to_string()).collect();
    let mut rows = stmt.query([])?;
    match rows.next()? {
        None => Ok(None),
        Some(r) => Ok(Some(names.into_iter().enumerate().map(|(i, n)| (n, from_sql_value(r.get_ref(i).expect("column index in range")))).collect())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::idm::parse_schema;
    use crate::ident::Ident;

    fn fixture() -> IdmSchema {
        parse_schema(include_str!("../../../../fixtures/neworder/schema.idm")).unwrap()
    }

    fn sample() -> DbSnapshot {
        let mut s = DbSnapshot::default();
        s.push(&Ident::new("TestCase"), vec![Value::Integer(1), Value::Text("a".into())]);
        s.push(&Ident::new("Item"), vec![Value::Integer(5), Value::Text("pen".into()), Value::Real(3.0), Value::Null]);
        s
    }

    #[test]
    fn round_trip() {
        let schema = fixture();
        let conn = materialize(&schema, &sample(), ":memory:", false).unwrap();
        assert_eq!(read_snapshot(&conn, &schema).unwrap(), sample());
    }

    #[test]
    fn empty_snapshot_creates_tables() {
        let schema = fixture();
        let conn = materialize(&schema, &DbSnapshot::default(), ":memory:", false).unwrap();
        assert_eq!(user_tables(&conn).unwrap().len(), schema.entities.len());
    }

    #[test]
    fn non_empty_target_needs_replace() {
        let schema = fixture();
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("idm.db").display().to_string();
        drop(materialize(&schema, &sample(), &target, false).unwrap());
        assert!(matches!(materialize(&schema, &sample(), &target, false), Err(DbError::NotEmpty { .. })));
        let conn = materialize(&schema, &DbSnapshot::default(), &format!("sqlite:{target}"), true).unwrap();
        assert_eq!(read_snapshot(&conn, &schema).unwrap().total(), 0);
    }

    #[test]
    fn duplicate_key_aborts_with_tuple() {
        let schema = fixture();
        let mut s = sample();
        s.push(&Ident::new("TestCase"), vec![Value::Integer(1), Value::Null]);
        let err = materialize(&schema, &s, ":memory:", false).unwrap_err().to_string();
        assert!(err.contains("UNIQUE constraint failed"), "{err}");
        assert!(err.contains("(tc_id=1, tc_description=NULL)"), "{err}");
    }

    #[test]
    fn like_is_case_sensitive() {
        let conn = open(":memory:").unwrap();
        let row = first_row(&conn, "SELECT 'abc' LIKE 'A%' AS hit").unwrap().unwrap();
        assert_eq!(row, [("hit".to_string(), Value::Integer(0))]);
    }
}
