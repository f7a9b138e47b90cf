//! A small SQL syntax tree covering the subset coverage rules use.

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use crate::idm::IdmSchema;
use crate::ident::{quote_ident, Ident};
use crate::value::{ArithOp, CmpOp, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum SqlExpr {
    Column { table: String, column: Ident },
    Lit(Value),
    Neg(Box<SqlExpr>),
    Arith(ArithOp, Box<SqlExpr>, Box<SqlExpr>),
    Cmp(CmpOp, Box<SqlExpr>, Box<SqlExpr>),
    Like(Box<SqlExpr>, Box<SqlExpr>),
    IsNull(Box<SqlExpr>),
    IsNotNull(Box<SqlExpr>),
    Not(Box<SqlExpr>),
    And(Vec<SqlExpr>),
    Or(Vec<SqlExpr>),
    CountStar,
    Count(Box<SqlExpr>),
    Sum(Box<SqlExpr>),
    Case { when: Box<SqlExpr>, then: Box<SqlExpr>, otherwise: Box<SqlExpr> },
}

impl SqlExpr {
    pub fn col(table: &str, column: &Ident) -> SqlExpr {
        SqlExpr::Column { table: table.to_string(), column: column.clone() }
    }

    pub fn int(i: i64) -> SqlExpr {
        SqlExpr::Lit(Value::Integer(i))
    }

    pub fn cmp(op: CmpOp, a: SqlExpr, b: SqlExpr) -> SqlExpr {
        SqlExpr::Cmp(op, Box::new(a), Box::new(b))
    }

    pub fn negate(e: SqlExpr) -> SqlExpr {
        SqlExpr::Not(Box::new(e))
    }

    pub fn is_null(e: SqlExpr) -> SqlExpr {
        SqlExpr::IsNull(Box::new(e))
    }

    pub fn is_not_null(e: SqlExpr) -> SqlExpr {
        SqlExpr::IsNotNull(Box::new(e))
    }

    /// Conjunction, flattening nested ANDs; a single item is returned as is.
    pub fn and(items: Vec<SqlExpr>) -> SqlExpr {
        let mut flat = Vec::new();
        for i in items {
            match i {
                SqlExpr::And(v) => flat.extend(v),
                other => flat.push(other),
            }
        }
        if flat.len() == 1 {
            flat.pop().unwrap()
        } else {
            SqlExpr::And(flat)
        }
    }

    /// `SUM(CASE WHEN cond THEN a ELSE b END)`
    pub fn sum_case(cond: SqlExpr, then: i64, otherwise: i64) -> SqlExpr {
        SqlExpr::Sum(Box::new(SqlExpr::Case {
            when: Box::new(cond),
            then: Box::new(SqlExpr::int(then)),
            otherwise: Box::new(SqlExpr::int(otherwise)),
        }))
    }

    /// Top-level conjuncts.
    pub fn conjuncts(&self) -> Vec<&SqlExpr> {
        match self {
            SqlExpr::And(v) => v.iter().flat_map(|x| x.conjuncts()).collect(),
            other => vec![other],
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            SqlExpr::Or(_) => 1,
            SqlExpr::And(_) => 2,
            SqlExpr::Not(_) => 3,
            SqlExpr::Cmp(..) | SqlExpr::Like(..) | SqlExpr::IsNull(_) | SqlExpr::IsNotNull(_) => 4,
            SqlExpr::Arith(ArithOp::Add | ArithOp::Sub, ..) => 5,
            SqlExpr::Arith(..) => 6,
            SqlExpr::Neg(_) => 7,
            _ => 8,
        }
    }

    fn map_tables(&mut self, f: &dyn Fn(&str) -> String) {
        match self {
            SqlExpr::Column { table, .. } => *table = f(table),
            SqlExpr::Lit(_) | SqlExpr::CountStar => {}
            SqlExpr::Neg(x) | SqlExpr::IsNull(x) | SqlExpr::IsNotNull(x) | SqlExpr::Not(x) | SqlExpr::Count(x) | SqlExpr::Sum(x) => {
                x.map_tables(f)
            }
            SqlExpr::Arith(_, a, b) | SqlExpr::Cmp(_, a, b) | SqlExpr::Like(a, b) => {
                a.map_tables(f);
                b.map_tables(f);
            }
            SqlExpr::And(v) | SqlExpr::Or(v) => v.iter_mut().for_each(|x| x.map_tables(f)),
            SqlExpr::Case { when, then, otherwise } => {
                when.map_tables(f);
                then.map_tables(f);
                otherwise.map_tables(f);
            }
        }
    }

    fn write_child(&self, f: &mut fmt::Formatter<'_>, child: &SqlExpr, min: u8) -> fmt::Result {
        if child.precedence() < min {
            write!(f, "({child})")
        } else {
            write!(f, "{child}")
        }
    }
}

impl fmt::Display for SqlExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = self.precedence();
        match self {
            SqlExpr::Column { table, column } => write!(f, "{}.{}", quote_ident(table), quote_ident(column.as_str())),
            SqlExpr::Lit(v) => f.write_str(&v.to_sql()),
            SqlExpr::Neg(x) => {
                f.write_str("-")?;
                // `--` would start a comment
                if matches!(**x, SqlExpr::Neg(_)) || matches!(**x, SqlExpr::Lit(Value::Integer(i)) if i < 0)
                    || matches!(**x, SqlExpr::Lit(Value::Real(r)) if r < 0.0)
                {
                    write!(f, "({x})")
                } else {
                    self.write_child(f, x, 8)
                }
            }
            SqlExpr::Arith(op, a, b) => {
                self.write_child(f, a, p)?;
                write!(f, " {} ", op.symbol())?;
                self.write_child(f, b, p + 1)
            }
            SqlExpr::Cmp(op, a, b) => {
                self.write_child(f, a, 5)?;
                write!(f, " {} ", op.symbol())?;
                self.write_child(f, b, 5)
            }
            SqlExpr::Like(a, b) => {
                self.write_child(f, a, 5)?;
                f.write_str(" LIKE ")?;
                self.write_child(f, b, 5)
            }
            SqlExpr::IsNull(x) => {
                self.write_child(f, x, 5)?;
                f.write_str(" IS NULL")
            }
            SqlExpr::IsNotNull(x) => {
                self.write_child(f, x, 5)?;
                f.write_str(" IS NOT NULL")
            }
            SqlExpr::Not(x) => write!(f, "NOT ({x})"),
            SqlExpr::And(v) | SqlExpr::Or(v) => {
                let sep = if matches!(self, SqlExpr::And(_)) { " AND " } else { " OR " };
                for (i, x) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_str(sep)?;
                    }
                    self.write_child(f, x, p + 1)?;
                }
                Ok(())
            }
            SqlExpr::CountStar => f.write_str("COUNT(*)"),
            SqlExpr::Count(x) => write!(f, "COUNT({x})"),
            SqlExpr::Sum(x) => write!(f, "SUM({x})"),
            SqlExpr::Case { when, then, otherwise } => write!(f, "CASE WHEN {when} THEN {then} ELSE {otherwise} END"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRef {
    pub entity: Ident,
    pub alias: String,
}

impl fmt::Display for TableRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&quote_ident(self.entity.as_str()))?;
        if self.alias != self.entity.as_str() {
            write!(f, " AS {}", quote_ident(&self.alias))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JoinKind {
    Inner,
    Left,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Join {
    pub kind: JoinKind,
    pub table: TableRef,
    pub on: SqlExpr,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Projection {
    Star,
    Columns(Vec<(SqlExpr, String)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Select {
    pub projection: Projection,
    pub from: TableRef,
    pub joins: Vec<Join>,
    pub filter: Vec<SqlExpr>,
    pub group_by: Vec<SqlExpr>,
    pub having: Vec<SqlExpr>,
}

fn quote_label(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

impl fmt::Display for Select {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SELECT ")?;
        match &self.projection {
            Projection::Star => f.write_str("*")?,
            Projection::Columns(cols) => {
                let items: Vec<String> = cols.iter().map(|(e, label)| format!("{e} AS {}", quote_label(label))).collect();
                f.write_str(&items.join(", "))?;
            }
        }
        write!(f, "\nFROM {}", self.from)?;
        for j in &self.joins {
            let kw = match j.kind {
                JoinKind::Inner => "INNER JOIN",
                JoinKind::Left => "LEFT JOIN",
            };
            write!(f, "\n{kw} {} ON ({})", j.table, j.on)?;
        }
        let clause = |f: &mut fmt::Formatter<'_>, head: &str, items: &[SqlExpr]| -> fmt::Result {
            for (i, c) in items.iter().enumerate() {
                let kw = if i == 0 { head } else { "AND" };
                if matches!(c, SqlExpr::Or(_)) {
                    write!(f, "\n{kw} ({c})")?;
                } else {
                    write!(f, "\n{kw} {c}")?;
                }
            }
            Ok(())
        };
        clause(f, "WHERE", &self.filter)?;
        if !self.group_by.is_empty() {
            let cols: Vec<String> = self.group_by.iter().map(|c| c.to_string()).collect();
            write!(f, "\nGROUP BY {}", cols.join(", "))?;
        }
        clause(f, "HAVING", &self.having)
    }
}

impl Select {
    pub fn tables(&self) -> impl Iterator<Item = &TableRef> {
        std::iter::once(&self.from).chain(self.joins.iter().map(|j| &j.table))
    }

    /// The same query projecting the columns a witness row reports: the
    /// grouping columns of grouped queries, every column otherwise. Labels
    /// are `alias.column`.
    pub fn with_witness_projection(&self, schema: &IdmSchema) -> Select {
        if self.group_by.is_empty() && !self.having.is_empty() {
            return self.clone();
        }
        let cols = if self.group_by.is_empty() {
            self.tables()
                .flat_map(|t| {
                    let e = schema.entity(&t.entity).expect("tables come from the schema");
                    e.attributes
                        .iter()
                        .map(|a| (SqlExpr::col(&t.alias, &a.name), format!("{}.{}", t.alias, a.name)))
                        .collect::<Vec<_>>()
                })
                .collect()
        } else {
            self.group_by
                .iter()
                .map(|c| {
                    let label = match c {
                        SqlExpr::Column { table, column } => format!("{table}.{column}"),
                        other => other.to_string(),
                    };
                    (c.clone(), label)
                })
                .collect()
        };
        Select { projection: Projection::Columns(cols), ..self.clone() }
    }

    /// Rendering with aliases renamed by position and whitespace collapsed,
    /// so that queries differing only in naming compare equal.
    pub fn canonical(&self) -> String {
        let map: HashMap<String, String> =
            self.tables().enumerate().map(|(i, t)| (t.alias.clone(), format!("t{}", i + 1))).collect();
        let rename = |s: &str| map.get(s).cloned().unwrap_or_else(|| s.to_string());
        let mut c = self.clone();
        c.from.alias = rename(&c.from.alias);
        for j in &mut c.joins {
            j.table.alias = rename(&j.table.alias);
            j.on.map_tables(&rename);
        }
        for e in c.filter.iter_mut().chain(c.group_by.iter_mut()).chain(c.having.iter_mut()) {
            e.map_tables(&rename);
        }
        if let Projection::Columns(cols) = &mut c.projection {
            for (e, _) in cols {
                e.map_tables(&rename);
            }
        }
        let mut out = String::new();
        let _ = write!(out, "{c}");
        out.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(t: &str, c: &str) -> SqlExpr {
        SqlExpr::col(t, &Ident::new(c))
    }

    #[test]
    fn precedence_adds_only_needed_parentheses() {
        let e = SqlExpr::and(vec![
            SqlExpr::Or(vec![SqlExpr::cmp(CmpOp::Eq, col("A", "x"), SqlExpr::int(1)), SqlExpr::is_null(col("A", "y"))]),
            SqlExpr::cmp(
                CmpOp::Ge,
                col("A", "x"),
                SqlExpr::Arith(
                    ArithOp::Sub,
                    Box::new(SqlExpr::int(10)),
                    Box::new(SqlExpr::Arith(ArithOp::Sub, Box::new(SqlExpr::int(2)), Box::new(SqlExpr::int(1)))),
                ),
            ),
        ]);
        assert_eq!(e.to_string(), "(A.x = 1 OR A.y IS NULL) AND A.x >= 10 - (2 - 1)");
        assert_eq!(SqlExpr::Neg(Box::new(SqlExpr::int(-1))).to_string(), "-(-1)");
    }

    #[test]
    fn reserved_names_are_quoted_and_aliases_shown() {
        let s = Select {
            projection: Projection::Star,
            from: TableRef { entity: Ident::new("Order"), alias: "Order".into() },
            joins: vec![Join {
                kind: JoinKind::Left,
                table: TableRef { entity: Ident::new("Stock"), alias: "Stock2".into() },
                on: SqlExpr::cmp(CmpOp::Eq, col("Order", "o_id"), col("Stock2", "s_i_id")),
            }],
            filter: vec![SqlExpr::is_null(col("Stock2", "s_w_id"))],
            group_by: vec![],
            having: vec![],
        };
        assert_eq!(
            s.to_string(),
            "SELECT *\nFROM \"Order\"\nLEFT JOIN Stock AS Stock2 ON (\"Order\".o_id = Stock2.s_i_id)\nWHERE Stock2.s_w_id IS NULL"
        );
        assert_eq!(
            s.canonical(),
            "select * from \"order\" as t1 left join stock as t2 on (t1.o_id = t2.s_i_id) where t2.s_w_id is null"
        );
    }
}
