//! Case-insensitive identifiers.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

/// An identifier that keeps its original spelling for display but compares,
/// hashes and orders by its lower-case form.
#[derive(Clone)]
pub struct Ident {
    text: String,
    key: String,
}

impl Ident {
    pub fn new(text: impl Into<String>) -> Self {
        let text = text.into();
        let key = text.to_ascii_lowercase();
        Ident { text, key }
    }

    /// Spelling as written in the source.
    pub fn as_str(&self) -> &str {
        &self.text
    }

    /// Canonical lower-case form.
    pub fn key(&self) -> &str {
        &self.key
    }

    pub fn eq_str(&self, other: &str) -> bool {
        self.key.eq_ignore_ascii_case(other)
    }

    pub fn starts_with_ci(&self, prefix: &str) -> bool {
        self.key.starts_with(&prefix.to_ascii_lowercase())
    }

    pub fn ends_with_ci(&self, suffix: &str) -> bool {
        self.key.ends_with(&suffix.to_ascii_lowercase())
    }
}

impl PartialEq for Ident {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}

impl Eq for Ident {}

impl Hash for Ident {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.key.hash(state)
    }
}

impl PartialOrd for Ident {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ident {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key.cmp(&other.key)
    }
}

impl fmt::Display for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl fmt::Debug for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.text)
    }
}

impl From<&str> for Ident {
    fn from(s: &str) -> Self {
        Ident::new(s)
    }
}

impl From<String> for Ident {
    fn from(s: String) -> Self {
        Ident::new(s)
    }
}

impl serde::Serialize for Ident {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.text)
    }
}

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

const RESERVED: &[&str] = &[
    "abort", "action", "add", "all", "alter", "and", "as", "asc", "between", "by", "case", "check",
    "collate", "column", "commit", "constraint", "create", "cross", "current", "default", "delete",
    "desc", "distinct", "drop", "else", "end", "escape", "except", "exists", "foreign", "from",
    "full", "glob", "group", "having", "if", "in", "index", "inner", "insert", "intersect", "into",
    "is", "join", "key", "left", "like", "limit", "match", "natural", "not", "null", "of", "offset",
    "on", "or", "order", "outer", "primary", "references", "right", "rowid", "select", "set",
    "table", "then", "to", "transaction", "union", "unique", "update", "user", "using", "values",
    "view", "when", "where", "with",
];

/// SQL spelling of an identifier, double-quoted only when it is a reserved
/// word or not a plain identifier.
pub fn quote_ident(name: &str) -> String {
    if is_identifier(name) && !RESERVED.contains(&name.to_ascii_lowercase().as_str()) {
        name.to_string()
    } else {
        format!("\"{}\"", name.replace('"', "\"\""))
    }
}
