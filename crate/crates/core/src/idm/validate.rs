use std::collections::HashSet;
use std::fmt;

use super::model::*;
use crate::ident::Ident;

/// Schema invariant named by a diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Invariant {
    DuplicateEntity,
    DuplicateAttribute,
    IoRoleLevel,
    UiPrefix,
    TestCaseEntity,
    TestCaseKey,
    UiKey,
    KeyAttribute,
    RelationshipEndpoint,
    RelationshipKind,
    JoinPair,
    FkTarget,
    AnchorConnectivity,
    AssignmentRoot,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub invariant: Invariant,
    pub element: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:?}] {}: {}", self.invariant, self.element, self.message)
    }
}

fn diag(out: &mut Vec<Diagnostic>, invariant: Invariant, element: impl fmt::Display, message: impl Into<String>) {
    out.push(Diagnostic { invariant, element: element.to_string(), message: message.into() });
}

fn role_attr<'a>(e: &'a EntityDef, role: &str) -> Option<&'a AttributeDef> {
    e.attributes.iter().find(|a| a.name.eq_str(role) || a.name.ends_with_ci(&format!("_{role}")))
}

/// Checks every schema invariant. An empty result means the schema is valid.
pub fn validate_schema(schema: &IdmSchema) -> Vec<Diagnostic> {
    let mut out = Vec::new();

    let mut names = HashSet::new();
    for e in &schema.entities {
        if !names.insert(e.name.clone()) {
            diag(&mut out, Invariant::DuplicateEntity, &e.name, "entity declared more than once");
        }
    }

    for e in &schema.entities {
        check_entity(schema, e, &mut out);
    }

    let testcase: Vec<_> = schema.entities.iter().filter(|e| e.level == Level::TestCase).collect();
    match testcase.as_slice() {
        [tc] if tc.name.eq_str(TEST_CASE_ENTITY) => {
            let ok = tc.primary_key.len() == 1 && tc.primary_key[0].eq_str(TEST_CASE_KEY);
            if !ok {
                diag(&mut out, Invariant::TestCaseKey, &tc.name, "TestCase key must be tc_id");
            }
        }
        _ => diag(
            &mut out,
            Invariant::TestCaseEntity,
            "TestCase level",
            format!("expected exactly one entity named {TEST_CASE_ENTITY}, found {}", testcase.len()),
        ),
    }

    // FK-target checks against an entity whose own key is already flagged would only repeat it
    let bad_keys: HashSet<String> = out
        .iter()
        .filter(|d| matches!(d.invariant, Invariant::KeyAttribute | Invariant::TestCaseKey | Invariant::UiKey))
        .map(|d| d.element.split('.').next().unwrap_or_default().to_ascii_lowercase())
        .collect();
    for r in &schema.relationships {
        check_relationship(schema, r, &bad_keys, &mut out);
    }

    for root in schema.ui_roots() {
        match schema.anchor_route_count(&root.name) {
            0 => diag(
                &mut out,
                Invariant::AnchorConnectivity,
                &root.name,
                "UI root entity is not connected to TestCase through declared foreign keys",
            ),
            1 => {}
            n => diag(
                &mut out,
                Invariant::AnchorConnectivity,
                &root.name,
                format!("UI root entity has {n} foreign-key routes to TestCase; exactly one is required"),
            ),
        }
    }

    for a in &schema.assignments {
        if schema.level_of(&a.root) != Some(Level::Ui) {
            diag(&mut out, Invariant::AssignmentRoot, &a.name, format!("root {} is not a UI-level entity", a.root));
        }
    }
    out
}

fn check_entity(schema: &IdmSchema, e: &EntityDef, out: &mut Vec<Diagnostic>) {
    let mut seen = HashSet::new();
    for a in &e.attributes {
        if !seen.insert(a.name.clone()) {
            diag(out, Invariant::DuplicateAttribute, format!("{}.{}", e.name, a.name), "attribute declared more than once");
        }
        if e.level != Level::Ui && a.io_role != IoRole::Stored {
            diag(
                out,
                Invariant::IoRoleLevel,
                format!("{}.{}", e.name, a.name),
                "input/output markers are only allowed on UI-level attributes",
            );
        }
        if e.level == Level::Ui && a.io_role == IoRole::Stored {
            diag(out, Invariant::IoRoleLevel, format!("{}.{}", e.name, a.name), "UI-level attributes are input or output");
        }
    }

    let prefixed = e.name.starts_with_ci(UI_PREFIX);
    if e.level == Level::Ui && !prefixed {
        diag(out, Invariant::UiPrefix, &e.name, format!("UI-level entity names must start with {UI_PREFIX}"));
    } else if e.level != Level::Ui && prefixed {
        diag(out, Invariant::UiPrefix, &e.name, format!("only UI-level entity names may start with {UI_PREFIX}"));
    }

    if e.primary_key.is_empty() {
        diag(out, Invariant::KeyAttribute, &e.name, "entity has no primary key");
    }
    for k in &e.primary_key {
        match e.attribute(k) {
            None => diag(out, Invariant::KeyAttribute, format!("{}.{}", e.name, k), "key attribute does not exist"),
            Some(a) if a.nullable => {
                diag(out, Invariant::KeyAttribute, format!("{}.{}", e.name, k), "key attribute is nullable")
            }
            _ => {}
        }
    }

    if e.level == Level::Ui {
        let tc = role_attr(e, TEST_CASE_KEY);
        let ui = role_attr(e, "ui_id");
        match (tc, ui) {
            (Some(tc), Some(ui)) => {
                let prefix_ok = e.primary_key.len() >= 2 && e.primary_key[0] == tc.name && e.primary_key[1] == ui.name;
                if !prefix_ok {
                    diag(out, Invariant::UiKey, &e.name, format!("key must begin with ({}, {})", tc.name, ui.name));
                } else {
                    let is_child = schema.anchor_edges().any(|(_, r)| {
                        r.from_entity == e.name && schema.level_of(&r.to_entity) == Some(Level::Ui)
                    });
                    if is_child && e.primary_key.len() < 3 {
                        diag(out, Invariant::UiKey, &e.name, "child UI entity key must add a line ordinal");
                    }
                }
            }
            (tc, _) => {
                let missing = if tc.is_none() { TEST_CASE_KEY } else { "ui_id" };
                diag(out, Invariant::UiKey, &e.name, format!("UI-level entity has no {missing} attribute"));
            }
        }
    }
}

fn check_relationship(schema: &IdmSchema, r: &RelationshipDef, bad_keys: &HashSet<String>, out: &mut Vec<Diagnostic>) {
    let (from, to) = match (schema.entity(&r.from_entity), schema.entity(&r.to_entity)) {
        (Some(f), Some(t)) => (f, t),
        (f, _) => {
            let missing = if f.is_none() { &r.from_entity } else { &r.to_entity };
            diag(out, Invariant::RelationshipEndpoint, &r.name, format!("unknown entity {missing}"));
            return;
        }
    };
    let expected = if from.level == to.level { RelationshipKind::IntraLevel } else { RelationshipKind::InterLevel };
    if r.kind != expected {
        diag(out, Invariant::RelationshipKind, &r.name, format!("relationship should be {expected:?}"));
    }
    if r.join_pairs.is_empty() {
        diag(out, Invariant::JoinPair, &r.name, "relationship has no join attributes");
    }
    let mut pairs_ok = true;
    for (a, b) in &r.join_pairs {
        match (from.attribute(a), to.attribute(b)) {
            (Some(x), Some(y)) => {
                if x.kind.class() != y.kind.class() {
                    pairs_ok = false;
                    diag(
                        out,
                        Invariant::JoinPair,
                        &r.name,
                        format!("{}.{} ({}) and {}.{} ({}) are not comparable", from.name, a, x.kind, to.name, b, y.kind),
                    );
                }
            }
            (x, _) => {
                pairs_ok = false;
                let (e, attr) = if x.is_none() { (&from.name, a) } else { (&to.name, b) };
                diag(out, Invariant::JoinPair, &r.name, format!("unknown attribute {e}.{attr}"));
            }
        }
    }
    if r.declared_as_fk && pairs_ok && !bad_keys.contains(to.name.key()) {
        let targets: HashSet<&Ident> = r.join_pairs.iter().map(|(_, b)| b).collect();
        let key: HashSet<&Ident> = to.primary_key.iter().collect();
        if targets != key || r.join_pairs.len() != to.primary_key.len() {
            diag(out, Invariant::FkTarget, &r.name, format!("foreign key must reference the primary key of {}", to.name));
        }
    }
}
