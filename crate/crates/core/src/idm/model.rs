use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use crate::ident::Ident;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub enum Level {
    Database,
    #[serde(rename = "UI")]
    Ui,
    TestCase,
}

impl Level {
    pub fn keyword(self) -> &'static str {
        match self {
            Level::Database => "Database",
            Level::Ui => "UI",
            Level::TestCase => "TestCase",
        }
    }

    pub fn parse(s: &str) -> Option<Level> {
        match s.to_ascii_lowercase().as_str() {
            "database" => Some(Level::Database),
            "ui" => Some(Level::Ui),
            "testcase" => Some(Level::TestCase),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttrKind {
    Integer,
    Decimal { precision: u32, scale: u32 },
    Text { max_len: u32 },
    Boolean,
    DateTime,
}

/// Comparison/arithmetic compatibility class of an attribute kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TypeClass {
    Numeric,
    Text,
    DateTime,
}

impl AttrKind {
    pub fn class(self) -> TypeClass {
        match self {
            AttrKind::Integer | AttrKind::Decimal { .. } | AttrKind::Boolean => TypeClass::Numeric,
            AttrKind::Text { .. } => TypeClass::Text,
            AttrKind::DateTime => TypeClass::DateTime,
        }
    }

    pub fn sql_type(self) -> String {
        match self {
            AttrKind::Integer => "INTEGER".into(),
            AttrKind::Decimal { precision, scale } => format!("DECIMAL({precision},{scale})"),
            AttrKind::Text { max_len } => format!("VARCHAR({max_len})"),
            AttrKind::Boolean => "BOOLEAN".into(),
            AttrKind::DateTime => "TIMESTAMP".into(),
        }
    }

    /// Smallest positive step between two distinct values of this kind.
    pub fn step(self) -> Option<f64> {
        match self {
            AttrKind::Integer | AttrKind::Boolean => Some(1.0),
            AttrKind::Decimal { scale, .. } => Some(10f64.powi(-(scale as i32))),
            _ => None,
        }
    }
}

impl fmt::Display for AttrKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttrKind::Integer => f.write_str("integer"),
            AttrKind::Decimal { precision, scale } => write!(f, "decimal({precision},{scale})"),
            AttrKind::Text { max_len } => write!(f, "text({max_len})"),
            AttrKind::Boolean => f.write_str("boolean"),
            AttrKind::DateTime => f.write_str("datetime"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IoRole {
    Input,
    Output,
    Stored,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributeDef {
    pub name: Ident,
    pub kind: AttrKind,
    pub nullable: bool,
    pub io_role: IoRole,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntityDef {
    pub name: Ident,
    pub level: Level,
    pub attributes: Vec<AttributeDef>,
    pub primary_key: Vec<Ident>,
}

impl EntityDef {
    pub fn attribute(&self, name: &Ident) -> Option<&AttributeDef> {
        self.attributes.iter().find(|a| &a.name == name)
    }

    pub fn attribute_index(&self, name: &Ident) -> Option<usize> {
        self.attributes.iter().position(|a| &a.name == name)
    }

    pub fn key_indices(&self) -> Vec<usize> {
        self.primary_key
            .iter()
            .filter_map(|k| self.attribute_index(k))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelationshipKind {
    IntraLevel,
    InterLevel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationshipDef {
    pub name: Ident,
    pub kind: RelationshipKind,
    pub from_entity: Ident,
    pub to_entity: Ident,
    /// (attribute of `from_entity`, attribute of `to_entity`)
    pub join_pairs: Vec<(Ident, Ident)>,
    pub declared_as_fk: bool,
    /// Links a test input to state that only exists after the system under
    /// test has run; never used to anchor coverage rules to test cases.
    pub output: bool,
}

impl RelationshipDef {
    pub fn connects(&self, a: &Ident, b: &Ident) -> bool {
        (&self.from_entity == a && &self.to_entity == b) || (&self.from_entity == b && &self.to_entity == a)
    }

    /// Join pairs oriented as (attribute of `a`, attribute of `b`).
    pub fn pairs_oriented(&self, a: &Ident) -> Vec<(Ident, Ident)> {
        if &self.from_entity == a {
            self.join_pairs.clone()
        } else {
            self.join_pairs.iter().map(|(x, y)| (y.clone(), x.clone())).collect()
        }
    }

    pub fn other_end(&self, e: &Ident) -> &Ident {
        if &self.from_entity == e {
            &self.to_entity
        } else {
            &self.from_entity
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub name: Ident,
    pub root: Ident,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IdmSchema {
    pub entities: Vec<EntityDef>,
    pub relationships: Vec<RelationshipDef>,
    pub assignments: Vec<Assignment>,
}

/// The FK route that ties path entities to the TestCase entity.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorRoute {
    /// Entities joined before the path, starting with TestCase. Each entry
    /// after the first carries the relationship joining it to its predecessor.
    pub joins: Vec<(Ident, Option<usize>)>,
    /// Path position where the route meets the path.
    pub attach: usize,
    /// Relationship joining the last anchor to the attach step.
    pub attach_relationship: Option<usize>,
}

pub const TEST_CASE_ENTITY: &str = "TestCase";
pub const TEST_CASE_KEY: &str = "tc_id";
pub const UI_PREFIX: &str = "UI_";

impl IdmSchema {
    pub fn entity(&self, name: &Ident) -> Option<&EntityDef> {
        self.entities.iter().find(|e| &e.name == name)
    }

    pub fn entity_by_str(&self, name: &str) -> Option<&EntityDef> {
        self.entities.iter().find(|e| e.name.eq_str(name))
    }

    pub fn assignment(&self, name: &Ident) -> Option<&Assignment> {
        self.assignments.iter().find(|a| &a.name == name)
    }

    pub fn level_of(&self, name: &Ident) -> Option<Level> {
        self.entity(name).map(|e| e.level)
    }

    /// Declared-FK relationships connecting `a` and `b` in either direction.
    pub fn fk_between(&self, a: &Ident, b: &Ident) -> Vec<usize> {
        self.relationships
            .iter()
            .enumerate()
            .filter(|(_, r)| r.declared_as_fk && r.connects(a, b))
            .map(|(i, _)| i)
            .collect()
    }

    fn is_anchor_level(&self, e: &Ident) -> bool {
        matches!(self.level_of(e), Some(Level::Ui) | Some(Level::TestCase))
    }

    /// Relationships usable for anchoring: declared FKs, not output links,
    /// both ends at the TestCase or UI level.
    pub fn anchor_edges(&self) -> impl Iterator<Item = (usize, &RelationshipDef)> {
        self.relationships.iter().enumerate().filter(move |(_, r)| {
            r.declared_as_fk
                && !r.output
                && self.is_anchor_level(&r.from_entity)
                && self.is_anchor_level(&r.to_entity)
        })
    }

    /// UI entities that reference no other UI entity through an anchoring FK.
    pub fn ui_roots(&self) -> Vec<&EntityDef> {
        self.entities
            .iter()
            .filter(|e| e.level == Level::Ui)
            .filter(|e| {
                !self.anchor_edges().any(|(_, r)| {
                    r.from_entity == e.name && self.level_of(&r.to_entity) == Some(Level::Ui)
                })
            })
            .collect()
    }

    /// UI entities belonging to an assignment: its root and every UI entity
    /// hanging off it through anchoring FKs.
    pub fn assignment_entities(&self, root: &Ident) -> Vec<Ident> {
        let mut seen = vec![root.clone()];
        let mut queue = VecDeque::from([root.clone()]);
        while let Some(e) = queue.pop_front() {
            for (_, r) in self.anchor_edges() {
                if r.to_entity == e && self.level_of(&r.from_entity) == Some(Level::Ui) && !seen.contains(&r.from_entity) {
                    seen.push(r.from_entity.clone());
                    queue.push_back(r.from_entity.clone());
                }
            }
        }
        seen
    }

    /// Number of simple anchoring routes from `from` to TestCase.
    pub fn anchor_route_count(&self, from: &Ident) -> usize {
        fn dfs(s: &IdmSchema, at: &Ident, target: &Ident, visited: &mut BTreeSet<Ident>) -> usize {
            if at == target {
                return 1;
            }
            let mut n = 0;
            for (_, r) in s.anchor_edges() {
                if &r.from_entity == at || &r.to_entity == at {
                    let next = r.other_end(at).clone();
                    if visited.insert(next.clone()) {
                        n += dfs(s, &next, target, visited);
                        visited.remove(&next);
                    }
                }
            }
            n
        }
        let target = Ident::new(TEST_CASE_ENTITY);
        let mut visited = BTreeSet::from([from.clone()]);
        dfs(self, from, &target, &mut visited)
    }

    /// Route from TestCase to the nearest UI entity among `steps`.
    ///
    /// Returns `Ok(None)` when the steps involve neither the UI nor the
    /// TestCase level. Ties on distance go to the earliest path position.
    pub fn anchor_route(&self, steps: &[Ident]) -> Result<Option<AnchorRoute>, Ident> {
        if let Some(i) = steps.iter().position(|s| s.eq_str(TEST_CASE_ENTITY)) {
            return Ok(Some(AnchorRoute { joins: vec![], attach: i, attach_relationship: None }));
        }
        let ui_steps: Vec<usize> = (0..steps.len())
            .filter(|&i| self.level_of(&steps[i]) == Some(Level::Ui))
            .collect();
        if ui_steps.is_empty() {
            return Ok(None);
        }
        let tc = Ident::new(TEST_CASE_ENTITY);
        // BFS over anchoring edges; parent[e] = (predecessor, relationship)
        let mut order: Vec<Ident> = vec![tc.clone()];
        let mut parent: Vec<(Option<usize>, Option<usize>)> = vec![(None, None)];
        let mut dist: Vec<usize> = vec![0];
        let mut head = 0;
        while head < order.len() {
            let cur = order[head].clone();
            for (ri, r) in self.anchor_edges() {
                if r.from_entity != cur && r.to_entity != cur {
                    continue;
                }
                let next = r.other_end(&cur).clone();
                if !order.contains(&next) {
                    order.push(next);
                    parent.push((Some(head), Some(ri)));
                    dist.push(dist[head] + 1);
                }
            }
            head += 1;
        }
        let best = ui_steps
            .iter()
            .filter_map(|&i| order.iter().position(|e| e == &steps[i]).map(|node| (dist[node], i, node)))
            .min_by_key(|&(d, i, _)| (d, i));
        let Some((_, attach, node)) = best else {
            return Err(steps[ui_steps[0]].clone());
        };
        let mut chain = Vec::new();
        let mut at = node;
        let attach_relationship = parent[node].1;
        while let (Some(p), _) = parent[at] {
            chain.push((order[p].clone(), parent[p].1));
            at = p;
        }
        chain.reverse();
        Ok(Some(AnchorRoute { joins: chain, attach, attach_relationship }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::idm::parse_schema;

    fn fixture() -> IdmSchema {
        parse_schema(include_str!("../../../../fixtures/neworder/schema.idm")).unwrap()
    }

    #[test]
    fn route_from_testcase_to_order_line_goes_through_order() {
        let s = fixture();
        let steps = vec![Ident::new("UI_OrderLine"), Ident::new("Stock"), Ident::new("Item")];
        let route = s.anchor_route(&steps).unwrap().unwrap();
        let names: Vec<_> = route.joins.iter().map(|(e, _)| e.to_string()).collect();
        assert_eq!(names, ["TestCase", "UI_Order"]);
        assert_eq!(route.attach, 0);
    }

    #[test]
    fn route_attaches_to_nearest_ui_step() {
        let s = fixture();
        let steps = vec![Ident::new("UI_OrderLine"), Ident::new("UI_Order"), Ident::new("Order")];
        let route = s.anchor_route(&steps).unwrap().unwrap();
        assert_eq!(route.attach, 1);
        assert_eq!(route.joins.len(), 1);
    }

    #[test]
    fn database_only_path_has_no_route() {
        let s = fixture();
        assert_eq!(s.anchor_route(&[Ident::new("Stock")]).unwrap(), None);
    }

    #[test]
    fn roots_and_assignment_members() {
        let s = fixture();
        let roots: Vec<_> = s.ui_roots().iter().map(|e| e.name.to_string()).collect();
        assert_eq!(roots, ["UI_Order"]);
        let members = s.assignment_entities(&Ident::new("UI_Order"));
        assert_eq!(members, vec![Ident::new("UI_Order"), Ident::new("UI_OrderLine")]);
        assert_eq!(s.anchor_route_count(&Ident::new("UI_Order")), 1);
    }
}
