use super::model::*;
use super::SchemaError;
use crate::ident::{quote_ident, Ident};

/// Emits one `CREATE TABLE` per entity, in foreign-key dependency order.
pub fn emit_ddl(schema: &IdmSchema) -> Result<String, SchemaError> {
    let order = dependency_order(schema)?;
    let mut out = String::new();
    for idx in order {
        out.push_str(&create_table(schema, &schema.entities[idx]));
        out.push('\n');
    }
    Ok(out)
}

/// Entity indices such that every FK target precedes its referencing
/// entity. Ties keep declaration order.
pub fn dependency_order(schema: &IdmSchema) -> Result<Vec<usize>, SchemaError> {
    let n = schema.entities.len();
    let index = |name: &Ident| schema.entities.iter().position(|e| &e.name == name);
    let mut deps: Vec<Vec<usize>> = vec![Vec::new(); n];
    for r in schema.relationships.iter().filter(|r| r.declared_as_fk) {
        if let (Some(a), Some(b)) = (index(&r.from_entity), index(&r.to_entity)) {
            if a != b && !deps[a].contains(&b) {
                deps[a].push(b);
            }
        }
    }
    let mut done = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let next = (0..n).find(|&i| !done[i] && deps[i].iter().all(|&d| done[d]));
        match next {
            Some(i) => {
                done[i] = true;
                order.push(i);
            }
            None => return Err(SchemaError::FkCycle(find_cycle(schema, &deps, &done))),
        }
    }
    Ok(order)
}

fn find_cycle(schema: &IdmSchema, deps: &[Vec<usize>], done: &[bool]) -> Vec<Ident> {
    // every remaining node has an undone dependency, so walking them must revisit a node
    let start = (0..deps.len()).find(|&i| !done[i]).unwrap_or(0);
    let mut path = vec![start];
    loop {
        let cur = *path.last().unwrap();
        let next = deps[cur].iter().copied().find(|&d| !done[d]).unwrap_or(start);
        if let Some(pos) = path.iter().position(|&p| p == next) {
            let mut cycle: Vec<Ident> = path[pos..].iter().map(|&i| schema.entities[i].name.clone()).collect();
            cycle.push(schema.entities[next].name.clone());
            return cycle;
        }
        path.push(next);
    }
}

fn create_table(schema: &IdmSchema, e: &EntityDef) -> String {
    let mut parts: Vec<String> = e
        .attributes
        .iter()
        .map(|a| {
            let mut col = format!("{} {}", quote_ident(a.name.as_str()), a.kind.sql_type());
            if !a.nullable {
                col.push_str(" NOT NULL");
            }
            col
        })
        .collect();
    if !e.primary_key.is_empty() {
        parts.push(format!("PRIMARY KEY ({})", cols(&e.primary_key)));
    }
    for r in schema.relationships.iter().filter(|r| r.declared_as_fk && r.from_entity == e.name) {
        let Some(target) = schema.entity(&r.to_entity) else { continue };
        // list pairs in the order of the referenced key
        let mut pairs = r.join_pairs.clone();
        pairs.sort_by_key(|(_, t)| target.primary_key.iter().position(|k| k == t).unwrap_or(usize::MAX));
        let (local, remote): (Vec<Ident>, Vec<Ident>) = pairs.into_iter().unzip();
        parts.push(format!(
            "FOREIGN KEY ({}) REFERENCES {} ({})",
            cols(&local),
            quote_ident(target.name.as_str()),
            cols(&remote)
        ));
    }
    format!("CREATE TABLE {} ({});", quote_ident(e.name.as_str()), parts.join(", "))
}

fn cols(names: &[Ident]) -> String {
    names.iter().map(|n| quote_ident(n.as_str())).collect::<Vec<_>>().join(", ")
}
