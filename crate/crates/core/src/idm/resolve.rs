use super::model::{AttrKind, IdmSchema};
use crate::ident::Ident;

/// An attribute reference relative to a path: `A` or `R.A`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttrName {
    pub entity: Option<Ident>,
    pub attr: Ident,
}

impl AttrName {
    pub fn bare(attr: impl Into<Ident>) -> Self {
        AttrName { entity: None, attr: attr.into() }
    }

    pub fn qualified(entity: impl Into<Ident>, attr: impl Into<Ident>) -> Self {
        AttrName { entity: Some(entity.into()), attr: attr.into() }
    }
}

/// A path attribute bound to one position of the path.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedAttr {
    pub step: usize,
    pub entity: Ident,
    pub attribute: Ident,
    pub kind: AttrKind,
    pub nullable: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ResolveError {
    #[error("attribute {attr} is ambiguous on the path; qualify it with one of: {}", candidates.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(", "))]
    Ambiguous { attr: Ident, candidates: Vec<Ident> },
    #[error("unknown attribute {0}")]
    UnknownAttribute(String),
    #[error("entity {0} is not on the path")]
    EntityNotOnPath(Ident),
}

/// Resolves `A` (must occur in exactly one path entity) or `R.A` (R must be
/// on the path) against the entities of a path.
pub fn resolve_attribute(schema: &IdmSchema, steps: &[Ident], name: &AttrName) -> Result<ResolvedAttr, ResolveError> {
    let candidates: Vec<usize> = match &name.entity {
        Some(r) => {
            let at: Vec<usize> = (0..steps.len()).filter(|&i| &steps[i] == r).collect();
            if at.is_empty() {
                return Err(ResolveError::EntityNotOnPath(r.clone()));
            }
            at
        }
        None => (0..steps.len()).collect(),
    };
    let hits: Vec<usize> = candidates
        .into_iter()
        .filter(|&i| schema.entity(&steps[i]).and_then(|e| e.attribute(&name.attr)).is_some())
        .collect();
    match hits.as_slice() {
        [] => Err(ResolveError::UnknownAttribute(match &name.entity {
            Some(r) => format!("{r}.{}", name.attr),
            None => name.attr.to_string(),
        })),
        [i] => {
            let e = schema.entity(&steps[*i]).expect("checked above");
            let a = e.attribute(&name.attr).expect("checked above");
            Ok(ResolvedAttr { step: *i, entity: e.name.clone(), attribute: a.name.clone(), kind: a.kind, nullable: a.nullable })
        }
        many => Err(ResolveError::Ambiguous {
            attr: name.attr.clone(),
            candidates: many.iter().map(|&i| steps[i].clone()).collect(),
        }),
    }
}
