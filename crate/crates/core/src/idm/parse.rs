use super::model::*;
use super::validate::validate_schema;
use super::SchemaError;
use crate::ident::Ident;
use crate::lex::{tokenize, Cursor, Span, Tok};

/// Parses and validates a schema definition.
pub fn parse_schema(source: &str) -> Result<IdmSchema, SchemaError> {
    let schema = parse_schema_unchecked(source)?;
    let diags = validate_schema(&schema);
    if diags.is_empty() {
        Ok(schema)
    } else {
        Err(SchemaError::Invalid(diags))
    }
}

/// Parses a schema definition without running the invariant checks.
pub fn parse_schema_unchecked(source: &str) -> Result<IdmSchema, SchemaError> {
    let mut cur = Cursor::new(tokenize(source)?);
    let mut schema = IdmSchema::default();
    let mut rels: Vec<(RelationshipDef, Span)> = Vec::new();
    while !cur.at_eof() {
        if cur.is_kw("entity") {
            let (entity, span) = parse_entity(&mut cur)?;
            if schema.entity(&entity.name).is_some() {
                return Err(SchemaError::DuplicateEntity { name: entity.name, span });
            }
            schema.entities.push(entity);
        } else if cur.is_kw("relationship") {
            let span = cur.span();
            rels.push((parse_relationship(&mut cur)?, span));
        } else if cur.eat_kw("assignment") {
            let (name, _) = cur.expect_ident("assignment name")?;
            cur.expect_kw("root")?;
            let (root, _) = cur.expect_ident("root UI entity")?;
            cur.eat_sym(";");
            schema.assignments.push(Assignment { name: name.into(), root: root.into() });
        } else {
            return Err(cur.error(&["`entity`", "`relationship`", "`assignment`"]).into());
        }
    }
    if schema.entities.is_empty() {
        return Err(SchemaError::NoEntities);
    }
    for (mut r, _) in rels {
        let lf = schema.level_of(&r.from_entity);
        let lt = schema.level_of(&r.to_entity);
        r.kind = match (lf, lt) {
            (Some(a), Some(b)) if a != b => RelationshipKind::InterLevel,
            _ => RelationshipKind::IntraLevel,
        };
        schema.relationships.push(r);
    }
    Ok(schema)
}

fn parse_entity(cur: &mut Cursor) -> Result<(EntityDef, Span), SchemaError> {
    let span = cur.expect_kw("entity")?;
    let (name, _) = cur.expect_ident("entity name")?;
    cur.expect_kw("level")?;
    let (level_text, level_span) = cur.expect_ident("level")?;
    let level = Level::parse(&level_text).ok_or(SchemaError::UnknownLevel { level: level_text, span: level_span })?;
    cur.expect_sym("{")?;
    let mut attributes = Vec::new();
    let mut primary_key = Vec::new();
    loop {
        if cur.eat_sym("}") {
            break;
        }
        if cur.is_kw("key") && matches!(cur.peek_at(1), Tok::Sym("(")) {
            cur.bump();
            primary_key = ident_list(cur)?;
            cur.eat_sym(";");
            continue;
        }
        let (attr, _) = cur.expect_ident("attribute name, `key` or `}`")?;
        cur.expect_sym(":")?;
        let kind = parse_kind(cur)?;
        let mut nullable = false;
        let mut io_role = None;
        loop {
            if cur.eat_kw("null") {
                nullable = true;
            } else if cur.eat_kw("input") {
                io_role = Some(IoRole::Input);
            } else if cur.eat_kw("output") {
                io_role = Some(IoRole::Output);
            } else {
                break;
            }
        }
        let io_role = io_role.unwrap_or(if level == Level::Ui { IoRole::Input } else { IoRole::Stored });
        if !cur.is_sym("}") && !cur.eat_sym(";") {
            return Err(cur.error(&["`null`", "`input`", "`output`", "`;`"]).into());
        }
        attributes.push(AttributeDef { name: attr.into(), kind, nullable, io_role });
    }
    Ok((EntityDef { name: name.into(), level, attributes, primary_key }, span))
}

fn parse_kind(cur: &mut Cursor) -> Result<AttrKind, SchemaError> {
    let expected = ["`integer`", "`decimal`", "`text`", "`boolean`", "`datetime`"];
    let word = match &cur.peek().tok {
        Tok::Ident(s) => s.to_ascii_lowercase(),
        _ => return Err(cur.error(&expected).into()),
    };
    let kind = match word.as_str() {
        "integer" => AttrKind::Integer,
        "boolean" => AttrKind::Boolean,
        "datetime" => AttrKind::DateTime,
        "decimal" => {
            cur.bump();
            cur.expect_sym("(")?;
            let precision = cur.expect_int("precision")? as u32;
            cur.expect_sym(",")?;
            let scale = cur.expect_int("scale")? as u32;
            cur.expect_sym(")")?;
            return Ok(AttrKind::Decimal { precision, scale });
        }
        "text" => {
            cur.bump();
            cur.expect_sym("(")?;
            let max_len = cur.expect_int("maximum length")? as u32;
            cur.expect_sym(")")?;
            return Ok(AttrKind::Text { max_len });
        }
        _ => return Err(cur.error(&expected).into()),
    };
    cur.bump();
    Ok(kind)
}

fn ident_list(cur: &mut Cursor) -> Result<Vec<Ident>, SchemaError> {
    cur.expect_sym("(")?;
    let mut out = vec![Ident::new(cur.expect_ident("attribute name")?.0)];
    while cur.eat_sym(",") {
        out.push(Ident::new(cur.expect_ident("attribute name")?.0));
    }
    cur.expect_sym(")")?;
    Ok(out)
}

fn parse_relationship(cur: &mut Cursor) -> Result<RelationshipDef, SchemaError> {
    cur.expect_kw("relationship")?;
    let (name, _) = cur.expect_ident("relationship name")?;
    let mut declared_as_fk = false;
    let mut output = false;
    loop {
        if cur.eat_kw("fk") {
            declared_as_fk = true;
        } else if cur.eat_kw("output") {
            output = true;
        } else {
            break;
        }
    }
    if !cur.eat_kw("from") {
        return Err(cur.error(&["`fk`", "`output`", "`from`"]).into());
    }
    let (from, _) = cur.expect_ident("entity name")?;
    let from_attrs = ident_list(cur)?;
    cur.expect_kw("to")?;
    let (to, _) = cur.expect_ident("entity name")?;
    let to_attrs = ident_list(cur)?;
    cur.eat_sym(";");
    if from_attrs.len() != to_attrs.len() {
        return Err(SchemaError::Syntax(crate::lex::SyntaxError::Unexpected {
            span: cur.span(),
            expected: vec![format!("{} attributes on the `to` side", from_attrs.len())],
            found: format!("{}", to_attrs.len()),
        }));
    }
    Ok(RelationshipDef {
        name: name.into(),
        kind: RelationshipKind::IntraLevel,
        from_entity: from.into(),
        to_entity: to.into(),
        join_pairs: from_attrs.into_iter().zip(to_attrs).collect(),
        declared_as_fk,
        output,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::idm::Invariant;

    const FIXTURE: &str = include_str!("../../../../fixtures/neworder/schema.idm");

    #[test]
    fn parses_new_order_fixture() {
        let s = parse_schema(FIXTURE).unwrap();
        assert_eq!(s.entities.len(), 7);
        let inter: Vec<_> = s
            .relationships
            .iter()
            .filter(|r| r.kind == RelationshipKind::InterLevel)
            .map(|r| (r.from_entity.to_string(), r.to_entity.to_string()))
            .collect();
        assert_eq!(
            inter,
            [
                ("UI_Order".to_string(), "TestCase".to_string()),
                ("UI_Order".to_string(), "Customer".to_string()),
                ("UI_Order".to_string(), "Order".to_string()),
                ("UI_OrderLine".to_string(), "Stock".to_string()),
            ]
        );
        let ol = s.entity_by_str("ui_orderline").unwrap();
        assert_eq!(ol.level, Level::Ui);
        assert_eq!(ol.attribute(&"o_brand".into()).unwrap().io_role, IoRole::Output);
        assert!(s.relationships.iter().any(|r| r.output && r.to_entity.eq_str("order")));
    }

    #[test]
    fn empty_text_has_no_entities() {
        assert_eq!(parse_schema(""), Err(SchemaError::NoEntities));
        assert_eq!(parse_schema("-- only a comment\n"), Err(SchemaError::NoEntities));
    }

    #[test]
    fn ui_entity_without_prefix_fails_validation() {
        let src = FIXTURE.replace("UI_OrderLine", "OrderLine");
        match parse_schema(&src) {
            Err(SchemaError::Invalid(d)) => {
                assert!(d.iter().any(|d| d.invariant == Invariant::UiPrefix && d.element == "OrderLine"))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_position_and_expectations() {
        let err = parse_schema("entity A level Database {\n  x integer;\n}").unwrap_err();
        match err {
            SchemaError::Syntax(crate::lex::SyntaxError::Unexpected { span, expected, .. }) => {
                assert_eq!(span, Span { line: 2, column: 5 });
                assert_eq!(expected, ["`:`"]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_entity_and_unknown_level() {
        let src = "entity A level Database { x : integer; key(x) }\nentity a level Database { y : integer; key(y) }";
        assert!(matches!(parse_schema(src), Err(SchemaError::DuplicateEntity { .. })));
        let src = "entity A level Screen { x : integer; key(x) }";
        assert!(matches!(parse_schema(src), Err(SchemaError::UnknownLevel { .. })));
    }
}
