use super::*;
use crate::idm::parse_schema;
use crate::rules::{load_rules, BoolExpr, Condition};

fn fixture() -> IdmSchema {
    parse_schema(include_str!("../../../../fixtures/neworder/schema.idm")).unwrap()
}

fn rule(src: &str) -> BusinessRule {
    load_rules(&format!("assignment NewOrder\n{src}"), &fixture()).unwrap().remove(0)
}

fn context(src: &str) -> ContextQuery {
    compile_context(&rule(src), &fixture()).unwrap()
}

const BRAND: &str = "Path P2 is UI_OrderLine[]Stock[]Item\n\
    If P2.i_data is like '%ORIGINAL%' and P2.s_data is like '%ORIGINAL%' then P2.o_brand = 'B'";

#[test]
fn brand_context_joins_anchor_then_path() {
    let c = context(BRAND);
    assert_eq!(c.attach, Some(0));
    assert_eq!(c.order, vec![0, 1, 2]);
    assert_eq!(
        c.base_select().to_string(),
        "SELECT *\n\
         FROM TestCase\n\
         INNER JOIN UI_Order ON (TestCase.tc_id = UI_Order.o_tc_id)\n\
         INNER JOIN UI_OrderLine ON (UI_Order.o_tc_id = UI_OrderLine.ol_tc_id AND UI_Order.o_ui_id = UI_OrderLine.ol_ui_id)\n\
         INNER JOIN Stock ON (UI_OrderLine.ol_i_id = Stock.s_i_id AND UI_OrderLine.ol_supply_w_id = Stock.s_w_id)\n\
         INNER JOIN Item ON (Stock.s_i_id = Item.i_id)"
    );
}

#[test]
fn violating_a_predicate_drops_the_far_side() {
    let c = context(BRAND);
    let shape = Shape { violate: Some(0), atoms: vec![(0, AtomForm::True), (1, AtomForm::True)], nulls: vec![] };
    let q = variant_select(&c, &shape);
    assert!(q.tables().all(|t| t.alias != "Item"));
    assert_eq!(q.joins.last().unwrap().kind, JoinKind::Left);
    assert_eq!(q.filter.last().unwrap().to_string(), "Stock.s_w_id IS NULL");
}

#[test]
fn false_form_guards_nullable_operand() {
    let c = context(BRAND);
    assert_eq!(c.atoms[0].true_form.to_string(), "Item.i_data LIKE '%ORIGINAL%'");
    assert_eq!(c.atoms[0].false_form.to_string(), "Item.i_data IS NOT NULL AND NOT (Item.i_data LIKE '%ORIGINAL%')");
    assert_eq!(c.atoms[0].null_forms[0].1.to_string(), "Item.i_data IS NULL");
}

#[test]
fn database_only_path_has_no_anchor() {
    let c = context("Path P is Stock[]Item\nEach P.s_quantity must be at least 10");
    assert!(c.anchors.is_empty());
    assert_eq!(c.attach, None);
    assert_eq!(c.base_select().from.alias, "Stock");
    let v = variant_select(&c, &Shape { violate: Some(0), ..Default::default() });
    assert_eq!(v.to_string(), "SELECT *\nFROM Stock\nLEFT JOIN Item ON (Stock.s_i_id = Item.i_id)\nWHERE Item.i_id IS NULL");
}

#[test]
fn single_entity_rule_is_anchored() {
    let c = context("Each UI_OrderLine.ol_quantity must be at least 1 and at most 10");
    assert_eq!(c.anchors.len(), 2);
    assert_eq!(c.atoms.len(), 2);
    assert!(c.predicates.is_empty());
}

#[test]
fn value_condition_range_form() {
    let r = rule("Each UI_OrderLine.ol_quantity must be at least 1 and at most 10");
    let c = compile_context(&r, &fixture()).unwrap();
    let BoolExpr::Cond(Condition::Value(v)) = &r.condition else { panic!() };
    let sql = compile_value_condition(v, &c);
    assert_eq!(sql.true_form.to_string(), "UI_OrderLine.ol_quantity >= 1 AND UI_OrderLine.ol_quantity <= 10");
    assert_eq!(
        sql.false_form.to_string(),
        "UI_OrderLine.ol_quantity IS NOT NULL AND NOT (UI_OrderLine.ol_quantity >= 1 AND UI_OrderLine.ol_quantity <= 10)"
    );
    assert_eq!(sql.null_forms.len(), 1);
}

#[test]
fn quantification_counts_with_left_join() {
    let r = rule("Path P1 is UI_Order[]UI_OrderLine\nEach P1.UI_Order must have at least 5 and at most 15 P1.UI_OrderLine");
    let c = compile_context(&r, &fixture()).unwrap();
    assert_eq!(c.quantified, Some((0, 1)));
    let BoolExpr::Cond(Condition::Quant(q)) = &r.condition else { panic!() };
    let s = compile_quantification(q, &c);
    assert_eq!(s.joins.last().unwrap().kind, JoinKind::Left);
    let having: Vec<String> = s.having.iter().map(|h| h.to_string()).collect();
    assert_eq!(having, ["COUNT(UI_OrderLine.ol_tc_id) >= 5", "COUNT(UI_OrderLine.ol_tc_id) <= 15"]);
    assert_eq!(s.group_by.len(), 3);
}

#[test]
fn frame_groups_on_frame_attributes() {
    let c = context(
        "Path P3 is UI_OrderLine[]UI_Order[]Order\nFrame G is P3///o_tc_id, o_ui_id\n\
         If each G.ol_supply_w_id is exactly G.o_w_id then G.o_all_local = 1",
    );
    assert_eq!(c.attach, Some(1));
    assert_eq!(c.order, vec![1, 0, 2]);
    let f = compile_frame_universal(&c);
    let groups: Vec<String> = f.all_satisfy.group_by.iter().map(|g| g.to_string()).collect();
    assert_eq!(groups, ["UI_Order.o_tc_id", "UI_Order.o_ui_id"]);
    assert_eq!(
        f.all_satisfy.having[0].to_string(),
        "SUM(CASE WHEN UI_OrderLine.ol_supply_w_id = UI_Order.o_w_id THEN 0 ELSE 1 END) = 0"
    );
    assert_eq!(
        f.some_violate.having[0].to_string(),
        "SUM(CASE WHEN UI_OrderLine.ol_supply_w_id = UI_Order.o_w_id THEN 0 ELSE 1 END) >= 1"
    );
}

#[test]
fn repeated_entity_gets_suffixed_alias() {
    let c = context(
"Path P is Stock[]Item[]Stock\nEach P.i_price must be at least 1",
    );
    let aliases: Vec<&str> = c.steps.iter().map(|t| t.alias.as_str()).collect();
    assert_eq!(aliases, ["Stock", "Item", "Stock2"]);
    assert!(c.base_select().to_string().contains("INNER JOIN Stock AS Stock2 ON (Item.i_id = Stock2.s_i_id)"));
}

#[test]
fn counting_before_the_anchor_is_rejected() {
    let r = rule("Path P is Stock[]UI_OrderLine\nEach P.Stock must have at most 3 P.UI_OrderLine");
    assert!(matches!(compile_context(&r, &fixture()), Err(CompileError::AnchorInsideCount { .. })));
}
