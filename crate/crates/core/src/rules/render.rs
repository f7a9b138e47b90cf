//! Canonical text of parsed rule files; reparses to the same tree.

use std::fmt::{self, Write as _};

use super::ast::*;
use crate::value::ArithOp;

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Bin(ArithOp::Add | ArithOp::Sub, ..) => 1,
        Expr::Bin(..) => 2,
        _ => 3,
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Lit(v) => f.write_str(&v.to_sql()),
            Expr::Ref(r) => f.write_str(&r.text()),
            Expr::Neg(e) if precedence(e) < 3 || matches!(**e, Expr::Neg(_)) => write!(f, "-({e})"),
            Expr::Neg(e) => write!(f, "-{e}"),
            Expr::Bin(op, a, b) => {
                let p = precedence(self);
                if precedence(a) < p {
                    write!(f, "({a})")?;
                } else {
                    write!(f, "{a}")?;
                }
                write!(f, " {} ", op.symbol())?;
                if precedence(b) <= p {
                    write!(f, "({b})")
                } else {
                    write!(f, "{b}")
                }
            }
        }
    }
}

fn write_cond(out: &mut String, c: &CondDecl, form: RuleForm) {
    if c.each {
        out.push_str("each ");
    }
    out.push_str(&c.subject.text());
    let verb = match (form, c.is_quantification()) {
        (RuleForm::Constraint, false) => "must be",
        (RuleForm::Constraint, true) => "must have",
        (RuleForm::Derivation, false) => "is",
        (RuleForm::Derivation, true) => "has",
    };
    let _ = write!(out, " {verb} {} {}", c.comparator.phrase(), c.bound_p);
    if let Some(q) = &c.bound_q {
        let _ = write!(out, " and at most {q}");
    }
    if let Some(o) = &c.object {
        let _ = write!(out, " {}", o.text());
    }
}

fn write_expr(out: &mut String, e: &CondExpr, form: RuleForm, parent_and: bool) {
    match e {
        CondExpr::Cond(c) => write_cond(out, c, form),
        CondExpr::And(v) => {
            for (i, x) in v.iter().enumerate() {
                if i > 0 {
                    out.push_str(" and ");
                }
                write_expr(out, x, form, true);
            }
        }
        CondExpr::Or(v) => {
            if parent_and {
                out.push('(');
            }
            for (i, x) in v.iter().enumerate() {
                if i > 0 {
                    out.push_str(" or ");
                }
                write_expr(out, x, form, false);
            }
            if parent_and {
                out.push(')');
            }
        }
    }
}

impl fmt::Display for RuleDecl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        if let Some(n) = &self.name {
            let _ = write!(out, "rule {n}: ");
        }
        match self.form {
            RuleForm::Constraint => {
                out.push_str("Each ");
                write_expr(&mut out, &self.condition, self.form, false);
            }
            RuleForm::Derivation => {
                out.push_str("If ");
                write_expr(&mut out, &self.condition, self.form, false);
                out.push_str(" then ");
                let actions: Vec<String> = self.actions.iter().map(|a| format!("{} = {}", a.target.text(), a.value)).collect();
                out.push_str(&actions.join(", "));
            }
        }
        f.write_str(&out)
    }
}

impl fmt::Display for PathDecl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Path {} is {}", self.name, self.steps[0].0)?;
        for (pred, (step, _)) in self.predicates.iter().zip(&self.steps[1..]) {
            f.write_str("[")?;
            if let Some(conjuncts) = pred {
                let parts: Vec<String> = conjuncts.iter().map(|c| format!("{} = {}", c.left, c.right)).collect();
                f.write_str(&parts.join(" and "))?;
            }
            write!(f, "]{step}")?;
        }
        Ok(())
    }
}

impl fmt::Display for FrameDecl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let group: Vec<String> = self.group.iter().map(|g| g.text()).collect();
        write!(f, "Frame {} is {} // {}", self.name, self.path, group.join(", "))
    }
}

impl fmt::Display for RuleFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(a) = &self.assignment {
            writeln!(f, "assignment {a}")?;
        }
        for p in &self.paths {
            writeln!(f, "{p}")?;
        }
        for g in &self.frames {
            writeln!(f, "{g}")?;
        }
        for r in &self.rules {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_rules;
    use super::*;
    use crate::ident::Ident;
    use crate::lex::Span;
    use crate::value::Value;
    use proptest::prelude::*;

    fn strip(file: &mut RuleFile) {
        fn strip_ref(r: &mut RefPath) {
            r.span = Span::default();
        }
        fn strip_expr(e: &mut Expr) {
            match e {
                Expr::Ref(r) => strip_ref(r),
                Expr::Neg(x) => strip_expr(x),
                Expr::Bin(_, a, b) => {
                    strip_expr(a);
                    strip_expr(b);
                }
                Expr::Lit(_) => {}
            }
        }
        fn strip_cond(e: &mut CondExpr) {
            match e {
                CondExpr::Cond(c) => {
                    c.span = Span::default();
                    strip_ref(&mut c.subject);
                    strip_expr(&mut c.bound_p);
                    c.bound_q.iter_mut().for_each(strip_expr);
                    c.object.iter_mut().for_each(strip_ref);
                }
                CondExpr::And(v) | CondExpr::Or(v) => v.iter_mut().for_each(strip_cond),
            }
        }
        for p in &mut file.paths {
            p.span = Span::default();
            p.steps.iter_mut().for_each(|s| s.1 = Span::default());
            for c in p.predicates.iter_mut().flatten().flatten() {
                strip_expr(&mut c.left);
                strip_expr(&mut c.right);
            }
        }
        for g in &mut file.frames {
            g.span = Span::default();
            g.group.iter_mut().for_each(strip_ref);
        }
        for r in &mut file.rules {
            r.span = Span::default();
            strip_cond(&mut r.condition);
            for a in &mut r.actions {
                strip_ref(&mut a.target);
                strip_expr(&mut a.value);
            }
        }
    }

    fn round_trip(src: &str) {
        let mut first = parse_rules(src).unwrap();
        let text = first.to_string();
        let mut second = parse_rules(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
        strip(&mut first);
        strip(&mut second);
        assert_eq!(first, second, "{text}");
    }

    #[test]
    fn examples_round_trip() {
        round_trip(include_str!("../../../../fixtures/neworder/rules/neworder.rules"));
        round_trip("Path P is A[a = 1 and B.b = -2.5]B\nIf (P.x is exactly 1 or P.y is like 'a''b') and P.z is different to (P.x - 1) * 2 then P.w = -(-1)");
    }

    fn ident() -> impl Strategy<Value = Ident> {
        prop::sample::select(vec!["P", "Q", "A", "B", "x", "y_1", "UI_Order", "ol_qty"]).prop_map(Ident::new)
    }

    fn reference() -> impl Strategy<Value = RefPath> {
        prop::collection::vec(ident(), 1..4).prop_map(|parts| RefPath { parts, span: Span::default() })
    }

    fn literal() -> impl Strategy<Value = Value> {
        prop_oneof![
            (0i64..1000).prop_map(Value::Integer),
            (0u32..400).prop_map(|n| Value::Real(f64::from(n) / 4.0 + 0.25)),
            "[a-z%' _]{0,6}".prop_map(Value::Text),
        ]
    }

    fn expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![literal().prop_map(Expr::Lit), reference().prop_map(Expr::Ref)];
        leaf.prop_recursive(3, 12, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                (
                    prop::sample::select(vec![ArithOp::Add, ArithOp::Sub, ArithOp::Mul, ArithOp::Div]),
                    inner.clone(),
                    inner
                )
                    .prop_map(|(op, a, b)| Expr::Bin(op, Box::new(a), Box::new(b))),
            ]
        })
    }

    fn cond() -> impl Strategy<Value = CondDecl> {
        (
            any::<bool>(),
            reference(),
            prop::sample::select(vec![
                Comparator::AtLeast,
                Comparator::AtMost,
                Comparator::Exactly,
                Comparator::DifferentTo,
                Comparator::Like,
                Comparator::Range,
            ]),
            expr(),
            expr(),
            prop::option::of(reference()),
        )
            .prop_map(|(each, subject, comparator, p, q, object)| {
                let comparator = if object.is_some() && comparator == Comparator::Like { Comparator::Exactly } else { comparator };
                CondDecl {
                    each,
                    subject,
                    comparator,
                    bound_p: p,
                    bound_q: (comparator == Comparator::Range).then_some(q),
                    object,
                    span: Span::default(),
                }
            })
    }

    fn cond_expr() -> impl Strategy<Value = CondExpr> {
        cond().prop_map(CondExpr::Cond).prop_recursive(2, 8, 3, |inner| {
            prop_oneof![
                prop::collection::vec(inner.clone(), 2..4).prop_map(|v| {
                    CondExpr::And(v.into_iter().flat_map(|x| if let CondExpr::And(y) = x { y } else { vec![x] }).collect())
                }),
                prop::collection::vec(inner, 2..4).prop_map(|v| {
                    CondExpr::Or(v.into_iter().flat_map(|x| if let CondExpr::Or(y) = x { y } else { vec![x] }).collect())
                }),
            ]
        })
    }

    fn rule() -> impl Strategy<Value = RuleDecl> {
        (
            prop::option::of(ident()),
            any::<bool>(),
            cond_expr(),
            prop::collection::vec((reference(), expr()), 1..3),
        )
            .prop_map(|(name, derivation, mut condition, actions)| {
                let form = if derivation { RuleForm::Derivation } else { RuleForm::Constraint };
                // The leading `Each` of a constraint rule is the statement keyword.
                if form == RuleForm::Constraint {
                    let mut first = &mut condition;
                    loop {
                        match first {
                            CondExpr::Cond(c) => {
                                c.each = false;
                                break;
                            }
                            CondExpr::And(v) | CondExpr::Or(v) => first = &mut v[0],
                        }
                    }
                }
                let actions = if derivation {
                    actions.into_iter().map(|(target, value)| ActionDecl { target, value }).collect()
                } else {
                    vec![]
                };
                RuleDecl { name, form, condition, actions, span: Span::default() }
            })
    }

    fn path() -> impl Strategy<Value = PathDecl> {
        let leaf = || prop_oneof![literal().prop_map(Expr::Lit), reference().prop_map(Expr::Ref)];
        let conjunct = (leaf(), leaf()).prop_map(|(left, right)| PredConjunct { left, right });
        (
            prop::collection::vec(ident(), 1..4),
            prop::collection::vec(prop::option::of(prop::collection::vec(conjunct, 1..3)), 3),
        )
            .prop_map(|(steps, preds)| PathDecl {
                name: Ident::new("P"),
                predicates: preds.into_iter().take(steps.len() - 1).collect(),
                steps: steps.into_iter().map(|s| (s, Span::default())).collect(),
                span: Span::default(),
            })
    }

    proptest! {
        #[test]
        fn render_then_parse_is_identity(
            p in path(),
            group in prop::collection::vec(reference(), 1..3),
            rules in prop::collection::vec(rule(), 1..4),
        ) {
            let file = RuleFile {
                assignment: Some(Ident::new("A")),
                paths: vec![p],
                frames: vec![FrameDecl { name: Ident::new("G"), path: Ident::new("P"), group, span: Span::default() }],
                rules,
            };
            let text = file.to_string();
            let mut back = parse_rules(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
            strip(&mut back);
            prop_assert_eq!(back, file, "{}", text);
        }
    }
}
