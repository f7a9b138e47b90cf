use std::collections::HashSet;

use super::ast::*;
use super::bound::*;
use super::RuleError;
use crate::idm::{resolve_attribute, AttrName, IdmSchema, ResolveError, ResolvedAttr, TypeClass};
use crate::ident::Ident;
use crate::lex::Span;
use crate::value::{ArithOp, Value};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BindError {
    #[error("unknown entity {0}")]
    UnknownEntity(Ident),
    #[error("unknown path {0}")]
    UnknownPath(Ident),
    #[error("{0} is not a path, frame or entity")]
    UnknownContext(String),
    #[error("reference {0} must be qualified by a path, frame or entity")]
    Unqualified(String),
    #[error(transparent)]
    Resolve(#[from] ResolveError),
    #[error("no foreign key connects {left} and {right}; write the join predicate explicitly")]
    MissingFk { left: Ident, right: Ident },
    #[error("{count} foreign keys connect {left} and {right}; write the join predicate explicitly")]
    AmbiguousFk { left: Ident, right: Ident, count: usize },
    #[error("conditions of one rule refer to different contexts {first} and {second}")]
    MixedContexts { first: Ident, second: Ident },
    #[error("a rule cannot mix value and quantification conditions")]
    MixedKinds,
    #[error("{0}")]
    Form(String),
    #[error("{0}")]
    Type(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("count bound {0} must be an integer >= 0")]
    CountBound(String),
    #[error("rule {0} is declared twice")]
    DuplicateRule(Ident),
}

fn err(span: Span, error: impl Into<BindError>) -> RuleError {
    RuleError::Bind { span, error: error.into() }
}

/// Binds parsed declarations against `schema`. Rules without a name are
/// called `R1`, `R2`, ... by position.
pub fn bind_rules(file: &RuleFile, schema: &IdmSchema) -> Result<Vec<BusinessRule>, RuleError> {
    let paths = file.paths.iter().map(|p| bind_path(p, schema)).collect::<Result<Vec<_>, _>>()?;
    let frames = file.frames.iter().map(|f| bind_frame(f, &paths, schema)).collect::<Result<Vec<_>, _>>()?;
    let env = Env { schema, paths: &paths, frames: &frames };
    let mut names = HashSet::new();
    let mut out = Vec::new();
    for (k, decl) in file.rules.iter().enumerate() {
        let mut rule = env.bind_rule(decl, k)?;
        rule.assignment = file.assignment.clone();
        if !names.insert(rule.name.clone()) {
            return Err(err(decl.span, BindError::DuplicateRule(rule.name)));
        }
        out.push(rule);
    }
    Ok(out)
}

fn attr_ref(r: ResolvedAttr, offset: usize, written: String) -> AttrRef {
    AttrRef { step: r.step + offset, entity: r.entity, attribute: r.attribute, kind: r.kind, nullable: r.nullable, written }
}

fn attr_name(parts: &[Ident], whole: &RefPath) -> Result<AttrName, RuleError> {
    match parts {
        [a] => Ok(AttrName::bare(a.clone())),
        [r, a] => Ok(AttrName::qualified(r.clone(), a.clone())),
        _ => Err(err(whole.span, BindError::Type(format!("{} is not an attribute reference", whole.text())))),
    }
}

fn compatible(a: TypeClass, b: TypeClass) -> bool {
    a == b || matches!((a, b), (TypeClass::DateTime, TypeClass::Text) | (TypeClass::Text, TypeClass::DateTime))
}

fn literal_class(v: &Value) -> TypeClass {
    match v {
        Value::Text(_) => TypeClass::Text,
        _ => TypeClass::Numeric,
    }
}

fn bind_path(p: &PathDecl, schema: &IdmSchema) -> Result<PathExpr, RuleError> {
    let mut steps = Vec::new();
    for (name, span) in &p.steps {
        let e = schema.entity(name).ok_or_else(|| err(*span, BindError::UnknownEntity(name.clone())))?;
        steps.push(e.name.clone());
    }
    let mut predicates = Vec::new();
    for (i, pred) in p.predicates.iter().enumerate() {
        let (left, right) = (&steps[i], &steps[i + 1]);
        let span = p.steps[i + 1].1;
        let bound = match pred {
            None => {
                let fks = schema.fk_between(left, right);
                let ri = match fks.as_slice() {
                    [ri] => *ri,
                    [] => return Err(err(span, BindError::MissingFk { left: left.clone(), right: right.clone() })),
                    many => {
                        return Err(err(
                            span,
                            BindError::AmbiguousFk { left: left.clone(), right: right.clone(), count: many.len() },
                        ))
                    }
                };
                let conjuncts = schema.relationships[ri]
                    .pairs_oriented(left)
                    .into_iter()
                    .map(|(a, b)| {
                        let side = |step: usize, attr: Ident| {
                            let e = schema.entity(&steps[step]).expect("bound above");
                            let d = e.attribute(&attr).expect("validated schema");
                            JoinOperand::Attr(AttrRef {
                                step,
                                entity: e.name.clone(),
                                attribute: d.name.clone(),
                                kind: d.kind,
                                nullable: d.nullable,
                                written: format!("{}.{}", e.name, d.name),
                            })
                        };
                        JoinConjunct { left: side(i, a), right: side(i + 1, b) }
                    })
                    .collect();
                JoinPredicate { conjuncts, relationship: Some(ri) }
            }
            Some(conjuncts) => {
                let pair = &steps[i..=i + 1];
                let mut out = Vec::new();
                for c in conjuncts {
                    let operand = |e: &Expr| -> Result<JoinOperand, RuleError> {
                        match e {
                            Expr::Ref(r) => {
                                let name = attr_name(&r.parts, r)?;
                                let res = resolve_attribute(schema, pair, &name).map_err(|e| err(r.span, e))?;
                                Ok(JoinOperand::Attr(attr_ref(res, i, r.text())))
                            }
                            Expr::Lit(v) => Ok(JoinOperand::Const(v.clone())),
                            Expr::Neg(x) if matches!(**x, Expr::Lit(Value::Integer(_) | Value::Real(_))) => {
                                let Expr::Lit(v) = &**x else { unreachable!() };
                                Ok(JoinOperand::Const(Value::Integer(0).arith(ArithOp::Sub, v)))
                            }
                            _ => Err(err(span, BindError::Type("join predicate operands must be attributes or constants".into()))),
                        }
                    };
                    let (l, r) = (operand(&c.left)?, operand(&c.right)?);
                    let class = |o: &JoinOperand| match o {
                        JoinOperand::Attr(a) => a.kind.class(),
                        JoinOperand::Const(v) => literal_class(v),
                    };
                    if matches!((&l, &r), (JoinOperand::Const(_), JoinOperand::Const(_))) {
                        return Err(err(span, BindError::Type("a join predicate conjunct must reference an attribute".into())));
                    }
                    if !compatible(class(&l), class(&r)) {
                        return Err(err(span, BindError::Type(format!("{} = {} compares incompatible types", c.left, c.right))));
                    }
                    out.push(JoinConjunct { left: l, right: r });
                }
                JoinPredicate { conjuncts: out, relationship: None }
            }
        };
        predicates.push(bound);
    }
    Ok(PathExpr { name: p.name.clone(), steps, predicates })
}

fn bind_frame(f: &FrameDecl, paths: &[PathExpr], schema: &IdmSchema) -> Result<FrameExpr, RuleError> {
    let path = paths
        .iter()
        .find(|p| p.name == f.path)
        .ok_or_else(|| err(f.span, BindError::UnknownPath(f.path.clone())))?;
    let mut group_attrs = Vec::new();
    for g in &f.group {
        let parts = match g.parts.as_slice() {
            [first, rest @ ..] if !rest.is_empty() && (first == &path.name || first == &f.name) => rest,
            all => all,
        };
        let name = attr_name(parts, g)?;
        let res = resolve_attribute(schema, &path.steps, &name).map_err(|e| err(g.span, e))?;
        let written = format!("{}.{}", f.name, parts.iter().map(|p| p.as_str()).collect::<Vec<_>>().join("."));
        group_attrs.push(attr_ref(res, 0, written));
    }
    Ok(FrameExpr { name: f.name.clone(), path: path.name.clone(), group_attrs })
}

#[derive(Debug, Clone, PartialEq)]
enum Ctx {
    Path(usize),
    Frame(usize),
    Entity(Ident),
}

struct Env<'a> {
    schema: &'a IdmSchema,
    paths: &'a [PathExpr],
    frames: &'a [FrameExpr],
}

/// Per-rule binding state: the resolved context path.
struct Scope<'a> {
    schema: &'a IdmSchema,
    path: PathExpr,
}

fn collect_refs<'a>(e: &'a Expr, out: &mut Vec<&'a RefPath>) {
    match e {
        Expr::Ref(r) => out.push(r),
        Expr::Lit(_) => {}
        Expr::Neg(x) => collect_refs(x, out),
        Expr::Bin(_, a, b) => {
            collect_refs(a, out);
            collect_refs(b, out);
        }
    }
}

fn collect_cond_refs<'a>(e: &'a CondExpr, out: &mut Vec<&'a RefPath>) {
    match e {
        CondExpr::Cond(c) => {
            out.push(&c.subject);
            collect_refs(&c.bound_p, out);
            if let Some(q) = &c.bound_q {
                collect_refs(q, out);
            }
            if let Some(o) = &c.object {
                out.push(o);
            }
        }
        CondExpr::And(v) | CondExpr::Or(v) => v.iter().for_each(|x| collect_cond_refs(x, out)),
    }
}

impl<'a> Env<'a> {
    fn ctx_of(&self, r: &RefPath) -> Result<Ctx, RuleError> {
        if r.parts.len() < 2 {
            return Err(err(r.span, BindError::Unqualified(r.text())));
        }
        let head = &r.parts[0];
        if let Some(i) = self.paths.iter().position(|p| &p.name == head) {
            Ok(Ctx::Path(i))
        } else if let Some(i) = self.frames.iter().position(|f| &f.name == head) {
            Ok(Ctx::Frame(i))
        } else if let Some(e) = self.schema.entity(head) {
            Ok(Ctx::Entity(e.name.clone()))
        } else {
            Err(err(r.span, BindError::UnknownContext(head.to_string())))
        }
    }

    fn ctx_name(&self, c: &Ctx) -> Ident {
        match c {
            Ctx::Path(i) => self.paths[*i].name.clone(),
            Ctx::Frame(i) => self.frames[*i].name.clone(),
            Ctx::Entity(e) => e.clone(),
        }
    }

    fn unify(&self, a: Ctx, b: Ctx, span: Span) -> Result<Ctx, RuleError> {
        match (&a, &b) {
            _ if a == b => Ok(a),
            (Ctx::Frame(f), Ctx::Path(p)) | (Ctx::Path(p), Ctx::Frame(f)) if self.frames[*f].path == self.paths[*p].name => {
                Ok(Ctx::Frame(*f))
            }
            _ => Err(err(span, BindError::MixedContexts { first: self.ctx_name(&a), second: self.ctx_name(&b) })),
        }
    }

    fn bind_rule(&self, decl: &RuleDecl, index: usize) -> Result<BusinessRule, RuleError> {
        let mut refs = Vec::new();
        collect_cond_refs(&decl.condition, &mut refs);
        for a in &decl.actions {
            refs.push(&a.target);
            collect_refs(&a.value, &mut refs);
        }
        let mut ctx: Option<Ctx> = None;
        for r in &refs {
            let c = self.ctx_of(r)?;
            ctx = Some(match ctx {
                None => c,
                Some(prev) => self.unify(prev, c, r.span)?,
            });
        }
        let ctx = ctx.expect("every condition has a subject");
        let (path, frame) = match &ctx {
            Ctx::Path(i) => (self.paths[*i].clone(), None),
            Ctx::Frame(i) => {
                let f = self.frames[*i].clone();
                let p = self.paths.iter().find(|p| p.name == f.path).expect("frames are bound to paths").clone();
                (p, Some(f))
            }
            Ctx::Entity(e) => (PathExpr { name: e.clone(), steps: vec![e.clone()], predicates: vec![] }, None),
        };
        let scope = Scope { schema: self.schema, path };
        let mut condition = scope.bind_cond(&decl.condition)?;
        let conds = condition.conditions();
        let quant = conds.iter().filter(|c| matches!(c, Condition::Quant(_))).count();
        if quant > 0 && quant < conds.len() {
            return Err(err(decl.span, BindError::MixedKinds));
        }
        let universal = conds.iter().filter(|c| matches!(c, Condition::Value(v) if v.universal)).count();
        match decl.form {
            RuleForm::Constraint => {
                if frame.is_some() {
                    return Err(err(decl.span, BindError::Form("frames can only be used by derivation rules".into())));
                }
                clear_universal(&mut condition);
            }
            RuleForm::Derivation if quant == 0 => {
                if universal > 0 && universal < conds.len() {
                    return Err(err(
                        decl.span,
                        BindError::Form("either every condition of the rule uses `each` or none does".into()),
                    ));
                }
                if universal > 0 && frame.is_none() {
                    return Err(err(decl.span, BindError::Form("`each` conditions need a frame context".into())));
                }
            }
            RuleForm::Derivation => {}
        }
        if quant > 0 {
            if frame.is_some() {
                return Err(err(decl.span, BindError::Form("quantification conditions cannot use a frame".into())));
            }
            scope.check_quantification(&condition, decl.span)?;
        }
        let mut actions = Vec::new();
        for a in &decl.actions {
            let target = scope.bind_attr(&a.target)?;
            let value = scope.bind_arith(&a.value, a.target.span)?;
            actions.push(Action { target, value });
        }
        let form = decl.form;
        let kind = classify(form, &condition.conditions());
        Ok(BusinessRule {
            name: decl.name.clone().unwrap_or_else(|| Ident::new(format!("R{}", index + 1))),
            assignment: None,
            form,
            kind,
            context: self.ctx_name(&ctx),
            path: scope.path,
            frame,
            condition,
            actions,
            text: decl.to_string(),
            span: decl.span,
        })
    }
}

fn clear_universal(e: &mut BoolExpr) {
    match e {
        BoolExpr::Cond(Condition::Value(v)) => v.universal = false,
        BoolExpr::Cond(Condition::Quant(_)) => {}
        BoolExpr::And(v) | BoolExpr::Or(v) => v.iter_mut().for_each(clear_universal),
    }
}

fn class_of(e: &ArithExpr) -> TypeClass {
    match e {
        ArithExpr::Attr(a) => a.kind.class(),
        ArithExpr::Lit(v) => literal_class(v),
        ArithExpr::Neg(_) | ArithExpr::Bin(..) => TypeClass::Numeric,
    }
}

impl Scope<'_> {
    fn bind_attr(&self, r: &RefPath) -> Result<AttrRef, RuleError> {
        let name = attr_name(&r.parts[1..], r)?;
        let res = resolve_attribute(self.schema, &self.path.steps, &name).map_err(|e| err(r.span, e))?;
        Ok(attr_ref(res, 0, r.text()))
    }

    fn bind_entity(&self, r: &RefPath) -> Result<EntityRef, RuleError> {
        let [_, name] = &r.parts[..] else {
            return Err(err(r.span, BindError::Type(format!("{} is not an entity of the path", r.text()))));
        };
        let at: Vec<usize> = (0..self.path.steps.len()).filter(|&i| &self.path.steps[i] == name).collect();
        match at.as_slice() {
            [step] => Ok(EntityRef { step: *step, entity: self.path.steps[*step].clone(), written: r.text() }),
            [] => Err(err(r.span, ResolveError::EntityNotOnPath(name.clone()))),
            _ => Err(err(r.span, BindError::Type(format!("{name} occurs more than once on the path")))),
        }
    }

    fn bind_arith(&self, e: &Expr, span: Span) -> Result<ArithExpr, RuleError> {
        Ok(match e {
            Expr::Lit(v) => ArithExpr::Lit(v.clone()),
            Expr::Ref(r) => ArithExpr::Attr(self.bind_attr(r)?),
            Expr::Neg(x) => {
                let x = self.bind_arith(x, span)?;
                if class_of(&x) != TypeClass::Numeric {
                    return Err(err(span, BindError::Type(format!("cannot negate {x}"))));
                }
                ArithExpr::Neg(Box::new(x))
            }
            Expr::Bin(op, a, b) => {
                let (a, b) = (self.bind_arith(a, span)?, self.bind_arith(b, span)?);
                if class_of(&a) != TypeClass::Numeric || class_of(&b) != TypeClass::Numeric {
                    return Err(err(span, BindError::Type(format!("arithmetic needs numbers: {a} {} {b}", op.symbol()))));
                }
                if *op == ArithOp::Div && b.fold().and_then(|v| v.as_f64()) == Some(0.0) {
                    return Err(err(span, BindError::DivisionByZero));
                }
                ArithExpr::Bin(*op, Box::new(a), Box::new(b))
            }
        })
    }

    fn bind_cond(&self, e: &CondExpr) -> Result<BoolExpr, RuleError> {
        match e {
            CondExpr::And(v) => Ok(BoolExpr::And(v.iter().map(|x| self.bind_cond(x)).collect::<Result<_, _>>()?)),
            CondExpr::Or(v) => Ok(BoolExpr::Or(v.iter().map(|x| self.bind_cond(x)).collect::<Result<_, _>>()?)),
            CondExpr::Cond(c) => {
                let bound_p = self.bind_arith(&c.bound_p, c.span)?;
                let bound_q = c.bound_q.as_ref().map(|q| self.bind_arith(q, c.span)).transpose()?;
                if let Some(object) = &c.object {
                    let r = self.bind_entity(&c.subject)?;
                    let s = self.bind_entity(object)?;
                    return Ok(BoolExpr::Cond(Condition::Quant(QuantCondition {
                        r,
                        s,
                        comparator: c.comparator,
                        bound_p,
                        bound_q,
                    })));
                }
                let operand = self.bind_attr(&c.subject)?;
                let class = operand.kind.class();
                if c.comparator == Comparator::Like {
                    if class != TypeClass::Text {
                        return Err(err(
                            c.span,
                            BindError::Type(format!("like needs a text attribute but {} is {}", operand.written, operand.kind)),
                        ));
                    }
                    if !matches!(bound_p, ArithExpr::Lit(Value::Text(_))) {
                        return Err(err(c.span, BindError::Type("like needs a quoted text pattern".into())));
                    }
                }
                for b in [Some(&bound_p), bound_q.as_ref()].into_iter().flatten() {
                    if !compatible(class, class_of(b)) {
                        return Err(err(
                            c.span,
                            BindError::Type(format!("{} ({}) cannot be compared with {b}", operand.written, operand.kind)),
                        ));
                    }
                }
                Ok(BoolExpr::Cond(Condition::Value(ValueCondition {
                    operand,
                    comparator: c.comparator,
                    bound_p,
                    bound_q,
                    universal: c.each,
                })))
            }
        }
    }

    /// Counting rules compile to one grouped query, so every atom must
    /// count the same (R, S) pair, S must end the path, and bounds may only
    /// read attributes fixed by the group (entities up to R).
    fn check_quantification(&self, e: &BoolExpr, span: Span) -> Result<(), RuleError> {
        let last = self.path.steps.len() - 1;
        let mut pair: Option<(usize, usize)> = None;
        for c in e.conditions() {
            let Condition::Quant(q) = c else { continue };
            if q.r.step >= q.s.step {
                return Err(err(span, BindError::Form(format!("{} must precede {} on the path", q.r.written, q.s.written))));
            }
            if q.s.step != last {
                return Err(err(span, BindError::Form(format!("the counted entity {} must end the path", q.s.written))));
            }
            match pair {
                None => pair = Some((q.r.step, q.s.step)),
                Some(p) if p != (q.r.step, q.s.step) => {
                    return Err(err(span, BindError::Form("all quantification conditions of a rule must count the same entities".into())))
                }
                Some(_) => {}
            }
            for b in [Some(&q.bound_p), q.bound_q.as_ref()].into_iter().flatten() {
                if class_of(b) != TypeClass::Numeric {
                    return Err(err(span, BindError::CountBound(b.to_string())));
                }
                if let Some(a) = b.attrs().into_iter().find(|a| a.step > q.r.step) {
                    return Err(err(
                        span,
                        BindError::Form(format!("count bound reads {} which is not fixed per {}", a.written, q.r.written)),
                    ));
                }
                if let Some(v) = b.fold() {
                    let ok = match v {
                        Value::Integer(i) => i >= 0,
                        Value::Real(r) => r >= 0.0 && r.fract() == 0.0,
                        _ => false,
                    };
                    if !ok {
                        return Err(err(span, BindError::CountBound(b.to_string())));
                    }
                }
            }
        }
        Ok(())
    }
}
