use super::ast::*;
use super::RuleError;
use crate::ident::Ident;
use crate::lex::{tokenize, Cursor, Span, Tok};
use crate::value::{ArithOp, Value};

const STATEMENT_START: [&str; 6] = ["`Path`", "`Frame`", "`Each`", "`If`", "`rule`", "`assignment`"];

/// Parses a rules file into unbound declarations, preserving source order
/// and positions.
pub fn parse_rules(source: &str) -> Result<RuleFile, RuleError> {
    let mut cur = Cursor::new(tokenize(source)?);
    let mut file = RuleFile::default();
    while !cur.at_eof() {
        if cur.eat_sym(";") {
            continue;
        }
        if cur.eat_kw("assignment") {
            let (name, _) = cur.expect_ident("assignment name")?;
            file.assignment = Some(name.into());
        } else if cur.is_kw("path") {
            let p = parse_path(&mut cur)?;
            check_unique(&file, &p.name, p.span)?;
            file.paths.push(p);
        } else if cur.is_kw("frame") {
            let f = parse_frame(&mut cur)?;
            check_unique(&file, &f.name, f.span)?;
            file.frames.push(f);
        } else if cur.is_kw("rule") || cur.is_kw("each") || cur.is_kw("if") {
            let r = parse_rule(&mut cur)?;
            file.rules.push(r);
        } else {
            return Err(cur.error(&STATEMENT_START).into());
        }
    }
    Ok(file)
}

fn check_unique(file: &RuleFile, name: &Ident, span: Span) -> Result<(), RuleError> {
    let taken = file.paths.iter().any(|p| &p.name == name) || file.frames.iter().any(|f| &f.name == name);
    if taken {
        Err(RuleError::DuplicateName { name: name.clone(), span })
    } else {
        Ok(())
    }
}

fn parse_path(cur: &mut Cursor) -> Result<PathDecl, RuleError> {
    let span = cur.expect_kw("path")?;
    let (name, _) = cur.expect_ident("path name")?;
    cur.expect_kw("is")?;
    let (first, first_span) = cur.expect_ident("entity name")?;
    let mut steps = vec![(Ident::new(first), first_span)];
    let mut predicates = Vec::new();
    while cur.eat_sym("[") {
        let pred = if cur.eat_sym("]") {
            None
        } else {
            let mut conjuncts = vec![parse_conjunct(cur)?];
            while cur.eat_kw("and") {
                conjuncts.push(parse_conjunct(cur)?);
            }
            cur.expect_sym("]")?;
            Some(conjuncts)
        };
        let (entity, s) = cur.expect_ident("entity name")?;
        predicates.push(pred);
        steps.push((Ident::new(entity), s));
    }
    Ok(PathDecl { name: name.into(), steps, predicates, span })
}

fn parse_conjunct(cur: &mut Cursor) -> Result<PredConjunct, RuleError> {
    let left = parse_operand(cur)?;
    cur.expect_sym("=")?;
    let right = parse_operand(cur)?;
    Ok(PredConjunct { left, right })
}

fn parse_operand(cur: &mut Cursor) -> Result<Expr, RuleError> {
    match cur.peek().tok.clone() {
        Tok::Ident(_) => Ok(Expr::Ref(parse_ref(cur)?)),
        Tok::Int(_) | Tok::Decimal(..) | Tok::Str(_) => parse_atom_expr(cur),
        Tok::Sym("-") => parse_atom_expr(cur),
        _ => Err(cur.error(&["attribute", "literal"]).into()),
    }
}

fn parse_frame(cur: &mut Cursor) -> Result<FrameDecl, RuleError> {
    let span = cur.expect_kw("frame")?;
    let (name, _) = cur.expect_ident("frame name")?;
    cur.expect_kw("is")?;
    let (path, _) = cur.expect_ident("path name")?;
    if !(cur.eat_sym("//") || cur.eat_sym("///")) {
        return Err(cur.error(&["`//`"]).into());
    }
    let mut group = vec![parse_ref(cur)?];
    while cur.eat_sym(",") {
        group.push(parse_ref(cur)?);
    }
    Ok(FrameDecl { name: name.into(), path: path.into(), group, span })
}

fn parse_rule(cur: &mut Cursor) -> Result<RuleDecl, RuleError> {
    let mut span = cur.span();
    let name = if cur.eat_kw("rule") {
        let (n, _) = cur.expect_ident("rule name")?;
        cur.expect_sym(":")?;
        span = cur.span();
        Some(Ident::new(n))
    } else {
        None
    };
    if cur.eat_kw("each") {
        let condition = parse_or(cur)?;
        cur.eat_sym(";");
        Ok(RuleDecl { name, form: RuleForm::Constraint, condition, actions: vec![], span })
    } else if cur.eat_kw("if") {
        let condition = parse_or(cur)?;
        cur.expect_kw("then")?;
        let mut actions = vec![parse_action(cur)?];
        while cur.is_sym(",") || (cur.is_kw("and") && matches!(cur.peek_at(1), Tok::Ident(_))) {
            cur.bump();
            actions.push(parse_action(cur)?);
        }
        cur.eat_sym(";");
        Ok(RuleDecl { name, form: RuleForm::Derivation, condition, actions, span })
    } else {
        Err(cur.error(&["`Each`", "`If`"]).into())
    }
}

fn parse_action(cur: &mut Cursor) -> Result<ActionDecl, RuleError> {
    let target = parse_ref(cur)?;
    cur.expect_sym("=")?;
    let value = parse_expr(cur)?;
    Ok(ActionDecl { target, value })
}

fn parse_or(cur: &mut Cursor) -> Result<CondExpr, RuleError> {
    let mut items = vec![parse_and(cur)?];
    while cur.eat_kw("or") {
        items.push(parse_and(cur)?);
    }
    Ok(if items.len() == 1 { items.pop().unwrap() } else { CondExpr::Or(items) })
}

fn parse_and(cur: &mut Cursor) -> Result<CondExpr, RuleError> {
    let mut items = vec![parse_primary(cur)?];
    while cur.eat_kw("and") {
        items.push(parse_primary(cur)?);
    }
    Ok(if items.len() == 1 { items.pop().unwrap() } else { CondExpr::And(items) })
}

fn parse_primary(cur: &mut Cursor) -> Result<CondExpr, RuleError> {
    if cur.eat_sym("(") {
        let inner = parse_or(cur)?;
        cur.expect_sym(")")?;
        return Ok(inner);
    }
    let each = cur.eat_kw("each");
    Ok(CondExpr::Cond(parse_condition(cur, each)?))
}

fn parse_condition(cur: &mut Cursor, each: bool) -> Result<CondDecl, RuleError> {
    let span = cur.span();
    let subject = parse_ref(cur)?;
    let quant = if cur.eat_kw("must") {
        if cur.eat_kw("be") {
            false
        } else if cur.eat_kw("have") {
            true
        } else {
            return Err(cur.error(&["`be`", "`have`"]).into());
        }
    } else if cur.eat_kw("is") {
        false
    } else if cur.eat_kw("has") {
        true
    } else {
        return Err(cur.error(&["`must`", "`is`", "`has`", "`.`"]).into());
    };
    let (comparator, bound_p, bound_q) = parse_comparison(cur, !quant)?;
    let object = if quant { Some(parse_ref(cur)?) } else { None };
    Ok(CondDecl { each, subject, comparator, bound_p, bound_q, object, span })
}

fn parse_comparison(cur: &mut Cursor, allow_like: bool) -> Result<(Comparator, Expr, Option<Expr>), RuleError> {
    if cur.eat_kw("at") {
        if cur.eat_kw("least") {
            let p = parse_expr(cur)?;
            if cur.is_kw("and") && cur.is_kw_at(1, "at") && cur.is_kw_at(2, "most") {
                cur.bump();
                cur.bump();
                cur.bump();
                let q = parse_expr(cur)?;
                return Ok((Comparator::Range, p, Some(q)));
            }
            return Ok((Comparator::AtLeast, p, None));
        }
        if cur.eat_kw("most") {
            return Ok((Comparator::AtMost, parse_expr(cur)?, None));
        }
        return Err(cur.error(&["`least`", "`most`"]).into());
    }
    if cur.eat_kw("exactly") {
        return Ok((Comparator::Exactly, parse_expr(cur)?, None));
    }
    if cur.eat_kw("different") {
        cur.expect_kw("to")?;
        return Ok((Comparator::DifferentTo, parse_expr(cur)?, None));
    }
    if allow_like && cur.eat_kw("like") {
        return Ok((Comparator::Like, parse_expr(cur)?, None));
    }
    let mut expected = vec!["`at least`", "`at most`", "`exactly`", "`different to`"];
    if allow_like {
        expected.push("`like`");
    }
    Err(cur.error(&expected).into())
}

pub(crate) fn parse_ref(cur: &mut Cursor) -> Result<RefPath, RuleError> {
    let (first, span) = cur.expect_ident("entity, path, frame or attribute name")?;
    let mut parts = vec![Ident::new(first)];
    while cur.is_sym(".") && matches!(cur.peek_at(1), Tok::Ident(_)) {
        cur.bump();
        parts.push(Ident::new(cur.expect_ident("name")?.0));
    }
    Ok(RefPath { parts, span })
}

fn parse_expr(cur: &mut Cursor) -> Result<Expr, RuleError> {
    let mut lhs = parse_term(cur)?;
    loop {
        let op = if cur.is_sym("+") {
            ArithOp::Add
        } else if cur.is_sym("-") {
            ArithOp::Sub
        } else {
            return Ok(lhs);
        };
        cur.bump();
        let rhs = parse_term(cur)?;
        lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
    }
}

fn parse_term(cur: &mut Cursor) -> Result<Expr, RuleError> {
    let mut lhs = parse_atom_expr(cur)?;
    loop {
        let op = if cur.is_sym("*") {
            ArithOp::Mul
        } else if cur.is_sym("/") {
            ArithOp::Div
        } else {
            return Ok(lhs);
        };
        cur.bump();
        let rhs = parse_atom_expr(cur)?;
        lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
    }
}

fn parse_atom_expr(cur: &mut Cursor) -> Result<Expr, RuleError> {
    let tok = cur.peek().tok.clone();
    match tok {
        Tok::Int(i) => {
            cur.bump();
            Ok(Expr::Lit(Value::Integer(i)))
        }
        Tok::Decimal(v, _) => {
            cur.bump();
            Ok(Expr::Lit(Value::Real(v)))
        }
        Tok::Str(s) => {
            cur.bump();
            Ok(Expr::Lit(Value::Text(s)))
        }
        Tok::Ident(_) => Ok(Expr::Ref(parse_ref(cur)?)),
        Tok::Sym("-") => {
            cur.bump();
            Ok(Expr::Neg(Box::new(parse_atom_expr(cur)?)))
        }
        Tok::Sym("(") => {
            cur.bump();
            let e = parse_expr(cur)?;
            cur.expect_sym(")")?;
            Ok(e)
        }
        _ => Err(cur.error(&["number", "string", "attribute", "`(`"]).into()),
    }
}
