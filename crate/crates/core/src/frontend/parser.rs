use std::collections::{BTreeSet, HashMap};

use crate::symbolic::{parse_expr, Expr, SymExpr};

use super::{ArrayAccess, AssignOp, FrontendError, Loop, Node, Program, Statement};

struct Line<'a> {
    number: usize,
    indent: usize,
    text: &'a str,
}

fn syntax(line: usize, col: usize, msg: impl Into<String>) -> FrontendError {
    FrontendError::Syntax { line, col, message: msg.into() }
}

struct Ctx {
    params: BTreeSet<String>,
    arity: HashMap<String, usize>,
    statements: Vec<Statement>,
}

/// Parses a program in the loop-nest DSL.
pub fn parse_program(source: &str) -> Result<Program, FrontendError> {
    parse_named(source, "program")
}

/// Parses a program and records `name` as its name.
pub fn parse_named(source: &str, name: &str) -> Result<Program, FrontendError> {
    let mut lines = Vec::new();
    for (k, raw) in source.lines().enumerate() {
        let text = raw.split('#').next().unwrap_or("").trim_end();
        if text.trim().is_empty() {
            continue;
        }
        if text.contains('\t') {
            return Err(syntax(k + 1, 1, "tabs are not allowed for indentation"));
        }
        let indent = text.len() - text.trim_start().len();
        lines.push(Line { number: k + 1, indent, text: text.trim_start() });
    }
    let mut params = Vec::new();
    let mut start = 0;
    if let Some(first) = lines.first() {
        if let Some(rest) = first.text.strip_prefix("params") {
            let rest = rest.trim_start();
            let list = rest
                .strip_prefix(':')
                .ok_or_else(|| syntax(first.number, first.indent + 7, "expected `:` after `params`"))?;
            for p in list.split(',') {
                let p = p.trim();
                if p.is_empty() {
                    continue;
                }
                if !p.chars().all(|c| c.is_alphanumeric() || c == '_') || p.chars().next().unwrap().is_ascii_digit() {
                    return Err(syntax(first.number, first.indent + 1, format!("bad parameter name `{p}`")));
                }
                params.push(p.to_string());
            }
            start = 1;
        }
    }
    let mut ctx = Ctx { params: params.iter().cloned().collect(), arity: HashMap::new(), statements: Vec::new() };
    let mut pos = start;
    let mut body = Vec::new();
    while pos < lines.len() {
        if lines[pos].indent != 0 {
            return Err(syntax(lines[pos].number, 1, "unexpected indentation"));
        }
        body.push(parse_node(&lines, &mut pos, &mut ctx, &mut Vec::new())?);
    }
    if ctx.statements.is_empty() {
        return Err(syntax(lines.last().map(|l| l.number).unwrap_or(1), 1, "program has no statements"));
    }
    Ok(Program { name: name.to_string(), params, body, statements: ctx.statements })
}

fn parse_node(lines: &[Line], pos: &mut usize, ctx: &mut Ctx, loops: &mut Vec<Loop>) -> Result<Node, FrontendError> {
    let line = &lines[*pos];
    if let Some(rest) = line.text.strip_prefix("for ") {
        let lp = parse_for(line, rest, ctx, loops)?;
        *pos += 1;
        let indent = line.indent;
        let child_indent = match lines.get(*pos) {
            Some(l) if l.indent > indent => l.indent,
            _ => return Err(syntax(line.number, line.indent + 1, "loop has an empty body")),
        };
        loops.push(lp.clone());
        let mut body = Vec::new();
        while *pos < lines.len() && lines[*pos].indent > indent {
            if lines[*pos].indent != child_indent {
                return Err(syntax(lines[*pos].number, 1, "inconsistent indentation"));
            }
            body.push(parse_node(lines, pos, ctx, loops)?);
        }
        loops.pop();
        Ok(Node::Loop(lp, body))
    } else {
        if loops.is_empty() {
            return Err(syntax(line.number, 1, "statement outside of any loop"));
        }
        let st = parse_assignment(line, ctx, loops)?;
        *pos += 1;
        if lines.get(*pos).is_some_and(|l| l.indent > line.indent) {
            return Err(syntax(lines[*pos].number, 1, "unexpected indentation"));
        }
        let id = ctx.statements.len();
        ctx.statements.push(st);
        Ok(Node::Stmt(id))
    }
}

fn parse_for(line: &Line, rest: &str, ctx: &Ctx, loops: &[Loop]) -> Result<Loop, FrontendError> {
    let col0 = line.indent + 5;
    let (var, range) = rest
        .split_once(" in ")
        .ok_or_else(|| syntax(line.number, col0, "expected `for <var> in range(...)`"))?;
    let var = var.trim().to_string();
    if var.is_empty() || !var.chars().all(|c| c.is_alphanumeric() || c == '_') {
        return Err(syntax(line.number, col0, format!("bad loop variable `{var}`")));
    }
    if ctx.params.contains(&var) || loops.iter().any(|l| l.var == var) {
        return Err(syntax(line.number, col0, format!("loop variable `{var}` shadows an outer name")));
    }
    let range = range.trim_end();
    let range_col = line.indent + line.text.len() - range.trim_start().len() + 1;
    let range = range
        .strip_suffix(':')
        .ok_or_else(|| syntax(line.number, line.indent + line.text.len(), "expected `:` at end of loop header"))?;
    let e = parse_expr(range).map_err(|e| syntax(line.number, range_col + e.offset, e.message))?;
    let args = match e {
        Expr::Call(f, args) if f == "range" && (1..=2).contains(&args.len()) => args,
        _ => return Err(syntax(line.number, range_col, "expected `range(hi)` or `range(lo, hi)`")),
    };
    let (lo, hi) = if args.len() == 1 { (Expr::Num(num_traits::Zero::zero()), args[0].clone()) } else { (args[0].clone(), args[1].clone()) };
    let scope: Vec<String> = ctx.params.iter().cloned().chain(loops.iter().map(|l| l.var.clone())).collect();
    let lower = bound(&lo, &scope, line.number, range_col)?;
    let upper = bound(&hi, &scope, line.number, range_col)?;
    Ok(Loop { var, lower, upper })
}

fn bound(e: &Expr, scope: &[String], line: usize, col: usize) -> Result<SymExpr, FrontendError> {
    let nonaffine = |detail: String| FrontendError::NonAffineBound { line, col, detail };
    let s = e.to_sym().map_err(nonaffine)?;
    for sym in s.symbols() {
        if !scope.contains(&sym) {
            return Err(syntax(line, col, format!("undeclared symbol `{sym}` in loop bound")));
        }
    }
    for (m, _) in s.terms() {
        let deg = m.total_degree();
        let integral = m.symbols().all(|(_, e)| e.is_integer() && *e.numer() > 0);
        if !integral || deg > 1.into() || m.has_radicals() {
            return Err(nonaffine(format!("`{}` is not affine", e.render())));
        }
    }
    Ok(s)
}

fn find_assign(text: &str) -> Option<(usize, AssignOp, usize)> {
    let b = text.as_bytes();
    let mut depth = 0i32;
    for i in 0..b.len() {
        match b[i] {
            b'[' | b'(' => depth += 1,
            b']' | b')' => depth -= 1,
            b'=' if depth == 0 => {
                let op = match i.checked_sub(1).map(|j| b[j]) {
                    Some(b'+') => AssignOp::Add,
                    Some(b'-') => AssignOp::Sub,
                    Some(b'*') => AssignOp::Mul,
                    _ => AssignOp::Set,
                };
                let start = if op == AssignOp::Set { i } else { i - 1 };
                return Some((start, op, i + 1));
            }
            _ => {}
        }
    }
    None
}

fn parse_assignment(line: &Line, ctx: &mut Ctx, loops: &[Loop]) -> Result<Statement, FrontendError> {
    let text = line.text;
    let (lhs_end, op, rhs_start) =
        find_assign(text).ok_or_else(|| syntax(line.number, line.indent + 1, "expected an assignment"))?;
    let lhs_text = &text[..lhs_end];
    let rhs_text = &text[rhs_start..];
    let lhs = parse_expr(lhs_text).map_err(|e| syntax(line.number, line.indent + 1 + e.offset, e.message))?;
    let rhs_col = line.indent + rhs_start + 1;
    let rhs = parse_expr(rhs_text).map_err(|e| syntax(line.number, rhs_col + e.offset, e.message))?;
    let vars: Vec<String> = loops.iter().map(|l| l.var.clone()).collect();
    let (name, idx) = match &lhs {
        Expr::Index(n, idx) => (n.clone(), idx.clone()),
        _ => return Err(syntax(line.number, line.indent + 1, "left-hand side must be an array element")),
    };
    let output = access(ctx, &name, &idx, &vars, line.number, line.indent + 1)?;
    let mut inputs = Vec::new();
    if op != AssignOp::Set {
        inputs.push(output.clone());
    }
    for (n, idx) in rhs.array_refs() {
        inputs.push(access(ctx, n, idx, &vars, line.number, rhs_col)?);
    }
    Ok(Statement { id: ctx.statements.len(), loops: loops.to_vec(), output, inputs, op, rhs, line: line.number })
}

fn access(
    ctx: &mut Ctx,
    name: &str,
    idx: &[Expr],
    vars: &[String],
    line: usize,
    col: usize,
) -> Result<ArrayAccess, FrontendError> {
    if ctx.params.contains(name) || vars.iter().any(|v| v == name) {
        return Err(syntax(line, col, format!("`{name}` is not an array")));
    }
    let mut indices = Vec::new();
    for e in idx {
        let nonaffine = |detail: String| FrontendError::NonAffineIndex { line, col, detail };
        let s = e.to_sym().map_err(nonaffine)?;
        for sym in s.symbols() {
            if !vars.contains(&sym) && !ctx.params.contains(&sym) {
                return Err(syntax(line, col, format!("undeclared symbol `{sym}` in index of `{name}`")));
            }
        }
        let bad = || nonaffine(format!("`{}` in `{name}` is not affine", e.render()));
        let (coeffs, rest) = s.split_affine(vars).ok_or_else(bad)?;
        for c in coeffs.values().chain(std::iter::once(&rest)) {
            for (m, _) in c.terms() {
                let ok = m.symbols().all(|(_, e)| e.is_integer() && *e.numer() > 0) && m.total_degree() <= 1.into();
                if !ok || m.has_radicals() {
                    return Err(bad());
                }
            }
        }
        for c in coeffs.values() {
            if c.terms().any(|(_, k)| !k.is_integer()) {
                return Err(bad());
            }
        }
        if rest.terms().any(|(_, k)| !k.is_integer()) {
            return Err(bad());
        }
        indices.push(s);
    }
    match ctx.arity.get(name) {
        Some(&a) if a != indices.len() => {
            return Err(syntax(line, col, format!("array `{name}` used with {} indices, expected {a}", indices.len())))
        }
        Some(_) => {}
        None => {
            ctx.arity.insert(name.to_string(), indices.len());
        }
    }
    Ok(ArrayAccess { array: name.to_string(), indices })
}
