//! Expression syntax shared by the DSL and by textual bounds.

use num_bigint::BigInt;
use num_rational::BigRational;

use super::expr::{Exp, SymExpr};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    pub fn symbol(&self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

/// Expression tree as written in source.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    Num(BigRational),
    Ident(String),
    Index(String, Vec<Expr>),
    Call(String, Vec<Expr>),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    /// Zero-based character offset within the parsed text.
    pub offset: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(BigRational),
    Ident(String),
    Punct(char),
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && i + 1 < chars.len() && chars[i + 1].is_ascii_digit()) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            out.push((start, Tok::Num(parse_decimal(&text).ok_or(ParseError {
                offset: start,
                message: format!("bad number `{text}`"),
            })?)));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((start, Tok::Ident(chars[start..i].iter().collect())));
        } else if "+-*/^()[],".contains(c) {
            if c == '*' && i + 1 < chars.len() && chars[i + 1] == '*' {
                out.push((i, Tok::Punct('^')));
                i += 2;
            } else {
                out.push((i, Tok::Punct(c)));
                i += 1;
            }
        } else {
            return Err(ParseError { offset: i, message: format!("unexpected character `{c}`") });
        }
    }
    Ok(out)
}

fn parse_decimal(text: &str) -> Option<BigRational> {
    let mut parts = text.split('.');
    let whole = parts.next()?;
    let frac = parts.next().unwrap_or("");
    if parts.next().is_some() {
        return None;
    }
    let digits = format!("{whole}{frac}");
    let n: BigInt = digits.parse().ok()?;
    let d = num_traits::pow(BigInt::from(10), frac.len());
    Some(BigRational::new(n, d))
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|t| t.0).unwrap_or(self.end)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError { offset: self.offset(), message: msg.into() })
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Punct(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(format!("expected `{c}`"))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat('+') {
                BinOp::Add
            } else if self.eat('-') {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat('*') {
                BinOp::Mul
            } else if self.eat('/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.eat('^') {
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn list(&mut self, close: char) -> Result<Vec<Expr>, ParseError> {
        let mut items = Vec::new();
        if self.eat(close) {
            return Ok(items);
        }
        loop {
            items.push(self.expr()?);
            if self.eat(close) {
                return Ok(items);
            }
            self.expect(',')?;
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Num(n)) => {
                self.pos += 1;
                Ok(Expr::Num(n))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if self.eat('[') {
                    Ok(Expr::Index(name, self.list(']')?))
                } else if self.eat('(') {
                    Ok(Expr::Call(name, self.list(')')?))
                } else {
                    Ok(Expr::Ident(name))
                }
            }
            Some(Tok::Punct('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(_) => self.err("unexpected token"),
            None => self.err("unexpected end of expression"),
        }
    }
}

/// Parses a complete expression.
pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0, end: src.chars().count() };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return p.err("trailing input");
    }
    Ok(e)
}

impl Expr {
    /// Array references in left-to-right order.
    pub fn array_refs(&self) -> Vec<(&str, &[Expr])> {
        let mut out = Vec::new();
        self.collect_refs(&mut out);
        out
    }

    fn collect_refs<'a>(&'a self, out: &mut Vec<(&'a str, &'a [Expr])>) {
        match self {
            Expr::Index(n, idx) => out.push((n.as_str(), idx.as_slice())),
            Expr::Call(_, args) => args.iter().for_each(|a| a.collect_refs(out)),
            Expr::Neg(e) => e.collect_refs(out),
            Expr::Bin(_, a, b) => {
                a.collect_refs(out);
                b.collect_refs(out);
            }
            Expr::Num(_) | Expr::Ident(_) => {}
        }
    }

    /// Converts to a symbolic expression. Supports `sqrt`, `cbrt`, constant
    /// exponents and division by monomials.
    pub fn to_sym(&self) -> Result<SymExpr, String> {
        match self {
            Expr::Num(n) => Ok(SymExpr::constant(n.clone())),
            Expr::Ident(s) => Ok(SymExpr::symbol(s)),
            Expr::Index(n, _) => Err(format!("array reference `{n}` in a symbolic expression")),
            Expr::Call(f, args) => {
                if args.len() != 1 {
                    return Err(format!("`{f}` takes one argument"));
                }
                let a = args[0].to_sym()?;
                let e = match f.as_str() {
                    "sqrt" => Exp::new(1, 2),
                    "cbrt" => Exp::new(1, 3),
                    _ => return Err(format!("unknown function `{f}`")),
                };
                a.pow(e).map_err(|e| e.to_string())
            }
            Expr::Neg(e) => Ok(-e.to_sym()?),
            Expr::Bin(op, a, b) => {
                let x = a.to_sym()?;
                let y = b.to_sym()?;
                match op {
                    BinOp::Add => Ok(x + y),
                    BinOp::Sub => Ok(x - y),
                    BinOp::Mul => Ok(x * y),
                    BinOp::Div => x.checked_div(&y).map_err(|e| e.to_string()),
                    BinOp::Pow => {
                        let r = y.as_rational().ok_or("exponent must be a rational constant")?;
                        let n: i64 = r.numer().try_into().map_err(|_| "exponent too large")?;
                        let d: i64 = r.denom().try_into().map_err(|_| "exponent too large")?;
                        x.pow(Exp::new(n, d)).map_err(|e| e.to_string())
                    }
                }
            }
        }
    }

    /// Source rendering with explicit parentheses around every binary node.
    pub fn render(&self) -> String {
        match self {
            Expr::Num(n) => {
                if n.is_integer() {
                    n.to_integer().to_string()
                } else {
                    render_decimal(n)
                }
            }
            Expr::Ident(s) => s.clone(),
            Expr::Index(n, idx) => {
                format!("{n}[{}]", idx.iter().map(|e| e.render()).collect::<Vec<_>>().join(", "))
            }
            Expr::Call(f, args) => {
                format!("{f}({})", args.iter().map(|e| e.render()).collect::<Vec<_>>().join(", "))
            }
            Expr::Neg(e) => format!("-{}", e.render_atom()),
            Expr::Bin(op, a, b) => format!("({} {} {})", a.render(), op.symbol(), b.render()),
        }
    }

    fn render_atom(&self) -> String {
        match self {
            Expr::Neg(_) => format!("({})", self.render()),
            _ => self.render(),
        }
    }
}

impl std::str::FromStr for SymExpr {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let e = parse_expr(s).map_err(|e| format!("column {}: {}", e.offset + 1, e.message))?;
        e.to_sym()
    }
}

/// Decimal rendering for numbers written with a fractional part.
fn render_decimal(n: &BigRational) -> String {
    let ten = BigInt::from(10);
    let mut scale = BigInt::from(1);
    for digits in 0..40 {
        if (&scale % n.denom()) == BigInt::from(0) {
            let v = n.numer() * (&scale / n.denom());
            let s = v.to_string();
            let (sign, s) = s.strip_prefix('-').map(|r| ("-", r.to_string())).unwrap_or(("", s));
            let s = format!("{:0>width$}", s, width = digits + 1);
            let (a, b) = s.split_at(s.len() - digits);
            return format!("{sign}{a}.{b}");
        }
        scale *= &ten;
    }
    format!("({}/{})", n.numer(), n.denom())
}
