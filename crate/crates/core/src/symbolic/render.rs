use std::cmp::Ordering;
use std::fmt;

use num_traits::{One, Signed};

use super::expr::{Atom, Exp, Monomial, SymExpr};

fn power(base: &str, e: Exp) -> String {
    if e == Exp::one() {
        base.to_string()
    } else if e.is_integer() {
        format!("{base}^{}", e.to_integer())
    } else if e == Exp::new(1, 2) {
        format!("sqrt({base})")
    } else {
        format!("{base}^({}/{})", e.numer(), e.denom())
    }
}

fn atom_name(a: &Atom) -> String {
    match a {
        Atom::Prime(p) => p.to_string(),
        Atom::Sym(s) => s.clone(),
    }
}

/// Deterministic term order: descending symbol degree, then symbol order.
pub(crate) fn term_order(a: &Monomial, b: &Monomial) -> Ordering {
    b.total_degree()
        .cmp(&a.total_degree())
        .then_with(|| a.symbol_part().cmp(&b.symbol_part()))
        .then_with(|| a.cmp(b))
}

/// Renders |c| * m; the sign is handled by the caller.
fn render_term(m: &Monomial, c: &num_rational::BigRational) -> String {
    let c = c.abs();
    let mut num: Vec<String> = Vec::new();
    let mut den: Vec<String> = Vec::new();
    if !c.numer().is_one() {
        num.push(c.numer().to_string());
    }
    if !c.denom().is_one() {
        den.push(c.denom().to_string());
    }
    for (a, e) in m.atoms().filter(|(a, _)| matches!(a, Atom::Prime(_))) {
        num.push(power(&atom_name(a), *e));
    }
    for (a, e) in m.atoms().filter(|(a, _)| matches!(a, Atom::Sym(_))) {
        if e.is_positive() {
            num.push(power(&atom_name(a), *e));
        } else {
            den.push(power(&atom_name(a), -*e));
        }
    }
    let top = if num.is_empty() { "1".to_string() } else { num.join("*") };
    match den.len() {
        0 => top,
        1 => format!("{top}/{}", den[0]),
        _ => format!("{top}/({})", den.join("*")),
    }
}

impl fmt::Display for SymExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut terms: Vec<_> = self.terms().collect();
        terms.sort_by(|a, b| term_order(a.0, b.0));
        for (k, (m, c)) in terms.iter().enumerate() {
            let body = render_term(m, c);
            match (k, c.is_negative()) {
                (0, false) => write!(f, "{body}")?,
                (0, true) => write!(f, "-{body}")?,
                (_, false) => write!(f, " + {body}")?,
                (_, true) => write!(f, " - {body}")?,
            }
        }
        Ok(())
    }
}
