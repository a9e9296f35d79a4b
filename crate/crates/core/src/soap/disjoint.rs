//! Disjointness of two affine accesses at a common iteration vector.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::Zero;

use crate::frontend::{ArrayAccess, Loop};
use crate::lp::{Lp, Rel};
use crate::symbolic::SymExpr;

/// `Σ coeffs·x + constant (≥ | =) 0` over iteration variables and parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Linear {
    pub coeffs: BTreeMap<String, BigRational>,
    pub constant: BigRational,
}

impl Linear {
    fn from_sym(e: &SymExpr) -> Option<Linear> {
        let mut coeffs = BTreeMap::new();
        let mut constant = BigRational::zero();
        for (m, c) in e.terms() {
            if m.has_radicals() {
                return None;
            }
            let syms: Vec<_> = m.symbols().collect();
            match syms.as_slice() {
                [] => constant += c,
                [(s, e)] if *e == 1.into() => {
                    *coeffs.entry(s.to_string()).or_insert_with(BigRational::zero) += c;
                }
                _ => return None,
            }
        }
        coeffs.retain(|_, v: &mut BigRational| !v.is_zero());
        Some(Linear { coeffs, constant })
    }

    fn render(&self, rel: &str) -> String {
        let mut e = SymExpr::constant(self.constant.clone());
        for (s, c) in &self.coeffs {
            e = &e + &SymExpr::symbol(s).scale(c);
        }
        format!("{e} {rel} 0")
    }
}

#[derive(Clone, Debug)]
struct Row {
    lin: Linear,
    eq: bool,
}

fn domain_rows(loops: &[Loop]) -> Option<Vec<Row>> {
    let mut rows = Vec::new();
    for l in loops {
        let v = SymExpr::symbol(&l.var);
        // lower <= v <= upper - 1
        rows.push(Row { lin: Linear::from_sym(&(&v - &l.lower))?, eq: false });
        rows.push(Row { lin: Linear::from_sym(&(&(&l.upper - &v) - &SymExpr::one()))?, eq: false });
    }
    Some(rows)
}

fn infeasible(rows: &[Row]) -> bool {
    // Integer tightening: an equality with integer coefficients whose gcd does not
    // divide the constant has no integer solution.
    for r in rows.iter().filter(|r| r.eq) {
        if r.lin.coeffs.values().chain([&r.lin.constant]).all(|c| c.is_integer()) {
            let g = r.lin.coeffs.values().fold(BigInt::zero(), |g, c| g.gcd(&c.to_integer()));
            let k = r.lin.constant.to_integer();
            if g.is_zero() && !k.is_zero() {
                return true;
            }
            if !g.is_zero() && !(k % &g).is_zero() {
                return true;
            }
        }
    }
    let mut names: Vec<&String> = rows.iter().flat_map(|r| r.lin.coeffs.keys()).collect();
    names.sort();
    names.dedup();
    let mut lp = Lp::new(names.len());
    for k in 0..names.len() {
        lp.set_free(k);
    }
    for r in rows {
        let coeffs: Vec<BigRational> =
            names.iter().map(|n| r.lin.coeffs.get(*n).cloned().unwrap_or_else(BigRational::zero)).collect();
        let rhs = -r.lin.constant.clone();
        lp.add(coeffs, if r.eq { Rel::Eq } else { Rel::Ge }, rhs);
    }
    !lp.feasible()
}

/// Proves that `a` and `b` never address the same element at the same
/// iteration vector. Returns a minimal set of contradicting constraints.
pub fn prove_disjoint(loops: &[Loop], a: &ArrayAccess, b: &ArrayAccess) -> Option<Vec<String>> {
    if a.indices.len() != b.indices.len() {
        return Some(vec!["different arity".to_string()]);
    }
    let mut rows = domain_rows(loops)?;
    let n_domain = rows.len();
    for (x, y) in a.indices.iter().zip(&b.indices) {
        let diff = x - y;
        rows.push(Row { lin: Linear::from_sym(&diff)?, eq: true });
    }
    if !infeasible(&rows) {
        return None;
    }
    // Deletion filter down to an irreducible contradicting subset.
    let mut keep: Vec<bool> = vec![true; rows.len()];
    for k in 0..rows.len() {
        keep[k] = false;
        let sub: Vec<Row> = rows.iter().zip(&keep).filter(|(_, &on)| on).map(|(r, _)| r.clone()).collect();
        if !infeasible(&sub) {
            keep[k] = true;
        }
    }
    Some(
        rows.iter()
            .enumerate()
            .filter(|(k, _)| keep[*k])
            .map(|(k, r)| {
                let tag = if k < n_domain { "domain" } else { "equal index" };
                format!("{} ({tag})", r.lin.render(if r.eq { "=" } else { ">=" }))
            })
            .collect(),
    )
}

/// True when the loop bounds admit no point for any parameter values ≥ 1.
pub(crate) fn domain_is_empty(loops: &[Loop], params: &[String]) -> bool {
    let Some(mut rows) = domain_rows(loops) else { return false };
    for p in params {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(p.clone(), BigRational::from_integer(1.into()));
        rows.push(Row { lin: Linear { coeffs, constant: BigRational::from_integer((-1).into()) }, eq: false });
    }
    infeasible(&rows)
}
