use std::collections::BTreeSet;

use num_rational::BigRational;
use num_traits::Zero;

use super::expr::{Exp, Monomial, SymExpr};
use super::SymbolicError;
use crate::lp::{Lp, LpOutcome, Rel};

/// Declared relation `lhs < rhs` between two monomials, e.g. `T < N/2`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assumption {
    pub lhs: SymExpr,
    pub rhs: SymExpr,
}

impl Assumption {
    /// Parses `a < b` (or `a <= b`, `b > a`).
    pub fn parse(text: &str) -> Result<Assumption, String> {
        let (l, r, flip) = if let Some((l, r)) = text.split_once("<=") {
            (l, r, false)
        } else if let Some((l, r)) = text.split_once(">=") {
            (l, r, true)
        } else if let Some((l, r)) = text.split_once('<') {
            (l, r, false)
        } else if let Some((l, r)) = text.split_once('>') {
            (l, r, true)
        } else {
            return Err(format!("assumption `{text}` has no `<` or `>`"));
        };
        let l: SymExpr = l.trim().parse()?;
        let r: SymExpr = r.trim().parse()?;
        for side in [&l, &r] {
            if side.as_monomial().is_none() {
                return Err(format!("assumption side `{side}` must be a single monomial"));
            }
        }
        Ok(if flip { Assumption { lhs: r, rhs: l } } else { Assumption { lhs: l, rhs: r } })
    }

    /// Symbol exponent vector of lhs/rhs over `syms`.
    fn ratio_exponents(&self, syms: &[String]) -> Vec<Exp> {
        let l = self.lhs.as_monomial().unwrap().0;
        let r = self.rhs.as_monomial().unwrap().0;
        syms.iter().map(|s| l.exponent(s) - r.exponent(s)).collect()
    }
}

/// Classification of symbols for leading-order extraction.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GrowthOrder {
    pub growing: BTreeSet<String>,
    pub bounded: BTreeSet<String>,
    pub assumptions: Vec<Assumption>,
}

impl GrowthOrder {
    pub fn new<I, J, S, T>(growing: I, bounded: J) -> Self
    where
        I: IntoIterator<Item = S>,
        J: IntoIterator<Item = T>,
        S: Into<String>,
        T: Into<String>,
    {
        GrowthOrder {
            growing: growing.into_iter().map(Into::into).collect(),
            bounded: bounded.into_iter().map(Into::into).collect(),
            assumptions: Vec::new(),
        }
    }

    pub fn with_assumption(mut self, a: Assumption) -> Self {
        self.assumptions.push(a);
        self
    }

    fn growing_degree(&self, m: &Monomial) -> Exp {
        m.symbols()
            .filter(|(s, _)| self.growing.contains(*s))
            .map(|(_, e)| e)
            .fold(Exp::zero(), |a, b| a + b)
    }

    /// True when `a` asymptotically dominates `b` (both of equal growing degree).
    fn dominates(&self, a: &Monomial, b: &Monomial) -> bool {
        let grow_a: Vec<_> = self.growing.iter().map(|s| a.exponent(s)).collect();
        let grow_b: Vec<_> = self.growing.iter().map(|s| b.exponent(s)).collect();
        let bound_a: Vec<_> = self.bounded.iter().map(|s| a.exponent(s)).collect();
        let bound_b: Vec<_> = self.bounded.iter().map(|s| b.exponent(s)).collect();
        if grow_a == grow_b {
            // Same growing part: compare bounded exponents componentwise.
            return bound_a != bound_b && bound_a.iter().zip(&bound_b).all(|(x, y)| x >= y);
        }
        if self.assumptions.is_empty() {
            return false;
        }
        // b/a must be a non-negative combination of declared small ratios lhs/rhs.
        let syms: Vec<String> = self.growing.iter().cloned().collect();
        let target: Vec<Exp> = grow_b.iter().zip(&grow_a).map(|(x, y)| x - y).collect();
        let ratios: Vec<Vec<Exp>> = self.assumptions.iter().map(|a| a.ratio_exponents(&syms)).collect();
        let mut lp = Lp::new(ratios.len());
        for (k, t) in target.iter().enumerate() {
            let row = ratios.iter().map(|r| exp_to_big(r[k])).collect();
            lp.add(row, Rel::Eq, exp_to_big(*t));
        }
        let feasible = !matches!(lp.minimize(&vec![BigRational::zero(); ratios.len()]), LpOutcome::Infeasible);
        feasible && bound_a.iter().zip(&bound_b).all(|(x, y)| x >= y)
    }

    /// Sum of the maximal monomials of `e`.
    pub fn leading_term(&self, e: &SymExpr) -> Result<SymExpr, SymbolicError> {
        for s in e.symbols() {
            if !self.growing.contains(&s) && !self.bounded.contains(&s) {
                return Err(SymbolicError::UnclassifiedSymbol(s));
            }
        }
        if e.is_zero() {
            return Ok(SymExpr::zero());
        }
        // Group terms by symbol part so radical variants of one shape stay together.
        let mut shapes: Vec<Monomial> = e.terms().map(|(m, _)| m.symbol_part()).collect();
        shapes.sort();
        shapes.dedup();
        let top = shapes.iter().map(|m| self.growing_degree(m)).max().unwrap();
        let cands: Vec<&Monomial> = shapes.iter().filter(|m| self.growing_degree(m) == top).collect();
        let keep: Vec<&Monomial> = cands
            .iter()
            .filter(|m| !cands.iter().any(|o| o != *m && self.dominates(o, m)))
            .copied()
            .collect();
        let mut out = SymExpr::zero();
        for (m, c) in e.terms() {
            if keep.contains(&&m.symbol_part()) {
                out = &out + &SymExpr::term(c.clone(), m.clone());
            }
        }
        Ok(out)
    }
}

pub(crate) fn exp_to_big(e: Exp) -> BigRational {
    BigRational::new((*e.numer()).into(), (*e.denom()).into())
}

/// Convenience wrapper over [`GrowthOrder::leading_term`].
pub fn leading_term(e: &SymExpr, order: &GrowthOrder) -> Result<SymExpr, SymbolicError> {
    order.leading_term(e)
}
