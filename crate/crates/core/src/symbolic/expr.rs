use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::SymbolicError;

/// Exponent type. Exponents stay small, so a machine rational suffices.
pub type Exp = Ratio<i64>;

/// A multiplicative atom: a named symbol or a prime carrying a radical.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    Prime(u64),
    Sym(String),
}

/// Power product of atoms. Prime exponents are kept in the open interval (0, 1);
/// integer parts live in the term coefficient.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial(pub(crate) BTreeMap<Atom, Exp>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(BTreeMap::new())
    }

    pub fn sym(name: &str, e: Exp) -> Self {
        let mut m = BTreeMap::new();
        if !e.is_zero() {
            m.insert(Atom::Sym(name.to_string()), e);
        }
        Monomial(m)
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&Atom, &Exp)> {
        self.0.iter()
    }

    /// Symbol exponents only.
    pub fn symbols(&self) -> impl Iterator<Item = (&str, Exp)> {
        self.0.iter().filter_map(|(a, e)| match a {
            Atom::Sym(s) => Some((s.as_str(), *e)),
            Atom::Prime(_) => None,
        })
    }

    pub fn exponent(&self, sym: &str) -> Exp {
        self.0
            .get(&Atom::Sym(sym.to_string()))
            .copied()
            .unwrap_or_else(Exp::zero)
    }

    pub fn total_degree(&self) -> Exp {
        self.symbols().map(|(_, e)| e).fold(Exp::zero(), |a, b| a + b)
    }

    /// The symbol part only (radical constants stripped).
    pub fn symbol_part(&self) -> Monomial {
        Monomial(
            self.0
                .iter()
                .filter(|(a, _)| matches!(a, Atom::Sym(_)))
                .map(|(a, e)| (a.clone(), *e))
                .collect(),
        )
    }

    pub fn has_radicals(&self) -> bool {
        self.0.keys().any(|a| matches!(a, Atom::Prime(_)))
    }
}

/// Sum of monomials with rational coefficients, always in canonical form.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct SymExpr {
    pub(crate) terms: BTreeMap<Monomial, BigRational>,
}

fn big(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn factor_u128(mut n: u128) -> Vec<(u64, i64)> {
    let mut out = Vec::new();
    let mut p: u128 = 2;
    while p * p <= n {
        if n.is_multiple_of(p) {
            let mut k = 0;
            while n.is_multiple_of(p) {
                n /= p;
                k += 1;
            }
            out.push((p as u64, k));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n as u64, 1));
    }
    out
}

/// Prime factorization of a positive rational as (prime, signed multiplicity).
fn factor_rational(c: &BigRational) -> Option<Vec<(u64, i64)>> {
    let num = c.numer().abs().to_u128()?;
    let den = c.denom().to_u128()?;
    let mut f: BTreeMap<u64, i64> = BTreeMap::new();
    for (p, k) in factor_u128(num) {
        *f.entry(p).or_default() += k;
    }
    for (p, k) in factor_u128(den) {
        *f.entry(p).or_default() -= k;
    }
    Some(f.into_iter().filter(|(_, k)| *k != 0).collect())
}

fn rat_pow_int(base: &BigRational, e: i64) -> BigRational {
    if e >= 0 {
        num_traits::pow(base.clone(), e as usize)
    } else {
        num_traits::pow(base.recip(), (-e) as usize)
    }
}

/// Moves integer parts of prime exponents into the coefficient.
fn normalize(mut m: BTreeMap<Atom, Exp>, mut c: BigRational) -> (Monomial, BigRational) {
    let primes: Vec<(u64, Exp)> = m
        .iter()
        .filter_map(|(a, e)| match a {
            Atom::Prime(p) => Some((*p, *e)),
            _ => None,
        })
        .collect();
    for (p, e) in primes {
        let fl = e.floor();
        let whole = fl.to_integer();
        if whole != 0 {
            c *= rat_pow_int(&big(p as i64), whole);
        }
        let rest = e - fl;
        if rest.is_zero() {
            m.remove(&Atom::Prime(p));
        } else {
            m.insert(Atom::Prime(p), rest);
        }
    }
    m.retain(|_, e| !e.is_zero());
    (Monomial(m), c)
}

impl SymExpr {
    pub fn zero() -> Self {
        SymExpr::default()
    }

    pub fn one() -> Self {
        SymExpr::constant(BigRational::one())
    }

    pub fn constant(c: BigRational) -> Self {
        let mut e = SymExpr::zero();
        e.add_term(Monomial::one(), c);
        e
    }

    pub fn int(n: i64) -> Self {
        SymExpr::constant(big(n))
    }

    pub fn ratio(n: i64, d: i64) -> Self {
        SymExpr::constant(BigRational::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn symbol(name: &str) -> Self {
        SymExpr::term(BigRational::one(), Monomial::sym(name, Exp::one()))
    }

    pub fn term(c: BigRational, m: Monomial) -> Self {
        let (m, c) = normalize(m.0, c);
        let mut e = SymExpr::zero();
        e.add_term(m, c);
        e
    }

    fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(m.clone()).or_insert_with(BigRational::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&m);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Rational value when the expression has no symbols and no radicals.
    pub fn as_rational(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => {
                let (m, c) = self.terms.iter().next().unwrap();
                m.0.is_empty().then(|| c.clone())
            }
            _ => None,
        }
    }

    pub fn as_integer(&self) -> Option<i64> {
        let r = self.as_rational()?;
        if r.is_integer() {
            r.to_integer().to_i64()
        } else {
            None
        }
    }

    /// The single term, if this is a monomial.
    pub fn as_monomial(&self) -> Option<(&Monomial, &BigRational)> {
        if self.terms.len() == 1 {
            self.terms.iter().next()
        } else {
            None
        }
    }

    /// True when no symbol appears (radical constants allowed).
    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|m| m.symbols().next().is_none())
    }

    pub fn symbols(&self) -> BTreeSet<String> {
        self.terms
            .keys()
            .flat_map(|m| m.symbols().map(|(s, _)| s.to_string()))
            .collect()
    }

    /// Canonical form. Values are always canonical, so this renormalizes a copy.
    pub fn simplify(&self) -> SymExpr {
        let mut out = SymExpr::zero();
        for (m, c) in &self.terms {
            let (m, c) = normalize(m.0.clone(), c.clone());
            out.add_term(m, c);
        }
        out
    }

    pub fn scale(&self, k: &BigRational) -> SymExpr {
        let mut out = SymExpr::zero();
        for (m, c) in &self.terms {
            out.add_term(m.clone(), c * k);
        }
        out
    }

    fn mul_terms(m1: &Monomial, c1: &BigRational, m2: &Monomial, c2: &BigRational) -> (Monomial, BigRational) {
        let mut f = m1.0.clone();
        for (a, e) in &m2.0 {
            *f.entry(a.clone()).or_insert_with(Exp::zero) += *e;
        }
        normalize(f, c1 * c2)
    }

    pub fn pow_int(&self, n: i64) -> Result<SymExpr, SymbolicError> {
        if n < 0 {
            return self.pow(Exp::from_integer(n));
        }
        let mut acc = SymExpr::one();
        let mut base = self.clone();
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                acc = &acc * &base;
            }
            base = &base * &base;
            k >>= 1;
        }
        Ok(acc)
    }

    /// Rational power. Sums are only raised to non-negative integer powers.
    pub fn pow(&self, e: Exp) -> Result<SymExpr, SymbolicError> {
        if e.is_integer() && *e.numer() >= 0 {
            return self.pow_int(e.to_integer());
        }
        let (m, c) = self
            .as_monomial()
            .ok_or_else(|| SymbolicError::NonMonomialPower(self.to_string()))?;
        if c.is_negative() && !e.is_integer() {
            return Err(SymbolicError::NegativeBase(self.to_string()));
        }
        let mut f: BTreeMap<Atom, Exp> = m.0.iter().map(|(a, x)| (a.clone(), *x * e)).collect();
        let mut coeff = BigRational::one();
        if e.is_integer() {
            coeff = rat_pow_int(c, e.to_integer());
        } else {
            let abs = c.abs();
            let fac = factor_rational(&abs).ok_or_else(|| SymbolicError::Overflow(abs.to_string()))?;
            for (p, k) in fac {
                *f.entry(Atom::Prime(p)).or_insert_with(Exp::zero) += Exp::from_integer(k) * e;
            }
        }
        Ok(SymExpr::term(coeff, Monomial(f)))
    }

    pub fn sqrt(&self) -> Result<SymExpr, SymbolicError> {
        self.pow(Exp::new(1, 2))
    }

    /// Simultaneous substitution of symbols by expressions.
    pub fn substitute(&self, bindings: &HashMap<String, SymExpr>) -> Result<SymExpr, SymbolicError> {
        let mut out = SymExpr::zero();
        for (m, c) in &self.terms {
            let mut kept = BTreeMap::new();
            let mut acc = SymExpr::one();
            for (a, e) in &m.0 {
                match a {
                    Atom::Sym(s) if bindings.contains_key(s) => {
                        acc = &acc * &bindings[s].pow(*e)?;
                    }
                    _ => {
                        kept.insert(a.clone(), *e);
                    }
                }
            }
            let rest = SymExpr::term(c.clone(), Monomial(kept));
            out = &out + &(&acc * &rest);
        }
        Ok(out)
    }

    pub fn substitute_one(&self, sym: &str, value: &SymExpr) -> Result<SymExpr, SymbolicError> {
        let mut b = HashMap::new();
        b.insert(sym.to_string(), value.clone());
        self.substitute(&b)
    }

    /// Floating-point value. Unbound symbols evaluate to NaN.
    pub fn evaluate(&self, point: &HashMap<String, f64>) -> f64 {
        let mut total = 0.0;
        for (m, c) in &self.terms {
            let mut v = c.to_f64().unwrap_or(f64::NAN);
            for (a, e) in &m.0 {
                let base = match a {
                    Atom::Prime(p) => *p as f64,
                    Atom::Sym(s) => *point.get(s).unwrap_or(&f64::NAN),
                };
                let ef = *e.numer() as f64 / *e.denom() as f64;
                v *= if e.is_integer() { base.powi(e.to_integer() as i32) } else { base.powf(ef) };
            }
            total += v;
        }
        total
    }

    /// Exact value under rational bindings, when the result is rational.
    pub fn eval_exact(&self, point: &HashMap<String, BigRational>) -> Option<BigRational> {
        let b: HashMap<String, SymExpr> = point
            .iter()
            .map(|(k, v)| (k.clone(), SymExpr::constant(v.clone())))
            .collect();
        self.substitute(&b).ok()?.as_rational()
    }

    /// Largest exponent of `sym` over all terms (zero when absent).
    pub fn degree_in(&self, sym: &str) -> Exp {
        self.terms
            .keys()
            .map(|m| m.exponent(sym))
            .max()
            .unwrap_or_else(Exp::zero)
    }

    /// Splits an expression that is affine in `vars` into per-variable
    /// coefficients and a remainder free of `vars`.
    pub fn split_affine(&self, vars: &[String]) -> Option<(BTreeMap<String, SymExpr>, SymExpr)> {
        let mut coeffs: BTreeMap<String, SymExpr> = BTreeMap::new();
        let mut rest = SymExpr::zero();
        for (m, c) in &self.terms {
            let present: Vec<&String> = vars.iter().filter(|v| !m.exponent(v).is_zero()).collect();
            match present.len() {
                0 => rest.add_term(m.clone(), c.clone()),
                1 => {
                    let v = present[0];
                    if m.exponent(v) != Exp::one() {
                        return None;
                    }
                    let mut f = m.0.clone();
                    f.remove(&Atom::Sym(v.clone()));
                    let t = SymExpr::term(c.clone(), Monomial(f));
                    let e = coeffs.entry(v.clone()).or_default();
                    *e = &*e + &t;
                }
                _ => return None,
            }
        }
        coeffs.retain(|_, c| !c.is_zero());
        Some((coeffs, rest))
    }

    /// True when every exponent of every symbol is a non-negative integer.
    pub fn is_polynomial(&self) -> bool {
        self.terms
            .keys()
            .all(|m| m.symbols().all(|(_, e)| e.is_integer() && *e.numer() >= 0))
    }

    /// Exact sum of `self` over `var` ranging over the integers `lo..hi`
    /// (upper bound exclusive). `self` must be polynomial in `var`.
    pub fn sum_over(&self, var: &str, lo: &SymExpr, hi: &SymExpr) -> Result<SymExpr, SymbolicError> {
        let mut out = SymExpr::zero();
        for (m, c) in &self.terms {
            let e = m.exponent(var);
            if !e.is_integer() || *e.numer() < 0 {
                return Err(SymbolicError::NonPolynomial(var.to_string()));
            }
            let n = e.to_integer() as usize;
            let mut f = m.0.clone();
            f.remove(&Atom::Sym(var.to_string()));
            let rest = SymExpr::term(c.clone(), Monomial(f));
            let s = &power_sum(n, hi)? - &power_sum(n, lo)?;
            out = &out + &(&rest * &s);
        }
        Ok(out)
    }
}

/// Bernoulli numbers B_0..B_n with B_1 = +1/2.
fn bernoulli(n: usize) -> Vec<BigRational> {
    let mut b = vec![BigRational::zero(); n + 1];
    b[0] = BigRational::one();
    for m in 1..=n {
        let mut s = BigRational::zero();
        for k in 0..m {
            s += binom(m + 1, k) * &b[k];
        }
        b[m] = -s / big(m as i64 + 1);
    }
    if n >= 1 {
        b[1] = BigRational::new(BigInt::from(1), BigInt::from(2));
    }
    b
}

fn binom(n: usize, k: usize) -> BigRational {
    let mut r = BigInt::one();
    for i in 0..k {
        r = r * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    BigRational::from_integer(r)
}

/// Σ_{v=0}^{m-1} v^n as a polynomial in `m` (Faulhaber).
fn power_sum(n: usize, m: &SymExpr) -> Result<SymExpr, SymbolicError> {
    let b = bernoulli(n);
    let mut out = SymExpr::zero();
    for (k, bk) in b.iter().enumerate() {
        // B_1 = +1/2 convention gives Σ_{v=1}^{m} v^n; shift by subtracting m^n.
        let coef = binom(n + 1, k) * bk / big(n as i64 + 1);
        out = &out + &m.pow_int((n + 1 - k) as i64)?.scale(&coef);
    }
    let out = &out - &m.pow_int(n as i64)?;
    Ok(if n == 0 { &out + &SymExpr::one() } else { out })
}

impl Add for &SymExpr {
    type Output = SymExpr;
    fn add(self, rhs: &SymExpr) -> SymExpr {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl Sub for &SymExpr {
    type Output = SymExpr;
    fn sub(self, rhs: &SymExpr) -> SymExpr {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }
}

impl Mul for &SymExpr {
    type Output = SymExpr;
    fn mul(self, rhs: &SymExpr) -> SymExpr {
        let mut out = SymExpr::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &rhs.terms {
                let (m, c) = SymExpr::mul_terms(m1, c1, m2, c2);
                out.add_term(m, c);
            }
        }
        out
    }
}

impl Neg for &SymExpr {
    type Output = SymExpr;
    fn neg(self) -> SymExpr {
        self.scale(&-BigRational::one())
    }
}

/// Division by a monomial. Panics on division by a sum; use [`SymExpr::checked_div`].
impl Div for &SymExpr {
    type Output = SymExpr;
    fn div(self, rhs: &SymExpr) -> SymExpr {
        self.checked_div(rhs).expect("division by a non-monomial expression")
    }
}

impl SymExpr {
    pub fn checked_div(&self, rhs: &SymExpr) -> Result<SymExpr, SymbolicError> {
        if rhs.is_zero() {
            return Err(SymbolicError::DivisionByZero);
        }
        Ok(self * &rhs.pow_int(-1)?)
    }
}

macro_rules! owned_ops {
    ($($tr:ident $f:ident),*) => {$(
        impl $tr for SymExpr {
            type Output = SymExpr;
            fn $f(self, rhs: SymExpr) -> SymExpr { (&self).$f(&rhs) }
        }
        impl $tr<&SymExpr> for SymExpr {
            type Output = SymExpr;
            fn $f(self, rhs: &SymExpr) -> SymExpr { (&self).$f(rhs) }
        }
    )*};
}
owned_ops!(Add add, Sub sub, Mul mul, Div div);

impl Neg for SymExpr {
    type Output = SymExpr;
    fn neg(self) -> SymExpr {
        -&self
    }
}

impl From<i64> for SymExpr {
    fn from(n: i64) -> Self {
        SymExpr::int(n)
    }
}
