//! Asymptotic geometric programs of the form
//! `max K·∏ b_t^{a_t}  s.t.  Σ_k c_k·∏ b_t^{e_kt} ≤ X,  b_t ≥ 1`.
//!
//! The dual weights `δ` solve `min Σδ  s.t.  Σ_k δ_k e_k − μ = a,  δ, μ ≥ 0`.
//! Their sum `λ` is the exponent of X in the optimum and the constant is
//! `K·∏ (δ_k / (c_k λ))^{δ_k}`, minimized over the optimal face.

use nalgebra::{DMatrix, DVector};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::lp::{Lp, LpOutcome, Rel};
use crate::symbolic::{Exp, SymExpr};

#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub coeff: BigRational,
    pub exps: Vec<BigRational>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum GpError {
    /// Variable `t` appears in no constraint term.
    Unbounded(usize),
    Degenerate,
    Numeric(String),
}

#[derive(Clone, Debug)]
pub struct GpSolution {
    pub lambda: BigRational,
    pub delta: Vec<BigRational>,
    pub mu: Vec<BigRational>,
    /// Constant of the optimum, including the objective coefficient.
    pub coeff: SymExpr,
    /// Per variable `(C_t, y_t)` with `b_t = C_t·X^{y_t}`.
    pub tiles: Vec<(SymExpr, BigRational)>,
    /// False when the optimal face could not be resolved exactly and a vertex was used.
    pub exact: bool,
    pub warnings: Vec<String>,
}

impl GpSolution {
    pub fn chi(&self, x: &SymExpr) -> Result<SymExpr, crate::symbolic::SymbolicError> {
        Ok(&self.coeff * &x.pow(to_exp(&self.lambda))?)
    }
}

pub(crate) fn to_exp(r: &BigRational) -> Exp {
    Exp::new(r.numer().to_i64().expect("exponent numerator"), r.denom().to_i64().expect("exponent denominator"))
}

pub(crate) fn exp_to_big(e: Exp) -> BigRational {
    BigRational::new((*e.numer()).into(), (*e.denom()).into())
}

fn big(n: i64) -> BigRational {
    BigRational::from_integer(n.into())
}

/// Merges terms with identical exponent vectors.
pub fn merge(terms: &[Term]) -> Vec<Term> {
    let mut out: Vec<Term> = Vec::new();
    for t in terms {
        match out.iter_mut().find(|o| o.exps == t.exps) {
            Some(o) => o.coeff += &t.coeff,
            None => out.push(t.clone()),
        }
    }
    out.retain(|t| t.coeff.is_positive());
    out
}

struct Dual<'a> {
    terms: &'a [Term],
    a: &'a [BigRational],
}

impl Dual<'_> {
    fn m(&self) -> usize {
        self.terms.len()
    }

    fn n(&self) -> usize {
        self.a.len()
    }

    fn lp(&self) -> Lp {
        let (m, n) = (self.m(), self.n());
        let mut lp = Lp::new(m + n);
        for t in 0..n {
            let mut row = vec![BigRational::zero(); m + n];
            for (k, term) in self.terms.iter().enumerate() {
                row[k] = term.exps[t].clone();
            }
            row[m + t] = -BigRational::one();
            lp.add(row, Rel::Eq, self.a[t].clone());
        }
        lp
    }

    fn sum_delta(&self) -> Vec<BigRational> {
        (0..self.m() + self.n()).map(|j| if j < self.m() { BigRational::one() } else { BigRational::zero() }).collect()
    }

    /// `Σ δ ln(δ / (c λ))`, the log of the constant without the objective coefficient.
    fn g(&self, delta: &[f64], lambda: f64) -> f64 {
        delta
            .iter()
            .zip(self.terms)
            .filter(|(d, _)| **d > 0.0)
            .map(|(d, t)| d * (d / (t.coeff.to_f64().unwrap() * lambda)).ln())
            .sum()
    }
}

/// Solves the program asymptotically in X. `objective` is `K`.
///
/// Variables that appear with identical exponents everywhere only matter
/// through their product, so they are solved as one and the whole extent is
/// given to the first of them; the rest get tile 1.
pub fn solve(terms: &[Term], a: &[BigRational], objective: &BigRational) -> Result<GpSolution, GpError> {
    let n = a.len();
    let column = |t: usize| (a[t].clone(), terms.iter().map(|k| k.exps[t].clone()).collect::<Vec<_>>());
    let mut reps: Vec<usize> = Vec::new();
    let owner: Vec<usize> = (0..n)
        .map(|t| match reps.iter().position(|&r| column(r) == column(t)) {
            Some(k) => k,
            None => {
                reps.push(t);
                reps.len() - 1
            }
        })
        .collect();
    if reps.len() == n {
        return solve_distinct(terms, a, objective);
    }
    let reduced: Vec<Term> = terms
        .iter()
        .map(|k| Term { coeff: k.coeff.clone(), exps: reps.iter().map(|&r| k.exps[r].clone()).collect() })
        .collect();
    let ra: Vec<BigRational> = reps.iter().map(|&r| a[r].clone()).collect();
    let mut sol = solve_distinct(&reduced, &ra, objective).map_err(|e| match e {
        GpError::Unbounded(k) => GpError::Unbounded(reps[k]),
        e => e,
    })?;
    let (tiles, mu) = (std::mem::take(&mut sol.tiles), std::mem::take(&mut sol.mu));
    for (t, &k) in owner.iter().enumerate() {
        if reps[k] == t {
            sol.tiles.push(tiles[k].clone());
            sol.mu.push(mu[k].clone());
        } else {
            sol.tiles.push((SymExpr::one(), BigRational::zero()));
            sol.mu.push(BigRational::zero());
        }
    }
    Ok(sol)
}

fn solve_distinct(terms: &[Term], a: &[BigRational], objective: &BigRational) -> Result<GpSolution, GpError> {
    let terms = terms.to_vec();
    if terms.is_empty() || terms.iter().all(|t| t.exps.iter().all(|e| e.is_zero())) {
        return Err(GpError::Degenerate);
    }
    let dual = Dual { terms: &terms, a };
    let (m, n) = (dual.m(), dual.n());
    let base = dual.lp();
    let lambda = match base.minimize(&dual.sum_delta()) {
        LpOutcome::Optimal { value, .. } => value,
        _ => {
            let t = (0..n)
                .find(|&t| a[t].is_positive() && terms.iter().all(|k| !k.exps[t].is_positive()))
                .unwrap_or(0);
            return Err(GpError::Unbounded(t));
        }
    };
    let mut face = base.clone();
    face.add(dual.sum_delta(), Rel::Eq, lambda.clone());

    // Range of every dual variable over the optimal face.
    let mut vertices: Vec<Vec<BigRational>> = Vec::new();
    let mut free = vec![false; m + n];
    let mut unique = true;
    for j in 0..m + n {
        let mut c = vec![BigRational::zero(); m + n];
        c[j] = BigRational::one();
        let hi = face.maximize(&c);
        let lo = face.minimize(&c);
        let (Some((xh, vh)), Some((xl, vl))) = (hi.optimal(), lo.optimal()) else {
            return Err(GpError::Numeric("optimal face is not bounded".into()));
        };
        free[j] = vh.is_positive();
        if vh != vl {
            unique = false;
        }
        vertices.push(xh.to_vec());
        vertices.push(xl.to_vec());
    }
    let mut warnings = Vec::new();
    let (w, exact) = if unique {
        (vertices[0].clone(), true)
    } else {
        match minimize_on_face(&dual, &lambda, &vertices, &free) {
            Some(w) => (w, true),
            None => {
                let lam = lambda.to_f64().unwrap();
                let best = vertices
                    .iter()
                    .min_by(|x, y| {
                        let gx = dual.g(&f64s(&x[..m]), lam);
                        let gy = dual.g(&f64s(&y[..m]), lam);
                        gx.partial_cmp(&gy).unwrap()
                    })
                    .unwrap()
                    .clone();
                warnings.push("optimal dual face resolved by its best vertex; the tile constant is an upper bound".into());
                (best, false)
            }
        }
    };
    let delta = w[..m].to_vec();
    let mu = w[m..].to_vec();
    let mut coeff = SymExpr::constant(objective.clone());
    for (d, t) in delta.iter().zip(&terms) {
        if d.is_positive() {
            let q = d / (&t.coeff * &lambda);
            coeff = &coeff * &SymExpr::constant(q).pow(to_exp(d)).map_err(|e| GpError::Numeric(e.to_string()))?;
        }
    }
    let tiles = recover_tiles(&terms, &delta, &mu, &lambda, &mut warnings)?;
    Ok(GpSolution { lambda, delta, mu, coeff, tiles, exact, warnings })
}

fn f64s(v: &[BigRational]) -> Vec<f64> {
    v.iter().map(|x| x.to_f64().unwrap()).collect()
}

/// Best rational approximation with a bounded denominator.
pub fn rationalize(x: f64, max_den: i64) -> BigRational {
    let (mut p0, mut q0, mut p1, mut q1) = (0i64, 1i64, 1i64, 0i64);
    let mut v = x;
    for _ in 0..64 {
        let a = v.floor();
        if a.abs() > 1e15 {
            break;
        }
        let a = a as i64;
        let (p2, q2) = (a * p1 + p0, a * q1 + q0);
        if q2 > max_den {
            break;
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let frac = v - a as f64;
        if frac.abs() < 1e-12 {
            break;
        }
        v = 1.0 / frac;
    }
    if q1 == 0 {
        return big(x.round() as i64);
    }
    BigRational::new(p1.into(), q1.into())
}

/// Minimizes the dual constant over the optimal face by a barrier Newton
/// method, then snaps the minimizer to small rationals and checks it exactly.
fn minimize_on_face(
    dual: &Dual,
    lambda: &BigRational,
    vertices: &[Vec<BigRational>],
    free: &[bool],
) -> Option<Vec<BigRational>> {
    let (m, n) = (dual.m(), dual.n());
    let idx: Vec<usize> = (0..m + n).filter(|&j| free[j]).collect();
    let lam = lambda.to_f64()?;
    // Interior start: average of the face vertices maximizing each free variable.
    let mut w = DVector::<f64>::zeros(idx.len());
    for &j in &idx {
        let v = &vertices[2 * j];
        for (q, &i) in idx.iter().enumerate() {
            w[q] += v[i].to_f64()? / idx.len() as f64;
        }
    }
    // Equalities restricted to free variables.
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for t in 0..n {
        let r: Vec<f64> = idx
            .iter()
            .map(|&j| {
                if j < m {
                    dual.terms[j].exps[t].to_f64().unwrap()
                } else if j == m + t {
                    -1.0
                } else {
                    0.0
                }
            })
            .collect();
        rows.push((r, dual.a[t].to_f64()?));
    }
    rows.push((idx.iter().map(|&j| if j < m { 1.0 } else { 0.0 }).collect(), lam));
    let k = idx.len();
    let r = rows.len();
    let coef: Vec<f64> = idx.iter().map(|&j| if j < m { dual.terms[j].coeff.to_f64().unwrap() * lam } else { 0.0 }).collect();
    let is_delta: Vec<bool> = idx.iter().map(|&j| j < m).collect();
    let phi = |w: &DVector<f64>, tau: f64| -> f64 {
        (0..k)
            .map(|q| {
                let base = if is_delta[q] { w[q] * (w[q] / coef[q]).ln() } else { 0.0 };
                base - tau * w[q].ln()
            })
            .sum()
    };
    let mut tau = 1.0;
    while tau > 1e-15 {
        for _ in 0..100 {
            let mut kkt = DMatrix::<f64>::zeros(k + r, k + r);
            let mut rhs = DVector::<f64>::zeros(k + r);
            for q in 0..k {
                let (gq, hq) = if is_delta[q] { ((w[q] / coef[q]).ln() + 1.0, 1.0 / w[q]) } else { (0.0, 0.0) };
                kkt[(q, q)] = hq + tau / (w[q] * w[q]);
                rhs[q] = -(gq - tau / w[q]);
            }
            for (i, (row, _)) in rows.iter().enumerate() {
                for q in 0..k {
                    kkt[(k + i, q)] = row[q];
                    kkt[(q, k + i)] = row[q];
                }
            }
            let sol = kkt.svd(true, true).solve(&rhs, 1e-13).ok()?;
            let dw = sol.rows(0, k).into_owned();
            let decrement = -rhs.rows(0, k).dot(&dw);
            if decrement.abs() < 1e-20 {
                break;
            }
            let mut s = 1.0;
            while (0..k).any(|q| w[q] + s * dw[q] <= 0.0) {
                s *= 0.5;
            }
            let f0 = phi(&w, tau);
            while phi(&(&w + s * &dw), tau) > f0 - 0.25 * s * decrement && s > 1e-16 {
                s *= 0.5;
            }
            w += s * &dw;
        }
        tau *= 0.1;
    }
    let mut delta_num = vec![0.0; m];
    for (q, &j) in idx.iter().enumerate() {
        if j < m {
            delta_num[j] = w[q];
        }
    }
    let g_num = dual.g(&delta_num, lam);
    let delta: Vec<BigRational> = delta_num.iter().map(|&d| rationalize(d, 1000)).collect();
    if delta.iter().any(|d| d.is_negative()) || delta.iter().sum::<BigRational>() != *lambda {
        return None;
    }
    let mut out = delta.clone();
    for t in 0..n {
        let mut mu = -dual.a[t].clone();
        for (d, term) in delta.iter().zip(dual.terms) {
            mu += d * &term.exps[t];
        }
        if mu.is_negative() || (!free[m + t] && !mu.is_zero()) {
            return None;
        }
        out.push(mu);
    }
    let g_rat = dual.g(&f64s(&delta), lam);
    ((g_rat - g_num).abs() <= 1e-9).then_some(out)
}

/// Tile exponents from complementary slackness, constants from the balance
/// `c_k·m_k = X·δ_k/λ` of every active term.
fn recover_tiles(
    terms: &[Term],
    delta: &[BigRational],
    mu: &[BigRational],
    lambda: &BigRational,
    warnings: &mut Vec<String>,
) -> Result<Vec<(SymExpr, BigRational)>, GpError> {
    let n = mu.len();
    let active: Vec<usize> = (0..terms.len()).filter(|&k| delta[k].is_positive()).collect();
    let inactive: Vec<usize> = (0..terms.len()).filter(|&k| !delta[k].is_positive()).collect();
    let pinned: Vec<usize> = (0..n).filter(|&t| mu[t].is_positive()).collect();

    // Exponents: y ≥ 0, active terms at X^1, pinned tiles at X^0; then push the
    // inactive terms as low as possible and balance the tiles.
    let mut lp = Lp::new(n + 1);
    lp.set_free(n);
    let unit = |t: usize| -> Vec<BigRational> {
        let mut r = vec![BigRational::zero(); n + 1];
        r[t] = BigRational::one();
        r
    };
    for &k in &active {
        let mut r = terms[k].exps.clone();
        r.push(BigRational::zero());
        lp.add(r, Rel::Eq, BigRational::one());
    }
    for &t in &pinned {
        lp.add(unit(t)[..].to_vec(), Rel::Eq, BigRational::zero());
    }
    for &k in &inactive {
        let mut r = terms[k].exps.clone();
        r.push(-BigRational::one());
        lp.add(r, Rel::Le, BigRational::zero());
    }
    if !inactive.is_empty() {
        let z = match lp.minimize(&unit(n)) {
            LpOutcome::Optimal { value, .. } => value,
            _ => return Err(GpError::Numeric("tile exponents are infeasible".into())),
        };
        lp.add(unit(n), Rel::Le, z);
    } else {
        lp.add(unit(n), Rel::Eq, BigRational::zero());
    }
    let mut bal = Lp::new(n + 2);
    bal.set_free(n);
    for c in lp_rows(&lp) {
        let mut r = c.0;
        r.push(BigRational::zero());
        bal.add(r, c.1, c.2);
    }
    for t in 0..n {
        let mut r = vec![BigRational::zero(); n + 2];
        r[t] = BigRational::one();
        r[n + 1] = -BigRational::one();
        bal.add(r, Rel::Le, BigRational::zero());
    }
    let mut obj = vec![BigRational::zero(); n + 2];
    obj[n + 1] = BigRational::one();
    let y = match bal.minimize(&obj) {
        LpOutcome::Optimal { x, .. } => x[..n].to_vec(),
        _ => return Err(GpError::Numeric("tile exponents are infeasible".into())),
    };

    // Constants: solve Σ_t e_kt·L_t = ln q_k symbolically as combinations of ln q_k.
    let q: Vec<BigRational> = active.iter().map(|&k| &delta[k] / (&terms[k].coeff * lambda)).collect();
    let na = active.len();
    let mut rows: Vec<(Vec<BigRational>, Vec<BigRational>)> = Vec::new();
    for (i, &k) in active.iter().enumerate() {
        let mut rhs = vec![BigRational::zero(); na];
        rhs[i] = BigRational::one();
        rows.push((terms[k].exps.clone(), rhs));
    }
    for &t in &pinned {
        rows.push((unit(t)[..n].to_vec(), vec![BigRational::zero(); na]));
    }
    let (solution, dropped) = solve_consistent(rows, n, na);
    if dropped > 0 {
        warnings.push(format!("{dropped} tile balance equations were inconsistent and dropped"));
    }
    let mut tiles = Vec::new();
    for t in 0..n {
        let mut c = SymExpr::one();
        for (i, qi) in q.iter().enumerate() {
            let e = &solution[t][i];
            if !e.is_zero() {
                c = &c * &SymExpr::constant(qi.clone()).pow(to_exp(e)).map_err(|e| GpError::Numeric(e.to_string()))?;
            }
        }
        tiles.push((c, y[t].clone()));
    }
    Ok(tiles)
}

fn lp_rows(lp: &Lp) -> Vec<(Vec<BigRational>, Rel, BigRational)> {
    lp.constraints().iter().map(|c| (c.coeffs.clone(), c.rel, c.rhs.clone())).collect()
}

/// Gauss-Jordan elimination with vector right-hand sides; free variables are 0.
/// Inconsistent rows are dropped and counted.
fn solve_consistent(
    mut rows: Vec<(Vec<BigRational>, Vec<BigRational>)>,
    n: usize,
    na: usize,
) -> (Vec<Vec<BigRational>>, usize) {
    let mut pivots: Vec<(usize, usize)> = Vec::new();
    let mut r = 0;
    for col in 0..n {
        let Some(p) = (r..rows.len()).find(|&i| !rows[i].0[col].is_zero()) else { continue };
        rows.swap(r, p);
        let inv = BigRational::one() / &rows[r].0[col];
        rows[r].0.iter_mut().for_each(|v| *v *= &inv);
        rows[r].1.iter_mut().for_each(|v| *v *= &inv);
        for i in 0..rows.len() {
            if i != r && !rows[i].0[col].is_zero() {
                let f = rows[i].0[col].clone();
                let (pc, pr) = (rows[r].0.clone(), rows[r].1.clone());
                rows[i].0.iter_mut().zip(&pc).for_each(|(v, p)| *v -= &f * p);
                rows[i].1.iter_mut().zip(&pr).for_each(|(v, p)| *v -= &f * p);
            }
        }
        pivots.push((r, col));
        r += 1;
    }
    let dropped = rows[r..].iter().filter(|row| row.1.iter().any(|v| !v.is_zero())).count();
    let mut sol = vec![vec![BigRational::zero(); na]; n];
    for (row, col) in pivots {
        sol[col] = rows[row].1.clone();
    }
    (sol, dropped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::sym;

    fn term(c: i64, e: &[i64]) -> Term {
        Term { coeff: big(c), exps: e.iter().map(|&x| big(x)).collect() }
    }

    fn ones(n: usize) -> Vec<BigRational> {
        vec![BigRational::one(); n]
    }

    #[test]
    fn matrix_multiply() {
        let t = [term(1, &[1, 1, 0]), term(1, &[0, 1, 1]), term(1, &[1, 0, 1])];
        let s = solve(&t, &ones(3), &BigRational::one()).unwrap();
        assert_eq!(s.lambda, BigRational::new(3.into(), 2.into()));
        assert_eq!(s.chi(&sym("X")).unwrap(), sym("X^(3/2) / 3^(3/2)"));
        for (c, y) in &s.tiles {
            assert_eq!(*y, BigRational::new(1.into(), 2.into()));
            assert_eq!(*c, sym("1 / sqrt(3)"));
        }
    }

    #[test]
    fn stencil() {
        let t = [term(2, &[1, 0]), term(2, &[0, 1])];
        let s = solve(&t, &ones(2), &BigRational::one()).unwrap();
        assert_eq!(s.chi(&sym("X")).unwrap(), sym("X^2 / 16"));
    }

    #[test]
    fn linear_and_unbounded() {
        let s = solve(&[term(1, &[1])], &ones(1), &BigRational::one()).unwrap();
        assert_eq!(s.chi(&sym("X")).unwrap(), sym("X"));
        assert_eq!(solve(&[term(1, &[1, 0])], &ones(2), &BigRational::one()).unwrap_err(), GpError::Unbounded(1));
        assert_eq!(solve(&[term(1, &[0])], &ones(1), &BigRational::one()).unwrap_err(), GpError::Degenerate);
    }

    #[test]
    fn pinned_tile() {
        // b1·b2 + b2 ≤ X: the second term forces nothing, b2 stays at 1 only if useful.
        let t = [term(1, &[1, 1]), term(1, &[0, 2])];
        let s = solve(&t, &ones(2), &BigRational::one()).unwrap();
        assert_eq!(s.lambda, BigRational::one());
        assert!(s.mu[1].is_positive() || s.delta[1].is_zero());
    }

    #[test]
    fn non_unique_face_is_resolved() {
        // b1² + b2² + b1·b2 ≤ X: every dual point on an edge has λ = 1.
        let t = [term(1, &[2, 0]), term(1, &[0, 2]), term(1, &[1, 1])];
        let s = solve(&t, &ones(2), &BigRational::one()).unwrap();
        assert!(s.exact);
        assert_eq!(s.chi(&sym("X")).unwrap(), sym("X / 3"));
        assert_eq!(s.delta, vec![BigRational::new(1.into(), 3.into()); 3]);
        assert_eq!(s.tiles[0].0, sym("1 / sqrt(3)"));
    }

    #[test]
    fn rationalize_small() {
        assert_eq!(rationalize(1.0 / 3.0, 1000), BigRational::new(1.into(), 3.into()));
        assert_eq!(rationalize(0.75, 1000), BigRational::new(3.into(), 4.into()));
        assert_eq!(rationalize(2.0, 1000), big(2));
    }
}
