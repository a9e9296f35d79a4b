//! Single-statement bounds: access-set sizes, optimal tiling, intensity and
//! the resulting I/O lower bound.

pub mod gp;
pub mod numeric;

use std::collections::{BTreeMap, HashMap};

use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::frontend::{AccessInfo, DimIndex, Loop, Statement};
use crate::soap::{domain_is_empty, CaseCondition, Regime, SoapStatement};
use crate::symbolic::{Exp, GrowthOrder, Monomial, SymExpr, SymbolicError};

use gp::{GpError, GpSolution, Term};

/// Symbol for the size of the fast memory at a subcomputation.
pub const X: &str = "X";
/// Symbol for the fast-memory capacity.
pub const S: &str = "S";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error("statement at line {line}: iteration domain is empty for every parameter value")]
    EmptyDomain { line: usize },
    #[error("statement at line {line}: tile of `{var}` is not constrained by any access")]
    UnboundedTile { line: usize, var: String },
    #[error("statement at line {line}: access sets do not depend on any tile")]
    DegenerateProgram { line: usize },
    #[error("χ(X) = {0} is not a single monomial in X")]
    NonMonomialChi(String),
    #[error("χ(X) = {0} grows slower than X; intensity has no finite minimizer")]
    SublinearChi(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
}

pub fn tile_symbol(var: &str) -> String {
    format!("b_{var}")
}

fn x() -> SymExpr {
    SymExpr::symbol(X)
}

fn s() -> SymExpr {
    SymExpr::symbol(S)
}

/// Number of lattice points of the iteration domain, summed exactly.
pub fn domain_size(st: &Statement) -> Result<SymExpr, BoundsError> {
    let vars = st.iter_vars();
    let params: Vec<String> = st
        .loops
        .iter()
        .flat_map(|l| l.lower.symbols().into_iter().chain(l.upper.symbols()))
        .filter(|p| !vars.contains(p))
        .collect();
    if domain_is_empty(&st.loops, &params) {
        return Err(BoundsError::EmptyDomain { line: st.line });
    }
    loop_count(&st.loops)
}

pub(crate) fn loop_count(loops: &[Loop]) -> Result<SymExpr, BoundsError> {
    let mut e = SymExpr::one();
    for l in loops.iter().rev() {
        e = e.sum_over(&l.var, &l.lower, &l.upper)?;
    }
    Ok(e)
}

/// `2·∏|Dⁱ| − ∏(|Dⁱ| − |t̂ⁱ|)` for input-only arrays, `∏|Dⁱ| − ∏(|Dⁱ| − |t̂ⁱ|)`
/// when the statement also writes the array.
pub fn access_set_size(sizes: &[SymExpr], hats: &[usize], includes_output: bool) -> SymExpr {
    let mut volume = SymExpr::one();
    let mut shrunk = SymExpr::one();
    for (d, &h) in sizes.iter().zip(hats) {
        volume = &volume * d;
        shrunk = &shrunk * &(d - &SymExpr::int(h as i64));
    }
    if includes_output {
        &volume - &shrunk
    } else {
        &(&volume + &volume) - &shrunk
    }
}

/// Access-set lower bound together with the regime it assumes.
#[derive(Clone, Debug, PartialEq)]
pub struct AccessBound {
    pub size: SymExpr,
    /// `(variable, k)` meaning the bound assumes `|D^variable| > k`.
    pub assumptions: Vec<(String, usize)>,
}

/// Access-set bound of one conforming array group; combined dimensions use
/// the product of their ranges.
pub fn access_set_bound(info: &AccessInfo, tiles: &HashMap<String, SymExpr>) -> AccessBound {
    let sizes = dim_sizes(info, tiles, Regime::Injective, &mut std::iter::empty());
    bound_from_sizes(info, sizes)
}

fn bound_from_sizes(info: &AccessInfo, (sizes, repeated): (Vec<SymExpr>, Vec<bool>)) -> AccessBound {
    let mut hats = info.offset_sizes();
    for (h, &r) in hats.iter_mut().zip(&repeated) {
        if r {
            *h = 0;
        }
    }
    let mut assumptions = Vec::new();
    for (d, &h) in info.dims.iter().zip(&hats) {
        if h > 0 {
            if let DimIndex::Var(v) = d {
                assumptions.push((v.clone(), h));
            }
        }
    }
    AccessBound { size: access_set_size(&sizes, &hats, info.includes_output), assumptions }
}

/// Per-dimension extents. Under maximum overlap every combined dimension takes
/// the extent of the variable drawn from `choice`.
///
/// A variable contributes its extent once: a dimension whose variables all
/// appeared in earlier dimensions (the diagonal `A[i, i]`) adds nothing, and
/// is flagged so its offsets are ignored.
fn dim_sizes(
    info: &AccessInfo,
    tiles: &HashMap<String, SymExpr>,
    regime: Regime,
    choice: &mut dyn Iterator<Item = usize>,
) -> (Vec<SymExpr>, Vec<bool>) {
    let tile = |v: &String| tiles.get(v).cloned().unwrap_or_else(|| SymExpr::symbol(&tile_symbol(v)));
    let mut seen: Vec<&String> = Vec::new();
    let mut sizes = Vec::new();
    let mut repeated = Vec::new();
    for d in &info.dims {
        let vars: Vec<&String> = match d {
            DimIndex::Const => Vec::new(),
            DimIndex::Var(v) => vec![v],
            DimIndex::Combination(vs) => match regime {
                Regime::Injective => vs.iter().collect(),
                Regime::MaxOverlap => vec![&vs[choice.next().unwrap_or(0) % vs.len()]],
            },
        };
        let fresh: Vec<&String> = vars.iter().copied().filter(|v| !seen.contains(v)).collect();
        repeated.push(!vars.is_empty() && fresh.is_empty());
        sizes.push(fresh.iter().fold(SymExpr::one(), |acc, v| &acc * &tile(v)));
        seen.extend(fresh);
    }
    (sizes, repeated)
}

/// Numeric verification of a tiling at one value of X.
#[derive(Clone, Debug, PartialEq)]
pub struct KktCheck {
    pub x: f64,
    /// Active constraint terms evaluated at the tiles.
    pub constraint: f64,
    /// `(constraint − X)/X`; at most 1e-9 when feasible.
    pub relative_residual: f64,
    pub min_tile: f64,
    /// Relative size of everything the asymptotic program neglects: inactive
    /// terms and lower-order parts of the access sets.
    pub lower_order_ratio: f64,
    /// χ(X) against the product of the tiles.
    pub chi_mismatch: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TileSolution {
    /// Iteration variables in loop order.
    pub vars: Vec<String>,
    /// Tile extent of each iteration variable as a function of X.
    pub tile_sizes: BTreeMap<String, SymExpr>,
    pub chi: SymExpr,
    /// Access-set size of every input array at the optimum, in X.
    pub constraint_terms: Vec<(String, SymExpr)>,
    /// Access-set sizes in the tile symbols `b_<var>`.
    pub access_sets: Vec<(String, SymExpr)>,
    /// Dominant monomials of the constraint, over `vars`.
    pub posynomial: Vec<Term>,
    /// Terms of `posynomial` that are tight at the asymptotic optimum.
    pub active: Vec<bool>,
    pub kkt_residual_check: Option<KktCheck>,
    /// False when the optimum had to be approximated by a vertex.
    pub exact: bool,
    pub assumptions: Vec<(String, usize)>,
    pub warnings: Vec<String>,
}

fn point(x: f64) -> HashMap<String, f64> {
    HashMap::from([(X.to_string(), x)])
}

impl TileSolution {
    /// Verifies feasibility and optimality bookkeeping at the given X.
    pub fn check_at(&self, xv: f64) -> KktCheck {
        let pt = point(xv);
        let mut tiles: HashMap<String, f64> = HashMap::new();
        for (v, e) in &self.tile_sizes {
            tiles.insert(tile_symbol(v), e.evaluate(&pt));
        }
        let constraint: f64 = self
            .posynomial
            .iter()
            .zip(&self.active)
            .filter(|(_, on)| **on)
            .map(|(t, _)| {
                let mut v = t.coeff.to_f64().unwrap();
                for (var, e) in self.vars.iter().zip(&t.exps) {
                    v *= tiles[&tile_symbol(var)].powf(e.to_f64().unwrap());
                }
                v
            })
            .sum();
        let full: f64 = self.access_sets.iter().map(|(_, e)| e.evaluate(&tiles)).sum();
        let min_tile = tiles.values().cloned().fold(f64::INFINITY, f64::min);
        let product: f64 = tiles.values().product();
        let chi = self.chi.evaluate(&pt);
        let relative_residual = (constraint - xv) / xv;
        let chi_mismatch = (product - chi).abs() / chi.abs().max(1e-300);
        KktCheck {
            x: xv,
            constraint,
            relative_residual,
            min_tile,
            lower_order_ratio: (full - constraint).abs() / constraint.abs().max(1e-300),
            chi_mismatch,
            passed: relative_residual <= 1e-9 && min_tile >= 1.0 - 1e-9 && chi_mismatch <= 1e-9,
        }
    }
}

/// Keeps the monomials of maximal total degree in the tile symbols.
fn dominant_terms(e: &SymExpr, vars: &[String]) -> Vec<Term> {
    let syms: Vec<String> = vars.iter().map(|v| tile_symbol(v)).collect();
    let top = e.terms().map(|(m, _)| m.total_degree()).max().unwrap_or_else(Exp::zero);
    e.terms()
        .filter(|(m, _)| m.total_degree() == top)
        .map(|(m, c)| Term {
            coeff: c.clone(),
            exps: syms.iter().map(|s| gp::exp_to_big(m.exponent(s))).collect(),
        })
        .collect()
}

fn combination_count(st: &SoapStatement) -> Vec<usize> {
    st.input_groups()
        .flat_map(|g| g.dims.iter())
        .filter_map(|d| match d {
            DimIndex::Combination(vs) => Some(vs.len()),
            _ => None,
        })
        .collect()
}

fn gp_error(st: &Statement, vars: &[String], e: GpError) -> BoundsError {
    match e {
        GpError::Unbounded(t) => BoundsError::UnboundedTile { line: st.line, var: vars[t].clone() },
        GpError::Degenerate => BoundsError::DegenerateProgram { line: st.line },
        GpError::Numeric(m) => BoundsError::Numeric(m),
    }
}

/// Maximal subcomputation under `Σ|A_j| ≤ X`, solved as a geometric program
/// over the dominant monomials of each access set.
pub fn solve_tiling(st: &SoapStatement) -> Result<TileSolution, BoundsError> {
    let vars = st.vars();
    let regime = st.regime();
    let counts = combination_count(st);
    let choices: Vec<Vec<usize>> = match regime {
        Regime::Injective => vec![vec![]],
        Regime::MaxOverlap => {
            let mut all = vec![vec![]];
            for &c in &counts {
                all = all.into_iter().flat_map(|p: Vec<usize>| (0..c).map(move |k| [p.clone(), vec![k]].concat())).collect();
            }
            all
        }
    };
    let a = vec![BigRational::one(); vars.len()];
    let mut best: Option<(GpSolution, Vec<(String, SymExpr)>, Vec<Term>, Vec<(String, usize)>)> = None;
    for choice in &choices {
        let mut it = choice.iter().copied();
        let mut sets = Vec::new();
        let mut terms = Vec::new();
        let mut assumptions = Vec::new();
        for g in st.input_groups() {
            let sizes = dim_sizes(g, &HashMap::new(), regime, &mut it);
            let b = bound_from_sizes(g, sizes);
            terms.extend(dominant_terms(&b.size, &vars));
            sets.push((g.array.clone(), b.size));
            assumptions.extend(b.assumptions);
        }
        let terms = gp::merge(&terms);
        let sol = gp::solve(&terms, &a, &BigRational::one()).map_err(|e| gp_error(&st.statement, &vars, e))?;
        let better = match &best {
            None => true,
            Some((b, ..)) => {
                sol.lambda < b.lambda || (sol.lambda == b.lambda && sol.coeff.evaluate(&HashMap::new()) < b.coeff.evaluate(&HashMap::new()))
            }
        };
        if better {
            best = Some((sol, sets, terms, assumptions));
        }
    }
    let (sol, sets, posynomial, assumptions) = best.expect("at least one choice");
    let mut tile_sizes = BTreeMap::new();
    let mut subst = HashMap::new();
    for (v, (c, y)) in vars.iter().zip(&sol.tiles) {
        let t = c * &x().pow(gp::to_exp(y))?;
        subst.insert(tile_symbol(v), t.clone());
        tile_sizes.insert(v.clone(), t);
    }
    let constraint_terms =
        sets.iter().map(|(n, e)| Ok((n.clone(), e.substitute(&subst)?))).collect::<Result<Vec<_>, SymbolicError>>()?;
    let chi = sol.chi(&x())?;
    let mut ts = TileSolution {
        vars,
        tile_sizes,
        chi,
        constraint_terms,
        access_sets: sets,
        posynomial,
        kkt_residual_check: None,
        active: sol.delta.iter().map(|d| d.is_positive()).collect(),
        exact: sol.exact,
        assumptions,
        warnings: sol.warnings,
    };
    ts.kkt_residual_check = Some(ts.check_at(1e6));
    Ok(ts)
}

/// Computational intensity ρ and the optimal memory size X₀.
#[derive(Clone, Debug, PartialEq)]
pub struct Intensity {
    pub rho: SymExpr,
    /// `None` in the copy regime (χ linear in X), where X₀ is unbounded.
    pub x0: Option<SymExpr>,
    /// Coefficient and exponent of χ(X) = c·X^α.
    pub coeff: SymExpr,
    pub alpha: Exp,
}

/// Minimizes `χ(X)/(X − S)` in closed form for `χ = c·X^α`.
pub fn intensity_and_x0(chi: &SymExpr) -> Result<Intensity, BoundsError> {
    let (m, _) = chi.as_monomial().ok_or_else(|| BoundsError::NonMonomialChi(chi.to_string()))?;
    let alpha = m.exponent(X);
    let coeff = chi.checked_div(&SymExpr::term(BigRational::one(), Monomial::sym(X, alpha)))?;
    if !coeff.symbols().is_empty() {
        return Err(BoundsError::NonMonomialChi(chi.to_string()));
    }
    if alpha < Exp::one() {
        return Err(BoundsError::SublinearChi(chi.to_string()));
    }
    if alpha == Exp::one() {
        return Ok(Intensity { rho: coeff.clone(), x0: None, coeff, alpha });
    }
    let ratio = alpha / (alpha - Exp::one());
    let x0 = s().scale(&gp::exp_to_big(ratio));
    let chi0 = chi.substitute_one(X, &x0)?;
    let rho = chi0.checked_div(&(&x0 - &s()))?;
    Ok(Intensity { rho, x0: Some(x0), coeff, alpha })
}

/// I/O lower bound of one statement or fused subgraph.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundResult {
    pub statements: Vec<usize>,
    pub label: String,
    pub q_bound: SymExpr,
    pub leading: SymExpr,
    pub x0: Option<SymExpr>,
    pub rho: SymExpr,
    pub domain: SymExpr,
    pub tiles: TileSolution,
    /// Tile extents with X = X₀ (in X when X₀ is unbounded).
    pub tiles_at_x0: BTreeMap<String, SymExpr>,
    pub case_condition: Option<CaseCondition>,
    pub warnings: Vec<String>,
}

/// Value of S used for numeric checks.
pub const CHECK_S: f64 = 1e4;

/// `Q ≥ |𝒟|·(Σ|A_j|(X₀) − S)/χ(X₀)` for a normalized statement.
pub fn statement_bound(st: &SoapStatement, order: &GrowthOrder) -> Result<BoundResult, BoundsError> {
    let domain = domain_size(&st.statement)?;
    let tiles = solve_tiling(st)?;
    let label = format!("S{}", st.statement.id);
    finish_bound(vec![st.statement.id], label, domain, tiles, st.case_condition.clone(), order)
}

pub(crate) fn finish_bound(
    statements: Vec<usize>,
    label: String,
    domain: SymExpr,
    mut tiles: TileSolution,
    case_condition: Option<CaseCondition>,
    order: &GrowthOrder,
) -> Result<BoundResult, BoundsError> {
    let it = intensity_and_x0(&tiles.chi)?;
    let mut warnings = tiles.warnings.clone();
    let (q_bound, tiles_at_x0) = match &it.x0 {
        Some(x0) => {
            let at: BTreeMap<String, SymExpr> = tiles
                .tile_sizes
                .iter()
                .map(|(v, e)| Ok((v.clone(), e.substitute_one(X, x0)?)))
                .collect::<Result<_, SymbolicError>>()?;
            let subst: HashMap<String, SymExpr> = at.iter().map(|(v, e)| (tile_symbol(v), e.clone())).collect();
            let mut total = SymExpr::zero();
            for (_, e) in &tiles.access_sets {
                total = &total + &e.substitute(&subst)?;
            }
            let chi0 = tiles.chi.substitute_one(X, x0)?;
            let q = (&domain * &(&total - &s())).checked_div(&chi0)?;
            let x0v = x0.evaluate(&HashMap::from([(S.to_string(), CHECK_S)]));
            tiles.kkt_residual_check = Some(tiles.check_at(x0v));
            (q, at)
        }
        None => (domain.checked_div(&it.coeff)?, tiles.tile_sizes.clone()),
    };
    for (v, k) in &tiles.assumptions {
        if let Some(t) = tiles_at_x0.get(v) {
            let grows = t.degree_in(S).is_positive() || t.degree_in(X).is_positive();
            let val = t.evaluate(&HashMap::new());
            if !grows && val <= *k as f64 {
                warnings.push(format!("offset exceeds tile: |D^{v}| = {t} is not larger than {k}"));
            }
        }
    }
    if let Some(k) = &tiles.kkt_residual_check {
        if !k.passed {
            warnings.push(format!(
                "tiling check failed at X = {}: residual {:.3e}, min tile {:.3}, χ mismatch {:.3e}",
                k.x, k.relative_residual, k.min_tile, k.chi_mismatch
            ));
        }
    }
    let leading = order.leading_term(&q_bound)?;
    let rho = it.rho;
    Ok(BoundResult {
        statements,
        label,
        q_bound,
        leading,
        x0: it.x0,
        rho,
        domain,
        tiles,
        tiles_at_x0,
        case_condition,
        warnings,
    })
}

/// Evaluates `e` with every parameter set to `v`, S to `s`, and X to `x`.
pub fn eval_uniform(e: &SymExpr, v: f64, s: f64) -> f64 {
    let mut pt: HashMap<String, f64> = e.symbols().into_iter().map(|p| (p, v)).collect();
    pt.insert(S.to_string(), s);
    e.evaluate(&pt)
}

#[cfg(test)]
mod tests;
