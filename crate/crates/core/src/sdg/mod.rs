//! Multi-statement bounds over the symbolic digraph of arrays.
//!
//! Every non-input array `A` contributes `|A| / max ρ_H` where the maximum
//! runs over the subgraph statements `H` containing `A`.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::bounds::{self, gp, tile_symbol, BoundsError, CHECK_S, S, X};
use crate::frontend::{AccessInfo, AccessRef, ArrayAccess, DimIndex};
use crate::soap::{Regime, SoapStatement};
use crate::symbolic::{GrowthOrder, SymExpr};

/// Default cap on non-input arrays for subgraph enumeration.
pub const DEFAULT_CAP: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SdgError {
    #[error("{count} computed arrays exceed the enumeration cap of {cap}; raise the cap or disable multi-statement analysis")]
    EnumerationCapExceeded { count: usize, cap: usize },
    #[error("subgraph {{{}}} has no common iteration space: {reason}", h.join(", "))]
    IncompatibleIterationSpaces { h: Vec<String>, reason: String },
    #[error(transparent)]
    Bounds(#[from] BoundsError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdgEdge {
    pub from: String,
    pub to: String,
    pub statement: usize,
    /// Access functions of the generating statement on `from`.
    pub accesses: Vec<ArrayAccess>,
}

#[derive(Clone, Debug)]
pub struct Sdg {
    pub vertices: Vec<String>,
    pub edges: Vec<SdgEdge>,
    pub inputs: BTreeSet<String>,
    /// Computed vertices per array: one per statement instance writing it.
    pub array_sizes: BTreeMap<String, SymExpr>,
    /// Statements producing each array, by position in `statements`.
    pub producers: BTreeMap<String, Vec<usize>>,
    pub statements: Vec<SoapStatement>,
}

impl Sdg {
    pub fn computed(&self) -> Vec<String> {
        self.vertices.iter().filter(|v| !self.inputs.contains(*v)).cloned().collect()
    }

    fn has_edge(&self, a: &str, b: &str) -> bool {
        self.edges.iter().any(|e| e.from == a && e.to == b)
    }
}

/// Builds the digraph of one projection of the program (one statement per entry).
pub fn build_sdg(statements: &[SoapStatement]) -> Result<Sdg, SdgError> {
    let mut vertices: Vec<String> = Vec::new();
    let mut edges = Vec::new();
    let mut producers: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut array_sizes: BTreeMap<String, SymExpr> = BTreeMap::new();
    let push = |v: &str, vs: &mut Vec<String>| {
        if !vs.iter().any(|x| x == v) {
            vs.push(v.to_string());
        }
    };
    for (k, st) in statements.iter().enumerate() {
        for g in st.input_groups() {
            push(&g.array, &mut vertices);
        }
        push(&st.output_array, &mut vertices);
        for g in st.input_groups() {
            edges.push(SdgEdge {
                from: g.array.clone(),
                to: st.output_array.clone(),
                statement: k,
                accesses: g.accesses.iter().filter(|a| !a.is_output).map(|a| a.access.clone()).collect(),
            });
        }
        producers.entry(st.output_array.clone()).or_default().push(k);
        let size = bounds::loop_count(&st.statement.loops)?;
        let e = array_sizes.entry(st.output_array.clone()).or_insert_with(SymExpr::zero);
        *e = &*e + &size;
    }
    let inputs = vertices.iter().filter(|v| !edges.iter().any(|e| &e.to == *v)).cloned().collect();
    Ok(Sdg { vertices, edges, inputs, array_sizes, producers, statements: statements.to_vec() })
}

/// The virtual statement of a set `H` of computed arrays.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubgraphStatement {
    pub h: BTreeSet<String>,
    pub inputs: BTreeSet<String>,
    /// Arrays of `H` whose self-edge survives (their earlier versions are loaded).
    pub self_edges: BTreeSet<String>,
    pub statements: Vec<usize>,
}

impl SubgraphStatement {
    pub fn label(&self) -> String {
        format!("{{{}}}", self.h.iter().cloned().collect::<Vec<_>>().join(", "))
    }
}

pub fn subgraph_statement(g: &Sdg, h: BTreeSet<String>) -> SubgraphStatement {
    let mut inputs = BTreeSet::new();
    let mut self_edges = BTreeSet::new();
    for e in &g.edges {
        if h.contains(&e.to) && !h.contains(&e.from) {
            inputs.insert(e.from.clone());
        }
    }
    for b in &h {
        let fed_inside = h.iter().any(|c| c != b && g.has_edge(c, b));
        if g.has_edge(b, b) && !fed_inside {
            self_edges.insert(b.clone());
            inputs.insert(b.clone());
        }
    }
    let statements = h.iter().flat_map(|a| g.producers.get(a).cloned().unwrap_or_default()).collect::<BTreeSet<_>>();
    SubgraphStatement { h, inputs, self_edges, statements: statements.into_iter().collect() }
}

/// All non-empty subsets of the computed arrays, smallest first.
pub fn enumerate_subgraphs(g: &Sdg, cap: usize) -> Result<Vec<SubgraphStatement>, SdgError> {
    let computed = g.computed();
    let n = computed.len();
    if n > cap {
        return Err(SdgError::EnumerationCapExceeded { count: n, cap });
    }
    let mut masks: Vec<u64> = (1..(1u64 << n)).collect();
    masks.sort_by_key(|m| (m.count_ones(), *m));
    Ok(masks
        .into_iter()
        .map(|m| {
            let h = (0..n).filter(|k| m >> k & 1 == 1).map(|k| computed[k].clone()).collect();
            subgraph_statement(g, h)
        })
        .collect())
}

/// Intensity of one subgraph; `None` means unbounded (nothing is loaded).
#[derive(Clone, Debug, PartialEq)]
pub struct SubgraphIntensity {
    pub rho: Option<SymExpr>,
    /// Iteration variables of each fused component.
    pub components: Vec<Vec<String>>,
    pub warnings: Vec<String>,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, x: usize) -> usize {
        if self.0[x] != x {
            let r = self.find(self.0[x]);
            self.0[x] = r;
        }
        self.0[x]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[rb] = ra;
        }
    }
}

/// Single iteration variable of an index `v + c`, if any.
fn unit_var(e: &SymExpr, vars: &[String]) -> Option<String> {
    let (coeffs, _) = e.split_affine(vars)?;
    if coeffs.len() != 1 {
        return None;
    }
    let (v, c) = coeffs.into_iter().next()?;
    (c == SymExpr::one()).then_some(v)
}

/// A representative access of `array` by statement `st`: the write if it
/// produces the array, else its first read.
fn representative(st: &SoapStatement, array: &str) -> Option<ArrayAccess> {
    let g = st.accesses.iter().find(|g| g.array == array)?;
    g.accesses.iter().find(|a| a.is_output).or_else(|| g.accesses.first()).map(|a| a.access.clone())
}

fn arrays_of(st: &SoapStatement) -> BTreeSet<String> {
    st.accesses.iter().map(|g| g.array.clone()).collect()
}

/// Statements of `sg` grouped into connected components of the sharing graph.
fn components(g: &Sdg, sg: &SubgraphStatement) -> Vec<Vec<usize>> {
    let ids = &sg.statements;
    let mut uf = UnionFind((0..ids.len()).collect());
    for a in 0..ids.len() {
        for b in a + 1..ids.len() {
            let (sa, sb) = (&g.statements[ids[a]], &g.statements[ids[b]]);
            if !arrays_of(sa).is_disjoint(&arrays_of(sb)) {
                uf.union(a, b);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for a in 0..ids.len() {
        let r = uf.find(a);
        groups.entry(r).or_default().push(ids[a]);
    }
    groups.into_values().collect()
}

/// Merged iteration space: statement variable to merged variable name.
fn unify(g: &Sdg, comp: &[usize], label: &[String]) -> Result<(Vec<String>, Vec<HashMap<String, String>>), SdgError> {
    let incompatible = |reason: String| SdgError::IncompatibleIterationSpaces { h: label.to_vec(), reason };
    let mut slots: Vec<(usize, String)> = Vec::new();
    for &s in comp {
        for v in g.statements[s].vars() {
            slots.push((s, v));
        }
    }
    let slot = |s: usize, v: &str, slots: &[(usize, String)]| slots.iter().position(|(a, b)| *a == s && b == v).unwrap();
    let mut uf = UnionFind((0..slots.len()).collect());
    for (x, &a) in comp.iter().enumerate() {
        for &b in &comp[x + 1..] {
            let (sa, sb) = (&g.statements[a], &g.statements[b]);
            for array in arrays_of(sa).intersection(&arrays_of(sb)) {
                let (Some(ra), Some(rb)) = (representative(sa, array), representative(sb, array)) else { continue };
                let n = ra.indices.len().min(rb.indices.len());
                for d in 0..n {
                    let va = unit_var(&ra.indices[d], &sa.vars());
                    let vb = unit_var(&rb.indices[d], &sb.vars());
                    if let (Some(va), Some(vb)) = (va, vb) {
                        uf.union(slot(a, &va, &slots), slot(b, &vb, &slots));
                    }
                }
            }
        }
    }
    let mut class_of: Vec<usize> = (0..slots.len()).map(|k| uf.find(k)).collect();
    for &s in comp {
        let vars = g.statements[s].vars();
        for (x, v) in vars.iter().enumerate() {
            for w in &vars[x + 1..] {
                if class_of[slot(s, v, &slots)] == class_of[slot(s, w, &slots)] {
                    return Err(incompatible(format!("`{v}` and `{w}` of one statement would coincide")));
                }
            }
        }
    }
    let mut roots: Vec<usize> = Vec::new();
    for c in &class_of {
        if !roots.contains(c) {
            roots.push(*c);
        }
    }
    let widest = comp.iter().map(|&s| g.statements[s].vars().len()).max().unwrap_or(0);
    if roots.len() > widest {
        return Err(incompatible(format!("{} merged variables but statements have at most {widest}", roots.len())));
    }
    let mut names: Vec<String> = Vec::new();
    for r in &roots {
        let base = slots[*r].1.clone();
        let mut name = base.clone();
        let mut k = 2;
        while names.contains(&name) {
            name = format!("{base}_{k}");
            k += 1;
        }
        names.push(name);
    }
    for c in class_of.iter_mut() {
        *c = roots.iter().position(|r| r == c).unwrap();
    }
    let maps = comp
        .iter()
        .map(|&s| {
            g.statements[s].vars().into_iter().map(|v| {
                let k = class_of[slot(s, &v, &slots)];
                (v, names[k].clone())
            })
            .collect()
        })
        .collect();
    Ok((names, maps))
}

fn rename(a: &ArrayAccess, map: &HashMap<String, String>) -> Result<ArrayAccess, BoundsError> {
    let subst: HashMap<String, SymExpr> = map.iter().map(|(k, v)| (k.clone(), SymExpr::symbol(v))).collect();
    let indices = a.indices.iter().map(|e| e.substitute(&subst)).collect::<Result<_, _>>()?;
    Ok(ArrayAccess { array: a.array.clone(), indices })
}

/// Intensity of the fused statement of one connected component.
fn component_intensity(
    g: &Sdg,
    sg: &SubgraphStatement,
    comp: &[usize],
    warnings: &mut Vec<String>,
) -> Result<(Option<SymExpr>, Vec<String>), SdgError> {
    if comp.len() == 1 {
        let st = &g.statements[comp[0]];
        let loaded: Vec<&AccessInfo> = st.input_groups().filter(|gr| sg.inputs.contains(&gr.array)).collect();
        if loaded.is_empty() {
            warnings.push(format!("{} loads nothing; its intensity is unbounded", sg.label()));
            return Ok((None, st.vars()));
        }
        if loaded.len() == st.input_groups().count() {
            let ts = bounds::solve_tiling(st)?;
            return Ok((Some(bounds::intensity_and_x0(&ts.chi)?.rho), st.vars()));
        }
    }
    let label: Vec<String> = sg.h.iter().cloned().collect();
    let (vars, maps) = unify(g, comp, &label)?;
    // Objective: computed vertices of all statements, keeping the top degree.
    let mut objective: Vec<(Vec<BigRational>, BigRational)> = Vec::new();
    for m in &maps {
        let exps: Vec<BigRational> =
            vars.iter().map(|v| if m.values().any(|x| x == v) { BigRational::one() } else { BigRational::zero() }).collect();
        match objective.iter_mut().find(|(e, _)| *e == exps) {
            Some((_, k)) => *k += BigRational::one(),
            None => objective.push((exps, BigRational::one())),
        }
    }
    let degree = |e: &Vec<BigRational>| e.iter().sum::<BigRational>();
    let top = objective.iter().map(|(e, _)| degree(e)).max().unwrap();
    objective.retain(|(e, _)| degree(e) == top);
    // Loaded arrays with their accesses in merged variables.
    let mut terms = Vec::new();
    for array in &sg.inputs {
        let mut union: Vec<AccessRef> = Vec::new();
        let mut first: Option<Vec<AccessRef>> = None;
        for (&s, m) in comp.iter().zip(&maps) {
            let st = &g.statements[s];
            let Some(gr) = st.accesses.iter().find(|gr| &gr.array == array) else { continue };
            let keep_output = sg.self_edges.contains(array);
            let refs: Vec<AccessRef> = gr
                .accesses
                .iter()
                .filter(|a| !a.is_output || keep_output)
                .map(|a| Ok(AccessRef { access: rename(&a.access, m)?, is_output: a.is_output }))
                .collect::<Result<_, BoundsError>>()?;
            if refs.iter().all(|a| a.is_output) {
                continue;
            }
            if first.is_none() {
                first = Some(refs.clone());
            }
            union.extend(refs);
        }
        let Some(first) = first else { continue };
        let merged = AccessInfo::from_accesses(array, union, &vars);
        // A single statement's accesses under-approximate the union, which keeps the bound sound.
        let info = if merged.is_conforming() { merged } else { AccessInfo::from_accesses(array, first, &vars) };
        let sizes: Vec<SymExpr> = info
            .dims
            .iter()
            .map(|d| match d {
                DimIndex::Const => SymExpr::one(),
                DimIndex::Var(v) => SymExpr::symbol(&tile_symbol(v)),
                DimIndex::Combination(vs) => match g.statements[comp[0]].regime() {
                    Regime::Injective => vs.iter().fold(SymExpr::one(), |a, v| &a * &SymExpr::symbol(&tile_symbol(v))),
                    Regime::MaxOverlap => SymExpr::symbol(&tile_symbol(&vs[0])),
                },
            })
            .collect();
        let size = bounds::access_set_size(&sizes, &info.offset_sizes(), info.includes_output);
        let top = size.terms().map(|(m, _)| m.total_degree()).max().unwrap_or_default();
        for (m, c) in size.terms().filter(|(m, _)| m.total_degree() == top) {
            terms.push(gp::Term {
                coeff: c.clone(),
                exps: vars.iter().map(|v| gp::exp_to_big(m.exponent(&tile_symbol(v)))).collect(),
            });
        }
    }
    let terms = gp::merge(&terms);
    if terms.is_empty() {
        warnings.push(format!("{} loads nothing; its intensity is unbounded", sg.label()));
        return Ok((None, vars));
    }
    // χ ≤ Σ over objective monomials of their separate maxima; the largest
    // exponent dominates and equal exponents add their constants.
    let mut best: Option<(BigRational, SymExpr)> = None;
    for (a, k) in &objective {
        let sol = gp::solve(&terms, a, k).map_err(|e| match e {
            gp::GpError::Unbounded(t) => SdgError::IncompatibleIterationSpaces {
                h: label.clone(),
                reason: format!("merged variable `{}` is unconstrained", vars[t]),
            },
            gp::GpError::Degenerate => SdgError::Bounds(BoundsError::DegenerateProgram { line: 0 }),
            gp::GpError::Numeric(m) => SdgError::Bounds(BoundsError::Numeric(m)),
        })?;
        warnings.extend(sol.warnings.iter().cloned());
        best = match best {
            None => Some((sol.lambda, sol.coeff)),
            Some((l, c)) if l == sol.lambda => Some((l, &c + &sol.coeff)),
            Some((l, c)) if l > sol.lambda => Some((l, c)),
            Some(_) => Some((sol.lambda, sol.coeff)),
        };
    }
    if objective.len() > 1 {
        warnings.push(format!("{}: computed volume is not a single monomial; χ is summed over its terms", sg.label()));
    }
    let (lambda, coeff) = best.unwrap();
    let chi = &coeff * &SymExpr::symbol(X).pow(gp::to_exp(&lambda)).map_err(BoundsError::from)?;
    let rho = bounds::intensity_and_x0(&chi)?.rho;
    Ok((Some(rho), vars))
}

/// `ρ_H`: the fused statement of every connected component, maximized over components.
pub fn subgraph_intensity(g: &Sdg, sg: &SubgraphStatement) -> Result<SubgraphIntensity, SdgError> {
    let mut warnings = Vec::new();
    let mut rho: Option<Option<SymExpr>> = None;
    let mut comps = Vec::new();
    for comp in components(g, sg) {
        let (r, vars) = component_intensity(g, sg, &comp, &mut warnings)?;
        comps.push(vars);
        rho = Some(match (rho, r) {
            (None, r) => r,
            (Some(None), _) | (Some(_), None) => None,
            (Some(Some(a)), Some(b)) => Some(if rho_less(&a, &b) { b } else { a }),
        });
    }
    Ok(SubgraphIntensity { rho: rho.flatten(), components: comps, warnings })
}

/// Asymptotic comparison in S; equal growth falls back to the value at S = 1.
pub fn rho_less(a: &SymExpr, b: &SymExpr) -> bool {
    let (da, db) = (a.degree_in(S), b.degree_in(S));
    if da != db {
        return da < db;
    }
    let one = HashMap::from([(S.to_string(), 1.0)]);
    a.evaluate(&one) < b.evaluate(&one)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArrayTerm {
    pub array: String,
    pub size: SymExpr,
    /// `None` when no evaluated subgraph loads anything (unbounded intensity).
    pub rho: Option<SymExpr>,
    /// Subgraph attaining the maximum: a fusion hint.
    pub subgraph: String,
    /// Some subgraph containing the array could not be evaluated.
    pub incomplete: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvaluatedSubgraph {
    pub statement: SubgraphStatement,
    pub result: Result<SubgraphIntensity, SdgError>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdgBound {
    pub q_bound: SymExpr,
    pub leading: SymExpr,
    pub terms: Vec<ArrayTerm>,
    pub subgraphs: Vec<EvaluatedSubgraph>,
    pub warnings: Vec<String>,
}

pub fn evaluate_subgraphs(g: &Sdg, cap: usize) -> Result<Vec<EvaluatedSubgraph>, SdgError> {
    Ok(enumerate_subgraphs(g, cap)?
        .into_iter()
        .map(|sg| {
            let result = subgraph_intensity(g, &sg);
            EvaluatedSubgraph { statement: sg, result }
        })
        .collect())
}

/// `Q ≥ Σ_A |A| / max_{H ∋ A} ρ_H` over the given evaluated subgraphs.
pub fn sdg_bound_from(g: &Sdg, subgraphs: Vec<EvaluatedSubgraph>, order: &GrowthOrder) -> Result<SdgBound, SdgError> {
    let mut warnings = Vec::new();
    for e in &subgraphs {
        match &e.result {
            Ok(r) => warnings.extend(r.warnings.iter().cloned()),
            Err(err) => {
                log::warn!("skipping subgraph {}: {err}", e.statement.label());
                warnings.push(format!("skipped subgraph {}: {err}", e.statement.label()));
            }
        }
    }
    let mut q = SymExpr::zero();
    let mut terms = Vec::new();
    for a in g.computed() {
        let size = g.array_sizes[&a].clone();
        let mut best: Option<(Option<SymExpr>, String)> = None;
        let mut incomplete = false;
        for e in subgraphs.iter().filter(|e| e.statement.h.contains(&a)) {
            match &e.result {
                Err(_) => incomplete = true,
                Ok(r) => {
                    let better = match (&best, &r.rho) {
                        (None, _) => true,
                        (Some((None, _)), _) => false,
                        (Some(_), None) => true,
                        (Some((Some(cur), _)), Some(new)) => rho_less(cur, new),
                    };
                    if better {
                        best = Some((r.rho.clone(), e.statement.label()));
                    }
                }
            }
        }
        let Some((rho, subgraph)) = best else {
            warnings.push(format!("no subgraph containing {a} could be evaluated; it contributes nothing"));
            continue;
        };
        if let Some(r) = &rho {
            q = &q + &size.checked_div(r).map_err(BoundsError::from)?;
        }
        terms.push(ArrayTerm { array: a, size, rho, subgraph, incomplete });
    }
    let leading = order.leading_term(&q).map_err(BoundsError::from)?;
    Ok(SdgBound { q_bound: q, leading, terms, subgraphs, warnings })
}

pub fn sdg_bound(g: &Sdg, cap: usize, order: &GrowthOrder) -> Result<SdgBound, SdgError> {
    let subgraphs = evaluate_subgraphs(g, cap)?;
    sdg_bound_from(g, subgraphs, order)
}

impl SdgBound {
    /// Largest intensity over all arrays.
    pub fn max_rho(&self) -> Option<SymExpr> {
        let mut best: Option<SymExpr> = None;
        for t in &self.terms {
            match (&best, &t.rho) {
                (_, None) => {}
                (None, Some(r)) => best = Some(r.clone()),
                (Some(b), Some(r)) if rho_less(b, r) => best = Some(r.clone()),
                _ => {}
            }
        }
        best
    }

    pub fn numeric(&self, params: f64) -> f64 {
        bounds::eval_uniform(&self.q_bound, params, CHECK_S)
    }
}

#[cfg(test)]
mod tests;
