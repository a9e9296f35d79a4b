//! Soundness sandwich: symbolic bound ≤ exact pebbling ≤ greedy pebbling.

use std::collections::BTreeMap;

use super::{build_cdag, evaluate_bound, pebble_exact, pebble_greedy, OracleError, PebbleOptions};
use crate::frontend::Program;
use crate::pipeline::{analyze, AnalysisOptions};
use crate::symbolic::SymExpr;

#[derive(Clone, Debug, PartialEq)]
pub struct Verification {
    pub params: BTreeMap<String, i64>,
    pub s: usize,
    pub bound: f64,
    pub exact: u64,
    pub greedy: u64,
    pub expanded: usize,
    pub vertices: usize,
}

impl Verification {
    /// Exact cost minus the symbolic bound.
    pub fn gap(&self) -> f64 {
        self.exact as f64 - self.bound
    }

    pub fn passed(&self) -> bool {
        self.bound <= self.exact as f64 + 1e-9 && self.exact <= self.greedy
    }
}

/// Checks a symbolic bound `q` (in the program parameters and `S`) on the
/// concrete CDAG of `p`.
pub fn verify_expression(
    p: &Program,
    q: &SymExpr,
    params: &BTreeMap<String, i64>,
    s: usize,
    opts: PebbleOptions,
) -> Result<Verification, OracleError> {
    let mut params = params.clone();
    if p.params.iter().any(|v| v == crate::bounds::S) {
        params.entry(crate::bounds::S.to_string()).or_insert(s as i64);
    }
    let g = build_cdag(p, &params)?;
    let bound = evaluate_bound(q, &params, s);
    let exact = pebble_exact(&g, s, opts)?;
    let greedy = pebble_greedy(&g, s)?;
    if bound > exact.cost as f64 + 1e-9 {
        return Err(OracleError::SoundnessViolation { bound, exact: exact.cost });
    }
    Ok(Verification {
        params,
        s,
        bound,
        exact: exact.cost,
        greedy: greedy.cost,
        expanded: exact.expanded,
        vertices: g.len(),
    })
}

/// Analyzes `p` and checks its bound. With several stride cases, the
/// reported (smallest) bound is checked.
pub fn verify_bound(
    p: &Program,
    params: &BTreeMap<String, i64>,
    s: usize,
    opts: PebbleOptions,
) -> Result<Verification, OracleError> {
    let a = analyze(p, &AnalysisOptions::default()).map_err(|e| OracleError::Analysis(e.to_string()))?;
    verify_expression(p, a.q_bound(), params, s, opts)
}
