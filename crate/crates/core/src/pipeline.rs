//! End-to-end analysis: parse, normalize, bound every statement, combine.

use thiserror::Error;

use crate::bounds::{statement_bound, BoundResult, BoundsError, S, X};
use crate::frontend::{parse_named, FrontendError, Program};
use crate::sdg::{build_sdg, rho_less, sdg_bound, SdgBound, SdgError, DEFAULT_CAP};
use crate::soap::{normalize_program, SoapError, SoapStatement};
use crate::symbolic::{Assumption, GrowthOrder, SymExpr, SymbolicError};

#[derive(Clone, Debug)]
pub struct AnalysisOptions {
    pub assumptions: Vec<Assumption>,
    /// Combine statements through the array graph.
    pub sdg: bool,
    pub cap: usize,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions { assumptions: Vec::new(), sdg: true, cap: DEFAULT_CAP }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Parse(#[from] FrontendError),
    #[error("parameter `{0}` is reserved for the fast-memory size or dominator size")]
    ReservedParameter(String),
    #[error(transparent)]
    Soap(#[from] SoapError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Sdg(#[from] SdgError),
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
}

impl AnalysisError {
    /// Process exit code for the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            AnalysisError::Parse(_) | AnalysisError::ReservedParameter(_) => 2,
            AnalysisError::Soap(_) => 3,
            _ => 4,
        }
    }
}

/// The program under one choice of case per statement.
#[derive(Clone, Debug)]
pub struct CaseAnalysis {
    /// Conjunction of the case predicates, if any statement was split.
    pub condition: Option<String>,
    pub statements: Vec<SoapStatement>,
    pub bounds: Vec<BoundResult>,
    pub sdg: Option<SdgBound>,
    pub q_bound: SymExpr,
    pub leading: SymExpr,
    /// Largest intensity over statements or subgraphs.
    pub rho: Option<SymExpr>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct Analysis {
    pub program: Program,
    pub order: GrowthOrder,
    pub cases: Vec<CaseAnalysis>,
    /// Index into `cases` of the reported bound: the smallest one, which
    /// holds whichever case applies.
    pub chosen: usize,
    pub warnings: Vec<String>,
}

impl Analysis {
    pub fn chosen(&self) -> &CaseAnalysis {
        &self.cases[self.chosen]
    }

    pub fn q_bound(&self) -> &SymExpr {
        &self.chosen().q_bound
    }

    pub fn leading(&self) -> &SymExpr {
        &self.chosen().leading
    }

    /// Statement bound with the largest intensity in the chosen case.
    pub fn dominant(&self) -> Option<&BoundResult> {
        let c = self.chosen();
        c.bounds.iter().fold(None, |best: Option<&BoundResult>, b| match best {
            Some(x) if !rho_less(&x.rho, &b.rho) => Some(x),
            _ => Some(b),
        })
    }
}

pub fn analyze_source(name: &str, src: &str, opts: &AnalysisOptions) -> Result<Analysis, AnalysisError> {
    let p = parse_named(src, name)?;
    analyze(&p, opts)
}

pub fn analyze(p: &Program, opts: &AnalysisOptions) -> Result<Analysis, AnalysisError> {
    if p.params.iter().any(|v| v == X) {
        return Err(AnalysisError::ReservedParameter(X.into()));
    }
    // Declaring the fast-memory size in the header is allowed; using it in
    // loop bounds or subscripts is not.
    if p.params.iter().any(|v| v == S) && p.statements.iter().any(|st| mentions(st, S)) {
        return Err(AnalysisError::ReservedParameter(S.into()));
    }
    let mut order = GrowthOrder::new(p.params.iter().filter(|v| *v != S).cloned(), [S]);
    for a in &opts.assumptions {
        order = order.with_assumption(a.clone());
    }
    let normalized = normalize_program(p)?;
    let count = normalized.iter().map(|v| v.len()).max().unwrap_or(1);
    let mut cases = Vec::new();
    for k in 0..count {
        let statements: Vec<SoapStatement> = normalized.iter().map(|v| v[k.min(v.len() - 1)].clone()).collect();
        cases.push(analyze_case(statements, &order, opts)?);
    }
    let mut chosen = 0;
    for (k, c) in cases.iter().enumerate() {
        if let (Some(best), Some(r)) = (&cases[chosen].rho, &c.rho) {
            if rho_less(best, r) {
                chosen = k;
            }
        }
    }
    let mut warnings: Vec<String> = Vec::new();
    for c in &cases {
        for w in &c.warnings {
            if !warnings.contains(w) {
                warnings.push(w.clone());
            }
        }
    }
    Ok(Analysis { program: p.clone(), order, cases, chosen, warnings })
}

fn mentions(st: &crate::frontend::Statement, sym: &str) -> bool {
    let loops = st.loops.iter().flat_map(|l| [&l.lower, &l.upper]);
    let subscripts = std::iter::once(&st.output).chain(&st.inputs).flat_map(|a| a.indices.iter());
    loops.chain(subscripts).any(|e| e.symbols().contains(sym))
}

fn analyze_case(statements: Vec<SoapStatement>, order: &GrowthOrder, opts: &AnalysisOptions) -> Result<CaseAnalysis, AnalysisError> {
    let conditions: Vec<String> = statements.iter().filter_map(|s| s.case_condition.as_ref().map(|c| c.predicate.clone())).collect();
    let condition = (!conditions.is_empty()).then(|| conditions.join(" and "));
    let mut warnings = Vec::new();
    let mut results = Vec::new();
    for st in &statements {
        let b = statement_bound(st, order)?;
        for w in b.warnings.iter().chain(&b.tiles.warnings) {
            warnings.push(format!("{}: {w}", b.label));
        }
        for (var, k) in &b.tiles.assumptions {
            warnings.push(format!("{}: assumes the tile of {var} exceeds {k}", b.label));
        }
        results.push(b);
    }
    let mut sdg = None;
    if opts.sdg {
        let g = build_sdg(&statements)?;
        match sdg_bound(&g, opts.cap, order) {
            Ok(b) => {
                warnings.extend(b.warnings.iter().cloned());
                sdg = Some(b);
            }
            Err(e @ SdgError::EnumerationCapExceeded { .. }) => {
                log::warn!("{e}");
                warnings.push(format!("{e}; falling back to the sum of statement bounds"));
            }
            Err(e) => return Err(e.into()),
        }
    }
    let (q_bound, leading, rho) = match &sdg {
        Some(b) => (b.q_bound.clone(), b.leading.clone(), b.max_rho()),
        None => {
            let q = results.iter().fold(SymExpr::zero(), |acc, b| &acc + &b.q_bound);
            let rho = results.iter().map(|b| b.rho.clone()).reduce(|a, b| if rho_less(&a, &b) { b } else { a });
            (q.clone(), order.leading_term(&q)?, rho)
        }
    };
    if q_bound.is_zero() {
        warnings.push("bound is zero: no computed array has finite intensity".into());
    }
    Ok(CaseAnalysis { condition, statements, bounds: results, sdg, q_bound, leading, rho, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::sym;

    const GEMM: &str = include_str!("../kernels/gemm.soap");
    const CONV: &str = include_str!("../kernels/conv.soap");
    const TWO_MM: &str = include_str!("../kernels/2mm.soap");

    #[test]
    fn reserved_parameters() {
        let src = "params: N, X\nfor i in range(N):\n    B[i] = A[i]\n";
        let e = analyze_source("r", src, &AnalysisOptions::default()).unwrap_err();
        assert_eq!(e, AnalysisError::ReservedParameter("X".into()));
        assert_eq!(e.exit_code(), 2);
        let src = "params: N, S\nfor i in range(S):\n    B[i] = A[i]\n";
        let e = analyze_source("r", src, &AnalysisOptions::default()).unwrap_err();
        assert_eq!(e, AnalysisError::ReservedParameter("S".into()));
        // Declaring S without using it is fine.
        let src = "params: N, T, S\nfor t in range(T):\n    for i in range(1, N - 1):\n        A[t + 1, i] = A[t, i - 1] + A[t, i] + A[t, i + 1]\n";
        let a = analyze_source("j", src, &AnalysisOptions::default()).unwrap();
        assert_eq!(a.leading(), &sym("2*N*T/S"));
    }

    #[test]
    fn exit_codes() {
        let e = analyze_source("bad", "params: N\nfor i in range(N)\n", &AnalysisOptions::default()).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let src = "params: N\nfor i in range(N):\n    for j in range(i + 1):\n        C[i] += A[i] * A[j]\n";
        let e = analyze_source("syrk", src, &AnalysisOptions::default()).unwrap_err();
        assert!(matches!(e, AnalysisError::Soap(_)), "{e:?}");
        assert_eq!(e.exit_code(), 3);
        let src = "params: N, M\nfor i in range(N):\n    for j in range(M):\n        B[i] = A[i]\n";
        let e = analyze_source("u", src, &AnalysisOptions::default()).unwrap_err();
        assert_eq!(e.exit_code(), 4);
    }

    #[test]
    fn single_statement_without_graph() {
        let opts = AnalysisOptions { sdg: false, ..Default::default() };
        let a = analyze_source("gemm", GEMM, &opts).unwrap();
        assert_eq!(a.leading(), &sym("2*N^3/sqrt(S)"));
        assert!(a.chosen().sdg.is_none());
        let with = analyze_source("gemm", GEMM, &AnalysisOptions::default()).unwrap();
        assert_eq!(with.leading(), a.leading());
    }

    #[test]
    fn cases_pick_the_largest_intensity() {
        let a = analyze_source("conv", CONV, &AnalysisOptions::default()).unwrap();
        assert_eq!(a.cases.len(), 2);
        let rho = a.chosen().rho.clone().unwrap();
        for c in &a.cases {
            assert!(!rho_less(&rho, c.rho.as_ref().unwrap()));
        }
    }

    #[test]
    fn cap_fallback_sums_statements() {
        let opts = AnalysisOptions { cap: 0, ..Default::default() };
        let a = analyze_source("2mm", TWO_MM, &opts).unwrap();
        assert!(a.chosen().sdg.is_none());
        assert!(a.warnings.iter().any(|w| w.contains("falling back")), "{:?}", a.warnings);
        assert_eq!(a.leading(), &sym("4*N^3/sqrt(S)"));
    }
}
