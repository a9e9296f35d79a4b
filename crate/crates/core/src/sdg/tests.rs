use proptest::prelude::*;

use super::*;
use crate::bounds::statement_bound;
use crate::frontend::parse_program;
use crate::soap::normalize_program;
use crate::symbolic::sym;

const FIG2: &str = "\
params: N
for i in range(N):
    for j in range(N):
        C[i, j] = A[i, j] * B[j, i]
for i in range(N):
    for j in range(N):
        for k in range(N):
            E[i, j] += C[i, k] * D[k, j]
";

const MM2: &str = "\
params: N
for i in range(N):
    for j in range(N):
        for k in range(N):
            tmp[i, j] += A[i, k] * B[k, j]
for i in range(N):
    for l in range(N):
        for j in range(N):
            D[i, l] += tmp[i, j] * C[j, l]
";

const MM3: &str = "\
params: N
for i in range(N):
    for j in range(N):
        for k in range(N):
            E[i, j] += A[i, k] * B[k, j]
for i in range(N):
    for j in range(N):
        for k in range(N):
            F[i, j] += C[i, k] * D[k, j]
for i in range(N):
    for j in range(N):
        for k in range(N):
            G[i, j] += E[i, k] * F[k, j]
";

const ATAX: &str = "\
params: M, N
for i in range(M):
    for j in range(N):
        tmp[i] += A[i, j] * x[j]
for i in range(M):
    for j in range(N):
        y[j] += A[i, j] * tmp[i]
";

const MVT: &str = "\
params: N
for i in range(N):
    for j in range(N):
        x1[i] += A[i, j] * y1[j]
for i in range(N):
    for j in range(N):
        x2[i] += A[j, i] * y2[j]
";

fn sdg(src: &str) -> Sdg {
    let p = parse_program(src).unwrap();
    let stmts: Vec<SoapStatement> = normalize_program(&p).unwrap().into_iter().map(|v| v[0].clone()).collect();
    build_sdg(&stmts).unwrap()
}

fn order(src: &str) -> GrowthOrder {
    GrowthOrder::new(parse_program(src).unwrap().params, [S])
}

fn set(xs: &[&str]) -> BTreeSet<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

#[test]
fn figure_two_graph() {
    let g = sdg(FIG2);
    assert_eq!(set(&g.vertices.iter().map(|s| s.as_str()).collect::<Vec<_>>()), set(&["A", "B", "C", "D", "E"]));
    let mut edges: Vec<(String, String)> = g.edges.iter().map(|e| (e.from.clone(), e.to.clone())).collect();
    edges.sort();
    edges.dedup();
    let expect: Vec<(String, String)> = [("A", "C"), ("B", "C"), ("C", "E"), ("D", "E"), ("E", "E")]
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
    assert_eq!(edges, expect);
    assert_eq!(g.inputs, set(&["A", "B", "D"]));
}

#[test]
fn figure_two_subgraphs() {
    let g = sdg(FIG2);
    let subs = enumerate_subgraphs(&g, DEFAULT_CAP).unwrap();
    assert_eq!(subs.len(), 3);
    let c = subs.iter().find(|s| s.h == set(&["C"])).unwrap();
    assert_eq!(c.inputs, set(&["A", "B"]));
    let e = subs.iter().find(|s| s.h == set(&["E"])).unwrap();
    assert_eq!(e.inputs, set(&["C", "D", "E"]));
    assert_eq!(e.self_edges, set(&["E"]));
    let ce = subs.iter().find(|s| s.h == set(&["C", "E"])).unwrap();
    assert_eq!(ce.inputs, set(&["A", "B", "D"]));
    assert!(ce.self_edges.is_empty());
}

#[test]
fn enumeration_counts_and_cap() {
    assert_eq!(enumerate_subgraphs(&sdg(MM3), DEFAULT_CAP).unwrap().len(), 7);
    let src = "params: N\nfor i in range(N):\n    B[i] = A[i]\n";
    assert_eq!(enumerate_subgraphs(&sdg(src), DEFAULT_CAP).unwrap().len(), 1);
    assert!(matches!(enumerate_subgraphs(&sdg(MM3), 2), Err(SdgError::EnumerationCapExceeded { count: 3, cap: 2 })));
}

#[test]
fn chained_products_are_not_fused() {
    let g = sdg(MM2);
    assert_eq!(g.computed(), vec!["tmp".to_string(), "D".to_string()]);
    let b = sdg_bound(&g, DEFAULT_CAP, &order(MM2)).unwrap();
    assert_eq!(b.leading, sym("4*N^3/sqrt(S)"));
    let both = b.subgraphs.iter().find(|e| e.statement.h.len() == 2).unwrap();
    assert!(matches!(both.result, Err(SdgError::IncompatibleIterationSpaces { .. })));
    let b = sdg_bound(&sdg(MM3), DEFAULT_CAP, &order(MM3)).unwrap();
    assert_eq!(b.leading, sym("6*N^3/sqrt(S)"));
}

#[test]
fn shared_matrix_fuses() {
    let g = sdg(ATAX);
    let b = sdg_bound(&g, DEFAULT_CAP, &order(ATAX)).unwrap();
    assert_eq!(b.leading, sym("M*N"));
    assert_eq!(b.max_rho(), Some(sym("2")));
    assert!(b.terms.iter().all(|t| t.subgraph == "{tmp, y}"));
    let b = sdg_bound(&sdg(MVT), DEFAULT_CAP, &order(MVT)).unwrap();
    assert_eq!(b.leading, sym("N^2"));
}

#[test]
fn single_statement_consistency() {
    for src in [
        "params: N\nfor i in range(N):\n    for j in range(N):\n        for k in range(N):\n            C[i, j] += A[i, k] * B[k, j]\n",
        "params: N, T\nfor t in range(T):\n    for i in range(1, N - 1):\n        A[t + 1, i] = A[t, i - 1] + A[t, i] + A[t, i + 1]\n",
        "params: N\nfor i in range(N):\n    for j in range(i):\n        x[i] -= L[i, j] * x[j]\n",
    ] {
        let p = parse_program(src).unwrap();
        let st = normalize_program(&p).unwrap()[0][0].clone();
        let single = statement_bound(&st, &order(src)).unwrap();
        let multi = sdg_bound(&build_sdg(&[st]).unwrap(), DEFAULT_CAP, &order(src)).unwrap();
        assert_eq!(single.leading, multi.leading, "{src}");
    }
}

#[test]
fn every_array_sees_all_its_subgraphs() {
    let g = sdg(MM3);
    let b = sdg_bound(&g, DEFAULT_CAP, &order(MM3)).unwrap();
    for a in g.computed() {
        let n = b.subgraphs.iter().filter(|e| e.statement.h.contains(&a)).count();
        assert_eq!(n, 4, "{a}");
    }
}

#[test]
fn copy_statement_has_constant_intensity() {
    let src = "params: N\nfor i in range(N):\n    B[i] = A[i]\n";
    let g = sdg(src);
    let sg = &enumerate_subgraphs(&g, DEFAULT_CAP).unwrap()[0];
    assert_eq!(subgraph_intensity(&g, sg).unwrap().rho, Some(sym("1")));
}

proptest! {
    // Evaluating fewer subgraphs can only lower the intensities and raise the bound.
    #[test]
    fn bound_is_antimonotone_in_coverage(keep in proptest::collection::vec(any::<bool>(), 3)) {
        let g = sdg(ATAX);
        let all = evaluate_subgraphs(&g, DEFAULT_CAP).unwrap();
        let full = sdg_bound_from(&g, all.clone(), &order(ATAX)).unwrap();
        let subset: Vec<EvaluatedSubgraph> = all
            .into_iter()
            .zip(&keep)
            .filter(|(e, k)| **k || e.statement.h.len() == 1)
            .map(|(e, _)| e)
            .collect();
        let partial = sdg_bound_from(&g, subset, &order(ATAX)).unwrap();
        let at = |b: &SdgBound| bounds::eval_uniform(&b.q_bound, 100.0, 64.0);
        prop_assert!(at(&partial) >= at(&full) - 1e-9);
    }
}
