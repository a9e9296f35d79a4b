use std::collections::{BTreeSet, HashMap, HashSet};

use proptest::prelude::*;

use super::*;
use crate::frontend::{extract_accesses, parse_program, AccessRef, ArrayAccess};
use crate::soap::normalize_program;
use crate::symbolic::{sym, Assumption};

const MMM: &str = "\
params: N
for i in range(N):
    for j in range(N):
        for k in range(N):
            C[i, j] += A[i, k] * B[k, j]
";

const STENCIL: &str = "\
params: N, T
for t in range(1, T):
    for i in range(t, N - t):
        A[i, t + 1] = f(A[i - 1, t], A[i, t], A[i + 1, t], B[i])
";

const CHOLESKY: &str = "\
params: N
for i in range(N):
    for j in range(i):
        for k in range(j):
            A[i, j] -= A[i, k] * A[j, k]
";

const JACOBI1D: &str = "\
params: N, T
for t in range(T):
    for i in range(1, N - 1):
        A[t + 1, i] = 0.33333 * (A[t, i - 1] + A[t, i] + A[t, i + 1])
";

const TRISOLV: &str = "\
params: N
for i in range(N):
    for j in range(i):
        x[i] -= L[i, j] * x[j]
";

fn order(src: &str) -> GrowthOrder {
    let p = parse_program(src).unwrap();
    GrowthOrder::new(p.params.clone(), [S]).with_assumption(Assumption::parse("T < N/2").unwrap())
}

fn bound(src: &str) -> BoundResult {
    let p = parse_program(src).unwrap();
    let st = &normalize_program(&p).unwrap()[0][0];
    statement_bound(st, &order(src)).unwrap()
}

fn first_statement(src: &str) -> crate::frontend::Statement {
    parse_program(src).unwrap().statements[0].clone()
}

#[test]
fn domain_sizes() {
    assert_eq!(domain_size(&first_statement(MMM)).unwrap(), sym("N^3"));
    let lu = "params: N\nfor k in range(N):\n    for i in range(k + 1, N):\n        for j in range(k + 1, N):\n            A[i, j] = A[i, k]\n";
    let d = domain_size(&first_statement(lu)).unwrap();
    assert_eq!(GrowthOrder::new(["N"], [S]).leading_term(&d).unwrap(), sym("N^3/3"));
    for n in [10i64, 20] {
        let mut count = 0;
        for k in 0..n {
            count += (n - k - 1) * (n - k - 1);
        }
        assert_eq!(d.evaluate(&HashMap::from([("N".to_string(), n as f64)])), count as f64);
    }
    let d = domain_size(&first_statement(STENCIL)).unwrap();
    assert_eq!(GrowthOrder::new(["N", "T"], [S]).leading_term(&d).unwrap(), sym("N*T - T^2"));
    assert_eq!(order(STENCIL).leading_term(&d).unwrap(), sym("N*T"));
    let count: i64 = (1..10).map(|t| 40 - 2 * t).sum();
    let pt = HashMap::from([("N".to_string(), 40.0), ("T".to_string(), 10.0)]);
    assert_eq!(d.evaluate(&pt), count as f64);
}

#[test]
fn empty_domain_is_rejected() {
    let src = "params: N\nfor i in range(N, N):\n    B[i] = A[i]\n";
    assert!(matches!(domain_size(&first_statement(src)), Err(BoundsError::EmptyDomain { line: 3 })));
    // Empty only for particular parameters: still a domain.
    let src = "params: T\nfor t in range(1, T):\n    B[t] = A[t]\n";
    assert!(domain_size(&first_statement(src)).is_ok());
}

fn group(translations: &[(Vec<i64>, bool)]) -> AccessInfo {
    let vars: Vec<String> = (0..translations[0].0.len()).map(|k| format!("v{k}")).collect();
    let accesses = translations
        .iter()
        .map(|(t, out)| AccessRef {
            access: ArrayAccess {
                array: "A".into(),
                indices: vars.iter().zip(t).map(|(v, c)| &SymExpr::symbol(v) + &SymExpr::int(*c)).collect(),
            },
            is_output: *out,
        })
        .collect();
    AccessInfo::from_accesses("A", accesses, &vars)
}

#[test]
fn access_set_examples() {
    let four = || vec![SymExpr::int(4), SymExpr::int(4)];
    assert_eq!(access_set_size(&four(), &[2, 1], false), SymExpr::int(26));
    assert_eq!(union_size(&[4, 4], &[vec![0, 0], vec![2, 1]], None), 26);
    let three = group(&[(vec![0, 0], false), (vec![1, 0], false), (vec![2, 1], false)]);
    let tiles: HashMap<String, SymExpr> = [("v0", 4), ("v1", 4)].iter().map(|(v, n)| (v.to_string(), SymExpr::int(*n))).collect();
    assert_eq!(access_set_bound(&three, &tiles).size, SymExpr::int(26));
    assert!(union_size(&[4, 4], &[vec![0, 0], vec![1, 0], vec![2, 1]], None) >= 26);
    let one = group(&[(vec![0, 0], false)]);
    assert_eq!(access_set_bound(&one, &tiles).size, SymExpr::int(16));

    let st = first_statement(STENCIL);
    let a = extract_accesses(&st).into_iter().find(|g| g.array == "A").unwrap();
    let tiles: HashMap<String, SymExpr> =
        [("i", sym("b_i")), ("t", sym("b_t"))].into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    let b = access_set_bound(&a, &tiles);
    assert_eq!(b.size, sym("b_i + 2*b_t - 2"));
    assert_eq!(b.size.evaluate(&HashMap::from([("b_i".into(), 5.0), ("b_t".into(), 3.0)])), 9.0);
    assert_eq!(b.assumptions.len(), 2);
}

#[test]
fn tiling_examples() {
    let p = parse_program(MMM).unwrap();
    let st = &normalize_program(&p).unwrap()[0][0];
    let ts = solve_tiling(st).unwrap();
    assert_eq!(ts.chi, sym("(X/3)^(3/2)"));
    for t in ts.tile_sizes.values() {
        assert_eq!(*t, sym("sqrt(X/3)"));
    }
    assert!(ts.kkt_residual_check.as_ref().unwrap().passed);

    let p = parse_program(STENCIL).unwrap();
    let ts = solve_tiling(&normalize_program(&p).unwrap()[0][0]).unwrap();
    assert_eq!(ts.chi, sym("X^2/16"));
    assert_eq!(ts.tile_sizes["i"], sym("X/4"));
    assert_eq!(ts.tile_sizes["t"], sym("X/4"));

    let src = "params: N\nfor i in range(N):\n    B[i] = A[i]\n";
    let p = parse_program(src).unwrap();
    let ts = solve_tiling(&normalize_program(&p).unwrap()[0][0]).unwrap();
    assert_eq!(ts.chi, sym("X"));
}

#[test]
fn unbounded_tile() {
    let src = "params: N, M\nfor i in range(N):\n    for j in range(M):\n        B[i] = A[i]\n";
    let p = parse_program(src).unwrap();
    let r = solve_tiling(&normalize_program(&p).unwrap()[0][0]);
    assert!(matches!(r, Err(BoundsError::UnboundedTile { ref var, .. }) if var == "j"), "{r:?}");
}

#[test]
fn intensity_examples() {
    let it = intensity_and_x0(&sym("(X/3)^(3/2)")).unwrap();
    assert_eq!(it.x0, Some(sym("3*S")));
    assert_eq!(it.rho, sym("sqrt(S)/2"));
    let it = intensity_and_x0(&sym("X^2/16")).unwrap();
    assert_eq!(it.x0, Some(sym("2*S")));
    assert_eq!(it.rho, sym("S/4"));
    let it = intensity_and_x0(&sym("X")).unwrap();
    assert_eq!((it.rho, it.x0), (sym("1"), None));
    assert!(matches!(intensity_and_x0(&sym("X + X^2")), Err(BoundsError::NonMonomialChi(_))));
}

#[test]
fn kernel_bounds() {
    assert_eq!(bound(MMM).leading, sym("2*N^3/sqrt(S)"));
    assert_eq!(bound(CHOLESKY).leading, sym("N^3/(3*sqrt(S))"));
    assert_eq!(bound(JACOBI1D).leading, sym("2*N*T/S"));
    assert_eq!(bound(TRISOLV).leading, sym("N^2/2"));
    let b = bound(STENCIL);
    assert_eq!(b.rho, sym("S/4"));
    assert_eq!(b.leading, sym("4*N*T/S"));
    assert!(b.warnings.is_empty(), "{:?}", b.warnings);
}

#[test]
fn bound_structure() {
    let b = bound(MMM);
    let x0 = b.x0.clone().unwrap();
    let mut total = SymExpr::zero();
    for (_, e) in &b.tiles.access_sets {
        let subst: HashMap<String, SymExpr> = b.tiles_at_x0.iter().map(|(v, e)| (tile_symbol(v), e.clone())).collect();
        total = &total + &e.substitute(&subst).unwrap();
    }
    let chi0 = b.tiles.chi.substitute_one(X, &x0).unwrap();
    let expect = (&b.domain * &(&total - &SymExpr::symbol(S))).checked_div(&chi0).unwrap();
    assert_eq!(b.q_bound, expect);
}

fn rho_at(chi: &SymExpr, xv: f64, sv: f64) -> f64 {
    chi.evaluate(&HashMap::from([(X.to_string(), xv)])) / (xv - sv)
}

#[test]
fn chi_monotone_and_x0_minimizes() {
    for src in [MMM, STENCIL, CHOLESKY, JACOBI1D, TRISOLV] {
        let b = bound(src);
        let chi = &b.tiles.chi;
        let mut last = 0.0;
        for k in 1..40 {
            let v = chi.evaluate(&HashMap::from([(X.to_string(), (k * k) as f64)]));
            assert!(v >= last);
            last = v;
        }
        if let Some(x0) = &b.x0 {
            let sv = 1000.0;
            let x0v = x0.evaluate(&HashMap::from([(S.to_string(), sv)]));
            let best = rho_at(chi, x0v, sv);
            for k in 1..200 {
                let xv = sv + k as f64 * 50.0;
                assert!(best <= rho_at(chi, xv, sv) * (1.0 + 1e-12));
            }
        }
        assert!(b.tiles.kkt_residual_check.as_ref().unwrap().passed, "{src}");
    }
}

/// Union of translated boxes, optionally minus the output box.
fn union_size(dims: &[i64], inputs: &[Vec<i64>], output: Option<&Vec<i64>>) -> usize {
    let mut pts: HashSet<Vec<i64>> = HashSet::new();
    let total: i64 = dims.iter().product();
    for t in inputs {
        for idx in 0..total {
            let mut r = idx;
            let p: Vec<i64> = dims
                .iter()
                .zip(t)
                .map(|(d, o)| {
                    let c = r % d;
                    r /= d;
                    c + o
                })
                .collect();
            pts.insert(p);
        }
    }
    if let Some(o) = output {
        pts.retain(|p| !p.iter().zip(o).zip(dims).all(|((x, o), d)| *x >= *o && *x < o + d));
    }
    pts.len()
}

fn arb_case() -> impl Strategy<Value = (Vec<i64>, Vec<Vec<i64>>)> {
    (1usize..4).prop_flat_map(|d| {
        (
            proptest::collection::vec(1i64..9, d),
            proptest::collection::vec(proptest::collection::vec(-3i64..4, d), 1..5),
        )
    })
}

fn hats(ts: &[Vec<i64>]) -> Vec<usize> {
    (0..ts[0].len()).map(|k| ts.iter().map(|t| t[k]).collect::<BTreeSet<_>>().len() - 1).collect()
}

proptest! {
    // Input-only access sets are never smaller than the bound.
    #[test]
    fn input_bound_is_sound((dims, ts) in arb_case()) {
        let h = hats(&ts);
        prop_assume!(dims.iter().zip(&h).all(|(d, k)| *d > *k as i64));
        let sizes: Vec<SymExpr> = dims.iter().map(|d| SymExpr::int(*d)).collect();
        let formula = access_set_size(&sizes, &h, false).as_integer().unwrap();
        let actual = union_size(&dims, &ts, None) as i64;
        prop_assert!(actual >= formula, "{actual} < {formula}");
        // Two boxes at unit distance per dimension are the tight arrangement.
        if ts.len() == 2 && ts[0].iter().zip(&ts[1]).all(|(a, b)| (a - b).abs() <= 1) {
            prop_assert_eq!(actual, formula);
        }
    }

    // With the output among the accesses, loads exclude the output box.
    #[test]
    fn output_bound_is_sound((dims, ts) in arb_case(), pick in 0usize..5) {
        prop_assume!(ts.len() >= 2);
        let h = hats(&ts);
        prop_assume!(dims.iter().zip(&h).all(|(d, k)| *d > *k as i64));
        let out = pick % ts.len();
        let inputs: Vec<Vec<i64>> = ts.iter().enumerate().filter(|(k, _)| *k != out).map(|(_, t)| t.clone()).collect();
        prop_assume!(!inputs.contains(&ts[out]));
        let sizes: Vec<SymExpr> = dims.iter().map(|d| SymExpr::int(*d)).collect();
        let formula = access_set_size(&sizes, &h, true).as_integer().unwrap();
        let actual = union_size(&dims, &inputs, Some(&ts[out])) as i64;
        prop_assert!(actual >= formula, "{actual} < {formula}");
    }
}

#[test]
fn repeated_index_counts_once() {
    let src = "params: N\nfor i in range(N):\n    B[i] = A[i, i] + A[i + 1, i + 1]\n";
    let st = first_statement(src);
    let a = extract_accesses(&st).into_iter().find(|g| g.array == "A").unwrap();
    let tiles = HashMap::from([("i".to_string(), sym("b_i"))]);
    // The diagonal image of b_i points plus one shifted point.
    assert_eq!(access_set_bound(&a, &tiles).size, sym("b_i + 1"));
    let p = parse_program(src).unwrap();
    let ts = solve_tiling(&normalize_program(&p).unwrap()[0][0]).unwrap();
    assert_eq!(ts.chi, sym("X"));
}

#[test]
fn coupled_variables_keep_tiles_at_least_one() {
    let src = "\
params: NR, NQ, NP
for r in range(NR):
    for q in range(NQ):
        for p in range(NP):
            for s in range(NP):
                sum[r, q, p] += A[r, q, s] * C4[s, p]
";
    let b = bound(src);
    assert_eq!(b.leading, sym("2*NP^2*NQ*NR/sqrt(S)"));
    let check = b.tiles.kkt_residual_check.as_ref().unwrap();
    assert!(check.passed && check.min_tile >= 1.0, "{check:?}");
}
