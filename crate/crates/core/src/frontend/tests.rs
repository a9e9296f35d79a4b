use super::*;
use crate::symbolic::sym;
use proptest::prelude::*;

const STENCIL: &str = "\
params: N, T
for t in range(1, T):
    for i in range(t, N - t):
        A[i, t + 1] = f(A[i - 1, t], A[i, t], A[i + 1, t], B[i])
";

const LU: &str = "\
params: N
for k in range(N):
    for i in range(k + 1, N):
        for j in range(k + 1, N):
            A[i, j] = A[i, j] - A[i, k] * A[k, j]
";

#[test]
fn parses_stencil() {
    let p = parse_program(STENCIL).unwrap();
    assert_eq!(p.params, vec!["N", "T"]);
    assert_eq!(p.statements.len(), 1);
    let st = &p.statements[0];
    assert_eq!(st.loops.len(), 2);
    assert_eq!(st.loops[1].lower, sym("t"));
    assert_eq!(st.loops[1].upper, sym("N - t"));
    let a = st.inputs.iter().filter(|a| a.array == "A").count() + 1;
    let b = st.inputs.iter().filter(|a| a.array == "B").count();
    assert_eq!((a, b), (4, 1));
}

#[test]
fn parses_lu() {
    let p = parse_program(LU).unwrap();
    let st = &p.statements[0];
    assert_eq!(st.loops.len(), 3);
    assert_eq!(st.inputs.len() + 1, 4);
    assert!(st.inputs.iter().chain([&st.output]).all(|a| a.array == "A"));
}

#[test]
fn rejects_nonaffine() {
    let src = "params: N\nfor i in range(N):\n    B[i] = A[i*i]\n";
    assert!(matches!(parse_program(src), Err(FrontendError::NonAffineIndex { line: 3, .. })));
    let src = "params: N\nfor i in range(N*N):\n    B[i] = A[i]\n";
    assert!(matches!(parse_program(src), Err(FrontendError::NonAffineBound { line: 2, .. })));
    let src = "params: N\nfor i in range(N):\n    for j in range(i*i):\n        B[i] = A[j]\n";
    assert!(matches!(parse_program(src), Err(FrontendError::NonAffineBound { line: 3, .. })));
}

#[test]
fn syntax_errors_have_positions() {
    let src = "params: N\nfor i in range(N):\n    B[i] = A[i +]\n";
    match parse_program(src) {
        Err(FrontendError::Syntax { line, col, .. }) => {
            assert_eq!(line, 3);
            assert!(col > 10, "column {col}");
        }
        other => panic!("{other:?}"),
    }
    let src = "params: N\nfor i in range(N)\n    B[i] = A[i]\n";
    assert!(matches!(parse_program(src), Err(FrontendError::Syntax { line: 2, .. })));
    let src = "params: N\nfor i in range(N):\n    B[i] = A[i, i]\n    C[i] = A[i]\n";
    assert!(matches!(parse_program(src), Err(FrontendError::Syntax { line: 4, .. })));
    let src = "params: N\nfor i in range(M):\n    B[i] = A[i]\n";
    assert!(matches!(parse_program(src), Err(FrontendError::Syntax { line: 2, .. })));
}

#[test]
fn compound_assignment_reads_accumulator() {
    let src = "params: N\nfor i in range(N):\n    for j in range(N):\n        acc[i] += B[i, j]\n";
    let st = &parse_program(src).unwrap().statements[0];
    assert!(st.accumulates());
    assert_eq!(st.inputs[0], st.output);
}

#[test]
fn stencil_offsets() {
    let st = &parse_program(STENCIL).unwrap().statements[0];
    let infos = extract_accesses(st);
    let a = infos.iter().find(|i| i.array == "A").unwrap();
    assert!(a.is_conforming());
    assert!(a.includes_output);
    assert_eq!(a.base, vec![sym("i - 1"), sym("t")]);
    let mut ts = a.translations.clone();
    ts.sort();
    assert_eq!(ts, vec![vec![0, 0], vec![1, 0], vec![1, 1], vec![2, 0]]);
    assert_eq!(a.offset_sizes(), vec![2, 1]);
    let b = infos.iter().find(|i| i.array == "B").unwrap();
    assert_eq!(b.translations, vec![vec![0]]);
    assert_eq!(b.offset_sizes(), vec![0]);
    assert!(!b.includes_output);
}

#[test]
fn lu_is_variable_mismatch() {
    let st = &parse_program(LU).unwrap().statements[0];
    let infos = extract_accesses(st);
    assert_eq!(infos.len(), 1);
    assert_eq!(infos[0].nonconforming, Some(NonConformance::VariableMismatch));
}

#[test]
fn strided_dimension_is_flagged() {
    let src = "params: W, R, s\nfor w in range(W):\n    for r in range(R):\n        O[w] += I[s*w + r]\n";
    let st = &parse_program(src).unwrap().statements[0];
    let infos = extract_accesses(st);
    let i = infos.iter().find(|i| i.array == "I").unwrap();
    assert_eq!(i.nonconforming, Some(NonConformance::NonInjectiveCandidate));
    assert_eq!(i.dims, vec![DimIndex::Combination(vec!["r".into(), "w".into()])]);
}

#[test]
fn decimals_round_trip() {
    let src = "params: N\nfor i in range(N):\n    B[i] = 0.25 * A[i] + 1.5\n";
    let p = parse_program(src).unwrap();
    let q = parse_named(&p.render(), "program").unwrap();
    assert_eq!(p, q);
}

fn arb_index(vars: Vec<&'static str>) -> impl Strategy<Value = String> {
    (proptest::sample::select(vars), -3i64..4).prop_map(|(v, c)| match c {
        0 => v.to_string(),
        c if c > 0 => format!("{v} + {c}"),
        c => format!("{v} - {}", -c),
    })
}

fn arb_program() -> impl Strategy<Value = String> {
    let idx = || arb_index(vec!["i", "j"]);
    (
        idx(),
        idx(),
        proptest::collection::vec((idx(), idx()), 1..4),
        prop_oneof![Just("="), Just("+=")],
        0i64..3,
    )
        .prop_map(|(o1, o2, reads, op, lo)| {
            let rhs: Vec<String> = reads.iter().map(|(a, b)| format!("A[{a}, {b}]")).collect();
            format!(
                "params: N, M\nfor i in range({lo}, N):\n    for j in range(i, M - 1):\n        C[{o1}, {o2}] {op} g({}) * 2\n",
                rhs.join(", ")
            )
        })
}

proptest! {
    #[test]
    fn render_round_trip(src in arb_program()) {
        let p = parse_program(&src).unwrap();
        let q = parse_program(&p.render()).unwrap();
        prop_assert_eq!(p, q);
    }

    #[test]
    fn translations_reproduce_accesses(src in arb_program()) {
        let p = parse_program(&src).unwrap();
        for info in extract_accesses(&p.statements[0]) {
            if info.nonconforming == Some(NonConformance::VariableMismatch) {
                continue;
            }
            for (a, t) in info.accesses.iter().zip(&info.translations) {
                for (k, e) in a.access.indices.iter().enumerate() {
                    prop_assert_eq!(&(&info.base[k] + &SymExpr::int(t[k])), e);
                }
            }
            for (k, set) in info.offset_sets.iter().enumerate() {
                let all_zero = info.translations.iter().all(|t| t[k] == 0);
                prop_assert_eq!(set.is_empty(), all_zero);
            }
        }
    }

    #[test]
    fn offset_counts_are_base_invariant(src in arb_program(), pick in 0usize..4) {
        let p = parse_program(&src).unwrap();
        for info in extract_accesses(&p.statements[0]) {
            if !info.is_conforming() || info.accesses.len() < 2 {
                continue;
            }
            let mut rotated = info.accesses.clone();
            let k = pick % rotated.len();
            let moved = rotated.remove(k);
            rotated.insert(0, AccessRef { is_output: false, ..moved });
            let vars = p.statements[0].iter_vars();
            let other = AccessInfo::from_accesses(&info.array, rotated, &vars);
            // Distinct coordinates per dimension, counting the base's own zero.
            let distinct = |i: &AccessInfo, d: usize| {
                let s: BTreeSet<i64> = i.translations.iter().map(|t| t[d]).collect();
                s.len()
            };
            for d in 0..info.base.len() {
                prop_assert_eq!(distinct(&info, d), distinct(&other, d));
            }
        }
    }
}
