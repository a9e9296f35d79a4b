use std::collections::BTreeMap;
use std::path::PathBuf;

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use soapio::oracle::{build_cdag, pebble_exact, pebble_greedy, PebbleOptions};
use soapio::{analyze, AnalysisOptions, Program};

fn kernel(name: &str) -> Program {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/kernels").join(format!("{name}.soap"));
    let src = std::fs::read_to_string(path).unwrap();
    soapio::frontend::parse_named(&src, name).unwrap()
}

fn analysis(c: &mut Criterion) {
    let mut g = c.benchmark_group("analyze");
    for name in ["gemm", "cholesky", "heat3d", "3mm", "gemver", "conv"] {
        let p = kernel(name);
        g.bench_function(name, |b| b.iter(|| analyze(black_box(&p), &AnalysisOptions::default()).unwrap()));
    }
    let p = kernel("3mm");
    let opts = AnalysisOptions { sdg: false, ..Default::default() };
    g.bench_function("3mm without graph", |b| b.iter(|| analyze(black_box(&p), &opts).unwrap()));
    g.finish();
}

fn pebbling(c: &mut Criterion) {
    let mut g = c.benchmark_group("pebble");
    g.sample_size(20);
    let cases = [("stencil", vec![("N", 8), ("T", 3)], 5), ("gemm", vec![("N", 2)], 4), ("stencil3", vec![("N", 8)], 4)];
    for (name, params, s) in cases {
        let params: BTreeMap<String, i64> = params.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        let cdag = build_cdag(&kernel(name), &params).unwrap();
        g.bench_function(format!("exact {name} S={s}"), |b| {
            b.iter(|| pebble_exact(black_box(&cdag), s, PebbleOptions::default()).unwrap())
        });
        g.bench_function(format!("greedy {name} S={s}"), |b| b.iter(|| pebble_greedy(black_box(&cdag), s).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, analysis, pebbling);
criterion_main!(benches);
