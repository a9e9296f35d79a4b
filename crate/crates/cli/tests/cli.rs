use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output};

fn kernel(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/kernels").join(format!("{name}.soap"))
}

fn soapio(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_soapio")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn temp_program(text: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::Builder::new().suffix(".soap").tempfile().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f
}

#[test]
fn analyze_json_cholesky() {
    let o = soapio(&["analyze", kernel("cholesky").to_str().unwrap(), "--format", "json"]);
    assert!(o.status.success(), "{o:?}");
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["leading"], "N^3/(3*sqrt(S))");
    assert_eq!(v["program"], "cholesky");
    assert_eq!(v["version"], "1");
}

#[test]
fn analyze_text_gemm() {
    let o = soapio(&["analyze", kernel("gemm").to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    for needle in ["2*N^3/sqrt(S)", "X0 = 3*S", "tile i(X0) = sqrt(S)", "fusion hint: {C}"] {
        assert!(text.contains(needle), "missing {needle} in\n{text}");
    }
}

#[test]
fn analyze_is_byte_deterministic() {
    let path = kernel("3mm");
    let args = ["analyze", path.to_str().unwrap(), "--format", "json"];
    assert_eq!(soapio(&args).stdout, soapio(&args).stdout);
}

#[test]
fn analyze_flags() {
    let path = kernel("2mm");
    let o = soapio(&["analyze", path.to_str().unwrap(), "--no-sdg", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["sdg_bound"].is_null());
    assert_eq!(v["leading"], "4*N^3/sqrt(S)");

    let o = soapio(&["analyze", path.to_str().unwrap(), "--cap", "0", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["warnings"].as_array().unwrap().iter().any(|w| w.as_str().unwrap().contains("falling back")));

    let stencil = kernel("stencil");
    let o = soapio(&["analyze", stencil.to_str().unwrap(), "--assume", "T < N", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["leading"], "4*N*T/S");
}

#[test]
fn analyze_errors_have_distinct_codes() {
    let broken = temp_program("params: N\nfor i in range(N)\n    B[i] = A[i]\n");
    let o = soapio(&["analyze", broken.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2") && err.contains("column"), "{err}");

    let overlap = temp_program("params: N\nfor i in range(N):\n    for j in range(i + 1):\n        C[i] += A[i] * A[j]\n");
    assert_eq!(soapio(&["analyze", overlap.path().to_str().unwrap()]).status.code(), Some(3));

    let unbounded = temp_program("params: N, M\nfor i in range(N):\n    for j in range(M):\n        B[i] = A[i]\n");
    assert_eq!(soapio(&["analyze", unbounded.path().to_str().unwrap()]).status.code(), Some(4));
}

#[test]
fn oracle_passes_on_small_instances() {
    let o = soapio(&["oracle", kernel("gemm").to_str().unwrap(), "--param", "N=2", "--S", "4"]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).lines().any(|l| l == "PASS"));

    let o = soapio(&["oracle", kernel("jacobi1d").to_str().unwrap(), "--param", "N=8", "--param", "T=3", "--S", "4"]);
    assert!(o.status.success(), "{o:?}");
    let text = stdout(&o);
    assert!(text.lines().any(|l| l == "PASS"));
    for label in ["bound:", "exact:", "greedy:"] {
        assert!(text.lines().any(|l| l.starts_with(label)), "{text}");
    }
}

#[test]
fn oracle_reports_infeasible_capacity_as_infinite() {
    let o = soapio(&["oracle", kernel("gemm").to_str().unwrap(), "--param", "N=2", "--S", "3"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("exact:  inf") && text.lines().any(|l| l == "PASS"), "{text}");
}

#[test]
fn oracle_rejects_large_instances() {
    let o = soapio(&["oracle", kernel("gemm").to_str().unwrap(), "--param", "N=50", "--S", "4"]);
    assert_eq!(o.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&o.stderr).contains("125000"));
}
