//! `soapio analyze` derives I/O lower bounds; `soapio oracle` checks one
//! against exact pebbling of a small instance.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use soapio::bounds::domain_size;
use soapio::oracle::{pebble_greedy, verify_expression, OracleError, PebbleOptions, MAX_VERTICES};
use soapio::symbolic::Assumption;
use soapio::{analyze, AnalysisOptions, Program, Report};

const EXIT_FAIL: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_SOLVER: u8 = 4;
const EXIT_TOO_LARGE: u8 = 5;

#[derive(Parser)]
#[command(name = "soapio", version, about = "I/O lower bounds for affine loop programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Derive the symbolic lower bound, tile sizes and fusion hint.
    Analyze {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Growth-order relation such as "T < N"; repeatable.
        #[arg(long = "assume", value_name = "REL")]
        assume: Vec<String>,
        /// Bound statements separately instead of through the array graph.
        #[arg(long)]
        no_sdg: bool,
        /// Largest subgraph size to enumerate.
        #[arg(long, value_name = "K")]
        cap: Option<usize>,
    },
    /// Compare the bound with exact and greedy pebbling at concrete sizes.
    Oracle {
        file: PathBuf,
        /// Parameter value, SYM=INT; repeatable.
        #[arg(long = "param", value_name = "SYM=INT", value_parser = parse_param)]
        params: Vec<(String, i64)>,
        /// Number of red pebbles.
        #[arg(long = "S", value_name = "INT")]
        s: usize,
        /// Forbid recomputing a vertex.
        #[arg(long)]
        no_recompute: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

fn parse_param(text: &str) -> Result<(String, i64), String> {
    let (k, v) = text.split_once('=').ok_or_else(|| format!("expected SYM=INT, got `{text}`"))?;
    let v = v.trim().parse().map_err(|_| format!("`{v}` is not an integer"))?;
    Ok((k.trim().to_string(), v))
}

fn load(path: &Path) -> Result<Program, ExitCode> {
    let src = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        ExitCode::from(EXIT_PARSE)
    })?;
    let name = path.file_stem().map_or("program".into(), |s| s.to_string_lossy().into_owned());
    soapio::frontend::parse_named(&src, &name).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        ExitCode::from(EXIT_PARSE)
    })
}

fn run_analyze(file: &Path, format: Format, assume: &[String], no_sdg: bool, cap: Option<usize>) -> Result<(), ExitCode> {
    let p = load(file)?;
    let mut opts = AnalysisOptions { sdg: !no_sdg, ..Default::default() };
    if let Some(k) = cap {
        opts.cap = k;
    }
    for a in assume {
        let a = Assumption::parse(a).map_err(|e| {
            eprintln!("error: --assume {a}: {e}");
            ExitCode::from(EXIT_PARSE)
        })?;
        opts.assumptions.push(a);
    }
    let analysis = analyze(&p, &opts).map_err(|e| {
        eprintln!("error: {}: {e}", file.display());
        ExitCode::from(e.exit_code() as u8)
    })?;
    let report = Report::from_analysis(&analysis);
    match format {
        Format::Json => println!("{}", report.to_json()),
        Format::Text => print!("{}", report.to_text()),
    }
    Ok(())
}

/// Lower estimate of the CDAG size: one vertex per statement instance.
fn instance_count(p: &Program, params: &BTreeMap<String, i64>) -> Option<f64> {
    let point: HashMap<String, f64> = params.iter().map(|(k, v)| (k.clone(), *v as f64)).collect();
    p.statements.iter().map(|st| domain_size(st).ok().map(|d| d.evaluate(&point))).sum()
}

fn run_oracle(file: &Path, params: &[(String, i64)], s: usize, no_recompute: bool) -> Result<(), ExitCode> {
    let p = load(file)?;
    let params: BTreeMap<String, i64> = params.iter().cloned().collect();
    let analysis = analyze(&p, &AnalysisOptions::default()).map_err(|e| {
        eprintln!("error: {}: {e}", file.display());
        ExitCode::from(e.exit_code() as u8)
    })?;
    let q = analysis.q_bound();
    let opts = PebbleOptions { recompute: !no_recompute, ..Default::default() };
    let shown: Vec<String> = params.iter().map(|(k, v)| format!("{k}={v}")).collect();
    println!("program {}  {}  S={s}", p.name, shown.join(" "));
    println!("symbolic: Q >= {q}");
    match verify_expression(&p, q, &params, s, opts) {
        Ok(v) => {
            println!("vertices: {}", v.vertices);
            println!("bound:  {:.4}", v.bound);
            println!("exact:  {} ({} states expanded)", v.exact, v.expanded);
            println!("greedy: {}", v.greedy);
            println!("{}", if v.passed() { "PASS" } else { "FAIL" });
            if v.passed() {
                Ok(())
            } else {
                Err(ExitCode::from(EXIT_FAIL))
            }
        }
        Err(OracleError::InfeasibleCapacity { vertex, parents, s }) => {
            // No pebbling exists, so every finite bound holds.
            let bound = soapio::oracle::evaluate_bound(q, &params, s);
            println!("bound:  {bound:.4}");
            println!("exact:  inf (vertex {vertex} has {parents} parents, S = {s})");
            println!("greedy: inf");
            println!("PASS");
            Ok(())
        }
        Err(e @ OracleError::TooLarge { .. }) => {
            match instance_count(&p, &params) {
                Some(n) => eprintln!("error: {e}: at least {n} vertices, cap {MAX_VERTICES}"),
                None => eprintln!("error: {e}"),
            }
            Err(ExitCode::from(EXIT_TOO_LARGE))
        }
        Err(e @ OracleError::TooManyForSearch { .. }) => {
            eprintln!("error: {e}");
            if let Ok(g) = soapio::oracle::build_cdag(&p, &params) {
                if let Ok(h) = pebble_greedy(&g, s) {
                    eprintln!("greedy: {}", h.cost);
                }
            }
            Err(ExitCode::from(EXIT_TOO_LARGE))
        }
        Err(e @ OracleError::SoundnessViolation { .. }) => {
            println!("FAIL: {e}");
            Err(ExitCode::from(EXIT_FAIL))
        }
        Err(e @ (OracleError::UnboundParameter(_) | OracleError::NonIntegral { .. })) => {
            eprintln!("error: {e}");
            Err(ExitCode::from(EXIT_PARSE))
        }
        Err(e) => {
            eprintln!("error: {e}");
            Err(ExitCode::from(EXIT_SOLVER))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SOAP_LOG", "error")).init();
    let cli = Cli::parse();
    let r = match &cli.command {
        Command::Analyze { file, format, assume, no_sdg, cap } => run_analyze(file, *format, assume, *no_sdg, *cap),
        Command::Oracle { file, params, s, no_recompute } => run_oracle(file, params, *s, *no_recompute),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => code,
    }
}
