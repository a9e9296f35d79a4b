//! Machine- and human-readable renderings of an [`Analysis`].

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::bounds::BoundResult;
use crate::pipeline::{Analysis, CaseAnalysis};
use crate::sdg::SdgBound;

/// Schema version of the JSON report.
pub const REPORT_VERSION: &str = "1";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatementReport {
    pub label: String,
    pub line: usize,
    pub source: String,
    pub case: Option<String>,
    pub domain: String,
    pub chi: String,
    pub leading: String,
    pub full_bound: String,
    pub rho: String,
    #[serde(rename = "X0")]
    pub x0: Option<String>,
    /// Tile extents in X.
    pub tiles: BTreeMap<String, String>,
    /// Tile extents at X = X0.
    pub tiles_at_x0: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrayReport {
    pub array: String,
    pub size: String,
    pub rho: Option<String>,
    pub subgraph: String,
    pub incomplete: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SdgReport {
    pub leading: String,
    pub full_bound: String,
    pub arrays: Vec<ArrayReport>,
    /// Subgraph with the largest intensity: the fusion hint.
    pub fusion: Option<String>,
    pub subgraphs_evaluated: usize,
    pub subgraphs_skipped: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseReport {
    pub condition: Option<String>,
    pub leading: String,
    pub full_bound: String,
    pub rho: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub program: String,
    pub statements: Vec<StatementReport>,
    pub sdg_bound: Option<SdgReport>,
    pub leading: String,
    pub full_bound: String,
    #[serde(rename = "X0")]
    pub x0: Option<String>,
    pub rho: Option<String>,
    pub tiles: BTreeMap<String, String>,
    pub cases: Vec<CaseReport>,
    pub warnings: Vec<String>,
    pub version: String,
}

fn text_map(m: &BTreeMap<String, crate::symbolic::SymExpr>) -> BTreeMap<String, String> {
    m.iter().map(|(k, v)| (k.clone(), v.to_string())).collect()
}

fn statement_report(a: &Analysis, case: &CaseAnalysis, b: &BoundResult) -> StatementReport {
    let id = b.statements[0];
    let st = &a.program.statements[id];
    let source = format!("{} {} {}", st.output, st.op.symbol(), st.rhs.render());
    StatementReport {
        label: b.label.clone(),
        line: st.line,
        source,
        case: case.condition.clone(),
        domain: b.domain.to_string(),
        chi: b.tiles.chi.to_string(),
        leading: b.leading.to_string(),
        full_bound: b.q_bound.to_string(),
        rho: b.rho.to_string(),
        x0: b.x0.as_ref().map(|x| x.to_string()),
        tiles: text_map(&b.tiles.tile_sizes),
        tiles_at_x0: text_map(&b.tiles_at_x0),
    }
}

fn sdg_report(b: &SdgBound) -> SdgReport {
    let fusion = b
        .terms
        .iter()
        .filter(|t| t.rho.is_some())
        .fold(None, |best: Option<&crate::sdg::ArrayTerm>, t| match best {
            Some(x) if !crate::sdg::rho_less(x.rho.as_ref().unwrap(), t.rho.as_ref().unwrap()) => Some(x),
            _ => Some(t),
        })
        .map(|t| t.subgraph.clone());
    SdgReport {
        leading: b.leading.to_string(),
        full_bound: b.q_bound.to_string(),
        arrays: b
            .terms
            .iter()
            .map(|t| ArrayReport {
                array: t.array.clone(),
                size: t.size.to_string(),
                rho: t.rho.as_ref().map(|r| r.to_string()),
                subgraph: t.subgraph.clone(),
                incomplete: t.incomplete,
            })
            .collect(),
        fusion,
        subgraphs_evaluated: b.subgraphs.len(),
        subgraphs_skipped: b.subgraphs.iter().filter(|e| e.result.is_err()).count(),
    }
}

impl Report {
    pub fn from_analysis(a: &Analysis) -> Report {
        let chosen = a.chosen();
        let mut statements = Vec::new();
        for case in &a.cases {
            for b in &case.bounds {
                let r = statement_report(a, case, b);
                if !statements.contains(&r) {
                    statements.push(r);
                }
            }
        }
        let dominant = a.dominant();
        Report {
            program: a.program.name.clone(),
            statements,
            sdg_bound: chosen.sdg.as_ref().map(sdg_report),
            leading: chosen.leading.to_string(),
            full_bound: chosen.q_bound.to_string(),
            x0: dominant.and_then(|b| b.x0.as_ref()).map(|x| x.to_string()),
            rho: chosen.rho.as_ref().map(|r| r.to_string()),
            tiles: dominant.map(|b| text_map(&b.tiles_at_x0)).unwrap_or_default(),
            cases: a
                .cases
                .iter()
                .map(|c| CaseReport {
                    condition: c.condition.clone(),
                    leading: c.leading.to_string(),
                    full_bound: c.q_bound.to_string(),
                    rho: c.rho.as_ref().map(|r| r.to_string()),
                })
                .collect(),
            warnings: a.warnings.clone(),
            version: REPORT_VERSION.to_string(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Report, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Human-readable rendering with the same content as the JSON form.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let opt = |o: &Option<String>| o.clone().unwrap_or_else(|| "unbounded".into());
        let _ = writeln!(out, "program {} (report version {})", self.program, self.version);
        let _ = writeln!(out, "leading bound: Q >= {}", self.leading);
        let _ = writeln!(out, "full bound:    Q >= {}", self.full_bound);
        let _ = writeln!(out, "rho: {}", opt(&self.rho));
        let _ = writeln!(out, "X0: {}", opt(&self.x0));
        for (v, e) in &self.tiles {
            let _ = writeln!(out, "tile {v}: {e}");
        }
        for s in &self.statements {
            let _ = writeln!(out, "\n{} (line {}): {}", s.label, s.line, s.source);
            if let Some(c) = &s.case {
                let _ = writeln!(out, "  case: {c}");
            }
            let _ = writeln!(out, "  domain: {}", s.domain);
            let _ = writeln!(out, "  chi(X) = {}", s.chi);
            for (v, e) in &s.tiles {
                let _ = writeln!(out, "  tile {v}(X) = {e}");
            }
            let _ = writeln!(out, "  X0 = {}", opt(&s.x0));
            for (v, e) in &s.tiles_at_x0 {
                let _ = writeln!(out, "  tile {v}(X0) = {e}");
            }
            let _ = writeln!(out, "  rho = {}", s.rho);
            let _ = writeln!(out, "  Q >= {}", s.full_bound);
            let _ = writeln!(out, "  leading: {}", s.leading);
        }
        if let Some(g) = &self.sdg_bound {
            let _ = writeln!(out, "\nmulti-statement bound: Q >= {}", g.full_bound);
            let _ = writeln!(out, "  leading: {}", g.leading);
            let _ = writeln!(out, "  subgraphs: {} evaluated, {} skipped", g.subgraphs_evaluated, g.subgraphs_skipped);
            for t in &g.arrays {
                let mark = if t.incomplete { " (incomplete)" } else { "" };
                let _ = writeln!(out, "  {}: |A| = {}, rho = {} via {}{mark}", t.array, t.size, opt(&t.rho), t.subgraph);
            }
            if let Some(f) = &g.fusion {
                let _ = writeln!(out, "  fusion hint: {f}");
            }
        }
        if self.cases.len() > 1 {
            let _ = writeln!(out, "\ncases:");
            for c in &self.cases {
                let cond = c.condition.clone().unwrap_or_else(|| "always".into());
                let _ = writeln!(out, "  {cond}: Q >= {} (leading {}, rho {})", c.full_bound, c.leading, opt(&c.rho));
            }
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }
}
