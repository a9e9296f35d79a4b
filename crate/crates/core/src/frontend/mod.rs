//! Loop-nest DSL: parsing, rendering and per-array access decomposition.
//!
//! ```text
//! params: N, T
//! for t in range(1, T):
//!     for i in range(t, N - t):
//!         A[i, t + 1] = f(A[i - 1, t], A[i, t], A[i + 1, t], B[i])
//! ```

mod parser;

use std::collections::BTreeSet;
use std::fmt::Write as _;

use num_traits::ToPrimitive;
use thiserror::Error;

use crate::symbolic::{Expr, SymExpr};

pub use parser::{parse_named, parse_program};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrontendError {
    #[error("syntax error at line {line}, column {col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("non-affine loop bound at line {line}, column {col}: {detail}")]
    NonAffineBound { line: usize, col: usize, detail: String },
    #[error("non-affine array index at line {line}, column {col}: {detail}")]
    NonAffineIndex { line: usize, col: usize, detail: String },
}

/// `for var in range(lower, upper)`; the upper bound is exclusive.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Loop {
    pub var: String,
    pub lower: SymExpr,
    pub upper: SymExpr,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AssignOp {
    Set,
    Add,
    Sub,
    Mul,
}

impl AssignOp {
    pub fn symbol(&self) -> &'static str {
        match self {
            AssignOp::Set => "=",
            AssignOp::Add => "+=",
            AssignOp::Sub => "-=",
            AssignOp::Mul => "*=",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ArrayAccess {
    pub array: String,
    pub indices: Vec<SymExpr>,
}

impl std::fmt::Display for ArrayAccess {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let idx: Vec<String> = self.indices.iter().map(|e| e.to_string()).collect();
        write!(f, "{}[{}]", self.array, idx.join(", "))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Statement {
    pub id: usize,
    /// Enclosing loops, outermost first.
    pub loops: Vec<Loop>,
    pub output: ArrayAccess,
    /// Reads in source order. For compound assignments the accumulator comes first.
    pub inputs: Vec<ArrayAccess>,
    pub op: AssignOp,
    pub rhs: Expr,
    pub line: usize,
}

impl Statement {
    pub fn iter_vars(&self) -> Vec<String> {
        self.loops.iter().map(|l| l.var.clone()).collect()
    }

    /// Compound assignment (`+=` and friends): the first input is an implicit accumulator.
    pub fn accumulates(&self) -> bool {
        self.op != AssignOp::Set
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Node {
    Loop(Loop, Vec<Node>),
    Stmt(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    pub name: String,
    pub params: Vec<String>,
    pub body: Vec<Node>,
    pub statements: Vec<Statement>,
}

impl Program {
    /// Source text that parses back to an identical program.
    pub fn render(&self) -> String {
        let mut out = format!("params: {}\n", self.params.join(", "));
        for n in &self.body {
            self.render_node(n, 0, &mut out);
        }
        out
    }

    fn render_node(&self, n: &Node, depth: usize, out: &mut String) {
        let pad = "    ".repeat(depth);
        match n {
            Node::Loop(l, body) => {
                let _ = writeln!(out, "{pad}for {} in range({}, {}):", l.var, l.lower, l.upper);
                for c in body {
                    self.render_node(c, depth + 1, out);
                }
            }
            Node::Stmt(id) => {
                let st = &self.statements[*id];
                let _ = writeln!(out, "{pad}{} {} {}", st.output, st.op.symbol(), st.rhs.render());
            }
        }
    }
}

/// Why an array's accesses are not yet a simple overlap.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NonConformance {
    /// Accesses differ by more than a constant translation.
    VariableMismatch,
    /// The output access coincides with an input access.
    OutputEqualsInput,
    /// Some dimension combines several iteration variables.
    NonInjectiveCandidate,
}

/// How one array dimension of the base access is indexed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DimIndex {
    Const,
    Var(String),
    /// Affine combination of several iteration variables.
    Combination(Vec<String>),
}

/// One access together with its role.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AccessRef {
    pub access: ArrayAccess,
    pub is_output: bool,
}

/// Per-array description of all accesses made by one statement.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AccessInfo {
    pub array: String,
    /// Inputs in source order, then the output if the statement writes this array.
    pub accesses: Vec<AccessRef>,
    pub base: Vec<SymExpr>,
    pub dims: Vec<DimIndex>,
    /// Translation of each access relative to `base`, aligned with `accesses`.
    pub translations: Vec<Vec<i64>>,
    /// Distinct non-zero coordinates per dimension.
    pub offset_sets: Vec<BTreeSet<i64>>,
    pub includes_output: bool,
    pub nonconforming: Option<NonConformance>,
}

impl AccessInfo {
    pub fn is_conforming(&self) -> bool {
        self.nonconforming.is_none()
    }

    pub fn has_input(&self) -> bool {
        self.accesses.iter().any(|a| !a.is_output)
    }

    pub fn offset_sizes(&self) -> Vec<usize> {
        self.offset_sets.iter().map(|s| s.len()).collect()
    }

    /// Builds the description for a group of accesses to one array.
    pub fn from_accesses(array: &str, accesses: Vec<AccessRef>, vars: &[String]) -> AccessInfo {
        let base_pos = accesses.iter().position(|a| !a.is_output).unwrap_or(0);
        let base = accesses[base_pos].access.indices.clone();
        let dims = base.iter().map(|e| classify_dim(e, vars)).collect::<Vec<_>>();
        let mut translations = Vec::new();
        let mut mismatch = false;
        for a in &accesses {
            let mut t = Vec::new();
            if a.access.indices.len() != base.len() {
                mismatch = true;
                translations.push(vec![0; base.len()]);
                continue;
            }
            for (e, b) in a.access.indices.iter().zip(&base) {
                match (e - b).as_integer() {
                    Some(v) => t.push(v),
                    None => {
                        mismatch = true;
                        t.push(0);
                    }
                }
            }
            translations.push(t);
        }
        let d = base.len();
        let offset_sets: Vec<BTreeSet<i64>> = (0..d)
            .map(|i| translations.iter().map(|t| t[i]).filter(|&v| v != 0).collect())
            .collect();
        let includes_output = accesses.iter().any(|a| a.is_output) && accesses.iter().any(|a| !a.is_output);
        let output_equals_input = accesses.iter().any(|a| a.is_output)
            && accesses.iter().filter(|a| !a.is_output).any(|i| {
                accesses.iter().any(|o| o.is_output && o.access.indices == i.access.indices)
            });
        let nonconforming = if mismatch {
            Some(NonConformance::VariableMismatch)
        } else if output_equals_input {
            Some(NonConformance::OutputEqualsInput)
        } else if dims.iter().any(|d| matches!(d, DimIndex::Combination(_))) {
            Some(NonConformance::NonInjectiveCandidate)
        } else {
            None
        };
        AccessInfo {
            array: array.to_string(),
            accesses,
            base,
            dims,
            translations,
            offset_sets,
            includes_output,
            nonconforming,
        }
    }
}

fn classify_dim(e: &SymExpr, vars: &[String]) -> DimIndex {
    match e.split_affine(vars) {
        Some((coeffs, _)) => match coeffs.len() {
            0 => DimIndex::Const,
            1 => DimIndex::Var(coeffs.keys().next().unwrap().clone()),
            _ => DimIndex::Combination(coeffs.keys().cloned().collect()),
        },
        None => DimIndex::Const,
    }
}

/// Groups a statement's accesses by array and decomposes each group into
/// base plus constant translations.
pub fn extract_accesses(st: &Statement) -> Vec<AccessInfo> {
    let vars = st.iter_vars();
    let mut order: Vec<String> = Vec::new();
    for a in st.inputs.iter().chain(std::iter::once(&st.output)) {
        if !order.contains(&a.array) {
            order.push(a.array.clone());
        }
    }
    order
        .iter()
        .map(|name| {
            let mut group: Vec<AccessRef> = st
                .inputs
                .iter()
                .filter(|a| &a.array == name)
                .map(|a| AccessRef { access: a.clone(), is_output: false })
                .collect();
            if &st.output.array == name {
                group.push(AccessRef { access: st.output.clone(), is_output: true });
            }
            AccessInfo::from_accesses(name, group, &vars)
        })
        .collect()
}

/// Evaluates an affine index at concrete integer values.
pub fn eval_index(e: &SymExpr, point: &std::collections::HashMap<String, num_rational::BigRational>) -> Option<i64> {
    let v = e.eval_exact(point)?;
    if v.is_integer() {
        v.to_integer().to_i64()
    } else {
        None
    }
}

#[cfg(test)]
mod tests;
