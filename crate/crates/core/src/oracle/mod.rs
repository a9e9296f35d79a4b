//! Concrete computation DAGs and red-blue pebbling at desk scale.
//!
//! These are the ground truth the symbolic bounds are checked against: a
//! program is unrolled at small parameter values, pebbled exactly by search
//! and heuristically by a scheduler, and the symbolic bound must not exceed
//! the exact cost.

use std::collections::{BTreeMap, HashMap};

use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::frontend::{Node, Program};
use crate::symbolic::SymExpr;

mod flow;
mod pebble;
mod verify;

pub use flow::{min_boundary_dominator, min_dominator};
pub use pebble::{pebble_exact, pebble_greedy, replay, Move, PebbleOptions, Pebbling};
pub use verify::{verify_bound, verify_expression, Verification};

/// Largest CDAG the oracle will build.
pub const MAX_VERTICES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("instance has more than {cap} vertices")]
    TooLarge { cap: usize },
    #[error("parameter {0} has no value")]
    UnboundParameter(String),
    #[error("line {line}: expression {expr} does not evaluate to an integer")]
    NonIntegral { line: usize, expr: String },
    #[error("vertex {vertex} has {parents} parents, which needs more than S = {s} red pebbles")]
    InfeasibleCapacity { vertex: usize, parents: usize, s: usize },
    #[error("exact search supports at most {cap} vertices, instance has {count}")]
    TooManyForSearch { count: usize, cap: usize },
    #[error("search budget of {budget} states exhausted; optimum lies in [{lower}, {upper}]")]
    SearchBudgetExceeded { budget: usize, lower: u64, upper: u64 },
    #[error("symbolic bound {bound} exceeds the exact pebbling cost {exact}")]
    SoundnessViolation { bound: f64, exact: u64 },
    #[error("analysis failed: {0}")]
    Analysis(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum VertexKind {
    Input,
    /// One execution of a statement; `version` counts writes to the element so far.
    Compute { statement: usize, iteration: Vec<i64>, version: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vertex {
    pub array: String,
    pub index: Vec<i64>,
    pub kind: VertexKind,
}

/// Vertices are numbered in execution order, which is topological.
#[derive(Clone, Debug, Default)]
pub struct Cdag {
    pub vertices: Vec<Vertex>,
    pub parents: Vec<Vec<usize>>,
    pub children: Vec<Vec<usize>>,
    pub inputs: Vec<usize>,
    /// Compute vertices nobody reads: final versions and dead writes.
    pub outputs: Vec<usize>,
}

impl Cdag {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn compute_count(&self) -> usize {
        self.vertices.len() - self.inputs.len()
    }

    pub fn is_input(&self, v: usize) -> bool {
        matches!(self.vertices[v].kind, VertexKind::Input)
    }
}

/// `(Σ coeff·slot + constant) / den` over the loop variables and parameters.
struct Affine {
    coeff: Vec<(usize, i64)>,
    constant: i64,
    den: i64,
    text: String,
}

impl Affine {
    fn compile(e: &SymExpr, slots: &[String], line: usize) -> Result<Affine, OracleError> {
        let bad = || OracleError::NonIntegral { line, expr: e.to_string() };
        let (coeffs, rest) = e.split_affine(slots).ok_or_else(bad)?;
        let rest = rest.as_rational().ok_or_else(bad)?;
        let mut parts = Vec::new();
        for (v, c) in &coeffs {
            parts.push((slots.iter().position(|s| s == v).unwrap(), c.as_rational().ok_or_else(bad)?));
        }
        let den = parts.iter().fold(rest.denom().clone(), |d, (_, c)| d.lcm(c.denom()));
        let scale = |c: &num_rational::BigRational| (c * &den).to_integer().to_i64().ok_or_else(bad);
        Ok(Affine {
            coeff: parts.iter().map(|(k, c)| Ok((*k, scale(c)?))).collect::<Result<_, OracleError>>()?,
            constant: scale(&rest)?,
            den: den.to_i64().ok_or_else(bad)?,
            text: e.to_string(),
        })
    }

    fn numerator(&self, env: &[i64]) -> i64 {
        self.coeff.iter().map(|(k, c)| c * env[*k]).sum::<i64>() + self.constant
    }

    fn exact(&self, env: &[i64], line: usize) -> Result<i64, OracleError> {
        let n = self.numerator(env);
        if n % self.den != 0 {
            return Err(OracleError::NonIntegral { line, expr: self.text.clone() });
        }
        Ok(n / self.den)
    }

    fn ceil(&self, env: &[i64]) -> i64 {
        Integer::div_ceil(&self.numerator(env), &self.den)
    }
}

struct CompiledStatement {
    line: usize,
    output: (String, Vec<Affine>),
    inputs: Vec<(String, Vec<Affine>)>,
    vars: Vec<usize>,
}

struct Builder<'a> {
    program: &'a Program,
    slots: Vec<String>,
    env: Vec<i64>,
    statements: Vec<CompiledStatement>,
    g: Cdag,
    current: HashMap<(String, Vec<i64>), (usize, usize)>,
}

impl Builder<'_> {
    fn slot(&self, var: &str) -> usize {
        self.slots.iter().position(|s| s == var).unwrap()
    }

    fn add(&mut self, v: Vertex, parents: Vec<usize>) -> Result<usize, OracleError> {
        if self.g.vertices.len() >= MAX_VERTICES {
            return Err(OracleError::TooLarge { cap: MAX_VERTICES });
        }
        let id = self.g.vertices.len();
        for &p in &parents {
            self.g.children[p].push(id);
        }
        if matches!(v.kind, VertexKind::Input) {
            self.g.inputs.push(id);
        }
        self.g.vertices.push(v);
        self.g.parents.push(parents);
        self.g.children.push(Vec::new());
        Ok(id)
    }

    fn read(&mut self, key: (String, Vec<i64>)) -> Result<usize, OracleError> {
        if let Some(&(v, _)) = self.current.get(&key) {
            return Ok(v);
        }
        let v = self.add(Vertex { array: key.0.clone(), index: key.1.clone(), kind: VertexKind::Input }, vec![])?;
        self.current.insert(key, (v, 0));
        Ok(v)
    }

    fn execute(&mut self, id: usize) -> Result<(), OracleError> {
        let st = &self.statements[id];
        let reads = st.inputs.iter().map(|(a, idx)| element(&self.env, a, idx, st.line)).collect::<Result<Vec<_>, _>>()?;
        let key = element(&self.env, &st.output.0, &st.output.1, st.line)?;
        let iteration = st.vars.iter().map(|&s| self.env[s]).collect();
        let mut parents = Vec::new();
        for r in reads {
            let v = self.read(r)?;
            if !parents.contains(&v) {
                parents.push(v);
            }
        }
        let version = self.current.get(&key).map_or(0, |&(_, ver)| ver) + 1;
        let kind = VertexKind::Compute { statement: id, iteration, version };
        let v = self.add(Vertex { array: key.0.clone(), index: key.1.clone(), kind }, parents)?;
        self.current.insert(key, (v, version));
        Ok(())
    }

    fn walk(&mut self, nodes: &[Node]) -> Result<(), OracleError> {
        for n in nodes {
            match n {
                Node::Stmt(id) => self.execute(*id)?,
                Node::Loop(l, body) => {
                    let line = body_line(self.program, body);
                    let lo = Affine::compile(&l.lower, &self.slots, line)?.ceil(&self.env);
                    let hi = Affine::compile(&l.upper, &self.slots, line)?.ceil(&self.env);
                    let s = self.slot(&l.var);
                    for i in lo..hi {
                        self.env[s] = i;
                        self.walk(body)?;
                    }
                }
            }
        }
        Ok(())
    }
}

fn element(env: &[i64], array: &str, idx: &[Affine], line: usize) -> Result<(String, Vec<i64>), OracleError> {
    let index = idx.iter().map(|a| a.exact(env, line)).collect::<Result<Vec<_>, _>>()?;
    Ok((array.to_string(), index))
}

fn body_line(p: &Program, body: &[Node]) -> usize {
    match body.first() {
        Some(Node::Stmt(id)) => p.statements[*id].line,
        Some(Node::Loop(_, b)) => body_line(p, b),
        None => 0,
    }
}

/// Unrolls `p` at the given parameter values with last-writer semantics:
/// each write creates a new version of the element, and each read depends on
/// the latest version (or an input vertex if the element was never written).
pub fn build_cdag(p: &Program, params: &BTreeMap<String, i64>) -> Result<Cdag, OracleError> {
    let mut slots: Vec<String> = p.params.clone();
    for st in &p.statements {
        for v in st.iter_vars() {
            if !slots.contains(&v) {
                slots.push(v);
            }
        }
    }
    let mut env = vec![0; slots.len()];
    for (k, name) in p.params.iter().enumerate() {
        env[k] = *params.get(name).ok_or_else(|| OracleError::UnboundParameter(name.clone()))?;
    }
    let mut statements = Vec::new();
    for st in &p.statements {
        let compile = |a: &crate::frontend::ArrayAccess| -> Result<(String, Vec<Affine>), OracleError> {
            let idx = a.indices.iter().map(|e| Affine::compile(e, &slots, st.line)).collect::<Result<_, _>>()?;
            Ok((a.array.clone(), idx))
        };
        statements.push(CompiledStatement {
            line: st.line,
            output: compile(&st.output)?,
            inputs: st.inputs.iter().map(compile).collect::<Result<_, _>>()?,
            vars: st.iter_vars().iter().map(|v| slots.iter().position(|s| s == v).unwrap()).collect(),
        });
    }
    let mut b = Builder { program: p, slots, env, statements, g: Cdag::default(), current: HashMap::new() };
    b.walk(&p.body)?;
    let mut g = b.g;
    g.outputs = (0..g.len()).filter(|&v| !g.is_input(v) && g.children[v].is_empty()).collect();
    Ok(g)
}

/// Evaluates a symbolic bound at concrete parameters and capacity.
pub fn evaluate_bound(q: &SymExpr, params: &BTreeMap<String, i64>, s: usize) -> f64 {
    let mut point: HashMap<String, f64> = params.iter().map(|(k, v)| (k.clone(), *v as f64)).collect();
    point.insert(crate::bounds::S.to_string(), s as f64);
    let v = q.evaluate(&point);
    if v.is_nan() || (v.is_zero() && v.is_negative()) {
        0.0
    } else {
        v
    }
}
