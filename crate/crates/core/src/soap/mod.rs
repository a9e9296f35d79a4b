//! Projection of statements onto simple-overlap form.
//!
//! Three rewrites are applied until every array group is a simple overlap:
//! provably disjoint access classes become separate virtual arrays, an output
//! that overwrites its own input gains a version dimension, and dimensions that
//! combine several iteration variables produce one statement per stride regime.

mod disjoint;

use std::collections::HashMap;

use thiserror::Error;

use crate::frontend::{extract_accesses, AccessInfo, AccessRef, ArrayAccess, DimIndex, NonConformance, Program, Statement};
use crate::symbolic::SymExpr;

pub use disjoint::prove_disjoint;
pub(crate) use disjoint::domain_is_empty;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SoapError {
    #[error("statement at line {line}: cannot prove that `{first}` and `{second}` are disjoint")]
    CannotProveDisjoint { line: usize, first: String, second: String },
    #[error("statement at line {line}: `{array}` is overwritten in place but every loop variable indexes it")]
    NoFreeVariable { line: usize, array: String },
    #[error("statement at line {line}: unsupported access `{access}`")]
    UnsupportedAccess { line: usize, access: String },
}

/// Certificate that two access components never coincide.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DisjointnessWitness {
    pub first: ArrayAccess,
    pub second: ArrayAccess,
    pub certificate: Vec<String>,
}

/// Stride regime assumed by a projection of a combined-index access.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Regime {
    /// Distinct iterations touch distinct elements: extent is the product of ranges.
    Injective,
    /// Unit strides: extent is the largest contributing range.
    MaxOverlap,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CaseCondition {
    pub regime: Regime,
    pub predicate: String,
}

/// A statement in simple-overlap form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SoapStatement {
    pub statement: Statement,
    /// One conforming group per (virtual) array; the output group is flagged.
    pub accesses: Vec<AccessInfo>,
    /// Name of the array this statement computes (after renaming).
    pub output_array: String,
    /// Arity of the output before a version dimension was appended.
    pub output_base_arity: usize,
    pub version_dims: Vec<(String, String)>,
    pub case_condition: Option<CaseCondition>,
    pub witnesses: Vec<DisjointnessWitness>,
    /// Virtual array name to source array name.
    pub renamed: Vec<(String, String)>,
}

impl SoapStatement {
    pub fn vars(&self) -> Vec<String> {
        self.statement.iter_vars()
    }

    pub fn regime(&self) -> Regime {
        self.case_condition.as_ref().map(|c| c.regime).unwrap_or(Regime::Injective)
    }

    /// Groups that are read by this statement.
    pub fn input_groups(&self) -> impl Iterator<Item = &AccessInfo> {
        self.accesses.iter().filter(|a| a.has_input())
    }

    pub fn output_group(&self) -> &AccessInfo {
        self.accesses
            .iter()
            .find(|a| a.array == self.output_array)
            .expect("statement without output group")
    }

    /// Source array of a possibly virtual name.
    pub fn source_array<'a>(&'a self, name: &'a str) -> &'a str {
        self.renamed.iter().find(|(v, _)| v == name).map(|(_, s)| s.as_str()).unwrap_or(name)
    }
}

/// Hands out fresh virtual array names `A_1, A_2, ...` across a program.
#[derive(Debug, Default)]
pub struct Namer {
    next: HashMap<String, usize>,
    taken: Vec<String>,
}

impl Namer {
    pub fn for_program(p: &Program) -> Self {
        let mut taken = Vec::new();
        for st in &p.statements {
            for a in st.inputs.iter().chain([&st.output]) {
                taken.push(a.array.clone());
            }
        }
        Namer { next: HashMap::new(), taken }
    }

    pub fn fresh(&mut self, base: &str) -> String {
        loop {
            let k = self.next.entry(base.to_string()).or_insert(0);
            *k += 1;
            let name = format!("{base}_{k}");
            if !self.taken.contains(&name) {
                self.taken.push(name.clone());
                return name;
            }
        }
    }
}

fn rename(access: &ArrayAccess, name: &str) -> ArrayAccess {
    ArrayAccess { array: name.to_string(), indices: access.indices.clone() }
}

/// Splits a group with mismatched variables into translation classes, each a
/// fresh virtual array, provided all classes are pairwise disjoint.
pub fn split_disjoint(
    st: &Statement,
    info: &AccessInfo,
    namer: &mut Namer,
) -> Result<(Vec<AccessInfo>, Vec<DisjointnessWitness>), SoapError> {
    let mut classes: Vec<Vec<AccessRef>> = Vec::new();
    for a in &info.accesses {
        let home = classes.iter_mut().find(|c| {
            c[0].access.indices.iter().zip(&a.access.indices).all(|(x, y)| (x - y).as_integer().is_some())
        });
        match home {
            Some(c) => c.push(a.clone()),
            None => classes.push(vec![a.clone()]),
        }
    }
    // Output class first, then order of first appearance.
    classes.sort_by_key(|c| !c.iter().any(|a| a.is_output));
    let mut witnesses = Vec::new();
    for i in 0..classes.len() {
        for j in i + 1..classes.len() {
            for a in &classes[i] {
                for b in &classes[j] {
                    match prove_disjoint(&st.loops, &a.access, &b.access) {
                        Some(cert) => witnesses.push(DisjointnessWitness {
                            first: a.access.clone(),
                            second: b.access.clone(),
                            certificate: cert,
                        }),
                        None => {
                            return Err(SoapError::CannotProveDisjoint {
                                line: st.line,
                                first: a.access.to_string(),
                                second: b.access.to_string(),
                            })
                        }
                    }
                }
            }
        }
    }
    let vars = st.iter_vars();
    let infos = classes
        .into_iter()
        .map(|class| {
            let name = namer.fresh(&info.array);
            let group: Vec<AccessRef> = class
                .into_iter()
                .map(|a| AccessRef { access: rename(&a.access, &name), is_output: a.is_output })
                .collect();
            AccessInfo::from_accesses(&name, group, &vars)
        })
        .collect();
    Ok((infos, witnesses))
}

/// Appends a version dimension indexed by the innermost loop variable absent
/// from the output access: output gets `v + 1`, inputs get `v`.
pub fn add_version_dimension(st: &Statement, info: &AccessInfo) -> Result<(AccessInfo, String), SoapError> {
    let output = info
        .accesses
        .iter()
        .find(|a| a.is_output)
        .ok_or_else(|| SoapError::NoFreeVariable { line: st.line, array: info.array.clone() })?;
    let vars = st.iter_vars();
    let used: Vec<String> = output.access.indices.iter().flat_map(|e| e.symbols()).collect();
    let v = vars
        .iter()
        .rev()
        .find(|v| !used.contains(v))
        .ok_or_else(|| SoapError::NoFreeVariable { line: st.line, array: info.array.clone() })?
        .clone();
    let var = SymExpr::symbol(&v);
    let group: Vec<AccessRef> = info
        .accesses
        .iter()
        .map(|a| {
            let mut indices = a.access.indices.clone();
            indices.push(if a.is_output { &var + &SymExpr::one() } else { var.clone() });
            AccessRef { access: ArrayAccess { array: a.access.array.clone(), indices }, is_output: a.is_output }
        })
        .collect();
    Ok((AccessInfo::from_accesses(&info.array, group, &vars), v))
}

/// Case predicates for a group whose dimensions combine iteration variables.
pub fn project_noninjective(st: &Statement, info: &AccessInfo) -> Result<Vec<CaseCondition>, SoapError> {
    let vars = st.iter_vars();
    let mut injective = Vec::new();
    let mut overlap = Vec::new();
    for e in &info.base {
        let (coeffs, _) = e
            .split_affine(&vars)
            .ok_or_else(|| SoapError::UnsupportedAccess { line: st.line, access: e.to_string() })?;
        if coeffs.len() < 2 {
            continue;
        }
        let mut terms: Vec<(String, SymExpr)> = coeffs.into_iter().collect();
        // Unit-coefficient variables are the inner ones.
        terms.sort_by_key(|(_, c)| c.as_integer().map(|k| k.abs()).unwrap_or(i64::MAX));
        for w in terms.windows(2) {
            let (inner, c_in) = &w[0];
            let (_, c_out) = &w[1];
            let range = st
                .loops
                .iter()
                .find(|l| &l.var == inner)
                .map(|l| &l.upper - &l.lower)
                .ok_or_else(|| SoapError::UnsupportedAccess { line: st.line, access: e.to_string() })?;
            injective.push(format!("{c_out} >= {}", &range * c_in));
            if c_out.as_integer().is_none() || c_out.as_integer() != Some(1) {
                overlap.push(format!("{c_out} = 1"));
            }
        }
    }
    if overlap.is_empty() {
        overlap.push("unit strides".to_string());
    }
    Ok(vec![
        CaseCondition { regime: Regime::Injective, predicate: injective.join(" and ") },
        CaseCondition { regime: Regime::MaxOverlap, predicate: overlap.join(" and ") },
    ])
}

/// Normalizes one statement. Returns one projection per stride regime.
pub fn normalize_statement(st: &Statement, namer: &mut Namer) -> Result<Vec<SoapStatement>, SoapError> {
    let mut work: Vec<AccessInfo> = extract_accesses(st);
    work.reverse();
    let mut done = Vec::new();
    let mut witnesses = Vec::new();
    let mut version_dims = Vec::new();
    let mut renamed = Vec::new();
    let mut output_array = st.output.array.clone();
    let mut cases: Option<Vec<CaseCondition>> = None;
    while let Some(info) = work.pop() {
        match &info.nonconforming {
            Some(NonConformance::VariableMismatch) => {
                let (parts, w) = split_disjoint(st, &info, namer)?;
                witnesses.extend(w);
                for p in parts.into_iter().rev() {
                    renamed.push((p.array.clone(), info.array.clone()));
                    if p.accesses.iter().any(|a| a.is_output) {
                        output_array = p.array.clone();
                    }
                    work.push(p);
                }
            }
            Some(NonConformance::OutputEqualsInput) => {
                let (v, var) = add_version_dimension(st, &info)?;
                version_dims.push((info.array.clone(), var));
                work.push(v);
            }
            Some(NonConformance::NonInjectiveCandidate) => {
                let c = project_noninjective(st, &info)?;
                if cases.is_none() {
                    cases = Some(c);
                }
                done.push(AccessInfo { nonconforming: None, ..info });
            }
            None => done.push(info),
        }
    }
    let base = SoapStatement {
        statement: st.clone(),
        accesses: done,
        output_array,
        output_base_arity: st.output.indices.len(),
        version_dims,
        case_condition: None,
        witnesses,
        renamed,
    };
    Ok(match cases {
        None => vec![base],
        Some(cs) => cs.into_iter().map(|c| SoapStatement { case_condition: Some(c), ..base.clone() }).collect(),
    })
}

/// Normalizes every statement of a program.
pub fn normalize_program(p: &Program) -> Result<Vec<Vec<SoapStatement>>, SoapError> {
    let mut namer = Namer::for_program(p);
    p.statements.iter().map(|st| normalize_statement(st, &mut namer)).collect()
}

/// Distinct-element count of `Σ c_i·v_i` over boxes `0..n_i`; used to check the
/// non-injective bracket.
pub fn combined_image_size(coeffs: &[i64], extents: &[i64]) -> usize {
    let mut seen = std::collections::HashSet::new();
    let mut idx = vec![0i64; extents.len()];
    if extents.iter().any(|&n| n <= 0) {
        return 0;
    }
    loop {
        seen.insert(idx.iter().zip(coeffs).map(|(i, c)| i * c).sum::<i64>());
        let mut k = 0;
        loop {
            if k == idx.len() {
                return seen.len();
            }
            idx[k] += 1;
            if idx[k] < extents[k] {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Base dimension classification, re-exported for bound construction.
pub fn dim_vars(d: &DimIndex) -> Vec<String> {
    match d {
        DimIndex::Const => vec![],
        DimIndex::Var(v) => vec![v.clone()],
        DimIndex::Combination(vs) => vs.clone(),
    }
}
