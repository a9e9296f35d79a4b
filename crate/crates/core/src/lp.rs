//! Exact rational linear programming (two-phase simplex, Bland's rule).

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rel {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub coeffs: Vec<BigRational>,
    pub rel: Rel,
    pub rhs: BigRational,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<BigRational>, value: BigRational },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn optimal(&self) -> Option<(&[BigRational], &BigRational)> {
        match self {
            LpOutcome::Optimal { x, value } => Some((x, value)),
            _ => None,
        }
    }
}

/// Linear program over `n` variables; variables are non-negative unless marked free.
#[derive(Clone, Debug)]
pub struct Lp {
    n: usize,
    free: Vec<bool>,
    rows: Vec<Constraint>,
}

impl Lp {
    pub fn new(n: usize) -> Self {
        Lp { n, free: vec![false; n], rows: Vec::new() }
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.rows
    }

    pub fn set_free(&mut self, var: usize) {
        self.free[var] = true;
    }

    pub fn add(&mut self, coeffs: Vec<BigRational>, rel: Rel, rhs: BigRational) {
        assert_eq!(coeffs.len(), self.n);
        self.rows.push(Constraint { coeffs, rel, rhs });
    }

    pub fn minimize(&self, c: &[BigRational]) -> LpOutcome {
        solve(self, c)
    }

    pub fn maximize(&self, c: &[BigRational]) -> LpOutcome {
        let neg: Vec<BigRational> = c.iter().map(|v| -v.clone()).collect();
        match solve(self, &neg) {
            LpOutcome::Optimal { x, value } => LpOutcome::Optimal { x, value: -value },
            o => o,
        }
    }

    pub fn feasible(&self) -> bool {
        !matches!(self.minimize(&vec![BigRational::zero(); self.n]), LpOutcome::Infeasible)
    }
}

struct Tableau {
    /// m rows of (cols + 1) entries; the last entry is the right-hand side.
    a: Vec<Vec<BigRational>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.a[r][c].clone();
        for v in self.a[r].iter_mut() {
            *v /= &p;
        }
        let pivot_row = self.a[r].clone();
        for (i, row) in self.a.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for (v, pv) in row.iter_mut().zip(pivot_row.iter()) {
                if !pv.is_zero() {
                    *v -= &f * pv;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Runs simplex on cost vector `cost` (length cols) restricted to `allowed` columns.
    /// Returns false when unbounded.
    fn run(&mut self, cost: &[BigRational], allowed: &[bool]) -> bool {
        loop {
            // reduced costs: c_j - c_B B^-1 A_j
            let mut enter = None;
            for j in 0..self.cols {
                if !allowed[j] || self.basis.contains(&j) {
                    continue;
                }
                let mut rc = cost[j].clone();
                for (i, &b) in self.basis.iter().enumerate() {
                    if !self.a[i][j].is_zero() {
                        rc -= &cost[b] * &self.a[i][j];
                    }
                }
                if rc.is_negative() {
                    enter = Some(j);
                    break;
                }
            }
            let Some(j) = enter else { return true };
            let mut leave: Option<(usize, BigRational)> = None;
            for i in 0..self.a.len() {
                let aij = &self.a[i][j];
                if aij.is_positive() {
                    let ratio = &self.a[i][self.cols] / aij;
                    let better = match &leave {
                        None => true,
                        Some((li, lr)) => ratio < *lr || (ratio == *lr && self.basis[i] < self.basis[*li]),
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            match leave {
                None => return false,
                Some((i, _)) => self.pivot(i, j),
            }
        }
    }
}

fn solve(lp: &Lp, c: &[BigRational]) -> LpOutcome {
    // Column layout: original vars (free vars get a negative twin), slacks, artificials.
    let mut col_of: Vec<(usize, Option<usize>)> = Vec::new();
    let mut cols = 0;
    for v in 0..lp.n {
        if lp.free[v] {
            col_of.push((cols, Some(cols + 1)));
            cols += 2;
        } else {
            col_of.push((cols, None));
            cols += 1;
        }
    }
    let n_struct = cols;
    let slack_start = cols;
    let n_slack = lp.rows.iter().filter(|r| r.rel != Rel::Eq).count();
    cols += n_slack;
    let art_start = cols;
    let m = lp.rows.len();
    cols += m;

    let mut a = vec![vec![BigRational::zero(); cols + 1]; m];
    let mut s = slack_start;
    for (i, row) in lp.rows.iter().enumerate() {
        for v in 0..lp.n {
            let (p, q) = col_of[v];
            a[i][p] = row.coeffs[v].clone();
            if let Some(q) = q {
                a[i][q] = -row.coeffs[v].clone();
            }
        }
        match row.rel {
            Rel::Le => {
                a[i][s] = BigRational::one();
                s += 1;
            }
            Rel::Ge => {
                a[i][s] = -BigRational::one();
                s += 1;
            }
            Rel::Eq => {}
        }
        a[i][cols] = row.rhs.clone();
        if a[i][cols].is_negative() {
            for v in a[i].iter_mut() {
                *v = -v.clone();
            }
        }
        a[i][art_start + i] = BigRational::one();
    }
    let mut t = Tableau { a, basis: (art_start..art_start + m).collect(), cols };

    let mut phase1 = vec![BigRational::zero(); cols];
    for v in phase1.iter_mut().skip(art_start) {
        *v = BigRational::one();
    }
    let all = vec![true; cols];
    t.run(&phase1, &all);
    let infeas: BigRational = (0..m)
        .filter(|&i| t.basis[i] >= art_start)
        .map(|i| t.a[i][cols].clone())
        .fold(BigRational::zero(), |x, y| x + y);
    if infeas.is_positive() {
        return LpOutcome::Infeasible;
    }
    // Drive remaining zero-level artificials out of the basis.
    for i in 0..m {
        if t.basis[i] >= art_start {
            if let Some(j) = (0..art_start).find(|&j| !t.a[i][j].is_zero()) {
                t.pivot(i, j);
            }
        }
    }
    let mut cost = vec![BigRational::zero(); cols];
    for v in 0..lp.n {
        let (p, q) = col_of[v];
        cost[p] = c[v].clone();
        if let Some(q) = q {
            cost[q] = -c[v].clone();
        }
    }
    let allowed: Vec<bool> = (0..cols).map(|j| j < art_start).collect();
    if !t.run(&cost, &allowed) {
        return LpOutcome::Unbounded;
    }
    let mut colval = vec![BigRational::zero(); n_struct];
    for (i, &b) in t.basis.iter().enumerate() {
        if b < n_struct {
            colval[b] = t.a[i][cols].clone();
        }
    }
    let x: Vec<BigRational> = col_of
        .iter()
        .map(|&(p, q)| match q {
            Some(q) => &colval[p] - &colval[q],
            None => colval[p].clone(),
        })
        .collect();
    let value = x.iter().zip(c).map(|(a, b)| a * b).fold(BigRational::zero(), |s, v| s + v);
    LpOutcome::Optimal { x, value }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64) -> BigRational {
        BigRational::from_integer(n.into())
    }

    #[test]
    fn small_max() {
        // max x + y, x + 2y <= 4, 3x + y <= 6
        let mut lp = Lp::new(2);
        lp.add(vec![r(1), r(2)], Rel::Le, r(4));
        lp.add(vec![r(3), r(1)], Rel::Le, r(6));
        let (x, v) = lp.maximize(&[r(1), r(1)]).optimal().map(|(x, v)| (x.to_vec(), v.clone())).unwrap();
        assert_eq!(v, BigRational::new(14.into(), 5.into()));
        assert_eq!(x, vec![BigRational::new(8.into(), 5.into()), BigRational::new(6.into(), 5.into())]);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = Lp::new(1);
        lp.add(vec![r(1)], Rel::Ge, r(2));
        lp.add(vec![r(1)], Rel::Le, r(1));
        assert_eq!(lp.minimize(&[r(1)]), LpOutcome::Infeasible);
        let mut lp = Lp::new(1);
        lp.add(vec![r(1)], Rel::Ge, r(2));
        assert_eq!(lp.maximize(&[r(1)]), LpOutcome::Unbounded);
    }

    #[test]
    fn free_variable() {
        let mut lp = Lp::new(1);
        lp.set_free(0);
        lp.add(vec![r(1)], Rel::Ge, r(-3));
        let (x, _) = lp.minimize(&[r(1)]).optimal().map(|(x, v)| (x.to_vec(), v.clone())).unwrap();
        assert_eq!(x[0], r(-3));
    }

    #[test]
    fn degenerate_equalities() {
        // duplicated equality rows must not break phase one
        let mut lp = Lp::new(2);
        lp.add(vec![r(1), r(1)], Rel::Eq, r(1));
        lp.add(vec![r(2), r(2)], Rel::Eq, r(2));
        let (_, v) = lp.minimize(&[r(1), r(0)]).optimal().map(|(x, v)| (x.to_vec(), v.clone())).unwrap();
        assert_eq!(v, r(0));
    }
}
