//! Numeric primal solver used to cross-check symbolic tilings.
//!
//! Maximizes `a·z` over `z = ln b ≥ 0` subject to `ln Σ c_k e^{e_k·z} ≤ ln X`
//! with a log-barrier Newton method.

use nalgebra::{DMatrix, DVector};
use num_traits::ToPrimitive;

use super::gp::Term;

struct Problem {
    c: Vec<f64>,
    e: Vec<DVector<f64>>,
    a: DVector<f64>,
    log_x: f64,
}

impl Problem {
    /// Log-sum-exp of the constraint with its gradient and Hessian.
    fn lse(&self, z: &DVector<f64>) -> (f64, DVector<f64>, DMatrix<f64>) {
        let n = z.len();
        let logs: Vec<f64> = self.c.iter().zip(&self.e).map(|(c, e)| c.ln() + e.dot(z)).collect();
        let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = w.iter().sum();
        let mut g = DVector::zeros(n);
        let mut h = DMatrix::zeros(n, n);
        for (wk, ek) in w.iter().zip(&self.e) {
            let p = wk / total;
            g += p * ek;
            h += p * ek * ek.transpose();
        }
        h -= &g * g.transpose();
        (top + total.ln(), g, h)
    }

    fn barrier(&self, z: &DVector<f64>, t: f64) -> Option<f64> {
        let (l, _, _) = self.lse(z);
        let u = self.log_x - l;
        if u <= 0.0 || z.iter().any(|&v| v <= 0.0) {
            return None;
        }
        Some(-t * self.a.dot(z) - u.ln() - z.iter().map(|v| v.ln()).sum::<f64>())
    }
}

/// Returns `(χ, tiles)` at the given X, or `None` when even unit tiles are infeasible.
pub fn maximize_primal(terms: &[Term], a: &[f64], x: f64) -> Option<(f64, Vec<f64>)> {
    let n = a.len();
    let p = Problem {
        c: terms.iter().map(|t| t.coeff.to_f64().unwrap()).collect(),
        e: terms.iter().map(|t| DVector::from_iterator(n, t.exps.iter().map(|v| v.to_f64().unwrap()))).collect(),
        a: DVector::from_column_slice(a),
        log_x: x.ln(),
    };
    let mut z = DVector::from_element(n, 1e-6);
    p.barrier(&z, 1.0)?;
    let mut t = 1.0;
    while t < 1e12 {
        for _ in 0..200 {
            let (l, gl, hl) = p.lse(&z);
            let u = p.log_x - l;
            let mut grad = -t * &p.a + &gl / u;
            let mut hess = &hl / u + &gl * gl.transpose() / (u * u);
            for j in 0..n {
                grad[j] -= 1.0 / z[j];
                hess[(j, j)] += 1.0 / (z[j] * z[j]);
            }
            let step = hess.clone().cholesky().map(|c| c.solve(&(-&grad))).or_else(|| hess.lu().solve(&(-&grad)))?;
            let dec = -grad.dot(&step);
            if dec < 1e-12 {
                break;
            }
            let f0 = p.barrier(&z, t)?;
            let mut s = 1.0;
            loop {
                let cand = &z + s * &step;
                if let Some(f) = p.barrier(&cand, t) {
                    if f <= f0 - 0.25 * s * dec {
                        z = cand;
                        break;
                    }
                }
                s *= 0.5;
                if s < 1e-18 {
                    break;
                }
            }
        }
        t *= 10.0;
    }
    Some((p.a.dot(&z).exp(), z.iter().map(|v| v.exp()).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    fn term(c: i64, e: &[i64]) -> Term {
        Term {
            coeff: BigRational::from_integer(c.into()),
            exps: e.iter().map(|&x| BigRational::from_integer(x.into())).collect(),
        }
    }

    #[test]
    fn matrix_multiply_matches_closed_form() {
        let t = [term(1, &[1, 1, 0]), term(1, &[0, 1, 1]), term(1, &[1, 0, 1])];
        for x in [30.0, 300.0, 3000.0] {
            let (chi, tiles) = maximize_primal(&t, &[1.0; 3], x).unwrap();
            let expect = (x / 3.0f64).powf(1.5);
            assert!((chi / expect - 1.0).abs() < 1e-6, "{chi} vs {expect}");
            assert!(tiles.iter().all(|b| (b - (x / 3.0).sqrt()).abs() < 1e-3));
        }
    }

    #[test]
    fn stencil_matches_closed_form() {
        let t = [term(2, &[1, 0]), term(2, &[0, 1])];
        let (chi, _) = maximize_primal(&t, &[1.0; 2], 100.0).unwrap();
        assert!((chi - 625.0).abs() < 1e-4);
    }

    #[test]
    fn infeasible_budget() {
        assert!(maximize_primal(&[term(5, &[1])], &[1.0], 2.0).is_none());
    }
}
