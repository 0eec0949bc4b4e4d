use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use super::{UniPoly, COEFF_ZERO_TOL};

/// Sparse multivariate polynomial with complex coefficients.
///
/// Terms are keyed by exponent tuples, one entry per variable in `vars`.
/// Coefficients at or below `COEFF_ZERO_TOL` relative to the largest stored
/// coefficient are dropped whenever a result is built.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiPoly {
    vars: Arc<[String]>,
    terms: BTreeMap<Vec<u32>, Complex64>,
}

impl MultiPoly {
    pub fn zero(vars: &[&str]) -> Self {
        MultiPoly {
            vars: vars.iter().map(|s| s.to_string()).collect(),
            terms: BTreeMap::new(),
        }
    }

    /// Zero polynomial over the same variables as `self`.
    pub fn zero_like(&self) -> Self {
        MultiPoly {
            vars: self.vars.clone(),
            terms: BTreeMap::new(),
        }
    }

    pub fn constant_like(&self, c: Complex64) -> Self {
        let mut p = self.zero_like();
        p.add_term(vec![0; self.nvars()], c);
        p
    }

    /// The monomial `vars[index]`.
    pub fn var(vars: &[&str], index: usize) -> Self {
        let mut p = Self::zero(vars);
        let mut e = vec![0; vars.len()];
        e[index] = 1;
        p.add_term(e, Complex64::new(1.0, 0.0));
        p
    }

    pub fn from_terms(
        vars: &[&str],
        terms: impl IntoIterator<Item = (Vec<u32>, Complex64)>,
    ) -> Self {
        let mut p = Self::zero(vars);
        for (e, c) in terms {
            assert_eq!(e.len(), vars.len(), "exponent arity mismatch");
            p.add_term(e, c);
        }
        p.pruned()
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn nvars(&self) -> usize {
        self.vars.len()
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v == name)
    }

    pub fn terms(&self) -> &BTreeMap<Vec<u32>, Complex64> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, exps: Vec<u32>, c: Complex64) {
        *self.terms.entry(exps).or_insert(Complex64::new(0.0, 0.0)) += c;
    }

    pub fn max_coeff(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Drops terms at or below `COEFF_ZERO_TOL * max|c|`.
    pub fn pruned(self) -> Self {
        self.pruned_with(COEFF_ZERO_TOL)
    }

    pub fn pruned_with(mut self, tol: f64) -> Self {
        let cut = tol * self.max_coeff();
        self.terms.retain(|_, c| c.norm() > cut && c.norm() > 0.0);
        self
    }

    pub fn degree_in(&self, var: usize) -> u32 {
        self.terms.keys().map(|e| e[var]).max().unwrap_or(0)
    }

    pub fn min_degree_in(&self, var: usize) -> u32 {
        self.terms.keys().map(|e| e[var]).min().unwrap_or(0)
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn eval(&self, point: &[Complex64]) -> Complex64 {
        assert_eq!(point.len(), self.nvars());
        let maxdeg: Vec<u32> = (0..self.nvars()).map(|v| self.degree_in(v)).collect();
        let powers: Vec<Vec<Complex64>> = point
            .iter()
            .zip(&maxdeg)
            .map(|(&x, &d)| {
                let mut pw = Vec::with_capacity(d as usize + 1);
                let mut acc = Complex64::new(1.0, 0.0);
                for _ in 0..=d {
                    pw.push(acc);
                    acc *= x;
                }
                pw
            })
            .collect();
        self.terms
            .iter()
            .map(|(e, &c)| {
                e.iter()
                    .enumerate()
                    .fold(c, |acc, (v, &k)| acc * powers[v][k as usize])
            })
            .sum()
    }

    /// `sum |c| prod |x_v|^e_v`, the magnitude that bounds rounding in `eval`.
    pub fn eval_scale(&self, point: &[Complex64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                e.iter()
                    .enumerate()
                    .fold(c.norm(), |acc, (v, &k)| acc * point[v].norm().powi(k as i32))
            })
            .sum()
    }

    /// Coefficients of `self` viewed as a polynomial in `var`, ascending. Each
    /// coefficient keeps the full variable list with a zero exponent in `var`.
    pub fn as_univariate(&self, var: usize) -> Vec<MultiPoly> {
        let d = self.degree_in(var) as usize;
        let mut out = vec![self.zero_like(); d + 1];
        for (e, &c) in &self.terms {
            let k = e[var] as usize;
            let mut e2 = e.clone();
            e2[var] = 0;
            out[k].add_term(e2, c);
        }
        out
    }

    /// Evaluates every variable except `var` and returns the univariate
    /// polynomial in `var`. Entries of `point` at index `var` are ignored.
    pub fn partial_eval(&self, var: usize, point: &[Complex64]) -> UniPoly {
        let d = self.degree_in(var) as usize;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); d + 1];
        for (e, &c) in &self.terms {
            let mut term = c;
            for (v, &k) in e.iter().enumerate() {
                if v != var && k > 0 {
                    term *= point[v].powi(k as i32);
                }
            }
            coeffs[e[var] as usize] += term;
        }
        UniPoly::with_tol(coeffs, 0.0)
    }

    /// Divides by `vars[var]^k`; every term must carry at least that power.
    pub fn shift_down(&self, var: usize, k: u32) -> Self {
        let mut out = self.zero_like();
        for (e, &c) in &self.terms {
            assert!(e[var] >= k, "shift_down below zero exponent");
            let mut e2 = e.clone();
            e2[var] -= k;
            out.add_term(e2, c);
        }
        out
    }

    pub fn map_coeffs(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        let mut out = self.zero_like();
        for (e, &c) in &self.terms {
            out.add_term(e.clone(), f(c));
        }
        out.pruned()
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        self.map_coeffs(|c| c * s)
    }

    /// Re-expresses the polynomial over a new variable list. `mapping[v]` is
    /// the index in `new_vars` that old variable `v` becomes.
    pub fn rename(&self, new_vars: &[&str], mapping: &[usize]) -> Self {
        let mut out = Self::zero(new_vars);
        for (e, &c) in &self.terms {
            let mut e2 = vec![0; new_vars.len()];
            for (v, &k) in e.iter().enumerate() {
                e2[mapping[v]] += k;
            }
            out.add_term(e2, c);
        }
        out.pruned()
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = self.constant_like(Complex64::new(1.0, 0.0));
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    pub fn add(&self, rhs: &MultiPoly) -> MultiPoly {
        assert_eq!(self.vars, rhs.vars, "variable lists differ");
        let mut out = self.clone();
        for (e, &c) in &rhs.terms {
            out.add_term(e.clone(), c);
        }
        out.pruned()
    }

    pub fn sub(&self, rhs: &MultiPoly) -> MultiPoly {
        self.add(&rhs.scaled(Complex64::new(-1.0, 0.0)))
    }

    pub fn mul(&self, rhs: &MultiPoly) -> MultiPoly {
        assert_eq!(self.vars, rhs.vars, "variable lists differ");
        let mut out = self.zero_like();
        for (ea, &ca) in &self.terms {
            for (eb, &cb) in &rhs.terms {
                let e: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
        }
        out.pruned()
    }
}

impl fmt::Display for MultiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({c})")?;
            for (v, &k) in e.iter().enumerate() {
                match k {
                    0 => {}
                    1 => write!(f, "*{}", self.vars[v])?,
                    _ => write!(f, "*{}^{}", self.vars[v], k)?,
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn arithmetic_and_eval() {
        let x = MultiPoly::var(&["x", "y"], 0);
        let y = MultiPoly::var(&["x", "y"], 1);
        // (x + y)^2 - x^2 - y^2 = 2xy
        let s = x.add(&y).pow(2).sub(&x.pow(2)).sub(&y.pow(2));
        assert_eq!(s.terms().len(), 1);
        assert_eq!(s.terms()[&vec![1, 1]], c(2.0));
        let pt = [Complex64::new(0.5, 1.0), c(-3.0)];
        assert!((s.eval(&pt) - pt[0] * pt[1] * 2.0).norm() < 1e-14);
    }

    #[test]
    fn univariate_view_is_consistent() {
        let p = MultiPoly::from_terms(
            &["b", "e"],
            [(vec![2, 0], c(3.0)), (vec![1, 1], c(-1.0)), (vec![0, 0], c(0.5))],
        );
        let coeffs = p.as_univariate(1);
        assert_eq!(coeffs.len(), 2);
        let b = Complex64::new(0.2, -0.7);
        let e = Complex64::new(1.1, 0.3);
        let recomposed = coeffs[0].eval(&[b, e]) + coeffs[1].eval(&[b, e]) * e;
        assert!((recomposed - p.eval(&[b, e])).norm() < 1e-14);
        let u = p.partial_eval(0, &[Complex64::new(0.0, 0.0), e]);
        assert!((u.eval(b) - p.eval(&[b, e])).norm() < 1e-14);
    }

    #[test]
    fn prune_removes_cancellation_noise() {
        let p = MultiPoly::from_terms(&["x"], [(vec![1], c(1.0)), (vec![0], c(1e-16))]);
        assert_eq!(p.terms().len(), 1);
    }
}
