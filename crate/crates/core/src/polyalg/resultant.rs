//! Sylvester matrices and resultants, scalar and with polynomial coefficients.
//!
//! Resultants over polynomial coefficient rings are computed by
//! evaluation-interpolation: the Sylvester determinant is a polynomial in the
//! remaining variables whose degree in each variable is bounded row by row, so
//! it is sampled on a tensor grid of scaled roots of unity and recovered with
//! an inverse DFT along each axis.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use super::{MultiPoly, PolyError, UniPoly};
use crate::linalg;

/// Coefficient types that can populate a Sylvester matrix.
pub trait SylvesterEntry: Clone {
    fn zero_like(&self) -> Self;
    fn is_zero_entry(&self) -> bool;
}

impl SylvesterEntry for Complex64 {
    fn zero_like(&self) -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn is_zero_entry(&self) -> bool {
        self.norm() == 0.0
    }
}

impl SylvesterEntry for MultiPoly {
    fn zero_like(&self) -> Self {
        MultiPoly::zero_like(self)
    }
    fn is_zero_entry(&self) -> bool {
        self.is_zero()
    }
}

/// `(n + m) x (n + m)` Sylvester matrix of `f` (degree `n`) and `g` (degree
/// `m`): `m` shifted rows of f's coefficients from the leading one down,
/// followed by `n` shifted rows of g's.
#[derive(Clone, Debug, PartialEq)]
pub struct SylvesterMatrix<T> {
    pub deg_f: usize,
    pub deg_g: usize,
    pub rows: Vec<Vec<T>>,
}

impl<T: SylvesterEntry> SylvesterMatrix<T> {
    pub fn size(&self) -> usize {
        self.deg_f + self.deg_g
    }

    pub fn entry(&self, i: usize, j: usize) -> &T {
        &self.rows[i][j]
    }
}

fn trimmed_degree<T: SylvesterEntry>(c: &[T]) -> usize {
    c.iter().rposition(|x| !x.is_zero_entry()).unwrap_or(0)
}

/// Sylvester matrix of two coefficient lists given in ascending order.
/// Trailing zero coefficients are dropped before the degrees are read.
pub fn sylvester<T: SylvesterEntry>(f: &[T], g: &[T]) -> Result<SylvesterMatrix<T>, PolyError> {
    if f.is_empty() || g.is_empty() {
        return Err(PolyError::DegreeZero);
    }
    let n = trimmed_degree(f);
    let m = trimmed_degree(g);
    if n == 0 || m == 0 {
        return Err(PolyError::DegreeZero);
    }
    Ok(sylvester_formal(&f[..=n], &g[..=m]))
}

/// Sylvester matrix using the formal degrees `f.len() - 1`, `g.len() - 1`,
/// even if the leading coefficients happen to vanish.
pub(crate) fn sylvester_formal<T: SylvesterEntry>(f: &[T], g: &[T]) -> SylvesterMatrix<T> {
    let n = f.len() - 1;
    let m = g.len() - 1;
    let size = n + m;
    let zero = f[0].zero_like();
    let mut rows = Vec::with_capacity(size);
    for shift in 0..m {
        let mut row = vec![zero.clone(); size];
        for (k, c) in f.iter().rev().enumerate() {
            row[shift + k] = c.clone();
        }
        rows.push(row);
    }
    for shift in 0..n {
        let mut row = vec![zero.clone(); size];
        for (k, c) in g.iter().rev().enumerate() {
            row[shift + k] = c.clone();
        }
        rows.push(row);
    }
    SylvesterMatrix {
        deg_f: n,
        deg_g: m,
        rows,
    }
}

/// `det Syl(f, g)` using the formal degrees `f.len() - 1` and `g.len() - 1`,
/// so vanishing leading coefficients at a specialization are kept.
pub fn resultant_formal(f: &[Complex64], g: &[Complex64]) -> Complex64 {
    if f.len() < 2 || g.len() < 2 {
        // Res(c, g) = c^deg g
        return if f.len() < 2 {
            f.first().map_or(Complex64::new(0.0, 0.0), |c| c.powi(g.len() as i32 - 1))
        } else {
            g.first().map_or(Complex64::new(0.0, 0.0), |c| c.powi(f.len() as i32 - 1))
        };
    }
    det_formal(f, g)
}

fn det_formal(f: &[Complex64], g: &[Complex64]) -> Complex64 {
    let s = sylvester_formal(f, g);
    let size = s.size();
    let m = DMatrix::from_fn(size, size, |i, j| s.rows[i][j]);
    linalg::determinant(&m)
}

/// Resultant of two scalar polynomials, `det Syl(f, g)`.
pub fn resultant_scalar(f: &UniPoly, g: &UniPoly) -> Result<Complex64, PolyError> {
    if f.degree() == 0 || g.degree() == 0 {
        return Err(PolyError::DegreeZero);
    }
    Ok(det_formal(f.coeffs(), g.coeffs()))
}

/// Resultant of `f` and `g` with respect to variable `eliminate`, as a
/// polynomial in the remaining variables (the eliminated variable keeps a
/// zero exponent). Sample radii default to one in every variable.
pub fn resultant(f: &MultiPoly, g: &MultiPoly, eliminate: usize) -> Result<MultiPoly, PolyError> {
    let radii = vec![1.0; f.nvars()];
    resultant_with_radii(f, g, eliminate, &radii)
}

/// Per-variable degree bounds of `Res_eliminate(f, g)`, read off the row
/// structure of the Sylvester matrix.
pub fn resultant_degree_bounds(f: &MultiPoly, g: &MultiPoly, eliminate: usize) -> Vec<u32> {
    let n = f.degree_in(eliminate);
    let m = g.degree_in(eliminate);
    (0..f.nvars())
        .map(|v| {
            if v == eliminate {
                0
            } else {
                m * f.degree_in(v) + n * g.degree_in(v)
            }
        })
        .collect()
}

pub fn resultant_with_radii(
    f: &MultiPoly,
    g: &MultiPoly,
    eliminate: usize,
    radii: &[f64],
) -> Result<MultiPoly, PolyError> {
    assert_eq!(f.vars(), g.vars(), "variable lists differ");
    let n = f.degree_in(eliminate);
    let m = g.degree_in(eliminate);
    if f.is_zero() || g.is_zero() || n == 0 || m == 0 {
        return Err(PolyError::DegreeZero);
    }
    let bounds = resultant_degree_bounds(f, g, eliminate);
    let fc = f.as_univariate(eliminate);
    let gc = g.as_univariate(eliminate);
    let eval = |pt: &[Complex64]| {
        let fv: Vec<Complex64> = fc.iter().map(|c| c.eval(pt)).collect();
        let gv: Vec<Complex64> = gc.iter().map(|c| c.eval(pt)).collect();
        det_formal(&fv, &gv)
    };
    let terms = interpolate(&bounds, radii, eval);
    let vars: Vec<&str> = f.vars().iter().map(|s| s.as_str()).collect();
    Ok(MultiPoly::from_terms(&vars, terms))
}

/// Recovers the coefficients of a polynomial with the given per-variable
/// degree bounds from samples on a tensor grid of roots of unity scaled by
/// `radii`. Variables with bound zero are evaluated at `radii[v]`.
pub fn interpolate<F>(bounds: &[u32], radii: &[f64], f: F) -> Vec<(Vec<u32>, Complex64)>
where
    F: Fn(&[Complex64]) -> Complex64 + Sync,
{
    let dims: Vec<usize> = bounds.iter().map(|&d| d as usize + 1).collect();
    let total: usize = dims.iter().product();
    let nv = dims.len();

    let index_to_multi = |mut idx: usize| -> Vec<usize> {
        let mut out = vec![0; nv];
        for v in (0..nv).rev() {
            out[v] = idx % dims[v];
            idx /= dims[v];
        }
        out
    };

    let mut values: Vec<Complex64> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let j = index_to_multi(idx);
            let pt: Vec<Complex64> = (0..nv)
                .map(|v| Complex64::from_polar(radii[v], 2.0 * PI * j[v] as f64 / dims[v] as f64))
                .collect();
            f(&pt)
        })
        .collect();

    // Inverse DFT along each axis in place.
    let mut stride = 1;
    for v in (0..nv).rev() {
        let len = dims[v];
        if len > 1 {
            let twiddle: Vec<Complex64> = (0..len)
                .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / len as f64))
                .collect();
            let scale: Vec<f64> = (0..len)
                .map(|a| 1.0 / (len as f64 * radii[v].powi(a as i32)))
                .collect();
            let block = stride * len;
            let mut buf = vec![Complex64::new(0.0, 0.0); len];
            for outer in (0..total).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    for a in 0..len {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for j in 0..len {
                            acc += values[base + j * stride] * twiddle[(a * j) % len];
                        }
                        buf[a] = acc * scale[a];
                    }
                    for a in 0..len {
                        values[base + a * stride] = buf[a];
                    }
                }
            }
        }
        stride *= len;
    }

    values
        .into_iter()
        .enumerate()
        .map(|(idx, c)| (index_to_multi(idx).into_iter().map(|k| k as u32).collect(), c))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn linear_pair_layout() {
        // f = 2x + 1, g = 3x + 4
        let s = sylvester(&[c(1.0), c(2.0)], &[c(4.0), c(3.0)]).unwrap();
        assert_eq!(s.rows, vec![vec![c(2.0), c(1.0)], vec![c(3.0), c(4.0)]]);
    }

    #[test]
    fn quadratic_linear_layout() {
        // f = x^2 - 1, g = x - 1
        let s = sylvester(&[c(-1.0), c(0.0), c(1.0)], &[c(-1.0), c(1.0)]).unwrap();
        assert_eq!(
            s.rows,
            vec![
                vec![c(1.0), c(0.0), c(-1.0)],
                vec![c(1.0), c(-1.0), c(0.0)],
                vec![c(0.0), c(1.0), c(-1.0)],
            ]
        );
        let r = resultant_scalar(&UniPoly::from_real(&[-1.0, 0.0, 1.0]), &UniPoly::from_real(&[-1.0, 1.0]))
            .unwrap();
        assert!(r.norm() < 1e-15);
    }

    #[test]
    fn polynomial_entries_are_copied_verbatim() {
        let vars = ["x", "a"];
        let a = MultiPoly::var(&vars, 1);
        let one = a.constant_like(c(1.0));
        let s = sylvester(&[a.clone(), one.clone()], &[a.scaled(c(2.0)), one.clone()]).unwrap();
        assert_eq!(s.rows[0], vec![one.clone(), a.clone()]);
        assert_eq!(s.rows[1], vec![one, a.scaled(c(2.0))]);
    }

    #[test]
    fn constant_input_is_rejected() {
        assert!(matches!(sylvester(&[c(1.0)], &[c(1.0), c(1.0)]), Err(PolyError::DegreeZero)));
        assert!(matches!(
            sylvester(&[c(1.0), c(0.0)], &[c(1.0), c(1.0)]),
            Err(PolyError::DegreeZero)
        ));
    }

    #[test]
    fn symbolic_difference_of_linear_roots() {
        // Res_x(x - a, x - b) = a - b
        let vars = ["x", "a", "b"];
        let x = MultiPoly::var(&vars, 0);
        let a = MultiPoly::var(&vars, 1);
        let b = MultiPoly::var(&vars, 2);
        let r = resultant(&x.sub(&a), &x.sub(&b), 0).unwrap();
        let expect = a.sub(&b);
        assert_eq!(r.terms().len(), 2);
        for (e, v) in expect.terms() {
            assert!((r.terms()[e] - v).norm() < 1e-13);
        }
    }

    #[test]
    fn interpolation_recovers_known_polynomial() {
        let vars = ["x", "y"];
        let p = MultiPoly::from_terms(
            &vars,
            [
                (vec![0, 0], c(1.0)),
                (vec![3, 1], Complex64::new(0.5, -2.0)),
                (vec![1, 2], c(-4.0)),
            ],
        );
        let terms = interpolate(&[3, 2], &[1.3, 0.7], |pt| p.eval(pt));
        let q = MultiPoly::from_terms(&vars, terms);
        assert_eq!(q.terms().len(), 3);
        for (e, v) in p.terms() {
            assert!((q.terms()[e] - v).norm() < 1e-12);
        }
    }
}
