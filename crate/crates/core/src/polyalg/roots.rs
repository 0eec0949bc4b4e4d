//! Simultaneous root finding: companion-matrix eigenvalues polished by Aberth
//! iterations, with near-coincident roots merged into multiplicity clusters.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{PolyError, UniPoly, COEFF_ZERO_TOL, ROOT_CLUSTER_TOL};
use crate::linalg;

const ABERTH_POLISH_ITERS: usize = 8;
const ABERTH_FALLBACK_ITERS: usize = 500;

/// All roots of `p`, with multiplicity, sorted by (modulus, phase in [0, 2pi)).
///
/// Every returned root satisfies `|p(r)| <= tol * sum_i |c_i| |r|^i`; a root
/// that cannot be brought under that bound yields `NonConvergence` carrying
/// the best iterate. For roots of modulus at most one this bound is within a
/// factor `deg + 1` of `tol * max|c_i|`.
pub fn poly_roots(p: &UniPoly, tol: f64) -> Result<Vec<Complex64>, PolyError> {
    let scale = p.scale();
    if scale == 0.0 || p.coeffs().iter().all(|c| c.norm() <= COEFF_ZERO_TOL * scale) {
        return Err(PolyError::ZeroPolynomial);
    }
    if p.degree() == 0 {
        return Err(PolyError::DegreeZero);
    }

    // Leading low-order zeros are exact roots at the origin.
    let coeffs = p.coeffs();
    let zeros = coeffs
        .iter()
        .take_while(|c| c.norm() <= COEFF_ZERO_TOL * scale)
        .count();
    let reduced = UniPoly::with_tol(coeffs[zeros..].to_vec(), 0.0);
    let mut roots = vec![Complex64::new(0.0, 0.0); zeros];

    if reduced.degree() > 0 {
        let initial = companion_roots(&reduced).unwrap_or_else(|| aberth_initial_guesses(&reduced));
        let mut polished = aberth(&reduced, initial.clone(), ABERTH_POLISH_ITERS);
        if max_rel_residual(&reduced, &polished) > max_rel_residual(&reduced, &initial) {
            polished = initial;
        }
        if max_rel_residual(&reduced, &polished) > tol {
            let fallback = aberth(&reduced, aberth_initial_guesses(&reduced), ABERTH_FALLBACK_ITERS);
            if max_rel_residual(&reduced, &fallback) < max_rel_residual(&reduced, &polished) {
                polished = fallback;
            }
        }
        roots.extend(polished);
    }

    let roots = merge_clusters(roots, ROOT_CLUSTER_TOL);
    for &r in &roots {
        let res = p.eval(r).norm();
        let bound = tol * p.eval_scale(r).max(f64::MIN_POSITIVE);
        if !(res <= bound) {
            return Err(PolyError::NonConvergence {
                best: sort_roots(roots.clone()),
                residual: res / p.eval_scale(r).max(f64::MIN_POSITIVE),
            });
        }
    }
    Ok(sort_roots(roots))
}

/// Sorts by modulus, then by phase mapped to [0, 2pi).
pub fn sort_roots(mut roots: Vec<Complex64>) -> Vec<Complex64> {
    roots.sort_by(|a, b| {
        a.norm()
            .partial_cmp(&b.norm())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(
                phase_0_2pi(*a)
                    .partial_cmp(&phase_0_2pi(*b))
                    .unwrap_or(std::cmp::Ordering::Equal),
            )
    });
    roots
}

pub fn phase_0_2pi(z: Complex64) -> f64 {
    let a = z.arg();
    if a < 0.0 {
        a + 2.0 * PI
    } else {
        a
    }
}

fn companion_roots(p: &UniPoly) -> Option<Vec<Complex64>> {
    let n = p.degree();
    let c = p.coeffs();
    let lead = c[n];
    let mut m = DMatrix::<Complex64>::zeros(n, n);
    for i in 1..n {
        m[(i, i - 1)] = Complex64::new(1.0, 0.0);
    }
    for i in 0..n {
        m[(i, n - 1)] = -c[i] / lead;
    }
    let eig = linalg::eigenvalues(&m)?;
    if eig.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Some(eig)
    } else {
        None
    }
}

fn aberth_initial_guesses(p: &UniPoly) -> Vec<Complex64> {
    let n = p.degree();
    let c = p.coeffs();
    // Geometric mean of root moduli as the starting radius.
    let radius = (c[0].norm() / c[n].norm()).powf(1.0 / n as f64).max(1e-3);
    (0..n)
        .map(|k| Complex64::from_polar(radius, 2.0 * PI * (k as f64 + 0.25) / n as f64))
        .collect()
}

fn rel_residual(p: &UniPoly, z: Complex64) -> f64 {
    p.eval(z).norm() / p.eval_scale(z).max(f64::MIN_POSITIVE)
}

fn max_rel_residual(p: &UniPoly, zs: &[Complex64]) -> f64 {
    zs.iter().map(|&z| rel_residual(p, z)).fold(0.0, f64::max)
}

/// Aberth-Ehrlich simultaneous iteration.
fn aberth(p: &UniPoly, mut z: Vec<Complex64>, iters: usize) -> Vec<Complex64> {
    let n = z.len();
    let mut done = vec![false; n];
    for _ in 0..iters {
        let mut moved = false;
        for i in 0..n {
            if done[i] {
                continue;
            }
            let (v, dv) = p.eval_with_derivative(z[i]);
            if v.norm() <= f64::EPSILON * p.eval_scale(z[i]) {
                done[i] = true;
                continue;
            }
            if dv.norm() == 0.0 {
                continue;
            }
            let newton = v / dv;
            let mut repulsion = Complex64::new(0.0, 0.0);
            for j in 0..n {
                if j != i {
                    let d = z[i] - z[j];
                    if d.norm() > 0.0 {
                        repulsion += d.inv();
                    }
                }
            }
            let denom = Complex64::new(1.0, 0.0) - newton * repulsion;
            let step = if denom.norm() > 0.0 { newton / denom } else { newton };
            if !(step.re.is_finite() && step.im.is_finite()) {
                continue;
            }
            z[i] -= step;
            if step.norm() <= 4.0 * f64::EPSILON * z[i].norm().max(1.0) {
                done[i] = true;
            }
            moved = true;
        }
        if !moved {
            break;
        }
    }
    z
}

/// Replaces every group of roots lying within `tol * max(1, |r|)` of each
/// other (transitively) by copies of the group mean.
pub fn merge_clusters(roots: Vec<Complex64>, tol: f64) -> Vec<Complex64> {
    let n = roots.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while parent[r] != r {
            r = parent[r];
        }
        let mut j = i;
        while parent[j] != r {
            let next = parent[j];
            parent[j] = r;
            j = next;
        }
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            let d = (roots[i] - roots[j]).norm();
            if d <= tol * roots[i].norm().max(roots[j].norm()).max(1.0) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a] = b;
                }
            }
        }
    }
    let mut sums = vec![(Complex64::new(0.0, 0.0), 0usize); n];
    for i in 0..n {
        let r = find(&mut parent, i);
        sums[r].0 += roots[i];
        sums[r].1 += 1;
    }
    (0..n)
        .map(|i| {
            let r = find(&mut parent, i);
            sums[r].0 / sums[r].1 as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn quadratic_pair_on_imaginary_axis() {
        let p = UniPoly::from_real(&[0.25, 0.0, 1.0]);
        let r = poly_roots(&p, 1e-10).unwrap();
        assert_eq!(r.len(), 2);
        assert!((r[0] - c(0.0, 0.5)).norm() < 1e-14);
        assert!((r[1] - c(0.0, -0.5)).norm() < 1e-14);
    }

    #[test]
    fn triple_unit_roots_and_inner_root() {
        // (1 + x^3)(0.5 + 1.5 x)
        let p = &UniPoly::from_real(&[1.0, 0.0, 0.0, 1.0]) * &UniPoly::from_real(&[0.5, 1.5]);
        let r = poly_roots(&p, 1e-10).unwrap();
        assert!((r[0] - c(-1.0 / 3.0, 0.0)).norm() < 1e-13);
        let expect = [PI / 3.0, PI, 5.0 * PI / 3.0];
        for (z, &phi) in r[1..].iter().zip(expect.iter()) {
            assert!((z - Complex64::from_polar(1.0, phi)).norm() < 1e-13, "{z}");
        }
    }

    #[test]
    fn exact_zero_roots_are_split_off() {
        let p = UniPoly::from_real(&[0.0, 0.0, -1.0, 1.0]);
        let r = poly_roots(&p, 1e-10).unwrap();
        assert_eq!(r[0], c(0.0, 0.0));
        assert_eq!(r[1], c(0.0, 0.0));
        assert!((r[2] - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn double_root_is_reported_as_cluster() {
        let p = UniPoly::from_roots(&[c(0.3, 0.2), c(0.3, 0.2), c(-2.0, 0.0)], c(1.0, 0.0));
        let r = poly_roots(&p, 1e-10).unwrap();
        assert_eq!(r[0], r[1]);
        assert!((r[0] - c(0.3, 0.2)).norm() < 1e-7);
    }

    #[test]
    fn zero_polynomial_is_rejected() {
        assert!(matches!(
            poly_roots(&UniPoly::zero(), 1e-10),
            Err(PolyError::ZeroPolynomial)
        ));
        assert!(matches!(
            poly_roots(&UniPoly::constant(c(2.0, 0.0)), 1e-10),
            Err(PolyError::DegreeZero)
        ));
    }

    #[test]
    fn wide_dynamic_range_roots() {
        let roots = [c(1e-3, 0.0), c(0.0, 1.0), c(-1e3, 5.0)];
        let p = UniPoly::from_roots(&roots, c(1.0, 0.0));
        let r = poly_roots(&p, 1e-10).unwrap();
        for (a, b) in r.iter().zip(roots.iter()) {
            assert!((a - b).norm() < 1e-9 * b.norm().max(1.0), "{a} vs {b}");
        }
    }
}
