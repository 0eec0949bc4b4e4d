//! Root ordering at fixed energy, the auxiliary generalized Brillouin zone
//! (aGBZ) and the GBZ.
//!
//! A point `beta` lies on the aGBZ when some other root of `P(., E)` at the
//! same energy has the same modulus, i.e. `P(beta, E) = P(beta e^{i theta}, E) = 0`
//! for some `theta in (0, 2pi)`. Two constructions are provided: a sweep over
//! `theta` that eliminates the energy numerically for each `theta`, and a fully
//! symbolic elimination producing an implicit real curve `F(Re beta, Im beta) = 0`.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::ops::Range;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::model::{CharPoly, Model};
use crate::polyalg::{
    interpolate, phase_0_2pi, poly_roots, resultant_degree_bounds, resultant_formal, MultiPoly,
    PolyError, UniPoly,
};

/// Relative modulus tolerance for tie groups.
pub const DEFAULT_TIE_TOL: f64 = 1e-6;
/// Relative residual accepted from the root finder.
pub const ROOT_TOL: f64 = 1e-8;
/// Relative distance within which a given `beta` is identified with a root.
pub const LOCATE_TOL: f64 = 1e-6;
pub const DEFAULT_THETA_POINTS: usize = 720;
/// Cap on the per-variable degree bound of the implicit curve.
pub const DEFAULT_DEGREE_CAP: u32 = 64;
const DEDUP_TOL: f64 = 1e-8;

const C0: Complex64 = Complex64::new(0.0, 0.0);
const C1: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GbzError {
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("energy elimination vanishes identically at theta = {theta}")]
    EliminationDegenerate { theta: f64 },
    #[error("implicit curve degree bound {bound} exceeds the cap {cap}")]
    DegreeBudgetExceeded { bound: u32, cap: u32 },
    #[error("implicit curve vanishes identically after trivial-factor removal")]
    IdenticallyZero,
    #[error("theta = {0} is outside the open interval (0, 2pi)")]
    InvalidTheta(f64),
    #[error("points labeled ({label}, {}) do not close up near {at}", label + 1)]
    OpenCurve { label: usize, at: Complex64 },
    #[error("no points carry the label ({label}, {})", label + 1)]
    EmptyLabel { label: usize },
}

/// Roots of `P(., E)` sorted by modulus, then phase in [0, 2pi).
#[derive(Clone, Debug, PartialEq)]
pub struct RootOrdering {
    pub energy: Complex64,
    pub roots: Vec<Complex64>,
    /// Maximal runs of equal modulus, as 0-based index ranges.
    pub tie_groups: Vec<Range<usize>>,
}

impl RootOrdering {
    pub fn moduli(&self) -> Vec<f64> {
        self.roots.iter().map(|r| r.norm()).collect()
    }

    pub fn tie_group_of(&self, index: usize) -> Range<usize> {
        self.tie_groups
            .iter()
            .find(|g| g.contains(&index))
            .cloned()
            .unwrap_or(index..index + 1)
    }

    /// Index of the root nearest `beta`, if within `tol * max(1, |beta|)`.
    pub fn locate(&self, beta: Complex64, tol: f64) -> Option<usize> {
        let (idx, d) = self
            .roots
            .iter()
            .enumerate()
            .map(|(i, r)| (i, (r - beta).norm()))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())?;
        (d <= tol * beta.norm().max(1.0)).then_some(idx)
    }

    /// The tie group whose modulus is one within `tol`, as 1-based indices.
    pub fn unit_modulus_indices(&self, tol: f64) -> Vec<usize> {
        (0..self.roots.len())
            .filter(|&i| (self.roots[i].norm() - 1.0).abs() <= tol)
            .map(|i| i + 1)
            .collect()
    }

    /// Number of roots strictly inside the unit circle, with roots within
    /// `guard` of modulus one reported as `Err(index)`.
    pub fn count_inside_unit(&self, guard: f64) -> Result<usize, usize> {
        let mut n = 0;
        for (i, r) in self.roots.iter().enumerate() {
            let m = r.norm();
            if (m - 1.0).abs() <= guard {
                return Err(i);
            }
            if m < 1.0 {
                n += 1;
            }
        }
        Ok(n)
    }
}

pub fn ordered_roots(cp: &CharPoly, energy: Complex64, tie_tol: f64) -> Result<RootOrdering, PolyError> {
    let roots = poly_roots(&cp.in_beta(energy), ROOT_TOL)?;
    let mut tie_groups = Vec::new();
    let mut start = 0;
    for i in 1..=roots.len() {
        let split = i == roots.len() || {
            let (a, b) = (roots[i - 1].norm(), roots[i].norm());
            b - a > tie_tol * b.max(f64::MIN_POSITIVE)
        };
        if split {
            tie_groups.push(start..i);
            start = i;
        }
    }
    Ok(RootOrdering {
        energy,
        roots,
        tie_groups,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AgbzPoint {
    pub beta: Complex64,
    pub energy: Complex64,
    /// 1-based `(first, last)` of the tie group holding `beta`; `(i, i + 1)`
    /// on ordinary arcs.
    pub label: (usize, usize),
    /// Phase of the partner root `beta e^{i theta}`.
    pub theta: f64,
}

/// `n` uniform points `2 pi j / (n + 1)`, `j = 1..=n`.
pub fn default_theta_grid(n: usize) -> Vec<f64> {
    (1..=n).map(|j| 2.0 * PI * j as f64 / (n + 1) as f64).collect()
}

/// `P(beta, E)` written in `s = E^k` for the largest `k` that allows it.
#[derive(Clone, Debug)]
pub struct ReducedCharPoly {
    step: usize,
    /// `table[n][j]` multiplies `beta^n s^j`.
    table: Vec<Vec<Complex64>>,
}

impl ReducedCharPoly {
    pub fn new(cp: &CharPoly) -> Self {
        let step = cp.energy_power_step();
        let sdeg = cp.energy_degree() / step;
        let table = (0..=cp.beta_degree())
            .map(|n| (0..=sdeg).map(|j| cp.coeff(n, j * step)).collect())
            .collect();
        ReducedCharPoly { step, table }
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn beta_degree(&self) -> usize {
        self.table.len() - 1
    }

    pub fn s_degree(&self) -> usize {
        self.table[0].len() - 1
    }

    /// Coefficients in `s` (formal length) at `beta`.
    pub fn in_s(&self, beta: Complex64) -> Vec<Complex64> {
        let mut out = vec![C0; self.s_degree() + 1];
        let mut pw = C1;
        for row in &self.table {
            for (j, &c) in row.iter().enumerate() {
                out[j] += c * pw;
            }
            pw *= beta;
        }
        out
    }

    /// Column `j` as a polynomial in beta, with `beta -> beta w`.
    fn column(&self, j: usize, w: Complex64) -> UniPoly {
        let mut pw = C1;
        let coeffs = self
            .table
            .iter()
            .map(|row| {
                let c = row[j] * pw;
                pw *= w;
                c
            })
            .collect();
        UniPoly::with_tol(coeffs, 0.0)
    }

    /// Over variables `[beta, w, s]`, optionally with `beta -> beta w`.
    fn as_multipoly(&self, shifted: bool) -> MultiPoly {
        let mut p = MultiPoly::zero(&["beta", "w", "s"]);
        for (n, row) in self.table.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                if c != C0 {
                    let wexp = if shifted { n as u32 } else { 0 };
                    p.add_term(vec![n as u32, wexp, j as u32], c);
                }
            }
        }
        p
    }

    /// `Res_s[R(beta, s), R(beta w, s)]` as a polynomial in beta for fixed `w`.
    pub fn theta_slice(&self, w: Complex64) -> UniPoly {
        if self.s_degree() == 1 {
            let a = self.column(0, C1);
            let b = self.column(1, C1);
            let aw = self.column(0, w);
            let bw = self.column(1, w);
            let g = &(&a * &bw) - &(&b * &aw);
            return UniPoly::with_tol(g.into_coeffs(), 1e-13);
        }
        let bound = (2 * self.s_degree() * self.beta_degree()) as u32;
        let terms = interpolate(&[bound], &[1.0], |pt| {
            resultant_formal(&self.in_s(pt[0]), &self.in_s(pt[0] * w))
        });
        let mut coeffs = vec![C0; bound as usize + 1];
        for (e, c) in terms {
            coeffs[e[0] as usize] = c;
        }
        UniPoly::with_tol(coeffs, 1e-13)
    }

    /// Energies `E` with `E^k = s` for the `s` shared by `beta` and `beta w`.
    fn shared_energies(&self, beta: Complex64, w: Complex64) -> Vec<Complex64> {
        let f = self.in_s(beta);
        let s = if self.s_degree() == 1 {
            if f[1] == C0 {
                return Vec::new();
            }
            -f[0] / f[1]
        } else {
            let Ok(cands) = poly_roots(&UniPoly::with_tol(f, 0.0), ROOT_TOL) else {
                return Vec::new();
            };
            let g = UniPoly::with_tol(self.in_s(beta * w), 0.0);
            match cands.into_iter().min_by(|a, b| {
                let ra = g.eval(*a).norm() / g.eval_scale(*a).max(f64::MIN_POSITIVE);
                let rb = g.eval(*b).norm() / g.eval_scale(*b).max(f64::MIN_POSITIVE);
                ra.partial_cmp(&rb).unwrap()
            }) {
                Some(s) => s,
                None => return Vec::new(),
            }
        };
        let k = self.step;
        let base = s.powf(1.0 / k as f64);
        (0..k)
            .map(|j| base * Complex64::from_polar(1.0, 2.0 * PI * j as f64 / k as f64))
            .collect()
    }
}

/// aGBZ points from a sweep over partner phases `theta`.
pub fn agbz_sample_theta(model: &Model, theta_grid: &[f64]) -> Result<Vec<AgbzPoint>, GbzError> {
    agbz_sample_theta_with(model, theta_grid, DEFAULT_TIE_TOL)
}

pub fn agbz_sample_theta_with(
    model: &Model,
    theta_grid: &[f64],
    tie_tol: f64,
) -> Result<Vec<AgbzPoint>, GbzError> {
    if let Some(&t) = theta_grid.iter().find(|&&t| !(t > 0.0 && t < 2.0 * PI)) {
        return Err(GbzError::InvalidTheta(t));
    }
    let cp = model.char_poly();
    let reduced = ReducedCharPoly::new(&cp);
    let per_theta: Vec<Vec<AgbzPoint>> = theta_grid
        .par_iter()
        .map(|&theta| theta_points(model, &cp, &reduced, theta, tie_tol))
        .collect::<Result<_, _>>()?;
    let mut points: Vec<AgbzPoint> = per_theta.into_iter().flatten().collect();
    canonical_sort(&mut points);
    dedup_points(&mut points);
    Ok(points)
}

/// Largest chordal distance from a point at one `theta` to the nearest point
/// at the next, over both directions.
fn sweep_gap(a: &[AgbzPoint], b: &[AgbzPoint]) -> f64 {
    let directed = |x: &[AgbzPoint], y: &[AgbzPoint]| {
        x.iter()
            .map(|p| {
                y.iter()
                    .map(|q| chordal(p.beta, q.beta))
                    .fold(f64::INFINITY, f64::min)
            })
            .filter(|d| d.is_finite())
            .fold(0.0, f64::max)
    };
    directed(a, b).max(directed(b, a))
}

/// Sweep starting from `default_theta_grid(base)`, bisecting every interval
/// of `theta` across which points move by more than twice the median step
/// (chordal metric), until no interval qualifies or the grid has grown to
/// `max_factor * base` values. Uniform grids leave arcs that run off to the
/// origin or to infinity too sparse to polygonize.
pub fn agbz_sample_adaptive(
    model: &Model,
    base: usize,
    max_factor: usize,
) -> Result<Vec<AgbzPoint>, GbzError> {
    agbz_sample_adaptive_with(model, base, max_factor, DEFAULT_TIE_TOL)
}

pub fn agbz_sample_adaptive_with(
    model: &Model,
    base: usize,
    max_factor: usize,
    tie_tol: f64,
) -> Result<Vec<AgbzPoint>, GbzError> {
    let cp = model.char_poly();
    let reduced = ReducedCharPoly::new(&cp);
    let sample = |thetas: &[f64]| -> Result<Vec<(f64, Vec<AgbzPoint>)>, GbzError> {
        thetas
            .par_iter()
            .map(|&t| Ok((t, theta_points(model, &cp, &reduced, t, tie_tol)?)))
            .collect()
    };
    let mut sweep = sample(&default_theta_grid(base))?;
    let gaps = |sweep: &[(f64, Vec<AgbzPoint>)]| -> Vec<f64> {
        sweep.windows(2).map(|w| sweep_gap(&w[0].1, &w[1].1)).collect()
    };
    let mut initial = gaps(&sweep);
    initial.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let target = (2.0 * initial.get(initial.len() / 2).copied().unwrap_or(0.0)).max(1e-6);
    let budget = max_factor.max(1) * base;
    for _ in 0..24 {
        let g = gaps(&sweep);
        let mids: Vec<f64> = sweep
            .windows(2)
            .zip(&g)
            .filter(|&(_, &gap)| gap > target)
            .map(|(w, _)| 0.5 * (w[0].0 + w[1].0))
            .collect();
        if mids.is_empty() || sweep.len() + mids.len() > budget {
            break;
        }
        sweep.extend(sample(&mids)?);
        sweep.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    }
    let mut points: Vec<AgbzPoint> = sweep.into_iter().flat_map(|(_, p)| p).collect();
    canonical_sort(&mut points);
    dedup_points(&mut points);
    Ok(points)
}

fn theta_points(
    model: &Model,
    cp: &CharPoly,
    reduced: &ReducedCharPoly,
    theta: f64,
    tie_tol: f64,
) -> Result<Vec<AgbzPoint>, GbzError> {
    let w = Complex64::from_polar(1.0, theta);
    let g = reduced.theta_slice(w);
    if g.is_zero() {
        return Err(GbzError::EliminationDegenerate { theta });
    }
    if g.degree() == 0 {
        return Ok(Vec::new());
    }
    let candidates = match poly_roots(&g, ROOT_TOL) {
        Ok(r) => r,
        Err(PolyError::NonConvergence { best, .. }) => best,
        Err(e) => return Err(e.into()),
    };
    let mut out = Vec::new();
    for beta in candidates {
        if beta.norm() < 1e-12 || !beta.re.is_finite() || !beta.im.is_finite() {
            continue;
        }
        let energies = match model.as_one_band() {
            Some(m) => vec![m.eval(beta)],
            None => reduced.shared_energies(beta, w),
        };
        for energy in energies {
            if let Some(label) = verify_pair(cp, beta, beta * w, energy, tie_tol) {
                out.push(AgbzPoint {
                    beta,
                    energy,
                    label,
                    theta,
                });
            }
        }
    }
    Ok(out)
}

/// 1-based tie-group label when `a` and `b` are distinct roots of
/// `P(., energy)` in one tie group.
pub fn verify_pair(
    cp: &CharPoly,
    a: Complex64,
    b: Complex64,
    energy: Complex64,
    tie_tol: f64,
) -> Option<(usize, usize)> {
    if !energy.re.is_finite() || !energy.im.is_finite() {
        return None;
    }
    let ord = ordered_roots(cp, energy, tie_tol).ok()?;
    let ia = ord.locate(a, LOCATE_TOL)?;
    let ib = ord.locate(b, LOCATE_TOL)?;
    if ia == ib {
        return None;
    }
    let g = ord.tie_group_of(ia);
    g.contains(&ib).then_some((g.start + 1, g.end))
}

fn canonical_sort(points: &mut [AgbzPoint]) {
    points.sort_by(|a, b| {
        a.label
            .cmp(&b.label)
            .then(phase_0_2pi(a.beta).partial_cmp(&phase_0_2pi(b.beta)).unwrap())
            .then(a.beta.norm().partial_cmp(&b.beta.norm()).unwrap())
            .then(a.theta.partial_cmp(&b.theta).unwrap())
            .then(a.energy.re.partial_cmp(&b.energy.re).unwrap())
            .then(a.energy.im.partial_cmp(&b.energy.im).unwrap())
    });
}

fn dedup_points(points: &mut Vec<AgbzPoint>) {
    let close = |a: &AgbzPoint, b: &AgbzPoint| {
        (a.beta - b.beta).norm() <= DEDUP_TOL * a.beta.norm().max(1.0)
            && (a.energy - b.energy).norm() <= DEDUP_TOL * a.energy.norm().max(1.0)
            && (a.theta - b.theta).abs() <= DEDUP_TOL
    };
    let mut kept: Vec<AgbzPoint> = Vec::with_capacity(points.len());
    for p in points.drain(..) {
        // Near-duplicates are adjacent or nearly so after the canonical sort.
        if !kept.iter().rev().take(8).any(|q| close(q, &p)) {
            kept.push(p);
        }
    }
    *points = kept;
}

/// Points whose tie group contains the GBZ pair `(p, p + 1)`.
pub fn gbz_extract(points: &[AgbzPoint], cp: &CharPoly) -> Vec<AgbzPoint> {
    let p = cp.pole_order();
    points
        .iter()
        .filter(|pt| pt.label.0 <= p && pt.label.1 > p)
        .copied()
        .collect()
}

/// Implicit aGBZ `F(x, y) = 0` with `beta = x + i y`.
#[derive(Clone, Debug)]
pub struct ImplicitCurve {
    f: MultiPoly,
    re_g: MultiPoly,
    im_g: MultiPoly,
    normalization: f64,
}

impl ImplicitCurve {
    /// `F` over variables `["x", "y"]`, scaled to `max |c_ij| = 1`.
    pub fn poly(&self) -> &MultiPoly {
        &self.f
    }

    /// `(i, j, c_ij)` with `F = sum c_ij x^i y^j`, in exponent order.
    pub fn coefficients(&self) -> Vec<(u32, u32, Complex64)> {
        self.f.terms().iter().map(|(e, &c)| (e[0], e[1], c)).collect()
    }

    pub fn eval(&self, beta: Complex64) -> f64 {
        self.f.eval(&xy(beta)).re
    }

    /// `sum |c_ij| |x|^i |y|^j`.
    pub fn eval_scale(&self, beta: Complex64) -> f64 {
        self.f.eval_scale(&xy(beta))
    }

    /// `F` evaluated without the expanded coefficients, as the determinant of
    /// the Sylvester matrix of the `t`-polynomials at this point.
    pub fn eval_direct(&self, beta: Complex64) -> f64 {
        let (re, im) = self.t_slices(beta);
        resultant_formal(&re, &im).re / self.normalization
    }

    /// `Re G~` and `Im G~` at `beta` as formal coefficient lists in `t`.
    pub fn t_slices(&self, beta: Complex64) -> (Vec<Complex64>, Vec<Complex64>) {
        let pt = [Complex64::new(beta.re, 0.0), Complex64::new(beta.im, 0.0), C0];
        let slice = |p: &MultiPoly| {
            let mut c = p.partial_eval(2, &pt).into_coeffs();
            c.resize(p.degree_in(2) as usize + 1, C0);
            c
        };
        (slice(&self.re_g), slice(&self.im_g))
    }

    pub fn t_degrees(&self) -> (u32, u32) {
        (self.re_g.degree_in(2), self.im_g.degree_in(2))
    }
}

fn xy(beta: Complex64) -> [Complex64; 2] {
    [Complex64::new(beta.re, 0.0), Complex64::new(beta.im, 0.0)]
}

pub fn agbz_implicit(model: &Model) -> Result<ImplicitCurve, GbzError> {
    agbz_implicit_with_cap(model, DEFAULT_DEGREE_CAP)
}

pub fn agbz_implicit_with_cap(model: &Model, cap: u32) -> Result<ImplicitCurve, GbzError> {
    let reduced = ReducedCharPoly::new(&model.char_poly());
    let f = reduced.as_multipoly(false);
    let fw = reduced.as_multipoly(true);
    let bounds = resultant_degree_bounds(&f, &fw, 2);
    if let Some(&b) = bounds.iter().max().filter(|&&b| b > cap) {
        return Err(GbzError::DegreeBudgetExceeded { bound: b, cap });
    }

    // G(beta, w) = Res_s[R(beta, s), R(beta w, s)]
    let g = crate::polyalg::resultant(&f, &fw, 2)?;
    let g = g.rename(&["beta", "w"], &[0, 1, 0]);
    if g.is_zero() {
        return Err(GbzError::IdenticallyZero);
    }
    let g = g.shift_down(0, g.min_degree_in(0));
    let g = g.shift_down(1, g.min_degree_in(1));

    // beta = x + i y, w = (1 + i t) / (1 - i t), cleared by (1 - i t)^{deg_w}.
    let vars = ["x", "y", "t"];
    let x = MultiPoly::var(&vars, 0);
    let y = MultiPoly::var(&vars, 1);
    let t = MultiPoly::var(&vars, 2);
    let one = x.constant_like(C1);
    let beta = x.add(&y.scaled(I));
    let plus = one.add(&t.scaled(I));
    let minus = one.sub(&t.scaled(I));
    let dw = g.degree_in(1);
    let dbeta = g.degree_in(0);
    let beta_pows: Vec<MultiPoly> = (0..=dbeta).map(|k| beta.pow(k)).collect();
    let plus_pows: Vec<MultiPoly> = (0..=dw).map(|k| plus.pow(k)).collect();
    let minus_pows: Vec<MultiPoly> = (0..=dw).map(|k| minus.pow(k)).collect();
    let mut gt = x.zero_like();
    for (e, &c) in g.terms() {
        let (n, m) = (e[0] as usize, e[1] as usize);
        let term = beta_pows[n]
            .mul(&plus_pows[m])
            .mul(&minus_pows[dw as usize - m])
            .scaled(c);
        gt = gt.add(&term);
    }
    if gt.is_zero() {
        return Err(GbzError::IdenticallyZero);
    }
    // Every pair (beta, beta) solves both equations at theta = 0, so t divides.
    let gt = gt.shift_down(2, gt.min_degree_in(2));
    let re_g = gt.map_coeffs(|c| Complex64::new(c.re, 0.0));
    let im_g = gt.map_coeffs(|c| Complex64::new(c.im, 0.0));
    if re_g.degree_in(2) == 0 || im_g.degree_in(2) == 0 {
        return Err(GbzError::IdenticallyZero);
    }

    let fb = resultant_degree_bounds(&re_g, &im_g, 2);
    let bound = fb[0].max(fb[1]);
    if bound > cap {
        return Err(GbzError::DegreeBudgetExceeded { bound, cap });
    }
    let (re_ref, im_ref) = (&re_g, &im_g);
    let terms = interpolate(&[fb[0], fb[1]], &[1.0, 1.0], |pt| {
        let p3 = [pt[0], pt[1], C0];
        let slice = |p: &MultiPoly| {
            let mut c = p.partial_eval(2, &p3).into_coeffs();
            c.resize(p.degree_in(2) as usize + 1, C0);
            c
        };
        resultant_formal(&slice(re_ref), &slice(im_ref))
    });
    // F has real coefficients; drop the interpolation noise in the imaginary parts.
    let raw = MultiPoly::from_terms(&["x", "y"], terms.into_iter().map(|(e, c)| (e, Complex64::new(c.re, 0.0))));
    let normalization = raw.max_coeff();
    if normalization == 0.0 || raw.is_zero() {
        return Err(GbzError::IdenticallyZero);
    }
    let f = raw.scaled(Complex64::new(1.0 / normalization, 0.0));
    Ok(ImplicitCurve {
        f,
        re_g,
        im_g,
        normalization,
    })
}

/// Distance on the Riemann sphere.
pub fn chordal(a: Complex64, b: Complex64) -> f64 {
    2.0 * (a - b).norm() / ((1.0 + a.norm_sqr()).sqrt() * (1.0 + b.norm_sqr()).sqrt())
}

fn chordal_to_infinity(a: Complex64) -> f64 {
    2.0 / (1.0 + a.norm_sqr()).sqrt()
}

/// A polyline through labeled points.
#[derive(Clone, Debug, PartialEq)]
pub struct Chain {
    pub points: Vec<Complex64>,
    pub closed: bool,
}

impl Chain {
    /// Consecutive pairs, including the closing pair of a closed chain, minus
    /// pairs that are joined through infinity rather than by a plane segment.
    pub fn segments(&self) -> impl Iterator<Item = (Complex64, Complex64)> + '_ {
        let n = self.points.len();
        let closing = if self.closed && n > 2 { Some((self.points[n - 1], self.points[0])) } else { None };
        self.points
            .windows(2)
            .map(|w| (w[0], w[1]))
            .chain(closing)
            .filter(|&(a, b)| !through_infinity(a, b))
    }
}

/// True when the straight segment `ab` strays far from its endpoints on the
/// sphere, i.e. `a` and `b` are neighbors only via the point at infinity.
fn through_infinity(a: Complex64, b: Complex64) -> bool {
    let d = b - a;
    // Point of the segment nearest the origin.
    let s = if d.norm_sqr() > 0.0 {
        (-(a.re * d.re + a.im * d.im) / d.norm_sqr()).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let limit = 2.0 * chordal(a, b) + 1e-12;
    [a + d * 0.5, a + d * s]
        .iter()
        .any(|&z| chordal(a, z).min(chordal(b, z)) > limit)
}

/// Nearest-neighbor chaining in the chordal metric, breaking wherever the
/// next step exceeds `gap_factor` times the median nearest-neighbor spacing.
/// Returns the chains and the break threshold.
pub fn polygonize(points: &[Complex64], gap_factor: f64) -> (Vec<Chain>, f64) {
    let mut pts: Vec<Complex64> = Vec::with_capacity(points.len());
    for &p in points {
        if !pts.iter().any(|q| chordal(*q, p) < 1e-10) {
            pts.push(p);
        }
    }
    let n = pts.len();
    if n < 2 {
        return (Vec::new(), 0.0);
    }
    let mut nn: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| chordal(pts[i], pts[j]))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    nn.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let threshold = gap_factor * nn[n / 2];

    let mut used = vec![false; n];
    let nearest_unused = |from: Complex64, used: &[bool]| -> Option<(usize, f64)> {
        (0..n)
            .filter(|&j| !used[j])
            .map(|j| (j, chordal(from, pts[j])))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
    };
    let mut chains = Vec::new();
    while let Some(start) = used.iter().position(|u| !u) {
        used[start] = true;
        let mut forward = vec![pts[start]];
        while let Some((j, d)) = nearest_unused(*forward.last().unwrap(), &used) {
            if d > threshold {
                break;
            }
            used[j] = true;
            forward.push(pts[j]);
        }
        let mut backward = Vec::new();
        let mut tail = pts[start];
        while let Some((j, d)) = nearest_unused(tail, &used) {
            if d > threshold {
                break;
            }
            used[j] = true;
            backward.push(pts[j]);
            tail = pts[j];
        }
        backward.reverse();
        backward.extend(forward);
        let closed = backward.len() > 2
            && chordal(backward[0], *backward.last().unwrap()) <= threshold;
        chains.push(Chain {
            points: backward,
            closed,
        });
    }
    (chains, threshold)
}

/// Number of roots of `P(., E)` strictly inside the sub-boundary labeled
/// `(label, label + 1)`.
///
/// The sub-boundary separates the `label` smallest roots from the rest. For
/// `label < p` it passes through the origin and for `label > p` through
/// infinity; open chain ends are accepted only there.
pub fn sub_boundary_zero_count(
    points: &[AgbzPoint],
    label: usize,
    cp: &CharPoly,
    energy: Complex64,
) -> Result<usize, GbzError> {
    let chains = sub_boundary_chains(points, label, cp)?;
    let roots = poly_roots(&cp.in_beta(energy), ROOT_TOL)?;
    let p = cp.pole_order();
    Ok(roots
        .iter()
        .filter(|&&r| inside_sub_boundary(&chains, label, p, r))
        .count())
}

/// Polygonized sub-boundary `(label, label + 1)`, validated for closure.
pub fn sub_boundary_chains(
    points: &[AgbzPoint],
    label: usize,
    cp: &CharPoly,
) -> Result<Vec<Chain>, GbzError> {
    let betas: Vec<Complex64> = points
        .iter()
        .filter(|pt| pt.label == (label, label + 1))
        .map(|pt| pt.beta)
        .collect();
    if betas.is_empty() {
        return Err(GbzError::EmptyLabel { label });
    }
    let (chains, threshold) = polygonize(&betas, 5.0);
    let p = cp.pole_order();
    let end_slack = 10.0 * threshold;
    let mut out = Vec::new();
    let mut loose = Vec::new();
    for mut chain in chains {
        if chain.points.len() < 3 {
            // Stray points skipped by the greedy chaining.
            continue;
        }
        if !chain.closed {
            for k in 0..2 {
                let e = if k == 0 { chain.points[0] } else { *chain.points.last().unwrap() };
                if label < p && chordal(e, C0) <= end_slack {
                    // Close the gap through the origin.
                    if k == 0 {
                        chain.points.insert(0, C0);
                    } else {
                        chain.points.push(C0);
                    }
                } else if !(label > p && chordal_to_infinity(e) <= end_slack) {
                    loose.push(e);
                }
            }
        }
        out.push(chain);
    }
    // Greedy chaining stops short at self-crossings of the curve; join the
    // resulting loose ends pairwise, closest pairs first.
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..loose.len() {
        for j in i + 1..loose.len() {
            pairs.push((chordal(loose[i], loose[j]), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut joined = vec![false; loose.len()];
    for (d, i, j) in pairs {
        if d > end_slack {
            break;
        }
        if !joined[i] && !joined[j] {
            joined[i] = true;
            joined[j] = true;
            out.push(Chain {
                points: vec![loose[i], loose[j]],
                closed: false,
            });
        }
    }
    if let Some(i) = joined.iter().position(|&j| !j) {
        return Err(GbzError::OpenCurve { label, at: loose[i] });
    }
    Ok(out)
}

pub fn inside_sub_boundary(chains: &[Chain], label: usize, pole_order: usize, r: Complex64) -> bool {
    if label > pole_order {
        // The origin lies inside; count crossings of the segment [0, r].
        let n: usize = chains
            .iter()
            .flat_map(|c| c.segments())
            .filter(|&(a, b)| segments_cross(C0, r, a, b))
            .count();
        n.is_multiple_of(2)
    } else {
        // Radial ray from r outwards.
        let dir = if r.norm() > 0.0 { r / r.norm() } else { C1 };
        let far = r + dir * 1e9;
        let n: usize = chains
            .iter()
            .flat_map(|c| c.segments())
            .filter(|&(a, b)| segments_cross(r, far, a, b))
            .count();
        n % 2 == 1
    }
}

fn cross(o: Complex64, a: Complex64, b: Complex64) -> f64 {
    (a.re - o.re) * (b.im - o.im) - (a.im - o.im) * (b.re - o.re)
}

/// Proper crossing of segments `pq` and `ab` (half-open at `b` so a ray
/// through a shared vertex is counted once).
fn segments_cross(p: Complex64, q: Complex64, a: Complex64, b: Complex64) -> bool {
    let d1 = cross(p, q, a);
    let d2 = cross(p, q, b);
    if (d1 > 0.0) == (d2 > 0.0) {
        return false;
    }
    let d3 = cross(a, b, p);
    let d4 = cross(a, b, q);
    (d3 > 0.0) != (d4 > 0.0)
}

/// Labels present in a point set, as the lower index of `(i, i + 1)`.
pub fn adjacent_labels(points: &[AgbzPoint]) -> Vec<usize> {
    let set: HashSet<usize> = points
        .iter()
        .filter(|p| p.label.1 == p.label.0 + 1)
        .map(|p| p.label.0)
        .collect();
    let mut v: Vec<usize> = set.into_iter().collect();
    v.sort_unstable();
    v
}
