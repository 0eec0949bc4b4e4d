//! Tight-binding chains in momentum and real space.
//!
//! A chain is described by its generalized Bloch Hamiltonian `h(beta)`, a
//! Laurent polynomial in `beta` (one band) or a square matrix of them. The
//! pole-cleared characteristic polynomial `P(beta, E) = beta^p det(h(beta) - E)`
//! drives everything downstream.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;
use crate::polyalg::{MultiPoly, UniPoly, COEFF_ZERO_TOL};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("all hopping amplitudes vanish on one side of the chain")]
    AllZeroHops,
    #[error("model has no hopping range (M + N = 0)")]
    EmptyRange,
    #[error("det(h(beta) - E) does not depend on beta")]
    DegenerateModel,
    #[error("beta = 0 is a pole of the Bloch Hamiltonian")]
    ZeroBeta,
    #[error("chain length {l} is below the minimum {min}")]
    TooSmallL { l: usize, min: usize },
    #[error("q(beta) nearly vanishes on the unit circle at phase {phase} (min {min:e}, max {max:e})")]
    QVanishesOnCircle { phase: f64, min: f64, max: f64 },
    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),
}

const C0: Complex64 = Complex64::new(0.0, 0.0);
const C1: Complex64 = Complex64::new(1.0, 0.0);

/// Laurent polynomial `sum_n c_n beta^n` stored as exponent -> coefficient.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LaurentPoly {
    terms: BTreeMap<i32, Complex64>,
}

impl LaurentPoly {
    /// Terms at or below `COEFF_ZERO_TOL * max|c|` are dropped.
    pub fn new(terms: impl IntoIterator<Item = (i32, Complex64)>) -> Self {
        let mut map = BTreeMap::new();
        for (n, c) in terms {
            *map.entry(n).or_insert(C0) += c;
        }
        let scale = map.values().map(|c: &Complex64| c.norm()).fold(0.0, f64::max);
        map.retain(|_, c| c.norm() > COEFF_ZERO_TOL * scale && c.norm() > 0.0);
        LaurentPoly { terms: map }
    }

    pub fn from_real(terms: &[(i32, f64)]) -> Self {
        Self::new(terms.iter().map(|&(n, c)| (n, Complex64::new(c, 0.0))))
    }

    pub fn monomial(n: i32, c: Complex64) -> Self {
        Self::new([(n, c)])
    }

    pub fn terms(&self) -> &BTreeMap<i32, Complex64> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, n: i32) -> Complex64 {
        self.terms.get(&n).copied().unwrap_or(C0)
    }

    pub fn min_exp(&self) -> Option<i32> {
        self.terms.keys().next().copied()
    }

    pub fn max_exp(&self) -> Option<i32> {
        self.terms.keys().next_back().copied()
    }

    pub fn eval(&self, beta: Complex64) -> Complex64 {
        self.terms.iter().map(|(&n, &c)| c * beta.powi(n)).sum()
    }

    /// `d/dbeta` evaluated at `beta`.
    pub fn eval_derivative(&self, beta: Complex64) -> Complex64 {
        self.terms
            .iter()
            .filter(|(&n, _)| n != 0)
            .map(|(&n, &c)| c * n as f64 * beta.powi(n - 1))
            .sum()
    }

    pub fn add(&self, rhs: &LaurentPoly) -> LaurentPoly {
        LaurentPoly::new(self.terms.iter().chain(rhs.terms.iter()).map(|(&n, &c)| (n, c)))
    }

    pub fn scale(&self, s: Complex64) -> LaurentPoly {
        LaurentPoly::new(self.terms.iter().map(|(&n, &c)| (n, c * s)))
    }

    pub fn mul(&self, rhs: &LaurentPoly) -> LaurentPoly {
        let mut out = Vec::new();
        for (&a, &ca) in &self.terms {
            for (&b, &cb) in &rhs.terms {
                out.push((a + b, ca * cb));
            }
        }
        LaurentPoly::new(out)
    }
}

/// One-band chain with hoppings `t_n`, `-M <= n <= N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OneBandModel {
    hops: LaurentPoly,
}

impl OneBandModel {
    pub fn new(hops: LaurentPoly) -> Result<Self, ModelError> {
        if hops.is_zero() {
            return Err(ModelError::AllZeroHops);
        }
        let m = Self { hops };
        if m.left_range() + m.right_range() == 0 {
            return Err(ModelError::EmptyRange);
        }
        Ok(m)
    }

    pub fn hops(&self) -> &LaurentPoly {
        &self.hops
    }

    /// Left hopping range M.
    pub fn left_range(&self) -> usize {
        (-self.hops.min_exp().unwrap_or(0)).max(0) as usize
    }

    /// Right hopping range N.
    pub fn right_range(&self) -> usize {
        self.hops.max_exp().unwrap_or(0).max(0) as usize
    }

    pub fn eval(&self, beta: Complex64) -> Complex64 {
        self.hops.eval(beta)
    }
}

/// `q x q` generalized Bloch Hamiltonian with Laurent polynomial entries,
/// stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiBandModel {
    bands: usize,
    entries: Vec<LaurentPoly>,
}

impl MultiBandModel {
    pub fn new(bands: usize, entries: Vec<LaurentPoly>) -> Result<Self, ModelError> {
        if bands == 0 || entries.len() != bands * bands {
            return Err(ModelError::InvalidParameter(format!(
                "expected {} entries for {} bands, got {}",
                bands * bands,
                bands,
                entries.len()
            )));
        }
        let m = MultiBandModel { bands, entries };
        let cp = char_poly_multiband(&m);
        if cp.beta_degree == 0 {
            return Err(ModelError::DegenerateModel);
        }
        Ok(m)
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn entry(&self, row: usize, col: usize) -> &LaurentPoly {
        &self.entries[row * self.bands + col]
    }

    fn exp_range(&self) -> (i32, i32) {
        let lo = self.entries.iter().filter_map(|e| e.min_exp()).min().unwrap_or(0);
        let hi = self.entries.iter().filter_map(|e| e.max_exp()).max().unwrap_or(0);
        (lo.min(0), hi.max(0))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    OneBand(OneBandModel),
    MultiBand(MultiBandModel),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundary {
    Open,
    Periodic,
}

impl Model {
    pub fn bands(&self) -> usize {
        match self {
            Model::OneBand(_) => 1,
            Model::MultiBand(m) => m.bands,
        }
    }

    /// Largest hopping distance to the left across all matrix entries.
    pub fn left_range(&self) -> usize {
        match self {
            Model::OneBand(m) => m.left_range(),
            Model::MultiBand(m) => (-m.exp_range().0) as usize,
        }
    }

    pub fn right_range(&self) -> usize {
        match self {
            Model::OneBand(m) => m.right_range(),
            Model::MultiBand(m) => m.exp_range().1 as usize,
        }
    }

    pub fn as_one_band(&self) -> Option<&OneBandModel> {
        match self {
            Model::OneBand(m) => Some(m),
            Model::MultiBand(_) => None,
        }
    }

    /// `h(beta)` as a `q x q` matrix (`1 x 1` for one band).
    pub fn bloch_eval(&self, beta: Complex64) -> Result<DMatrix<Complex64>, ModelError> {
        if beta.norm() == 0.0 {
            return Err(ModelError::ZeroBeta);
        }
        Ok(match self {
            Model::OneBand(m) => DMatrix::from_element(1, 1, m.eval(beta)),
            Model::MultiBand(m) => {
                DMatrix::from_fn(m.bands, m.bands, |i, j| m.entry(i, j).eval(beta))
            }
        })
    }

    /// Eigenvalues of `h(beta)`, sorted by (Re, Im).
    pub fn energies_at(&self, beta: Complex64) -> Result<Vec<Complex64>, ModelError> {
        let mut e = match self {
            Model::OneBand(m) => {
                if beta.norm() == 0.0 {
                    return Err(ModelError::ZeroBeta);
                }
                vec![m.eval(beta)]
            }
            Model::MultiBand(_) => {
                let h = self.bloch_eval(beta)?;
                linalg::eigenvalues(&h).ok_or_else(|| {
                    ModelError::InvalidParameter("eigenvalue iteration failed".into())
                })?
            }
        };
        linalg::sort_re_im(&mut e);
        Ok(e)
    }

    /// Hopping blocks `T_n` with `h(beta) = sum_n T_n beta^n`.
    pub fn hopping_blocks(&self) -> Vec<(i32, DMatrix<Complex64>)> {
        let q = self.bands();
        let mut blocks: BTreeMap<i32, DMatrix<Complex64>> = BTreeMap::new();
        let mut put = |i: usize, j: usize, lp: &LaurentPoly| {
            for (&n, &c) in lp.terms() {
                blocks.entry(n).or_insert_with(|| DMatrix::zeros(q, q))[(i, j)] += c;
            }
        };
        match self {
            Model::OneBand(m) => put(0, 0, &m.hops),
            Model::MultiBand(m) => {
                for i in 0..q {
                    for j in 0..q {
                        put(i, j, m.entry(i, j));
                    }
                }
            }
        }
        blocks.into_iter().collect()
    }

    pub fn min_sites(&self) -> usize {
        self.left_range() + self.right_range() + 1
    }

    /// Real-space Hamiltonian on `l` unit cells, `H[i, j] = T_{j - i}`.
    /// Periodic boundaries wrap `j` modulo `l`.
    pub fn real_space_hamiltonian(
        &self,
        l: usize,
        boundary: Boundary,
    ) -> Result<DMatrix<Complex64>, ModelError> {
        let min = self.min_sites();
        if l < min {
            return Err(ModelError::TooSmallL { l, min });
        }
        let q = self.bands();
        let mut h = DMatrix::<Complex64>::zeros(q * l, q * l);
        for (n, block) in self.hopping_blocks() {
            for i in 0..l {
                let j = i as i64 + n as i64;
                let j = match boundary {
                    Boundary::Open if j < 0 || j >= l as i64 => continue,
                    Boundary::Open => j as usize,
                    Boundary::Periodic => j.rem_euclid(l as i64) as usize,
                };
                for a in 0..q {
                    for b in 0..q {
                        h[(i * q + a, j * q + b)] += block[(a, b)];
                    }
                }
            }
        }
        Ok(h)
    }

    pub fn char_poly(&self) -> CharPoly {
        match self {
            Model::OneBand(m) => char_poly_one_band(m),
            Model::MultiBand(m) => char_poly_multiband(m),
        }
    }
}

/// Pole-cleared characteristic polynomial `P(beta, E) = beta^p det(h(beta) - E)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CharPoly {
    poly: MultiPoly,
    pole_order: usize,
    beta_degree: usize,
    energy_degree: usize,
    /// `table[n][j]` is the coefficient of `beta^n E^j`.
    table: Vec<Vec<Complex64>>,
}

pub const CHAR_VARS: [&str; 2] = ["beta", "E"];

impl CharPoly {
    fn from_poly(poly: MultiPoly, pole_order: usize) -> Self {
        let beta_degree = poly.degree_in(0) as usize;
        let energy_degree = poly.degree_in(1) as usize;
        let mut table = vec![vec![C0; energy_degree + 1]; beta_degree + 1];
        for (e, &c) in poly.terms() {
            table[e[0] as usize][e[1] as usize] += c;
        }
        CharPoly {
            poly,
            pole_order,
            beta_degree,
            energy_degree,
            table,
        }
    }

    /// The polynomial over variables `["beta", "E"]`.
    pub fn poly(&self) -> &MultiPoly {
        &self.poly
    }

    pub fn pole_order(&self) -> usize {
        self.pole_order
    }

    /// Degree D in beta; the number of roots at fixed energy.
    pub fn beta_degree(&self) -> usize {
        self.beta_degree
    }

    pub fn energy_degree(&self) -> usize {
        self.energy_degree
    }

    pub fn coeff(&self, beta_pow: usize, energy_pow: usize) -> Complex64 {
        self.table
            .get(beta_pow)
            .and_then(|r| r.get(energy_pow))
            .copied()
            .unwrap_or(C0)
    }

    pub fn eval(&self, beta: Complex64, energy: Complex64) -> Complex64 {
        self.in_beta(energy).eval(beta)
    }

    /// `sum |c_nj| |beta|^n |E|^j`.
    pub fn eval_scale(&self, beta: Complex64, energy: Complex64) -> f64 {
        self.poly.eval_scale(&[beta, energy])
    }

    /// `P(., E)` as a polynomial in beta.
    pub fn in_beta(&self, energy: Complex64) -> UniPoly {
        let coeffs = self
            .table
            .iter()
            .map(|row| row.iter().rev().fold(C0, |acc, &c| acc * energy + c))
            .collect();
        UniPoly::with_tol(coeffs, 0.0)
    }

    /// `P(beta, .)` as a polynomial in E.
    pub fn in_energy(&self, beta: Complex64) -> UniPoly {
        let mut coeffs = vec![C0; self.energy_degree + 1];
        let mut pw = C1;
        for row in &self.table {
            for (j, &c) in row.iter().enumerate() {
                coeffs[j] += c * pw;
            }
            pw *= beta;
        }
        UniPoly::with_tol(coeffs, 0.0)
    }

    /// `(dP/dbeta, dP/dE)` at a point.
    pub fn gradient(&self, beta: Complex64, energy: Complex64) -> (Complex64, Complex64) {
        let (_, d_beta) = self.in_beta(energy).eval_with_derivative(beta);
        let (_, d_energy) = self.in_energy(beta).eval_with_derivative(energy);
        (d_beta, d_energy)
    }

    /// Largest `k` such that P depends on E only through `E^k`.
    pub fn energy_power_step(&self) -> usize {
        fn gcd(a: usize, b: usize) -> usize {
            if b == 0 {
                a
            } else {
                gcd(b, a % b)
            }
        }
        let g = self
            .poly
            .terms()
            .keys()
            .map(|e| e[1] as usize)
            .fold(0, gcd);
        g.max(1)
    }
}

fn char_poly_one_band(m: &OneBandModel) -> CharPoly {
    let shift = m.left_range() as i32;
    let mut p = MultiPoly::zero(&CHAR_VARS);
    for (&n, &c) in m.hops.terms() {
        p.add_term(vec![(n + shift) as u32, 0], c);
    }
    p.add_term(vec![shift as u32, 1], -C1);
    CharPoly::from_poly(p.pruned(), shift as usize)
}

/// Symbolic `det(h(beta) - E)` with each row cleared of its beta poles, then
/// reduced by the largest common power of beta.
fn char_poly_multiband(m: &MultiBandModel) -> CharPoly {
    let q = m.bands;
    let mut shifts = vec![0i32; q];
    let mut rows: Vec<Vec<MultiPoly>> = Vec::with_capacity(q);
    for i in 0..q {
        let s = (0..q)
            .filter_map(|j| m.entry(i, j).min_exp())
            .min()
            .unwrap_or(0)
            .min(0)
            .abs();
        shifts[i] = s;
        let row = (0..q)
            .map(|j| {
                let mut p = MultiPoly::zero(&CHAR_VARS);
                for (&n, &c) in m.entry(i, j).terms() {
                    p.add_term(vec![(n + s) as u32, 0], c);
                }
                if i == j {
                    p.add_term(vec![s as u32, 1], -C1);
                }
                p.pruned()
            })
            .collect();
        rows.push(row);
    }
    let det = leibniz_det(&rows);
    let total_shift: i32 = shifts.iter().sum();
    let common = det.min_degree_in(0);
    let det = det.shift_down(0, common);
    CharPoly::from_poly(det, (total_shift - common as i32) as usize)
}

fn leibniz_det(rows: &[Vec<MultiPoly>]) -> MultiPoly {
    let q = rows.len();
    let zero = rows[0][0].zero_like();
    let mut perm: Vec<usize> = (0..q).collect();
    let mut acc = zero.clone();
    permute(&mut perm, 0, &mut |p| {
        let sign = permutation_sign(p);
        let mut term = zero.constant_like(Complex64::new(sign, 0.0));
        for (i, &j) in p.iter().enumerate() {
            term = term.mul(&rows[i][j]);
            if term.is_zero() {
                return;
            }
        }
        acc = acc.add(&term);
    });
    acc
}

fn permute(p: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == p.len() {
        f(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, f);
        p.swap(k, i);
    }
}

fn permutation_sign(p: &[usize]) -> f64 {
    let mut inversions = 0;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            if p[i] > p[j] {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Extended Hatano-Nelson chain `t_-2 b^-2 + t_-1 b^-1 + t_1 b + t_2 b^2`.
pub fn extended_hn(
    t_m2: Complex64,
    t_m1: Complex64,
    t_p1: Complex64,
    t_p2: Complex64,
) -> Result<Model, ModelError> {
    if t_m2.norm() == 0.0 && t_m1.norm() == 0.0 || t_p1.norm() == 0.0 && t_p2.norm() == 0.0 {
        return Err(ModelError::AllZeroHops);
    }
    let hops = LaurentPoly::new([(-2, t_m2), (-1, t_m1), (1, t_p1), (2, t_p2)]);
    Ok(Model::OneBand(OneBandModel::new(hops)?))
}

/// Real-parameter convenience for [`extended_hn`].
pub fn extended_hn_real(t_m2: f64, t_m1: f64, t_p1: f64, t_p2: f64) -> Result<Model, ModelError> {
    let c = |x: f64| Complex64::new(x, 0.0);
    extended_hn(c(t_m2), c(t_m1), c(t_p1), c(t_p2))
}

/// Extended Hatano-Nelson with `t_{+-2} = (1.5, 0.5)` and `t_{+-1} = 1 +- gamma1`.
pub fn extended_hn_gamma(gamma1: f64) -> Result<Model, ModelError> {
    extended_hn_real(0.5, 1.0 - gamma1, 1.0 + gamma1, 1.5)
}

/// Two-band non-Hermitian SSH chain `h = h_x sigma_x + h_y sigma_y` with
///
/// ```text
/// h_x = t1 + (t2 + t3 + g)/2 b + (t2 + t3 - g)/2 b^-1
/// h_y = i (t3 + g - t2)/2 b - i (t3 - g - t2)/2 b^-1
/// ```
///
/// so the off-diagonal entries are `t1 + t2 b^-1 + (t3 + g) b` and
/// `t1 + t2 b + (t3 - g) b^-1`.
pub fn nh_ssh(
    t1: Complex64,
    t2: Complex64,
    t3: Complex64,
    gamma: Complex64,
) -> Result<Model, ModelError> {
    let i = Complex64::new(0.0, 1.0);
    let hx = LaurentPoly::new([
        (0, t1),
        (1, (t2 + t3 + gamma) * 0.5),
        (-1, (t2 + t3 - gamma) * 0.5),
    ]);
    let hy = LaurentPoly::new([
        (1, i * (t3 + gamma - t2) * 0.5),
        (-1, -i * (t3 - gamma - t2) * 0.5),
    ]);
    let upper = hx.add(&hy.scale(-i));
    let lower = hx.add(&hy.scale(i));
    let entries = vec![LaurentPoly::default(), upper, lower, LaurentPoly::default()];
    Ok(Model::MultiBand(MultiBandModel::new(2, entries)?))
}

pub fn nh_ssh_real(t1: f64, t2: f64, t3: f64, gamma: f64) -> Result<Model, ModelError> {
    let c = |x: f64| Complex64::new(x, 0.0);
    nh_ssh(c(t1), c(t2), c(t3), c(gamma))
}

/// Samples used by the circle non-vanishing check for [`nfold_construct`].
pub const CIRCLE_SAMPLES: usize = 1024;

/// One-band model `h(beta) = (1 - e^{i phi} beta^n) q(beta)`, whose PBC spectrum
/// passes `n` times through `E = 0` at `beta = exp(i (2 pi m - phi) / n)`.
pub fn nfold_construct(n: usize, phi: f64, q: &LaurentPoly) -> Result<Model, ModelError> {
    if n < 2 {
        return Err(ModelError::InvalidParameter(format!(
            "multiplicity must be at least 2, got {n}"
        )));
    }
    if !(0.0..2.0 * PI).contains(&phi) {
        return Err(ModelError::InvalidParameter(format!(
            "phase {phi} outside [0, 2pi)"
        )));
    }
    if q.is_zero() {
        return Err(ModelError::AllZeroHops);
    }
    check_nonvanishing_on_circle(q)?;
    let factor = LaurentPoly::new([(0, C1), (n as i32, -Complex64::from_polar(1.0, phi))]);
    Ok(Model::OneBand(OneBandModel::new(factor.mul(q))?))
}

/// The `n` unit-circle solutions of `1 - e^{i phi} beta^n = 0` as phases in [0, 2pi).
pub fn nfold_phases(n: usize, phi: f64) -> Vec<f64> {
    let mut out: Vec<f64> = (1..=n)
        .map(|m| (2.0 * PI * m as f64 - phi) / n as f64)
        .map(|k| k.rem_euclid(2.0 * PI))
        .collect();
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out
}

fn check_nonvanishing_on_circle(q: &LaurentPoly) -> Result<(), ModelError> {
    let step = 2.0 * PI / CIRCLE_SAMPLES as f64;
    let modulus = |k: f64| q.eval(Complex64::from_polar(1.0, k)).norm();
    let samples: Vec<f64> = (0..CIRCLE_SAMPLES).map(|j| modulus(j as f64 * step)).collect();
    let max = samples.iter().copied().fold(0.0, f64::max);
    let (jmin, _) = samples
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap();
    // Golden-section refinement of the sampled minimum.
    let (mut a, mut b) = ((jmin as f64 - 1.0) * step, (jmin as f64 + 1.0) * step);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    for _ in 0..80 {
        if modulus(c) < modulus(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    let kmin = 0.5 * (a + b);
    let min = modulus(kmin).min(samples[jmin]);
    if min < 1e-6 * max {
        return Err(ModelError::QVanishesOnCircle {
            phase: kmin.rem_euclid(2.0 * PI),
            min,
            max,
        });
    }
    Ok(())
}
