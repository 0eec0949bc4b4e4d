//! Self-intersections of the periodic-boundary spectrum and their relation to
//! the points where the aGBZ meets the Brillouin zone.
//!
//! An n-fold self-intersection `E0` is reached from `n` distinct momenta. Its
//! neighborhood splits into `2n` sectors whose windings determine which
//! contiguous run of ordered roots `beta_i(E0)` sits on the unit circle.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::gbz::{agbz_implicit, ordered_roots, verify_pair, GbzError, ImplicitCurve, DEFAULT_TIE_TOL};
use crate::model::{CharPoly, Model, ModelError};
use crate::spectra::{pbc_spectrum, PbcSpectrum, SpectraError};
use crate::topology::{band_velocity, winding_bz_guarded, winding_contour, Contour, TopologyError};

pub const MIN_NUM_K_INTERSECT: usize = 256;
pub const DEFAULT_TOL_E: f64 = 1e-6;
const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 50;
/// Tangents closer than this (sine of the angle) are treated as parallel.
const TRANSVERSAL_TOL: f64 = 1e-8;
const K_DISTINCT_TOL: f64 = 1e-7;
const RADIUS_FLOOR: f64 = 1e-8;
const CONTACT_SCAN: usize = 4096;
const CONTACT_TOL: f64 = 1e-9;
/// Root-modulus guard for sector probes, which may sit very close to a branch.
const PROBE_GUARD: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntersectError {
    #[error("numK = {0} is below the minimum of {MIN_NUM_K_INTERSECT}")]
    TooFewSamples(usize),
    #[error("branches at {energy} cannot be separated above radius {RADIUS_FLOOR:e}")]
    RadiusUnderflow { energy: Complex64 },
    #[error("the unit circle lies inside the aGBZ (F vanishes along it)")]
    BzInsideAgbz,
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error(transparent)]
    Gbz(#[from] GbzError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum IntersectWarning {
    /// A crossing candidate whose Newton refinement did not converge.
    NewtonDivergence { k1: f64, k2: f64 },
    /// Two distinct clusters closer than twice the clustering radius.
    ClusterAmbiguous { a: Complex64, b: Complex64 },
}

/// One momentum reaching a self-intersection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Branch {
    pub band: usize,
    pub k: f64,
    pub beta: Complex64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum EdgeDirection {
    Inward,
    Outward,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalStructure {
    pub radius: f64,
    /// Edge angles around `E0`, counterclockwise from the smallest in [0, 2pi).
    pub edge_angles: Vec<f64>,
    pub edge_directions: Vec<EdgeDirection>,
    /// `sector_windings[m]` lies between edges `m` and `m + 1`.
    pub sector_windings: Vec<i32>,
    pub w_min: i32,
    pub w_max: i32,
    /// Inward edges crossed going counterclockwise from the first `w_min`
    /// sector to the opposite one.
    pub inward_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SelfIntersection {
    pub energy: Complex64,
    pub multiplicity: usize,
    /// Sorted by `(k, band)`.
    pub branches: Vec<Branch>,
    pub local: LocalStructure,
    /// 1-based `[l_min - inward + 1, l_max + inward]` with `l = p + w`.
    pub ordering_indices: Vec<usize>,
}

impl SelfIntersection {
    pub fn k_solutions(&self) -> Vec<f64> {
        self.branches.iter().map(|b| b.k).collect()
    }

    /// `n == (w_max - w_min) + 2 * inward`.
    pub fn index_accounting_holds(&self) -> bool {
        self.multiplicity as i32
            == (self.local.w_max - self.local.w_min) + 2 * self.local.inward_count as i32
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntersectionReport {
    pub intersections: Vec<SelfIntersection>,
    pub warnings: Vec<IntersectWarning>,
}

/// A sampled piece of one band between consecutive momenta.
#[derive(Clone, Copy, Debug)]
struct Segment {
    band: usize,
    index: usize,
    k0: f64,
    k1: f64,
    e0: Complex64,
    e1: Complex64,
}

impl Segment {
    fn re_range(&self) -> (f64, f64) {
        (self.e0.re.min(self.e1.re), self.e0.re.max(self.e1.re))
    }
}

fn segments(spec: &PbcSpectrum) -> Vec<Segment> {
    let mut out = Vec::new();
    for c in &spec.curves {
        let n = c.samples.len();
        for j in 0..n {
            let (k0, e0) = c.samples[j];
            let (k1, e1) = if j + 1 < n {
                c.samples[j + 1]
            } else {
                (2.0 * PI, spec.curves[c.successor].samples[0].1)
            };
            out.push(Segment { band: c.band, index: j, k0, k1, e0, e1 });
        }
    }
    out
}

fn orient(a: Complex64, b: Complex64, c: Complex64) -> f64 {
    (b.re - a.re) * (c.im - a.im) - (b.im - a.im) * (c.re - a.re)
}

/// Parameters `(s, t)` of an inclusive crossing of `ab` and `cd`, if any.
fn crossing(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Option<(f64, f64)> {
    let scale = (b - a).norm() * (d - c).norm();
    let eps = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let d1 = orient(a, b, c);
    let d2 = orient(a, b, d);
    let d3 = orient(c, d, a);
    let d4 = orient(c, d, b);
    if (d1 > eps && d2 > eps) || (d1 < -eps && d2 < -eps) {
        return None;
    }
    if (d3 > eps && d4 > eps) || (d3 < -eps && d4 < -eps) {
        return None;
    }
    let r = b - a;
    let s = d - c;
    let denom = r.re * s.im - r.im * s.re;
    if denom.abs() <= eps {
        // Collinear overlap: no transversal crossing.
        return None;
    }
    let qp = c - a;
    let t_ab = (qp.re * s.im - qp.im * s.re) / denom;
    let t_cd = (qp.re * r.im - qp.im * r.re) / denom;
    Some((t_ab.clamp(0.0, 1.0), t_cd.clamp(0.0, 1.0)))
}

/// Fraction of the longer segment within which non-crossing segments are
/// still handed to Newton.
const NEAR_MISS: f64 = 0.25;

/// Closest-point parameters of two non-crossing segments lying within
/// `NEAR_MISS` of the longer one's length.
fn near_miss(a: &Segment, b: &Segment) -> Option<(f64, f64)> {
    let tol = NEAR_MISS * (a.e1 - a.e0).norm().max((b.e1 - b.e0).norm());
    let project = |p: Complex64, x: Complex64, y: Complex64| {
        let d = y - x;
        if d.norm_sqr() == 0.0 {
            0.0
        } else {
            (((p - x) * d.conj()).re / d.norm_sqr()).clamp(0.0, 1.0)
        }
    };
    let options = [
        (0.0, project(a.e0, b.e0, b.e1)),
        (1.0, project(a.e1, b.e0, b.e1)),
        (project(b.e0, a.e0, a.e1), 0.0),
        (project(b.e1, a.e0, a.e1), 1.0),
    ];
    options
        .into_iter()
        .map(|(s, t)| (s, t, ((a.e0 + (a.e1 - a.e0) * s) - (b.e0 + (b.e1 - b.e0) * t)).norm()))
        .filter(|o| o.2 <= tol)
        .min_by(|x, y| x.2.partial_cmp(&y.2).unwrap())
        .map(|(s, t, _)| (s, t))
}

fn circ_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// Band energy at momentum `k`, continued from `near`.
fn band_energy(model: &Model, k: f64, near: Complex64) -> Result<Complex64, ModelError> {
    let beta = Complex64::from_polar(1.0, k);
    if let Some(m) = model.as_one_band() {
        return Ok(m.eval(beta));
    }
    let e = model.energies_at(beta)?;
    Ok(e.into_iter()
        .min_by(|a, b| (a - near).norm().partial_cmp(&(b - near).norm()).unwrap())
        .unwrap())
}

struct Refined {
    energy: Complex64,
    a: (usize, f64),
    b: (usize, f64),
}

fn newton(
    model: &Model,
    cp: &CharPoly,
    sa: &Segment,
    sb: &Segment,
    s: f64,
    t: f64,
    min_sep: f64,
) -> Result<Option<Refined>, ModelError> {
    let mut k1 = sa.k0 + s * (sa.k1 - sa.k0);
    let mut k2 = sb.k0 + t * (sb.k1 - sb.k0);
    let mut ea = sa.e0 + (sa.e1 - sa.e0) * s;
    let mut eb = sb.e0 + (sb.e1 - sb.e0) * t;
    for _ in 0..NEWTON_MAX_ITER {
        ea = band_energy(model, k1, ea)?;
        eb = band_energy(model, k2, eb)?;
        let f = ea - eb;
        let va = band_velocity(cp, Complex64::from_polar(1.0, k1), ea);
        let vb = band_velocity(cp, Complex64::from_polar(1.0, k2), eb);
        let cross = va.re * vb.im - va.im * vb.re;
        if cross.abs() <= TRANSVERSAL_TOL * va.norm() * vb.norm() {
            return Ok(None);
        }
        if f.norm() <= NEWTON_TOL * ea.norm().max(1.0) {
            if circ_dist(k1, k2) < min_sep {
                return Ok(None);
            }
            return Ok(Some(Refined {
                energy: 0.5 * (ea + eb),
                a: (sa.band, k1.rem_euclid(2.0 * PI)),
                b: (sb.band, k2.rem_euclid(2.0 * PI)),
            }));
        }
        // Solve va dk1 - vb dk2 = -f over the reals.
        let det = va.im * vb.re - va.re * vb.im;
        let dk1 = (f.re * vb.im - f.im * vb.re) / det;
        let dk2 = (f.re * va.im - f.im * va.re) / det;
        k1 += dk1;
        k2 += dk2;
        if !k1.is_finite() || !k2.is_finite() {
            break;
        }
    }
    Ok(None)
}

/// All transversal self-intersections of the PBC spectrum sampled at `num_k`
/// momenta, with multiplicities clustered at radius `tol_e`.
pub fn find_intersections(model: &Model, num_k: usize, tol_e: f64) -> Result<IntersectionReport, IntersectError> {
    if num_k < MIN_NUM_K_INTERSECT {
        return Err(IntersectError::TooFewSamples(num_k));
    }
    let cp = model.char_poly();
    let spec = pbc_spectrum(model, num_k)?;
    let segs = segments(&spec);
    let dk = 2.0 * PI / num_k as f64;
    let min_sep = 1e-3 * dk;

    // Sweep over real parts for candidate segment pairs.
    let mut order: Vec<usize> = (0..segs.len()).collect();
    order.sort_by(|&a, &b| segs[a].re_range().0.partial_cmp(&segs[b].re_range().0).unwrap());
    let max_len = segs.iter().map(|s| (s.e1 - s.e0).norm()).fold(0.0, f64::max);
    let mut candidates = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        let (_, hi) = segs[i].re_range();
        for &j in &order[pos + 1..] {
            if segs[j].re_range().0 > hi + NEAR_MISS * max_len {
                break;
            }
            let (a, b) = (&segs[i], &segs[j]);
            if adjacent(&spec, a, b) {
                continue;
            }
            if let Some((s, t)) = crossing(a.e0, a.e1, b.e0, b.e1) {
                candidates.push((i, j, s, t, true));
            } else if let Some((s, t)) = near_miss(a, b) {
                // Nearly parallel branches can cross between samples without
                // their chords crossing.
                candidates.push((i, j, s, t, false));
            }
        }
    }

    let refined: Vec<(usize, Option<Refined>)> = candidates
        .par_iter()
        .enumerate()
        .map(|(ci, &(i, j, s, t, _))| Ok((ci, newton(model, &cp, &segs[i], &segs[j], s, t, min_sep)?)))
        .collect::<Result<_, ModelError>>()?;

    let mut warnings = Vec::new();
    let mut sols = Vec::new();
    for (ci, r) in refined {
        match r {
            Some(r) => sols.push(r),
            None => {
                let (i, j, s, t, crossed) = candidates[ci];
                if !crossed {
                    continue;
                }
                // Only report candidates that looked like genuine crossings.
                let (a, b) = (&segs[i], &segs[j]);
                let va = a.e1 - a.e0;
                let vb = b.e1 - b.e0;
                let sin = (va.re * vb.im - va.im * vb.re).abs() / (va.norm() * vb.norm()).max(f64::MIN_POSITIVE);
                if sin > 1e-3 {
                    warnings.push(IntersectWarning::NewtonDivergence {
                        k1: a.k0 + s * (a.k1 - a.k0),
                        k2: b.k0 + t * (b.k1 - b.k0),
                    });
                }
            }
        }
    }

    let clusters = cluster(&sols, tol_e);
    let mut centers: Vec<(Complex64, Vec<(usize, f64)>)> = clusters
        .into_iter()
        .filter_map(|members| {
            let e0 = members.iter().map(|&m| sols[m].energy).sum::<Complex64>() / members.len() as f64;
            let mut ks: Vec<(usize, f64)> = Vec::new();
            for &m in &members {
                for bk in [sols[m].a, sols[m].b] {
                    if !ks.iter().any(|&(b, k)| b == bk.0 && circ_dist(k, bk.1) < K_DISTINCT_TOL) {
                        ks.push(bk);
                    }
                }
            }
            (ks.len() >= 2).then_some((e0, ks))
        })
        .collect();
    centers.sort_by(|a, b| {
        a.0.re.partial_cmp(&b.0.re).unwrap().then(a.0.im.partial_cmp(&b.0.im).unwrap())
    });
    for w in 0..centers.len() {
        for v in w + 1..centers.len() {
            if (centers[w].0 - centers[v].0).norm() <= 2.0 * tol_e {
                warnings.push(IntersectWarning::ClusterAmbiguous { a: centers[w].0, b: centers[v].0 });
            }
        }
    }

    let p = cp.pole_order();
    let intersections = centers
        .par_iter()
        .map(|(e0, ks)| {
            let mut branches: Vec<Branch> = ks
                .iter()
                .map(|&(band, k)| Branch { band, k, beta: Complex64::from_polar(1.0, k) })
                .collect();
            branches.sort_by(|a, b| a.k.partial_cmp(&b.k).unwrap().then(a.band.cmp(&b.band)));
            let local = local_structure(model, &cp, &spec, *e0, &branches, initial_radius(&spec))?;
            let ordering_indices = ordering_indices(p, &local);
            Ok(SelfIntersection {
                energy: *e0,
                multiplicity: branches.len(),
                branches,
                local,
                ordering_indices,
            })
        })
        .collect::<Result<Vec<_>, IntersectError>>()?;
    Ok(IntersectionReport { intersections, warnings })
}

fn adjacent(spec: &PbcSpectrum, a: &Segment, b: &Segment) -> bool {
    let next = |s: &Segment| {
        let c = &spec.curves[s.band];
        if s.index + 1 < c.samples.len() {
            (s.band, s.index + 1)
        } else {
            (c.successor, 0)
        }
    };
    next(a) == (b.band, b.index) || next(b) == (a.band, a.index)
}

fn cluster(sols: &[Refined], tol: f64) -> Vec<Vec<usize>> {
    let n = sols.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| sols[a].energy.re.partial_cmp(&sols[b].energy.re).unwrap());
    for x in 0..n {
        for y in x + 1..n {
            let (i, j) = (idx[x], idx[y]);
            if sols[j].energy.re - sols[i].energy.re > tol {
                break;
            }
            if (sols[i].energy - sols[j].energy).norm() <= tol {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

fn initial_radius(spec: &PbcSpectrum) -> f64 {
    let e: Vec<Complex64> = spec.energies().collect();
    let (mut lo, mut hi) = (e[0], e[0]);
    for z in &e {
        lo = Complex64::new(lo.re.min(z.re), lo.im.min(z.im));
        hi = Complex64::new(hi.re.max(z.re), hi.im.max(z.im));
    }
    0.02 * (hi - lo).norm().max(1e-6)
}

/// Where one branch meets the circle of radius `r` around `e0`, walking from
/// `k` in direction `sign`; `None` if it does not leave the disk within a
/// quarter period.
fn exit_point(
    model: &Model,
    cp: &CharPoly,
    band_e: Complex64,
    k: f64,
    sign: f64,
    e0: Complex64,
    r: f64,
) -> Result<Option<(f64, Complex64)>, ModelError> {
    let v = band_velocity(cp, Complex64::from_polar(1.0, k), band_e).norm().max(1e-12);
    let step = (r / v / 8.0).min(0.01);
    let mut kk = k;
    let mut e = band_energy(model, kk, band_e)?;
    let mut prev = (kk, e);
    let mut travelled = 0.0;
    while (e - e0).norm() < r {
        prev = (kk, e);
        kk += sign * step;
        travelled += step;
        if travelled > PI / 2.0 {
            return Ok(None);
        }
        e = band_energy(model, kk, e)?;
    }
    // Bisect between the last inside and first outside sample.
    let (mut a, mut ea) = prev;
    let mut b = kk;
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        let em = band_energy(model, m, ea)?;
        if (em - e0).norm() < r {
            a = m;
            ea = em;
        } else {
            b = m;
        }
    }
    let eb = band_energy(model, b, ea)?;
    Ok(Some((b, eb)))
}

fn dist_to_segment(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    let d = b - a;
    let t = if d.norm_sqr() > 0.0 {
        (((p - a) * d.conj()).re / d.norm_sqr()).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p - (a + d * t)).norm()
}

/// Sector windings and edge directions around an intersection, shrinking the
/// radius until exactly the listed branches cross the disk.
pub fn local_structure(
    model: &Model,
    cp: &CharPoly,
    spec: &PbcSpectrum,
    e0: Complex64,
    branches: &[Branch],
    radius: f64,
) -> Result<LocalStructure, IntersectError> {
    let segs = segments(spec);
    // Sampled neighbors of a walked window may dip into the disk.
    let slack = 2.0 * PI / spec.num_k() as f64;
    let mut r = radius;
    'shrink: while r >= RADIUS_FLOOR {
        let mut edges: Vec<(f64, EdgeDirection)> = Vec::new();
        let mut windows: Vec<(usize, f64, f64)> = Vec::new();
        for br in branches {
            let e_here = band_energy(model, br.k, e0)?;
            let fwd = exit_point(model, cp, e_here, br.k, 1.0, e0, r)?;
            let bwd = exit_point(model, cp, e_here, br.k, -1.0, e0, r)?;
            let (Some((kf, ef)), Some((kb, eb))) = (fwd, bwd) else {
                r *= 0.5;
                continue 'shrink;
            };
            edges.push(((ef - e0).arg().rem_euclid(2.0 * PI), EdgeDirection::Outward));
            edges.push(((eb - e0).arg().rem_euclid(2.0 * PI), EdgeDirection::Inward));
            windows.push((br.band, kb, kf));
        }
        // No other part of the spectrum may enter the disk.
        let intruder = segs.iter().any(|s| {
            let covered = windows.iter().any(|&(band, kb, kf)| {
                let (lo, span) = (kb - slack, kf - kb + 2.0 * slack);
                let inside = |k: f64| (k - lo).rem_euclid(2.0 * PI) <= span;
                band == s.band
                    && (inside(s.k0) || inside(s.k1) || (lo - s.k0).rem_euclid(2.0 * PI) <= s.k1 - s.k0)
            });
            !covered && dist_to_segment(e0, s.e0, s.e1) < r
        });
        if intruder {
            r *= 0.5;
            continue;
        }
        edges.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let m = edges.len();
        // One absolute winding in the widest sector; the rest follow from
        // the crossing rule, +1 over an outward edge and -1 over an inward one.
        let width = |i: usize| (edges[(i + 1) % m].0 - edges[i].0).rem_euclid(2.0 * PI);
        let widest = (0..m)
            .max_by(|&a, &b| width(a).partial_cmp(&width(b)).unwrap())
            .unwrap();
        let mid = edges[widest].0 + 0.5 * width(widest);
        let probe = e0 + Complex64::from_polar(0.75 * r, mid);
        let w0 = match winding_bz_guarded(cp, probe, PROBE_GUARD) {
            Ok(w) => w,
            Err(TopologyError::OnSpectrum { .. } | TopologyError::PhaseUnresolved { .. }) => {
                match winding_contour(model, probe, &Contour::unit_circle(), 1024) {
                    Ok(w) => w,
                    Err(TopologyError::OnSpectrum { .. }) => {
                        r *= 0.5;
                        continue 'shrink;
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            Err(e) => return Err(e.into()),
        };
        let mut sector_windings = vec![0; m];
        sector_windings[widest] = w0;
        for j in 1..m {
            let i = (widest + j) % m;
            let step = match edges[i].1 {
                EdgeDirection::Outward => 1,
                EdgeDirection::Inward => -1,
            };
            sector_windings[i] = sector_windings[(i + m - 1) % m] + step;
        }
        // Direct probes where the roots are clear of the unit circle; any
        // disagreement means something else crosses the disk.
        let consistent = (0..m).all(|i| {
            let mid = edges[i].0 + 0.5 * width(i);
            let probe = e0 + Complex64::from_polar(0.75 * r, mid);
            winding_bz_guarded(cp, probe, PROBE_GUARD).map_or(true, |w| w == sector_windings[i])
        });
        if !consistent {
            r *= 0.5;
            continue;
        }
        let w_min = *sector_windings.iter().min().unwrap();
        let w_max = *sector_windings.iter().max().unwrap();
        let start = sector_windings.iter().position(|&w| w == w_min).unwrap();
        let n = m / 2;
        // Crossing from sector `start` into `start + j` passes edge `start + j`.
        let inward_count = (1..=n)
            .filter(|&j| edges[(start + j) % m].1 == EdgeDirection::Inward)
            .count();
        return Ok(LocalStructure {
            radius: r,
            edge_angles: edges.iter().map(|e| e.0).collect(),
            edge_directions: edges.iter().map(|e| e.1).collect(),
            sector_windings,
            w_min,
            w_max,
            inward_count,
        });
    }
    Err(IntersectError::RadiusUnderflow { energy: e0 })
}

fn ordering_indices(pole_order: usize, local: &LocalStructure) -> Vec<usize> {
    let p = pole_order as i32;
    let k = local.inward_count as i32;
    let lo = p + local.w_min - k + 1;
    let hi = p + local.w_max + k;
    (lo.max(1)..=hi).map(|i| i as usize).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NfoldReport {
    pub pass: bool,
    pub expected: Vec<usize>,
    pub observed: Vec<usize>,
    pub accounting_holds: bool,
}

/// Checks that the roots on the unit circle at `E0` are exactly those at
/// the predicted ordering indices.
pub fn verify_nfold_condition(model: &Model, si: &SelfIntersection) -> Result<NfoldReport, IntersectError> {
    let cp = model.char_poly();
    let ord = ordered_roots(&cp, si.energy, DEFAULT_TIE_TOL).map_err(GbzError::from)?;
    let observed = ord.unit_modulus_indices(1e-6);
    let accounting_holds = si.index_accounting_holds();
    Ok(NfoldReport {
        pass: observed == si.ordering_indices && accounting_holds && observed.len() == si.multiplicity,
        expected: si.ordering_indices.clone(),
        observed,
        accounting_holds,
    })
}

/// A point `e^{i phi}` of the Brillouin zone that also lies on the aGBZ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BzContact {
    pub phi: f64,
    pub energy: Complex64,
    /// Tie-group label at the contact.
    pub label: (usize, usize),
}

/// Sorted log-moduli of the roots of `P(., E)` other than `e^{i phi}`, with
/// `E` the band energy at `phi` continued from `near`. Each entry is a
/// continuous function of `phi`, and vanishes where that root meets the
/// unit circle.
fn other_root_gaps(model: &Model, cp: &CharPoly, phi: f64, near: Complex64) -> Option<(Vec<f64>, Complex64)> {
    let beta = Complex64::from_polar(1.0, phi);
    let e = band_energy(model, phi, near).ok()?;
    let ord = ordered_roots(cp, e, DEFAULT_TIE_TOL).ok()?;
    let own = ord.locate(beta, 1e-6)?;
    let gaps = ord
        .roots
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != own)
        .map(|(_, r)| r.norm().ln())
        .collect();
    Some((gaps, e))
}

/// Unit-circle points of the aGBZ.
///
/// Candidate cells of a uniform `phi` grid come from sign changes and local
/// minima of `F(cos phi, sin phi)` and, band by band, of the log-moduli of
/// the roots other than `e^{i phi}`. Each cell is subdivided and every zero
/// refined, then verified as a tie at the matched energy. When `F` exceeds
/// the degree budget the root scan alone is used.
pub fn bz_agbz_intersections(model: &Model) -> Result<Vec<BzContact>, IntersectError> {
    match agbz_implicit(model) {
        Ok(curve) => bz_agbz_intersections_with(model, Some(&curve)),
        Err(GbzError::DegreeBudgetExceeded { .. }) => bz_agbz_intersections_with(model, None),
        Err(e) => Err(e.into()),
    }
}

fn scan_candidates(vals: &[f64]) -> Vec<usize> {
    let n = vals.len();
    (0..n)
        .filter(|&j| {
            let (a, b, c) = (vals[(j + n - 1) % n], vals[j], vals[(j + 1) % n]);
            b == 0.0 || (b > 0.0) != (c > 0.0) || (b.abs() < a.abs() && b.abs() <= c.abs())
        })
        .collect()
}

pub fn bz_agbz_intersections_with(
    model: &Model,
    curve: Option<&ImplicitCurve>,
) -> Result<Vec<BzContact>, IntersectError> {
    let cp = model.char_poly();
    let n = CONTACT_SCAN;
    let spec = pbc_spectrum(model, n)?;
    let dphi = 2.0 * PI / n as f64;

    let mut cells = std::collections::BTreeSet::new();
    if let Some(curve) = curve {
        let vals: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|j| {
                let b = Complex64::from_polar(1.0, j as f64 * dphi);
                curve.eval_direct(b) / curve.eval_scale(b).max(f64::MIN_POSITIVE)
            })
            .collect();
        let peak = vals.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if peak < 1e-10 {
            return Err(IntersectError::BzInsideAgbz);
        }
        // F gives no band information; try every band in its cells.
        for j in scan_candidates(&vals) {
            for b in 0..spec.curves.len() {
                cells.insert((b, j));
            }
        }
    }
    for c in &spec.curves {
        let gaps: Vec<Option<Vec<f64>>> = c
            .samples
            .par_iter()
            .map(|&(k, e)| other_root_gaps(model, &cp, k, e).map(|g| g.0))
            .collect();
        let width = gaps.iter().flatten().map(|g| g.len()).max().unwrap_or(0);
        for r in 0..width {
            let vals: Vec<f64> = gaps
                .iter()
                .map(|g| g.as_ref().and_then(|g| g.get(r).copied()).unwrap_or(f64::INFINITY))
                .collect();
            if vals.iter().all(|v| v.abs() < 1e-10) {
                return Err(IntersectError::BzInsideAgbz);
            }
            for j in scan_candidates(&vals) {
                if vals[j].abs() < TOUCH_GATE || vals[(j + 1) % n].abs() < TOUCH_GATE {
                    cells.insert((c.band, j));
                }
            }
        }
    }

    let cells: Vec<(usize, usize)> = cells.into_iter().collect();
    let found: Vec<Vec<BzContact>> = cells
        .par_iter()
        .map(|&(band, j)| {
            let (k, e) = spec.curves[band].samples[j];
            refine_cell(model, &cp, k - dphi, k + dphi, e)
        })
        .collect();
    let mut all: Vec<BzContact> = found.into_iter().flatten().collect();
    all.sort_by(|a, b| {
        a.phi.partial_cmp(&b.phi).unwrap()
            .then(a.energy.re.partial_cmp(&b.energy.re).unwrap())
            .then(a.energy.im.partial_cmp(&b.energy.im).unwrap())
    });
    let mut out: Vec<BzContact> = Vec::new();
    for c in all {
        if !out.iter().any(|o| circ_dist(o.phi, c.phi) < 1e-8 && (o.energy - c.energy).norm() < 1e-8) {
            out.push(c);
        }
    }
    Ok(out)
}

const CELL_SUBDIVISIONS: usize = 32;
/// Largest log-modulus on the scan grid still worth refining; a root that
/// touches the unit circle between grid points stays far below this.
const TOUCH_GATE: f64 = 1e-2;

/// All verified zeros of the other-root log-moduli in `[lo, hi]` along the
/// band through `e_start`.
fn refine_cell(model: &Model, cp: &CharPoly, lo: f64, hi: f64, e_start: Complex64) -> Vec<BzContact> {
    let m = CELL_SUBDIVISIONS;
    let h = (hi - lo) / m as f64;
    // Continue the band energy across the cell so multi-band tracking holds.
    let mut samples = Vec::with_capacity(m + 1);
    let mut near = e_start;
    for i in 0..=m {
        let phi = lo + i as f64 * h;
        match other_root_gaps(model, cp, phi, near) {
            Some((g, e)) => {
                samples.push(Some((phi, g, e)));
                near = e;
            }
            None => samples.push(None),
        }
    }
    let width = samples.iter().flatten().map(|s| s.1.len()).min().unwrap_or(0);
    let mut out = Vec::new();
    for r in 0..width {
        let g = |phi: f64, near: Complex64| other_root_gaps(model, cp, phi, near).map(|v| v.0[r]);
        for i in 0..m {
            let (Some((a, ga, ea)), Some((b, gb, _))) = (&samples[i], &samples[i + 1]) else {
                continue;
            };
            let (a, b, ea, ga, gb) = (*a, *b, *ea, ga[r], gb[r]);
            if ga == 0.0 || (ga > 0.0) != (gb > 0.0) {
                let (mut a, mut b, mut fa) = (a, b, ga);
                for _ in 0..80 {
                    let mid = 0.5 * (a + b);
                    let Some(fm) = g(mid, ea) else { break };
                    if fm == 0.0 {
                        a = mid;
                        b = mid;
                        break;
                    }
                    if (fm > 0.0) == (fa > 0.0) {
                        a = mid;
                        fa = fm;
                    } else {
                        b = mid;
                    }
                }
                out.extend(accept_contact(model, cp, 0.5 * (a + b), ea));
            }
            let Some(Some((_, gp, _))) = i.checked_sub(1).map(|p| &samples[p]) else {
                continue;
            };
            let gp = gp[r];
            if ga.abs() < gp.abs() && ga.abs() <= gb.abs() && ga.abs() < TOUCH_GATE {
                let f = |phi: f64| g(phi, ea).map_or(f64::INFINITY, f64::abs);
                let golden = (5f64.sqrt() - 1.0) / 2.0;
                let (mut x, mut y) = (a - h, b);
                let mut c = y - golden * (y - x);
                let mut d = x + golden * (y - x);
                for _ in 0..100 {
                    if f(c) < f(d) {
                        y = d;
                    } else {
                        x = c;
                    }
                    c = y - golden * (y - x);
                    d = x + golden * (y - x);
                }
                out.extend(accept_contact(model, cp, 0.5 * (x + y), ea));
            }
        }
    }
    out
}

fn accept_contact(model: &Model, cp: &CharPoly, phi: f64, near: Complex64) -> Option<BzContact> {
    let beta = Complex64::from_polar(1.0, phi);
    let energy = band_energy(model, phi, near).ok()?;
    let ord = ordered_roots(cp, energy, DEFAULT_TIE_TOL).ok()?;
    let own = ord.locate(beta, 1e-6)?;
    let partner = ord
        .roots
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != own)
        .min_by(|a, b| a.1.norm().ln().abs().partial_cmp(&b.1.norm().ln().abs()).unwrap())?
        .1;
    if partner.norm().ln().abs() > CONTACT_TOL {
        return None;
    }
    let label = verify_pair(cp, beta, *partner, energy, DEFAULT_TIE_TOL)?;
    Some(BzContact {
        phi: phi.rem_euclid(2.0 * PI),
        energy,
        label,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrespondenceReport {
    pub pass: bool,
    pub intersections: Vec<SelfIntersection>,
    pub contacts: Vec<BzContact>,
    /// `(intersection index, contact index)` pairs.
    pub matched: Vec<(usize, usize)>,
    pub violations: Vec<String>,
    pub warnings: Vec<IntersectWarning>,
}

/// Every n-fold self-intersection must be hit by exactly n aGBZ-BZ contacts
/// at its energy, at its momenta, and every contact must belong to one.
pub fn verify_correspondence(model: &Model, num_k: usize, tol_e: f64) -> Result<CorrespondenceReport, IntersectError> {
    let report = find_intersections(model, num_k, tol_e)?;
    let contacts = match bz_agbz_intersections(model) {
        Ok(c) => c,
        Err(IntersectError::BzInsideAgbz) if report.intersections.is_empty() => Vec::new(),
        Err(e) => return Err(e),
    };
    let mut matched = Vec::new();
    let mut violations = Vec::new();
    let mut used = vec![false; contacts.len()];
    for (si_idx, si) in report.intersections.iter().enumerate() {
        let hits: Vec<usize> = (0..contacts.len())
            .filter(|&c| (contacts[c].energy - si.energy).norm() <= tol_e)
            .collect();
        if hits.len() != si.multiplicity {
            violations.push(format!(
                "intersection at {:.6e} has multiplicity {} but {} contacts",
                si.energy,
                si.multiplicity,
                hits.len()
            ));
        }
        for &c in &hits {
            used[c] = true;
            matched.push((si_idx, c));
            if !si.branches.iter().any(|b| circ_dist(b.k, contacts[c].phi) <= 1e-6) {
                violations.push(format!(
                    "contact at phi = {:.12} does not match any momentum of the intersection at {:.6e}",
                    contacts[c].phi, si.energy
                ));
            }
        }
    }
    for (c, &u) in used.iter().enumerate() {
        if !u {
            violations.push(format!(
                "contact at phi = {:.12}, E = {:.6e} matches no self-intersection",
                contacts[c].phi, contacts[c].energy
            ));
        }
    }
    Ok(CorrespondenceReport {
        pass: violations.is_empty(),
        intersections: report.intersections,
        contacts,
        matched,
        violations,
        warnings: report.warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::extended_hn_gamma;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn segment_crossings() {
        let (s, t) = crossing(c(-1.0, 0.0), c(1.0, 0.0), c(0.0, -1.0), c(0.0, 3.0)).unwrap();
        assert!((s - 0.5).abs() < 1e-15 && (t - 0.25).abs() < 1e-15);
        assert!(crossing(c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0), c(1.0, 1.0)).is_none());
        assert!(crossing(c(0.0, 0.0), c(1.0, 0.0), c(2.0, -1.0), c(2.0, 1.0)).is_none());
    }

    #[test]
    fn ordering_indices_follow_inward_count() {
        let local = LocalStructure {
            radius: 0.1,
            edge_angles: vec![],
            edge_directions: vec![],
            sector_windings: vec![1, 0, 1, 0, 1, 0],
            w_min: 0,
            w_max: 1,
            inward_count: 1,
        };
        assert_eq!(ordering_indices(2, &local), vec![2, 3, 4]);
        let two = LocalStructure { inward_count: 0, w_min: 0, w_max: 2, ..local };
        assert_eq!(ordering_indices(2, &two), vec![3, 4]);
    }

    #[test]
    fn triple_point() {
        let m = extended_hn_gamma(-0.5).unwrap();
        let r = find_intersections(&m, 512, DEFAULT_TOL_E).unwrap();
        assert_eq!(r.intersections.len(), 1);
        let si = &r.intersections[0];
        assert!(si.energy.norm() < 1e-9);
        assert_eq!(si.multiplicity, 3);
        for (k, e) in si.k_solutions().iter().zip([PI / 3.0, PI, 5.0 * PI / 3.0]) {
            assert!((k - e).abs() < 1e-8);
        }
        assert_eq!(si.local.inward_count, 1);
        assert_eq!(si.ordering_indices, vec![2, 3, 4]);
        assert!(si.index_accounting_holds());
    }

    #[test]
    fn contacts_of_the_triple_point() {
        let m = extended_hn_gamma(-0.5).unwrap();
        let contacts = bz_agbz_intersections(&m).unwrap();
        assert_eq!(contacts.len(), 3);
        for (ct, e) in contacts.iter().zip([PI / 3.0, PI, 5.0 * PI / 3.0]) {
            assert!((ct.phi - e).abs() < 1e-8);
            assert!(ct.energy.norm() < 1e-9);
        }
    }
}
