//! Periodic-boundary band curves, finite open-chain spectra, and the
//! thermodynamic open-boundary spectrum obtained from GBZ points.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::gbz::{ordered_roots, AgbzPoint, DEFAULT_TIE_TOL, LOCATE_TOL};
use crate::linalg;
use crate::model::{Boundary, Model, ModelError};

pub const MIN_NUM_K: usize = 8;
/// Default cap on finite open-chain lengths; see [`obc_finite`].
pub const OBC_MAX_L: usize = 80;
/// Relative eigenvalue gap below which band continuation is flagged.
pub const TRACKING_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectraError {
    #[error("numK = {0} is below the minimum of {MIN_NUM_K}")]
    TooFewSamples(usize),
    #[error("chain length {l} exceeds the finite-size cap {cap}")]
    LengthAboveCap { l: usize, cap: usize },
    #[error("eigenvalue iteration did not converge")]
    EigenFailure,
    #[error("no eigenvalue of h(beta) at beta = {beta} has beta in its GBZ tie pair")]
    UnmatchedGbzPoint { beta: Complex64 },
    #[error("no GBZ points supplied")]
    NoGbzPoints,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum SpectraWarning {
    /// Two eigenvalues at momentum `k` lie closer than the tracking tolerance.
    BandTrackingAmbiguous { k: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumCurve {
    pub band: usize,
    /// `(k, E)` pairs sorted by `k in [0, 2pi)`.
    pub samples: Vec<(f64, Complex64)>,
    /// True when continuing past `k = 2pi` returns to this band's own start.
    pub closed: bool,
    /// Band whose `k = 0` sample continues this band past `k = 2pi`.
    pub successor: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PbcSpectrum {
    pub curves: Vec<SpectrumCurve>,
    pub warnings: Vec<SpectraWarning>,
}

impl PbcSpectrum {
    pub fn num_k(&self) -> usize {
        self.curves.first().map_or(0, |c| c.samples.len())
    }

    /// All sampled energies, band by band.
    pub fn energies(&self) -> impl Iterator<Item = Complex64> + '_ {
        self.curves.iter().flat_map(|c| c.samples.iter().map(|s| s.1))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ObcSource {
    Finite(usize),
    Thermodynamic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObcSpectrum {
    pub source: ObcSource,
    /// Sorted by (Re, Im).
    pub values: Vec<Complex64>,
}

pub fn k_grid(num_k: usize) -> Vec<f64> {
    (0..num_k).map(|j| 2.0 * PI * j as f64 / num_k as f64).collect()
}

/// Bloch eigenvalues on `numK` uniform momenta, continued band by band.
pub fn pbc_spectrum(model: &Model, num_k: usize) -> Result<PbcSpectrum, SpectraError> {
    if num_k < MIN_NUM_K {
        return Err(SpectraError::TooFewSamples(num_k));
    }
    let ks = k_grid(num_k);
    let raw: Vec<Vec<Complex64>> = ks
        .par_iter()
        .map(|&k| model.energies_at(Complex64::from_polar(1.0, k)))
        .collect::<Result<_, _>>()?;
    let q = model.bands();

    let mut warnings = Vec::new();
    let mut tracked: Vec<Vec<Complex64>> = Vec::with_capacity(num_k);
    for (j, vals) in raw.iter().enumerate() {
        if is_ambiguous(vals) {
            warnings.push(SpectraWarning::BandTrackingAmbiguous { k: ks[j] });
        }
        let next = match tracked.last() {
            None => vals.clone(),
            Some(prev) => {
                let perm = best_assignment(prev, vals);
                perm.iter().map(|&i| vals[i]).collect()
            }
        };
        tracked.push(next);
    }

    // Continuation past 2pi onto the k = 0 samples.
    let last = tracked.last().unwrap();
    let perm = best_assignment(last, &tracked[0]);

    let curves = (0..q)
        .map(|b| SpectrumCurve {
            band: b,
            samples: ks.iter().zip(&tracked).map(|(&k, e)| (k, e[b])).collect(),
            closed: perm[b] == b,
            successor: perm[b],
        })
        .collect();
    Ok(PbcSpectrum { curves, warnings })
}

fn is_ambiguous(vals: &[Complex64]) -> bool {
    for i in 0..vals.len() {
        for j in i + 1..vals.len() {
            let scale = vals[i].norm().max(vals[j].norm()).max(1.0);
            if (vals[i] - vals[j]).norm() < TRACKING_TOL * scale {
                return true;
            }
        }
    }
    false
}

/// `perm[b]` is the index into `next` continuing band `b` of `prev`,
/// minimizing the summed displacement.
fn best_assignment(prev: &[Complex64], next: &[Complex64]) -> Vec<usize> {
    let q = prev.len();
    if q <= 6 {
        let mut best = (f64::INFINITY, (0..q).collect::<Vec<_>>());
        let mut perm: Vec<usize> = (0..q).collect();
        permutations(&mut perm, 0, &mut |p| {
            let cost: f64 = p.iter().enumerate().map(|(b, &i)| (next[i] - prev[b]).norm()).sum();
            if cost < best.0 {
                best = (cost, p.to_vec());
            }
        });
        best.1
    } else {
        let mut used = vec![false; q];
        prev.iter()
            .map(|&e| {
                let i = (0..q)
                    .filter(|&i| !used[i])
                    .min_by(|&a, &b| {
                        (next[a] - e).norm().partial_cmp(&(next[b] - e).norm()).unwrap()
                    })
                    .unwrap();
                used[i] = true;
                i
            })
            .collect()
    }
}

fn permutations(p: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == p.len() {
        f(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permutations(p, k + 1, f);
        p.swap(k, i);
    }
}

/// Eigenvalues of the open chain of `l` cells, `l <= OBC_MAX_L`.
///
/// Beyond a few dozen cells the skin effect makes the open-chain matrix so
/// non-normal that double-precision eigenvalues are dominated by the
/// pseudospectrum; [`obc_finite_uncapped`] skips the cap.
pub fn obc_finite(model: &Model, l: usize) -> Result<ObcSpectrum, SpectraError> {
    if l > OBC_MAX_L {
        return Err(SpectraError::LengthAboveCap { l, cap: OBC_MAX_L });
    }
    obc_finite_uncapped(model, l)
}

pub fn obc_finite_uncapped(model: &Model, l: usize) -> Result<ObcSpectrum, SpectraError> {
    let h = model.real_space_hamiltonian(l, Boundary::Open)?;
    let mut values = linalg::eigenvalues(&h).ok_or(SpectraError::EigenFailure)?;
    linalg::sort_re_im(&mut values);
    Ok(ObcSpectrum {
        source: ObcSource::Finite(l),
        values,
    })
}

/// Energies of GBZ points. For several bands, the eigenvalue of `h(beta)` is
/// the one at which `beta` sits in the tie pair `(p, p + 1)`; when several
/// qualify, the one nearest the point's recorded energy wins.
pub fn obc_thermodynamic(model: &Model, points: &[AgbzPoint]) -> Result<ObcSpectrum, SpectraError> {
    if points.is_empty() {
        return Err(SpectraError::NoGbzPoints);
    }
    let cp = model.char_poly();
    let p = cp.pole_order();
    let mut values = points
        .par_iter()
        .map(|pt| -> Result<Complex64, SpectraError> {
            if let Some(m) = model.as_one_band() {
                return Ok(m.eval(pt.beta));
            }
            let candidates = model.energies_at(pt.beta)?;
            candidates
                .into_iter()
                .filter(|&e| {
                    ordered_roots(&cp, e, DEFAULT_TIE_TOL).is_ok_and(|ord| {
                        ord.locate(pt.beta, LOCATE_TOL).is_some_and(|idx| {
                            let g = ord.tie_group_of(idx);
                            g.start < p && g.end > p
                        })
                    })
                })
                .min_by(|a, b| {
                    (a - pt.energy).norm().partial_cmp(&(b - pt.energy).norm()).unwrap()
                })
                .ok_or(SpectraError::UnmatchedGbzPoint { beta: pt.beta })
        })
        .collect::<Result<Vec<_>, _>>()?;
    linalg::sort_re_im(&mut values);
    Ok(ObcSpectrum {
        source: ObcSource::Thermodynamic,
        values,
    })
}

/// Symmetric Hausdorff distance between two finite point sets.
pub fn hausdorff(a: &[Complex64], b: &[Complex64]) -> f64 {
    fn directed(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.par_iter()
            .map(|x| b.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min))
            .reduce(|| 0.0, f64::max)
    }
    directed(a, b).max(directed(b, a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{extended_hn_gamma, extended_hn_real, nh_ssh_real};

    #[test]
    fn one_band_samples_are_bloch_values() {
        let m = extended_hn_gamma(-0.3).unwrap();
        let s = pbc_spectrum(&m, 64).unwrap();
        assert_eq!(s.curves.len(), 1);
        assert!(s.curves[0].closed);
        assert!((s.curves[0].samples[0].1 - Complex64::new(4.0, 0.0)).norm() < 1e-14);
        let h = m.as_one_band().unwrap();
        for &(k, e) in &s.curves[0].samples {
            assert_eq!(e, h.eval(Complex64::from_polar(1.0, k)));
        }
    }

    #[test]
    fn triple_point_is_on_the_pbc_curve() {
        let m = extended_hn_gamma(-0.5).unwrap();
        let s = pbc_spectrum(&m, 64).unwrap();
        assert!(s.curves[0].samples[32].1.norm() < 1e-14);
    }

    #[test]
    fn too_few_samples() {
        let m = extended_hn_gamma(-0.5).unwrap();
        assert_eq!(pbc_spectrum(&m, 4), Err(SpectraError::TooFewSamples(4)));
    }

    #[test]
    fn ssh_bands_pair_up() {
        let m = nh_ssh_real(1.0, 1.0, 0.2, 1.0).unwrap();
        let s = pbc_spectrum(&m, 128).unwrap();
        assert_eq!(s.curves.len(), 2);
        let all: Vec<Complex64> = s.energies().collect();
        for e in &all {
            let nearest = all.iter().map(|f| (f + e).norm()).fold(f64::INFINITY, f64::min);
            assert!(nearest < 1e-12);
        }
    }

    #[test]
    fn finite_chain_cap() {
        let m = extended_hn_real(0.0, 0.5, 2.0, 0.0).unwrap();
        assert_eq!(
            obc_finite(&m, 81),
            Err(SpectraError::LengthAboveCap { l: 81, cap: 80 })
        );
        assert!(matches!(
            obc_finite(&m, 1),
            Err(SpectraError::Model(ModelError::TooSmallL { .. }))
        ));
        assert_eq!(obc_finite(&m, 20).unwrap().values.len(), 20);
    }

    #[test]
    fn hausdorff_basics() {
        let a = [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        let b = [Complex64::new(0.0, 0.0)];
        assert_eq!(hausdorff(&a, &b), 1.0);
        assert_eq!(hausdorff(&a, &a), 0.0);
    }
}
