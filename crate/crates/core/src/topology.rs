//! Spectral winding numbers of reference energies.
//!
//! `winding_bz` counts zeros of `P(., E_b)` inside the unit circle minus the
//! pole order; `winding_contour` integrates the phase of `det(h(beta) - E_b)`
//! along an explicit loop and serves as an independent check.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::gbz::{ordered_roots, DEFAULT_TIE_TOL};
use crate::linalg;
use crate::model::{CharPoly, Model, ModelError};
use crate::polyalg::PolyError;
use crate::spectra::{pbc_spectrum, SpectraError};

/// Roots whose modulus is within this distance of one count as on the
/// Brillouin zone.
pub const GUARD_TOL: f64 = 1e-4;
pub const MIN_RASTER: usize = 16;
const MAX_CONTOUR_SAMPLES: usize = 1 << 20;
const MAX_PHASE_STEP: f64 = PI / 4.0;
const INTEGER_SLACK: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("reference energy {energy} lies on or next to the spectrum")]
    OnSpectrum { energy: Complex64 },
    #[error("phase winding {value} is not near an integer after {samples} samples")]
    PhaseUnresolved { value: f64, samples: usize },
    #[error("raster resolution {nx}x{ny} is below {MIN_RASTER}x{MIN_RASTER}")]
    ResolutionTooSmall { nx: usize, ny: usize },
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
}

pub fn winding_bz(model: &Model, eb: Complex64) -> Result<i32, TopologyError> {
    winding_bz_cp(&model.char_poly(), eb)
}

/// Root-count winding for a precomputed characteristic polynomial.
pub fn winding_bz_cp(cp: &CharPoly, eb: Complex64) -> Result<i32, TopologyError> {
    winding_bz_guarded(cp, eb, GUARD_TOL)
}

/// [`winding_bz_cp`] with roots within `guard` of the unit circle treated as
/// lying on it.
pub fn winding_bz_guarded(cp: &CharPoly, eb: Complex64, guard: f64) -> Result<i32, TopologyError> {
    let ord = ordered_roots(cp, eb, DEFAULT_TIE_TOL)?;
    let inside = ord
        .count_inside_unit(guard)
        .map_err(|_| TopologyError::OnSpectrum { energy: eb })?;
    Ok(inside as i32 - cp.pole_order() as i32)
}

/// Closed loop in the beta plane, traversed counterclockwise for circles and
/// in vertex order for polygons.
#[derive(Clone, Debug, PartialEq)]
pub enum Contour {
    Circle { center: Complex64, radius: f64 },
    Polygon(Vec<Complex64>),
}

impl Contour {
    pub fn unit_circle() -> Self {
        Contour::Circle {
            center: Complex64::new(0.0, 0.0),
            radius: 1.0,
        }
    }

    /// Point at parameter `s in [0, 1)`.
    pub fn point(&self, s: f64) -> Complex64 {
        match self {
            Contour::Circle { center, radius } => center + Complex64::from_polar(*radius, 2.0 * PI * s),
            Contour::Polygon(v) => {
                let n = v.len();
                let x = s.rem_euclid(1.0) * n as f64;
                let i = (x.floor() as usize).min(n - 1);
                let f = x - i as f64;
                v[i] + (v[(i + 1) % n] - v[i]) * f
            }
        }
    }
}

/// Phase winding of `det(h(beta) - E_b)` along `contour`, starting from
/// `num_samples` uniform samples and doubling until no step turns by more
/// than `pi / 4`.
pub fn winding_contour(
    model: &Model,
    eb: Complex64,
    contour: &Contour,
    num_samples: usize,
) -> Result<i32, TopologyError> {
    let q = model.bands();
    let f = |beta: Complex64| -> Result<Complex64, TopologyError> {
        let h = model.bloch_eval(beta)?;
        let shifted = h - nalgebra::DMatrix::<Complex64>::identity(q, q) * eb;
        Ok(linalg::determinant(&shifted))
    };
    let mut n = num_samples.max(8);
    loop {
        let values: Vec<Complex64> = (0..n)
            .into_par_iter()
            .map(|j| f(contour.point(j as f64 / n as f64)))
            .collect::<Result<_, _>>()?;
        let max = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if values.iter().any(|v| v.norm() <= 1e-12 * max) {
            return Err(TopologyError::OnSpectrum { energy: eb });
        }
        let mut total = 0.0;
        let mut worst: f64 = 0.0;
        for j in 0..n {
            let step = (values[(j + 1) % n] / values[j]).arg();
            worst = worst.max(step.abs());
            total += step;
        }
        let w = total / (2.0 * PI);
        if worst < MAX_PHASE_STEP {
            let r = w.round();
            if (w - r).abs() > INTEGER_SLACK {
                return Err(TopologyError::PhaseUnresolved { value: w, samples: n });
            }
            return Ok(r as i32);
        }
        if n >= MAX_CONTOUR_SAMPLES {
            return Err(TopologyError::PhaseUnresolved { value: w, samples: n });
        }
        n *= 2;
    }
}

/// Phase of `E(k) - E_b` accumulated along each tracked band over one period,
/// in units of `2 pi`. Bands that swap at `k = 2 pi` give fractional values
/// whose sum over all bands is still an integer.
pub fn band_phase_windings(model: &Model, eb: Complex64, num_k: usize) -> Result<Vec<f64>, TopologyError> {
    let spec = pbc_spectrum(model, num_k)?;
    let mut out = Vec::with_capacity(spec.curves.len());
    for c in &spec.curves {
        let next_start = spec.curves[c.successor].samples[0].1;
        let mut pts: Vec<Complex64> = c.samples.iter().map(|s| s.1 - eb).collect();
        pts.push(next_start - eb);
        if pts.iter().any(|z| z.norm() == 0.0) {
            return Err(TopologyError::OnSpectrum { energy: eb });
        }
        let total: f64 = pts.windows(2).map(|w| (w[1] / w[0]).arg()).sum();
        out.push(total / (2.0 * PI));
    }
    Ok(out)
}

/// `dE/dk` along the band through `(beta = e^{ik}, E)`, from implicit
/// differentiation of `P(beta, E) = 0`.
pub fn band_velocity(cp: &CharPoly, beta: Complex64, energy: Complex64) -> Complex64 {
    let (pb, pe) = cp.gradient(beta, energy);
    -pb * Complex64::new(0.0, 1.0) * beta / pe
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BBox {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl BBox {
    /// Smallest box holding `points`, padded by `margin` times its larger side.
    pub fn around(points: impl IntoIterator<Item = Complex64>, margin: f64) -> Self {
        let mut b = BBox {
            re_min: f64::INFINITY,
            re_max: f64::NEG_INFINITY,
            im_min: f64::INFINITY,
            im_max: f64::NEG_INFINITY,
        };
        for z in points {
            b.re_min = b.re_min.min(z.re);
            b.re_max = b.re_max.max(z.re);
            b.im_min = b.im_min.min(z.im);
            b.im_max = b.im_max.max(z.im);
        }
        let pad = margin * (b.re_max - b.re_min).max(b.im_max - b.im_min);
        BBox {
            re_min: b.re_min - pad,
            re_max: b.re_max + pad,
            im_min: b.im_min - pad,
            im_max: b.im_max + pad,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindingRaster {
    pub bbox: BBox,
    pub nx: usize,
    pub ny: usize,
    /// Row-major with `iy` outer; `None` where the cell center is on the spectrum.
    pub values: Vec<Option<i32>>,
}

impl WindingRaster {
    pub fn center(&self, ix: usize, iy: usize) -> Complex64 {
        cell_center(&self.bbox, self.nx, self.ny, ix, iy)
    }

    pub fn get(&self, ix: usize, iy: usize) -> Option<i32> {
        self.values[iy * self.nx + ix]
    }

    pub fn defined_values(&self) -> BTreeSet<i32> {
        self.values.iter().flatten().copied().collect()
    }

    pub fn undefined_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }
}

fn cell_center(b: &BBox, nx: usize, ny: usize, ix: usize, iy: usize) -> Complex64 {
    let dx = (b.re_max - b.re_min) / nx as f64;
    let dy = (b.im_max - b.im_min) / ny as f64;
    Complex64::new(b.re_min + (ix as f64 + 0.5) * dx, b.im_min + (iy as f64 + 0.5) * dy)
}

/// Root-count winding at every cell center. Cells on the spectrum, or where
/// the root finder fails, are left undefined.
pub fn winding_raster(model: &Model, bbox: BBox, nx: usize, ny: usize) -> Result<WindingRaster, TopologyError> {
    if nx < MIN_RASTER || ny < MIN_RASTER {
        return Err(TopologyError::ResolutionTooSmall { nx, ny });
    }
    let cp = model.char_poly();
    let values = (0..nx * ny)
        .into_par_iter()
        .map(|idx| {
            let e = cell_center(&bbox, nx, ny, idx % nx, idx / nx);
            winding_bz_cp(&cp, e).ok()
        })
        .collect();
    Ok(WindingRaster { bbox, nx, ny, values })
}
