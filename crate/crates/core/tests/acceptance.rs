//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test -p nhband --test acceptance`.

mod common;

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use common::{c, energy_off_spectrum, presets, random_model, rng, spectrum_samples};
use num_complex::Complex64;
use rand::Rng;

use nhband::gbz::{
    adjacent_labels, agbz_sample_adaptive, agbz_sample_theta, default_theta_grid, gbz_extract,
    ordered_roots, sub_boundary_zero_count, DEFAULT_TIE_TOL,
};
use nhband::intersect::{find_intersections, verify_correspondence, DEFAULT_TOL_E};
use nhband::model::{extended_hn_gamma, extended_hn_real, nfold_construct, nfold_phases, nh_ssh_real, LaurentPoly};
use nhband::spectra::{hausdorff, obc_finite, obc_thermodynamic, pbc_spectrum};
use nhband::topology::{band_velocity, winding_bz, winding_contour, winding_raster, BBox, Contour};

const CIRCLE_TOL: f64 = 1e-6;
const E0_TOL: f64 = 1e-9;
const K_TOL: f64 = 1e-8;
const CHIRAL_TOL: f64 = 1e-8;
const OBC_TOL: f64 = 1e-8;
const RASTER: usize = 200;
const SSH_CORRESPONDENCE_BUDGET_S: f64 = 300.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn circ_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

fn nearest(set: &[Complex64], z: Complex64) -> f64 {
    set.iter().map(|s| (s - z).norm()).fold(f64::INFINITY, f64::min)
}

/// Largest deviation of standard Hatano-Nelson aGBZ samples from `radius(t1, t_-1)`.
fn hn_circle_deviation(radius: impl Fn(f64, f64) -> f64) -> f64 {
    let mut r = rng(101);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let t1 = r.random_range(0.2..3.0);
        let tm1 = r.random_range(0.2..3.0);
        let m = extended_hn_real(0.0, tm1, t1, 0.0).unwrap();
        let pts = agbz_sample_theta(&m, &default_theta_grid(180)).unwrap();
        let rad = radius(t1, tm1);
        for p in pts {
            worst = worst.max((p.beta.norm() - rad).abs());
        }
    }
    worst
}

fn c1_literal() -> Outcome {
    let worst = hn_circle_deviation(|t1, tm1| (t1 / tm1).sqrt());
    outcome(worst < CIRCLE_TOL, format!("radius sqrt(t1/t-1): max deviation {worst:.3e}"))
}

fn c1_derived() -> Outcome {
    let worst = hn_circle_deviation(|t1, tm1| (tm1 / t1).sqrt());
    outcome(worst < CIRCLE_TOL, format!("radius sqrt(t-1/t1): max deviation {worst:.3e}"))
}

fn c2() -> Outcome {
    let m = extended_hn_real(0.5, 1.5, 0.5, 1.5).unwrap();
    let report = match find_intersections(&m, 1024, DEFAULT_TOL_E) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    if report.intersections.len() != 1 {
        return outcome(false, format!("{} intersections", report.intersections.len()));
    }
    let si = &report.intersections[0];
    let ks = si.k_solutions();
    let k_err = ks
        .iter()
        .zip([PI / 3.0, PI, 5.0 * PI / 3.0])
        .map(|(k, e)| circ_dist(*k, e))
        .fold(0.0, f64::max);
    let unit = ordered_roots(&m.char_poly(), si.energy, DEFAULT_TIE_TOL)
        .map(|o| o.unit_modulus_indices(1e-6))
        .unwrap_or_default();
    let pass = si.energy.norm() < E0_TOL
        && si.multiplicity == 3
        && ks.len() == 3
        && k_err < K_TOL
        && unit == [2, 3, 4]
        && si.ordering_indices == [2, 3, 4];
    outcome(
        pass,
        format!(
            "|E0| = {:.1e}, n = {}, k error {k_err:.1e}, unit-modulus {unit:?}, predicted {:?}",
            si.energy.norm(),
            si.multiplicity,
            si.ordering_indices
        ),
    )
}

fn c3() -> Outcome {
    let expected = [(-0.3, vec![0, 1, 2]), (-0.5, vec![0, 1]), (-0.7, vec![-1, 0, 1])];
    let mut pass = true;
    let mut parts = Vec::new();
    for (g, want) in expected {
        let m = extended_hn_gamma(g).unwrap();
        let bbox = BBox::around(spectrum_samples(&m, 1024), 0.05);
        let got: Vec<i32> = match winding_raster(&m, bbox, RASTER, RASTER) {
            Ok(r) => r.defined_values().into_iter().collect(),
            Err(e) => return outcome(false, e.to_string()),
        };
        pass &= got == want;
        parts.push(format!("gamma {g}: {got:?}"));
    }
    outcome(pass, parts.join(", "))
}

fn c4() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, m) in presets() {
        let t = Instant::now();
        match verify_correspondence(&m, 1024, DEFAULT_TOL_E) {
            Ok(r) => {
                let secs = t.elapsed().as_secs_f64();
                let ok = r.pass && !r.contacts.is_empty() && (name != "ssh" || secs < SSH_CORRESPONDENCE_BUDGET_S);
                pass &= ok;
                parts.push(format!(
                    "{name}: {} intersections, {} contacts, {} violations, {secs:.2}s",
                    r.intersections.len(),
                    r.contacts.len(),
                    r.violations.len()
                ));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{name}: {e}"));
            }
        }
    }
    outcome(pass, parts.join("; "))
}

fn c5() -> Outcome {
    let mut r = rng(105);
    let mut mismatches = 0;
    for _ in 0..50 {
        let m = random_model(&mut r);
        let e = energy_off_spectrum(&m, &mut r, 1e-3);
        let a = winding_bz(&m, e);
        let b = winding_contour(&m, e, &Contour::unit_circle(), 256);
        if a.is_err() || a != b {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches} of 50 draws disagree"))
}

fn c6() -> Outcome {
    let mut r = rng(106);
    let mut bad = Vec::new();
    for (name, m) in presets() {
        let cp = m.char_poly();
        let samples = spectrum_samples(&m, 4096);
        let mut done = 0;
        while done < 20 {
            let k = r.random_range(0.0..2.0 * PI);
            let beta = Complex64::from_polar(1.0, k);
            let energies = m.energies_at(beta).unwrap();
            let e = energies[r.random_range(0..energies.len())];
            let v = band_velocity(&cp, beta, e);
            if v.norm() < 1e-3 {
                continue;
            }
            let dir = v / v.norm();
            // Stay clear of other branches so the probes straddle only this one.
            if samples.iter().any(|s| {
                let d = s - e;
                d.norm() < 0.1 && (d * dir.conj()).im.abs() > 0.5 * d.norm()
            }) {
                continue;
            }
            let normal = c(0.0, 1.0) * dir;
            let left = winding_bz(&m, e + normal * 1e-2);
            let right = winding_bz(&m, e - normal * 1e-2);
            match (left, right) {
                (Ok(l), Ok(rt)) if l - rt == 1 => {}
                other => bad.push(format!("{name} E = {e:.4}: {other:?}")),
            }
            done += 1;
        }
    }
    outcome(bad.is_empty(), if bad.is_empty() { "80 of 80 crossings".to_string() } else { bad.join("; ") })
}

fn c7() -> Outcome {
    let mut r = rng(107);
    let mut checks = 0;
    let mut bad = Vec::new();
    for (name, m) in presets() {
        let cp = m.char_poly();
        let pts = match agbz_sample_adaptive(&m, 720, 8) {
            Ok(p) => p,
            Err(e) => return outcome(false, format!("{name}: {e}")),
        };
        let labels = adjacent_labels(&pts);
        for _ in 0..20 {
            let e = energy_off_spectrum(&m, &mut r, 1e-3);
            for &i in &labels {
                checks += 1;
                match sub_boundary_zero_count(&pts, i, &cp, e) {
                    Ok(n) if n == i => {}
                    other => bad.push(format!("{name} label {i} E = {e:.4}: {other:?}")),
                }
            }
        }
    }
    outcome(
        bad.is_empty() && checks > 0,
        if bad.is_empty() { format!("{checks} of {checks} counts equal the label") } else { bad.join("; ") },
    )
}

fn c8() -> Outcome {
    let m = nh_ssh_real(1.0, 1.0, 0.2, 1.0).unwrap();
    let mut worst: f64 = 0.0;
    for l in [20, 40, 60] {
        let s = obc_finite(&m, l).unwrap().values;
        for e in &s {
            worst = worst.max(nearest(&s, -e));
        }
    }
    let pbc: Vec<Complex64> = pbc_spectrum(&m, 512).unwrap().energies().collect();
    let mut worst_pbc: f64 = 0.0;
    for e in &pbc {
        worst_pbc = worst_pbc.max(nearest(&pbc, -e));
    }
    outcome(
        worst < CHIRAL_TOL && worst_pbc < CHIRAL_TOL,
        format!("OBC pairing error {worst:.1e}, PBC {worst_pbc:.1e}"),
    )
}

fn c9() -> Outcome {
    let mut r = rng(109);
    let mut bad = Vec::new();
    let mut worst: f64 = 0.0;
    for n in 2..=4 {
        for _ in 0..5 {
            let phi = r.random_range(0.0..2.0 * PI);
            let mut z = || c(r.random_range(-0.3..0.3), r.random_range(-0.3..0.3));
            let q = LaurentPoly::new([(0, c(1.0, 0.0)), (1, z()), (-1, z()), (-2, z())]);
            let m = nfold_construct(n, phi, &q).unwrap();
            let report = match find_intersections(&m, 1024, DEFAULT_TOL_E) {
                Ok(rep) => rep,
                Err(e) => {
                    bad.push(format!("n = {n}, phi = {phi:.4}: {e}"));
                    continue;
                }
            };
            let Some(si) = report.intersections.iter().find(|s| s.energy.norm() < E0_TOL) else {
                bad.push(format!("n = {n}, phi = {phi:.4}: nothing at E = 0"));
                continue;
            };
            let ks = si.k_solutions();
            let expected = nfold_phases(n, phi);
            let err = ks.iter().zip(&expected).map(|(a, b)| circ_dist(*a, *b)).fold(0.0, f64::max);
            worst = worst.max(err);
            if si.multiplicity != n || ks.len() != n || err >= K_TOL {
                bad.push(format!("n = {n}, phi = {phi:.4}: multiplicity {}, k error {err:.1e}", si.multiplicity));
            }
        }
    }
    outcome(
        bad.is_empty(),
        if bad.is_empty() { format!("15 of 15 constructions, max k error {worst:.1e}") } else { bad.join("; ") },
    )
}

fn c10() -> Outcome {
    let m = extended_hn_real(0.0, 0.5, 2.0, 0.0).unwrap();
    let l = 20;
    let s = obc_finite(&m, l).unwrap().values;
    let worst = (1..=l)
        .map(|j| nearest(&s, c(2.0 * (j as f64 * PI / (l + 1) as f64).cos(), 0.0)))
        .fold(0.0, f64::max);
    let cp = m.char_poly();
    let pts = agbz_sample_theta(&m, &default_theta_grid(720)).unwrap();
    let thermo = obc_thermodynamic(&m, &gbz_extract(&pts, &cp)).unwrap().values;
    let dists: Vec<f64> = [20, 40, 60]
        .iter()
        .map(|&l| hausdorff(&obc_finite(&m, l).unwrap().values, &thermo))
        .collect();
    let monotone = dists.windows(2).all(|w| w[1] <= w[0]);
    outcome(
        worst < OBC_TOL && monotone,
        format!("L = 20 error {worst:.1e}; Hausdorff {:.3e}, {:.3e}, {:.3e}", dists[0], dists[1], dists[2]),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, &str, fn() -> Outcome); 11] = [
        ("C1", "circle law, stated radius", c1_literal),
        ("C1'", "circle law, derived radius", c1_derived),
        ("C2", "triple point golden values", c2),
        ("C3", "winding sets from rasters", c3),
        ("C4", "correspondence", c4),
        ("C5", "winding oracle equivalence", c5),
        ("C6", "crossing rule", c6),
        ("C7", "sub-boundary root counts", c7),
        ("C8", "chiral pairing", c8),
        ("C9", "n-fold constructions", c9),
        ("C10", "finite-size sanity", c10),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        let t = Instant::now();
        let o = run();
        let secs = t.elapsed().as_secs_f64();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{id:<4} {:<4} {name:<28} {secs:>7.2}s  {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
