mod common;

use common::{energy_off_spectrum, presets, rng};
use num_complex::Complex64;
use rand::Rng;

use nhband::gbz::{
    adjacent_labels, agbz_implicit, agbz_sample_adaptive, agbz_sample_theta, default_theta_grid,
    gbz_extract, sub_boundary_zero_count, verify_pair, AgbzPoint, DEFAULT_TIE_TOL,
};
use nhband::model::extended_hn_real;
use nhband::spectra::{hausdorff, obc_finite, obc_thermodynamic};

fn has_near(points: &[AgbzPoint], beta: Complex64, tol: f64) -> bool {
    points.iter().any(|p| (p.beta - beta).norm() <= tol * beta.norm().max(1.0))
}

#[test]
fn samples_are_genuine_ties() {
    for (name, m) in presets() {
        let cp = m.char_poly();
        let pts = agbz_sample_theta(&m, &default_theta_grid(180)).unwrap();
        assert!(!pts.is_empty(), "{name}");
        for pt in &pts {
            assert!(cp.eval(pt.beta, pt.energy).norm() <= 1e-8 * cp.eval_scale(pt.beta, pt.energy));
            let partner = pt.beta * Complex64::from_polar(1.0, pt.theta);
            assert_eq!(verify_pair(&cp, pt.beta, partner, pt.energy, DEFAULT_TIE_TOL), Some(pt.label), "{name}");
            assert!(pt.label.1 > pt.label.0);
        }
    }
}

#[test]
fn real_models_have_conjugation_symmetric_agbz() {
    for (name, m) in presets() {
        let pts = agbz_sample_theta(&m, &default_theta_grid(360)).unwrap();
        for pt in &pts {
            assert!(has_near(&pts, pt.beta.conj(), 1e-7), "{name}: conjugate of {} missing", pt.beta);
        }
    }
}

#[test]
fn hatano_nelson_agbz_is_the_skin_circle() {
    let mut r = rng(21);
    for _ in 0..10 {
        let t1 = r.random_range(0.2..3.0);
        let tm1 = r.random_range(0.2..3.0);
        let m = extended_hn_real(0.0, tm1, t1, 0.0).unwrap();
        let pts = agbz_sample_theta(&m, &default_theta_grid(90)).unwrap();
        assert!(!pts.is_empty());
        let radius = (tm1 / t1).sqrt();
        for pt in &pts {
            assert!((pt.beta.norm() - radius).abs() < 1e-9);
            assert_eq!(pt.label, (1, 2));
        }
    }
}

#[test]
fn sub_boundaries_enclose_their_label_count() {
    let mut r = rng(22);
    for (name, m) in presets() {
        let cp = m.char_poly();
        let pts = agbz_sample_adaptive(&m, 720, 8).unwrap();
        let labels = adjacent_labels(&pts);
        assert!(!labels.is_empty());
        for _ in 0..20 {
            let e = energy_off_spectrum(&m, &mut r, 1e-3);
            for &i in &labels {
                assert_eq!(sub_boundary_zero_count(&pts, i, &cp, e).unwrap(), i, "{name}, label {i}, E = {e}");
            }
        }
    }
}

#[test]
fn implicit_curve_vanishes_on_sampled_points() {
    for (name, m) in presets() {
        let curve = agbz_implicit(&m).unwrap();
        let pts = agbz_sample_theta(&m, &default_theta_grid(120)).unwrap();
        for pt in &pts {
            let rel = curve.eval(pt.beta).abs() / curve.eval_scale(pt.beta);
            assert!(rel < 1e-6, "{name}: F = {rel:e} at {}", pt.beta);
            let direct = curve.eval_direct(pt.beta).abs() / curve.eval_scale(pt.beta);
            assert!(direct < 1e-6, "{name}: direct F = {direct:e}");
        }
        // Off the curve F is clearly nonzero.
        let off = Complex64::new(0.123, 0.456);
        if pts.iter().all(|p| (p.beta - off).norm() > 1e-2) {
            assert!(curve.eval(off).abs() / curve.eval_scale(off) > 1e-6, "{name}");
        }
    }
}

#[test]
fn gbz_points_reproduce_long_open_chains() {
    let m = extended_hn_real(0.0, 0.5, 2.0, 0.0).unwrap();
    let cp = m.char_poly();
    let pts = agbz_sample_theta(&m, &default_theta_grid(720)).unwrap();
    let gbz = gbz_extract(&pts, &cp);
    assert_eq!(gbz.len(), pts.len());
    let thermo = obc_thermodynamic(&m, &gbz).unwrap().values;
    let mut last = f64::INFINITY;
    for l in [20, 40, 60] {
        let d = hausdorff(&obc_finite(&m, l).unwrap().values, &thermo);
        assert!(d <= last + 1e-12, "L = {l}: {d} > {last}");
        last = d;
    }
}
