mod common;

use std::f64::consts::PI;

use common::{c, presets, random_model, random_one_band, random_ssh, rng};
use num_complex::Complex64;
use rand::Rng;

use nhband::linalg;
use nhband::model::{Boundary, Model};
use nhband::polyalg::poly_roots;
use nhband::spectra::{hausdorff, obc_finite, pbc_spectrum};

fn nearest(set: &[Complex64], z: Complex64) -> f64 {
    set.iter().map(|s| (s - z).norm()).fold(f64::INFINITY, f64::min)
}

#[test]
fn char_poly_vanishes_exactly_on_bloch_eigenvalues() {
    let mut r = rng(11);
    for _ in 0..30 {
        let m = random_model(&mut r);
        let cp = m.char_poly();
        let beta = Complex64::from_polar(r.random_range(0.5..2.0), r.random_range(0.0..2.0 * PI));
        let eig = m.energies_at(beta).unwrap();
        for &e in &eig {
            assert!(cp.eval(beta, e).norm() <= 1e-10 * cp.eval_scale(beta, e), "P({beta}, {e}) != 0");
        }
        let mut roots = poly_roots(&cp.in_energy(beta), 1e-12).unwrap();
        linalg::sort_re_im(&mut roots);
        assert_eq!(roots.len(), eig.len());
        for z in &roots {
            assert!(nearest(&eig, *z) < 1e-8);
        }
        // Away from the spectrum P is not small.
        let off = eig[0] + c(10.0, 10.0);
        assert!(cp.eval(beta, off).norm() > 1e-6 * cp.eval_scale(beta, off));
    }
}

#[test]
fn real_hoppings_give_conjugate_symmetric_bloch_matrices() {
    let mut r = rng(12);
    let mut models = presets();
    models.extend((0..5).map(|_| ("ssh-random", random_ssh(&mut r))));
    for (name, m) in models {
        for _ in 0..10 {
            let beta = Complex64::from_polar(r.random_range(0.3..3.0), r.random_range(0.0..2.0 * PI));
            let a = m.bloch_eval(beta.conj()).unwrap();
            let b = m.bloch_eval(beta).unwrap().map(|z| z.conj());
            assert!((a - b).norm() < 1e-12, "{name}");
        }
    }
}

#[test]
fn periodic_chain_matches_bloch_samples() {
    let l = 60;
    let mut r = rng(13);
    let mut models: Vec<Model> = presets().into_iter().map(|p| p.1).collect();
    models.push(random_one_band(&mut r));
    for m in models {
        let h = m.real_space_hamiltonian(l, Boundary::Periodic).unwrap();
        let eig = linalg::eigenvalues(&h).unwrap();
        let bloch: Vec<Complex64> = (0..l)
            .flat_map(|j| m.energies_at(Complex64::from_polar(1.0, 2.0 * PI * j as f64 / l as f64)).unwrap())
            .collect();
        assert_eq!(eig.len(), bloch.len());
        assert!(hausdorff(&eig, &bloch) < 1e-8);
    }
}

#[test]
fn ssh_spectra_are_chiral() {
    let m = presets().pop().unwrap().1;
    for l in [20, 40, 60] {
        let s = obc_finite(&m, l).unwrap().values;
        for e in &s {
            assert!(nearest(&s, -e) < 1e-8, "L = {l}: {e} unpaired");
        }
    }
    let pbc: Vec<Complex64> = pbc_spectrum(&m, 256).unwrap().energies().collect();
    for e in &pbc {
        assert!(nearest(&pbc, -e) < 1e-10);
    }
}

#[test]
fn refining_k_keeps_coarse_samples() {
    for (_, m) in presets() {
        let coarse = pbc_spectrum(&m, 128).unwrap();
        let fine = pbc_spectrum(&m, 256).unwrap();
        let fine_set: Vec<Complex64> = fine.energies().collect();
        for e in coarse.energies() {
            assert!(nearest(&fine_set, e) < 1e-12);
        }
        // Every fine sample sits close to the coarse curve.
        let coarse_set: Vec<Complex64> = coarse.energies().collect();
        let spacing = coarse
            .curves
            .iter()
            .flat_map(|c| c.samples.windows(2).map(|w| (w[1].1 - w[0].1).norm()))
            .fold(0.0, f64::max);
        assert!(hausdorff(&coarse_set, &fine_set) <= spacing);
    }
}

#[test]
fn hatano_nelson_open_chain_is_similar_to_hermitian() {
    let m = nhband::model::extended_hn_real(0.0, 0.5, 2.0, 0.0).unwrap();
    let l = 20;
    let s = obc_finite(&m, l).unwrap().values;
    for j in 1..=l {
        let e = c(2.0 * (j as f64 * PI / (l + 1) as f64).cos(), 0.0);
        assert!(nearest(&s, e) < 1e-8);
    }
}
