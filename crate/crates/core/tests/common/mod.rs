#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nhband::model::{extended_hn_gamma, nh_ssh_real, LaurentPoly, Model, MultiBandModel, OneBandModel};
use nhband::spectra::pbc_spectrum;
use nhband::topology::BBox;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// The three extended Hatano-Nelson chains and the SSH chain used throughout.
pub fn presets() -> Vec<(&'static str, Model)> {
    vec![
        ("ehn-0.3", extended_hn_gamma(-0.3).unwrap()),
        ("ehn-0.5", extended_hn_gamma(-0.5).unwrap()),
        ("ehn-0.7", extended_hn_gamma(-0.7).unwrap()),
        ("ssh", nh_ssh_real(1.0, 1.0, 0.2, 1.0).unwrap()),
    ]
}

fn random_complex(rng: &mut ChaCha8Rng, r: f64) -> Complex64 {
    c(rng.random_range(-r..r), rng.random_range(-r..r))
}

/// One band with hops in `-2..=2`, complex amplitudes of order one.
pub fn random_one_band(rng: &mut ChaCha8Rng) -> Model {
    let mut terms = vec![(-1, random_complex(rng, 1.5)), (1, random_complex(rng, 1.5))];
    for n in [-2, 0, 2] {
        if rng.random_bool(0.5) {
            terms.push((n, random_complex(rng, 1.0)));
        }
    }
    Model::OneBand(OneBandModel::new(LaurentPoly::new(terms)).unwrap())
}

pub fn random_ssh(rng: &mut ChaCha8Rng) -> Model {
    let mut p = || rng.random_range(0.2..1.5);
    nh_ssh_real(p(), p(), p(), p()).unwrap()
}

/// Two bands with nearest-neighbour entries and random on-site terms.
pub fn random_two_band(rng: &mut ChaCha8Rng) -> Model {
    let entries = (0..4)
        .map(|_| {
            LaurentPoly::new([
                (-1, random_complex(rng, 1.0)),
                (0, random_complex(rng, 1.0)),
                (1, random_complex(rng, 1.0)),
            ])
        })
        .collect();
    Model::MultiBand(MultiBandModel::new(2, entries).unwrap())
}

pub fn random_model(rng: &mut ChaCha8Rng) -> Model {
    match rng.random_range(0..3) {
        0 => random_one_band(rng),
        1 => random_ssh(rng),
        _ => random_two_band(rng),
    }
}

pub fn spectrum_samples(model: &Model, num_k: usize) -> Vec<Complex64> {
    pbc_spectrum(model, num_k).unwrap().energies().collect()
}

/// A uniform point of the spectrum's bounding box kept at least `gap` away
/// from a dense sampling of the spectrum.
pub fn energy_off_spectrum(model: &Model, rng: &mut ChaCha8Rng, gap: f64) -> Complex64 {
    let samples = spectrum_samples(model, 4096);
    let bbox = BBox::around(samples.iter().copied(), 0.2);
    loop {
        let e = c(
            rng.random_range(bbox.re_min..bbox.re_max),
            rng.random_range(bbox.im_min..bbox.im_max),
        );
        if samples.iter().all(|s| (s - e).norm() > gap) {
            return e;
        }
    }
}
