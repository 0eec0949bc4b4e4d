//! Dense complex eigenvalue and determinant helpers on top of `nalgebra`.

use nalgebra::DMatrix;
use num_complex::Complex64;

const SCHUR_EPS: f64 = 1e-15;
const SCHUR_MAX_ITER: usize = 10_000;

/// Diagonal similarity scaling (Parlett-Reinsch) so that row and column norms
/// are comparable. Eigenvalues are unchanged; rounding in the subsequent Schur
/// decomposition is much smaller for strongly non-normal matrices.
pub fn balance(m: &mut DMatrix<Complex64>) {
    let n = m.nrows();
    const RADIX: f64 = 2.0;
    let mut converged = false;
    let mut sweeps = 0;
    while !converged && sweeps < 100 {
        converged = true;
        sweeps += 1;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += m[(j, i)].norm();
                    r += m[(i, j)].norm();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            let mut cc = c;
            while cc < g {
                f *= RADIX;
                cc *= RADIX * RADIX;
            }
            g = r * RADIX;
            while cc > g {
                f /= RADIX;
                cc /= RADIX * RADIX;
            }
            if (cc + r / f) < 0.95 * s * f && (f - 1.0).abs() > 0.0 {
                converged = false;
                for j in 0..n {
                    m[(i, j)] /= f;
                }
                for j in 0..n {
                    m[(j, i)] *= f;
                }
            }
        }
    }
}

/// Eigenvalues of a general complex matrix, balanced first. Returns `None` if
/// the Schur iteration fails to converge.
pub fn eigenvalues(m: &DMatrix<Complex64>) -> Option<Vec<Complex64>> {
    let n = m.nrows();
    match n {
        0 => return Some(Vec::new()),
        1 => return Some(vec![m[(0, 0)]]),
        2 => return Some(eigenvalues_2x2(m)),
        _ => {}
    }
    let mut a = m.clone();
    balance(&mut a);
    // Shifted QR can stall on spectra symmetric about the origin; retrying
    // with a complex diagonal shift breaks the symmetry.
    let norm = a.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    for attempt in 0..4 {
        let sigma = Complex64::new(0.1234, 0.0741) * (attempt as f64 * norm);
        let shifted = &a + DMatrix::identity(n, n) * sigma;
        if let Some(schur) = nalgebra::Schur::try_new(shifted, SCHUR_EPS, SCHUR_MAX_ITER) {
            let (_, t) = schur.unpack();
            return Some((0..n).map(|i| t[(i, i)] - sigma).collect());
        }
    }
    None
}

fn eigenvalues_2x2(m: &DMatrix<Complex64>) -> Vec<Complex64> {
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let half_tr = (a + d) * 0.5;
    let disc = ((a - d) * 0.5).powi(2) + b * c;
    let s = disc.sqrt();
    let e1 = half_tr + s;
    let e2 = half_tr - s;
    // The root of larger magnitude is accurate; recover the other from det.
    let det = a * d - b * c;
    if e1.norm() >= e2.norm() && e1.norm() > 0.0 {
        vec![e1, det / e1]
    } else if e2.norm() > 0.0 {
        vec![det / e2, e2]
    } else {
        vec![e1, e2]
    }
}

pub fn determinant(m: &DMatrix<Complex64>) -> Complex64 {
    if m.nrows() == 0 {
        return Complex64::new(1.0, 0.0);
    }
    m.clone().lu().determinant()
}

/// Sorts complex values by (Re, Im), the canonical order for emitted spectra.
pub fn sort_re_im(values: &mut [Complex64]) {
    values.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.im.partial_cmp(&b.im).unwrap_or(std::cmp::Ordering::Equal))
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hatano_nelson_chain_matches_cosine_band() {
        let l = 20;
        let mut m = DMatrix::<Complex64>::zeros(l, l);
        for i in 0..l - 1 {
            m[(i, i + 1)] = Complex64::new(2.0, 0.0);
            m[(i + 1, i)] = Complex64::new(0.5, 0.0);
        }
        let mut e = eigenvalues(&m).unwrap();
        sort_re_im(&mut e);
        for (j, v) in e.iter().enumerate() {
            let expect = 2.0 * ((l - j) as f64 * std::f64::consts::PI / (l + 1) as f64).cos();
            assert!((v - expect).norm() < 1e-10, "{v} vs {expect}");
        }
    }

    #[test]
    fn two_by_two_closed_form() {
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.0, 0.0),
                Complex64::new(2.0, 1.0),
                Complex64::new(-1.0, 0.5),
                Complex64::new(0.0, 3.0),
            ],
        );
        let e = eigenvalues(&m).unwrap();
        for v in e {
            let shifted = &m - DMatrix::identity(2, 2) * v;
            assert!(determinant(&shifted).norm() < 1e-12);
        }
    }

    #[test]
    fn symmetric_zero_diagonal_converges() {
        let c = |x: f64| Complex64::new(x, 0.0);
        let m = DMatrix::from_row_slice(
            3,
            3,
            &[c(0.), c(1.), c(0.), c(1.), c(0.), c(1.), c(0.), c(1.), c(0.)],
        );
        let mut e = eigenvalues(&m).unwrap();
        sort_re_im(&mut e);
        let s = 2f64.sqrt();
        for (v, x) in e.iter().zip([-s, 0.0, s]) {
            assert!((v - c(x)).norm() < 1e-13);
        }
    }

    #[test]
    fn balancing_preserves_spectrum() {
        let mut m = DMatrix::<Complex64>::zeros(3, 3);
        m[(0, 1)] = Complex64::new(1e6, 0.0);
        m[(1, 2)] = Complex64::new(1e-6, 0.0);
        m[(2, 0)] = Complex64::new(1.0, 0.0);
        m[(1, 1)] = Complex64::new(0.5, 0.0);
        let before = determinant(&m);
        let mut b = m.clone();
        balance(&mut b);
        assert!((determinant(&b) - before).norm() < 1e-9 * before.norm().max(1.0));
    }
}
