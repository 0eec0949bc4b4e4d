use num_complex::Complex64;
use proptest::prelude::*;

use nhband::polyalg::{interpolate, poly_roots, resultant, resultant_scalar, sort_roots, MultiPoly, UniPoly};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn complex_in(r: f64) -> impl Strategy<Value = Complex64> {
    (-r..r, -r..r).prop_map(|(a, b)| c(a, b))
}

fn well_separated(roots: &[Complex64], gap: f64) -> bool {
    roots
        .iter()
        .enumerate()
        .all(|(i, a)| roots[i + 1..].iter().all(|b| (a - b).norm() > gap))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // Res(a prod(x - r_i), b prod(x - s_j)) = a^m b^n prod(r_i - s_j).
    #[test]
    fn resultant_matches_root_product(
        rs in prop::collection::vec(complex_in(1.5), 1..5),
        ss in prop::collection::vec(complex_in(1.5), 1..5),
        a in complex_in(2.0),
        b in complex_in(2.0),
    ) {
        prop_assume!(a.norm() > 0.2 && b.norm() > 0.2);
        let f = UniPoly::from_roots(&rs, a);
        let g = UniPoly::from_roots(&ss, b);
        let mut expected = a.powi(ss.len() as i32) * b.powi(rs.len() as i32);
        for r in &rs {
            for s in &ss {
                expected *= r - s;
            }
        }
        let got = resultant_scalar(&f, &g).unwrap();
        let scale = a.norm().powi(ss.len() as i32) * b.norm().powi(rs.len() as i32)
            * 4f64.powi((rs.len() * ss.len()) as i32);
        prop_assert!((got - expected).norm() <= 1e-10 * scale, "{got} vs {expected}");
    }

    #[test]
    fn roots_are_recovered(
        rs in prop::collection::vec(complex_in(2.0), 1..9),
        lead in complex_in(3.0),
    ) {
        prop_assume!(lead.norm() > 0.1 && well_separated(&rs, 0.05));
        let p = UniPoly::from_roots(&rs, lead);
        let found = poly_roots(&p, 1e-12).unwrap();
        prop_assert_eq!(found.len(), rs.len());
        for r in &rs {
            let d = found.iter().map(|f| (f - r).norm()).fold(f64::INFINITY, f64::min);
            prop_assert!(d < 1e-8, "root {r} missed by {d}");
        }
        let sorted = sort_roots(found.clone());
        prop_assert_eq!(sorted, found);
    }

    #[test]
    fn interpolation_recovers_coefficients(
        coeffs in prop::collection::vec(complex_in(1.0), 12),
        rx in 0.5f64..2.0,
        ry in 0.5f64..2.0,
    ) {
        // Degree bounds (3, 2) in two variables.
        let terms: Vec<(Vec<u32>, Complex64)> = coeffs
            .iter()
            .enumerate()
            .map(|(k, &v)| (vec![(k / 3) as u32, (k % 3) as u32], v))
            .collect();
        let p = MultiPoly::from_terms(&["x", "y"], terms.clone());
        let got = interpolate(&[3, 2], &[rx, ry], |pt| p.eval(pt));
        for (e, v) in terms {
            let g = got.iter().find(|(ge, _)| *ge == e).map_or(c(0.0, 0.0), |t| t.1);
            prop_assert!((g - v).norm() < 1e-11, "{e:?}: {g} vs {v}");
        }
    }

    // Eliminating y and then specializing x agrees with specializing first.
    #[test]
    fn resultant_commutes_with_specialization(
        fc in prop::collection::vec(complex_in(1.0), 6),
        gc in prop::collection::vec(complex_in(1.0), 6),
        x in complex_in(1.2),
    ) {
        let vars = ["x", "y"];
        let build = |cs: &[Complex64]| {
            MultiPoly::from_terms(
                &vars,
                cs.iter().enumerate().map(|(k, &v)| (vec![(k % 2) as u32, (k / 2) as u32], v)),
            )
        };
        let f = build(&fc);
        let g = build(&gc);
        prop_assume!(f.degree_in(1) == 2 && g.degree_in(1) == 2);
        let lf = fc[4] + fc[5] * x;
        let lg = gc[4] + gc[5] * x;
        prop_assume!(lf.norm() > 0.1 && lg.norm() > 0.1);
        let r = resultant(&f, &g, 1).unwrap();
        let lhs = r.eval(&[x, c(0.0, 0.0)]);
        let rhs = resultant_scalar(&f.partial_eval(1, &[x, c(0.0, 0.0)]), &g.partial_eval(1, &[x, c(0.0, 0.0)])).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-9 * (1.0 + rhs.norm()), "{lhs} vs {rhs}");
    }
}

#[test]
fn zero_polynomial_is_rejected() {
    assert!(poly_roots(&UniPoly::zero(), 1e-12).is_err());
}
