//! Property tests for the jet arithmetic layer.

use calabi::jets::{seed_point, Jet};
use proptest::prelude::*;

/// Quadratic polynomial jet in two variables from raw coefficients.
fn poly_jet(seeds: &[Jet], c: &[f64; 6]) -> Jet {
    let space = seeds[0].space().clone();
    let (x, y) = (&seeds[0], &seeds[1]);
    space.constant(c[0])
        + x.scaled(c[1])
        + y.scaled(c[2])
        + (x * x).scaled(c[3])
        + (x * y).scaled(c[4])
        + (y * y).scaled(c[5])
}

fn max_rel_diff(a: &Jet, b: &Jet) -> f64 {
    let scale = a.max_abs_coeff().max(b.max_abs_coeff()).max(1.0);
    a.coeffs()
        .iter()
        .zip(b.coeffs())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
        / scale
}

fn coeff() -> impl Strategy<Value = f64> {
    -2.0..2.0f64
}

proptest! {
    #[test]
    fn multiplication_commutes(
        u in -1.0..1.0f64,
        v in -1.0..1.0f64,
        ca in prop::array::uniform6(coeff()),
        cb in prop::array::uniform6(coeff()),
    ) {
        let seeds = seed_point(&[u, v], 4).unwrap();
        let a = poly_jet(&seeds, &ca);
        let b = poly_jet(&seeds, &cb);
        prop_assert!(max_rel_diff(&(&a * &b), &(&b * &a)) <= 1e-15);
    }

    #[test]
    fn multiplication_associates(
        u in -1.0..1.0f64,
        v in -1.0..1.0f64,
        ca in prop::array::uniform6(coeff()),
        cb in prop::array::uniform6(coeff()),
        cc in prop::array::uniform6(coeff()),
    ) {
        let seeds = seed_point(&[u, v], 4).unwrap();
        let a = poly_jet(&seeds, &ca);
        let b = poly_jet(&seeds, &cb);
        let c = poly_jet(&seeds, &cc);
        let left = (&a * &b) * &c;
        let right = &a * (&b * &c);
        prop_assert!(max_rel_diff(&left, &right) <= 1e-14);
    }

    #[test]
    fn exp_ln_round_trip(
        u in -0.8..0.8f64,
        v in -0.8..0.8f64,
        ca in prop::array::uniform6(coeff()),
        shift in 3.0..8.0f64,
    ) {
        let seeds = seed_point(&[u, v], 4).unwrap();
        // force a positive value part
        let f = poly_jet(&seeds, &ca) + seeds[0].space().constant(shift + 10.0);
        let back = f.ln().unwrap().exp();
        prop_assert!(max_rel_diff(&f, &back) <= 1e-13);
    }

    #[test]
    fn truncation_commutes_with_multiplication(
        u in -1.0..1.0f64,
        v in -1.0..1.0f64,
        ca in prop::array::uniform6(coeff()),
        cb in prop::array::uniform6(coeff()),
        order in 0usize..4,
    ) {
        let seeds = seed_point(&[u, v], 4).unwrap();
        let a = poly_jet(&seeds, &ca);
        let b = poly_jet(&seeds, &cb);
        let full = (&a * &b).truncated(order);
        let cut = a.truncated(order) * b.truncated(order);
        prop_assert!(max_rel_diff(&full, &cut) <= 1e-15);
    }

    #[test]
    fn derivative_extraction_matches_polynomial_calculus(
        u in -1.0..1.0f64,
        v in -1.0..1.0f64,
        ca in prop::array::uniform6(coeff()),
    ) {
        // f = c0 + c1 x + c2 y + c3 x^2 + c4 xy + c5 y^2; all derivatives by hand.
        let seeds = seed_point(&[u, v], 4).unwrap();
        let f = poly_jet(&seeds, &ca);
        let scale = ca.iter().fold(1.0f64, |m, c| m.max(c.abs()));
        let checks = [
            (vec![0, 0], ca[0] + ca[1] * u + ca[2] * v + ca[3] * u * u + ca[4] * u * v + ca[5] * v * v),
            (vec![1, 0], ca[1] + 2.0 * ca[3] * u + ca[4] * v),
            (vec![0, 1], ca[2] + ca[4] * u + 2.0 * ca[5] * v),
            (vec![2, 0], 2.0 * ca[3]),
            (vec![1, 1], ca[4]),
            (vec![0, 2], 2.0 * ca[5]),
            (vec![3, 0], 0.0),
            (vec![2, 2], 0.0),
        ];
        for (alpha, expected) in checks {
            let got = f.derivative(&alpha).unwrap();
            prop_assert!((got - expected).abs() <= 1e-13 * scale.max(1.0),
                "alpha {alpha:?}: {got} vs {expected}");
        }
    }
}
