use hybrid_scattering::expoly::ExpPoly;
use num_complex::Complex64;
use proptest::prelude::*;

fn term() -> impl Strategy<Value = (f64, Complex64)> {
    (-8.0f64..8.0, 0.2f64..2.0, -3.2f64..3.2).prop_map(|(g, r, phi)| (g, Complex64::from_polar(r, phi)))
}

fn poly() -> impl Strategy<Value = ExpPoly> {
    prop::collection::vec(term(), 1..6).prop_map(ExpPoly::new)
}

fn mass(p: &ExpPoly) -> f64 {
    p.terms().iter().map(|t| t.1.norm()).sum()
}

fn thetas(count: usize, seed: u64) -> Vec<f64> {
    // Weyl sequence over [-50, 50)
    let alpha = 0.5 * (5f64.sqrt() - 1.0);
    (0..count)
        .map(|n| (((n as f64 + seed as f64) * alpha).fract() - 0.5) * 100.0)
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn product_evaluates_pointwise(p in poly(), q in poly()) {
        let pq = p.multiply(&q);
        let scale = mass(&p) * mass(&q);
        for theta in thetas(1000, 1) {
            let lhs = pq.evaluate(theta);
            let rhs = p.evaluate(theta) * q.evaluate(theta);
            prop_assert!((lhs - rhs).norm() <= 1e-10 * scale);
        }
    }

    #[test]
    fn modulus_squared_evaluates_pointwise(p in poly()) {
        let m = p.modulus_squared();
        let scale = mass(&p).powi(2);
        for theta in thetas(1000, 2) {
            let z = m.evaluate(theta);
            prop_assert!((z - Complex64::new(p.evaluate(theta).norm_sqr(), 0.0)).norm() <= 1e-10 * scale);
        }
    }

    #[test]
    fn degrees_add_under_products(p in poly(), q in poly()) {
        let pq = p.multiply(&q);
        let lead = p.lead_coefficient().unwrap() * q.lead_coefficient().unwrap();
        prop_assume!(lead.norm() > 1e-6);
        prop_assert!((pq.degree().unwrap() - (p.degree().unwrap() + q.degree().unwrap())).abs() <= 1e-12);
        prop_assert!((pq.lead_coefficient().unwrap() - lead).norm() <= 1e-12 * lead.norm());
    }

    #[test]
    fn degree_of_sum_is_the_max(p in poly(), q in poly()) {
        let (dp, dq) = (p.degree().unwrap(), q.degree().unwrap());
        prop_assume!((dp - dq).abs() > 1e-9);
        let sum = &p + &q;
        prop_assert_eq!(sum.degree().unwrap(), dp.max(dq));
    }

    #[test]
    fn pointwise_equal_means_identical_terms(terms in prop::collection::vec(term(), 1..6), split in 0.1f64..0.9, order in any::<u64>()) {
        let p = ExpPoly::new(terms.clone());
        // the same function written with split coefficients in another order
        let mut pieces: Vec<(f64, Complex64)> = terms
            .iter()
            .flat_map(|&(g, a)| [(g, a * split), (g, a * (1.0 - split))])
            .collect();
        let len = pieces.len();
        pieces.rotate_left((order % len as u64) as usize);
        let q = ExpPoly::new(pieces);
        let n = p.terms().len();
        let scale = mass(&p).max(1.0);
        let equal = thetas(4 * n.max(1), 3)
            .into_iter()
            .all(|t| (p.evaluate(t) - q.evaluate(t)).norm() <= 1e-10 * scale);
        prop_assert!(equal);
        prop_assert_eq!(p.terms().len(), q.terms().len());
        for (a, b) in p.terms().iter().zip(q.terms()) {
            prop_assert_eq!(a.0, b.0);
            prop_assert!((a.1 - b.1).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn distinct_term_lists_differ_somewhere(p in poly(), shift in 0.01f64..1.0) {
        let q = ExpPoly::new(p.terms().iter().map(|&(g, a)| (g + shift, a)).collect());
        let n = p.terms().len() + q.terms().len();
        let differs = thetas(4 * n, 4)
            .into_iter()
            .any(|t| (p.evaluate(t) - q.evaluate(t)).norm() > 1e-8 * mass(&p));
        prop_assert!(differs);
    }
}
