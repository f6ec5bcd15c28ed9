use proptest::prelude::*;
use tpspline::odo::Odo;
use tpspline::ppe::Ppe;
use tpspline::scenarios::{random_spline, SplineShape};
use tpspline::spline::{Domain, SeminormVariant, TensorSpline};

fn spline(seed: u64, n1: usize, n2: usize) -> TensorSpline {
    let shape = SplineShape {
        k: 5,
        k1: 3,
        k2: 3,
        null: true,
    };
    random_spline(
        seed,
        Odo::derivative(n1).unwrap(),
        Odo::derivative(n2).unwrap(),
        Domain::unit(),
        shape,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn seminorm_is_absolutely_homogeneous(seed in 0u64..10_000, e in -6i32..6, neg in any::<bool>()) {
        let s = spline(seed, 1, 2);
        let c = if neg { -(2f64.powi(e)) } else { 2f64.powi(e) };
        let v = SeminormVariant::Causal;
        prop_assert_eq!(s.scaled(c).seminorm(v), c.abs() * s.seminorm(v));
    }

    #[test]
    fn components_resum(seed in 0u64..10_000, t1 in -0.5f64..1.5, t2 in -0.5f64..1.5) {
        let s = spline(seed, 2, 1);
        let sum: f64 = s.decompose().iter().map(|p| p.eval(t1, t2)).sum();
        prop_assert!((sum - s.eval(t1, t2)).abs() <= 1e-12);
    }

    #[test]
    fn canonicalization_is_idempotent(seed in 0u64..10_000) {
        let c = spline(seed, 2, 2).canonicalize().unwrap();
        prop_assert_eq!(c.canonicalize().unwrap(), c);
    }

    #[test]
    fn bump_mass_matches_beta_function(lo in -2.0f64..2.0, w in 0.05f64..3.0, k in 0usize..7) {
        // ∫ u^k (w−u)^k = w^{2k+1} (k!)² / (2k+1)!
        let fact = |n: usize| (1..=n).map(|i| i as f64).product::<f64>();
        let want = w.powi(2 * k as i32 + 1) * fact(k).powi(2) / fact(2 * k + 1);
        let got = Ppe::bump(lo, lo + w, k, 0).integral().unwrap();
        prop_assert!((got - want).abs() <= 1e-14 * want * 2f64.powi(k as i32));
    }
}
