use bullwhip_core::normal::inverse_cdf;
use proptest::prelude::*;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

fn standard() -> Normal {
    Normal::new(0.0, 1.0).unwrap()
}

proptest! {
    #[test]
    fn inverse_cdf_agrees_with_statrs(p in 1e-12f64..(1.0 - 1e-12)) {
        let z = inverse_cdf(p);
        let reference = standard().inverse_cdf(p);
        prop_assert!((z - reference).abs() <= 1e-8 * reference.abs().max(1.0), "p={p}: {z} vs {reference}");
    }

    #[test]
    fn inverse_cdf_round_trips_through_the_cdf(p in 1e-6f64..(1.0 - 1e-6)) {
        let z = inverse_cdf(p);
        let back = standard().cdf(z);
        // |dz| <= 1.15e-9 |z| carries through the cdf as pdf(z) |dz|
        let tol = 1.2e-9 * z.abs().max(1.0) * standard().pdf(z) + 1e-15;
        prop_assert!((back - p).abs() <= tol, "p={p}: {back}");
    }
}
