//! Property tests for the invertible maps.

use polyflow_core::ball::{from_ball, to_ball, BallMapConfig};
use polyflow_core::rng::{random_polytope, sample_ball, stream_rng};
use polyflow_core::simplex_coords::{ilr, ilr_inv, IlrBasis};
use polyflow_core::spline::{CircularSpline, RQSpline};
use polyflow_core::Vector;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ball_map_inverts(seed in 0u64..10_000, k in 2usize..7, radius in 0.0f64..0.999) {
        let mut rng = stream_rng(seed, 0);
        let h = random_polytope(k, 2 * k + 1, &mut rng);
        let cfg = BallMapConfig::default();
        let beta = sample_ball(k, radius, &mut rng);
        let v = from_ball(&beta, &h, &cfg).unwrap();
        prop_assert!(h.strictly_contains(&v));
        let back = to_ball(&v, &h, &cfg).unwrap();
        prop_assert!((back - beta).amax() < 1e-9);
    }

    #[test]
    fn ilr_inverts(parts in prop::collection::vec(0.01f64..10.0, 2..12)) {
        let total: f64 = parts.iter().sum();
        let lam = Vector::from_iterator(parts.len(), parts.iter().map(|p| p / total));
        let basis = IlrBasis::helmert(parts.len()).unwrap();
        let z = ilr(&lam, &basis).unwrap();
        prop_assert!((ilr_inv(&z, &basis).unwrap() - lam).amax() < 1e-12);
    }

    #[test]
    fn spline_inverts(
        w in prop::collection::vec(-3.0f64..3.0, 6),
        hgt in prop::collection::vec(-3.0f64..3.0, 6),
        d in prop::collection::vec(-3.0f64..3.0, 7),
        x in -2.0f64..2.0,
    ) {
        let s = RQSpline::from_unnormalized(-2.0, 2.0, &w, &hgt, &d).unwrap();
        let (y, ld) = s.forward(x).unwrap();
        let (back, ld_inv) = s.inverse(y).unwrap();
        prop_assert!((back - x).abs() < 1e-9);
        prop_assert!((ld + ld_inv).abs() < 1e-8);
    }

    #[test]
    fn circular_spline_inverts(
        w in prop::collection::vec(-2.0f64..2.0, 5),
        hgt in prop::collection::vec(-2.0f64..2.0, 5),
        d in prop::collection::vec(-2.0f64..2.0, 5),
        offset in -3.0f64..3.0,
        theta in -3.14f64..3.14,
    ) {
        let s = CircularSpline::from_unnormalized(&w, &hgt, &d, offset).unwrap();
        let (y, _) = s.forward(theta).unwrap();
        let (back, _) = s.inverse(y).unwrap();
        let diff = (back - theta).abs();
        prop_assert!(diff < 1e-9 || (diff - 2.0 * std::f64::consts::PI).abs() < 1e-9);
    }
}
