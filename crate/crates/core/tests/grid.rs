use std::collections::BTreeSet;

use proptest::prelude::*;

use sah_core::grid::*;
use sah_core::linalg;

fn key(x: &[f64]) -> Vec<i64> {
    x.iter().map(|v| (v * 1e9).round() as i64).collect()
}

#[test]
fn count_examples() {
    let spec = GridSpec::new(1, 0.8).unwrap();
    assert_eq!(spec.level(), 2);
    assert_eq!(spec.count(), 16u32.into());
    assert_eq!(brute_force_count(1, 2), 16);
    assert_eq!(GridSpec::with_level(1, 1).count(), 8u32.into());
}

#[test]
fn level_one_circle() {
    let pts: Vec<Vec<f64>> = GridSpec::with_level(1, 1).stream().collect();
    assert_eq!(pts.len(), 8);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for want in [[1.0, 0.0], [0.0, 1.0], [h, h], [h, -h], [-h, h], [-h, -h]] {
        assert!(pts.iter().any(|p| linalg::euclidean_distance(p, &want) < 1e-15), "{want:?} missing");
    }
}

#[test]
fn covering_radius_examples() {
    for n in [1, 2] {
        assert!(covering_radius_estimate(&GridSpec::new(n, 0.5).unwrap(), 10_000, 3) < 0.5);
    }
    for n in 1..=3 {
        let radii: Vec<f64> =
            [0.8, 0.4, 0.2].iter().map(|&r| covering_radius_estimate(&GridSpec::new(n, r).unwrap(), 2000, 5)).collect();
        assert!(radii.windows(2).all(|w| w[1] < w[0]), "n = {n}: {radii:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn stream_matches_count_and_is_symmetric(n in 1usize..=3, m in 1u64..=6) {
        let spec = GridSpec::with_level(n, m);
        let pts: Vec<Vec<f64>> = spec.stream().collect();
        let formula = (2 * m + 1).pow(n as u32 + 1) - (2 * m - 1).pow(n as u32 + 1);
        prop_assert_eq!(pts.len() as u64, formula);
        prop_assert_eq!(spec.count(), formula.into());
        prop_assert!(formula % 2 == 0);
        let keys: BTreeSet<Vec<i64>> = pts.iter().map(|p| key(p)).collect();
        prop_assert_eq!(keys.len(), pts.len());
        for p in &pts {
            prop_assert!((linalg::norm(p) - 1.0).abs() <= 1e-14);
            let neg: Vec<f64> = p.iter().map(|v| -v).collect();
            prop_assert!(keys.contains(&key(&neg)));
            prop_assert!(spec.contains(p));
        }
        let chunked: usize = spec.chunks().iter().map(|c| c.points().count()).sum();
        prop_assert_eq!(chunked, pts.len());
    }

    #[test]
    fn brute_force_agrees_with_formula(n in 1usize..=3, m in 1u64..=6) {
        prop_assert_eq!(brute_force_count(n, m), (2 * m + 1).pow(n as u32 + 1) - (2 * m - 1).pow(n as u32 + 1));
    }
}
