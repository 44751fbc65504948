use proptest::prelude::*;

use l1loc::{kmeans, ClusterError, Point};

fn dataset() -> impl Strategy<Value = (Vec<Point<f64>>, Vec<f64>, usize)> {
    (1usize..=80).prop_flat_map(|n| {
        (
            prop::collection::vec((-100.0..100.0f64, -100.0..100.0f64).prop_map(|(x, y)| Point::new(x, y)), n),
            prop::collection::vec(0.01..1.0f64, n),
            1..=n.min(6),
        )
    })
}

fn objective(pts: &[Point<f64>], wts: &[f64], labels: &[usize], centers: &[Point<f64>]) -> f64 {
    pts.iter()
        .zip(wts)
        .zip(labels)
        .map(|((p, w), &l)| w * ((p.x - centers[l].x).powi(2) + (p.y - centers[l].y).powi(2)))
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn lloyd_is_monotone_and_consistent((pts, wts, k) in dataset(), seed in 0u64..1000) {
        let km = match kmeans(&pts, &wts, k, seed, 100) {
            Ok(km) => km,
            Err(ClusterError::TooFewPoints { distinct, .. }) => {
                let mut uniq: Vec<(u64, u64)> = pts.iter().map(|p| (p.x.to_bits(), p.y.to_bits())).collect();
                uniq.sort_unstable();
                uniq.dedup();
                prop_assert!(uniq.len() < k && distinct == uniq.len());
                return Ok(());
            }
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        prop_assert_eq!(km.labels.len(), pts.len());
        prop_assert_eq!(km.centers.len(), k);
        prop_assert!(km.labels.iter().all(|&l| l < k));
        // rounding noise floor of the objective for this data
        let floor: f64 = 1e-12 * pts.iter().zip(&wts).map(|(p, w)| w * (p.x * p.x + p.y * p.y)).sum::<f64>();
        for w in km.objective_history.windows(2) {
            prop_assert!(w[1] <= w[0] + floor, "{} -> {}", w[0], w[1]);
        }
        let direct = objective(&pts, &wts, &km.labels, &km.centers);
        prop_assert!((direct - km.objective()).abs() <= 1e-9 * direct.max(1.0));
        // every point sits with its nearest center
        for (p, &l) in pts.iter().zip(&km.labels) {
            let d = |c: &Point<f64>| (p.x - c.x).powi(2) + (p.y - c.y).powi(2);
            let best = km.centers.iter().map(d).fold(f64::INFINITY, f64::min);
            prop_assert!(d(&km.centers[l]) <= best + 1e-9);
        }
    }

    #[test]
    fn same_seed_same_clustering((pts, wts, k) in dataset(), seed in 0u64..1000) {
        prop_assert_eq!(kmeans(&pts, &wts, k, seed, 100).ok(), kmeans(&pts, &wts, k, seed, 100).ok());
    }
}
