use proptest::prelude::*;

use l1loc::{ModelEstimate, Report, Target};
use l1loc_harness::output::csv;
use l1loc_harness::trials::{mean, median};
use l1loc_harness::{assign, match_and_score, run_trials, RunConfig};

fn easy_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.targets.count = 1;
    cfg.sensors.count = Some(16);
    cfg.shadowing_db = 0.0;
    cfg.bounds.nu = [1, 1];
    cfg.true_model.alpha = 2.5;
    cfg.true_model.beta = 1.0;
    cfg.bounds.alpha = [2.5, 2.5];
    cfg.bounds.beta_min = 1.0;
    cfg.trials = 10;
    cfg
}

#[test]
fn noiseless_easy_scenario_is_below_grid_resolution() {
    let cfg = easy_config();
    let rows: Vec<_> = run_trials(&cfg).into_iter().map(|o| o.result).collect();
    assert!(rows.iter().all(|r| r.is_ok()));
    let bound = 2.0 * cfg.localizer_config(0).delta();
    let agg = l1loc_harness::aggregate(&rows);
    assert!(agg.mean.position_rmse < bound, "{} >= {bound}", agg.mean.position_rmse);
}

#[test]
fn repeated_runs_give_identical_csv() {
    let mut cfg = easy_config();
    cfg.trials = 2;
    cfg.shadowing_db = 4.0;
    let a: Vec<_> = run_trials(&cfg).into_iter().map(|o| o.result).collect();
    let b: Vec<_> = run_trials(&cfg).into_iter().map(|o| o.result).collect();
    assert_eq!(csv(&a, false), csv(&b, false));
}

#[test]
fn aggregates_recompute_from_rows() {
    let mut cfg = easy_config();
    cfg.trials = 5;
    cfg.shadowing_db = 6.0;
    cfg.bounds.nu = [1, 2];
    let rows: Vec<_> = run_trials(&cfg).into_iter().map(|o| o.result).collect();
    let text = csv(&rows, false);
    let parsed: Vec<Vec<String>> =
        text.lines().skip(2).map(|l| l.split(',').map(str::to_string).collect()).collect();
    let (trial_rows, agg_rows): (Vec<_>, Vec<_>) = parsed.into_iter().partition(|r| r[0] != "AGG");
    assert_eq!(trial_rows.len(), 5);
    for col in 1..7 {
        let values: Vec<f64> =
            trial_rows.iter().filter(|r| r[8] == "ok").map(|r| r[col].parse().unwrap()).collect();
        let m: f64 = agg_rows[0][col].parse().unwrap();
        let md: f64 = agg_rows[1][col].parse().unwrap();
        let expect_mean = values.iter().sum::<f64>() / values.len() as f64;
        assert!((m - expect_mean).abs() <= 1e-12 * expect_mean.abs().max(1.0), "column {col}");
        assert_eq!(md, median(&values), "column {col}");
        assert_eq!(m, mean(&values), "column {col}");
    }
}

fn brute_force(cost: &[Vec<f64>]) -> f64 {
    // enumerate injections from the smaller side into the larger
    let (rows, cols) = (cost.len(), cost[0].len());
    let (small, large, at): (usize, usize, Box<dyn Fn(usize, usize) -> f64>) = if rows <= cols {
        (rows, cols, Box::new(|i, j| cost[i][j]))
    } else {
        (cols, rows, Box::new(|i, j| cost[j][i]))
    };
    fn go(i: usize, small: usize, used: &mut Vec<bool>, at: &dyn Fn(usize, usize) -> f64) -> f64 {
        if i == small {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                best = best.min(at(i, j) + go(i + 1, small, used, at));
                used[j] = false;
            }
        }
        best
    }
    go(0, small, &mut vec![false; large], &*at)
}

fn cost_matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..=9, 1usize..=9).prop_flat_map(|(r, c)| prop::collection::vec(prop::collection::vec(0.0..100.0f64, c), r))
}

fn targets(n: usize) -> impl Strategy<Value = Vec<Target<f64>>> {
    prop::collection::vec(
        (-100.0..100.0f64, -100.0..100.0f64, 1.0..3.0f64).prop_map(|(x, y, power)| Target { x, y, power }),
        n,
    )
}

fn report(est: Vec<Target<f64>>) -> Report {
    Report { model: ModelEstimate { n_targets: est.len(), alpha: 2.0, beta: 1.0 }, targets: est, trace: Vec::new() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn assignment_is_optimal(cost in cost_matrix()) {
        let (pairs, total) = assign(&cost);
        prop_assert_eq!(pairs.len(), cost.len().min(cost[0].len()));
        let mut rows: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let mut cols: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        rows.dedup();
        cols.sort_unstable();
        cols.dedup();
        prop_assert_eq!(rows.len(), pairs.len());
        prop_assert_eq!(cols.len(), pairs.len());
        let recomputed: f64 = pairs.iter().map(|&(i, j)| cost[i][j]).sum();
        prop_assert!((recomputed - total).abs() <= 1e-9);
        prop_assert!((total - brute_force(&cost)).abs() <= 1e-9 * total.max(1.0));
    }

    #[test]
    fn position_rmse_is_permutation_invariant(
        truth in targets(4),
        est in targets(3),
        shift in 0usize..4,
        shift_est in 0usize..3,
    ) {
        let base = match_and_score(&truth, 2.0, 1.0, &report(est.clone()));
        let mut t2 = truth.clone();
        t2.rotate_left(shift);
        let mut e2 = est.clone();
        e2.rotate_left(shift_est);
        e2.reverse();
        let other = match_and_score(&t2, 2.0, 1.0, &report(e2));
        prop_assert!((base.position_rmse - other.position_rmse).abs() <= 1e-9);
        prop_assert_eq!(base.matched_count, 3);
    }
}
