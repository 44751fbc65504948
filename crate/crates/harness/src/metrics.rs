use serde::Serialize;

use l1loc::{Report, Target};

/// Largest side for which assignments are found by exhaustive search.
pub const EXHAUSTIVE_LIMIT: usize = 8;

/// Error metrics of one trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Score {
    pub n_true: usize,
    pub n_hat: usize,
    pub position_rmse: f64,
    pub power_rmse: f64,
    pub alpha_error: f64,
    pub beta_error: f64,
    pub matched_count: usize,
}

/// Minimum-cost assignment of rows to distinct columns (or columns to
/// distinct rows when there are fewer columns). Returns `(row, col)` pairs
/// sorted by row, and the total cost.
pub fn assign(cost: &[Vec<f64>]) -> (Vec<(usize, usize)>, f64) {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return (Vec::new(), 0.0);
    }
    if rows > cols {
        let t: Vec<Vec<f64>> = (0..cols).map(|j| (0..rows).map(|i| cost[i][j]).collect()).collect();
        let (pairs, total) = assign(&t);
        let mut pairs: Vec<(usize, usize)> = pairs.into_iter().map(|(j, i)| (i, j)).collect();
        pairs.sort_unstable();
        return (pairs, total);
    }
    let cols_of_rows = if cols <= EXHAUSTIVE_LIMIT { exhaustive(cost) } else { hungarian(cost) };
    let total = cols_of_rows.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    (cols_of_rows.into_iter().enumerate().collect(), total)
}

/// Tries every injective map from rows into columns; `rows <= cols`. The
/// first minimum in lexicographic order wins.
fn exhaustive(cost: &[Vec<f64>]) -> Vec<usize> {
    fn go(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>, cur: &mut Vec<usize>, acc: f64, best: &mut (f64, Vec<usize>)) {
        if row == cost.len() {
            if acc < best.0 {
                *best = (acc, cur.clone());
            }
            return;
        }
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                cur.push(j);
                go(cost, row + 1, used, cur, acc + cost[row][j], best);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let mut best = (f64::INFINITY, Vec::new());
    go(cost, 0, &mut vec![false; cost[0].len()], &mut Vec::new(), 0.0, &mut best);
    best.1
}

/// Shortest augmenting path Hungarian algorithm with potentials for a
/// rectangular matrix with `rows <= cols`.
fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let m = cost[0].len();
    // 1-based, index 0 is the virtual source
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=m {
        if owner[j] != 0 {
            out[owner[j] - 1] = j - 1;
        }
    }
    out
}

/// Matches estimates to truth by minimum total squared position distance and
/// scores the matched pairs. Cardinality errors only show up in `n_hat`.
pub fn match_and_score(truth: &[Target<f64>], alpha: f64, beta: f64, report: &Report) -> Score {
    let est = &report.targets;
    let cost: Vec<Vec<f64>> = truth
        .iter()
        .map(|t| est.iter().map(|e| (t.x - e.x).powi(2) + (t.y - e.y).powi(2)).collect())
        .collect();
    let (pairs, total) = assign(&cost);
    let k = pairs.len();
    let (position_rmse, power_rmse) = if k == 0 {
        (f64::NAN, f64::NAN)
    } else {
        let pw: f64 = pairs.iter().map(|&(i, j)| (truth[i].power - est[j].power).powi(2)).sum();
        ((total / k as f64).sqrt(), (pw / k as f64).sqrt())
    };
    Score {
        n_true: truth.len(),
        n_hat: report.model.n_targets,
        position_rmse,
        power_rmse,
        alpha_error: (report.model.alpha - alpha).abs(),
        beta_error: (report.model.beta - beta).abs(),
        matched_count: k,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use l1loc::ModelEstimate;

    fn report(targets: Vec<Target<f64>>, alpha: f64, beta: f64) -> Report {
        Report { model: ModelEstimate { n_targets: targets.len(), alpha, beta }, targets, trace: Vec::new() }
    }

    fn t(x: f64, y: f64, power: f64) -> Target<f64> {
        Target { x, y, power }
    }

    #[test]
    fn identical_estimates_score_zero() {
        let truth = vec![t(1.0, 2.0, 1.5), t(-30.0, 4.0, 2.5)];
        let s = match_and_score(&truth, 2.5, 0.99, &report(truth.clone(), 2.5, 0.99));
        assert_eq!((s.position_rmse, s.power_rmse, s.alpha_error, s.beta_error), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(s.matched_count, 2);
    }

    #[test]
    fn crossed_order_matches() {
        let truth = vec![t(0.0, 0.0, 1.0), t(10.0, 0.0, 2.0)];
        let est = vec![t(10.0, 0.0, 2.0), t(0.0, 0.0, 1.0)];
        let s = match_and_score(&truth, 2.0, 1.0, &report(est, 2.0, 1.0));
        assert_eq!(s.position_rmse, 0.0);
        assert_eq!(s.power_rmse, 0.0);
    }

    #[test]
    fn two_by_two_assignment() {
        let (pairs, total) = assign(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert_eq!(pairs, vec![(0, 0), (1, 1)]);
        assert_eq!(total, 2.0);
    }

    #[test]
    fn cardinality_mismatch_matches_min() {
        let truth = vec![t(0.0, 0.0, 1.0), t(50.0, 0.0, 2.0)];
        let est = vec![t(49.0, 0.0, 2.0), t(3.0, 4.0, 1.0), t(80.0, 80.0, 3.0)];
        let s = match_and_score(&truth, 2.0, 1.0, &report(est, 2.2, 0.97));
        assert_eq!(s.matched_count, 2);
        assert_eq!(s.n_hat, 3);
        assert!((s.position_rmse - ((1.0 + 25.0) / 2.0f64).sqrt()).abs() < 1e-12);
        assert!((s.alpha_error - 0.2).abs() < 1e-12);
        assert!((s.beta_error - 0.03).abs() < 1e-12);
        let s = match_and_score(&truth[..1], 2.0, 1.0, &report(vec![t(49.0, 0.0, 2.0), t(3.0, 4.0, 1.0)], 2.0, 1.0));
        assert_eq!(s.matched_count, 1);
        assert_eq!(s.position_rmse, 5.0);
    }

    #[test]
    fn tall_matrix_is_transposed() {
        let cost = vec![vec![5.0], vec![1.0], vec![3.0]];
        assert_eq!(assign(&cost), (vec![(1, 0)], 1.0));
    }

    #[test]
    fn hungarian_on_known_instance() {
        // classic 4x4 with optimum 140
        let cost = vec![
            vec![82.0, 83.0, 69.0, 92.0],
            vec![77.0, 37.0, 49.0, 92.0],
            vec![11.0, 69.0, 5.0, 86.0],
            vec![8.0, 9.0, 98.0, 23.0],
        ];
        let cols = hungarian(&cost);
        let total: f64 = cols.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
        assert_eq!(total, 140.0);
        assert_eq!(exhaustive(&cost), cols);
    }
}
