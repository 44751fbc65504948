use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use l1loc::{generate_rss, IterationRecord, Localizer, Report, Scenario};

use crate::config::RunConfig;
use crate::metrics::{match_and_score, Score};
use crate::scenario::{generate_scenario, shadowing_seed};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub seed: u64,
    pub n_true: usize,
    /// Zero when the trial failed.
    pub n_hat: usize,
    pub position_rmse: f64,
    pub power_rmse: f64,
    pub alpha_error: f64,
    pub beta_error: f64,
    pub wall_time_ms: f64,
    pub matched_count: usize,
    /// `ok`, or a short failure description.
    pub status: String,
}

impl TrialResult {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    fn failed(seed: u64, n_true: usize, wall_time_ms: f64, status: String) -> Self {
        Self {
            seed,
            n_true,
            n_hat: 0,
            position_rmse: f64::NAN,
            power_rmse: f64::NAN,
            alpha_error: f64::NAN,
            beta_error: f64::NAN,
            wall_time_ms,
            matched_count: 0,
            status,
        }
    }

    fn scored(seed: u64, s: Score, wall_time_ms: f64) -> Self {
        Self {
            seed,
            n_true: s.n_true,
            n_hat: s.n_hat,
            position_rmse: s.position_rmse,
            power_rmse: s.power_rmse,
            alpha_error: s.alpha_error,
            beta_error: s.beta_error,
            wall_time_ms,
            matched_count: s.matched_count,
            status: "ok".into(),
        }
    }
}

/// One trial in full: the drawn scenario, the localizer report (absent on
/// failure) and the scored row.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub scenario: Option<Scenario<f64>>,
    pub report: Option<Report>,
    pub result: TrialResult,
}

/// Runs the trial with the given seed. Failures are recorded in the status
/// rather than returned.
pub fn run_trial(cfg: &RunConfig, seed: u64) -> TrialOutcome {
    let start = Instant::now();
    let elapsed = |s: Instant| s.elapsed().as_secs_f64() * 1e3;
    let n_true = cfg.targets.count;
    let sc = match generate_scenario(cfg, seed) {
        Ok(sc) => sc,
        Err(e) => {
            let result = TrialResult::failed(seed, n_true, elapsed(start), format!("scenario: {e}"));
            return TrialOutcome { scenario: None, report: None, result };
        }
    };
    let report = generate_rss(&sc, shadowing_seed(seed))
        .map_err(|e| format!("rss: {e}"))
        .and_then(|rss| {
            Localizer::new(cfg.localizer_config(seed), sc.sensors.clone(), rss).map_err(|e| format!("localizer: {e}"))
        })
        .and_then(|loc| loc.run().map_err(|e| format!("localizer: {e}")));
    match report {
        Ok(report) => {
            let score = match_and_score(&sc.targets, sc.truth.alpha, sc.truth.beta, &report);
            let result = TrialResult::scored(seed, score, elapsed(start));
            TrialOutcome { scenario: Some(sc), report: Some(report), result }
        }
        Err(status) => {
            let result = TrialResult::failed(seed, n_true, elapsed(start), status);
            TrialOutcome { scenario: Some(sc), report: None, result }
        }
    }
}

/// Runs `cfg.trials` trials in parallel, trial `t` with seed `cfg.seed + t`.
/// The output is in trial order.
pub fn run_trials(cfg: &RunConfig) -> Vec<TrialOutcome> {
    (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| run_trial(cfg, cfg.seed.wrapping_add(t)))
        .collect()
}

/// Mean and median of every numeric column over the successful trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub trials: usize,
    pub ok: usize,
    pub mean: Summary,
    pub median: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub n_true: f64,
    pub n_hat: f64,
    pub position_rmse: f64,
    pub power_rmse: f64,
    pub alpha_error: f64,
    pub beta_error: f64,
    pub wall_time_ms: f64,
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub fn aggregate(results: &[TrialResult]) -> Aggregate {
    let ok: Vec<&TrialResult> = results.iter().filter(|r| r.is_ok()).collect();
    let col = |f: fn(&TrialResult) -> f64| -> Vec<f64> { ok.iter().map(|r| f(r)).collect() };
    let cols = [
        col(|r| r.n_true as f64),
        col(|r| r.n_hat as f64),
        col(|r| r.position_rmse),
        col(|r| r.power_rmse),
        col(|r| r.alpha_error),
        col(|r| r.beta_error),
        col(|r| r.wall_time_ms),
    ];
    let summary = |f: fn(&[f64]) -> f64| Summary {
        n_true: f(&cols[0]),
        n_hat: f(&cols[1]),
        position_rmse: f(&cols[2]),
        power_rmse: f(&cols[3]),
        alpha_error: f(&cols[4]),
        beta_error: f(&cols[5]),
        wall_time_ms: f(&cols[6]),
    };
    Aggregate { trials: results.len(), ok: ok.len(), mean: summary(mean), median: summary(median) }
}

/// A trace record tagged with the seed of its trial.
#[derive(Debug, Clone, Serialize)]
pub struct TraceLine<'a> {
    pub seed: u64,
    #[serde(flatten)]
    pub record: &'a IterationRecord<f64>,
}
