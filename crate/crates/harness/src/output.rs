//! CSV and trace serialization.
//!
//! The CSV starts with a `# schema=v1` line, then the header. One row per
//! trial in trial order, then two aggregate rows whose seed column is `AGG`
//! and whose status column names the statistic (`mean`, `median`). Aggregates
//! cover successful trials only. `time_ms` is left empty unless timing is
//! requested, so that equal inputs give equal bytes.

use std::fmt::Write as _;

use crate::trials::{aggregate, Summary, TraceLine, TrialOutcome, TrialResult};

pub const SCHEMA_LINE: &str = "# schema=v1";
pub const HEADER: &str = "seed,n_true,n_hat,pos_rmse,pow_rmse,alpha_err,beta_err,time_ms,status";

fn num(x: f64) -> String {
    // shortest representation that round-trips
    format!("{x}")
}

fn time(x: f64, timing: bool) -> String {
    if timing { num(x) } else { String::new() }
}

fn status_field(s: &str) -> String {
    // keep the row parseable by naive splitters
    s.replace([',', '\n', '\r'], ";")
}

pub fn csv(results: &[TrialResult], timing: bool) -> String {
    let mut out = String::new();
    writeln!(out, "{SCHEMA_LINE}").unwrap();
    writeln!(out, "{HEADER}").unwrap();
    for r in results {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.seed,
            r.n_true,
            r.n_hat,
            num(r.position_rmse),
            num(r.power_rmse),
            num(r.alpha_error),
            num(r.beta_error),
            time(r.wall_time_ms, timing),
            status_field(&r.status)
        )
        .unwrap();
    }
    let agg = aggregate(results);
    let mut row = |s: &Summary, name: &str| {
        writeln!(
            out,
            "AGG,{},{},{},{},{},{},{},{name}",
            num(s.n_true),
            num(s.n_hat),
            num(s.position_rmse),
            num(s.power_rmse),
            num(s.alpha_error),
            num(s.beta_error),
            time(s.wall_time_ms, timing)
        )
        .unwrap();
    };
    row(&agg.mean, "mean");
    row(&agg.median, "median");
    out
}

/// One JSON object per iteration of every successful trial, in trial order.
pub fn trace(outcomes: &[TrialOutcome]) -> String {
    let mut out = String::new();
    for o in outcomes {
        if let Some(report) = &o.report {
            for record in &report.trace {
                let line = TraceLine { seed: o.result.seed, record };
                out.push_str(&serde_json::to_string(&line).expect("trace records serialize"));
                out.push('\n');
            }
        }
    }
    out
}
