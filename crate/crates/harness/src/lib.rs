//! Synthetic scenarios, scoring and seeded Monte Carlo trials for the `l1loc`
//! localizer, plus the pieces behind the `l1loc` command line tool.

pub mod config;
pub mod metrics;
pub mod output;
pub mod scenario;
pub mod trials;

pub use config::{ConfigError, RunConfig, SensorLayout};
pub use metrics::{assign, match_and_score, Score};
pub use scenario::{generate_scenario, ScenarioError};
pub use trials::{aggregate, run_trial, run_trials, Aggregate, TrialOutcome, TrialResult};
