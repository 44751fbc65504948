use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use l1loc::{ModelError, Params, Scenario, Target};

use crate::config::RunConfig;

/// Rejection-sampling budget for a separated target layout.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

/// Offset mixed into the scenario seed for the shadowing draw, so placement
/// and shadowing never share a random stream.
const SHADOWING_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("could not place {count} targets {min_sep} m apart after {attempts} attempts")]
    Placement { count: usize, min_sep: f64, attempts: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Draws the scenario of one trial.
///
/// Targets are uniform in `[-0.9 w, 0.9 w]^2` and pairwise at least the
/// configured separation apart; powers are uniform in the power range.
pub fn generate_scenario(cfg: &RunConfig, seed: u64) -> Result<Scenario<f64>, ScenarioError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = cfg.area_half_width;
    let lim = 0.9 * w;
    let n = cfg.targets.count;
    let min_sep = cfg.min_separation();
    let mut targets: Vec<Target<f64>> = Vec::with_capacity(n);
    let mut attempts = 0;
    while targets.len() < n {
        if attempts == MAX_PLACEMENT_ATTEMPTS {
            return Err(ScenarioError::Placement { count: n, min_sep, attempts });
        }
        attempts += 1;
        let x = rng.random_range(-lim..=lim);
        let y = rng.random_range(-lim..=lim);
        if targets.iter().all(|t| (t.x - x).hypot(t.y - y) >= min_sep) {
            let power = if cfg.power.min < cfg.power.max {
                rng.random_range(cfg.power.min..=cfg.power.max)
            } else {
                cfg.power.min
            };
            targets.push(Target { x, y, power });
        }
    }
    let [alpha_min, alpha_max] = cfg.bounds.alpha;
    let truth = Params::new(cfg.true_model.alpha, cfg.true_model.beta, alpha_min, alpha_max, cfg.bounds.beta_min)?;
    let sc = Scenario {
        sensors: cfg.sensor_positions(),
        targets,
        half_width: w,
        sigma_db: cfg.shadowing_db,
        truth,
        power_min: cfg.power.min,
        power_max: cfg.power.max,
        d_floor: 1.0,
    };
    sc.validate()?;
    Ok(sc)
}

pub fn shadowing_seed(seed: u64) -> u64 {
    seed ^ SHADOWING_STREAM
}
