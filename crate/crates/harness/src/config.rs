use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use l1loc::{Config, Params, Point};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorLayout {
    /// Square lattice over the whole area, corners included.
    Grid,
    /// Evenly spaced along the boundary of the area.
    Perimeter,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSpec {
    pub layout: SensorLayout,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub count: usize,
    /// Defaults to a fifth of the half-width.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_separation: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerRange {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrueModel {
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub alpha: [f64; 2],
    pub beta_min: f64,
    pub nu: [usize; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalizerSpec {
    #[serde(rename = "G")]
    pub granularity: usize,
    #[serde(rename = "I1")]
    pub iters_phase_one: usize,
    #[serde(rename = "I2")]
    pub iters_phase_two: usize,
}

/// Everything a Monte Carlo run needs. Loaded from JSON; unknown keys are
/// rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub area_half_width: f64,
    pub sensors: SensorSpec,
    pub targets: TargetSpec,
    pub power: PowerRange,
    pub shadowing_db: f64,
    pub true_model: TrueModel,
    pub bounds: Bounds,
    pub localizer: LocalizerSpec,
    pub trials: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            area_half_width: 100.0,
            sensors: SensorSpec { layout: SensorLayout::Grid, count: Some(25), positions: None },
            targets: TargetSpec { count: 2, min_separation: None },
            power: PowerRange { min: 1.0, max: 3.0 },
            shadowing_db: 0.0,
            true_model: TrueModel { alpha: 2.5, beta: 0.99 },
            bounds: Bounds { alpha: [1.5, 4.0], beta_min: 0.9, nu: [1, 3] },
            localizer: LocalizerSpec { granularity: 5, iters_phase_one: 5, iters_phase_two: 5 },
            trials: 10,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn min_separation(&self) -> f64 {
        self.targets.min_separation.unwrap_or(self.area_half_width / 5.0)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        let w = self.area_half_width;
        if !(w.is_finite() && w > 0.0) {
            return bad("area_half_width must be positive".into());
        }
        match self.sensors.layout {
            SensorLayout::Grid | SensorLayout::Perimeter => {
                if self.sensors.positions.is_some() {
                    return bad("sensors.positions is only allowed with the explicit layout".into());
                }
                let Some(k) = self.sensors.count else {
                    return bad("sensors.count is required for grid and perimeter layouts".into());
                };
                if self.sensors.layout == SensorLayout::Grid {
                    let side = k.isqrt();
                    if side < 2 || side * side != k {
                        return bad(format!("grid layout needs a square sensor count of at least 4, got {k}"));
                    }
                } else if k == 0 {
                    return bad("sensors.count must be positive".into());
                }
            }
            SensorLayout::Explicit => {
                let Some(pos) = &self.sensors.positions else {
                    return bad("sensors.positions is required for the explicit layout".into());
                };
                if pos.is_empty() {
                    return bad("sensors.positions is empty".into());
                }
                if self.sensors.count.is_some_and(|k| k != pos.len()) {
                    return bad("sensors.count disagrees with sensors.positions".into());
                }
                if pos.iter().any(|p| !(p[0].abs() <= w && p[1].abs() <= w)) {
                    return bad("explicit sensor outside the area".into());
                }
            }
        }
        if self.targets.count == 0 {
            return bad("targets.count must be positive".into());
        }
        if !(self.min_separation() >= 0.0) {
            return bad("targets.min_separation must be non-negative".into());
        }
        if !(self.power.min > 0.0 && self.power.min <= self.power.max && self.power.max.is_finite()) {
            return bad("need 0 < power.min <= power.max".into());
        }
        if !(self.shadowing_db >= 0.0 && self.shadowing_db.is_finite()) {
            return bad("shadowing_db must be non-negative".into());
        }
        let [a_lo, a_hi] = self.bounds.alpha;
        Params::new(self.true_model.alpha, self.true_model.beta, a_lo, a_hi, self.bounds.beta_min)
            .map_err(|e| ConfigError::Invalid(format!("true_model/bounds: {e}")))?;
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        self.localizer_config(self.seed).validate().map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Sensor positions for this configuration.
    pub fn sensor_positions(&self) -> Vec<Point<f64>> {
        let w = self.area_half_width;
        match self.sensors.layout {
            SensorLayout::Grid => {
                let side = self.sensors.count.unwrap_or(0).isqrt();
                let at = |i: usize| -w + 2.0 * w * i as f64 / (side - 1) as f64;
                (0..side).flat_map(|i| (0..side).map(move |j| Point::new(at(j), at(i)))).collect()
            }
            SensorLayout::Perimeter => {
                let k = self.sensors.count.unwrap_or(0);
                (0..k).map(|i| perimeter_point(w, 8.0 * w * i as f64 / k as f64)).collect()
            }
            SensorLayout::Explicit => {
                self.sensors.positions.iter().flatten().map(|p| Point::new(p[0], p[1])).collect()
            }
        }
    }

    pub fn localizer_config(&self, seed: u64) -> Config {
        Config {
            granularity: self.localizer.granularity,
            half_width: self.area_half_width,
            iters_phase_one: self.localizer.iters_phase_one,
            iters_phase_two: self.localizer.iters_phase_two,
            nu_min: self.bounds.nu[0],
            nu_max: self.bounds.nu[1],
            power_min: self.power.min,
            power_max: self.power.max,
            alpha_min: self.bounds.alpha[0],
            alpha_max: self.bounds.alpha[1],
            beta_min: self.bounds.beta_min,
            seed,
            ..Config::default()
        }
    }
}

/// Point at arc length `t` along the boundary of `[-w, w]^2`, counter-clockwise
/// from `(-w, -w)`.
fn perimeter_point(w: f64, t: f64) -> Point<f64> {
    let side = 2.0 * w;
    match (t / side) as usize {
        0 => Point::new(-w + t, -w),
        1 => Point::new(w, -w + (t - side)),
        2 => Point::new(w - (t - 2.0 * side), w),
        _ => Point::new(-w, w - (t - 3.0 * side)),
    }
}
