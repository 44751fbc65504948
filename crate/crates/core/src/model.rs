//! Physical system model: geometry, the path-loss kernel `d^-alpha * beta^d`,
//! the sensing matrix, synthetic RSS generation under log-normal shadowing, and
//! Fenton-Wilkinson moment matching for sums of log-normal terms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::DenseMatrix;
use crate::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid path-loss parameters: {0}")]
    InvalidParams(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("rss entry {index} is not strictly positive and finite")]
    BadRss { index: usize },
    #[error("fenton-wilkinson needs at least one term")]
    NoTerms,
    #[error("log-domain standard deviation must be non-negative, got {0}")]
    NegativeSigma(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Point<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }
}

/// Path-loss exponent and factor together with their admissible ranges.
///
/// The upper bound of `beta` is fixed at one (no gain with distance).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossParams<T> {
    pub alpha: T,
    pub beta: T,
    pub alpha_min: T,
    pub alpha_max: T,
    pub beta_min: T,
}

impl<T: Real> PathLossParams<T> {
    pub fn new(alpha: T, beta: T, alpha_min: T, alpha_max: T, beta_min: T) -> Result<Self, ModelError> {
        let p = Self { alpha, beta, alpha_min, alpha_max, beta_min };
        p.validate()?;
        Ok(p)
    }

    /// Parameters whose bounds collapse onto the given values.
    pub fn fixed(alpha: T, beta: T) -> Result<Self, ModelError> {
        Self::new(alpha, beta, alpha, alpha, beta)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let finite = [self.alpha, self.beta, self.alpha_min, self.alpha_max, self.beta_min]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(ModelError::InvalidParams("non-finite value".into()));
        }
        if self.alpha_min <= T::zero() || self.beta_min <= T::zero() {
            return Err(ModelError::InvalidParams("lower bounds must be positive".into()));
        }
        if !(self.alpha_min <= self.alpha && self.alpha <= self.alpha_max) {
            return Err(ModelError::InvalidParams(format!(
                "alpha {} outside [{}, {}]",
                self.alpha, self.alpha_min, self.alpha_max
            )));
        }
        if !(self.beta_min <= self.beta && self.beta <= T::one()) {
            return Err(ModelError::InvalidParams(format!(
                "beta {} outside [{}, 1]",
                self.beta, self.beta_min
            )));
        }
        Ok(())
    }

    /// Same bounds, different current values.
    pub fn with_values(&self, alpha: T, beta: T) -> Self {
        Self { alpha, beta, ..*self }
    }

    pub fn clip_alpha(&self, alpha: T) -> T {
        alpha.max(self.alpha_min).min(self.alpha_max)
    }

    pub fn clip_beta(&self, beta: T) -> T {
        beta.max(self.beta_min).min(T::one())
    }

    #[inline]
    pub fn gain(&self, d: T) -> T {
        gain(d, self.alpha, self.beta)
    }
}

/// A transmitter: position in meters and transmit power in watts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target<T> {
    pub x: T,
    pub y: T,
    pub power: T,
}

impl<T: Real> Target<T> {
    pub fn position(&self) -> Point<T> {
        Point::new(self.x, self.y)
    }
}

/// Sensors, ground truth and channel description of one synthetic experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario<T> {
    pub sensors: Vec<Point<T>>,
    pub targets: Vec<Target<T>>,
    /// The area is `[-half_width, half_width]^2`.
    pub half_width: T,
    pub sigma_db: T,
    pub truth: PathLossParams<T>,
    pub power_min: T,
    pub power_max: T,
    pub d_floor: T,
}

impl<T: Real> Scenario<T> {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidScenario(msg));
        if self.sensors.is_empty() {
            return bad("need at least one sensor".into());
        }
        if self.targets.is_empty() {
            return bad("need at least one target".into());
        }
        if !(self.half_width >= T::zero()) {
            return bad("half width must be non-negative".into());
        }
        if !(self.sigma_db >= T::zero()) {
            return bad("shadowing sigma must be non-negative".into());
        }
        if !(self.d_floor > T::zero()) {
            return bad("distance floor must be positive".into());
        }
        if !(T::zero() < self.power_min && self.power_min <= self.power_max) {
            return bad("need 0 < power_min <= power_max".into());
        }
        self.truth.validate()?;
        let w = self.half_width;
        let inside = |x: T, y: T| x.abs() <= w && y.abs() <= w;
        if let Some(k) = self.sensors.iter().position(|s| !inside(s.x, s.y)) {
            return bad(format!("sensor {k} outside the area"));
        }
        for (n, t) in self.targets.iter().enumerate() {
            if !inside(t.x, t.y) {
                return bad(format!("target {n} outside the area"));
            }
            if !(self.power_min <= t.power && t.power <= self.power_max) {
                return bad(format!("target {n} power outside bounds"));
            }
        }
        Ok(())
    }

    /// Noise-free received power at every sensor.
    pub fn mean_free_rss(&self) -> Vec<T> {
        self.sensors
            .iter()
            .map(|s| {
                self.targets
                    .iter()
                    .map(|t| t.power * self.truth.gain(distance(*s, t.position(), self.d_floor)))
                    .sum()
            })
            .collect()
    }

    /// Fenton-Wilkinson log-moments of the shadowed RSS at every sensor.
    pub fn rss_log_moments(&self) -> Result<Vec<LogNormalMoments<T>>, ModelError> {
        let omega = shadowing_log_std(self.sigma_db);
        self.sensors
            .iter()
            .map(|s| {
                let terms: Vec<(T, T)> = self
                    .targets
                    .iter()
                    .map(|t| {
                        let g = self.truth.gain(distance(*s, t.position(), self.d_floor));
                        ((t.power * g).ln(), omega)
                    })
                    .collect();
                fenton_wilkinson(&terms)
            })
            .collect()
    }
}

/// Received power at each of the `K` sensors, in watts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RssVector<T>(Vec<T>);

impl<T: Real> RssVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self, ModelError> {
        if let Some(index) = values.iter().position(|v| !(v.is_finite() && *v > T::zero())) {
            return Err(ModelError::BadRss { index });
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }
}

/// Log-domain mean and standard deviation of a log-normal variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogNormalMoments<T> {
    pub mu: T,
    pub sigma: T,
}

impl<T: Real> LogNormalMoments<T> {
    /// Linear-domain mean and variance.
    pub fn mean_variance(&self) -> (T, T) {
        let s2 = self.sigma * self.sigma;
        let mean = (self.mu + s2 / T::lit(2.0)).exp();
        let var = s2.exp_m1() * (T::lit(2.0) * self.mu + s2).exp();
        (mean, var)
    }
}

/// Euclidean distance floored at `d_floor`.
#[inline]
pub fn distance<T: Real>(a: Point<T>, b: Point<T>, d_floor: T) -> T {
    (a.x - b.x).hypot(a.y - b.y).max(d_floor)
}

#[inline]
pub(crate) fn gain<T: Real>(d: T, alpha: T, beta: T) -> T {
    d.powf(-alpha) * beta.powf(d)
}

/// `d^-alpha * beta^d` for the current values in `params`.
#[inline]
pub fn path_gain<T: Real>(d: T, params: &PathLossParams<T>) -> T {
    params.gain(d)
}

/// `ln(10) * sigma_db / 10`: the natural-log standard deviation of a dB-valued
/// Gaussian shadowing term.
pub fn shadowing_log_std<T: Real>(sigma_db: T) -> T {
    T::lit(10f64.ln()) * sigma_db / T::lit(10.0)
}

/// `K x M` sensing matrix with entries `(p_min + p_max)/2 * gain(d_km)`.
pub fn build_sensing_matrix<T: Real>(
    grid: &[Point<T>],
    sensors: &[Point<T>],
    params: &PathLossParams<T>,
    power_min: T,
    power_max: T,
    d_floor: T,
) -> DenseMatrix<T> {
    let mid = (power_min + power_max) / T::lit(2.0);
    DenseMatrix::from_fn(sensors.len(), grid.len(), |k, m| {
        mid * params.gain(distance(sensors[k], grid[m], d_floor))
    })
}

/// Draws one shadowed RSS vector: each sensor-target link gets an independent
/// log-normal factor `exp(omega * z)`.
pub fn generate_rss<T: Real>(scenario: &Scenario<T>, seed: u64) -> Result<RssVector<T>, ModelError> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = shadowing_log_std(scenario.sigma_db);
    let values = scenario
        .sensors
        .iter()
        .map(|s| {
            scenario
                .targets
                .iter()
                .map(|t| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    let g = scenario.truth.gain(distance(*s, t.position(), scenario.d_floor));
                    t.power * g * (omega * T::lit(z)).exp()
                })
                .sum()
        })
        .collect();
    RssVector::new(values)
}

/// Matches a single log-normal to the first two moments of
/// `sum_n exp(Z_n)` with independent `Z_n ~ Normal(m_n, s_n^2)`.
pub fn fenton_wilkinson<T: Real>(terms: &[(T, T)]) -> Result<LogNormalMoments<T>, ModelError> {
    if terms.is_empty() {
        return Err(ModelError::NoTerms);
    }
    if let Some(&(_, s)) = terms.iter().find(|(_, s)| !(*s >= T::zero())) {
        return Err(ModelError::NegativeSigma(s.as_f64()));
    }
    if terms.len() == 1 {
        let (m, s) = terms[0];
        return Ok(LogNormalMoments { mu: m, sigma: s });
    }
    let two = T::lit(2.0);
    let mean: T = terms.iter().map(|&(m, s)| (m + s * s / two).exp()).sum();
    let var: T = terms
        .iter()
        .map(|&(m, s)| (two * m + s * s).exp() * (s * s).exp_m1())
        .sum();
    let sigma2 = (var / (mean * mean)).ln_1p();
    Ok(LogNormalMoments { mu: mean.ln() - sigma2 / two, sigma: sigma2.sqrt() })
}
