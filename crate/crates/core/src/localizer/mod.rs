//! The iterative l1-localization heuristic.
//!
//! Phase one (`mu = 1`, iterations `1..=I1`) refines a `G x G` subgrid around
//! every current estimate, re-estimates the number of targets by enumerating
//! `nu`, and collapses the most active grid points into `nu*` estimates with
//! weighted k-means. Phase two (`mu = 0`, `G = 1`) keeps one point per target
//! and only refines positions, powers and the path-loss parameters.

mod assemble;
mod grid;
mod linearize;

use serde::Serialize;
use thiserror::Error;

pub use assemble::{AssemblyInput, QpLayout};
pub use grid::{build_grid, subgrid_half_width, GridPoint, GridState};
pub use linearize::{linearize, residuals, Linearization};

use crate::cluster::{kmeans, ClusterError};
use crate::linalg::{build_psi, LinalgError, DEFAULT_RANK_TOL};
use crate::model::{build_sensing_matrix, distance, gain, ModelError, PathLossParams, Point, RssVector, Target};
use crate::qp::{solve_qp, solve_with_integer_nu, QpError, QpSettings, QpSolution, QpStatus};
use crate::Real;

/// A target estimate `(x, y, power)`.
pub type TargetEstimate<T> = Target<T>;

#[derive(Debug, Error)]
pub enum LocalizerError {
    #[error("invalid localizer configuration: {0}")]
    Config(String),
    #[error("beta must be positive, got {0}")]
    NonPositiveBeta(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("pre-processing failed at iteration {iteration}: {source}")]
    Linalg { iteration: usize, source: LinalgError },
    #[error("qp failed at iteration {iteration}: {source}")]
    Qp { iteration: usize, source: QpError },
    #[error("clustering failed at iteration {iteration}: {source}")]
    Cluster { iteration: usize, source: ClusterError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    One,
    Two,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizerConfig<T> {
    /// Grid points per axis and per target in phase one; at least 2.
    pub granularity: usize,
    /// The area is `[-half_width, half_width]^2`.
    pub half_width: T,
    pub iters_phase_one: usize,
    pub iters_phase_two: usize,
    pub nu_min: usize,
    pub nu_max: usize,
    pub power_min: T,
    pub power_max: T,
    pub alpha_min: T,
    pub alpha_max: T,
    pub beta_min: T,
    pub d_floor: T,
    /// Per-iteration shrink factor of the subgrid half-width.
    pub shrink: T,
    pub rank_tol: T,
    pub kmeans_max_iter: usize,
    pub seed: u64,
    pub qp: QpSettings<T>,
}

impl<T: Real> Default for LocalizerConfig<T> {
    fn default() -> Self {
        Self {
            granularity: 5,
            half_width: T::lit(100.0),
            iters_phase_one: 5,
            iters_phase_two: 5,
            nu_min: 1,
            nu_max: 3,
            power_min: T::lit(1.0),
            power_max: T::lit(3.0),
            alpha_min: T::lit(1.5),
            alpha_max: T::lit(4.0),
            beta_min: T::lit(0.9),
            d_floor: T::one(),
            shrink: T::lit(0.5),
            rank_tol: T::lit(DEFAULT_RANK_TOL),
            kmeans_max_iter: 100,
            seed: 0,
            qp: QpSettings::default(),
        }
    }
}

impl<T: Real> LocalizerConfig<T> {
    /// Per-iteration displacement bound `w / (4 (G - 1))`.
    pub fn delta(&self) -> T {
        self.half_width / (T::lit(4.0) * T::from_usize_lossy(self.granularity.saturating_sub(1).max(1)))
    }

    /// Number of top-activation grid points kept for clustering, `G^2`.
    pub fn m0(&self) -> usize {
        self.granularity * self.granularity
    }

    /// Largest variable count any assembled problem may have, `4 nu_max G^2 + 3`.
    pub fn max_qp_vars(&self) -> usize {
        4 * self.nu_max * self.m0() + 3
    }

    pub fn validate(&self) -> Result<(), LocalizerError> {
        let bad = |m: &str| Err(LocalizerError::Config(m.to_string()));
        if self.granularity < 2 {
            return bad("granularity must be at least 2");
        }
        if !(self.half_width > T::zero()) {
            return bad("half width must be positive");
        }
        if self.nu_min == 0 || self.nu_min > self.nu_max {
            return bad("need 1 <= nu_min <= nu_max");
        }
        if !(T::zero() < self.power_min && self.power_min <= self.power_max) {
            return bad("need 0 < power_min <= power_max");
        }
        if !(T::zero() < self.alpha_min && self.alpha_min <= self.alpha_max) {
            return bad("need 0 < alpha_min <= alpha_max");
        }
        if !(T::zero() < self.beta_min && self.beta_min <= T::one()) {
            return bad("need 0 < beta_min <= 1");
        }
        if !(self.d_floor > T::zero()) {
            return bad("distance floor must be positive");
        }
        if !(T::zero() < self.shrink && self.shrink <= T::one()) {
            return bad("shrink must lie in (0, 1]");
        }

        Ok(())
    }

    fn params(&self, alpha: T, beta: T) -> PathLossParams<T> {
        PathLossParams { alpha, beta, alpha_min: self.alpha_min, alpha_max: self.alpha_max, beta_min: self.beta_min }
    }
}

/// Iterates carried between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizerState<T> {
    /// Last completed iteration (0 before the first step).
    pub iteration: usize,
    pub phase: Phase,
    pub granularity: usize,
    /// Weight of the sparsity term, 1 in phase one and 0 in phase two.
    pub mu: T,
    pub n_targets: usize,
    pub alpha: T,
    pub beta: T,
    pub estimates: Vec<TargetEstimate<T>>,
}

/// One line of the iteration trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord<T> {
    pub iteration: usize,
    pub phase: Phase,
    pub nu_star: usize,
    /// Optimal value of the solved (row-normalized) QP.
    pub objective: T,
    pub alpha: T,
    pub beta: T,
    pub estimates: Vec<TargetEstimate<T>>,
    pub qp_status: QpStatus,
    pub num_vars: usize,
    /// `sum_k (r_k - sum_n p_n gain(d_kn))^2` at the updated estimates.
    pub misfit: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelEstimate<T> {
    pub n_targets: usize,
    pub alpha: T,
    pub beta: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport<T> {
    pub targets: Vec<TargetEstimate<T>>,
    pub model: ModelEstimate<T>,
    pub trace: Vec<IterationRecord<T>>,
}

/// Sum of squared point-source residuals for a set of estimates.
pub fn misfit<T: Real>(
    estimates: &[TargetEstimate<T>],
    sensors: &[Point<T>],
    rss: &[T],
    alpha: T,
    beta: T,
    d_floor: T,
) -> T {
    sensors
        .iter()
        .zip(rss)
        .map(|(s, &r)| {
            let model: T = estimates.iter().map(|e| e.power * gain(distance(*s, e.position(), d_floor), alpha, beta)).sum();
            (r - model) * (r - model)
        })
        .sum()
}

/// Turns a solved QP into new estimates.
///
/// Phase one keeps the `m0` most active points (ties by lower index), clusters
/// their offset-corrected positions into `nu_star` groups weighted by
/// activation, and averages each group. Phase two moves each point by its
/// offsets.
pub fn cluster_and_average<T: Real>(
    z: &[T],
    layout: QpLayout,
    grid: &GridState<T>,
    m0: usize,
    nu_star: usize,
    cfg: &LocalizerConfig<T>,
    seed: u64,
) -> Result<Vec<TargetEstimate<T>>, ClusterError> {
    let w = cfg.half_width;
    let clip_xy = |v: T| v.max(-w).min(w);
    let clip_p = |p: T| p.max(cfg.power_min).min(cfg.power_max);
    let moved = |m: usize| {
        let p = grid.points[m];
        (p.x + z[layout.dx(m)], p.y + z[layout.dy(m)], p.power + z[layout.dp(m)])
    };
    if !layout.with_activation {
        return Ok((0..grid.len())
            .map(|m| {
                let (x, y, p) = moved(m);
                TargetEstimate { x: clip_xy(x), y: clip_xy(y), power: clip_p(p) }
            })
            .collect());
    }

    let s: Vec<T> = (0..grid.len()).map(|m| z[m].max(T::zero())).collect();
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    let top: Vec<usize> = order.iter().copied().take(m0.min(grid.len())).collect();
    let pts: Vec<Point<T>> = top.iter().map(|&m| {
        let (x, y, _) = moved(m);
        Point::new(x, y)
    }).collect();
    let wts: Vec<T> = top.iter().map(|&m| s[m]).collect();

    let groups: Vec<Vec<usize>> = match kmeans(&pts, &wts, nu_star, seed, cfg.kmeans_max_iter) {
        Ok(km) => {
            let mut groups = vec![Vec::new(); nu_star];
            for (j, &l) in km.labels.iter().enumerate() {
                groups[l].push(j);
            }
            groups
        }
        Err(ClusterError::TooFewPoints { .. }) => (0..nu_star.min(top.len())).map(|j| vec![j]).collect(),
        Err(e) => return Err(e),
    };

    Ok(groups
        .iter()
        .map(|members| {
            let mass: T = members.iter().map(|&j| wts[j]).sum();
            let (mut x, mut y, mut p) = (T::zero(), T::zero(), T::zero());
            if mass > T::zero() {
                for &j in members {
                    let (mx, my, mp) = moved(top[j]);
                    x += wts[j] * mx;
                    y += wts[j] * my;
                    p += wts[j] * mp;
                }
                x /= mass;
                y /= mass;
                p /= mass;
            } else {
                let cnt = T::from_usize_lossy(members.len());
                for &j in members {
                    let (mx, my, mp) = moved(top[j]);
                    x += mx / cnt;
                    y += my / cnt;
                    p += mp / cnt;
                }
            }
            TargetEstimate { x: clip_xy(x), y: clip_xy(y), power: clip_p(p) }
        })
        .collect())
}

/// Runs the heuristic for one set of sensor readings.
#[derive(Debug, Clone)]
pub struct Localizer<T> {
    cfg: LocalizerConfig<T>,
    sensors: Vec<Point<T>>,
    rss: Vec<T>,
}

impl<T: Real> Localizer<T> {
    pub fn new(cfg: LocalizerConfig<T>, sensors: Vec<Point<T>>, rss: RssVector<T>) -> Result<Self, LocalizerError> {
        cfg.validate()?;
        if sensors.is_empty() {
            return Err(LocalizerError::Config("need at least one sensor".into()));
        }
        if sensors.len() != rss.len() {
            return Err(LocalizerError::Dimension(format!("{} sensors but {} rss values", sensors.len(), rss.len())));
        }
        Ok(Self { cfg, sensors, rss: rss.into_inner() })
    }

    pub fn config(&self) -> &LocalizerConfig<T> {
        &self.cfg
    }

    pub fn init_state(&self) -> LocalizerState<T> {
        let cfg = &self.cfg;
        let mid = (cfg.power_min + cfg.power_max) / T::lit(2.0);
        LocalizerState {
            iteration: 0,
            phase: Phase::One,
            granularity: cfg.granularity,
            mu: T::one(),
            n_targets: cfg.nu_min,
            alpha: T::lit(2.0).max(cfg.alpha_min).min(cfg.alpha_max),
            beta: T::one(),
            estimates: vec![TargetEstimate { x: T::zero(), y: T::zero(), power: mid }; cfg.nu_min],
        }
    }

    /// Executes iteration `state.iteration + 1`.
    pub fn step(&self, state: &mut LocalizerState<T>) -> Result<IterationRecord<T>, LocalizerError> {
        let cfg = &self.cfg;
        let i = state.iteration + 1;
        if i == cfg.iters_phase_one + 1 {
            state.mu = T::zero();
            state.granularity = 1;
            state.phase = Phase::Two;
        }
        let grid = build_grid(&state.estimates, state.granularity, i, cfg);
        let lin = linearize(&grid, &self.sensors, &self.rss, state.alpha, state.beta, cfg.d_floor)?;
        let residual_scale = self.rss.iter().fold(T::zero(), |m, &r| m.max(r.abs()));

        let (solution, nu_star, layout): (QpSolution<T>, usize, QpLayout) = if state.phase == Phase::One {
            let phi = build_sensing_matrix(
                &grid.positions(),
                &self.sensors,
                &cfg.params(state.alpha, state.beta),
                cfg.power_min,
                cfg.power_max,
                cfg.d_floor,
            );
            let pre = build_psi(&phi, cfg.rank_tol).map_err(|source| LocalizerError::Linalg { iteration: i, source })?;
            let input = AssemblyInput {
                lin: &lin,
                pre: Some(&pre),
                rss: &self.rss,
                grid: &grid,
                alpha: state.alpha,
                beta: state.beta,
                cfg,
                residual_scale,
            };
            let nu_hi = cfg.nu_max.min(grid.len());
            let (sol, nu) = solve_with_integer_nu(|nu| input.assemble(nu), cfg.nu_min, nu_hi, &cfg.qp)
                .map_err(|source| LocalizerError::Qp { iteration: i, source })?;
            (sol, nu, input.layout())
        } else {
            let input = AssemblyInput {
                lin: &lin,
                pre: None,
                rss: &self.rss,
                grid: &grid,
                alpha: state.alpha,
                beta: state.beta,
                cfg,
                residual_scale,
            };
            let qp = input.assemble(state.n_targets);
            let sol = solve_qp(&qp, &cfg.qp).map_err(|source| LocalizerError::Qp { iteration: i, source })?;
            (sol, state.n_targets, input.layout())
        };
        let num_vars = layout.num_vars();
        assert!(
            num_vars <= cfg.max_qp_vars(),
            "assembled {num_vars} variables, bound is {}",
            cfg.max_qp_vars()
        );

        let estimates = cluster_and_average(
            &solution.z,
            layout,
            &grid,
            cfg.m0(),
            nu_star,
            cfg,
            cfg.seed.wrapping_add(i as u64),
        )
        .map_err(|source| LocalizerError::Cluster { iteration: i, source })?;

        state.n_targets = nu_star;
        state.estimates = estimates;
        let params = cfg.params(state.alpha, state.beta);
        state.alpha = params.clip_alpha(state.alpha + solution.z[layout.dalpha()]);
        state.beta = params.clip_beta(state.beta + solution.z[layout.dbeta()]);
        state.iteration = i;

        Ok(IterationRecord {
            iteration: i,
            phase: state.phase,
            nu_star,
            objective: solution.objective,
            alpha: state.alpha,
            beta: state.beta,
            estimates: state.estimates.clone(),
            qp_status: solution.status,
            num_vars,
            misfit: misfit(&state.estimates, &self.sensors, &self.rss, state.alpha, state.beta, cfg.d_floor),
        })
    }

    /// Runs all `I1 + I2` iterations.
    pub fn run(&self) -> Result<EstimateReport<T>, LocalizerError> {
        self.run_with(|_| {})
    }

    /// Like [`Localizer::run`], handing every trace record to `observer` as it
    /// is produced.
    pub fn run_with(&self, mut observer: impl FnMut(&IterationRecord<T>)) -> Result<EstimateReport<T>, LocalizerError> {
        let mut state = self.init_state();
        let total = self.cfg.iters_phase_one + self.cfg.iters_phase_two;
        let mut trace = Vec::with_capacity(total);
        for _ in 0..total {
            let rec = self.step(&mut state)?;
            observer(&rec);
            trace.push(rec);
        }
        Ok(EstimateReport {
            model: ModelEstimate { n_targets: state.n_targets, alpha: state.alpha, beta: state.beta },
            targets: state.estimates,
            trace,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_rss, Scenario};

    fn lattice(k_side: usize, w: f64) -> Vec<Point<f64>> {
        let mut s = Vec::new();
        for i in 0..k_side {
            for j in 0..k_side {
                let t = |v: usize| -w + 2.0 * w * v as f64 / (k_side - 1) as f64;
                s.push(Point::new(t(j), t(i)));
            }
        }
        s
    }

    fn single_target_localizer(i1: usize, i2: usize) -> Localizer<f64> {
        let cfg = LocalizerConfig {
            iters_phase_one: i1,
            iters_phase_two: i2,
            nu_min: 1,
            nu_max: 1,
            alpha_min: 2.0,
            alpha_max: 2.0,
            beta_min: 1.0,
            ..LocalizerConfig::default()
        };
        let sc = Scenario {
            sensors: lattice(4, 100.0),
            targets: vec![Target { x: 50.0, y: -50.0, power: 2.5 }],
            half_width: 100.0,
            sigma_db: 0.0,
            truth: PathLossParams::fixed(2.0, 1.0).unwrap(),
            power_min: 1.0,
            power_max: 3.0,
            d_floor: 1.0,
        };
        let rss = generate_rss(&sc, 0).unwrap();
        Localizer::new(cfg, sc.sensors.clone(), rss).unwrap()
    }

    #[test]
    fn init_state_values() {
        let loc = single_target_localizer(1, 0);
        let st = loc.init_state();
        assert_eq!(st.alpha, 2.0);
        assert_eq!(st.beta, 1.0);
        assert_eq!(st.n_targets, 1);
        assert_eq!(st.mu, 1.0);
        assert!(st.estimates.iter().all(|e| e.x == 0.0 && e.y == 0.0 && e.power == 2.0));
        let cfg = LocalizerConfig::<f64> { granularity: 5, half_width: 100.0, ..LocalizerConfig::default() };
        assert_eq!(cfg.delta(), 6.25);
        assert_eq!(cfg.m0(), 25);
    }

    #[test]
    fn alpha_start_is_clipped() {
        let mut loc = single_target_localizer(1, 0);
        loc.cfg.alpha_min = 2.5;
        loc.cfg.alpha_max = 3.0;
        assert_eq!(loc.init_state().alpha, 2.5);
    }

    #[test]
    fn phase_switch() {
        let loc = single_target_localizer(2, 2);
        let mut st = loc.init_state();
        loc.step(&mut st).unwrap();
        loc.step(&mut st).unwrap();
        assert_eq!(st.phase, Phase::One);
        let rec = loc.step(&mut st).unwrap();
        assert_eq!(st.phase, Phase::Two);
        assert_eq!(st.granularity, 1);
        assert_eq!(st.mu, 0.0);
        assert_eq!(rec.num_vars, 3 + 2);
    }

    #[test]
    fn single_iteration_single_target() {
        let report = single_target_localizer(1, 0).run().unwrap();
        assert_eq!(report.targets.len(), 1);
        assert_eq!(report.model.n_targets, 1);
        assert_eq!(report.trace.len(), 1);
    }

    #[test]
    fn deterministic_trace() {
        let a = single_target_localizer(3, 2).run().unwrap();
        let b = single_target_localizer(3, 2).run().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation() {
        let bad = LocalizerConfig::<f64> { granularity: 1, ..LocalizerConfig::default() };
        assert!(bad.validate().is_err());
        let bad = LocalizerConfig::<f64> { nu_min: 3, nu_max: 2, ..LocalizerConfig::default() };
        assert!(bad.validate().is_err());
        assert!(LocalizerConfig::<f64>::default().validate().is_ok());
    }

    fn phase_one_grid() -> (GridState<f64>, QpLayout, LocalizerConfig<f64>) {
        let cfg = LocalizerConfig { granularity: 3, half_width: 100.0, ..LocalizerConfig::default() };
        let grid = build_grid(
            &[TargetEstimate { x: -50.0, y: 0.0, power: 2.0 }, TargetEstimate { x: 50.0, y: 0.0, power: 2.0 }],
            3,
            4,
            &cfg,
        );
        let layout = QpLayout { points: grid.len(), with_activation: true };
        (grid, layout, cfg)
    }

    #[test]
    fn cluster_single_group_is_weighted_centroid() {
        let (grid, layout, cfg) = phase_one_grid();
        let mut z = vec![0.0; layout.num_vars()];
        z[0] = 0.75;
        z[4] = 0.25;
        let est = cluster_and_average(&z, layout, &grid, cfg.m0(), 1, &cfg, 0).unwrap();
        assert_eq!(est.len(), 1);
        let p0 = grid.points[0];
        let p4 = grid.points[4];
        assert!((est[0].x - (0.75 * p0.x + 0.25 * p4.x)).abs() < 1e-12);
        assert!((est[0].y - (0.75 * p0.y + 0.25 * p4.y)).abs() < 1e-12);
    }

    #[test]
    fn cluster_two_groups_recovers_centroids() {
        let (grid, layout, cfg) = phase_one_grid();
        let mut z = vec![0.0; layout.num_vars()];
        // first subgrid: points 0..9, second 9..18
        for (m, s) in [(3usize, 0.5), (4, 0.5), (12, 0.5), (13, 0.5)] {
            z[m] = s;
        }
        z[layout.dx(3)] = 1.0;
        z[layout.dp(12)] = 0.5;
        let est = cluster_and_average(&z, layout, &grid, cfg.m0(), 2, &cfg, 5).unwrap();
        let mut est = est;
        est.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap());
        let c1x = (grid.points[3].x + 1.0 + grid.points[4].x) / 2.0;
        let c2x = (grid.points[12].x + grid.points[13].x) / 2.0;
        assert!((est[0].x - c1x).abs() < 1e-12);
        assert!((est[1].x - c2x).abs() < 1e-12);
        assert!((est[1].power - 2.25).abs() < 1e-12);
    }

    #[test]
    fn cluster_fallback_with_too_few_active_points() {
        let (grid, layout, cfg) = phase_one_grid();
        let mut z = vec![0.0; layout.num_vars()];
        z[2] = 1.0;
        let est = cluster_and_average(&z, layout, &grid, cfg.m0(), 2, &cfg, 5).unwrap();
        assert_eq!(est.len(), 2);
        assert_eq!((est[0].x, est[0].y), (grid.points[2].x, grid.points[2].y));
        assert_eq!((est[1].x, est[1].y), (grid.points[0].x, grid.points[0].y));
    }

    #[test]
    fn phase_two_identity_partition() {
        let cfg = LocalizerConfig::<f64>::default();
        let e = [TargetEstimate { x: 10.0, y: 20.0, power: 2.0 }, TargetEstimate { x: -30.0, y: 5.0, power: 1.5 }];
        let grid = build_grid(&e, 1, 9, &cfg);
        let layout = QpLayout { points: 2, with_activation: false };
        let mut z = vec![0.0; layout.num_vars()];
        z[layout.dx(0)] = 1.0;
        z[layout.dy(1)] = -2.0;
        z[layout.dp(1)] = 0.25;
        let est = cluster_and_average(&z, layout, &grid, cfg.m0(), 2, &cfg, 0).unwrap();
        assert_eq!(est[0], TargetEstimate { x: 11.0, y: 20.0, power: 2.0 });
        assert_eq!(est[1], TargetEstimate { x: -30.0, y: 3.0, power: 1.75 });
    }
}
