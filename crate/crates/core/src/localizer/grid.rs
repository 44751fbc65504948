use serde::Serialize;

use super::{LocalizerConfig, Phase, TargetEstimate};
use crate::model::Point;
use crate::Real;

/// One candidate emitter location `(x, y)` with its candidate power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPoint<T> {
    pub x: T,
    pub y: T,
    pub power: T,
}

impl<T: Real> GridPoint<T> {
    pub fn position(&self) -> Point<T> {
        Point::new(self.x, self.y)
    }
}

/// Grid points of one iteration. In phase one every current estimate owns a
/// `G x G` subgrid; in phase two each estimate is a single point.
#[derive(Debug, Clone, PartialEq)]
pub struct GridState<T> {
    pub points: Vec<GridPoint<T>>,
    /// Index of the estimate whose subgrid produced each point.
    pub owner: Vec<usize>,
    /// Per-point weight in the RSS model.
    pub weights: Vec<T>,
    pub granularity: usize,
    pub subgrid_half_width: T,
    pub phase: Phase,
}

impl<T: Real> GridState<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn positions(&self) -> Vec<Point<T>> {
        self.points.iter().map(GridPoint::position).collect()
    }
}

/// Subgrid half-width at iteration `i` (1-based): `max(w * shrink^(i-1), 4 delta)`.
pub fn subgrid_half_width<T: Real>(cfg: &LocalizerConfig<T>, iteration: usize) -> T {
    let exp = i32::try_from(iteration.saturating_sub(1)).unwrap_or(i32::MAX);
    (cfg.half_width * cfg.shrink.powi(exp)).max(T::lit(4.0) * cfg.delta())
}

/// Grid around the current estimates.
///
/// With `granularity >= 2`, each estimate gets a uniform `G x G` lattice of
/// half-width `subgrid_half_width(cfg, iteration)`, clipped to the area and
/// carrying the estimate's power. With `granularity == 1` the grid is the
/// estimates themselves.
pub fn build_grid<T: Real>(
    estimates: &[TargetEstimate<T>],
    granularity: usize,
    iteration: usize,
    cfg: &LocalizerConfig<T>,
) -> GridState<T> {
    let w = cfg.half_width;
    let clip = |v: T| v.max(-w).min(w);
    if granularity <= 1 {
        return GridState {
            points: estimates.iter().map(|e| GridPoint { x: clip(e.x), y: clip(e.y), power: e.power }).collect(),
            owner: (0..estimates.len()).collect(),
            weights: vec![T::one(); estimates.len()],
            granularity: 1,
            subgrid_half_width: T::zero(),
            phase: Phase::Two,
        };
    }
    let h = subgrid_half_width(cfg, iteration);
    let g = granularity;
    let per_point = T::one() / T::from_usize_lossy(g * g);
    let offsets: Vec<T> = (0..g)
        .map(|j| h * (T::lit(2.0) * T::from_usize_lossy(j) / T::from_usize_lossy(g - 1) - T::one()))
        .collect();
    let mut points = Vec::with_capacity(estimates.len() * g * g);
    let mut owner = Vec::with_capacity(points.capacity());
    for (n, e) in estimates.iter().enumerate() {
        for &oy in &offsets {
            for &ox in &offsets {
                points.push(GridPoint { x: clip(e.x + ox), y: clip(e.y + oy), power: e.power });
                owner.push(n);
            }
        }
    }
    let m = points.len();
    GridState {
        points,
        owner,
        weights: vec![per_point; m],
        granularity: g,
        subgrid_half_width: h,
        phase: Phase::One,
    }
}
