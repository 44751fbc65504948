//! Weighted k-means: k-means++ seeding with weighted D^2 sampling followed by
//! Lloyd sweeps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::Point;
use crate::Real;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClusterError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("{points} points but {weights} weights")]
    LengthMismatch { points: usize, weights: usize },
    #[error("k = {k} exceeds the {distinct} distinct positively weighted points")]
    TooFewPoints { k: usize, distinct: usize },
    #[error("weights must be finite and non-negative")]
    BadWeight,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans<T> {
    pub labels: Vec<usize>,
    pub centers: Vec<Point<T>>,
    /// Weighted within-cluster squared distance after every assignment step.
    pub objective_history: Vec<T>,
    pub iterations: usize,
}

impl<T: Real> KMeans<T> {
    pub fn objective(&self) -> T {
        self.objective_history.last().copied().unwrap_or_else(T::zero)
    }
}

#[inline]
fn sq_dist<T: Real>(a: Point<T>, b: Point<T>) -> T {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    dx * dx + dy * dy
}

fn count_distinct<T: Real>(points: &[Point<T>], weights: &[T]) -> usize {
    let mut seen: Vec<Point<T>> = Vec::new();
    for (p, &w) in points.iter().zip(weights) {
        if w > T::zero() && !seen.contains(p) {
            seen.push(*p);
        }
    }
    seen.len()
}

/// Index drawn with probability proportional to `mass`.
fn sample_index<T: Real>(rng: &mut ChaCha8Rng, mass: &[T]) -> Option<usize> {
    let total: T = mass.iter().copied().sum();
    if !(total > T::zero()) {
        return None;
    }
    let target = T::lit(rng.random::<f64>()) * total;
    let mut acc = T::zero();
    let mut last_positive = None;
    for (i, &m) in mass.iter().enumerate() {
        if m > T::zero() {
            acc += m;
            last_positive = Some(i);
            if acc > target {
                return Some(i);
            }
        }
    }
    last_positive
}

fn assign<T: Real>(points: &[Point<T>], weights: &[T], centers: &[Point<T>], labels: &mut [usize]) -> T {
    let mut obj = T::zero();
    for (i, p) in points.iter().enumerate() {
        let (best, d) = centers
            .iter()
            .enumerate()
            .map(|(c, ctr)| (c, sq_dist(*p, *ctr)))
            .fold((0, T::infinity()), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
        labels[i] = best;
        obj += weights[i] * d;
    }
    obj
}

/// Clusters weighted 2-D points into `k` groups.
///
/// Clusters are non-empty in positive weight; an emptied cluster is reseeded
/// at the point contributing most to the objective.
pub fn kmeans<T: Real>(
    points: &[Point<T>],
    weights: &[T],
    k: usize,
    seed: u64,
    max_iter: usize,
) -> Result<KMeans<T>, ClusterError> {
    if k == 0 {
        return Err(ClusterError::ZeroK);
    }
    if points.len() != weights.len() {
        return Err(ClusterError::LengthMismatch { points: points.len(), weights: weights.len() });
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= T::zero())) {
        return Err(ClusterError::BadWeight);
    }
    let distinct = count_distinct(points, weights);
    if k > distinct {
        return Err(ClusterError::TooFewPoints { k, distinct });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<Point<T>> = Vec::with_capacity(k);
    let first = sample_index(&mut rng, weights).expect("positive weight exists");
    centers.push(points[first]);
    let mut nearest: Vec<T> = points.iter().map(|p| sq_dist(*p, points[first])).collect();
    while centers.len() < k {
        let mass: Vec<T> = nearest.iter().zip(weights).map(|(&d, &w)| d * w).collect();
        let next = sample_index(&mut rng, &mass).expect("distinct positive points remain");
        centers.push(points[next]);
        for (d, p) in nearest.iter_mut().zip(points) {
            *d = d.min(sq_dist(*p, points[next]));
        }
    }

    let mut labels = vec![0usize; points.len()];
    let mut history = vec![assign(points, weights, &centers, &mut labels)];
    let mut iterations = 0;
    for _ in 0..max_iter {
        iterations += 1;
        // update
        let mut sums = vec![(T::zero(), T::zero(), T::zero()); k];
        for (i, p) in points.iter().enumerate() {
            let s = &mut sums[labels[i]];
            s.0 += weights[i] * p.x;
            s.1 += weights[i] * p.y;
            s.2 += weights[i];
        }
        for (c, s) in sums.iter().enumerate() {
            if s.2 > T::zero() {
                centers[c] = Point::new(s.0 / s.2, s.1 / s.2);
            }
        }
        // empty-cluster repair
        loop {
            let mut mass = vec![T::zero(); k];
            for (i, &l) in labels.iter().enumerate() {
                mass[l] += weights[i];
            }
            let Some(empty) = (0..k).find(|&c| mass[c] <= T::zero()) else { break };
            let (worst, _) = points
                .iter()
                .enumerate()
                .filter(|(i, _)| weights[*i] > T::zero() && !centers.contains(&points[*i]))
                .map(|(i, p)| (i, weights[i] * sq_dist(*p, centers[labels[i]])))
                .fold((usize::MAX, T::neg_infinity()), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
            if worst == usize::MAX {
                break;
            }
            centers[empty] = points[worst];
            labels[worst] = empty;
            assign(points, weights, &centers, &mut labels);
        }
        let prev = labels.clone();
        let obj = assign(points, weights, &centers, &mut labels);
        history.push(obj);
        if labels == prev && iterations > 1 {
            break;
        }
    }
    // final centers consistent with final labels
    let mut sums = vec![(T::zero(), T::zero(), T::zero()); k];
    for (i, p) in points.iter().enumerate() {
        let s = &mut sums[labels[i]];
        s.0 += weights[i] * p.x;
        s.1 += weights[i] * p.y;
        s.2 += weights[i];
    }
    for (c, s) in sums.iter().enumerate() {
        if s.2 > T::zero() {
            centers[c] = Point::new(s.0 / s.2, s.1 / s.2);
        }
    }
    Ok(KMeans { labels, centers, objective_history: history, iterations })
}
