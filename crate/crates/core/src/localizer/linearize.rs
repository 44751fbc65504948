//! First-order model of the RSS residual around the current grid.
//!
//! With `g_km = w_m p_m d_km^-alpha beta^d_km` the residual at sensor `k` is
//! `f_k = r_k - sum_m g_km`. Its partial derivatives are
//!
//! ```text
//! a_km = df_k/dx_m = -g_km (-alpha/d + ln beta) (x_m - X_k) / d
//! b_km = df_k/dy_m = -g_km (-alpha/d + ln beta) (y_m - Y_k) / d
//! c_km = df_k/dp_m = -w_m d^-alpha beta^d
//! u_k  = df_k/dalpha = sum_m g_km ln d_km
//! v_k  = df_k/dbeta  = -sum_m g_km d_km / beta
//! ```
//!
//! Inside the distance floor the position derivatives vanish.

use super::{GridState, LocalizerError};
use crate::linalg::DenseMatrix;
use crate::model::{gain, Point};
use crate::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Linearization<T> {
    pub f: Vec<T>,
    pub u: Vec<T>,
    pub v: Vec<T>,
    pub a: DenseMatrix<T>,
    pub b: DenseMatrix<T>,
    pub c: DenseMatrix<T>,
}

impl<T: Real> Linearization<T> {
    pub fn is_finite(&self) -> bool {
        self.f.iter().chain(&self.u).chain(&self.v).all(|x| x.is_finite())
            && self.a.is_finite()
            && self.b.is_finite()
            && self.c.is_finite()
    }
}

/// Residual `f_k = r_k - sum_m w_m p_m gain(d_km)` for a grid.
pub fn residuals<T: Real>(grid: &GridState<T>, sensors: &[Point<T>], rss: &[T], alpha: T, beta: T, d_floor: T) -> Vec<T> {
    sensors
        .iter()
        .zip(rss)
        .map(|(s, &r)| {
            let model: T = grid
                .points
                .iter()
                .zip(&grid.weights)
                .map(|(p, &w)| {
                    let d = (p.x - s.x).hypot(p.y - s.y).max(d_floor);
                    w * p.power * gain(d, alpha, beta)
                })
                .sum();
            r - model
        })
        .collect()
}

pub fn linearize<T: Real>(
    grid: &GridState<T>,
    sensors: &[Point<T>],
    rss: &[T],
    alpha: T,
    beta: T,
    d_floor: T,
) -> Result<Linearization<T>, LocalizerError> {
    if !(beta > T::zero()) {
        return Err(LocalizerError::NonPositiveBeta(beta.as_f64()));
    }
    if sensors.len() != rss.len() {
        return Err(LocalizerError::Dimension(format!("{} sensors but {} rss values", sensors.len(), rss.len())));
    }
    let k_len = sensors.len();
    let m_len = grid.len();
    let ln_beta = beta.ln();
    let mut f = rss.to_vec();
    let mut u = vec![T::zero(); k_len];
    let mut v = vec![T::zero(); k_len];
    let mut a = DenseMatrix::zeros(k_len, m_len);
    let mut b = DenseMatrix::zeros(k_len, m_len);
    let mut c = DenseMatrix::zeros(k_len, m_len);
    for (k, s) in sensors.iter().enumerate() {
        for (m, (p, &w)) in grid.points.iter().zip(&grid.weights).enumerate() {
            let dx = p.x - s.x;
            let dy = p.y - s.y;
            let raw = dx.hypot(dy);
            let d = raw.max(d_floor);
            let kernel = gain(d, alpha, beta);
            let g = w * p.power * kernel;
            f[k] -= g;
            c[(k, m)] = -w * kernel;
            if raw > d_floor {
                let common = -g * (ln_beta - alpha / d) / d;
                a[(k, m)] = common * dx;
                b[(k, m)] = common * dy;
            }
            u[k] += g * d.ln();
            v[k] -= g * d / beta;
        }
    }
    Ok(Linearization { f, u, v, a, b, c })
}
