//! Convex least-squares QP over a box intersected with one sum constraint:
//!
//! ```text
//! minimize ||A z - b||^2   s.t.  lb <= z <= ub,  sum_{i in S} z_i = c
//! ```
//!
//! Solved with ADMM on the splitting `z = y, y in C`, where the projection onto
//! `C` is exact (piecewise-linear root search on the sum multiplier). Once the
//! ADMM iterates settle, an active-set polish started from the projected
//! iterate finishes the job to machine precision; it only ever moves along
//! descent segments, so the objective never increases while polishing.

use thiserror::Error;

use crate::linalg::{dot, Cholesky, DenseMatrix, LinalgError};
use crate::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("lower bound exceeds upper bound at variable {0}")]
    CrossedBounds(usize),
    #[error("empty nu range [{0}, {1}]")]
    EmptyNuRange(usize, usize),
    #[error("every nu in [{0}, {1}] is infeasible")]
    AllInfeasible(usize, usize),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// `sum_{i in indices} z_i = value`
#[derive(Debug, Clone, PartialEq)]
pub struct SumConstraint<T> {
    pub indices: Vec<usize>,
    pub value: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem<T> {
    pub a: DenseMatrix<T>,
    pub b: Vec<T>,
    pub lb: Vec<T>,
    pub ub: Vec<T>,
    pub equality: Option<SumConstraint<T>>,
}

impl<T: Real> QpProblem<T> {
    /// Unconstrained least squares.
    pub fn unconstrained(a: DenseMatrix<T>, b: Vec<T>) -> Self {
        let n = a.cols();
        Self { a, b, lb: vec![T::neg_infinity(); n], ub: vec![T::infinity(); n], equality: None }
    }

    pub fn num_vars(&self) -> usize {
        self.a.cols()
    }

    pub fn validate(&self) -> Result<(), QpError> {
        let n = self.a.cols();
        if self.b.len() != self.a.rows() {
            return Err(QpError::Dimension(format!("b has {} rows, A has {}", self.b.len(), self.a.rows())));
        }
        if self.lb.len() != n || self.ub.len() != n {
            return Err(QpError::Dimension("bounds length differs from column count".into()));
        }
        if let Some(i) = (0..n).find(|&i| !(self.lb[i] <= self.ub[i])) {
            return Err(QpError::CrossedBounds(i));
        }
        if let Some(eq) = &self.equality {
            if eq.indices.iter().any(|&i| i >= n) {
                return Err(QpError::Dimension("equality index out of range".into()));
            }
        }
        Ok(())
    }

    pub fn objective(&self, z: &[T]) -> T {
        residual(&self.a, &self.b, z).iter().map(|r| *r * *r).sum()
    }

    /// `2 A^T (A z - b)`
    pub fn gradient(&self, z: &[T]) -> Vec<T> {
        let r = residual(&self.a, &self.b, z);
        self.a.tr_matvec(&r).into_iter().map(|g| g + g).collect()
    }

    /// Equality range `[sum lb, sum ub]` over the constrained indices holds `value`.
    pub fn is_feasible(&self) -> bool {
        match &self.equality {
            None => true,
            Some(eq) => {
                let lo: T = eq.indices.iter().map(|&i| self.lb[i]).sum();
                let hi: T = eq.indices.iter().map(|&i| self.ub[i]).sum();
                lo <= eq.value && eq.value <= hi
            }
        }
    }

    /// Euclidean projection onto the feasible set.
    pub fn project(&self, y: &[T]) -> Vec<T> {
        let set = FeasibleSet::unit(self);
        let mut z = y.to_vec();
        set.project(&mut z);
        z
    }
}

fn residual<T: Real>(a: &DenseMatrix<T>, b: &[T], z: &[T]) -> Vec<T> {
    a.matvec(z).into_iter().zip(b).map(|(az, &bi)| az - bi).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QpStatus {
    Optimal,
    MaxIter,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution<T> {
    pub z: Vec<T>,
    pub objective: T,
    pub status: QpStatus,
    pub kkt_residual: T,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSettings<T> {
    pub tol_abs: T,
    pub tol_rel: T,
    pub max_iter: usize,
    /// Initial ADMM penalty.
    pub rho: T,
    /// Residual-balancing period for `rho`.
    pub adapt_interval: usize,
    pub relaxation: T,
    pub polish: bool,
}

impl<T: Real> Default for QpSettings<T> {
    fn default() -> Self {
        Self {
            tol_abs: T::lit(1e-8),
            tol_rel: T::lit(1e-6),
            max_iter: 50_000,
            rho: T::one(),
            adapt_interval: 25,
            relaxation: T::lit(1.6),
            polish: true,
        }
    }
}

/// Box plus an optional weighted sum constraint `sum_i w_i z_i = value`.
struct FeasibleSet<'a, T> {
    lb: &'a [T],
    ub: &'a [T],
    eq: Option<(&'a [usize], Vec<T>, T)>,
}

impl<'a, T: Real> FeasibleSet<'a, T> {
    fn unit(p: &'a QpProblem<T>) -> Self {
        Self {
            lb: &p.lb,
            ub: &p.ub,
            eq: p.equality.as_ref().map(|e| (e.indices.as_slice(), vec![T::one(); e.indices.len()], e.value)),
        }
    }

    fn project(&self, z: &mut [T]) {
        // the constrained coordinates must be shifted before clipping
        let y: Vec<T> = self.eq.as_ref().map_or(Vec::new(), |(idx, _, _)| idx.iter().map(|&i| z[i]).collect());
        for (i, zi) in z.iter_mut().enumerate() {
            *zi = zi.max(self.lb[i]).min(self.ub[i]);
        }
        let Some((idx, w, value)) = &self.eq else { return };
        // z_i(l) = clip(y_i - l w_i) is non-increasing in l; so is g(l).
        let at = |l: T, i: usize| (y[i] - l * w[i]).max(self.lb[idx[i]]).min(self.ub[idx[i]]);
        let g = |l: T| (0..idx.len()).fold(T::zero(), |acc, i| acc + w[i] * at(l, i)) - *value;
        let slope = |l: T| {
            -(0..idx.len())
                .filter(|&i| {
                    let t = y[i] - l * w[i];
                    self.lb[idx[i]] < t && t < self.ub[idx[i]]
                })
                .fold(T::zero(), |acc, i| acc + w[i] * w[i])
        };
        let mut bps: Vec<T> = Vec::with_capacity(2 * idx.len());
        for i in 0..idx.len() {
            for bound in [self.lb[idx[i]], self.ub[idx[i]]] {
                if bound.is_finite() {
                    bps.push((y[i] - bound) / w[i]);
                }
            }
        }
        bps.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
        bps.dedup();

        let lambda = if bps.is_empty() {
            let s = slope(T::zero());
            if s == T::zero() { T::zero() } else { -g(T::zero()) / s }
        } else {
            let first = bps[0];
            let last = bps[bps.len() - 1];
            let g_first = g(first);
            let g_last = g(last);
            if g_first < T::zero() {
                let s = slope(first - T::one());
                if s == T::zero() { first } else { first - g_first / s }
            } else if g_last > T::zero() {
                let s = slope(last + T::one());
                if s == T::zero() { last } else { last - g_last / s }
            } else {
                // invariant: g(bps[lo]) >= 0 >= g(bps[hi])
                let (mut lo, mut hi) = (0usize, bps.len() - 1);
                while hi - lo > 1 {
                    let mid = (lo + hi) / 2;
                    if g(bps[mid]) >= T::zero() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let (gl, gh) = (g(bps[lo]), g(bps[hi]));
                if gl == gh || lo == hi {
                    bps[lo]
                } else {
                    bps[lo] + gl * (bps[hi] - bps[lo]) / (gl - gh)
                }
            }
        };
        for (k, &i) in idx.iter().enumerate() {
            z[i] = at(lambda, k);
        }
    }
}

/// `||z - P_C(z - grad f(z))||_inf`: zero exactly at a minimizer.
pub fn kkt_residual<T: Real>(p: &QpProblem<T>, z: &[T]) -> T {
    let g = p.gradient(z);
    let step: Vec<T> = z.iter().zip(&g).map(|(&zi, &gi)| zi - gi).collect();
    let proj = p.project(&step);
    z.iter().zip(&proj).fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
}

/// Linear solves with `2 A^T A + rho I`, through the smaller of the two Gram
/// systems.
struct KktFactor<T> {
    rho: T,
    chol: Cholesky<T>,
    woodbury: bool,
}

impl<T: Real> KktFactor<T> {
    fn new(a: &DenseMatrix<T>, rho: T) -> Result<Self, QpError> {
        let (r, n) = a.shape();
        let two = T::lit(2.0);
        let woodbury = r < n;
        let gram = if woodbury {
            // rho/2 I + A A^T
            DenseMatrix::from_fn(r, r, |i, j| {
                dot(a.row(i), a.row(j)) + if i == j { rho / two } else { T::zero() }
            })
        } else {
            let at = a.transpose();
            DenseMatrix::from_fn(n, n, |i, j| two * dot(at.row(i), at.row(j)) + if i == j { rho } else { T::zero() })
        };
        Ok(Self { rho, chol: Cholesky::new(&gram)?, woodbury })
    }

    fn solve(&self, a: &DenseMatrix<T>, v: &[T]) -> Vec<T> {
        if self.woodbury {
            // (rho I + 2 A^T A)^-1 = (I - A^T (rho/2 I + A A^T)^-1 A) / rho
            let t = self.chol.solve(&a.matvec(v));
            let corr = a.tr_matvec(&t);
            v.iter().zip(&corr).map(|(&vi, &ci)| (vi - ci) / self.rho).collect()
        } else {
            self.chol.solve(v)
        }
    }
}

fn inf_norm<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

/// Solves one QP instance.
pub fn solve_qp<T: Real>(p: &QpProblem<T>, settings: &QpSettings<T>) -> Result<QpSolution<T>, QpError> {
    p.validate()?;
    let n = p.num_vars();
    if !p.is_feasible() {
        let z = p.project(&vec![T::zero(); n]);
        return Ok(QpSolution {
            objective: p.objective(&z),
            kkt_residual: T::infinity(),
            z,
            status: QpStatus::Infeasible,
            iterations: 0,
        });
    }
    // below this the projected gradient is rounding noise
    let noise_floor = T::lit(0.1) * T::epsilon().sqrt() * inf_norm(&p.gradient(&vec![T::zero(); n]));
    let kkt_tol = settings.tol_rel.max(noise_floor);
    if n == 0 {
        return Ok(QpSolution {
            z: vec![],
            objective: p.objective(&[]),
            status: QpStatus::Optimal,
            kkt_residual: T::zero(),
            iterations: 0,
        });
    }

    // column equilibration: z = D zs
    let col_norm: Vec<T> = (0..n)
        .map(|j| (0..p.a.rows()).fold(T::zero(), |acc, i| acc + p.a[(i, j)] * p.a[(i, j)]).sqrt())
        .collect();
    let max_norm = col_norm.iter().fold(T::zero(), |m, &c| m.max(c));
    let d: Vec<T> = col_norm
        .iter()
        .map(|&c| if c > T::lit(1e-12) * max_norm && c > T::zero() { T::one() / c } else { T::one() })
        .collect();
    let a_s = DenseMatrix::from_fn(p.a.rows(), n, |i, j| p.a[(i, j)] * d[j]);
    let lb_s: Vec<T> = (0..n).map(|i| p.lb[i] / d[i]).collect();
    let ub_s: Vec<T> = (0..n).map(|i| p.ub[i] / d[i]).collect();
    let set = FeasibleSet {
        lb: &lb_s,
        ub: &ub_s,
        eq: p.equality.as_ref().map(|e| (e.indices.as_slice(), e.indices.iter().map(|&i| d[i]).collect(), e.value)),
    };
    let unscale = |zs: &[T]| -> Vec<T> { zs.iter().zip(&d).map(|(&z, &di)| z * di).collect() };

    let two = T::lit(2.0);
    let atb2: Vec<T> = a_s.tr_matvec(&p.b).into_iter().map(|v| v * two).collect();
    let mut rho = settings.rho;
    let mut factor = KktFactor::new(&a_s, rho)?;
    let mut y = vec![T::zero(); n];
    set.project(&mut y);
    let mut lam = vec![T::zero(); n];
    let mut x = y.clone();
    let relax = settings.relaxation;

    let mut best: Option<(Vec<T>, T)> = None;
    let consider = |z: Vec<T>, best: &mut Option<(Vec<T>, T)>| -> Option<QpSolution<T>> {
        let kkt = kkt_residual(p, &z);
        let better = best.as_ref().is_none_or(|(_, k)| kkt < *k);
        if kkt <= kkt_tol {
            return Some(QpSolution { objective: p.objective(&z), z, status: QpStatus::Optimal, kkt_residual: kkt, iterations: 0 });
        }
        if better {
            *best = Some((z, kkt));
        }
        None
    };

    let mut last_polish_at: Option<usize> = None;
    for iter in 1..=settings.max_iter {
        let rhs: Vec<T> = (0..n).map(|i| atb2[i] + rho * (y[i] - lam[i])).collect();
        x = factor.solve(&a_s, &rhs);
        let y_prev = y.clone();
        let xr: Vec<T> = (0..n).map(|i| relax * x[i] + (T::one() - relax) * y_prev[i]).collect();
        for i in 0..n {
            y[i] = xr[i] + lam[i];
        }
        set.project(&mut y);
        for i in 0..n {
            lam[i] += xr[i] - y[i];
        }

        if iter % settings.adapt_interval != 0 && iter != settings.max_iter {
            continue;
        }
        let r_pri = (0..n).fold(T::zero(), |m, i| m.max((x[i] - y[i]).abs()));
        let r_dual = rho * (0..n).fold(T::zero(), |m, i| m.max((y[i] - y_prev[i]).abs()));
        let scale_pri = inf_norm(&x).max(inf_norm(&y));
        let scale_dual = rho * inf_norm(&lam);
        let eps_pri = settings.tol_abs + settings.tol_rel * scale_pri;
        let eps_dual = settings.tol_abs + settings.tol_rel * scale_dual;
        let converged = r_pri <= eps_pri && r_dual <= eps_dual;
        let loose = r_pri <= T::lit(1e3) * eps_pri && r_dual <= T::lit(1e3) * eps_dual;

        if converged {
            if let Some(mut sol) = consider(unscale(&y), &mut best) {
                sol.iterations = iter;
                return Ok(sol);
            }
        }
        let polish_due = settings.polish && (loose || iter % 500 == 0) && last_polish_at.is_none_or(|k| iter >= k + 100);
        if polish_due {
            last_polish_at = Some(iter);
            if let Some(z) = polish(p, &unscale(&y), kkt_tol) {
                if let Some(mut sol) = consider(z, &mut best) {
                    sol.iterations = iter;
                    return Ok(sol);
                }
            }
        }

        let rel_pri = r_pri / scale_pri.max(T::lit(1e-12));
        let rel_dual = r_dual / scale_dual.max(T::lit(1e-12));
        if rel_dual > T::zero() && rel_pri > T::zero() {
            let new_rho = (rho * (rel_pri / rel_dual).sqrt()).max(T::lit(1e-6)).min(T::lit(1e6));
            if new_rho > rho * T::lit(5.0) || new_rho < rho / T::lit(5.0) {
                for l in lam.iter_mut() {
                    *l = *l * rho / new_rho;
                }
                rho = new_rho;
                factor = KktFactor::new(&a_s, rho)?;
            }
        }
    }

    let _ = x;
    let (z, kkt) = best.unwrap_or_else(|| {
        let z = unscale(&y);
        let k = kkt_residual(p, &z);
        (z, k)
    });
    Ok(QpSolution { objective: p.objective(&z), z, status: QpStatus::MaxIter, kkt_residual: kkt, iterations: settings.max_iter })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Activity {
    Free,
    Lower,
    Upper,
}

/// Primal active-set iterations started from a (nearly) feasible point.
/// Returns `None` if the round budget runs out or the start is unusable.
fn polish<T: Real>(p: &QpProblem<T>, start: &[T], kkt_tol: T) -> Option<Vec<T>> {
    let n = p.num_vars();
    let mut z = p.project(start);
    let mut in_eq = vec![false; n];
    if let Some(e) = &p.equality {
        for &i in &e.indices {
            in_eq[i] = true;
        }
    }
    // snapping a constrained coordinate would break the equality, so those
    // only count as active when the projection put them exactly on a bound
    let scale_tol = |i: usize, b: T| if in_eq[i] { T::zero() } else { T::lit(1e-9) * T::one().max(b.abs()) };
    let mut act: Vec<Activity> = (0..n)
        .map(|i| {
            if p.lb[i] == p.ub[i] || z[i] <= p.lb[i] + scale_tol(i, p.lb[i]) {
                Activity::Lower
            } else if z[i] >= p.ub[i] - scale_tol(i, p.ub[i]) {
                Activity::Upper
            } else {
                Activity::Free
            }
        })
        .collect();
    for i in 0..n {
        match act[i] {
            Activity::Lower => z[i] = p.lb[i],
            Activity::Upper => z[i] = p.ub[i],
            Activity::Free => {}
        }
    }
    let eq_value = p.equality.as_ref().map(|e| e.value);

    let col_scale: Vec<T> = (0..n)
        .map(|j| {
            let c = (0..p.a.rows()).fold(T::zero(), |acc, i| acc + p.a[(i, j)] * p.a[(i, j)]).sqrt();
            if c > T::zero() { T::one() / c } else { T::one() }
        })
        .collect();

    let rounds = 3 * n + 20;
    for _ in 0..rounds {
        let free: Vec<usize> = (0..n).filter(|&i| act[i] == Activity::Free).collect();
        let r0: Vec<T> = residual(&p.a, &p.b, &z).into_iter().map(|v| -v).collect();
        // equality defect carried by free constrained variables
        let free_eq: Vec<usize> = (0..free.len()).filter(|&k| in_eq[free[k]]).collect();
        let defect = eq_value.map_or(T::zero(), |v| v - (0..n).filter(|&i| in_eq[i]).map(|i| z[i]).sum::<T>());
        if free_eq.is_empty() && defect.abs() > T::lit(1e-10) * T::one().max(eq_value.unwrap_or(T::zero()).abs()) {
            return None;
        }

        let mut step = vec![T::zero(); free.len()];
        if !free.is_empty() {
            // scaled variables: delta_free = S u, equality weights e_k = S_k on free_eq
            let s: Vec<T> = free.iter().map(|&i| col_scale[i]).collect();
            let mut bmat = DenseMatrix::from_fn(p.a.rows(), free.len(), |i, k| p.a[(i, free[k])] * s[k]);
            // rounding left over from the projection must not count as rank
            let cutoff = T::lit(1e-11) * bmat.as_slice().iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt();
            let mut u_part = vec![T::zero(); free.len()];
            let mut rhs = r0.clone();
            let e: Vec<T> = (0..free.len()).map(|k| if in_eq[free[k]] { s[k] } else { T::zero() }).collect();
            let ee = dot(&e, &e);
            if !free_eq.is_empty() {
                for k in 0..free.len() {
                    u_part[k] = e[k] * defect / ee;
                }
                let bu = bmat.matvec(&u_part);
                for (r, v) in rhs.iter_mut().zip(&bu) {
                    *r -= *v;
                }
                // B P with P = I - e e^T / ee
                let be = bmat.matvec(&e);
                for i in 0..bmat.rows() {
                    for k in 0..free.len() {
                        bmat[(i, k)] -= be[i] * e[k] / ee;
                    }
                }
            }
            let mut u = if bmat.rows() == 0 { vec![T::zero(); free.len()] } else { face_solve(&bmat, &rhs, cutoff) };
            if !free_eq.is_empty() {
                let eu = dot(&e, &u) / ee;
                for (uk, ek) in u.iter_mut().zip(&e) {
                    *uk -= eu * *ek;
                }
            }
            for k in 0..free.len() {
                step[k] = (u_part[k] + u[k]) * s[k];
            }
        }

        // ratio test
        let mut t = T::one();
        let mut blocking: Option<(usize, Activity)> = None;
        for (k, &i) in free.iter().enumerate() {
            let dk = step[k];
            if dk < T::zero() && p.lb[i].is_finite() {
                let ti = (p.lb[i] - z[i]) / dk;
                if ti < t {
                    t = ti.max(T::zero());
                    blocking = Some((i, Activity::Lower));
                }
            } else if dk > T::zero() && p.ub[i].is_finite() {
                let ti = (p.ub[i] - z[i]) / dk;
                if ti < t {
                    t = ti.max(T::zero());
                    blocking = Some((i, Activity::Upper));
                }
            }
        }
        if blocking.is_some() {
            // try the full step projected back onto the face's feasible set;
            // it can activate many bounds at once
            if let Some(trial) = projected_step(p, &z, &free, &step, &in_eq, eq_value) {
                let mut ratio = z.clone();
                for (k, &i) in free.iter().enumerate() {
                    ratio[i] += t * step[k];
                }
                if p.objective(&trial) < p.objective(&ratio) {
                    z = trial;
                    let mut moved = false;
                    for &i in &free {
                        let tol = if in_eq[i] { T::zero() } else { T::lit(1e-12) * T::one().max(z[i].abs()) };
                        if z[i] <= p.lb[i] + tol {
                            z[i] = p.lb[i];
                            act[i] = Activity::Lower;
                            moved = true;
                        } else if z[i] >= p.ub[i] - tol {
                            z[i] = p.ub[i];
                            act[i] = Activity::Upper;
                            moved = true;
                        }
                    }
                    if moved {
                        continue;
                    }
                }
            }
        }
        for (k, &i) in free.iter().enumerate() {
            z[i] += t * step[k];
        }
        if let Some((i, side)) = blocking {
            act[i] = side;
            z[i] = if side == Activity::Lower { p.lb[i] } else { p.ub[i] };
            continue;
        }

        // stationary on the current face: check multiplier signs
        let g = p.gradient(&z);
        let gscale = T::lit(1e-10) * T::one().max(inf_norm(&g));
        let free_eq_vars: Vec<usize> = free.iter().copied().filter(|&i| in_eq[i]).collect();
        let eta = if !free_eq_vars.is_empty() {
            -free_eq_vars.iter().map(|&i| g[i]).sum::<T>() / T::from_usize_lossy(free_eq_vars.len())
        } else if p.equality.is_some() {
            let lo = (0..n)
                .filter(|&i| in_eq[i] && act[i] == Activity::Lower && p.lb[i] < p.ub[i])
                .map(|i| -g[i])
                .fold(T::neg_infinity(), T::max);
            let hi = (0..n)
                .filter(|&i| in_eq[i] && act[i] == Activity::Upper && p.lb[i] < p.ub[i])
                .map(|i| -g[i])
                .fold(T::infinity(), T::min);
            match (lo.is_finite(), hi.is_finite()) {
                (true, true) => (lo + hi) / T::lit(2.0),
                (true, false) => lo,
                (false, true) => hi,
                (false, false) => T::zero(),
            }
        } else {
            T::zero()
        };
        let mut worst: Option<(usize, T)> = None;
        for i in 0..n {
            if act[i] == Activity::Free || p.lb[i] == p.ub[i] {
                continue;
            }
            let m = g[i] + if in_eq[i] { eta } else { T::zero() };
            let violation = match act[i] {
                Activity::Lower => -m,
                Activity::Upper => m,
                Activity::Free => T::zero(),
            };
            if violation > gscale && worst.is_none_or(|(_, v)| violation > v) {
                worst = Some((i, violation));
            }
        }
        match worst {
            Some((i, _)) => act[i] = Activity::Free,
            None => {
                return if kkt_residual(p, &z) <= kkt_tol { Some(z) } else { None };
            }
        }
    }
    None
}

/// Minimum-norm least squares `B u ~ rhs` through a slightly ridged Gram
/// system on the smaller side; falls back to the SVD if that is not
/// positive definite.
fn face_solve<T: Real>(b: &DenseMatrix<T>, rhs: &[T], cutoff: T) -> Vec<T> {
    let (r, f) = b.shape();
    let wide = r <= f;
    let gram = if wide {
        DenseMatrix::from_fn(r, r, |i, j| dot(b.row(i), b.row(j)))
    } else {
        let bt = b.transpose();
        DenseMatrix::from_fn(f, f, |i, j| dot(bt.row(i), bt.row(j)))
    };
    let dim = gram.rows();
    let max_diag = (0..dim).fold(T::zero(), |m, i| m.max(gram[(i, i)]));
    let ridge = T::lit(1e-12) * max_diag;
    let reg = DenseMatrix::from_fn(dim, dim, |i, j| gram[(i, j)] + if i == j { ridge } else { T::zero() });
    match Cholesky::new(&reg) {
        Ok(ch) if ridge > T::zero() => {
            if wide {
                b.tr_matvec(&ch.solve(rhs))
            } else {
                ch.solve(&b.tr_matvec(rhs))
            }
        }
        _ => b.svd().solve_above(rhs, cutoff),
    }
}

/// `z + step` on the free coordinates, projected onto the box and what is left
/// of the equality once the active coordinates are fixed.
fn projected_step<T: Real>(
    p: &QpProblem<T>,
    z: &[T],
    free: &[usize],
    step: &[T],
    in_eq: &[bool],
    eq_value: Option<T>,
) -> Option<Vec<T>> {
    let lb: Vec<T> = free.iter().map(|&i| p.lb[i]).collect();
    let ub: Vec<T> = free.iter().map(|&i| p.ub[i]).collect();
    let eq_pos: Vec<usize> = (0..free.len()).filter(|&k| in_eq[free[k]]).collect();
    let eq = match eq_value {
        Some(v) if !eq_pos.is_empty() => {
            let fixed: T = (0..z.len()).filter(|&i| in_eq[i] && !free.contains(&i)).map(|i| z[i]).sum();
            let w = vec![T::one(); eq_pos.len()];
            Some((eq_pos.as_slice(), w, v - fixed))
        }
        _ => None,
    };
    let set = FeasibleSet { lb: &lb, ub: &ub, eq };
    let mut sub: Vec<T> = free.iter().zip(step).map(|(&i, &d)| z[i] + d).collect();
    set.project(&mut sub);
    if !sub.iter().all(|v| v.is_finite()) {
        return None;
    }
    let mut out = z.to_vec();
    for (k, &i) in free.iter().enumerate() {
        out[i] = sub[k];
    }
    Some(out)
}

/// Solves the QP for every integer `nu` in `[nu_min, nu_max]`, skipping
/// infeasible ones. The result is ordered by `nu`.
pub fn solve_each_nu<T, F>(
    builder: F,
    nu_min: usize,
    nu_max: usize,
    settings: &QpSettings<T>,
) -> Result<Vec<(usize, QpSolution<T>)>, QpError>
where
    T: Real,
    F: Fn(usize) -> QpProblem<T>,
{
    if nu_min > nu_max || nu_min == 0 {
        return Err(QpError::EmptyNuRange(nu_min, nu_max));
    }
    let mut out = Vec::with_capacity(nu_max - nu_min + 1);
    for nu in nu_min..=nu_max {
        let sol = solve_qp(&builder(nu), settings)?;
        if sol.status != QpStatus::Infeasible {
            out.push((nu, sol));
        }
    }
    if out.is_empty() {
        return Err(QpError::AllInfeasible(nu_min, nu_max));
    }
    Ok(out)
}

/// Solves the QP for every integer `nu` in `[nu_min, nu_max]` and keeps the
/// smallest objective; ties go to the smaller `nu`.
pub fn solve_with_integer_nu<T, F>(
    builder: F,
    nu_min: usize,
    nu_max: usize,
    settings: &QpSettings<T>,
) -> Result<(QpSolution<T>, usize), QpError>
where
    T: Real,
    F: Fn(usize) -> QpProblem<T>,
{
    let mut best: Option<(QpSolution<T>, usize)> = None;
    for (nu, sol) in solve_each_nu(builder, nu_min, nu_max, settings)? {
        if best.as_ref().is_none_or(|(b, _)| sol.objective < b.objective) {
            best = Some((sol, nu));
        }
    }
    Ok(best.expect("solve_each_nu never returns an empty list"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn settings() -> QpSettings<f64> {
        QpSettings::default()
    }

    #[test]
    fn unconstrained_identity() {
        let p = QpProblem::unconstrained(DenseMatrix::identity(2), vec![1.0, 1.0]);
        let s = solve_qp(&p, &settings()).unwrap();
        assert_eq!(s.status, QpStatus::Optimal);
        assert!((s.z[0] - 1.0).abs() < 1e-9 && (s.z[1] - 1.0).abs() < 1e-9);
        assert!(s.objective < 1e-16);
    }

    #[test]
    fn clipped_scalar() {
        let p = QpProblem { a: DenseMatrix::identity(1), b: vec![2.0], lb: vec![0.0], ub: vec![1.0], equality: None };
        let s = solve_qp(&p, &settings()).unwrap();
        assert_eq!(s.status, QpStatus::Optimal);
        assert!((s.z[0] - 1.0).abs() < 1e-12);
        assert!((s.objective - 1.0).abs() < 1e-12);
    }

    fn simplex_norm(m: usize, nu: usize) -> QpProblem<f64> {
        QpProblem {
            a: DenseMatrix::identity(m),
            b: vec![0.0; m],
            lb: vec![0.0; m],
            ub: vec![1.0; m],
            equality: Some(SumConstraint { indices: (0..m).collect(), value: nu as f64 }),
        }
    }

    #[test]
    fn symmetric_simplex_slice() {
        let s = solve_qp(&simplex_norm(5, 2), &settings()).unwrap();
        assert_eq!(s.status, QpStatus::Optimal);
        for z in &s.z {
            assert!((z - 0.4).abs() < 1e-9);
        }
        assert!((s.objective - 0.8).abs() < 1e-9);
    }

    #[test]
    fn infeasible_sum() {
        let s = solve_qp(&simplex_norm(3, 4), &settings()).unwrap();
        assert_eq!(s.status, QpStatus::Infeasible);
    }

    #[test]
    fn rejects_bad_dimensions() {
        let mut p = simplex_norm(3, 1);
        p.b.push(0.0);
        assert!(matches!(solve_qp(&p, &settings()), Err(QpError::Dimension(_))));
        let mut p = simplex_norm(3, 1);
        p.lb[1] = 2.0;
        assert_eq!(solve_qp(&p, &settings()), Err(QpError::CrossedBounds(1)));
    }

    #[test]
    fn projection_lands_on_slice() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let n = rng.random_range(1..12);
            let lb: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..0.0)).collect();
            let ub: Vec<f64> = lb.iter().map(|l| l + rng.random_range(0.0..3.0)).collect();
            let lo: f64 = lb.iter().sum();
            let hi: f64 = ub.iter().sum();
            let value = lo + rng.random_range(0.0..=1.0) * (hi - lo);
            let p = QpProblem {
                a: DenseMatrix::identity(n),
                b: vec![0.0; n],
                lb: lb.clone(),
                ub: ub.clone(),
                equality: Some(SumConstraint { indices: (0..n).collect(), value }),
            };
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let z = p.project(&y);
            assert!((z.iter().sum::<f64>() - value).abs() < 1e-10);
            assert!(z.iter().zip(&lb).zip(&ub).all(|((z, l), u)| *l <= *z && *z <= *u));
            // projection optimality: y - z = lambda on interior coordinates
            let inner: Vec<f64> = (0..n).filter(|&i| z[i] > lb[i] + 1e-12 && z[i] < ub[i] - 1e-12).map(|i| y[i] - z[i]).collect();
            if let Some(first) = inner.first() {
                assert!(inner.iter().all(|v| (v - first).abs() < 1e-9));
            }
        }
    }

    #[test]
    fn projection_with_infinite_bounds() {
        let p = QpProblem {
            a: DenseMatrix::identity(3),
            b: vec![0.0; 3],
            lb: vec![f64::NEG_INFINITY, 0.0, f64::NEG_INFINITY],
            ub: vec![f64::INFINITY, 1.0, 0.5],
            equality: Some(SumConstraint { indices: vec![0, 1, 2], value: 3.0 }),
        };
        let z = p.project(&[0.0, 0.0, 0.0]);
        assert!((z.iter().sum::<f64>() - 3.0).abs() < 1e-12);
        assert!(z[1] <= 1.0 && z[2] <= 0.5);
    }

    #[test]
    fn kkt_residual_examples() {
        let p = QpProblem::unconstrained(DenseMatrix::identity(2), vec![1.0, -3.0]);
        assert!(kkt_residual(&p, &[1.0, -3.0]) < 1e-12);
        // at z = 0 with bound [0, 1]: gradient 2(z - 2) = -4 pushes up; at z = 1 the
        // gradient -2 points outward of the upper bound, residual zero
        let p = QpProblem { a: DenseMatrix::identity(1), b: vec![2.0], lb: vec![0.0], ub: vec![1.0], equality: None };
        assert_eq!(kkt_residual(&p, &[1.0]), 0.0);
        let p2 = QpProblem { lb: vec![3.0], ub: vec![4.0], ..p.clone() };
        assert_eq!(kkt_residual(&p2, &[3.0]), 0.0);
        // non-optimal interior point: z - P(z - g) with g = 2(0.5 - 2) = -3 -> P(3.5) = 1
        assert!((kkt_residual(&p, &[0.5f64]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn integer_nu_singleton_matches_direct() {
        let (sol, nu) = solve_with_integer_nu(|nu| simplex_norm(4, nu), 1, 1, &settings()).unwrap();
        let direct = solve_qp(&simplex_norm(4, 1), &settings()).unwrap();
        assert_eq!(nu, 1);
        assert_eq!(sol, direct);
    }

    #[test]
    fn integer_nu_picks_smaller_objective() {
        let (sol, nu) = solve_with_integer_nu(|nu| simplex_norm(4, nu), 1, 2, &settings()).unwrap();
        assert_eq!(nu, 1);
        assert!((sol.objective - 0.25).abs() < 1e-9);
    }

    #[test]
    fn integer_nu_tie_goes_low() {
        // objective does not depend on the constrained variable block
        let build = |nu: usize| QpProblem {
            a: DenseMatrix::from_rows(&[vec![1.0, 0.0, 0.0]]).unwrap(),
            b: vec![1.0],
            lb: vec![-10.0, 0.0, 0.0],
            ub: vec![10.0, 1.0, 1.0],
            equality: Some(SumConstraint { indices: vec![1, 2], value: nu as f64 }),
        };
        let (_, nu) = solve_with_integer_nu(build, 1, 2, &settings()).unwrap();
        assert_eq!(nu, 1);
    }

    #[test]
    fn integer_nu_errors() {
        assert_eq!(
            solve_with_integer_nu(|nu| simplex_norm(4, nu), 3, 2, &settings()).unwrap_err(),
            QpError::EmptyNuRange(3, 2)
        );
        assert_eq!(
            solve_with_integer_nu(|nu| simplex_norm(2, nu), 3, 4, &settings()).unwrap_err(),
            QpError::AllInfeasible(3, 4)
        );
    }

    #[test]
    fn scaling_leaves_argmin() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let a = DenseMatrix::from_fn(6, 4, |_, _| rng.random_range(-1.0..1.0));
        let b: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let base = QpProblem {
            a,
            b,
            lb: vec![-0.3; 4],
            ub: vec![0.4; 4],
            equality: Some(SumConstraint { indices: vec![0, 1], value: 0.1 }),
        };
        let s1 = solve_qp(&base, &settings()).unwrap();
        let scaled = QpProblem { a: base.a.scale(7.5), b: base.b.iter().map(|v| v * 7.5).collect(), ..base.clone() };
        let s2 = solve_qp(&scaled, &settings()).unwrap();
        assert!(s1.z.iter().zip(&s2.z).all(|(a, b)| (a - b).abs() < 1e-6));
        assert!((s2.objective - 56.25 * s1.objective).abs() < 1e-6 * s2.objective.max(1.0));
    }

    #[test]
    fn underdetermined_with_bounds_is_optimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = DenseMatrix::from_fn(8, 103, |_, _| rng.random_range(0.0..1.0));
        let b: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..5.0)).collect();
        let p = QpProblem {
            a,
            b,
            lb: vec![0.0; 103],
            ub: vec![1.0; 103],
            equality: Some(SumConstraint { indices: (0..25).collect(), value: 2.0 }),
        };
        let s = solve_qp(&p, &settings()).unwrap();
        assert_eq!(s.status, QpStatus::Optimal);
        assert!(s.kkt_residual <= 1e-6);
        assert!((s.z[..25].iter().sum::<f64>() - 2.0).abs() < 1e-8);
    }
}
