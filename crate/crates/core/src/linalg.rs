//! Dense linear algebra for the compressed-sensing pre-processing.
//!
//! The SVD is a one-sided Jacobi (Hestenes) sweep, which keeps small singular
//! values accurate relative to the matrix norm and yields numerically
//! orthonormal factors. `orth_range`, `pinv` and `build_psi` all derive from it.

use std::fmt;
use std::ops::{Index, IndexMut};

use thiserror::Error;

use crate::Real;

/// Default relative cutoff on singular values: `sigma > rank_tol * sigma_max`.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

const MAX_JACOBI_SWEEPS: usize = 80;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix has numerical rank zero")]
    RankZero,
    #[error("empty matrix")]
    Empty,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
}

/// Row-major dense matrix.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: fmt::Debug> fmt::Debug for DenseMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{}", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", &self.data[i * self.cols..(i + 1) * self.cols])?;
        }
        Ok(())
    }
}

impl<T: Real> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, LinalgError> {
        if rows * cols != data.len() {
            return Err(LinalgError::Dimension(format!(
                "{rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, LinalgError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(LinalgError::Dimension("ragged rows".into()));
        }
        Self::from_row_major(rows.len(), cols, rows.concat())
    }

    pub fn diag(values: &[T]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |i, j| if i == j { values[i] } else { T::zero() })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (l, &a) in self.row(i).iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(rhs.row(l)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self * x`
    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(self.cols, x.len(), "matvec dimension mismatch");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `self^T * y`
    pub fn tr_matvec(&self, y: &[T]) -> Vec<T> {
        assert_eq!(self.rows, y.len(), "tr_matvec dimension mismatch");
        let mut out = vec![T::zero(); self.cols];
        for (i, &yi) in y.iter().enumerate() {
            if yi == T::zero() {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * yi;
            }
        }
        out
    }

    pub fn scale(&self, s: T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| v * s).collect() }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!(self.shape(), rhs.shape());
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a - b).collect(),
        }
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Keeps only the listed columns, in order.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        Self::from_fn(self.rows, cols.len(), |i, j| self[(i, cols[j])])
    }

    /// Stacks `self` on top of `below`.
    pub fn vstack(&self, below: &Self) -> Self {
        assert_eq!(self.cols, below.cols, "vstack column mismatch");
        let mut data = self.data.clone();
        data.extend_from_slice(&below.data);
        Self { rows: self.rows + below.rows, cols: self.cols, data }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Thin singular value decomposition.
    pub fn svd(&self) -> Svd<T> {
        Svd::new(self)
    }
}

impl<T> Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for DenseMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Thin SVD `X = U diag(s) V^T` with `p = min(rows, cols)` singular triplets,
/// sorted by decreasing singular value.
#[derive(Debug, Clone)]
pub struct Svd<T> {
    /// rows x p
    pub u: DenseMatrix<T>,
    pub s: Vec<T>,
    /// cols x p
    pub v: DenseMatrix<T>,
}

impl<T: Real> Svd<T> {
    pub fn new(x: &DenseMatrix<T>) -> Self {
        if x.rows >= x.cols {
            let (u, s, v) = jacobi_tall(x);
            Self { u, s, v }
        } else {
            let (v, s, u) = jacobi_tall(&x.transpose());
            Self { u, s, v }
        }
    }

    pub fn sigma_max(&self) -> T {
        self.s.first().copied().unwrap_or_else(T::zero)
    }

    /// Number of singular values above `rank_tol * sigma_max`.
    pub fn rank(&self, rank_tol: T) -> usize {
        let cut = self.cutoff(rank_tol);
        self.s.iter().take_while(|&&s| s > cut).count()
    }

    fn cutoff(&self, rank_tol: T) -> T {
        let dims = T::from_usize_lossy(self.u.rows.max(self.v.rows));
        rank_tol.max(T::epsilon() * dims) * self.sigma_max()
    }

    /// Minimum-norm least-squares solution of `X z = b`.
    pub fn solve_min_norm(&self, b: &[T], rank_tol: T) -> Vec<T> {
        self.solve_truncated(b, self.rank(rank_tol))
    }

    /// Like [`Svd::solve_min_norm`] but keeps only singular values above an
    /// absolute `cutoff`.
    pub fn solve_above(&self, b: &[T], cutoff: T) -> Vec<T> {
        let r = self.s.iter().take_while(|&&s| s > cutoff).count();
        self.solve_truncated(b, r)
    }

    fn solve_truncated(&self, b: &[T], r: usize) -> Vec<T> {
        let mut z = vec![T::zero(); self.v.rows];
        for j in 0..r {
            let coef = (0..self.u.rows).fold(T::zero(), |acc, i| acc + self.u[(i, j)] * b[i]) / self.s[j];
            for (i, zi) in z.iter_mut().enumerate() {
                *zi += coef * self.v[(i, j)];
            }
        }
        z
    }
}

/// One-sided Jacobi on a tall matrix (`rows >= cols`): returns `(U, s, V)`.
fn jacobi_tall<T: Real>(x: &DenseMatrix<T>) -> (DenseMatrix<T>, Vec<T>, DenseMatrix<T>) {
    let (m, n) = x.shape();
    // work in column-major for contiguous column access
    let mut cols: Vec<Vec<T>> = (0..n).map(|j| x.column(j)).collect();
    let mut v: Vec<Vec<T>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { T::one() } else { T::zero() }).collect())
        .collect();
    let eps = T::epsilon();
    let tiny = T::min_positive_value();
    let mut norms: Vec<T> = cols.iter().map(|c| dot(c, c)).collect();

    for _ in 0..MAX_JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = norms[p];
                let beta = norms[q];
                if alpha <= tiny || beta <= tiny {
                    continue;
                }
                let gamma = dot(&cols[p], &cols[q]);
                if gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                let (left, right) = cols.split_at_mut(q);
                rotate(&mut left[p], &mut right[0], c, s);
                let (left, right) = v.split_at_mut(q);
                rotate(&mut left[p], &mut right[0], c, s);
                norms[p] = dot(&cols[p], &cols[p]);
                norms[q] = dot(&cols[q], &cols[q]);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let sv: Vec<T> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    order.sort_by(|&a, &b| sv[b].partial_cmp(&sv[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));

    let mut u = DenseMatrix::zeros(m, n);
    let mut vm = DenseMatrix::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    for (jj, &j) in order.iter().enumerate() {
        let sigma = sv[j];
        s.push(sigma);
        for i in 0..n {
            vm[(i, jj)] = v[j][i];
        }
        if sigma > tiny {
            for i in 0..m {
                u[(i, jj)] = cols[j][i] / sigma;
            }
        }
    }
    complete_null_columns(&mut u, &s);
    (u, s, vm)
}

#[inline]
fn rotate<T: Real>(a: &mut [T], b: &mut [T], c: T, s: T) {
    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
        let (xa, yb) = (*x, *y);
        *x = c * xa - s * yb;
        *y = s * xa + c * yb;
    }
}

/// Columns of `u` belonging to zero singular values are left zero by the
/// sweep; fill them with an orthonormal completion so `U` stays orthonormal.
fn complete_null_columns<T: Real>(u: &mut DenseMatrix<T>, s: &[T]) {
    let m = u.rows;
    let tiny = T::min_positive_value();
    for j in 0..s.len() {
        if s[j] > tiny {
            continue;
        }
        'candidates: for e in 0..m {
            let mut c: Vec<T> = (0..m).map(|i| if i == e { T::one() } else { T::zero() }).collect();
            for _ in 0..2 {
                for l in 0..u.cols {
                    if l == j {
                        continue;
                    }
                    let proj = (0..m).fold(T::zero(), |acc, i| acc + u[(i, l)] * c[i]);
                    for (i, ci) in c.iter_mut().enumerate() {
                        *ci -= proj * u[(i, l)];
                    }
                }
            }
            let nrm = dot(&c, &c).sqrt();
            if nrm > T::lit(1e-3) {
                for i in 0..m {
                    u[(i, j)] = c[i] / nrm;
                }
                break 'candidates;
            }
        }
    }
}

/// Orthonormal basis (as columns) of the range of `x`.
pub fn orth_range<T: Real>(x: &DenseMatrix<T>, rank_tol: T) -> Result<DenseMatrix<T>, LinalgError> {
    if x.is_empty() {
        return Err(LinalgError::Empty);
    }
    let svd = x.svd();
    orth_from_svd(&svd, rank_tol)
}

fn orth_from_svd<T: Real>(svd: &Svd<T>, rank_tol: T) -> Result<DenseMatrix<T>, LinalgError> {
    if svd.sigma_max() <= T::zero() {
        return Err(LinalgError::RankZero);
    }
    let r = svd.rank(rank_tol);
    Ok(DenseMatrix::from_fn(svd.u.rows, r, |i, j| svd.u[(i, j)]))
}

/// Moore-Penrose pseudoinverse.
pub fn pinv<T: Real>(x: &DenseMatrix<T>, rank_tol: T) -> DenseMatrix<T> {
    if x.is_empty() {
        return DenseMatrix::zeros(x.cols, x.rows);
    }
    pinv_from_svd(&x.svd(), rank_tol)
}

fn pinv_from_svd<T: Real>(svd: &Svd<T>, rank_tol: T) -> DenseMatrix<T> {
    let (m, n) = (svd.u.rows, svd.v.rows);
    let r = if svd.sigma_max() > T::zero() { svd.rank(rank_tol) } else { 0 };
    DenseMatrix::from_fn(n, m, |i, j| {
        (0..r).fold(T::zero(), |acc, l| acc + svd.v[(i, l)] * svd.u[(j, l)] / svd.s[l])
    })
}

/// The pre-processing pair for a sensing matrix `Phi`.
#[derive(Debug, Clone)]
pub struct Preprocessing<T> {
    /// `orth(Phi^T)^T * pinv(Phi)`, `rank x K`
    pub psi: DenseMatrix<T>,
    /// `psi * Phi`, `rank x M`, orthonormal rows
    pub q: DenseMatrix<T>,
    pub rank: usize,
}

/// Builds `Psi = orth(Phi^T)^T pinv(Phi)` and `Q = Psi Phi` from one SVD of `Phi`.
pub fn build_psi<T: Real>(phi: &DenseMatrix<T>, rank_tol: T) -> Result<Preprocessing<T>, LinalgError> {
    if phi.is_empty() {
        return Err(LinalgError::Empty);
    }
    let svd = phi.svd();
    if svd.sigma_max() <= T::zero() {
        return Err(LinalgError::RankZero);
    }
    // range(Phi^T) is spanned by the leading right singular vectors of Phi
    let rank = svd.rank(rank_tol);
    let basis = DenseMatrix::from_fn(svd.v.rows, rank, |i, j| svd.v[(i, j)]);
    let psi = basis.transpose().matmul(&pinv_from_svd(&svd, rank_tol));
    let q = psi.matmul(phi);
    Ok(Preprocessing { psi, q, rank })
}

/// Solves `A x = b` for symmetric positive definite `A` via Cholesky.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    l: DenseMatrix<T>,
}

impl<T: Real> Cholesky<T> {
    pub fn new(a: &DenseMatrix<T>) -> Result<Self, LinalgError> {
        let n = a.rows;
        if a.cols != n {
            return Err(LinalgError::Dimension("cholesky needs a square matrix".into()));
        }
        let mut l = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > T::zero()) {
                return Err(LinalgError::NotPositiveDefinite);
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(Self { l })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.l.rows;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.l[(k, i)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> DenseMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn projector(basis: &DenseMatrix<f64>) -> DenseMatrix<f64> {
        basis.matmul(&basis.transpose())
    }

    /// Modified Gram-Schmidt with re-orthogonalization; independent of the SVD path.
    fn gram_schmidt(x: &DenseMatrix<f64>, tol: f64) -> DenseMatrix<f64> {
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for j in 0..x.cols() {
            let mut c = x.column(j);
            for _ in 0..2 {
                for b in &basis {
                    let p: f64 = b.iter().zip(&c).map(|(a, b)| a * b).sum();
                    c.iter_mut().zip(b).for_each(|(ci, bi)| *ci -= p * bi);
                }
            }
            let n = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > tol {
                basis.push(c.into_iter().map(|v| v / n).collect());
            }
        }
        DenseMatrix::from_fn(x.rows(), basis.len(), |i, j| basis[j][i])
    }

    fn orthonormality_error(cols: &DenseMatrix<f64>) -> f64 {
        cols.transpose().matmul(cols).sub(&DenseMatrix::identity(cols.cols())).max_abs()
    }

    #[test]
    fn svd_reconstructs() {
        for (r, c, seed) in [(6, 4, 1), (4, 6, 2), (5, 5, 3), (1, 7, 4)] {
            let x = random(r, c, seed);
            let svd = x.svd();
            let us = DenseMatrix::from_fn(r, svd.s.len(), |i, j| svd.u[(i, j)] * svd.s[j]);
            let back = us.matmul(&svd.v.transpose());
            assert!(back.sub(&x).max_abs() < 1e-13);
            assert!(orthonormality_error(&svd.v) < 1e-13);
            assert!(svd.s.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn orth_identity() {
        let q = orth_range(&DenseMatrix::<f64>::identity(2), DEFAULT_RANK_TOL).unwrap();
        assert_eq!(q.cols(), 2);
        assert!(projector(&q).sub(&DenseMatrix::identity(2)).max_abs() < 1e-14);
    }

    #[test]
    fn orth_rank_one_column() {
        let x = DenseMatrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        let q = orth_range(&x, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(q.shape(), (2, 1));
        let h = 1.0 / 2f64.sqrt();
        assert!((q[(0, 0)].abs() - h).abs() < 1e-15);
        assert_eq!(q[(0, 0)].signum(), q[(1, 0)].signum());
    }

    #[test]
    fn orth_full_row_rank_matches_gram_schmidt() {
        let x = random(5, 8, 11);
        let q = orth_range(&x, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(q.cols(), 5);
        assert!(orthonormality_error(&q) < 1e-12);
        let oracle = gram_schmidt(&x, 1e-10);
        assert_eq!(oracle.cols(), 5);
        assert!(projector(&q).sub(&projector(&oracle)).max_abs() < 1e-12);
        assert!(projector(&q).sub(&DenseMatrix::identity(5)).max_abs() < 1e-12);
    }

    #[test]
    fn orth_rank_deficient_matches_gram_schmidt() {
        let a = random(7, 3, 5);
        let x = a.matmul(&random(3, 6, 6));
        let q = orth_range(&x, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(q.cols(), 3);
        let oracle = gram_schmidt(&x, 1e-8);
        assert!(projector(&q).sub(&projector(&oracle)).max_abs() < 1e-10);
    }

    #[test]
    fn orth_rejects_zero() {
        assert_eq!(orth_range(&DenseMatrix::<f64>::zeros(3, 2), DEFAULT_RANK_TOL), Err(LinalgError::RankZero));
    }

    fn penrose_error(x: &DenseMatrix<f64>, xp: &DenseMatrix<f64>) -> f64 {
        let xxp = x.matmul(xp);
        let xpx = xp.matmul(x);
        [
            xxp.matmul(x).sub(x).max_abs(),
            xpx.matmul(xp).sub(xp).max_abs(),
            xxp.transpose().sub(&xxp).max_abs(),
            xpx.transpose().sub(&xpx).max_abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    #[test]
    fn pinv_examples() {
        let i3 = DenseMatrix::<f64>::identity(3);
        assert!(pinv(&i3, DEFAULT_RANK_TOL).sub(&i3).max_abs() < 1e-15);

        let d = DenseMatrix::diag(&[2.0, 0.0]);
        let dp = pinv(&d, DEFAULT_RANK_TOL);
        assert!(dp.sub(&DenseMatrix::diag(&[0.5, 0.0])).max_abs() < 1e-15);

        let z = DenseMatrix::<f64>::zeros(2, 3);
        assert_eq!(pinv(&z, DEFAULT_RANK_TOL), DenseMatrix::zeros(3, 2));
    }

    #[test]
    fn pinv_penrose_conditions() {
        for seed in 0..10 {
            let x = random(4, 7, 100 + seed);
            let xp = pinv(&x, DEFAULT_RANK_TOL);
            assert_eq!(xp.shape(), (7, 4));
            assert!(penrose_error(&x, &xp) < 1e-10);
            assert!(pinv(&xp, DEFAULT_RANK_TOL).sub(&x).max_abs() < 1e-10);
        }
        // rank deficient
        let x = random(6, 2, 1).matmul(&random(2, 5, 2));
        assert!(penrose_error(&x, &pinv(&x, DEFAULT_RANK_TOL)) < 1e-10);
    }

    #[test]
    fn psi_of_identity() {
        let pre = build_psi(&DenseMatrix::<f64>::identity(3), DEFAULT_RANK_TOL).unwrap();
        assert_eq!(pre.rank, 3);
        assert!(pre.q.matmul(&pre.q.transpose()).sub(&DenseMatrix::identity(3)).max_abs() < 1e-14);
    }

    #[test]
    fn psi_rank_deficient_hand_case() {
        // Phi = [[2, 0], [0, 0]]: pinv = [[0.5, 0], [0, 0]], orth(Phi^T) = +-e1,
        // so Psi = +-[0.5, 0] and Q = +-[1, 0]
        let phi = DenseMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let pre = build_psi(&phi, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(pre.psi.shape(), (1, 2));
        assert_eq!(pre.q.shape(), (1, 2));
        assert!((pre.psi[(0, 0)].abs() - 0.5).abs() < 1e-15 && pre.psi[(0, 1)] == 0.0);
        assert!((pre.q[(0, 0)].abs() - 1.0).abs() < 1e-15 && pre.q[(0, 1)] == 0.0);
        assert!((pre.q.matmul(&pre.q.transpose())[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn psi_rejects_zero() {
        assert!(matches!(build_psi(&DenseMatrix::<f64>::zeros(2, 2), DEFAULT_RANK_TOL), Err(LinalgError::RankZero)));
    }

    #[test]
    fn min_norm_solution() {
        // underdetermined: x + y = 2 -> (1, 1)
        let a = DenseMatrix::from_rows(&[vec![1.0, 1.0]]).unwrap();
        let z: Vec<f64> = a.svd().solve_min_norm(&[2.0], 1e-12);
        assert!((z[0] - 1.0).abs() < 1e-15 && (z[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cholesky_solves() {
        let a = random(5, 5, 3);
        let spd = a.matmul(&a.transpose()).sub(&DenseMatrix::identity(5).scale(-1.0));
        let ch = Cholesky::new(&spd).unwrap();
        let b = vec![1.0, -2.0, 0.5, 3.0, 0.0];
        let x = ch.solve(&b);
        let back = spd.matvec(&x);
        assert!(back.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-12));
        assert!(Cholesky::new(&DenseMatrix::diag(&[1.0, -1.0])).is_err());
    }

    #[test]
    fn svd_f32() {
        let x = DenseMatrix::<f32>::from_rows(&[vec![3.0, 0.0], vec![0.0, 4.0]]).unwrap();
        let svd = x.svd();
        assert!((svd.s[0] - 4.0).abs() < 1e-6 && (svd.s[1] - 3.0).abs() < 1e-6);
    }
}
