use super::{GridState, Linearization, LocalizerConfig};
use crate::linalg::{DenseMatrix, Preprocessing};
use crate::qp::{QpProblem, SumConstraint};
use crate::Real;

/// Column layout of an assembled problem:
/// `[s (M, phase one only) | dx (M) | dy (M) | dp (M) | dalpha | dbeta]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QpLayout {
    pub points: usize,
    pub with_activation: bool,
}

impl QpLayout {
    fn base(&self) -> usize {
        if self.with_activation { self.points } else { 0 }
    }

    pub fn s(&self, m: usize) -> Option<usize> {
        self.with_activation.then_some(m)
    }

    pub fn dx(&self, m: usize) -> usize {
        self.base() + m
    }

    pub fn dy(&self, m: usize) -> usize {
        self.base() + self.points + m
    }

    pub fn dp(&self, m: usize) -> usize {
        self.base() + 2 * self.points + m
    }

    pub fn dalpha(&self) -> usize {
        self.base() + 3 * self.points
    }

    pub fn dbeta(&self) -> usize {
        self.dalpha() + 1
    }

    pub fn num_vars(&self) -> usize {
        self.dbeta() + 1
    }
}

/// Everything the assembler needs besides the target count `nu`.
pub struct AssemblyInput<'a, T> {
    pub lin: &'a Linearization<T>,
    /// Present when the sparsity term is active.
    pub pre: Option<&'a Preprocessing<T>>,
    pub rss: &'a [T],
    pub grid: &'a GridState<T>,
    pub alpha: T,
    pub beta: T,
    pub cfg: &'a LocalizerConfig<T>,
    /// Divides the linearized residual rows; the argmin is unaffected because
    /// those rows share no column with the sparsity rows.
    pub residual_scale: T,
}

impl<T: Real> AssemblyInput<'_, T> {
    pub fn layout(&self) -> QpLayout {
        QpLayout { points: self.grid.len(), with_activation: self.pre.is_some() }
    }

    /// Builds the least-squares QP for a given `nu` (ignored without the
    /// sparsity term).
    pub fn assemble(&self, nu: usize) -> QpProblem<T> {
        let layout = self.layout();
        let m_len = layout.points;
        let k_len = self.lin.f.len();
        let n = layout.num_vars();
        let cs_rows = self.pre.map_or(0, |p| p.rank);
        let mut a = DenseMatrix::zeros(k_len + cs_rows, n);
        let mut b = vec![T::zero(); k_len + cs_rows];
        let scale = T::one() / self.residual_scale;

        for k in 0..k_len {
            let row = a.row_mut(k);
            for m in 0..m_len {
                row[layout.dx(m)] = self.lin.a[(k, m)] * scale;
                row[layout.dy(m)] = self.lin.b[(k, m)] * scale;
                row[layout.dp(m)] = self.lin.c[(k, m)] * scale;
            }
            row[layout.dalpha()] = self.lin.u[k] * scale;
            row[layout.dbeta()] = self.lin.v[k] * scale;
            b[k] = -self.lin.f[k] * scale;
        }
        if let Some(pre) = self.pre {
            let target = pre.psi.matvec(self.rss);
            for j in 0..pre.rank {
                let row = a.row_mut(k_len + j);
                row[..m_len].copy_from_slice(pre.q.row(j));
                b[k_len + j] = target[j];
            }
        }

        let cfg = self.cfg;
        let delta = cfg.delta();
        let mut lb = vec![T::zero(); n];
        let mut ub = vec![T::zero(); n];
        for m in 0..m_len {
            if let Some(s) = layout.s(m) {
                lb[s] = T::zero();
                ub[s] = T::one();
            }
            lb[layout.dx(m)] = -delta;
            ub[layout.dx(m)] = delta;
            lb[layout.dy(m)] = -delta;
            ub[layout.dy(m)] = delta;
            let p = self.grid.points[m].power;
            lb[layout.dp(m)] = (cfg.power_min - p).min(T::zero());
            ub[layout.dp(m)] = (cfg.power_max - p).max(T::zero());
        }
        lb[layout.dalpha()] = (cfg.alpha_min - self.alpha).min(T::zero());
        ub[layout.dalpha()] = (cfg.alpha_max - self.alpha).max(T::zero());
        lb[layout.dbeta()] = (cfg.beta_min - self.beta).min(T::zero());
        ub[layout.dbeta()] = (T::one() - self.beta).max(T::zero());

        let equality = layout
            .with_activation
            .then(|| SumConstraint { indices: (0..m_len).collect(), value: T::from_usize_lossy(nu) });
        QpProblem { a, b, lb, ub, equality }
    }
}
