//! Generic smooth constrained-program interface consumed by the solver and
//! the KKT/CQ analysis code.

use nalgebra::{DMatrix, DVector};
use std::ops::Range;

/// Structure of the line-state equality rows inside a system's equality
/// block, when present. Used by the CQ diagnostics to isolate the
/// state/cardinality sub-block and its null combination.
#[derive(Debug, Clone)]
pub struct UStructure {
    /// Equality row range of the per-line state constraints u(u-1) = 0.
    pub state_rows: Range<usize>,
    /// Equality row index of the cardinality constraint sum(u) = |N| - 1.
    pub count_row: usize,
    /// Column range of the u variables.
    pub u_cols: Range<usize>,
}

/// A smooth program min f(z) s.t. g(z) = 0, h(z) <= 0 with analytic first
/// derivatives and the Lagrangian Hessian (inequalities here are affine, so
/// only equality multipliers enter the Hessian).
pub trait ConstraintSystem {
    fn dim(&self) -> usize;
    fn n_eq(&self) -> usize;
    fn n_ineq(&self) -> usize;
    fn objective(&self, z: &DVector<f64>) -> f64;
    fn grad_objective(&self, z: &DVector<f64>) -> DVector<f64>;
    fn eval_g(&self, z: &DVector<f64>) -> DVector<f64>;
    fn eval_h(&self, z: &DVector<f64>) -> DVector<f64>;
    fn jac_g(&self, z: &DVector<f64>) -> DMatrix<f64>;
    fn jac_h(&self, z: &DVector<f64>) -> DMatrix<f64>;
    fn hess_lagrangian(&self, z: &DVector<f64>, obj_w: f64, lambda: &DVector<f64>) -> DMatrix<f64>;
    /// Labeled row ranges of the equality block, in row order.
    fn g_labels(&self) -> Vec<(String, Range<usize>)>;
    /// Labeled row ranges of the inequality block, in row order.
    fn h_labels(&self) -> Vec<(String, Range<usize>)>;
    fn u_structure(&self) -> Option<UStructure> {
        None
    }
}

/// Active inequality rows: |h_i(z)| <= tol * (1 + ||z||_inf).
pub fn active_set(sys: &dyn ConstraintSystem, z: &DVector<f64>, tol: f64) -> Vec<usize> {
    let h = sys.eval_h(z);
    let scale = 1.0 + z.amax();
    (0..h.len()).filter(|&i| h[i].abs() <= tol * scale).collect()
}

/// View of a system with a subset of coordinates held fixed; the solver works
/// in the free coordinates only. Fixed slots keep the values of `base`.
pub struct ReducedSystem<'a> {
    inner: &'a dyn ConstraintSystem,
    free: Vec<usize>,
    base: DVector<f64>,
}

impl<'a> ReducedSystem<'a> {
    pub fn new(inner: &'a dyn ConstraintSystem, free: Vec<usize>, base: DVector<f64>) -> Self {
        assert_eq!(base.len(), inner.dim());
        Self { inner, free, base }
    }

    pub fn expand(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut z = self.base.clone();
        for (k, &i) in self.free.iter().enumerate() {
            z[i] = x[k];
        }
        z
    }

    pub fn restrict(&self, z: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.free.len(), self.free.iter().map(|&i| z[i]))
    }

    fn cols(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(m.nrows(), self.free.len(), |r, c| m[(r, self.free[c])])
    }
}

impl ConstraintSystem for ReducedSystem<'_> {
    fn dim(&self) -> usize {
        self.free.len()
    }
    fn n_eq(&self) -> usize {
        self.inner.n_eq()
    }
    fn n_ineq(&self) -> usize {
        self.inner.n_ineq()
    }
    fn objective(&self, x: &DVector<f64>) -> f64 {
        self.inner.objective(&self.expand(x))
    }
    fn grad_objective(&self, x: &DVector<f64>) -> DVector<f64> {
        let g = self.inner.grad_objective(&self.expand(x));
        DVector::from_iterator(self.free.len(), self.free.iter().map(|&i| g[i]))
    }
    fn eval_g(&self, x: &DVector<f64>) -> DVector<f64> {
        self.inner.eval_g(&self.expand(x))
    }
    fn eval_h(&self, x: &DVector<f64>) -> DVector<f64> {
        self.inner.eval_h(&self.expand(x))
    }
    fn jac_g(&self, x: &DVector<f64>) -> DMatrix<f64> {
        self.cols(&self.inner.jac_g(&self.expand(x)))
    }
    fn jac_h(&self, x: &DVector<f64>) -> DMatrix<f64> {
        self.cols(&self.inner.jac_h(&self.expand(x)))
    }
    fn hess_lagrangian(&self, x: &DVector<f64>, obj_w: f64, lambda: &DVector<f64>) -> DMatrix<f64> {
        let h = self.inner.hess_lagrangian(&self.expand(x), obj_w, lambda);
        DMatrix::from_fn(self.free.len(), self.free.len(), |r, c| {
            h[(self.free[r], self.free[c])]
        })
    }
    fn g_labels(&self) -> Vec<(String, Range<usize>)> {
        self.inner.g_labels()
    }
    fn h_labels(&self) -> Vec<(String, Range<usize>)> {
        self.inner.h_labels()
    }
}
