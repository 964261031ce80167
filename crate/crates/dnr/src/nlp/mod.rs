//! Slack-based primal-dual interior-point solver for smooth NLPs with
//! equality and inequality constraints, returning primal solutions and
//! Lagrange multipliers.

pub mod linalg;
pub mod nnls;
pub mod powerflow;

use log::debug;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::ConstraintSystem;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iter: usize,
    pub tol_stat: f64,
    pub tol_feas: f64,
    pub tol_comp: f64,
    /// Fraction-to-boundary factor.
    pub tau: f64,
    pub mu_init: f64,
    /// Monotone barrier reduction factor.
    pub mu_shrink: f64,
    pub verbose: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol_stat: 1e-8,
            tol_feas: 1e-8,
            tol_comp: 1e-8,
            tau: 0.995,
            mu_init: 0.1,
            mu_shrink: 0.2,
            verbose: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIter,
    NumericalFailure,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub feasibility: f64,
    pub complementarity: f64,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub z: DVector<f64>,
    pub lambda: DVector<f64>,
    pub mu: DVector<f64>,
    pub iterations: usize,
    pub kkt_residuals: KktResiduals,
    pub objective: f64,
    /// Barrier parameter per iteration (nonincreasing).
    pub mu_trace: Vec<f64>,
}

struct Residuals {
    r_d: DVector<f64>,
    r_p: DVector<f64>,
    r_s: DVector<f64>,
}

fn residuals(
    sys: &dyn ConstraintSystem,
    x: &DVector<f64>,
    s: &DVector<f64>,
    lam: &DVector<f64>,
    mu: &DVector<f64>,
) -> Residuals {
    let grad = sys.grad_objective(x);
    let jg = sys.jac_g(x);
    let jh = sys.jac_h(x);
    let r_d = grad + jg.transpose() * lam + jh.transpose() * mu;
    let r_p = sys.eval_g(x);
    let r_s = sys.eval_h(x) + s;
    Residuals { r_d, r_p, r_s }
}

fn merit(
    sys: &dyn ConstraintSystem,
    x: &DVector<f64>,
    s: &DVector<f64>,
    lam: &DVector<f64>,
    mu: &DVector<f64>,
    mu_bar: f64,
) -> f64 {
    let r = residuals(sys, x, s, lam, mu);
    let mut acc = r.r_d.norm_squared() + r.r_p.norm_squared() + r.r_s.norm_squared();
    for i in 0..s.len() {
        let c = mu[i] * s[i] - mu_bar;
        acc += c * c;
    }
    acc.sqrt()
}

/// Solve min f(x) s.t. g(x)=0, h(x)<=0 starting from `x0`. On `Optimal`, the
/// returned multipliers satisfy -grad f = J_g^T lambda + J_h^T mu with
/// mu >= 0 to the requested tolerances.
pub fn solve(
    sys: &dyn ConstraintSystem,
    x0: &DVector<f64>,
    opts: &SolverOptions,
) -> Result<SolveResult> {
    let n = sys.dim();
    let mg = sys.n_eq();
    let mh = sys.n_ineq();
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x0.len(),
        });
    }

    let mut x = x0.clone();
    let h0 = sys.eval_h(&x);
    let mut s = DVector::from_fn(mh, |i, _| (-h0[i]).max(1e-2));
    let mut mu_bar = opts.mu_init;
    let mut mu = DVector::from_fn(mh, |i, _| (mu_bar / s[i]).clamp(1e-8, 1e6));
    let mut lam = DVector::zeros(mg);
    let mut mu_trace = Vec::new();
    let mut delta_x = 0.0f64;

    for iter in 0..opts.max_iter {
        let r = residuals(sys, &x, &s, &lam, &mu);
        let comp_max = (0..mh).map(|i| mu[i] * s[i]).fold(0.0f64, f64::max);
        let e_stat = r.r_d.amax();
        let e_feas = r.r_p.amax().max(r.r_s.amax());
        mu_trace.push(mu_bar);

        if opts.verbose {
            debug!(
                "it {iter:3}  mu {mu_bar:9.2e}  stat {e_stat:9.2e}  feas {e_feas:9.2e}  comp {comp_max:9.2e}"
            );
        }

        if e_stat <= opts.tol_stat && e_feas <= opts.tol_feas && comp_max <= opts.tol_comp {
            return Ok(SolveResult {
                status: SolveStatus::Optimal,
                objective: sys.objective(&x),
                z: x,
                lambda: lam,
                mu,
                iterations: iter,
                kkt_residuals: KktResiduals {
                    stationarity: e_stat,
                    feasibility: e_feas,
                    complementarity: comp_max,
                },
                mu_trace,
            });
        }

        // Monotone barrier reduction once the mu-perturbed system is solved.
        let comp_dev = (0..mh)
            .map(|i| (mu[i] * s[i] - mu_bar).abs())
            .fold(0.0f64, f64::max);
        let e_mu = e_stat.max(e_feas).max(comp_dev);
        if e_mu <= 10.0 * mu_bar {
            mu_bar = (opts.mu_shrink * mu_bar).max(opts.tol_comp / 100.0);
        }

        // Assemble and solve the reduced saddle system in (dx, dlam).
        let jg = sys.jac_g(&x);
        let jh = sys.jac_h(&x);
        let w = sys.hess_lagrangian(&x, 1.0, &lam);
        let d_vec = DVector::from_fn(mh, |i, _| mu[i] / s[i]);
        let mut a = w.clone();
        // A = W + Jh^T D Jh
        for r_i in 0..mh {
            let di = d_vec[r_i];
            if di == 0.0 {
                continue;
            }
            for c1 in 0..n {
                let v1 = jh[(r_i, c1)];
                if v1 == 0.0 {
                    continue;
                }
                for c2 in 0..n {
                    let v2 = jh[(r_i, c2)];
                    if v2 != 0.0 {
                        a[(c1, c2)] += di * v1 * v2;
                    }
                }
            }
        }
        // rhs_x = -r_d + Jh^T (r_c/s - D r_s), r_c = mu.*s - mu_bar
        let mut t = DVector::zeros(mh);
        for i in 0..mh {
            let r_c = mu[i] * s[i] - mu_bar;
            t[i] = r_c / s[i] - d_vec[i] * r.r_s[i];
        }
        let rhs_x = -&r.r_d + jh.transpose() * t;
        let rhs_l = -&r.r_p;

        let dim = n + mg;
        let mut rhs = DVector::zeros(dim);
        rhs.rows_mut(0, n).copy_from(&rhs_x);
        rhs.rows_mut(n, mg).copy_from(&rhs_l);

        let mut delta_c = 1e-10;
        let mut sol = None;
        let mut dx_try = if delta_x > 0.0 { delta_x } else { 0.0 };
        for _attempt in 0..20 {
            let mut k = DMatrix::zeros(dim, dim);
            k.view_mut((0, 0), (n, n)).copy_from(&a);
            for i in 0..n {
                k[(i, i)] += dx_try;
            }
            k.view_mut((n, 0), (mg, n)).copy_from(&jg);
            k.view_mut((0, n), (n, mg)).copy_from(&jg.transpose());
            for i in 0..mg {
                k[(n + i, n + i)] = -delta_c;
            }
            if let Some(f) = linalg::factor(&k) {
                let (pos, neg, _) = f.inertia();
                if pos == n && neg == mg {
                    sol = Some(f.solve(&rhs));
                    break;
                }
            }
            // Inertia correction: grow the primal shift; grow the dual shift
            // more slowly, capped at 1e-2.
            dx_try = if dx_try == 0.0 { 1e-8 } else { dx_try * 10.0 };
            delta_c = (delta_c * 10.0).min(1e-2);
            if dx_try > 1e8 {
                break;
            }
        }
        let sol = match sol {
            Some(s) => s,
            None => {
                return Err(Error::NumericalFailure(
                    "singular KKT system after regularization".to_string(),
                ))
            }
        };
        delta_x = if dx_try > 0.0 { dx_try / 10.0 } else { 0.0 };

        let dx = sol.rows(0, n).into_owned();
        let dlam = sol.rows(n, mg).into_owned();
        let jh_dx = &jh * &dx;
        let mut ds = DVector::zeros(mh);
        let mut dmu = DVector::zeros(mh);
        for i in 0..mh {
            ds[i] = -r.r_s[i] - jh_dx[i];
            let r_c = mu[i] * s[i] - mu_bar;
            dmu[i] = (-r_c - mu[i] * ds[i]) / s[i];
        }

        // Fraction-to-boundary step caps.
        let mut alpha_max = 1.0f64;
        for i in 0..mh {
            if ds[i] < 0.0 {
                alpha_max = alpha_max.min(-opts.tau * s[i] / ds[i]);
            }
            if dmu[i] < 0.0 {
                alpha_max = alpha_max.min(-opts.tau * mu[i] / dmu[i]);
            }
        }

        // Backtracking on the perturbed KKT residual norm; keep the best
        // step seen so the iteration always moves.
        let phi0 = merit(sys, &x, &s, &lam, &mu, mu_bar);
        let mut alpha = alpha_max;
        let mut best = (alpha, f64::INFINITY);
        for _ in 0..30 {
            let xt = &x + alpha * &dx;
            let st = &s + alpha * &ds;
            let lt = &lam + alpha * &dlam;
            let mt = &mu + alpha * &dmu;
            let phi = merit(sys, &xt, &st, &lt, &mt, mu_bar);
            if phi < best.1 {
                best = (alpha, phi);
            }
            if phi <= (1.0 - 1e-4 * alpha) * phi0 {
                break;
            }
            alpha *= 0.5;
            if alpha < 1e-10 {
                break;
            }
        }
        let alpha = best.0;
        x += alpha * &dx;
        s += alpha * &ds;
        lam += alpha * &dlam;
        mu += alpha * &dmu;
        for i in 0..mh {
            s[i] = s[i].max(1e-300);
            mu[i] = mu[i].max(1e-300);
        }
    }

    let r = residuals(sys, &x, &s, &lam, &mu);
    let comp_max = (0..mh).map(|i| mu[i] * s[i]).fold(0.0f64, f64::max);
    Ok(SolveResult {
        status: SolveStatus::MaxIter,
        objective: sys.objective(&x),
        kkt_residuals: KktResiduals {
            stationarity: r.r_d.amax(),
            feasibility: r.r_p.amax().max(r.r_s.amax()),
            complementarity: comp_max,
        },
        z: x,
        lambda: lam,
        mu,
        iterations: opts.max_iter,
        mu_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ops::Range;

    /// min x^2 s.t. x >= 1, i.e. h(x) = 1 - x <= 0.
    struct Quadratic;

    impl ConstraintSystem for Quadratic {
        fn dim(&self) -> usize {
            1
        }
        fn n_eq(&self) -> usize {
            0
        }
        fn n_ineq(&self) -> usize {
            1
        }
        fn objective(&self, z: &DVector<f64>) -> f64 {
            z[0] * z[0]
        }
        fn grad_objective(&self, z: &DVector<f64>) -> DVector<f64> {
            DVector::from_row_slice(&[2.0 * z[0]])
        }
        fn eval_g(&self, _z: &DVector<f64>) -> DVector<f64> {
            DVector::zeros(0)
        }
        fn eval_h(&self, z: &DVector<f64>) -> DVector<f64> {
            DVector::from_row_slice(&[1.0 - z[0]])
        }
        fn jac_g(&self, _z: &DVector<f64>) -> DMatrix<f64> {
            DMatrix::zeros(0, 1)
        }
        fn jac_h(&self, _z: &DVector<f64>) -> DMatrix<f64> {
            DMatrix::from_row_slice(1, 1, &[-1.0])
        }
        fn hess_lagrangian(
            &self,
            _z: &DVector<f64>,
            obj_w: f64,
            _l: &DVector<f64>,
        ) -> DMatrix<f64> {
            DMatrix::from_row_slice(1, 1, &[2.0 * obj_w])
        }
        fn g_labels(&self) -> Vec<(String, Range<usize>)> {
            vec![]
        }
        fn h_labels(&self) -> Vec<(String, Range<usize>)> {
            vec![("x>=1".into(), 0..1)]
        }
    }

    #[test]
    fn textbook_kkt() {
        let res = solve(
            &Quadratic,
            &DVector::from_row_slice(&[3.0]),
            &SolverOptions::default(),
        )
        .unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        assert!((res.z[0] - 1.0).abs() < 1e-7);
        assert!((res.mu[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn barrier_monotone() {
        let res = solve(
            &Quadratic,
            &DVector::from_row_slice(&[3.0]),
            &SolverOptions::default(),
        )
        .unwrap();
        for w in res.mu_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
    }
}
