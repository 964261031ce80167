//! Shared oracles for the integration suites: finite-difference Jacobians
//! and the determinant-based spanning-tree count.
//! Each suite uses its own subset, so unused-code warnings are off.
#![allow(dead_code)]

use dnr::network::Network;
use dnr::system::ConstraintSystem;
use nalgebra::{DMatrix, DVector};

/// Central finite-difference Jacobian of the equality block.
pub fn fd_jac_g(sys: &dyn ConstraintSystem, z: &DVector<f64>, h: f64) -> DMatrix<f64> {
    fd_jac(sys.n_eq(), z, h, |x| sys.eval_g(x))
}

/// Central finite-difference Jacobian of the inequality block.
pub fn fd_jac_h(sys: &dyn ConstraintSystem, z: &DVector<f64>, h: f64) -> DMatrix<f64> {
    fd_jac(sys.n_ineq(), z, h, |x| sys.eval_h(x))
}

fn fd_jac<F: Fn(&DVector<f64>) -> DVector<f64>>(
    rows: usize,
    z: &DVector<f64>,
    h: f64,
    eval: F,
) -> DMatrix<f64> {
    let n = z.len();
    let mut jac = DMatrix::zeros(rows, n);
    for c in 0..n {
        let mut zp = z.clone();
        let mut zm = z.clone();
        zp[c] += h;
        zm[c] -= h;
        let d = (eval(&zp) - eval(&zm)) / (2.0 * h);
        jac.set_column(c, &d);
    }
    jac
}

/// Number of spanning trees by the Kirchhoff determinant (Laplacian minor).
pub fn spanning_tree_count(network: &Network) -> f64 {
    let n = network.n_buses();
    let mut lap = DMatrix::zeros(n, n);
    for e in 0..network.n_lines() {
        let (f, t) = network.endpoints(e);
        lap[(f, f)] += 1.0;
        lap[(t, t)] += 1.0;
        lap[(f, t)] -= 1.0;
        lap[(t, f)] -= 1.0;
    }
    let minor = lap.view((1, 1), (n - 1, n - 1)).into_owned();
    minor.lu().determinant()
}
