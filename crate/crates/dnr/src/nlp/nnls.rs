//! Lawson-Hanson active-set method for min ||A x - b||_2 s.t. x >= 0.

use nalgebra::{DMatrix, DVector};

/// Returns the nonnegative least-squares solution. Terminates in finitely
/// many steps for any input; `max_outer` is a safety valve only.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut passive = vec![false; n];
    let mut x = DVector::zeros(n);
    let tol = 1e-12 * a.amax().max(1.0) * b.amax().max(1.0);
    let max_outer = 10 * n + 100;

    for _ in 0..max_outer {
        let w = a.transpose() * (b - a * &x);
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if !passive[j] && w[j] > tol
                && best.is_none_or(|(_, v)| w[j] > v) {
                    best = Some((j, w[j]));
                }
        }
        let Some((j_in, _)) = best else { break };
        passive[j_in] = true;

        loop {
            let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let ap = a.select_columns(idx.iter());
            let zp = ap
                .clone()
                .svd(true, true)
                .solve(b, 1e-12)
                .expect("svd solve");
            if zp.iter().all(|&v| v > 0.0) {
                x.fill(0.0);
                for (k, &j) in idx.iter().enumerate() {
                    x[j] = zp[k];
                }
                break;
            }
            // Step toward zp until the first passive coordinate hits zero.
            let mut alpha = f64::INFINITY;
            for (k, &j) in idx.iter().enumerate() {
                if zp[k] <= 0.0 {
                    let a_k = x[j] / (x[j] - zp[k]);
                    alpha = alpha.min(a_k);
                }
            }
            for (k, &j) in idx.iter().enumerate() {
                x[j] += alpha * (zp[k] - x[j]);
                if x[j] <= tol.max(1e-14) {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unconstrained_interior() {
        // Solution of the plain least squares is positive, so NNLS matches it.
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_row_slice(&[1.0, 2.0, 3.0]);
        let x = nnls(&a, &b);
        let ls = a.clone().svd(true, true).solve(&b, 1e-12).unwrap();
        assert!((x - ls).amax() < 1e-10);
    }

    #[test]
    fn clamps_negative_coordinate() {
        // min ||x1 - (-1)||^2 + ||x2 - 2||^2 over x >= 0 -> (0, 2).
        let a = DMatrix::identity(2, 2);
        let b = DVector::from_row_slice(&[-1.0, 2.0]);
        let x = nnls(&a, &b);
        assert!(x[0].abs() < 1e-12);
        assert!((x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn exact_nonnegative_combination() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 2.0]);
        let want = DVector::from_row_slice(&[0.5, 0.0, 1.5]);
        let b = &a * &want;
        let x = nnls(&a, &b);
        assert!((&a * &x - &b).amax() < 1e-10);
        assert!(x.iter().all(|&v| v >= 0.0));
    }
}
