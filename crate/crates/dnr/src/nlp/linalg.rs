//! Dense unpivoted LDL^T factorization with inertia, for the symmetric
//! quasidefinite saddle systems assembled by the interior-point iteration.
//! Regularization upstream keeps pivots away from zero; a tiny pivot is
//! reported as failure so the caller can re-regularize.

use nalgebra::{DMatrix, DVector};

pub struct Ldlt {
    l: DMatrix<f64>,
    d: DVector<f64>,
}

pub fn factor(a: &DMatrix<f64>) -> Option<Ldlt> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let scale = a.amax().max(1.0);
    let tiny = 1e-14 * scale;
    let mut l = DMatrix::identity(n, n);
    let mut d = DVector::zeros(n);
    for j in 0..n {
        let mut dj = a[(j, j)];
        for k in 0..j {
            dj -= l[(j, k)] * l[(j, k)] * d[k];
        }
        if dj.abs() < tiny || !dj.is_finite() {
            return None;
        }
        d[j] = dj;
        for i in (j + 1)..n {
            let mut v = a[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)] * d[k];
            }
            l[(i, j)] = v / dj;
        }
    }
    Some(Ldlt { l, d })
}

impl Ldlt {
    /// (positive, negative, zero) eigenvalue counts by Sylvester's law.
    pub fn inertia(&self) -> (usize, usize, usize) {
        let mut pos = 0;
        let mut neg = 0;
        for &d in self.d.iter() {
            if d > 0.0 {
                pos += 1;
            } else {
                neg += 1;
            }
        }
        (pos, neg, 0)
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.d.len();
        let mut x = b.clone();
        for i in 0..n {
            for k in 0..i {
                let v = self.l[(i, k)] * x[k];
                x[i] -= v;
            }
        }
        for i in 0..n {
            x[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let v = self.l[(k, i)] * x[k];
                x[i] -= v;
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_solve_indefinite() {
        // [[4, 1, 0], [1, -2, 1], [0, 1, 3]]: indefinite, nonsingular.
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, -2.0, 1.0, 0.0, 1.0, 3.0]);
        let f = factor(&a).unwrap();
        let (pos, neg, _) = f.inertia();
        assert_eq!((pos, neg), (2, 1));
        let b = DVector::from_row_slice(&[1.0, 2.0, 3.0]);
        let x = f.solve(&b);
        let r = &a * &x - &b;
        assert!(r.amax() < 1e-12);
    }

    #[test]
    fn singular_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(factor(&a).is_none());
    }
}
