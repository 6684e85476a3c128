//! Cyclic Jacobi eigensolver for small dense symmetric matrices.

use crate::error::{Error, Result};
use crate::symfun::{EigenTuple, SymMatrix};

pub const DEFAULT_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 50;

#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    /// Sorted descending.
    pub eigenvalues: EigenTuple,
    /// Row `i` is the unit eigenvector for `eigenvalues[i]`; stored row-major.
    pub eigenvectors: Vec<f64>,
    dim: usize,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.eigenvectors[i * self.dim..(i + 1) * self.dim]
    }

    /// `Qᵀ diag(λ) Q`.
    pub fn reconstruct(&self) -> SymMatrix {
        let n = self.dim;
        SymMatrix::from_fn(n, |i, j| {
            (0..n)
                .map(|t| self.eigenvalues[t] * self.vector(t)[i] * self.vector(t)[j])
                .sum()
        })
    }
}

fn off_diagonal_norm(a: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            s += 2.0 * a[i * n + j] * a[i * n + j];
        }
    }
    s.sqrt()
}

/// Cyclic Jacobi with row-major sweeps over the upper triangle. Stops once
/// the off-diagonal Frobenius norm is at most `tol * ‖M‖_F`.
pub fn eigen_sym(m: &SymMatrix, tol: f64) -> Result<EigenDecomposition> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    if !m.is_finite() {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let n = m.dim();
    let mut a: Vec<f64> = m.to_rows().into_iter().flatten().collect();
    // columns of v are eigenvectors
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let threshold = tol * m.norm_frobenius();

    let mut sweeps = 0;
    loop {
        let off = off_diagonal_norm(&a, n);
        if off <= threshold {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence {
                sweeps,
                residual: off,
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]));
    let eigenvalues = EigenTuple::new(order.iter().map(|&i| a[i * n + i]).collect())?;
    let mut eigenvectors = Vec::with_capacity(n * n);
    for &col in &order {
        eigenvectors.extend((0..n).map(|row| v[row * n + col]));
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
        dim: n,
    })
}

/// Largest absolute eigenvalue (spectral norm of a symmetric matrix).
pub fn spectral_norm(m: &SymMatrix) -> Result<f64> {
    let e = eigen_sym(m, DEFAULT_TOL)?;
    Ok(e.eigenvalues.as_slice().iter().fold(0.0, |acc, v| acc.max(v.abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn identity() {
        let e = eigen_sym(&SymMatrix::identity(3), DEFAULT_TOL).unwrap();
        assert_eq!(e.eigenvalues.as_slice(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn two_by_two() {
        // λ² - 4λ + 3 = 0
        let m = SymMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let e = eigen_sym(&m, DEFAULT_TOL).unwrap();
        assert_relative_eq!(e.eigenvalues[0], 3.0, max_relative = 1e-14);
        assert_relative_eq!(e.eigenvalues[1], 1.0, max_relative = 1e-14);
    }

    #[test]
    fn diagonal_is_permutation() {
        let e = eigen_sym(&SymMatrix::from_diagonal(&[-2.0, 5.0]), DEFAULT_TOL).unwrap();
        assert_eq!(e.eigenvalues.as_slice(), &[5.0, -2.0]);
        assert_eq!(e.vector(0), &[0.0, 1.0]);
        assert_eq!(e.vector(1), &[1.0, 0.0]);
    }

    #[test]
    fn zero_matrix() {
        let e = eigen_sym(&SymMatrix::zeros(4), DEFAULT_TOL).unwrap();
        assert!(e.eigenvalues.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bad_tolerance() {
        assert!(eigen_sym(&SymMatrix::identity(2), 0.0).is_err());
    }

    fn sym_strategy() -> impl Strategy<Value = SymMatrix> {
        (1usize..=10).prop_flat_map(|n| {
            prop::collection::vec(-10.0f64..10.0, n * n).prop_map(move |v| {
                SymMatrix::from_fn(n, |i, j| 0.5 * (v[i * n + j] + v[j * n + i]))
            })
        })
    }

    fn det(m: &SymMatrix) -> f64 {
        // Gaussian elimination with partial pivoting
        let n = m.dim();
        let mut a = m.to_rows();
        let mut d = 1.0;
        for c in 0..n {
            let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
            if a[p][c] == 0.0 {
                return 0.0;
            }
            if p != c {
                a.swap(p, c);
                d = -d;
            }
            d *= a[c][c];
            for r in (c + 1)..n {
                let f = a[r][c] / a[c][c];
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
        d
    }

    proptest! {
        #[test]
        fn reconstruction_and_orthogonality(m in sym_strategy()) {
            let e = eigen_sym(&m, DEFAULT_TOL).unwrap();
            let n = m.dim();
            let r = e.reconstruct();
            let scale = m.norm_inf().max(f64::MIN_POSITIVE);
            for i in 0..n {
                for j in 0..n {
                    prop_assert!((r.get(i, j) - m.get(i, j)).abs() <= 1e-10 * scale);
                    let dot: f64 = (0..n).map(|t| e.vector(i)[t] * e.vector(j)[t]).sum();
                    let target = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((dot - target).abs() <= 1e-10);
                }
            }
            let vals = e.eigenvalues.as_slice();
            prop_assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        }

        #[test]
        fn trace_and_determinant(m in sym_strategy()) {
            let e = eigen_sym(&m, DEFAULT_TOL).unwrap();
            let vals = e.eigenvalues.as_slice();
            let sum: f64 = vals.iter().sum();
            let prod: f64 = vals.iter().product();
            let scale = m.norm_inf().max(1.0);
            prop_assert!((sum - m.trace()).abs() <= 1e-9 * scale * m.dim() as f64);
            let d = det(&m);
            prop_assert!((prod - d).abs() <= 1e-9 * scale.powi(m.dim() as i32));
        }
    }
}
