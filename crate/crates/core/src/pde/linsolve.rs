//! Sparse direct solve (faer LU) with iterative refinement up to a relative
//! residual of `1e-10`.

use faer::sparse::{SparseColMat, Triplet};
use faer::prelude::*;
use faer::Mat;

use super::assemble::SparseMatrix;
use crate::error::{Error, Result};

pub const RELATIVE_RESIDUAL: f64 = 1e-10;
const MAX_REFINEMENTS: usize = 3;

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solves `A x = b`; returns `x` and the achieved relative residual.
pub fn solve(a: &SparseMatrix, b: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::LinearSolve(format!(
            "shape mismatch: {}x{} matrix, rhs of length {}",
            n,
            a.ncols(),
            b.len()
        )));
    }
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], 0.0));
    }
    let triplets: Vec<Triplet<usize, usize, f64>> = a.triplets().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| Error::LinearSolve(format!("matrix construction failed: {e:?}")))?;
    let lu = mat
        .sp_lu()
        .map_err(|e| Error::LinearSolve(format!("LU factorization failed: {e:?}")))?;

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut rel = 1.0;
    for _ in 0..=MAX_REFINEMENTS {
        let rhs = Mat::<f64>::from_fn(n, 1, |i, _| r[i]);
        let d = lu.solve(&rhs);
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += d[(i, 0)];
        }
        let ax = a.matvec(&x);
        r = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        rel = norm2(&r) / bnorm;
        if !rel.is_finite() {
            return Err(Error::LinearSolve("solution is not finite (singular Jacobian?)".into()));
        }
        if rel <= RELATIVE_RESIDUAL {
            return Ok((x, rel));
        }
    }
    Err(Error::LinearSolve(format!(
        "relative residual {rel:e} above {RELATIVE_RESIDUAL:e} after refinement"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_nonsymmetric_system() {
        let a = SparseMatrix::from_rows(
            3,
            vec![
                vec![(0, 4.0), (1, -1.0)],
                vec![(0, -2.0), (1, 5.0), (2, 1.0)],
                vec![(1, 3.0), (2, 6.0)],
            ],
        );
        let x_true = [1.0, -2.0, 0.5];
        let b = a.matvec(&x_true);
        let (x, rel) = solve(&a, &b).unwrap();
        assert!(rel <= RELATIVE_RESIDUAL);
        for (xi, ti) in x.iter().zip(&x_true) {
            assert!((xi - ti).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_system_fails() {
        let a = SparseMatrix::from_rows(2, vec![vec![(0, 1.0), (1, 1.0)], vec![(0, 1.0), (1, 1.0)]]);
        assert!(solve(&a, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn zero_rhs() {
        let a = SparseMatrix::from_rows(1, vec![vec![(0, 2.0)]]);
        assert_eq!(solve(&a, &[0.0]).unwrap().0, vec![0.0]);
    }
}
