//! Elementary symmetric functions, Garding cones and the quotient operator
//! `[σ_k/σ_l]^{1/(k-l)}`, at the eigenvalue level and at the matrix level.

use std::fmt;
use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite, non-empty real tuple: Hessian eigenvalues or Λ-values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenTuple(Vec<f64>);

impl EigenTuple {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("eigen tuple must be non-empty".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "eigen tuple entry {i} is not finite ({})",
                values[i]
            )));
        }
        Ok(EigenTuple(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Copy with entry `i` removed; `None` if that would leave it empty.
    pub fn without(&self, i: usize) -> Option<EigenTuple> {
        if self.0.len() < 2 || i >= self.0.len() {
            return None;
        }
        let mut v = self.0.clone();
        v.remove(i);
        Some(EigenTuple(v))
    }

    pub fn sorted_descending(&self) -> EigenTuple {
        let mut v = self.0.clone();
        v.sort_by(|a, b| b.total_cmp(a));
        EigenTuple(v)
    }
}

impl Index<usize> for EigenTuple {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<&[f64]> for EigenTuple {
    type Error = Error;
    fn try_from(v: &[f64]) -> Result<Self> {
        EigenTuple::new(v.to_vec())
    }
}

/// Dense symmetric matrix. Only the upper triangle is stored, so symmetry
/// holds exactly.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    dim: usize,
    upper: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be positive");
        SymMatrix {
            dim,
            upper: vec![0.0; dim * (dim + 1) / 2],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diagonal(&vec![1.0; dim])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    /// Builds from `f(i, j)` evaluated on the upper triangle (`i <= j`).
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Builds from full rows, rejecting asymmetric or non-finite input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidInput("matrix must be square and non-empty".into()));
        }
        for i in 0..dim {
            for j in 0..dim {
                if !rows[i][j].is_finite() {
                    return Err(Error::InvalidInput(format!("entry ({i},{j}) is not finite")));
                }
                if rows[i][j] != rows[j][i] {
                    return Err(Error::InvalidInput(format!("entries ({i},{j}) and ({j},{i}) differ")));
                }
            }
        }
        Ok(Self::from_fn(dim, |i, j| rows[i][j]))
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * self.dim - i * (i + 1) / 2 + j
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.upper[self.slot(i, j)]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.upper[s] = v;
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn scaled(&self, c: f64) -> Self {
        SymMatrix {
            dim: self.dim,
            upper: self.upper.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add(&self, other: &SymMatrix) -> Self {
        assert_eq!(self.dim, other.dim);
        SymMatrix {
            dim: self.dim,
            upper: self.upper.iter().zip(&other.upper).map(|(a, b)| a + b).collect(),
        }
    }

    /// Max absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn norm_frobenius(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += self.get(i, j).powi(2);
            }
        }
        s.sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.upper.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.upper.iter().all(|v| v.is_finite())
    }

    /// Symmetric part of `self * other`; exact when the two commute.
    pub fn sym_product(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let mut full = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                full[i * n + j] = (0..n).map(|t| self.get(i, t) * other.get(t, j)).sum();
            }
        }
        SymMatrix::from_fn(n, |i, j| 0.5 * (full[i * n + j] + full[j * n + i]))
    }

    /// Frobenius inner product `Σ_ij A_ij B_ij`.
    pub fn frobenius_dot(&self, other: &SymMatrix) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += self.get(i, j) * other.get(i, j);
            }
        }
        s
    }
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.to_rows()).finish()
    }
}

/// `σ_0 .. σ_kmax` of `values` by the prefix recurrence
/// `S[j][i] = S[j][i-1] + λ_i S[j-1][i-1]`.
pub(crate) fn sigma_prefix(values: &[f64], kmax: usize) -> Vec<f64> {
    let mut e = vec![0.0; kmax + 1];
    e[0] = 1.0;
    for (i, &lam) in values.iter().enumerate() {
        let top = (i + 1).min(kmax);
        for j in (1..=top).rev() {
            e[j] += lam * e[j - 1];
        }
    }
    e
}

/// Elementary symmetric function σ_k. `σ_0 = 1`, `σ_k = 0` for `k > len`.
pub fn sigma_k(lam: &EigenTuple, k: usize) -> f64 {
    if k > lam.len() {
        return 0.0;
    }
    sigma_prefix(lam.as_slice(), k)[k]
}

/// `σ_0 .. σ_m` in one pass.
pub fn sigma_all(lam: &EigenTuple) -> Vec<f64> {
    sigma_prefix(lam.as_slice(), lam.len())
}

/// `σ_{k-1}(λ|i) = ∂σ_k/∂λ_i`, with `i` zero-based.
pub fn sigma_partial(lam: &EigenTuple, k: usize, i: usize) -> Result<f64> {
    if i >= lam.len() {
        return Err(Error::IndexOutOfRange {
            index: i,
            len: lam.len(),
        });
    }
    let Some(km1) = k.checked_sub(1) else {
        return Ok(0.0);
    };
    Ok(deleted_sigma(lam.as_slice(), km1, i))
}

fn deleted_sigma(values: &[f64], k: usize, skip: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > values.len() - 1 {
        return 0.0;
    }
    let mut e = vec![0.0; k + 1];
    e[0] = 1.0;
    let mut seen = 0;
    for (idx, &lam) in values.iter().enumerate() {
        if idx == skip {
            continue;
        }
        seen += 1;
        for j in (1..=seen.min(k)).rev() {
            e[j] += lam * e[j - 1];
        }
    }
    e[k]
}

/// Strict Garding cone membership: `σ_j(λ) > 0` for all `1 <= j <= k`.
pub fn in_gamma_k(lam: &EigenTuple, k: usize) -> bool {
    debug_assert!(k >= 1 && k <= lam.len(), "cone order out of range");
    sigma_prefix(lam.as_slice(), k)[1..].iter().all(|&s| s > 0.0)
}

fn check_orders(m: usize, k: usize, l: usize) -> Result<()> {
    if !(l < k && k <= m) {
        return Err(Error::InvalidInput(format!(
            "quotient orders must satisfy 0 <= l < k <= m (got k={k}, l={l}, m={m})"
        )));
    }
    Ok(())
}

pub(crate) fn quotient_from_sigmas(sk: f64, sl: f64, k: usize, l: usize) -> f64 {
    (sk / sl).powf(1.0 / (k - l) as f64)
}

fn require_cone(lam: &EigenTuple, k: usize) -> Result<Vec<f64>> {
    let s = sigma_prefix(lam.as_slice(), k);
    if let Some(j) = (1..=k).find(|&j| s[j] <= 0.0) {
        return Err(Error::NotAdmissible {
            node: None,
            detail: format!("sigma_{j} = {:e} <= 0, tuple not in Gamma_{k}", s[j]),
        });
    }
    Ok(s)
}

/// `f(λ) = [σ_k(λ)/σ_l(λ)]^{1/(k-l)}` on `Γ_k`.
pub fn quotient_f(lam: &EigenTuple, k: usize, l: usize) -> Result<f64> {
    check_orders(lam.len(), k, l)?;
    let s = require_cone(lam, k)?;
    Ok(quotient_from_sigmas(s[k], s[l], k, l))
}

/// Componentwise `∂f/∂λ_i` of [`quotient_f`].
pub fn quotient_grad(lam: &EigenTuple, k: usize, l: usize) -> Result<EigenTuple> {
    check_orders(lam.len(), k, l)?;
    let s = require_cone(lam, k)?;
    let f = quotient_from_sigmas(s[k], s[l], k, l);
    let kl = (k - l) as f64;
    let v = lam.as_slice();
    let grad = (0..v.len())
        .map(|i| {
            let dk = deleted_sigma(v, k - 1, i) / s[k];
            let dl = match l {
                0 => 0.0,
                _ => deleted_sigma(v, l - 1, i) / s[l],
            };
            f * (dk - dl) / kl
        })
        .collect();
    EigenTuple::new(grad)
}

/// Faddeev-LeVerrier sweep: returns `(σ_0..σ_kmax, T_0..T_kmax)` with
/// `σ_j = tr(M T_{j-1}) / j` and `T_j = σ_j I - T_{j-1} M`.
pub(crate) fn newton_sequence(m: &SymMatrix, kmax: usize) -> (Vec<f64>, Vec<SymMatrix>) {
    let n = m.dim();
    let mut sig = Vec::with_capacity(kmax + 1);
    let mut ts = Vec::with_capacity(kmax + 1);
    sig.push(1.0);
    ts.push(SymMatrix::identity(n));
    for j in 1..=kmax {
        let prod = ts[j - 1].sym_product(m);
        let s = if j <= n { prod.trace() / j as f64 } else { 0.0 };
        let t = SymMatrix::identity(n).scaled(s).add(&prod.scaled(-1.0));
        sig.push(s);
        ts.push(t);
    }
    (sig, ts)
}

/// Newton transform `T_k(M)`; its entries are `∂σ_{k+1}(λ(M))/∂M_ij`.
pub fn newton_transform(m: &SymMatrix, k: usize) -> Result<SymMatrix> {
    if k > m.dim() {
        return Err(Error::InvalidInput(format!(
            "newton transform order {k} exceeds dimension {}",
            m.dim()
        )));
    }
    Ok(newton_sequence(m, k).1.pop().expect("sequence is non-empty"))
}

/// `σ_k` of the eigenvalues of `M` (sum of principal k-minors), without an
/// eigendecomposition.
pub fn sigma_k_of_matrix(m: &SymMatrix, k: usize) -> Result<f64> {
    if k > m.dim() {
        return Err(Error::InvalidInput(format!(
            "order {k} exceeds dimension {}",
            m.dim()
        )));
    }
    Ok(newton_sequence(m, k).0[k])
}

/// Binomial coefficient as f64 (exact for the sizes used here).
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64).round()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn t(v: &[f64]) -> EigenTuple {
        EigenTuple::new(v.to_vec()).unwrap()
    }

    /// Enumeration oracle: sum over all k-subsets.
    fn sigma_enum(v: &[f64], k: usize) -> f64 {
        let m = v.len();
        if k > m {
            return 0.0;
        }
        let mut total = 0.0;
        for mask in 0u32..(1 << m) {
            if mask.count_ones() as usize == k {
                total += (0..m).filter(|i| mask & (1 << i) != 0).map(|i| v[i]).product::<f64>();
            }
        }
        total
    }

    #[test]
    fn sigma_examples() {
        assert_eq!(sigma_k(&t(&[1.0, 1.0, 1.0]), 2), 3.0);
        assert_eq!(sigma_k(&t(&[1.0, 1.0, 1.0]), 0), 1.0);
        assert_eq!(sigma_enum(&[-1.0, 3.0, 3.0], 3), -9.0);
        assert_eq!(sigma_k(&t(&[-1.0, 3.0, 3.0]), 3), -9.0);
        assert_eq!(sigma_k(&t(&[5.0, 2.0]), 3), 0.0);
    }

    #[test]
    fn non_finite_rejected() {
        assert!(EigenTuple::new(vec![1.0, f64::NAN]).is_err());
        assert!(EigenTuple::new(vec![f64::INFINITY]).is_err());
        assert!(EigenTuple::new(vec![]).is_err());
    }

    #[test]
    fn recurrence_matches_enumeration() {
        let v = [0.3, -1.2, 2.5, 0.7, -0.4, 1.9, 3.1, -2.2];
        for k in 0..=9 {
            assert_relative_eq!(sigma_k(&t(&v), k), sigma_enum(&v, k), epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    #[test]
    fn partial_examples() {
        assert_eq!(sigma_partial(&t(&[1.0, 1.0, 1.0]), 2, 0).unwrap(), 2.0);
        assert_eq!(sigma_enum(&[3.0, 3.0], 2), 9.0);
        assert_eq!(sigma_partial(&t(&[-1.0, 3.0, 3.0]), 3, 0).unwrap(), 9.0);
        assert_eq!(sigma_partial(&t(&[-7.5]), 1, 0).unwrap(), 1.0);
        assert!(matches!(
            sigma_partial(&t(&[1.0, 2.0]), 1, 2),
            Err(Error::IndexOutOfRange { index: 2, len: 2 })
        ));
    }

    #[test]
    fn cone_examples() {
        assert!(in_gamma_k(&t(&[1.0, 1.0, 1.0]), 3));
        // σ_1 = 5, σ_2 = 3 by enumeration
        assert_eq!(sigma_enum(&[-1.0, 3.0, 3.0], 1), 5.0);
        assert_eq!(sigma_enum(&[-1.0, 3.0, 3.0], 2), 3.0);
        assert!(in_gamma_k(&t(&[-1.0, 3.0, 3.0]), 2));
        assert!(!in_gamma_k(&t(&[-1.0, 3.0, 3.0]), 3));
    }

    #[test]
    fn quotient_examples() {
        assert_relative_eq!(quotient_f(&t(&[2.0, 2.0, 2.0]), 2, 0).unwrap(), 12f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(quotient_f(&t(&[2.0, 2.0, 2.0]), 2, 1).unwrap(), 2.0, max_relative = 1e-15);
        assert_relative_eq!(quotient_f(&t(&[-1.0, 3.0, 3.0]), 2, 0).unwrap(), 3f64.sqrt(), max_relative = 1e-15);
        assert!(matches!(
            quotient_f(&t(&[-1.0, 3.0, 3.0]), 3, 0),
            Err(Error::NotAdmissible { .. })
        ));
        assert!(quotient_f(&t(&[1.0, 1.0]), 1, 1).is_err());
    }

    fn fd_grad(lam: &[f64], k: usize, l: usize) -> Vec<f64> {
        (0..lam.len())
            .map(|i| {
                let h = 1e-6 * (1.0 + lam[i].abs());
                let mut a = lam.to_vec();
                let mut b = lam.to_vec();
                a[i] += h;
                b[i] -= h;
                (quotient_f(&t(&a), k, l).unwrap() - quotient_f(&t(&b), k, l).unwrap()) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn grad_examples() {
        let g = quotient_grad(&t(&[1.0, 1.0, 1.0]), 1, 0).unwrap();
        assert_eq!(g.as_slice(), &[1.0, 1.0, 1.0]);

        let g = quotient_grad(&t(&[2.0, 2.0, 2.0]), 2, 0).unwrap();
        let fd = fd_grad(&[2.0, 2.0, 2.0], 2, 0);
        for (a, b) in g.as_slice().iter().zip(&fd) {
            assert_relative_eq!(*a, 0.5773503, max_relative = 1e-6);
            assert_relative_eq!(*a, *b, max_relative = 1e-6);
        }

        let g = quotient_grad(&t(&[-1.0, 3.0, 3.0]), 2, 0).unwrap();
        let s3 = 3f64.sqrt();
        let expect = [6.0 / (2.0 * s3), 2.0 / (2.0 * s3), 2.0 / (2.0 * s3)];
        for (a, b) in g.as_slice().iter().zip(&expect) {
            assert_relative_eq!(*a, *b, max_relative = 1e-14);
        }
    }

    #[test]
    fn newton_transform_examples() {
        let m = SymMatrix::from_rows(&[vec![4.0, 1.0], vec![1.0, -2.0]]).unwrap();
        assert_eq!(newton_transform(&m, 0).unwrap(), SymMatrix::identity(2));
        assert_eq!(newton_transform(&SymMatrix::identity(3), 1).unwrap(), SymMatrix::identity(3).scaled(2.0));

        let d = SymMatrix::from_diagonal(&[1.0, 2.0, 3.0]);
        let t2 = newton_transform(&d, 2).unwrap();
        let lam = t(&[1.0, 2.0, 3.0]);
        for i in 0..3 {
            // ∂σ_3/∂λ_i = σ_2(λ|i) by enumeration of the remaining pair
            let rest: Vec<f64> = (0..3).filter(|&j| j != i).map(|j| lam[j]).collect();
            assert_eq!(t2.get(i, i), sigma_enum(&rest, 2));
        }
        assert_eq!(t2, SymMatrix::from_diagonal(&[6.0, 3.0, 2.0]));
    }

    #[test]
    fn sigma_of_matrix_examples() {
        assert_eq!(sigma_k_of_matrix(&SymMatrix::identity(3), 2).unwrap(), 3.0);
        assert_eq!(sigma_k_of_matrix(&SymMatrix::from_diagonal(&[-1.0, 3.0, 3.0]), 3).unwrap(), -9.0);
        let m = SymMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        assert_relative_eq!(sigma_k_of_matrix(&m, 2).unwrap(), 3.0, max_relative = 1e-15);
        assert!(sigma_k_of_matrix(&m, 3).is_err());
    }

    #[test]
    fn symmetric_storage() {
        let mut m = SymMatrix::zeros(3);
        m.set(2, 0, 5.0);
        assert_eq!(m.get(0, 2), 5.0);
        assert!(SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.1, 1.0]]).is_err());
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(6, 3), 20.0);
        assert_eq!(binomial(3, 0), 1.0);
        assert_eq!(binomial(3, 4), 0.0);
    }
}
