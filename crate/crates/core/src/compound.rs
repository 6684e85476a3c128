//! The Λ operator and the Hessian-quotient operator `F` built on it.
//!
//! For a symmetric `n×n` matrix `A` and `1 <= p <= n-1` the p-th additive
//! compound `A^{[p]}` is an `N×N` matrix (`N = C(n,p)`) whose spectrum is
//! exactly the set of p-fold sums `Λ_I = Σ_{i∈I} λ_i(A)`. Evaluating σ_k on
//! the compound gives `F` and its derivative without any eigendecomposition.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{eigen_sym, DEFAULT_TOL};
use crate::symfun::{self, binomial, newton_sequence, quotient_from_sigmas, EigenTuple, SymMatrix};

/// Lexicographically ordered p-subsets of `{0, .., n-1}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexFamily {
    pub n: usize,
    pub p: usize,
    pub sets: Vec<Vec<usize>>,
}

impl IndexFamily {
    fn build(n: usize, p: usize) -> Self {
        let mut sets = Vec::new();
        let mut cur: Vec<usize> = (0..p).collect();
        loop {
            sets.push(cur.clone());
            // advance to the next combination in lexicographic order
            let Some(pos) = (0..p).rev().find(|&i| cur[i] < n - p + i) else {
                break;
            };
            cur[pos] += 1;
            for i in (pos + 1)..p {
                cur[i] = cur[i - 1] + 1;
            }
        }
        IndexFamily { n, p, sets }
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn rank(&self, subset: &[usize]) -> Option<usize> {
        self.sets.binary_search_by(|s| s.as_slice().cmp(subset)).ok()
    }

    pub fn subset(&self, rank: usize) -> Option<&[usize]> {
        self.sets.get(rank).map(Vec::as_slice)
    }
}

/// The ordered family 𝔍 of p-subsets, `1 <= p <= n-1`.
pub fn index_sets(n: usize, p: usize) -> Result<IndexFamily> {
    if p < 1 || p >= n {
        return Err(Error::InvalidInput(format!(
            "subset size must satisfy 1 <= p <= n-1 (got n={n}, p={p})"
        )));
    }
    Ok(IndexFamily::build(n, p))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorSignature {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub l: usize,
}

impl OperatorSignature {
    pub fn new(n: usize, p: usize, k: usize, l: usize) -> Result<Self> {
        if n < 2 || p < 1 || p > n - 1 {
            return Err(Error::InvalidInput(format!(
                "signature requires 1 <= p <= n-1 (got n={n}, p={p})"
            )));
        }
        let big_n = binomial(n, p) as usize;
        if !(l < k) {
            return Err(Error::InvalidInput(format!(
                "signature requires 0 <= l < k (got k={k}, l={l})"
            )));
        }
        if k > big_n {
            return Err(Error::InvalidInput(format!(
                "signature requires k <= N = C(n,p) = {big_n} (got k={k})"
            )));
        }
        Ok(OperatorSignature { n, p, k, l })
    }

    /// `N = C(n, p)`.
    pub fn big_n(&self) -> usize {
        binomial(self.n, self.p) as usize
    }

    /// True iff `k <= C(n-1, p-1)`, where the interior gradient estimate and
    /// the per-direction lower bound on `∂f/∂λ_i` hold.
    pub fn gradient_regime(&self) -> bool {
        self.k as f64 <= binomial(self.n - 1, self.p - 1)
    }
}

/// Linear structure of `A ↦ A^{[p]}`: diagonal incidences and signed
/// off-diagonal couplings.
#[derive(Debug)]
struct CompoundStructure {
    family: IndexFamily,
    /// `(I, J, i, j, sign)` for every ordered pair `I != J` with
    /// `I \ J = {i}`, `J \ I = {j}`.
    couplings: Vec<(usize, usize, usize, usize, f64)>,
}

impl CompoundStructure {
    fn build(n: usize, p: usize) -> Self {
        let family = IndexFamily::build(n, p);
        let mut couplings = Vec::new();
        for (ri, si) in family.sets.iter().enumerate() {
            for (rj, sj) in family.sets.iter().enumerate() {
                if ri == rj {
                    continue;
                }
                let only_i: Vec<usize> = si.iter().copied().filter(|x| !sj.contains(x)).collect();
                let only_j: Vec<usize> = sj.iter().copied().filter(|x| !si.contains(x)).collect();
                if only_i.len() != 1 {
                    continue;
                }
                let (a, b) = (only_i[0], only_j[0]);
                let pa = si.iter().position(|&x| x == a).unwrap();
                let pb = sj.iter().position(|&x| x == b).unwrap();
                let sign = if (pa + pb) % 2 == 0 { 1.0 } else { -1.0 };
                couplings.push((ri, rj, a, b, sign));
            }
        }
        CompoundStructure { family, couplings }
    }

    fn apply(&self, a: &SymMatrix) -> SymMatrix {
        let big_n = self.family.len();
        let mut m = SymMatrix::zeros(big_n);
        for (r, set) in self.family.sets.iter().enumerate() {
            m.set(r, r, set.iter().map(|&i| a.get(i, i)).sum());
        }
        for &(ri, rj, i, j, s) in &self.couplings {
            if ri < rj {
                m.set(ri, rj, s * a.get(i, j));
            }
        }
        m
    }

    /// Pulls an `N×N` derivative `∂g/∂M` back to `∂g/∂A` (adjoint map).
    fn pull_back(&self, dm: &SymMatrix, n: usize) -> SymMatrix {
        let mut full = vec![0.0; n * n];
        for (r, set) in self.family.sets.iter().enumerate() {
            let d = dm.get(r, r);
            for &i in set {
                full[i * n + i] += d;
            }
        }
        for &(ri, rj, i, j, s) in &self.couplings {
            full[i * n + j] += s * dm.get(ri, rj);
        }
        SymMatrix::from_fn(n, |i, j| 0.5 * (full[i * n + j] + full[j * n + i]))
    }
}

type StructureCache = RwLock<HashMap<(usize, usize), Arc<CompoundStructure>>>;

fn structure(n: usize, p: usize) -> Arc<CompoundStructure> {
    static CACHE: OnceLock<StructureCache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(s) = cache.read().expect("structure cache poisoned").get(&(n, p)) {
        return Arc::clone(s);
    }
    let mut w = cache.write().expect("structure cache poisoned");
    Arc::clone(
        w.entry((n, p))
            .or_insert_with(|| Arc::new(CompoundStructure::build(n, p))),
    )
}

/// `A^{[p]}`; `p == dim` yields the `1×1` trace.
pub fn additive_compound(a: &SymMatrix, p: usize) -> Result<SymMatrix> {
    if p < 1 || p > a.dim() {
        return Err(Error::InvalidInput(format!(
            "compound order must satisfy 1 <= p <= {} (got {p})",
            a.dim()
        )));
    }
    Ok(structure(a.dim(), p).apply(a))
}

/// Λ(A): eigenvalues of `A^{[p]}`, sorted descending.
pub fn lambda_of(a: &SymMatrix, p: usize) -> Result<EigenTuple> {
    let m = additive_compound(a, p)?;
    Ok(eigen_sym(&m, DEFAULT_TOL)?.eigenvalues)
}

/// Λ of an explicit eigenvalue tuple, in the lexicographic order of 𝔍.
pub fn lambda_of_eigenvalues(lam: &[f64], p: usize) -> Result<EigenTuple> {
    let fam = IndexFamily::build(lam.len(), p);
    EigenTuple::new(fam.sets.iter().map(|s| s.iter().map(|&i| lam[i]).sum()).collect())
}

fn check_dim(a: &SymMatrix, sig: &OperatorSignature) -> Result<()> {
    if a.dim() != sig.n {
        return Err(Error::InvalidInput(format!(
            "matrix dimension {} does not match signature n={}",
            a.dim(),
            sig.n
        )));
    }
    Ok(())
}

/// Admissibility measures of a Hessian sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Margin {
    /// `min_{1<=j<=k} σ_j(Λ) / C(N, j)`.
    pub raw: f64,
    /// Same, with term `j` further divided by `(1 + ‖A‖∞)^j`.
    pub scaled: f64,
}

struct Evaluated {
    sigmas: Vec<f64>,
    transforms: Vec<SymMatrix>,
}

fn evaluate(a: &SymMatrix, sig: &OperatorSignature) -> Result<Evaluated> {
    check_dim(a, sig)?;
    let m = structure(sig.n, sig.p).apply(a);
    let (sigmas, transforms) = newton_sequence(&m, sig.k);
    Ok(Evaluated { sigmas, transforms })
}

fn require_admissible(ev: &Evaluated, sig: &OperatorSignature) -> Result<()> {
    if let Some(j) = (1..=sig.k).find(|&j| !(ev.sigmas[j] > 0.0)) {
        return Err(Error::NotAdmissible {
            node: None,
            detail: format!(
                "sigma_{j}(Lambda) = {:e} <= 0, Hessian is not (Lambda,{})-convex",
                ev.sigmas[j], sig.k
            ),
        });
    }
    Ok(())
}

/// True iff `Λ(A) ∈ Γ_k` (strict).
pub fn is_admissible(a: &SymMatrix, sig: &OperatorSignature) -> bool {
    evaluate(a, sig).map(|ev| require_admissible(&ev, sig).is_ok()).unwrap_or(false)
}

pub fn admissibility_margin(a: &SymMatrix, sig: &OperatorSignature) -> Result<Margin> {
    let ev = evaluate(a, sig)?;
    let big_n = sig.big_n();
    let norm = 1.0 + a.norm_inf();
    let mut raw = f64::INFINITY;
    let mut scaled = f64::INFINITY;
    for j in 1..=sig.k {
        let v = ev.sigmas[j] / binomial(big_n, j);
        raw = raw.min(v);
        scaled = scaled.min(v / norm.powi(j as i32));
    }
    Ok(Margin { raw, scaled })
}

/// `F(A) = [σ_k(Λ(A)) / σ_l(Λ(A))]^{1/(k-l)}` through the compound matrix.
pub fn f_value(a: &SymMatrix, sig: &OperatorSignature) -> Result<f64> {
    let ev = evaluate(a, sig)?;
    require_admissible(&ev, sig)?;
    Ok(quotient_from_sigmas(ev.sigmas[sig.k], ev.sigmas[sig.l], sig.k, sig.l))
}

/// `F` through an explicit eigendecomposition of the compound; kept as an
/// independent cross-check of [`f_value`].
pub fn f_value_spectral(a: &SymMatrix, sig: &OperatorSignature) -> Result<f64> {
    check_dim(a, sig)?;
    symfun::quotient_f(&lambda_of(a, sig.p)?, sig.k, sig.l)
}

/// `F^{ij} = ∂F/∂A_ij`, chain rule through `A^{[p]}`:
/// `∂f/∂M = f/(k-l) [T_{k-1}(M)/σ_k - T_{l-1}(M)/σ_l]`, then the adjoint of
/// the (linear) compound map.
pub fn f_gradient(a: &SymMatrix, sig: &OperatorSignature) -> Result<SymMatrix> {
    let (_, g) = f_value_and_gradient(a, sig)?;
    Ok(g)
}

pub fn f_value_and_gradient(a: &SymMatrix, sig: &OperatorSignature) -> Result<(f64, SymMatrix)> {
    let ev = evaluate(a, sig)?;
    require_admissible(&ev, sig)?;
    let (k, l) = (sig.k, sig.l);
    let (sk, sl) = (ev.sigmas[k], ev.sigmas[l]);
    let f = quotient_from_sigmas(sk, sl, k, l);
    let c = f / (k - l) as f64;
    let mut dm = ev.transforms[k - 1].scaled(c / sk);
    if l >= 1 {
        dm = dm.add(&ev.transforms[l - 1].scaled(-c / sl));
    }
    Ok((f, structure(sig.n, sig.p).pull_back(&dm, sig.n)))
}

/// `∂f(Λ(λ))/∂λ_i` for an eigenvalue tuple `λ ∈ ℝ^n`: sums the Λ-level
/// gradient over every index set containing `i`.
pub fn lambda_gradient(lam: &[f64], sig: &OperatorSignature) -> Result<Vec<f64>> {
    if lam.len() != sig.n {
        return Err(Error::InvalidInput(format!(
            "eigenvalue tuple has length {}, signature n={}",
            lam.len(),
            sig.n
        )));
    }
    let big = lambda_of_eigenvalues(lam, sig.p)?;
    let g = symfun::quotient_grad(&big, sig.k, sig.l)?;
    let fam = IndexFamily::build(sig.n, sig.p);
    let mut out = vec![0.0; sig.n];
    for (r, set) in fam.sets.iter().enumerate() {
        for &i in set {
            out[i] += g[r];
        }
    }
    Ok(out)
}

/// `f(Λ(λ))` for an eigenvalue tuple `λ ∈ ℝ^n`.
pub fn lambda_quotient(lam: &[f64], sig: &OperatorSignature) -> Result<f64> {
    let big = lambda_of_eigenvalues(lam, sig.p)?;
    symfun::quotient_f(&big, sig.k, sig.l)
}

/// `p (C(N,k) / C(N,l))^{1/(k-l)}`, the lower bound for `Σ_i ∂f/∂λ_i` and
/// the value of `F(I)`.
pub fn regime_constants(sig: &OperatorSignature) -> f64 {
    let big_n = sig.big_n();
    sig.p as f64 * (binomial(big_n, sig.k) / binomial(big_n, sig.l)).powf(1.0 / (sig.k - sig.l) as f64)
}
