//! Independent oracles, samplers and problem builders shared by the
//! integration tests.
#![allow(dead_code)]

use hessquot::exprlang::parse;
use hessquot::pde::{Domain, ProblemSpec, Structural};
use hessquot::{OperatorSignature, SymMatrix};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `σ_k` by enumerating all index subsets (`m <= 16`).
pub fn sigma_enum(lam: &[f64], k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let m = lam.len();
    if k > m {
        return 0.0;
    }
    (0u32..1 << m)
        .filter(|s| s.count_ones() as usize == k)
        .map(|s| (0..m).filter(|i| s >> i & 1 == 1).map(|i| lam[i]).product::<f64>())
        .sum()
}

/// All `σ_0..=σ_m` by multiplying out `Π (1 + λ_i t)`.
pub fn sigma_poly(lam: &[f64]) -> Vec<f64> {
    let mut c = vec![1.0];
    for &x in lam {
        c.push(0.0);
        for j in (1..c.len()).rev() {
            c[j] += x * c[j - 1];
        }
    }
    c
}

pub fn in_cone_enum(lam: &[f64], k: usize) -> bool {
    (1..=k).all(|j| sigma_enum(lam, j) > 0.0)
}

pub fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// All `p`-fold sums of distinct entries.
pub fn p_sums(lam: &[f64], p: usize) -> Vec<f64> {
    let n = lam.len();
    (0u32..1 << n)
        .filter(|s| s.count_ones() as usize == p)
        .map(|s| (0..n).filter(|i| s >> i & 1 == 1).map(|i| lam[i]).sum())
        .collect()
}

pub fn quotient_enum(lam: &[f64], k: usize, l: usize) -> f64 {
    (sigma_enum(lam, k) / sigma_enum(lam, l)).powf(1.0 / (k - l) as f64)
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Rejection sample of `Γ_k ⊂ ℝ^m`: a Gaussian vector shifted along the
/// diagonal by a random amount.
pub fn gamma_sample(rng: &mut ChaCha8Rng, m: usize, k: usize) -> Vec<f64> {
    loop {
        let shift = rng.gen_range(0.0..3.0);
        let lam: Vec<f64> = (0..m).map(|_| shift + gaussian(rng)).collect();
        if sigma_poly(&lam)[1..=k].iter().all(|&s| s > 0.0) {
            return lam;
        }
    }
}

/// `λ ∈ ℝ^n` whose `p`-sums lie in `Γ_k`.
pub fn admissible_lambda(rng: &mut ChaCha8Rng, sig: &OperatorSignature) -> Vec<f64> {
    loop {
        let shift = rng.gen_range(0.0..2.0);
        let lam: Vec<f64> = (0..sig.n).map(|_| shift + gaussian(rng)).collect();
        if in_cone_enum(&p_sums(&lam, sig.p), sig.k) {
            return lam;
        }
    }
}

pub fn to_na(m: &SymMatrix) -> DMatrix<f64> {
    let n = m.dim();
    DMatrix::from_fn(n, n, |i, j| m.get(i, j))
}

pub fn from_na(m: &DMatrix<f64>) -> SymMatrix {
    SymMatrix::from_fn(m.nrows(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
}

/// Eigenvalues by nalgebra, sorted descending.
pub fn eig_oracle(m: &SymMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(to_na(m)).eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Haar-ish random orthogonal matrix from the QR factor of a Gaussian matrix.
pub fn random_rotation(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| gaussian(rng));
    g.qr().q()
}

pub fn random_sym(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> SymMatrix {
    SymMatrix::from_fn(n, |_, _| scale * gaussian(rng))
}

/// `Q diag(λ) Qᵀ` with admissible `λ` and random `Q`.
pub fn admissible_matrix(rng: &mut ChaCha8Rng, sig: &OperatorSignature) -> SymMatrix {
    let lam = admissible_lambda(rng, sig);
    let q = random_rotation(rng, sig.n);
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(lam));
    from_na(&(&q * d * q.transpose()))
}

pub fn sig(n: usize, p: usize, k: usize, l: usize) -> OperatorSignature {
    OperatorSignature::new(n, p, k, l).unwrap()
}

/// Observed orders `log(e_i/e_{i+1}) / log(h_i/h_{i+1})`.
pub fn orders(h: &[f64], e: &[f64]) -> Vec<f64> {
    h.windows(2)
        .zip(e.windows(2))
        .map(|(h, e)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect()
}

pub fn u_star_box(x: &[f64]) -> f64 {
    0.5 * x.iter().map(|v| v * v).sum::<f64>() + 0.1 * x[0].sin()
}

/// `u* = |x|²/2 + 0.1 sin(x1)` on `[0,1]³`, `(n,p,k,l) = (3,2,2,0)`.
pub fn manufactured_box() -> ProblemSpec {
    ProblemSpec::new(
        sig(3, 2, 2, 0),
        Domain::Box {
            lower: vec![0.0; 3],
            upper: vec![1.0; 3],
        },
        parse("sqrt((2 - 0.1*sin(x1))*(6 - 0.1*sin(x1))) + u - (r^2/2 + 0.1*sin(x1))", 3).unwrap(),
        parse("nu1*(x1 + 0.1*cos(x1)) + nu2*x2 + nu3*x3 - (u - (r^2/2 + 0.1*sin(x1)))", 3).unwrap(),
        Structural {
            c0: Some(1.0),
            ..Structural::with_defaults()
        },
    )
    .unwrap()
}

pub fn u_star_quartic(r: f64) -> f64 {
    0.5 * r * r + 0.1 * r.powi(4)
}

/// `u* = r²/2 + 0.1 r⁴` on the unit ball in ℝ³, `(n,p,k,l) = (3,2,2,0)`.
pub fn radial_quartic() -> ProblemSpec {
    ProblemSpec::new(
        sig(3, 2, 2, 0),
        Domain::Ball {
            center: vec![0.0; 3],
            radius: 1.0,
        },
        parse(
            "sqrt((2 + 1.6*r^2)^2 + 2*(2 + 1.6*r^2)*(2 + 0.8*r^2)) + u - (r^2/2 + 0.1*r^4)",
            3,
        )
        .unwrap(),
        parse("1.4 - (u - 0.6)", 3).unwrap(),
        Structural {
            c0: Some(1.0),
            ..Structural::with_defaults()
        },
    )
    .unwrap()
}

/// `u = r²/2` on the unit ball in ℝ³, `(n,p,k,l) = (3,2,2,0)`.
pub fn radial_quadratic() -> ProblemSpec {
    ProblemSpec::new(
        sig(3, 2, 2, 0),
        Domain::Ball {
            center: vec![0.0; 3],
            radius: 1.0,
        },
        parse(&format!("{:?}", 12f64.sqrt()), 3).unwrap(),
        parse("1 - (u - r^2/2)", 3).unwrap(),
        Structural {
            c0: Some(1.0),
            ..Structural::with_defaults()
        },
    )
    .unwrap()
}

/// `(n,p,k,l) = (2,1,2,0)` with gradient- and `u`-dependent data on
/// `[-1,1]²`; used for Jacobian checks.
pub fn monge_ampere_2d() -> ProblemSpec {
    ProblemSpec::new(
        sig(2, 1, 2, 0),
        Domain::Box {
            lower: vec![-1.0; 2],
            upper: vec![1.0; 2],
        },
        parse("1 + 0.1*q^2 + 0.2*u + 0.05*x1*p2", 2).unwrap(),
        parse("-u + sin(x1) + 0.3*nu2", 2).unwrap(),
        Structural::with_defaults(),
    )
    .unwrap()
}
