use serde::{Deserialize, Serialize};

use crate::compound::{regime_constants, OperatorSignature};
use crate::error::{Error, Result};
use crate::estimates::QuasiSampler;
use crate::exprlang::{EvalPoint, ExprAst};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Domain {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Box { lower, .. } => lower.len(),
            Domain::Ball { center, .. } => center.len(),
        }
    }

    pub fn center(&self) -> Vec<f64> {
        match self {
            Domain::Box { lower, upper } => lower.iter().zip(upper).map(|(a, b)| 0.5 * (a + b)).collect(),
            Domain::Ball { center, .. } => center.clone(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Domain::Box { lower, upper } => {
                if lower.len() != upper.len() || lower.is_empty() {
                    return Err(Error::InvalidInput("box lower/upper lengths differ".into()));
                }
                if lower.iter().zip(upper).any(|(a, b)| !(b > a)) {
                    return Err(Error::InvalidInput("box extents must satisfy lower < upper".into()));
                }
            }
            Domain::Ball { radius, center } => {
                if !(*radius > 0.0) || center.iter().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidInput("ball radius must be positive".into()));
                }
            }
        }
        Ok(())
    }

    /// Unit-cube coordinates consumed by [`Domain::sample_interior`].
    pub(crate) fn interior_dims(&self) -> usize {
        match self {
            Domain::Box { lower, .. } => lower.len(),
            Domain::Ball { center, .. } => sphere_dims(center.len()) + 1,
        }
    }

    /// Unit-cube coordinates consumed by [`Domain::sample_boundary`].
    pub(crate) fn boundary_dims(&self) -> usize {
        match self {
            Domain::Box { lower, .. } => lower.len(),
            Domain::Ball { center, .. } => sphere_dims(center.len()),
        }
    }

    /// Map of the unit cube onto the domain.
    pub(crate) fn sample_interior(&self, s: &[f64]) -> Vec<f64> {
        match self {
            Domain::Box { lower, upper } => (0..lower.len()).map(|i| lower[i] + s[i] * (upper[i] - lower[i])).collect(),
            Domain::Ball { center, radius } => {
                let n = center.len();
                let m = sphere_dims(n);
                let dir = sphere_point(&s[..m], n);
                let rho = radius * s[m].powf(1.0 / n as f64);
                (0..n).map(|i| center[i] + rho * dir[i]).collect()
            }
        }
    }

    /// Map of the unit cube onto the boundary; returns `(x, ν)`.
    pub(crate) fn sample_boundary(&self, s: &[f64]) -> (Vec<f64>, Vec<f64>) {
        match self {
            Domain::Box { lower, upper } => {
                let n = lower.len();
                let face = ((s[0] * (2 * n) as f64) as usize).min(2 * n - 1);
                let (axis, high) = (face / 2, face % 2 == 1);
                let mut x = Vec::with_capacity(n);
                let mut k = 1;
                for i in 0..n {
                    if i == axis {
                        x.push(if high { upper[i] } else { lower[i] });
                    } else {
                        x.push(lower[i] + s[k] * (upper[i] - lower[i]));
                        k += 1;
                    }
                }
                let mut nu = vec![0.0; n];
                nu[axis] = if high { 1.0 } else { -1.0 };
                (x, nu)
            }
            Domain::Ball { center, radius } => {
                let n = center.len();
                let dir = sphere_point(&s[..sphere_dims(n)], n);
                ((0..n).map(|i| center[i] + radius * dir[i]).collect(), dir)
            }
        }
    }
}

fn sphere_dims(n: usize) -> usize {
    2 * n.div_ceil(2)
}

/// Point on the unit sphere in ℝⁿ from `sphere_dims(n)` uniforms
/// (Box-Muller pairs, normalized).
fn sphere_point(s: &[f64], n: usize) -> Vec<f64> {
    let mut g = Vec::with_capacity(n + 1);
    for pair in s.chunks(2) {
        let u1 = pair[0].clamp(1e-12, 1.0 - 1e-12);
        let r = (-2.0 * u1.ln()).sqrt();
        let th = 2.0 * std::f64::consts::PI * pair[1];
        g.push(r * th.cos());
        g.push(r * th.sin());
    }
    g.truncate(n);
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        let mut e = vec![0.0; n];
        e[0] = 1.0;
        return e;
    }
    g.iter().map(|v| v / norm).collect()
}

/// Structural constants, used only by the verification harness.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Structural {
    pub c0: Option<f64>,
    pub alpha0: Option<f64>,
    pub gamma: Option<f64>,
    pub c1: Option<f64>,
    pub m1: Option<f64>,
    /// Sample range `[-U, U]` for `u`.
    pub u_range: f64,
    /// Sample range `[-P, P]^n` for the gradient argument.
    pub p_range: f64,
    /// Largest `|p|` sampled by the growth check.
    pub p_max: f64,
}

impl Structural {
    pub fn with_defaults() -> Self {
        Structural {
            u_range: 1.0,
            p_range: 1.0,
            p_max: 1e3,
            ..Default::default()
        }
    }
}

/// The Neumann problem `F(D²u) = ψ̃(x,u,Du)` in Ω, `u_ν = φ(x,u)` on ∂Ω.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub sig: OperatorSignature,
    pub domain: Domain,
    pub psi_tilde: ExprAst,
    pub phi: ExprAst,
    pub structural: Structural,
}

/// Number of states probed for `ψ̃ > 0` at load time.
const LOAD_SAMPLES: usize = 512;

impl ProblemSpec {
    /// Validates the problem: dimensions agree, `φ` has no gradient
    /// dependence, `ψ̃` has no normal dependence, and `ψ̃ > 0` on sampled
    /// states `x ∈ Ω, |u| <= U, p ∈ [-P,P]^n`.
    pub fn new(
        sig: OperatorSignature,
        domain: Domain,
        psi_tilde: ExprAst,
        phi: ExprAst,
        structural: Structural,
    ) -> Result<Self> {
        domain.validate()?;
        let n = sig.n;
        if domain.dim() != n || psi_tilde.n != n || phi.n != n {
            return Err(Error::InvalidInput(format!(
                "dimension mismatch: signature n={n}, domain {}, psi {}, phi {}",
                domain.dim(),
                psi_tilde.n,
                phi.n
            )));
        }
        if phi.depends_on_gradient() {
            return Err(Error::InvalidInput("phi must not depend on p1..pn or q".into()));
        }
        if psi_tilde.depends_on_normal() {
            return Err(Error::InvalidInput("psi must not reference the normal nu".into()));
        }
        let prob = ProblemSpec {
            sig,
            domain,
            psi_tilde,
            phi,
            structural,
        };
        prob.check_psi_positive()?;
        Ok(prob)
    }

    fn check_psi_positive(&self) -> Result<()> {
        let n = self.sig.n;
        let dx = self.domain.interior_dims();
        let sampler = QuasiSampler::new(dx + 1 + n, 0x5eed);
        let (ur, pr) = (self.structural.u_range, self.structural.p_range);
        for i in 0..LOAD_SAMPLES {
            let s = sampler.point(i);
            let x = self.domain.sample_interior(&s[..dx]);
            let u = ur * (2.0 * s[dx] - 1.0);
            let p = (0..n).map(|j| pr * (2.0 * s[dx + 1 + j] - 1.0)).collect();
            let pt = EvalPoint::new(x, u, p);
            let v = self.psi_tilde.eval(&pt)?;
            if !(v > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "psi_tilde must be positive; got {v} at x={:?}, u={}, p={:?}",
                    pt.x, pt.u, pt.p
                )));
            }
        }
        Ok(())
    }
}

/// Homotopy between the explicitly solvable start problem built from
/// `u₀ = (A/2)|x - x_c|²` and the target problem.
#[derive(Clone, Debug, PartialEq)]
pub struct Homotopy {
    pub t: f64,
    pub a0: f64,
    pub center: Vec<f64>,
    /// `ψ̃₀ = F(D²u₀) = A · p (C(N,k)/C(N,l))^{1/(k-l)}`.
    pub psi0: f64,
}

impl Homotopy {
    pub fn new(prob: &ProblemSpec, a0: f64, t: f64) -> Self {
        Homotopy {
            t,
            a0,
            center: prob.domain.center(),
            psi0: a0 * regime_constants(&prob.sig),
        }
    }

    pub fn start_value(&self, x: &[f64]) -> f64 {
        0.5 * self.a0 * x.iter().zip(&self.center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>()
    }

    /// `φ₀(x,u) = A ν·(x - x_c) - (u - u₀(x))`; returns value and `∂/∂u`.
    fn start_phi(&self, x: &[f64], u: f64, nu: &[f64]) -> (f64, f64) {
        let dot: f64 = nu.iter().zip(x.iter().zip(&self.center)).map(|(n, (a, c))| n * (a - c)).sum();
        (self.a0 * dot - (u - self.start_value(x)), -1.0)
    }
}

/// Value and the partials the Jacobian needs.
#[derive(Clone, Debug)]
pub(crate) struct SourceEval {
    pub value: f64,
    pub d_u: f64,
    pub d_p: Vec<f64>,
}

/// The equation actually discretized: the target problem, or a homotopy stage.
#[derive(Clone, Copy, Debug)]
pub struct Equation<'a> {
    pub prob: &'a ProblemSpec,
    pub homotopy: Option<&'a Homotopy>,
}

impl<'a> Equation<'a> {
    pub fn target(prob: &'a ProblemSpec) -> Self {
        Equation { prob, homotopy: None }
    }

    pub fn stage(prob: &'a ProblemSpec, h: &'a Homotopy) -> Self {
        Equation {
            prob,
            homotopy: Some(h),
        }
    }

    fn t(&self) -> f64 {
        self.homotopy.map_or(1.0, |h| h.t)
    }

    pub(crate) fn psi(&self, x: &[f64], u: f64, p: &[f64]) -> Result<SourceEval> {
        let t = self.t();
        let n = x.len();
        let mut out = SourceEval {
            value: 0.0,
            d_u: 0.0,
            d_p: vec![0.0; n],
        };
        if t > 0.0 {
            let pt = EvalPoint::new(x.to_vec(), u, p.to_vec());
            let d = self.prob.psi_tilde.eval_with_partials(&pt)?;
            out.value = t * d.value;
            out.d_u = t * d.d_u;
            for (o, v) in out.d_p.iter_mut().zip(&d.d_p) {
                *o = t * v;
            }
        }
        if let Some(h) = self.homotopy.filter(|_| t < 1.0) {
            out.value += (1.0 - t) * h.psi0;
        }
        Ok(out)
    }

    /// Neumann data and its `u`-derivative.
    pub(crate) fn phi(&self, x: &[f64], u: f64, nu: &[f64]) -> Result<(f64, f64)> {
        let t = self.t();
        let (mut v, mut du) = (0.0, 0.0);
        if t > 0.0 {
            let pt = EvalPoint::new(x.to_vec(), u, vec![0.0; x.len()]).with_normal(nu.to_vec());
            let d = self.prob.phi.eval_with_partials(&pt)?;
            v = t * d.value;
            du = t * d.d_u;
        }
        if let Some(h) = self.homotopy.filter(|_| t < 1.0) {
            let (v0, du0) = h.start_phi(x, u, nu);
            v += (1.0 - t) * v0;
            du += (1.0 - t) * du0;
        }
        Ok((v, du))
    }
}
