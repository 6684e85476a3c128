//! Verification harness: structural hypotheses of a problem, the gradient
//! growth condition on `ψ̃`, and a-priori-bound style checks on computed
//! solutions.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exprlang::EvalPoint;
use crate::par::{self, Execution};
use crate::pde::grid::Field;
use crate::pde::problem::ProblemSpec;
use crate::pde::radial::RadialProfile;
use crate::pde::solver::SolveReport;
use crate::pde::stencil;

const PRIMES: [u64; 40] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107,
    109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173,
];

/// Halton sequence in `[0,1)^dim` with a seeded Cranley-Patterson rotation.
#[derive(Clone, Debug)]
pub struct QuasiSampler {
    shift: Vec<f64>,
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let (mut f, mut out) = (inv, 0.0);
    while i > 0 {
        out += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    out
}

impl QuasiSampler {
    /// Panics if `dim` exceeds the number of tabulated prime bases (40).
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim <= PRIMES.len(), "quasi-random dimension {dim} too large");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        QuasiSampler {
            shift: (0..dim).map(|_| rng.gen::<f64>()).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        self.shift
            .iter()
            .zip(PRIMES)
            .map(|(s, b)| (radical_inverse(i as u64 + 1, b) + s).fract())
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Sampling {
    pub count: usize,
    pub seed: u64,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling {
            count: 10_000,
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub x: Vec<f64>,
    pub u: f64,
    pub p: Vec<f64>,
    pub nu: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StructuralReport {
    pub c0: Option<f64>,
    pub c0_measured: f64,
    pub c0_ok: bool,
    pub c0_witness: Witness,
    pub alpha0: Option<f64>,
    /// `min -∂_u(1/ψ̃) = min ψ̃_u/ψ̃²`.
    pub alpha0_measured: f64,
    pub alpha0_ok: bool,
    pub alpha0_witness: Witness,
    pub samples: usize,
    pub seed: u64,
    pub u_range: f64,
    pub p_range: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthReport {
    pub gamma: f64,
    pub c1: f64,
    pub m1: f64,
    pub p_max: f64,
    /// `sup (|ψ̃_x| + |ψ̃_u||p| + |ψ̃_p||p|²) / |p|^{2+γ}` over `|p| > M1`.
    pub measured_sup: f64,
    pub ok: bool,
    pub witness: Option<Witness>,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonCheck {
    pub c0: f64,
    pub c0_measured: bool,
    pub max_u: f64,
    pub bound: f64,
    pub tol_comp: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub h: f64,
    pub osc_u: f64,
    pub sup_u: f64,
    pub sup_grad: f64,
    pub sup_hess: f64,
    pub interior_grad_at_center: f64,
    pub radius: f64,
    pub gamma: f64,
    /// `|Du(center)| / (osc/r + osc^{2/(1-γ)} + osc^{1/(1-γ)})`.
    pub center_ratio: f64,
    pub comparison: Option<ComparisonCheck>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioStudy {
    pub h: Vec<f64>,
    pub ratios: Vec<f64>,
    pub sup_grad: Vec<f64>,
    pub sup_hess: Vec<f64>,
    /// Each ratio is at most 1.2 times its predecessor.
    pub stable: bool,
}

fn scale(s: f64, range: f64) -> f64 {
    range * (2.0 * s - 1.0)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// First-index minimum of `(value, witness)` pairs.
fn min_with_witness(items: Vec<(f64, Witness)>) -> (f64, Witness) {
    let mut it = items.into_iter();
    let first = it.next().expect("at least one sample");
    it.fold(first, |best, cur| if cur.0 < best.0 { cur } else { best })
}

/// Samples `-φ_u` over boundary states and `ψ̃_u/ψ̃²` over interior states,
/// `|u| <= U`, `p ∈ [-P,P]^n`.
pub fn check_structural(prob: &ProblemSpec, sampling: Sampling) -> Result<StructuralReport> {
    if sampling.count == 0 {
        return Err(Error::InvalidInput("structural check needs at least one sample".into()));
    }
    let n = prob.sig.n;
    let st = &prob.structural;
    let (ur, pr) = (st.u_range, st.p_range);
    let dom = &prob.domain;

    let db = dom.boundary_dims();
    let bs = QuasiSampler::new(db + 1, sampling.seed);
    let boundary = par::try_map_indexed(Execution::Parallel, sampling.count, |i| -> Result<(f64, Witness)> {
        let s = bs.point(i);
        let (x, nu) = dom.sample_boundary(&s[..db]);
        let u = scale(s[db], ur);
        let pt = EvalPoint::new(x, u, vec![0.0; n]).with_normal(nu);
        let d = prob.phi.eval_with_partials(&pt).map_err(|e| sample_error(e, &pt))?;
        Ok((
            -d.d_u,
            Witness {
                x: pt.x,
                u,
                p: pt.p,
                nu: Some(pt.nu),
            },
        ))
    })?;

    let di = dom.interior_dims();
    let is = QuasiSampler::new(di + 1 + n, sampling.seed.wrapping_add(1));
    let interior = par::try_map_indexed(Execution::Parallel, sampling.count, |i| -> Result<(f64, Witness)> {
        let s = is.point(i);
        let x = dom.sample_interior(&s[..di]);
        let u = scale(s[di], ur);
        let p: Vec<f64> = (0..n).map(|j| scale(s[di + 1 + j], pr)).collect();
        let pt = EvalPoint::new(x, u, p);
        let d = prob.psi_tilde.eval_with_partials(&pt).map_err(|e| sample_error(e, &pt))?;
        Ok((
            d.d_u / (d.value * d.value),
            Witness {
                x: pt.x,
                u,
                p: pt.p,
                nu: None,
            },
        ))
    })?;

    let (c0_measured, c0_witness) = min_with_witness(boundary);
    let (alpha0_measured, alpha0_witness) = min_with_witness(interior);
    let c0_ok = c0_measured >= st.c0.unwrap_or(0.0) && c0_measured > 0.0;
    let alpha0_ok = alpha0_measured >= st.alpha0.unwrap_or(0.0) && alpha0_measured > 0.0;
    Ok(StructuralReport {
        c0: st.c0,
        c0_measured,
        c0_ok,
        c0_witness,
        alpha0: st.alpha0,
        alpha0_measured,
        alpha0_ok,
        alpha0_witness,
        samples: sampling.count,
        seed: sampling.seed,
        u_range: ur,
        p_range: pr,
    })
}

fn sample_error(e: crate::exprlang::ExprError, pt: &EvalPoint) -> Error {
    Error::InvalidInput(format!("{e} at sample x={:?}, u={}, p={:?}", pt.x, pt.u, pt.p))
}

/// Gradients sampled per rung of the radius ladder.
const GROWTH_PER_RUNG: usize = 16;
/// Rungs per doubling of `|p|`.
const GROWTH_RUNGS_PER_OCTAVE: f64 = 16.0;

/// Samples the growth quotient on the ladder `|p| = M1·2^{j/16} <= P_max`,
/// `j >= 1`. Every rung uses the same states and directions regardless of
/// `P_max`, so the measured supremum is non-decreasing in `P_max`.
pub fn check_growth(prob: &ProblemSpec, seed: u64) -> Result<GrowthReport> {
    let st = &prob.structural;
    let (Some(gamma), Some(c1), Some(m1)) = (st.gamma, st.c1, st.m1) else {
        return Err(Error::InvalidInput("growth check needs gamma, C1 and M1".into()));
    };
    if !(gamma < 1.0) {
        return Err(Error::InvalidInput(format!("growth exponent gamma must be < 1, got {gamma}")));
    }
    if !(m1 > 0.0) {
        return Err(Error::InvalidInput(format!("M1 must be positive, got {m1}")));
    }
    let n = prob.sig.n;
    let dom = &prob.domain;
    let di = dom.interior_dims();
    let sampler = QuasiSampler::new(di + 1 + n, seed);
    let rungs = ((st.p_max / m1).log2() * GROWTH_RUNGS_PER_OCTAVE + 1e-9).floor().max(0.0) as usize;
    let count = rungs * GROWTH_PER_RUNG;

    let vals = par::try_map_indexed(Execution::Parallel, count, |i| -> Result<(f64, Witness)> {
        let j = i / GROWTH_PER_RUNG + 1;
        let rho = m1 * 2f64.powf(j as f64 / GROWTH_RUNGS_PER_OCTAVE);
        let s = sampler.point(i);
        let x = dom.sample_interior(&s[..di]);
        let u = scale(s[di], st.u_range);
        let mut dir: Vec<f64> = (0..n).map(|k| 2.0 * s[di + 1 + k] - 1.0).collect();
        let dn = norm(&dir);
        if dn < 1e-12 {
            dir = vec![0.0; n];
            dir[0] = 1.0;
        } else {
            dir.iter_mut().for_each(|v| *v /= dn);
        }
        let p: Vec<f64> = dir.iter().map(|v| rho * v).collect();
        let pt = EvalPoint::new(x, u, p);
        let d = prob.psi_tilde.eval_with_partials(&pt).map_err(|e| sample_error(e, &pt))?;
        let q = (norm(&d.d_x) + d.d_u.abs() * rho + norm(&d.d_p) * rho * rho) / rho.powf(2.0 + gamma);
        Ok((
            q,
            Witness {
                x: pt.x,
                u,
                p: pt.p,
                nu: None,
            },
        ))
    })?;

    let mut best: Option<(f64, Witness)> = None;
    for (q, w) in vals {
        if best.as_ref().is_none_or(|b| q > b.0) {
            best = Some((q, w));
        }
    }
    let measured_sup = best.as_ref().map_or(0.0, |b| b.0);
    Ok(GrowthReport {
        gamma,
        c1,
        m1,
        p_max: st.p_max,
        measured_sup,
        ok: measured_sup <= c1,
        witness: best.map(|b| b.1),
        samples: count,
    })
}

fn center_ratio(grad_center: f64, osc: f64, r: f64, gamma: f64) -> f64 {
    let e = 1.0 / (1.0 - gamma);
    let denom = osc / r + osc.powf(2.0 * e) + osc.powf(e);
    if denom > 0.0 {
        grad_center / denom
    } else {
        0.0
    }
}

fn comparison(prob: &ProblemSpec, boundary: &[(Vec<f64>, Vec<f64>)], max_u: f64, sup_u: f64, h: f64) -> Result<Option<ComparisonCheck>> {
    let (c0, measured) = match prob.structural.c0 {
        Some(c) => (c, false),
        None => (check_structural(prob, Sampling::default())?.c0_measured, true),
    };
    if !(c0 > 0.0) {
        return Ok(None);
    }
    let mut phi_max = f64::NEG_INFINITY;
    for (x, nu) in boundary {
        let pt = EvalPoint::new(x.clone(), 0.0, vec![0.0; x.len()]).with_normal(nu.clone());
        phi_max = phi_max.max(prob.phi.eval(&pt)?);
    }
    let tol_comp = 10.0 * h * h * (1.0 + sup_u);
    let bound = phi_max / c0 + tol_comp;
    Ok(Some(ComparisonCheck {
        c0,
        c0_measured: measured,
        max_u,
        bound,
        tol_comp,
        ok: max_u <= bound,
    }))
}

fn require_converged(report: &SolveReport) -> Result<()> {
    if !report.converged {
        return Err(Error::InvalidInput("bounds are only checked on converged solutions".into()));
    }
    Ok(())
}

fn range(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Bound quantities of a converged box-grid solution.
pub fn verify_solution(prob: &ProblemSpec, field: &Field, report: &SolveReport) -> Result<BoundReport> {
    require_converged(report)?;
    let grid = &field.grid;
    let (lo, hi) = range(&field.values);
    let sup_u = lo.abs().max(hi.abs());
    let osc = hi - lo;

    let n = grid.n();
    let grads = par::map_indexed(Execution::Parallel, grid.len(), |node| {
        stencil::gradient_values(grid, &field.values, node)
    });
    let center = grid.center();
    let gc: Vec<f64> = (0..n)
        .map(|a| {
            let comp: Vec<f64> = grads.iter().map(|g| g[a]).collect();
            grid.interpolate(&comp, &center)
        })
        .collect();
    let grad_center = norm(&gc);
    let r = grid.inradius();
    let gamma = prob.structural.gamma.unwrap_or(0.0);

    let boundary: Vec<(Vec<f64>, Vec<f64>)> = (0..grid.len())
        .filter_map(|node| grid.outward_normal(node).map(|nu| (grid.coords(node), nu)))
        .collect();
    let h = grid.max_spacing();
    Ok(BoundReport {
        h,
        osc_u: osc,
        sup_u,
        sup_grad: report.sup_grad,
        sup_hess: report.sup_hess,
        interior_grad_at_center: grad_center,
        radius: r,
        gamma,
        center_ratio: center_ratio(grad_center, osc, r, gamma),
        comparison: comparison(prob, &boundary, hi, sup_u, h)?,
    })
}

/// Bound quantities of a converged radial profile.
pub fn verify_radial(prob: &ProblemSpec, profile: &RadialProfile, report: &SolveReport) -> Result<BoundReport> {
    require_converged(report)?;
    let (lo, hi) = range(&profile.values);
    let sup_u = lo.abs().max(hi.abs());
    let osc = hi - lo;
    let n = profile.n;
    let mut x = vec![0.0; n];
    x[0] = profile.radius;
    let mut nu = vec![0.0; n];
    nu[0] = 1.0;
    let gamma = prob.structural.gamma.unwrap_or(0.0);
    let h = profile.spacing();
    Ok(BoundReport {
        h,
        osc_u: osc,
        sup_u,
        sup_grad: report.sup_grad,
        sup_hess: report.sup_hess,
        // u'(0) = 0 by symmetry
        interior_grad_at_center: 0.0,
        radius: profile.radius,
        gamma,
        center_ratio: 0.0,
        comparison: comparison(prob, &[(x, nu)], hi, sup_u, h)?,
    })
}

/// Ratio stability across a refinement sequence (coarse to fine).
pub fn ratio_study(bounds: &[BoundReport]) -> RatioStudy {
    let ratios: Vec<f64> = bounds.iter().map(|b| b.center_ratio).collect();
    let stable = ratios.windows(2).all(|w| w[1] <= 1.2 * w[0]) && ratios.iter().all(|r| r.is_finite());
    RatioStudy {
        h: bounds.iter().map(|b| b.h).collect(),
        sup_grad: bounds.iter().map(|b| b.sup_grad).collect(),
        sup_hess: bounds.iter().map(|b| b.sup_hess).collect(),
        ratios,
        stable,
    }
}
