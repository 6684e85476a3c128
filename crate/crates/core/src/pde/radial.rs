//! Radial reduction on balls centered at the origin.
//!
//! For `u = u(r)` the Hessian has eigenvalues `u''` (once) and `u'/r`
//! (`n-1` times), so `Λ` takes the value `u'' + (p-1)u'/r` with multiplicity
//! `C(n-1,p-1)` and `p u'/r` with multiplicity `C(n-1,p)`. At `r = 0` the
//! ratio `u'/r` is replaced by `u''(0)`.

use serde::Serialize;

use super::assemble::{collect_rows, Assembly, RowOut};
use super::problem::{Domain, Equation, Homotopy, ProblemSpec};
use super::solver::{solve_continuation, solve_direct, Discretization, SolveOptions, SolveReport};
use crate::compound::{Margin, OperatorSignature};
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::symfun::{binomial, quotient_f, quotient_grad, sigma_prefix, EigenTuple};

/// Uniform grid `r_i = i h` on `[0, R]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RadialProfile {
    pub n: usize,
    pub radius: f64,
    pub r: Vec<f64>,
    pub values: Vec<f64>,
}

impl RadialProfile {
    pub fn spacing(&self) -> f64 {
        self.radius / (self.r.len() - 1) as f64
    }

    /// Linear interpolation at radius `s`.
    pub fn interpolate(&self, s: f64) -> f64 {
        let h = self.spacing();
        let t = (s / h).clamp(0.0, (self.r.len() - 1) as f64);
        let i = (t.floor() as usize).min(self.r.len() - 2);
        let w = t - i as f64;
        (1.0 - w) * self.values[i] + w * self.values[i + 1]
    }

    pub fn max_abs_diff(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.r
            .iter()
            .zip(&self.values)
            .fold(0.0f64, |m, (&r, &u)| m.max((u - f(r)).abs()))
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("# radial n={} nodes={} radius={:?}\n", self.n, self.r.len(), self.radius);
        for (i, (r, u)) in self.r.iter().zip(&self.values).enumerate() {
            out.push_str(&format!("{i},{r:?},{u:?}\n"));
        }
        out
    }
}

/// Multiplicities of the two distinct `Λ` values, checked against `C(n,p)`.
pub fn lambda_multiplicities(sig: &OperatorSignature) -> Result<(usize, usize)> {
    let (n, p) = (sig.n, sig.p);
    let m1 = binomial(n - 1, p - 1) as usize;
    let m2 = binomial(n - 1, p) as usize;
    if m1 + m2 != sig.big_n() {
        return Err(Error::InvalidInput(format!(
            "multiplicities {m1} + {m2} do not sum to C({n},{p}) = {}",
            sig.big_n()
        )));
    }
    Ok((m1, m2))
}

struct RadialDiscretization<'a> {
    sig: &'a OperatorSignature,
    radius: f64,
    m: usize,
    mult: (usize, usize),
}

/// Value, `(∂/∂a, ∂/∂w)` and margin of `f(Λ)` for eigenvalues `a` (once)
/// and `w` (`n-1` times).
fn radial_quotient(d: &RadialDiscretization, a: f64, w: f64) -> Result<(f64, f64, f64, Margin)> {
    let p = d.sig.p as f64;
    let (m1, m2) = d.mult;
    let l1 = a + (p - 1.0) * w;
    let l2 = p * w;
    let mut lam = vec![l1; m1];
    lam.extend(std::iter::repeat_n(l2, m2));
    let lam = EigenTuple::new(lam)?;
    let (k, l) = (d.sig.k, d.sig.l);
    let f = quotient_f(&lam, k, l)?;
    let g = quotient_grad(&lam, k, l)?;
    let g1: f64 = g.as_slice()[..m1].iter().sum();
    let g2: f64 = g.as_slice()[m1..].iter().sum();

    let sig = sigma_prefix(lam.as_slice(), k);
    let norm = 1.0 + a.abs().max(w.abs());
    let mut margin = Margin {
        raw: f64::INFINITY,
        scaled: f64::INFINITY,
    };
    for (j, s) in sig.iter().enumerate().take(k + 1).skip(1) {
        let v = s / binomial(d.sig.big_n(), j);
        margin.raw = margin.raw.min(v);
        margin.scaled = margin.scaled.min(v / norm.powi(j as i32));
    }
    Ok((f, g1, (p - 1.0) * g1 + p * g2, margin))
}

impl RadialDiscretization<'_> {
    fn h(&self) -> f64 {
        self.radius / (self.m - 1) as f64
    }

    fn point(&self, r: f64) -> Vec<f64> {
        let mut x = vec![0.0; self.sig.n];
        x[0] = r;
        x
    }

    fn row(&self, values: &[f64], i: usize, eq: &Equation, want_jacobian: bool) -> Result<RowOut> {
        let h = self.h();
        let m = self.m;
        let r = i as f64 * h;
        let x = self.point(r);
        let u = values[i];
        let mut row = Vec::new();

        if i == m - 1 {
            let du = (3.0 * values[m - 1] - 4.0 * values[m - 2] + values[m - 3]) / (2.0 * h);
            let (phi, phi_u) = eq.phi(&x, u, &self.point(1.0))?;
            if want_jacobian {
                row.push((m - 1, 1.5 / h - phi_u));
                row.push((m - 2, -2.0 / h));
                row.push((m - 3, 0.5 / h));
            }
            return Ok(RowOut {
                r: du - phi,
                boundary: true,
                margin: None,
                psi_abs: 0.0,
                row,
            });
        }

        // (a, w, du) as linear stencils of the nodal values
        let (a_st, w_st, du_st): (Vec<(usize, f64)>, Vec<(usize, f64)>, Vec<(usize, f64)>) = if i == 0 {
            let s = vec![(0, -2.0 / (h * h)), (1, 2.0 / (h * h))];
            (s.clone(), s, Vec::new())
        } else {
            (
                vec![(i - 1, 1.0 / (h * h)), (i, -2.0 / (h * h)), (i + 1, 1.0 / (h * h))],
                vec![(i - 1, -0.5 / (h * r)), (i + 1, 0.5 / (h * r))],
                vec![(i - 1, -0.5 / h), (i + 1, 0.5 / h)],
            )
        };
        let apply = |st: &[(usize, f64)]| st.iter().map(|&(j, c)| c * values[j]).sum::<f64>();
        let (a, w, du) = (apply(&a_st), apply(&w_st), apply(&du_st));
        let (f, fa, fw, margin) = radial_quotient(self, a, w)?;
        let src = eq.psi(&x, u, &self.point(du))?;
        if want_jacobian {
            row.extend(a_st.iter().map(|&(j, c)| (j, fa * c)));
            row.extend(w_st.iter().map(|&(j, c)| (j, fw * c)));
            row.extend(du_st.iter().map(|&(j, c)| (j, -src.d_p[0] * c)));
            row.push((i, -src.d_u));
        }
        Ok(RowOut {
            r: f - src.value,
            boundary: false,
            margin: Some(margin),
            psi_abs: src.value.abs(),
            row,
        })
    }
}

impl Discretization for RadialDiscretization<'_> {
    fn assemble(&self, values: &[f64], eq: &Equation, want_jacobian: bool, exec: Execution) -> Result<Assembly> {
        if values.len() != self.m {
            return Err(Error::Grid(format!("{} values for {} radial nodes", values.len(), self.m)));
        }
        let rows = par::try_map_indexed(exec, self.m, |i| {
            self.row(values, i, eq, want_jacobian).map_err(|e| e.at_node(i))
        })?;
        Ok(collect_rows(self.m, rows, want_jacobian))
    }

    fn start_values(&self, hom: &Homotopy) -> Vec<f64> {
        let h = self.h();
        (0..self.m).map(|i| hom.start_value(&self.point(i as f64 * h))).collect()
    }

    fn extrema(&self, values: &[f64], _exec: Execution) -> Result<(f64, f64)> {
        let h = self.h();
        let m = self.m;
        let (mut g, mut hs) = (0.0f64, 0.0f64);
        for i in 0..m {
            let (du, d2u) = if i == 0 {
                (0.0, 2.0 * (values[1] - values[0]) / (h * h))
            } else if i == m - 1 {
                (
                    (3.0 * values[i] - 4.0 * values[i - 1] + values[i - 2]) / (2.0 * h),
                    (2.0 * values[i] - 5.0 * values[i - 1] + 4.0 * values[i - 2] - values[i - 3]) / (h * h),
                )
            } else {
                (
                    (values[i + 1] - values[i - 1]) / (2.0 * h),
                    (values[i + 1] - 2.0 * values[i] + values[i - 1]) / (h * h),
                )
            };
            let w = if i == 0 { d2u } else { du / (i as f64 * h) };
            g = g.max(du.abs());
            hs = hs.max(d2u.abs()).max(w.abs());
        }
        Ok((g, hs))
    }
}

fn discretization<'a>(prob: &'a ProblemSpec, m: usize) -> Result<RadialDiscretization<'a>> {
    let Domain::Ball { center, radius } = &prob.domain else {
        return Err(Error::InvalidInput("radial reduction needs a ball domain".into()));
    };
    if center.iter().any(|&c| c != 0.0) {
        return Err(Error::InvalidInput("radial reduction needs the ball centered at the origin".into()));
    }
    if !prob.psi_tilde.is_radial() || !prob.phi.is_radial() {
        return Err(Error::InvalidInput("radial reduction needs psi and phi to depend on r, u, q only".into()));
    }
    if m < 5 {
        return Err(Error::Grid(format!("radial grid needs at least 5 nodes, got {m}")));
    }
    Ok(RadialDiscretization {
        sig: &prob.sig,
        radius: *radius,
        m,
        mult: lambda_multiplicities(&prob.sig)?,
    })
}

fn profile(prob: &ProblemSpec, d: &RadialDiscretization, values: Vec<f64>) -> RadialProfile {
    let h = d.h();
    RadialProfile {
        n: prob.sig.n,
        radius: d.radius,
        r: (0..d.m).map(|i| i as f64 * h).collect(),
        values,
    }
}

/// Continuation solve of the radial problem on `m` nodes.
pub fn radial_solve(prob: &ProblemSpec, m: usize, opts: &SolveOptions) -> Result<(RadialProfile, SolveReport)> {
    let d = discretization(prob, m)?;
    let (values, report) = solve_continuation(&d, prob, opts)?;
    Ok((profile(prob, &d, values), report))
}

/// Damped Newton on the radial problem from an explicit initial profile.
pub fn radial_newton(prob: &ProblemSpec, init: &[f64], opts: &SolveOptions) -> Result<(RadialProfile, SolveReport)> {
    let d = discretization(prob, init.len())?;
    let (values, report) = solve_direct(&d, prob, init.to_vec(), opts)?;
    Ok((profile(prob, &d, values), report))
}

/// Radial residual (interior rows then the Neumann row at `r = R`).
pub fn radial_residual(prob: &ProblemSpec, values: &[f64]) -> Result<Vec<f64>> {
    let d = discretization(prob, values.len())?;
    Ok(d.assemble(values, &Equation::target(prob), false, Execution::Sequential)?.residual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprlang::parse;
    use crate::pde::problem::Structural;

    fn ball_problem(n: usize, p: usize, k: usize, l: usize, psi: &str, phi: &str, radius: f64) -> ProblemSpec {
        ProblemSpec::new(
            OperatorSignature::new(n, p, k, l).unwrap(),
            Domain::Ball {
                center: vec![0.0; n],
                radius,
            },
            parse(psi, n).unwrap(),
            parse(phi, n).unwrap(),
            Structural::with_defaults(),
        )
        .unwrap()
    }

    #[test]
    fn pascal_multiplicities() {
        for n in 2..7 {
            for p in 1..n {
                let sig = OperatorSignature::new(n, p, 1, 0).unwrap();
                let (a, b) = lambda_multiplicities(&sig).unwrap();
                assert_eq!(a + b, sig.big_n());
            }
        }
    }

    #[test]
    fn exact_quadratic_profile() {
        let prob = ball_problem(3, 2, 2, 0, &format!("{:?}", 2.0 * 3f64.sqrt()), "1.5 - (u - r^2/2)", 1.5);
        let (u, rep) = radial_solve(&prob, 33, &SolveOptions::default()).unwrap();
        assert!(rep.converged, "{rep:?}");
        assert!(u.max_abs_diff(|r| 0.5 * r * r) < 1e-10);
    }

    #[test]
    fn residual_vanishes_on_quadratic() {
        let lam = [2.0; 6];
        let want = quotient_f(&EigenTuple::new(lam.to_vec()).unwrap(), 3, 1).unwrap();
        let prob = ball_problem(4, 2, 3, 1, &format!("{want:?}"), "1 - (u - r^2/2)", 1.0);
        let vals: Vec<f64> = (0..11).map(|i| 0.5 * (i as f64 / 10.0).powi(2)).collect();
        let r = radial_residual(&prob, &vals).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-11), "{r:?}");
    }

    #[test]
    fn rejects_non_radial_data() {
        let prob = ball_problem(2, 1, 1, 0, "2 + x1^2", "0", 1.0);
        assert!(radial_solve(&prob, 9, &SolveOptions::default()).is_err());
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let prob = ball_problem(3, 1, 2, 1, "1 + 0.1*q^2 + 0.2*u", "2 - u", 1.0);
        let d = discretization(&prob, 9).unwrap();
        let vals: Vec<f64> = (0..9).map(|i| 0.7 * (i as f64 / 8.0).powi(2) + 0.1 * (i as f64 / 8.0).powi(4)).collect();
        let eq = Equation::target(&prob);
        let j = d.assemble(&vals, &eq, true, Execution::Sequential).unwrap().jacobian.unwrap();
        let eps = 1e-6;
        for c in 0..9 {
            let mut up = vals.clone();
            let mut dn = vals.clone();
            up[c] += eps;
            dn[c] -= eps;
            let ru = d.assemble(&up, &eq, false, Execution::Sequential).unwrap().residual;
            let rd = d.assemble(&dn, &eq, false, Execution::Sequential).unwrap().residual;
            for row in 0..9 {
                let fd = (ru[row] - rd[row]) / (2.0 * eps);
                let an = j.get(row, c);
                assert!((fd - an).abs() <= 1e-5 * (1.0 + an.abs()), "({row},{c}): {fd} vs {an}");
            }
        }
    }
}
