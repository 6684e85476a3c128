//! Damped Newton with an admissibility-preserving backtracking line search,
//! and the continuation (homotopy) driver built on it.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::assemble::{assemble_values, Assembly};
use super::grid::{Field, RectGrid};
use super::linsolve;
use super::problem::{Domain, Equation, Homotopy, ProblemSpec};
use super::stencil;
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::spectral::spectral_norm;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Interior tolerance; `None` means `1e-9 · max(1, ‖ψ̃‖∞)`.
    pub tol_r: Option<f64>,
    pub tol_b: f64,
    /// Minimum scaled admissibility margin accepted by the line search.
    pub margin: f64,
    pub max_iter: usize,
    /// Smallest damping factor before the line search gives up.
    pub min_step: f64,
    /// Curvature of the continuation start `u₀ = (A/2)|x - x_c|²`.
    pub a0: f64,
    pub dt0: f64,
    pub dt_min: f64,
    pub exec: Execution,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol_r: None,
            tol_b: 1e-9,
            margin: 1e-10,
            max_iter: 50,
            min_step: 2f64.powi(-20),
            a0: 1.0,
            dt0: 0.25,
            dt_min: 1e-3,
            exec: Execution::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Failure {
    LineSearchStall { iteration: usize, residual: f64 },
    AdmissibilityCollapse { iteration: usize, residual: f64 },
    MaxIterations { iterations: usize, residual: f64 },
    LinearSolver { message: String },
    Continuation { last_t: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuationStep {
    pub t: f64,
    pub newton_iterations: usize,
    pub converged: bool,
}

/// Wall-clock timings; deliberately not serialized so reports stay
/// byte-reproducible.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Timings {
    pub assembly_s: f64,
    pub linear_solve_s: f64,
    pub total_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub converged: bool,
    /// Newton iterations summed over all continuation steps.
    pub iterations: usize,
    pub residual_interior: f64,
    pub residual_boundary: f64,
    pub tol_interior: f64,
    pub tol_boundary: f64,
    /// `min` over interior nodes of `min_j σ_j(Λ)/C(N,j)`.
    pub admissibility_margin: f64,
    /// Residual ∞-norm per iteration of the final Newton run.
    pub residual_history: Vec<f64>,
    pub continuation: Vec<ContinuationStep>,
    pub sup_u: f64,
    pub sup_grad: f64,
    pub sup_hess: f64,
    pub failure: Option<Failure>,
    #[serde(skip)]
    pub timings: Timings,
}

/// A discretization the Newton driver can work with.
pub(crate) trait Discretization: Sync {
    fn assemble(&self, values: &[f64], eq: &Equation, want_jacobian: bool, exec: Execution) -> Result<Assembly>;
    fn start_values(&self, h: &Homotopy) -> Vec<f64>;
    /// `(sup|Du|, sup|D²u|)` of a solution.
    fn extrema(&self, values: &[f64], exec: Execution) -> Result<(f64, f64)>;
}

pub(crate) struct NewtonRun {
    pub values: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub history: Vec<f64>,
    pub last: Assembly,
    pub tol_r: f64,
    pub failure: Option<Failure>,
    pub timings: Timings,
}

enum Rejection {
    Admissibility,
    NoDecrease,
}

fn converged(a: &Assembly, tol_r: f64, tol_b: f64) -> bool {
    a.interior_norm <= tol_r && a.boundary_norm <= tol_b
}

pub(crate) fn newton<D: Discretization>(disc: &D, eq: &Equation, init: Vec<f64>, opts: &SolveOptions) -> Result<NewtonRun> {
    let mut timings = Timings::default();
    let clock = Instant::now();
    let mut values = init;
    let mut a = disc.assemble(&values, eq, true, opts.exec)?;
    timings.assembly_s += clock.elapsed().as_secs_f64();
    let tol_r = opts.tol_r.unwrap_or(1e-9 * a.psi_scale.max(1.0));
    let mut history = vec![a.norm()];
    let mut failure = None;
    let mut iterations = 0;

    loop {
        if converged(&a, tol_r, opts.tol_b) {
            break;
        }
        if iterations == opts.max_iter {
            failure = Some(Failure::MaxIterations {
                iterations,
                residual: a.norm(),
            });
            break;
        }
        let jac = a.jacobian.as_ref().expect("jacobian assembled");
        let rhs: Vec<f64> = a.residual.iter().map(|r| -r).collect();
        let t_lin = Instant::now();
        let step = match linsolve::solve(jac, &rhs) {
            Ok((d, _)) => d,
            Err(e) => {
                failure = Some(Failure::LinearSolver { message: e.to_string() });
                break;
            }
        };
        timings.linear_solve_s += t_lin.elapsed().as_secs_f64();

        let t_asm = Instant::now();
        let current = a.norm();
        let mut lambda = 1.0;
        let mut accepted = None;
        let mut only_admissibility = true;
        while lambda >= opts.min_step {
            let trial: Vec<f64> = values.iter().zip(&step).map(|(u, d)| u + lambda * d).collect();
            let verdict = match disc.assemble(&trial, eq, false, opts.exec) {
                Ok(t) if t.margin.scaled < opts.margin => Err(Rejection::Admissibility),
                Ok(t) if !(t.norm() < current) => Err(Rejection::NoDecrease),
                Ok(_) => Ok(trial),
                Err(Error::NotAdmissible { .. }) | Err(Error::Expr { .. }) => Err(Rejection::Admissibility),
                Err(e) => return Err(e),
            };
            match verdict {
                Ok(trial) => {
                    accepted = Some(trial);
                    break;
                }
                Err(Rejection::NoDecrease) => only_admissibility = false,
                Err(Rejection::Admissibility) => {}
            }
            lambda *= 0.5;
        }
        iterations += 1;
        let Some(next) = accepted else {
            timings.assembly_s += t_asm.elapsed().as_secs_f64();
            failure = Some(if only_admissibility {
                Failure::AdmissibilityCollapse {
                    iteration: iterations,
                    residual: current,
                }
            } else {
                Failure::LineSearchStall {
                    iteration: iterations,
                    residual: current,
                }
            });
            break;
        };
        values = next;
        a = disc.assemble(&values, eq, true, opts.exec)?;
        timings.assembly_s += t_asm.elapsed().as_secs_f64();
        history.push(a.norm());
    }
    timings.total_s = clock.elapsed().as_secs_f64();
    Ok(NewtonRun {
        converged: failure.is_none(),
        values,
        iterations,
        history,
        last: a,
        tol_r,
        failure,
        timings,
    })
}

fn add_timings(acc: &mut Timings, t: &Timings) {
    acc.assembly_s += t.assembly_s;
    acc.linear_solve_s += t.linear_solve_s;
}

fn report_from_run<D: Discretization>(
    disc: &D,
    run: &NewtonRun,
    opts: &SolveOptions,
    continuation: Vec<ContinuationStep>,
    iterations: usize,
    failure: Option<Failure>,
    mut timings: Timings,
) -> Result<SolveReport> {
    let (sup_grad, sup_hess) = disc.extrema(&run.values, opts.exec)?;
    let sup_u = run.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let converged = failure.is_none() && run.converged;
    timings.total_s = timings.total_s.max(run.timings.total_s);
    Ok(SolveReport {
        converged,
        iterations,
        residual_interior: run.last.interior_norm,
        residual_boundary: run.last.boundary_norm,
        tol_interior: run.tol_r,
        tol_boundary: opts.tol_b,
        admissibility_margin: run.last.margin.raw,
        residual_history: run.history.clone(),
        continuation,
        sup_u,
        sup_grad,
        sup_hess,
        failure,
        timings,
    })
}

pub(crate) fn solve_direct<D: Discretization>(
    disc: &D,
    prob: &ProblemSpec,
    init: Vec<f64>,
    opts: &SolveOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    let clock = Instant::now();
    let run = newton(disc, &Equation::target(prob), init, opts)?;
    let mut timings = run.timings.clone();
    timings.total_s = clock.elapsed().as_secs_f64();
    let report = report_from_run(disc, &run, opts, Vec::new(), run.iterations, run.failure.clone(), timings)?;
    Ok((run.values, report))
}

pub(crate) fn solve_continuation<D: Discretization>(
    disc: &D,
    prob: &ProblemSpec,
    opts: &SolveOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    let clock = Instant::now();
    let start = Homotopy::new(prob, opts.a0, 0.0);
    let mut values = disc.start_values(&start);
    let mut timings = Timings::default();

    // degenerate homotopy: the start already solves the target problem
    if let Ok(a) = disc.assemble(&values, &Equation::target(prob), true, opts.exec) {
        let tol_r = opts.tol_r.unwrap_or(1e-9 * a.psi_scale.max(1.0));
        if converged(&a, tol_r, opts.tol_b) {
            let run = NewtonRun {
                values: values.clone(),
                converged: true,
                iterations: 0,
                history: vec![a.norm()],
                last: a,
                tol_r,
                failure: None,
                timings: Timings::default(),
            };
            let steps = vec![ContinuationStep {
                t: 1.0,
                newton_iterations: 0,
                converged: true,
            }];
            timings.total_s = clock.elapsed().as_secs_f64();
            let report = report_from_run(disc, &run, opts, steps, 0, None, timings)?;
            return Ok((values, report));
        }
    }

    let mut t = 0.0;
    let mut dt = opts.dt0;
    let mut successes = 0;
    let mut steps = Vec::new();
    let mut total_iters = 0;
    let mut last_run: Option<NewtonRun> = None;
    let mut failure = None;

    while t < 1.0 {
        let t_try = (t + dt).min(1.0);
        let h = Homotopy::new(prob, opts.a0, t_try);
        let eq = Equation::stage(prob, &h);
        let outcome = newton(disc, &eq, values.clone(), opts);
        let (ok, iters) = match &outcome {
            Ok(run) => (run.converged, run.iterations),
            Err(_) => (false, 0),
        };
        total_iters += iters;
        steps.push(ContinuationStep {
            t: t_try,
            newton_iterations: iters,
            converged: ok,
        });
        if let Ok(run) = &outcome {
            add_timings(&mut timings, &run.timings);
        }
        if ok {
            let run = outcome.expect("checked above");
            t = t_try;
            values = run.values.clone();
            last_run = Some(run);
            successes += 1;
            if successes == 2 {
                dt *= 2.0;
                successes = 0;
            }
        } else {
            successes = 0;
            dt *= 0.5;
            if dt < opts.dt_min {
                failure = Some(Failure::Continuation { last_t: t });
                break;
            }
        }
    }

    let run = match last_run {
        Some(run) if failure.is_none() => run,
        _ => {
            // report the state at the last good t against the target problem
            let a = disc.assemble(&values, &Equation::target(prob), false, opts.exec)?;
            let tol_r = opts.tol_r.unwrap_or(1e-9 * a.psi_scale.max(1.0));
            NewtonRun {
                values: values.clone(),
                converged: false,
                iterations: 0,
                history: vec![a.norm()],
                last: a,
                tol_r,
                failure: failure.clone(),
                timings: Timings::default(),
            }
        }
    };
    timings.total_s = clock.elapsed().as_secs_f64();
    let report = report_from_run(disc, &run, opts, steps, total_iters, failure, timings)?;
    Ok((values, report))
}

// ---------------------------------------------------------------- box grids

pub(crate) struct BoxDiscretization<'a> {
    pub grid: &'a RectGrid,
}

impl<'a> BoxDiscretization<'a> {
    pub fn new(grid: &'a RectGrid, prob: &ProblemSpec) -> Result<Self> {
        match &prob.domain {
            Domain::Box { lower, upper } if lower.as_slice() == grid.lower() && upper.as_slice() == grid.upper() => {
                Ok(BoxDiscretization { grid })
            }
            Domain::Box { .. } => Err(Error::Grid("grid extents differ from the problem's box".into())),
            Domain::Ball { .. } => Err(Error::Grid(
                "ball domains are solved by the radial reduction, not on box grids".into(),
            )),
        }
    }
}

impl Discretization for BoxDiscretization<'_> {
    fn assemble(&self, values: &[f64], eq: &Equation, want_jacobian: bool, exec: Execution) -> Result<Assembly> {
        assemble_values(self.grid, values, eq, want_jacobian, exec)
    }

    fn start_values(&self, h: &Homotopy) -> Vec<f64> {
        (0..self.grid.len()).map(|i| h.start_value(&self.grid.coords(i))).collect()
    }

    fn extrema(&self, values: &[f64], exec: Execution) -> Result<(f64, f64)> {
        let per_node = par::try_map_indexed(exec, self.grid.len(), |node| -> Result<(f64, f64)> {
            let g = stencil::gradient_values(self.grid, values, node);
            let h = stencil::hessian_values(self.grid, values, node);
            Ok((g.iter().map(|v| v * v).sum::<f64>().sqrt(), spectral_norm(&h)?))
        })?;
        Ok(per_node
            .into_iter()
            .fold((0.0f64, 0.0f64), |(g, h), (a, b)| (g.max(a), h.max(b))))
    }
}

/// Damped Newton on the target problem from `init`, which must be
/// admissible at every interior node.
pub fn newton_solve(prob: &ProblemSpec, init: &Field, opts: &SolveOptions) -> Result<(Field, SolveReport)> {
    let disc = BoxDiscretization::new(&init.grid, prob)?;
    let (values, report) = solve_direct(&disc, prob, init.values.clone(), opts)?;
    Ok((
        Field {
            grid: Arc::clone(&init.grid),
            values,
        },
        report,
    ))
}

/// Continuation from `u₀ = (A/2)|x - x_c|²` to the target problem on `grid`.
pub fn continuation_solve(prob: &ProblemSpec, grid: Arc<RectGrid>, opts: &SolveOptions) -> Result<(Field, SolveReport)> {
    let disc = BoxDiscretization::new(&grid, prob)?;
    let (values, report) = solve_continuation(&disc, prob, opts)?;
    Ok((Field { grid, values }, report))
}
