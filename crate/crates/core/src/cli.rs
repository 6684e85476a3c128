//! Batch front end.
//!
//! ```text
//! hessquot <solve|verify|sweep> <config> [--out DIR] [--seed N] [--quiet]
//! ```
//!
//! Config files are line based, `section.key = value`, with `#` comments
//! and expressions in double quotes.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, ValueEnum};
use serde::Serialize;

use crate::compound::OperatorSignature;
use crate::error::{Error, Result};
use crate::estimates::{
    check_growth, check_structural, ratio_study, verify_radial, verify_solution, BoundReport, GrowthReport,
    RatioStudy, Sampling, StructuralReport,
};
use crate::exprlang::parse;
use crate::par::Execution;
use crate::pde::grid::{field_to_csv, RectGrid};
use crate::pde::problem::{Domain, ProblemSpec, Structural};
use crate::pde::radial::radial_solve;
use crate::pde::solver::{continuation_solve, SolveOptions, SolveReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Continuation solve, then bound checks on the solution.
    Solve,
    /// Structural and growth checks of the problem data only.
    Verify,
    /// Solve on each grid of `sweep.sizes` and report the ratio study.
    Sweep,
}

#[derive(Debug, Parser)]
#[command(name = "hessquot", version, about = "Neumann problems for Hessian quotient equations")]
pub struct Args {
    pub command: Command,
    pub config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for the quasi-random verification samples.
    #[arg(long, default_value_t = 0x5eed)]
    pub seed: u64,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Discretization {
    /// Nodes per axis of a box grid.
    Box(Vec<usize>),
    /// Node count of the radial grid on `[0, R]`.
    Radial(usize),
}

#[derive(Clone, Debug)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub emit_field: bool,
    pub emit_report: bool,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub discretization: Discretization,
    pub solver: SolveOptions,
    pub sweep_sizes: Vec<usize>,
    pub output: OutputConfig,
}

const KEYS: &[&str] = &[
    "problem.n",
    "problem.p",
    "problem.k",
    "problem.l",
    "problem.domain",
    "problem.lower",
    "problem.upper",
    "problem.center",
    "problem.radius",
    "problem.psi",
    "problem.psi_tilde",
    "problem.phi",
    "structural.c0",
    "structural.alpha0",
    "structural.gamma",
    "structural.C1",
    "structural.M1",
    "structural.U",
    "structural.P",
    "structural.P_max",
    "solver.nodes",
    "solver.dims",
    "solver.tol_r",
    "solver.tol_b",
    "solver.margin",
    "solver.min_step",
    "solver.A0",
    "solver.dt0",
    "solver.dt_min",
    "solver.max_iter",
    "solver.execution",
    "sweep.sizes",
    "output.dir",
    "output.emit_field",
    "output.emit_report",
];

fn config_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("line {line}: {msg}"))
}

/// Strips a trailing `#` comment that is not inside quotes.
fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

fn unquote(v: &str, line: usize) -> Result<String> {
    let v = v.trim();
    if let Some(rest) = v.strip_prefix('"') {
        return rest
            .strip_suffix('"')
            .map(str::to_string)
            .ok_or_else(|| config_err(line, "unterminated string"));
    }
    Ok(v.to_string())
}

struct Entries(BTreeMap<String, (usize, String)>);

impl Entries {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = strip_comment(raw).trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| config_err(line, format!("expected `section.key = value`, got `{body}`")))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(config_err(line, format!("unknown key `{key}`")));
            }
            let value = unquote(value, line)?;
            if map.insert(key.to_string(), (line, value)).is_some() {
                return Err(config_err(line, format!("duplicate key `{key}`")));
            }
        }
        Ok(Entries(map))
    }

    fn raw(&self, key: &str) -> Option<&(usize, String)> {
        self.0.get(key)
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => v
                .trim()
                .parse()
                .map(Some)
                .map_err(|e| config_err(*line, format!("{key}: {e}"))),
        }
    }

    fn require<T: std::str::FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)?.ok_or_else(|| Error::Config(format!("missing key `{key}`")))
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => v
                .split(',')
                .map(|s| s.trim().parse().map_err(|e| config_err(*line, format!("{key}: {e}"))))
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    fn expr(&self, key: &str, n: usize) -> Result<Option<crate::exprlang::ExprAst>> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => parse(v, n).map(Some).map_err(|e| config_err(*line, format!("{key}: {e}"))),
        }
    }
}

fn as_config(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let e = Entries::parse(text)?;
    let n: usize = e.require("problem.n")?;
    let sig = OperatorSignature::new(n, e.require("problem.p")?, e.require("problem.k")?, e.require("problem.l")?)
        .map_err(as_config)?;

    let kind: String = e.require("problem.domain")?;
    let domain = match kind.as_str() {
        "box" => Domain::Box {
            lower: e.list("problem.lower")?.ok_or_else(|| Error::Config("missing key `problem.lower`".into()))?,
            upper: e.list("problem.upper")?.ok_or_else(|| Error::Config("missing key `problem.upper`".into()))?,
        },
        "ball" => Domain::Ball {
            center: e.list("problem.center")?.unwrap_or_else(|| vec![0.0; n]),
            radius: e.require("problem.radius")?,
        },
        other => return Err(Error::Config(format!("problem.domain must be `box` or `ball`, got `{other}`"))),
    };

    let psi_tilde = match (e.expr("problem.psi_tilde", n)?, e.expr("problem.psi", n)?) {
        (Some(t), None) => t,
        (None, Some(psi)) => psi.powf(1.0 / (sig.k - sig.l) as f64),
        (Some(_), Some(_)) => return Err(Error::Config("give either problem.psi or problem.psi_tilde, not both".into())),
        (None, None) => return Err(Error::Config("missing key `problem.psi_tilde` (or `problem.psi`)".into())),
    };
    let phi = e
        .expr("problem.phi", n)?
        .ok_or_else(|| Error::Config("missing key `problem.phi`".into()))?;

    let defaults = Structural::with_defaults();
    let structural = Structural {
        c0: e.get("structural.c0")?,
        alpha0: e.get("structural.alpha0")?,
        gamma: e.get("structural.gamma")?,
        c1: e.get("structural.C1")?,
        m1: e.get("structural.M1")?,
        u_range: e.get("structural.U")?.unwrap_or(defaults.u_range),
        p_range: e.get("structural.P")?.unwrap_or(defaults.p_range),
        p_max: e.get("structural.P_max")?.unwrap_or(defaults.p_max),
    };

    let d = SolveOptions::default();
    let execution = match e.get::<String>("solver.execution")?.as_deref() {
        None | Some("parallel") => Execution::Parallel,
        Some("sequential") => Execution::Sequential,
        Some(other) => {
            return Err(Error::Config(format!(
                "solver.execution must be `parallel` or `sequential`, got `{other}`"
            )))
        }
    };
    let solver = SolveOptions {
        tol_r: e.get("solver.tol_r")?,
        tol_b: e.get("solver.tol_b")?.unwrap_or(d.tol_b),
        margin: e.get("solver.margin")?.unwrap_or(d.margin),
        max_iter: e.get("solver.max_iter")?.unwrap_or(d.max_iter),
        min_step: e.get("solver.min_step")?.unwrap_or(d.min_step),
        a0: e.get("solver.A0")?.unwrap_or(d.a0),
        dt0: e.get("solver.dt0")?.unwrap_or(d.dt0),
        dt_min: e.get("solver.dt_min")?.unwrap_or(d.dt_min),
        exec: execution,
    };

    let nodes: Option<usize> = e.get("solver.nodes")?;
    let discretization = match &domain {
        Domain::Box { .. } => {
            let dims = match (e.list::<usize>("solver.dims")?, nodes) {
                (Some(d), _) if d.len() == n => d,
                (Some(d), _) if d.len() == 1 => vec![d[0]; n],
                (Some(d), _) => return Err(Error::Config(format!("solver.dims has {} entries for n = {n}", d.len()))),
                (None, Some(m)) => vec![m; n],
                (None, None) => return Err(Error::Config("missing key `solver.nodes` (or `solver.dims`)".into())),
            };
            Discretization::Box(dims)
        }
        Domain::Ball { .. } => {
            if e.raw("solver.dims").is_some() {
                return Err(Error::Config("ball domains take `solver.nodes` (radial node count)".into()));
            }
            Discretization::Radial(nodes.ok_or_else(|| Error::Config("missing key `solver.nodes`".into()))?)
        }
    };

    let output = OutputConfig {
        dir: e.get::<String>("output.dir")?.map_or_else(|| PathBuf::from("out"), PathBuf::from),
        emit_field: e.get("output.emit_field")?.unwrap_or(true),
        emit_report: e.get("output.emit_report")?.unwrap_or(true),
    };

    let problem = ProblemSpec::new(sig, domain, psi_tilde, phi, structural).map_err(as_config)?;
    Ok(RunConfig {
        problem,
        discretization,
        solver,
        sweep_sizes: e.list("sweep.sizes")?.unwrap_or_default(),
        output,
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

#[derive(Clone, Debug, Serialize)]
pub struct ProblemSummary {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub l: usize,
    pub domain: Domain,
    pub psi_tilde: String,
    pub phi: String,
    pub gradient_regime: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRun {
    pub nodes: usize,
    pub solve: SolveReport,
    pub bounds: Option<BoundReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub runs: Vec<SweepRun>,
    pub study: RatioStudy,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub schema: u32,
    pub command: Command,
    pub seed: u64,
    pub problem: ProblemSummary,
    pub solve: Option<SolveReport>,
    pub structural: Option<StructuralReport>,
    pub growth: Option<GrowthReport>,
    pub bounds: Option<BoundReport>,
    pub sweep: Option<SweepReport>,
}

struct Solved {
    report: SolveReport,
    bounds: Option<BoundReport>,
    csv: String,
}

fn solve_once(cfg: &RunConfig, disc: &Discretization) -> Result<Solved> {
    let prob = &cfg.problem;
    match disc {
        Discretization::Box(dims) => {
            let Domain::Box { lower, upper } = &prob.domain else {
                unreachable!("box discretization on a box domain")
            };
            let grid = Arc::new(RectGrid::new(lower.clone(), upper.clone(), dims.clone())?);
            let (u, report) = continuation_solve(prob, grid, &cfg.solver)?;
            let bounds = report.converged.then(|| verify_solution(prob, &u, &report)).transpose()?;
            Ok(Solved {
                report,
                bounds,
                csv: field_to_csv(&u),
            })
        }
        Discretization::Radial(m) => {
            let (u, report) = radial_solve(prob, *m, &cfg.solver)?;
            let bounds = report.converged.then(|| verify_radial(prob, &u, &report)).transpose()?;
            Ok(Solved {
                report,
                bounds,
                csv: u.to_csv(),
            })
        }
    }
}

fn with_size(disc: &Discretization, m: usize) -> Discretization {
    match disc {
        Discretization::Box(d) => Discretization::Box(vec![m; d.len()]),
        Discretization::Radial(_) => Discretization::Radial(m),
    }
}

fn summary(prob: &ProblemSpec) -> ProblemSummary {
    ProblemSummary {
        n: prob.sig.n,
        p: prob.sig.p,
        k: prob.sig.k,
        l: prob.sig.l,
        domain: prob.domain.clone(),
        psi_tilde: prob.psi_tilde.to_string(),
        phi: prob.phi.to_string(),
        gradient_regime: prob.sig.gradient_regime(),
    }
}

fn log(quiet: bool, msg: impl AsRef<str>) {
    if !quiet {
        eprintln!("{}", msg.as_ref());
    }
}

fn log_solve(quiet: bool, label: &str, r: &SolveReport) {
    log(
        quiet,
        format!(
            "{label}: converged={} iterations={} steps={} residual={:.3e}/{:.3e} time={:.2}s (assembly {:.2}s, linear {:.2}s)",
            r.converged,
            r.iterations,
            r.continuation.len(),
            r.residual_interior,
            r.residual_boundary,
            r.timings.total_s,
            r.timings.assembly_s,
            r.timings.linear_solve_s
        ),
    );
}

/// Runs one command; returns the report and the exit status.
pub fn execute(args: &Args, cfg: &RunConfig) -> Result<(RunReport, Option<String>, i32)> {
    let prob = &cfg.problem;
    let mut report = RunReport {
        schema: REPORT_SCHEMA,
        command: args.command,
        seed: args.seed,
        problem: summary(prob),
        solve: None,
        structural: None,
        growth: None,
        bounds: None,
        sweep: None,
    };
    let mut csv = None;
    let mut status = EXIT_OK;
    match args.command {
        Command::Verify => {
            report.structural = Some(check_structural(
                prob,
                Sampling {
                    seed: args.seed,
                    ..Default::default()
                },
            )?);
            let st = &prob.structural;
            if st.gamma.is_some() && st.c1.is_some() && st.m1.is_some() {
                report.growth = Some(check_growth(prob, args.seed)?);
            }
        }
        Command::Solve => {
            let s = solve_once(cfg, &cfg.discretization)?;
            log_solve(args.quiet, "solve", &s.report);
            if !s.report.converged {
                status = EXIT_SOLVER;
            }
            report.solve = Some(s.report);
            report.bounds = s.bounds;
            csv = Some(s.csv);
        }
        Command::Sweep => {
            if cfg.sweep_sizes.is_empty() {
                return Err(Error::Config("sweep needs `sweep.sizes`".into()));
            }
            let mut runs = Vec::new();
            for &m in &cfg.sweep_sizes {
                let s = solve_once(cfg, &with_size(&cfg.discretization, m))?;
                log_solve(args.quiet, &format!("sweep m={m}"), &s.report);
                if !s.report.converged {
                    status = EXIT_SOLVER;
                }
                runs.push(SweepRun {
                    nodes: m,
                    solve: s.report,
                    bounds: s.bounds,
                });
                csv = Some(s.csv);
            }
            let bounds: Vec<BoundReport> = runs.iter().filter_map(|r| r.bounds.clone()).collect();
            report.sweep = Some(SweepReport {
                study: ratio_study(&bounds),
                runs,
            });
        }
    }
    Ok((report, csv, status))
}

fn write_outputs(dir: &Path, out: &OutputConfig, report: &RunReport, csv: Option<&str>) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    if out.emit_report {
        let mut json = serde_json::to_string_pretty(report).map_err(|e| Error::InvalidInput(e.to_string()))?;
        json.push('\n');
        std::fs::write(dir.join("report.json"), json)?;
    }
    if let (true, Some(csv)) = (out.emit_field, csv) {
        std::fs::write(dir.join("field.csv"), csv)?;
    }
    Ok(())
}

/// Parses `argv`, runs, and returns the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match load_config(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let (report, csv, status) = match execute(&args, &cfg) {
        Ok(r) => r,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_SOLVER;
        }
    };
    let dir = args.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    if let Err(e) = write_outputs(&dir, &cfg.output, &report, csv.as_deref()) {
        eprintln!("error: writing outputs to {}: {e}", dir.display());
        return EXIT_CONFIG;
    }
    log(args.quiet, format!("wrote {}", dir.display()));
    status
}
