//! Benchmark harness behind the `agmsdr` binary: resolves problem and method
//! names, runs them, and writes CSV traces.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use serde::Deserialize;
use thiserror::Error;

use crate::primal_dual::{make_entropy_dual, make_quadratic_dual, pd_solve, DenseMatrix, PdConfig, PdError, PdReport};
use crate::problems::{
    chained_nonconvex, maxq, nesterov_worst, quadratic_conditioned, quadratic_linear_spectrum, random_quadratic,
    NamedProblem,
};
use crate::prox::Euclidean;
use crate::restart::{default_inner, solve_sc_restart, solve_wqc, RestartError, RestartReport};
use crate::solver::{solve, IterationRecord, SolveError, SolveStatus, SolverConfig, StepRule, Variant};

pub const RUN_HEADER: &str = "iter,f,f_y,grad_norm,A,a,beta,h,psi_min,gap_bound,oracle_calls,time_s";
pub const PD_HEADER: &str = "iter,f_xhat,phi_eta,gap,feas,A";

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Restart(#[from] RestartError),
    #[error(transparent)]
    Pd(#[from] PdError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl BenchError {
    /// Process exit code: 2 for usage and input errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Usage(_) => 2,
            _ => 1,
        }
    }
}

fn usage<T>(msg: impl Into<String>) -> Result<T, BenchError> {
    Err(BenchError::Usage(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Nesterov,
    MaxQ,
    Chained,
    Quadratic,
    RandomQuadratic,
}

impl FromStr for ProblemKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "nesterov" => ProblemKind::Nesterov,
            "maxq" => ProblemKind::MaxQ,
            "chained" => ProblemKind::Chained,
            "quadratic" => ProblemKind::Quadratic,
            "random-quadratic" => ProblemKind::RandomQuadratic,
            _ => return Err(format!("unknown problem '{s}'")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    AgmsdrA,
    AgmsdrLs,
    AgmsdrSc,
    AgmsdrScRestart,
    WqcRestart,
    Universal,
    UniversalSc,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::AgmsdrA,
        Method::AgmsdrLs,
        Method::AgmsdrSc,
        Method::AgmsdrScRestart,
        Method::WqcRestart,
        Method::Universal,
        Method::UniversalSc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::AgmsdrA => "agmsdr-a",
            Method::AgmsdrLs => "agmsdr-ls",
            Method::AgmsdrSc => "agmsdr-sc",
            Method::AgmsdrScRestart => "agmsdr-sc-restart",
            Method::WqcRestart => "wqc-restart",
            Method::Universal => "universal",
            Method::UniversalSc => "universal-sc",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub n: usize,
    pub l: Option<f64>,
    pub mu: Option<f64>,
    pub seed: u64,
}

impl ProblemSpec {
    pub fn build(&self) -> Result<NamedProblem, BenchError> {
        let n = self.n;
        if n < 2 {
            return usage("--n must be at least 2");
        }
        let positive = |v: f64, flag: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                usage(format!("{flag} must be positive"))
            }
        };
        Ok(match self.kind {
            ProblemKind::Nesterov => nesterov_worst(n, positive(self.l.unwrap_or(1.0), "--L")?),
            ProblemKind::MaxQ => {
                if !n.is_multiple_of(2) {
                    return usage("maxq needs an even --n");
                }
                maxq(n)
            }
            ProblemKind::Chained => chained_nonconvex(n),
            ProblemKind::Quadratic => match (self.mu, self.l) {
                (None, None) => quadratic_linear_spectrum(n),
                (mu, l) => {
                    let mu = positive(mu.unwrap_or(1.0), "--mu")?;
                    let l = positive(l.unwrap_or(n as f64), "--L")?;
                    if l < mu {
                        return usage("--L must not be below --mu");
                    }
                    quadratic_conditioned(n, mu, l)
                }
            },
            ProblemKind::RandomQuadratic => {
                let mu = positive(self.mu.unwrap_or(1.0), "--mu")?;
                let l = positive(self.l.unwrap_or(100.0), "--L")?;
                if l < mu {
                    return usage("--L must not be below --mu");
                }
                random_quadratic(n, mu, l, self.seed)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub problem: ProblemSpec,
    pub method: Method,
    pub eps: Option<f64>,
    pub gamma: f64,
    /// Radius for the gap bound; defaults to `||x0 - x*||` when `x*` is known.
    pub radius: Option<f64>,
    pub max_iter: usize,
    pub grad_tol: Option<f64>,
}

impl RunSpec {
    pub fn new(problem: ProblemSpec, method: Method) -> Self {
        Self {
            problem,
            method,
            eps: None,
            gamma: 1.0,
            radius: None,
            max_iter: 1000,
            grad_tol: None,
        }
    }
}

/// Iteration records of a run, with restart epochs concatenated so that
/// `k`, `oracle_calls` and `wall_time` keep counting across epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub problem: String,
    pub method: Method,
    pub rows: Vec<IterationRecord>,
    pub status: SolveStatus,
    pub f_final: f64,
}

fn concat_epochs(rep: &RestartReport) -> Vec<IterationRecord> {
    let mut rows = Vec::with_capacity(rep.total_iters);
    let (mut k0, mut calls0, mut t0) = (0, 0, 0.0);
    for epoch in &rep.inner_reports {
        for r in &epoch.trace {
            let mut r = r.clone();
            r.k += k0;
            r.oracle_calls += calls0;
            r.wall_time += t0;
            rows.push(r);
        }
        k0 += epoch.iterations();
        calls0 += epoch.oracle_calls;
        t0 = rows.last().map_or(t0, |r| r.wall_time);
    }
    rows
}

/// Runs one spec on a freshly built problem.
pub fn run_spec(spec: &RunSpec) -> Result<RunTrace, BenchError> {
    let p = spec.problem.build()?;
    if spec.max_iter == 0 {
        return usage("--max-iter must be positive");
    }
    let l = spec.problem.l.or(p.lipschitz);
    let mu = spec.problem.mu.or(p.mu);
    let need_eps = || match spec.eps {
        Some(e) if e > 0.0 && e.is_finite() => Ok(e),
        Some(_) => usage("--eps must be positive"),
        None => usage(format!("{} needs --eps", spec.method)),
    };
    let need_mu = || match mu {
        Some(m) if m > 0.0 && m.is_finite() => Ok(m),
        _ => usage(format!("{} needs a positive --mu", spec.method)),
    };
    let variant = match spec.method {
        Method::AgmsdrA => match l {
            Some(l) => Variant::SmoothKnownL { lipschitz: l },
            None => return usage("agmsdr-a needs --L"),
        },
        Method::AgmsdrLs => Variant::SmoothLineSearch,
        Method::AgmsdrSc => Variant::StronglyConvex {
            mu: need_mu()?,
            step: StepRule::LineSearch,
        },
        Method::AgmsdrScRestart | Method::WqcRestart => default_inner(l),
        Method::Universal => Variant::Universal { eps: need_eps()? },
        Method::UniversalSc => Variant::UniversalSC {
            mu: need_mu()?,
            eps: need_eps()?,
        },
    };
    let mut cfg = SolverConfig::new(variant).with_max_iter(spec.max_iter);
    if let Some(r) = spec.radius.or_else(|| p.radius()) {
        cfg = cfg.with_radius(r);
    }
    if let Some(t) = spec.grad_tol {
        cfg = cfg.with_grad_tol(t);
    }
    cfg.validate().map_err(|e| BenchError::Usage(e.to_string()))?;

    let (rows, status, f_final) = match spec.method {
        Method::AgmsdrScRestart => {
            let rep = solve_sc_restart(&p, &Euclidean, need_mu()?, &cfg, &p.x0)?;
            (concat_epochs(&rep), rep.status, rep.f_final)
        }
        Method::WqcRestart => {
            let eps = need_eps()?;
            if p.f_star.is_none() {
                return usage("wqc-restart needs a problem with known optimal value");
            }
            let rep = solve_wqc(&p, &Euclidean, spec.gamma, p.f_star, eps, &cfg, &p.x0).map_err(|e| match e {
                RestartError::InvalidConfig(m) => BenchError::Usage(m),
                other => other.into(),
            })?;
            (concat_epochs(&rep), rep.status, rep.f_final)
        }
        _ => {
            let rep = solve(&p, &Euclidean, &cfg, &p.x0)?;
            (rep.trace, rep.status, rep.f_final)
        }
    };
    Ok(RunTrace {
        problem: format!("{}({})", p.name, p.params),
        method: spec.method,
        rows,
        status,
        f_final,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:e}"))
}

fn row_cells(r: &IterationRecord, wall_time: bool) -> String {
    format!(
        "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{},{}",
        r.k,
        r.f_x,
        r.f_y,
        r.grad_dual_norm_y,
        r.a_sum,
        r.a,
        r.beta,
        r.h,
        r.psi_min,
        opt(r.gap_bound),
        r.oracle_calls,
        opt(wall_time.then_some(r.wall_time)),
    )
}

/// Writes a run trace; `time_s` stays empty unless `wall_time` is set.
pub fn write_run_csv<W: Write>(out: &mut W, rows: &[IterationRecord], wall_time: bool) -> io::Result<()> {
    writeln!(out, "{RUN_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", row_cells(r, wall_time))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Align {
    Iterations,
    OracleCalls,
    Time,
}

impl FromStr for Align {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "iterations" => Align::Iterations,
            "oracle_calls" | "oracle-calls" => Align::OracleCalls,
            "time" => Align::Time,
            _ => return Err(format!("unknown alignment '{s}'")),
        })
    }
}

/// Runs every spec on the same problem.
pub fn compare(specs: &[RunSpec]) -> Result<Vec<RunTrace>, BenchError> {
    if specs.len() < 2 {
        return usage("compare needs at least two methods");
    }
    if specs.iter().any(|s| s.problem != specs[0].problem) {
        return usage("compare needs every run on the same problem");
    }
    specs.iter().map(run_spec).collect()
}

/// Long-format CSV: `method,x` followed by the run columns, where `x` is the
/// alignment coordinate.
pub fn write_compare_csv<W: Write>(out: &mut W, runs: &[RunTrace], align: Align, wall_time: bool) -> io::Result<()> {
    writeln!(out, "method,x,{RUN_HEADER}")?;
    for run in runs {
        for r in &run.rows {
            let x = match align {
                Align::Iterations => r.k.to_string(),
                Align::OracleCalls => r.oracle_calls.to_string(),
                Align::Time => format!("{:e}", r.wall_time),
            };
            let show_time = wall_time || align == Align::Time;
            writeln!(out, "{},{},{}", run.method, x, row_cells(r, show_time))?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ConstraintFile {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub kind: String,
}

impl ConstraintFile {
    pub fn parse(text: &str) -> Result<Self, BenchError> {
        serde_json::from_str(text).map_err(|e| BenchError::Usage(format!("constraint file: {e}")))
    }
}

/// Solves the constrained problem of a constraint file through its dual.
pub fn run_pd(file: &ConstraintFile, cfg: &PdConfig) -> Result<PdReport, BenchError> {
    let invalid = |e: PdError| match e {
        PdError::InvalidData(m) => BenchError::Usage(format!("constraint file: {m}")),
        other => other.into(),
    };
    let a = DenseMatrix::from_rows(&file.a).map_err(invalid)?;
    let problem = match file.kind.as_str() {
        "quadratic" => make_quadratic_dual(a, file.b.clone()),
        "entropy" => make_entropy_dual(a, file.b.clone()),
        k => return usage(format!("constraint file: unknown kind '{k}'")),
    }
    .map_err(invalid)?;
    Ok(pd_solve(&problem, cfg)?)
}

pub fn write_pd_csv<W: Write>(out: &mut W, rep: &PdReport) -> io::Result<()> {
    writeln!(out, "{PD_HEADER}")?;
    for r in &rep.trace {
        writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{:e}",
            r.k, r.f_xhat, r.phi_eta, r.gap, r.feas, r.a_sum
        )?;
    }
    Ok(())
}
