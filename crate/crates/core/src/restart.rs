//! Restart schemes wrapping the basic method: one for weakly-quasi-convex
//! objectives with known optimal value, one for strongly convex objectives.

use log::info;
use thiserror::Error;

use crate::oracle::Objective;
use crate::prox::ProxSetup;
use crate::solver::{IterationRecord, SolveError, SolveReport, SolveStatus, Solver, SolverConfig, StepEvent, Variant};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RestartError {
    #[error("the restart test needs the optimal value f*")]
    UnknownOptimum,
    #[error("invalid restart parameters: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestartReport {
    /// Inner iterations of each epoch.
    pub restart_iters: Vec<usize>,
    pub total_iters: usize,
    /// One report per epoch; an epoch cut by the restart test reports `GapReached`.
    pub inner_reports: Vec<SolveReport>,
    pub x_final: Vec<f64>,
    pub f_final: f64,
    pub status: SolveStatus,
}

impl RestartReport {
    pub fn epochs(&self) -> usize {
        self.inner_reports.len()
    }

    /// Entry point of every epoch followed by the final point.
    pub fn epoch_points<'a>(&'a self, x0: &'a [f64]) -> Vec<&'a [f64]> {
        let mut pts = vec![x0];
        pts.extend(self.inner_reports.iter().map(|r| r.x_final.as_slice()));
        pts
    }
}

enum EpochEnd {
    Restart,
    Done(SolveStatus),
}

/// Runs one epoch from `x_start` until `restart` fires, `finished` fires, the
/// inner method stops, or `budget` iterations pass.
fn run_epoch<O, P>(
    oracle: &O,
    prox: &P,
    config: &SolverConfig,
    x_start: &[f64],
    budget: usize,
    restart: impl Fn(&IterationRecord) -> bool,
    finished: impl Fn(&IterationRecord) -> bool,
) -> Result<(SolveReport, EpochEnd), SolveError>
where
    O: Objective + ?Sized,
    P: ProxSetup + ?Sized,
{
    let mut inner_cfg = config.clone();
    inner_cfg.max_iter = budget.max(1);
    let mut solver = Solver::new(oracle, prox, inner_cfg, x_start)?;
    let mut trace = Vec::new();
    let end = loop {
        if solver.iteration() >= budget {
            break EpochEnd::Done(SolveStatus::MaxIter);
        }
        match solver.step()? {
            StepEvent::Stopped(s) => break EpochEnd::Done(s),
            StepEvent::Advanced(info) => {
                let rec = info.record;
                let done = finished(&rec);
                let again = restart(&rec);
                let stop = solver.stop_rule(&rec);
                trace.push(rec);
                if done {
                    break EpochEnd::Done(SolveStatus::GapReached);
                }
                if let Some(s) = stop {
                    break EpochEnd::Done(s);
                }
                if again {
                    break EpochEnd::Restart;
                }
            }
        }
    };
    let status = match end {
        EpochEnd::Restart => SolveStatus::GapReached,
        EpochEnd::Done(s) => s,
    };
    Ok((solver.into_report(status, trace), end))
}

fn check_inner(config: &SolverConfig) -> Result<(), RestartError> {
    config.validate()?;
    if config.variant.mu() > 0.0 {
        return Err(RestartError::InvalidConfig(
            "restart epochs use a non-strongly-convex inner variant".into(),
        ));
    }
    Ok(())
}

fn drive<O>(
    oracle: &O,
    config: &SolverConfig,
    x0: &[f64],
    initially_done: bool,
    mut epoch: impl FnMut(&[f64], f64, usize) -> Result<(SolveReport, EpochEnd), SolveError>,
) -> Result<RestartReport, RestartError>
where
    O: Objective + ?Sized,
{
    let mut x = x0.to_vec();
    let mut f = oracle.value(x0);
    let mut reports = Vec::new();
    let mut iters = Vec::new();
    let mut total = 0;
    let status = if initially_done {
        SolveStatus::GapReached
    } else {
        loop {
            if total >= config.max_iter {
                break SolveStatus::MaxIter;
            }
            let (rep, end) = epoch(&x, f, config.max_iter - total)?;
            total += rep.iterations();
            iters.push(rep.iterations());
            x.clone_from(&rep.x_final);
            f = rep.f_final;
            reports.push(rep);
            info!(
                "epoch {} ended after {} iterations, f = {:e}",
                reports.len(),
                iters[iters.len() - 1],
                f
            );
            if let EpochEnd::Done(s) = end {
                break s;
            }
        }
    };
    Ok(RestartReport {
        restart_iters: iters,
        total_iters: total,
        inner_reports: reports,
        x_final: x,
        f_final: f,
        status,
    })
}

/// Restarts whenever `f(x) - f* <= (1 - gamma/2)(f(x_epoch) - f*)` and stops
/// once `f(x) - f* <= target_eps`. `config.max_iter` caps the total count.
pub fn solve_wqc<O, P>(
    oracle: &O,
    prox: &P,
    gamma: f64,
    f_star: Option<f64>,
    target_eps: f64,
    config: &SolverConfig,
    x0: &[f64],
) -> Result<RestartReport, RestartError>
where
    O: Objective + ?Sized,
    P: ProxSetup + ?Sized,
{
    let f_star = f_star.ok_or(RestartError::UnknownOptimum)?;
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(RestartError::InvalidConfig("gamma must lie in (0, 1]".into()));
    }
    if !(target_eps > 0.0) {
        return Err(RestartError::InvalidConfig("target accuracy must be positive".into()));
    }
    check_inner(config)?;
    let f0 = oracle.value(x0);
    let factor = 1.0 - 0.5 * gamma;
    drive(oracle, config, x0, f0 - f_star <= target_eps, |x, f_entry, budget| {
        let threshold = factor * (f_entry - f_star);
        run_epoch(
            oracle,
            prox,
            config,
            x,
            budget,
            |r| r.f_x - f_star <= threshold,
            |r| r.f_x - f_star <= target_eps,
        )
    })
}

/// Restarts each epoch as soon as `A_k >= 2 / mu`. Stops on the inner
/// stopping rules or when `config.max_iter` total iterations are spent.
pub fn solve_sc_restart<O, P>(
    oracle: &O,
    prox: &P,
    mu: f64,
    config: &SolverConfig,
    x0: &[f64],
) -> Result<RestartReport, RestartError>
where
    O: Objective + ?Sized,
    P: ProxSetup + ?Sized,
{
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(RestartError::InvalidConfig("mu must be positive".into()));
    }
    check_inner(config)?;
    let a_target = 2.0 / mu;
    drive(oracle, config, x0, false, |x, _, budget| {
        run_epoch(oracle, prox, config, x, budget, |r| r.a_sum >= a_target, |_| false)
    })
}

/// Inner configuration used by the command line for restarted runs.
pub fn default_inner(lipschitz: Option<f64>) -> Variant {
    match lipschitz {
        Some(l) => Variant::SmoothKnownL { lipschitz: l },
        None => Variant::SmoothLineSearch,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{quadratic, quadratic_conditioned};
    use crate::prox::Euclidean;

    #[test]
    fn wqc_requires_optimum() {
        let p = quadratic(vec![1.0, 2.0], vec![1.0, 1.0]);
        let cfg = SolverConfig::new(Variant::SmoothLineSearch);
        assert_eq!(
            solve_wqc(&p, &Euclidean, 1.0, None, 1e-6, &cfg, &p.x0),
            Err(RestartError::UnknownOptimum)
        );
    }

    #[test]
    fn wqc_already_optimal_needs_no_epochs() {
        let p = quadratic(vec![1.0, 2.0], vec![1.0, 1.0]);
        let cfg = SolverConfig::new(Variant::SmoothLineSearch);
        let rep = solve_wqc(&p, &Euclidean, 1.0, Some(0.0), 1e-6, &cfg, &[1.0, 1.0]).unwrap();
        assert_eq!(rep.epochs(), 0);
        assert_eq!(rep.total_iters, 0);
    }

    #[test]
    fn wqc_epochs_halve_the_gap() {
        let p = quadratic_conditioned(20, 1.0, 50.0);
        let cfg = SolverConfig::new(Variant::SmoothLineSearch).with_max_iter(2000);
        let rep = solve_wqc(&p, &Euclidean, 1.0, Some(0.0), 1e-8, &cfg, &p.x0).unwrap();
        assert_eq!(rep.status, SolveStatus::GapReached);
        assert!(rep.f_final <= 1e-8);
        assert_eq!(rep.total_iters, rep.restart_iters.iter().sum::<usize>());
        let mut f_entry = p.value(&p.x0);
        for r in &rep.inner_reports[..rep.epochs() - 1] {
            assert!(r.f_final <= 0.5 * f_entry);
            assert!(r.f_final < f_entry);
            f_entry = r.f_final;
        }
    }

    #[test]
    fn sc_restart_epoch_length_well_conditioned() {
        // mu = L: every epoch ends within ceil(sqrt(8)) = 3 iterations
        let mut p = quadratic(vec![4.0; 6], vec![0.0; 6]);
        p.x0 = vec![1.0, -2.0, 3.0, 0.5, 1.0, 1.0];
        let cfg = SolverConfig::new(Variant::SmoothLineSearch).with_max_iter(30);
        let rep = solve_sc_restart(&p, &Euclidean, 4.0, &cfg, &p.x0.clone()).unwrap();
        assert!(rep.restart_iters.iter().all(|&n| n <= 3));
    }

    #[test]
    fn sc_restart_rejects_strongly_convex_inner() {
        let p = quadratic(vec![1.0], vec![0.0]);
        let cfg = SolverConfig::new(Variant::StronglyConvex {
            mu: 1.0,
            step: crate::solver::StepRule::LineSearch,
        });
        assert!(matches!(
            solve_sc_restart(&p, &Euclidean, 1.0, &cfg, &[1.0]),
            Err(RestartError::InvalidConfig(_))
        ));
    }
}
