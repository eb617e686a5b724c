//! The AGMsDR iteration: a segment search couples `x_k` and `v_k`, a gradient
//! step from the coupled point produces `x_{k+1}`, and the estimating sequence
//! absorbs the linearization at the coupled point.

use std::time::Instant;

use log::{debug, info};
use thiserror::Error;

use crate::estimate::{
    solve_coef_sc_known_l, solve_coef_smooth_known_l, solve_coef_smooth_linesearch, solve_coef_strongly_convex,
    solve_coef_universal, solve_coef_universal_sc, CoefError, CoefficientInputs, EstimateError, EstimateState,
};
use crate::linesearch::{
    minimize_cubic_ray, minimize_on_interval, minimize_on_ray, quartic_derivative, LineMin, LineSearchConfig,
    LineSearchError,
};
use crate::oracle::{Counted, Objective};
use crate::prox::ProxSetup;
use crate::vector::{all_finite, axpy, dot, sub};

/// How the strongly convex variant takes its descent step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    KnownL(f64),
    LineSearch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variant {
    SmoothKnownL { lipschitz: f64 },
    SmoothLineSearch,
    StronglyConvex { mu: f64, step: StepRule },
    Universal { eps: f64 },
    UniversalSC { mu: f64, eps: f64 },
}

impl Variant {
    pub fn mu(&self) -> f64 {
        match *self {
            Variant::StronglyConvex { mu, .. } | Variant::UniversalSC { mu, .. } => mu,
            _ => 0.0,
        }
    }

    /// Accuracy carried by the coefficient equation; zero for exact variants.
    pub fn eps(&self) -> f64 {
        match *self {
            Variant::Universal { eps } | Variant::UniversalSC { eps, .. } => eps,
            _ => 0.0,
        }
    }

    pub fn is_universal(&self) -> bool {
        matches!(self, Variant::Universal { .. } | Variant::UniversalSC { .. })
    }

    fn known_l(&self) -> Option<f64> {
        match *self {
            Variant::SmoothKnownL { lipschitz } => Some(lipschitz),
            Variant::StronglyConvex {
                step: StepRule::KnownL(l),
                ..
            } => Some(l),
            _ => None,
        }
    }
}

/// Range of the coupling parameter `beta` in `y = v + beta (x - v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CouplingDomain {
    /// `beta` in `[0, 1]`.
    Segment,
    /// `beta` in `[lo, hi]` with `lo <= 0` and `hi >= 1`.
    Extended { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub variant: Variant,
    pub max_iter: usize,
    /// Bound on `||x0 - x*||` used by the online gap bound.
    pub radius: Option<f64>,
    /// Stop once the gap bound falls below this. Universal variants default to `eps / 2`.
    pub target_gap: Option<f64>,
    pub grad_tol: Option<f64>,
    pub linesearch: LineSearchConfig,
    pub coupling: CouplingDomain,
    /// Use the exact quartic ray search when the objective exposes its line polynomial.
    pub polynomial_ray: bool,
    /// Fail with `CertificateViolation` when the model bound breaks beyond rounding.
    pub check_certificate: bool,
}

impl SolverConfig {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            max_iter: 1000,
            radius: None,
            target_gap: None,
            grad_tol: None,
            linesearch: LineSearchConfig::default(),
            coupling: CouplingDomain::Segment,
            polynomial_ray: true,
            check_certificate: true,
        }
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = Some(radius);
        self
    }

    pub fn with_target_gap(mut self, gap: f64) -> Self {
        self.target_gap = Some(gap);
        self
    }

    pub fn with_grad_tol(mut self, tol: f64) -> Self {
        self.grad_tol = Some(tol);
        self
    }

    pub fn with_linesearch(mut self, ls: LineSearchConfig) -> Self {
        self.linesearch = ls;
        self
    }

    /// Gap threshold actually used by `solve`.
    pub fn effective_target_gap(&self) -> Option<f64> {
        self.radius?;
        match self.target_gap {
            Some(t) => Some(t),
            None if self.variant.is_universal() => Some(0.5 * self.variant.eps()),
            None => None,
        }
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        let bad = |msg: &str| Err(SolveError::InvalidConfig(msg.to_string()));
        let pos = |v: f64| v > 0.0 && v.is_finite();
        match self.variant {
            Variant::SmoothKnownL { lipschitz } if !pos(lipschitz) => return bad("L must be positive"),
            Variant::StronglyConvex { mu, step } => {
                if !(mu >= 0.0 && mu.is_finite()) {
                    return bad("mu must be nonnegative");
                }
                if let StepRule::KnownL(l) = step {
                    if !(pos(l) && l > mu) {
                        return bad("known-L strongly convex steps need L > mu");
                    }
                }
            }
            Variant::Universal { eps } if !pos(eps) => return bad("eps must be positive"),
            Variant::UniversalSC { mu, eps } => {
                if !pos(eps) {
                    return bad("eps must be positive");
                }
                if !(mu >= 0.0 && mu.is_finite()) {
                    return bad("mu must be nonnegative");
                }
            }
            _ => {}
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive");
        }
        if let Some(r) = self.radius {
            if !(r >= 0.0 && r.is_finite()) {
                return bad("radius must be nonnegative");
            }
        }
        if let Some(t) = self.target_gap {
            if !pos(t) {
                return bad("target gap must be positive");
            }
        }
        if let Some(t) = self.grad_tol {
            if !(t >= 0.0) {
                return bad("grad_tol must be nonnegative");
            }
        }
        if let CouplingDomain::Extended { lo, hi } = self.coupling {
            if !(lo <= 0.0 && hi >= 1.0 && lo.is_finite() && hi.is_finite()) {
                return bad("extended coupling domain must contain [0, 1]");
            }
        }
        self.linesearch.validate().map_err(SolveError::LineSearch)
    }
}

/// One completed iteration `k - 1 -> k`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    /// `f(x_k)`
    pub f_x: f64,
    /// `f(y_{k-1})`
    pub f_y: f64,
    pub grad_dual_norm_y: f64,
    /// `A_k`
    pub a_sum: f64,
    /// `a_k`
    pub a: f64,
    pub beta: f64,
    pub h: f64,
    /// `psi_k(v_k)`
    pub psi_min: f64,
    pub gap_bound: Option<f64>,
    pub oracle_calls: u64,
    pub wall_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    GapReached,
    GradTolReached,
    Stationary,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub x_final: Vec<f64>,
    pub f_final: f64,
    pub status: SolveStatus,
    pub trace: Vec<IterationRecord>,
    pub oracle_calls: u64,
}

impl SolveReport {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("invalid solver config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    LineSearch(LineSearchError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error("non-finite value encountered at iteration {k}")]
    NonFinite { k: usize },
    #[error("certificate violated at iteration {k}: A f(x) = {lhs} > {rhs}")]
    CertificateViolation { k: usize, lhs: f64, rhs: f64 },
}

/// `f(x_k) - (psi_k(v_k) - R^2/2) / A_k`, an upper bound on `f(x_k) - f*` for
/// convex `f` and Euclidean `R >= ||x0 - x*||`.
pub fn gap_bound(estimate: &EstimateState, f_xk: f64, radius: f64) -> f64 {
    assert!(estimate.a_sum > 0.0, "gap bound needs A_k > 0");
    f_xk - (estimate.psi_min - 0.5 * radius * radius) / estimate.a_sum
}

/// Everything observable about one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub record: IterationRecord,
    pub v_prev: Vec<f64>,
    pub y: Vec<f64>,
    pub grad_y: Vec<f64>,
    pub x_next: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepEvent {
    Advanced(Box<StepInfo>),
    /// The run ended inside the step; `Solver::x` holds the final point.
    Stopped(SolveStatus),
}

/// Stepwise driver. `solve` is the usual entry point.
pub struct Solver<'a, O: Objective + ?Sized, P: ProxSetup + ?Sized> {
    oracle: Counted<'a, O>,
    prox: &'a P,
    config: SolverConfig,
    x: Vec<f64>,
    f_x: f64,
    estimate: EstimateState,
    k: usize,
    slack: f64,
    started: Instant,
}

impl<'a, O: Objective + ?Sized, P: ProxSetup + ?Sized> Solver<'a, O, P> {
    pub fn new(oracle: &'a O, prox: &'a P, config: SolverConfig, x0: &[f64]) -> Result<Self, SolveError> {
        config.validate()?;
        if x0.len() != oracle.dim() {
            return Err(SolveError::InvalidConfig(format!(
                "x0 has length {} but the objective has dimension {}",
                x0.len(),
                oracle.dim()
            )));
        }
        if !all_finite(x0) {
            return Err(SolveError::InvalidConfig("x0 must be finite".into()));
        }
        let mu = config.variant.mu();
        if mu > 0.0 && !prox.is_euclidean() {
            return Err(EstimateError::NonEuclideanStrongConvexity.into());
        }
        let counted = Counted::new(oracle);
        let f_x = counted.value(x0);
        if !f_x.is_finite() {
            return Err(SolveError::NonFinite { k: 0 });
        }
        Ok(Self {
            oracle: counted,
            prox,
            config,
            x: x0.to_vec(),
            f_x,
            estimate: EstimateState::new(x0, mu),
            k: 0,
            slack: 0.0,
            started: Instant::now(),
        })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn f_x(&self) -> f64 {
        self.f_x
    }

    pub fn estimate(&self) -> &EstimateState {
        &self.estimate
    }

    pub fn iteration(&self) -> usize {
        self.k
    }

    pub fn oracle_calls(&self) -> u64 {
        self.oracle.calls()
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    /// Minimizes `f(v + beta (x - v))`; returns `(beta, y, f(y))`.
    fn couple(&self, ls: &LineSearchConfig) -> Result<(f64, Vec<f64>, f64), SolveError> {
        let v = &self.estimate.v;
        if *v == self.x {
            return Ok((1.0, self.x.clone(), self.f_x));
        }
        let d = sub(&self.x, v);
        let (lo, hi) = match self.config.coupling {
            CouplingDomain::Segment => (0.0, 1.0),
            CouplingDomain::Extended { lo, hi } => (lo, hi),
        };
        let phi = |beta: f64| self.oracle.value(&axpy(v, beta, &d));
        let found = match minimize_on_interval(phi, lo, hi, ls) {
            Ok(m) => m,
            Err(LineSearchError::BudgetExceeded(m)) => m,
            Err(e) => return Err(SolveError::LineSearch(e)),
        };
        if found.t == 1.0 || !(found.value <= self.f_x) {
            return Ok((1.0, self.x.clone(), self.f_x));
        }
        Ok((found.t, axpy(v, found.t, &d), found.value))
    }

    /// Ray search for `h` in `f(y - h s)`; `None` when no probe descends.
    fn ray_step(&self, y: &[f64], s: &[f64]) -> Result<Option<LineMin>, SolveError> {
        let phi = |h: f64| self.oracle.value(&axpy(y, -h, s));
        if self.config.polynomial_ray {
            let dir: Vec<f64> = s.iter().map(|v| -v).collect();
            if let Some(c) = self.oracle.line_polynomial(y, &dir) {
                let m = minimize_cubic_ray(quartic_derivative(c), phi);
                return Ok((m.t > 0.0).then_some(m));
            }
        }
        match minimize_on_ray(phi, &self.config.linesearch) {
            Ok(m) => Ok(Some(m)),
            Err(LineSearchError::BudgetExceeded(m)) => Ok(Some(m)),
            Err(LineSearchError::NoDescent { .. }) => Ok(None),
            Err(e) => Err(SolveError::LineSearch(e)),
        }
    }

    fn stop_at(&mut self, x: Vec<f64>, f: f64, status: SolveStatus) -> StepEvent {
        if f <= self.f_x {
            self.x = x;
            self.f_x = f;
        }
        StepEvent::Stopped(status)
    }

    /// Performs one iteration.
    pub fn step(&mut self) -> Result<StepEvent, SolveError> {
        let variant = self.config.variant;
        let k = self.k + 1;

        let (mut beta, mut y, mut f_y) = self.couple(&self.config.linesearch)?;
        let mut g = self.oracle.gradient(&y);
        let v_prev = self.estimate.v.clone();
        let mut vy = sub(&v_prev, &y);
        let mut gnorm = self.prox.dual_norm(&g);
        let mut vy_norm = self.prox.norm(&vy);
        if dot(&g, &vy) < -1e-6 * gnorm * vy_norm {
            debug!("k={k}: coupling inner product {:e}, tightening", dot(&g, &vy));
            (beta, y, f_y) = self.couple(&self.config.linesearch.tightened(10.0))?;
            g = self.oracle.gradient(&y);
            vy = sub(&v_prev, &y);
            gnorm = self.prox.dual_norm(&g);
            vy_norm = self.prox.norm(&vy);
        }
        if !(f_y.is_finite() && all_finite(&g)) {
            return Err(SolveError::NonFinite { k });
        }

        let s = match self.prox.sharp(&g) {
            Ok(s) => s,
            Err(_) => return Ok(self.stop_at(y, f_y, SolveStatus::Stationary)),
        };

        let (h, x_next, f_xp) = match variant.known_l() {
            Some(l) => {
                let h = gnorm / l;
                let xp = axpy(&y, -h, &s);
                let fp = self.oracle.value(&xp);
                (h, xp, fp)
            }
            None => match self.ray_step(&y, &s)? {
                Some(m) => (m.t, axpy(&y, -m.t, &s), m.value),
                None if variant.is_universal() => (0.0, y.clone(), f_y),
                None => return Ok(self.stop_at(y, f_y, SolveStatus::Stationary)),
            },
        };
        if !f_xp.is_finite() {
            return Err(SolveError::NonFinite { k });
        }

        let est = &self.estimate;
        let inputs = CoefficientInputs {
            a_sum: est.a_sum,
            tau: est.tau,
            mu: est.mu,
            eps: variant.eps(),
            f_y,
            f_xp,
            grad_dual_norm: gnorm,
            vy_dist: vy_norm,
        };
        let coef = match variant {
            Variant::SmoothKnownL { lipschitz } => Ok(solve_coef_smooth_known_l(est.a_sum, lipschitz)),
            Variant::SmoothLineSearch => solve_coef_smooth_linesearch(est.a_sum, f_y, f_xp, gnorm),
            Variant::StronglyConvex {
                mu,
                step: StepRule::KnownL(l),
            } => Ok(solve_coef_sc_known_l(est.a_sum, est.tau, mu, l)),
            Variant::StronglyConvex { .. } => solve_coef_strongly_convex(&inputs),
            Variant::Universal { eps } => solve_coef_universal(est.a_sum, f_xp - f_y, eps, gnorm),
            Variant::UniversalSC { .. } => solve_coef_universal_sc(&inputs),
        };
        let a = match coef {
            Ok(a) => a,
            Err(CoefError::DegenerateQuadratic { .. }) => match degenerate_fallback(&inputs) {
                Some(a) => a,
                None => return Ok(self.stop_at(x_next, f_xp, SolveStatus::GapReached)),
            },
            Err(CoefError::NoDecrease) => return Ok(self.stop_at(x_next, f_xp, SolveStatus::Stationary)),
            Err(CoefError::AlreadyOptimal) | Err(CoefError::NoSolution) => {
                return Ok(self.stop_at(x_next, f_xp, SolveStatus::GapReached))
            }
            Err(CoefError::InvalidInput) => return Err(SolveError::NonFinite { k }),
        };

        let tau_old = self.estimate.tau;
        self.estimate.add_linearization(a, &y, f_y, &g, self.prox)?;
        let tau_new = self.estimate.tau;
        self.slack += a * tau_old / tau_new * (-dot(&g, &vy)).max(0.0);
        self.x = x_next.clone();
        self.f_x = f_xp;
        self.k = k;

        let a_sum = self.estimate.a_sum;
        let psi_min = self.estimate.psi_min;
        if !psi_min.is_finite() {
            return Err(SolveError::NonFinite { k });
        }
        if self.config.check_certificate {
            let lhs = a_sum * self.f_x;
            let rhs = psi_min + 0.5 * a_sum * variant.eps() + self.slack + 1e-8 * (1.0 + psi_min.abs() + lhs.abs());
            if lhs > rhs {
                return Err(SolveError::CertificateViolation { k, lhs, rhs });
            }
        }

        let record = IterationRecord {
            k,
            f_x: self.f_x,
            f_y,
            grad_dual_norm_y: gnorm,
            a_sum,
            a,
            beta,
            h,
            psi_min,
            gap_bound: self.config.radius.map(|r| gap_bound(&self.estimate, self.f_x, r)),
            oracle_calls: self.oracle.calls(),
            wall_time: self.started.elapsed().as_secs_f64(),
        };
        debug!(
            "k={k} f={:e} |g|={:e} A={:e} beta={:e} h={:e}",
            record.f_x, gnorm, a_sum, beta, h
        );
        Ok(StepEvent::Advanced(Box::new(StepInfo {
            record,
            v_prev,
            y,
            grad_y: g,
            x_next,
        })))
    }

    /// Status a completed step triggers under the gap and gradient rules, if any.
    pub fn stop_rule(&self, rec: &IterationRecord) -> Option<SolveStatus> {
        let target = self.config.effective_target_gap();
        if matches!((rec.gap_bound, target), (Some(g), Some(t)) if g <= t) {
            return Some(SolveStatus::GapReached);
        }
        if matches!(self.config.grad_tol, Some(t) if rec.grad_dual_norm_y <= t) {
            return Some(SolveStatus::GradTolReached);
        }
        None
    }

    pub fn into_report(self, status: SolveStatus, trace: Vec<IterationRecord>) -> SolveReport {
        SolveReport {
            x_final: self.x,
            f_final: self.f_x,
            status,
            trace,
            oracle_calls: self.oracle.calls(),
        }
    }
}

/// Option-a coefficient for a degenerate strongly convex equation, with `L`
/// estimated from the accepted step.
fn degenerate_fallback(inp: &CoefficientInputs) -> Option<f64> {
    let decrease = inp.f_y - inp.f_xp;
    if !(decrease > 0.0) {
        return None;
    }
    let g2 = inp.grad_dual_norm * inp.grad_dual_norm;
    let l_est = g2 / (2.0 * decrease);
    let l = l_est.max(2.0 * inp.mu);
    if !(l > inp.mu && l.is_finite()) {
        return None;
    }
    Some(solve_coef_sc_known_l(inp.a_sum, inp.tau, inp.mu, l))
}

/// Runs the configured variant from `x0` until a stopping rule fires.
pub fn solve<O, P>(oracle: &O, prox: &P, config: &SolverConfig, x0: &[f64]) -> Result<SolveReport, SolveError>
where
    O: Objective + ?Sized,
    P: ProxSetup + ?Sized,
{
    let mut solver = Solver::new(oracle, prox, config.clone(), x0)?;
    let mut trace = Vec::new();
    let status = loop {
        if solver.iteration() >= config.max_iter {
            break SolveStatus::MaxIter;
        }
        match solver.step()? {
            StepEvent::Stopped(status) => break status,
            StepEvent::Advanced(info) => {
                let stop = solver.stop_rule(&info.record);
                trace.push(info.record);
                if let Some(s) = stop {
                    break s;
                }
            }
        }
    };
    info!(
        "solve finished: {:?} after {} iterations, f = {:e}",
        status,
        trace.len(),
        solver.f_x()
    );
    Ok(solver.into_report(status, trace))
}
