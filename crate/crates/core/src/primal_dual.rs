//! Linearly constrained problems `min f(x) s.t. Ax = b` solved through their
//! dual with the universal method and primal averaging.

use log::{info, warn};
use thiserror::Error;

use crate::linesearch::LineSearchConfig;
use crate::oracle::Objective;
use crate::prox::Euclidean;
use crate::solver::{SolveError, SolveStatus, Solver, SolverConfig, StepEvent, Variant};
use crate::vector::{all_finite, dot, norm2, sub};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PdError {
    #[error("inner maximization failed at the current multiplier")]
    InnerOracleFailure,
    #[error("invalid problem data: {0}")]
    InvalidData(String),
    #[error(transparent)]
    Solve(SolveError),
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, PdError> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if m == 0 || n == 0 {
            return Err(PdError::InvalidData("matrix must be nonempty".into()));
        }
        if rows.iter().any(|r| r.len() != n) {
            return Err(PdError::InvalidData("matrix rows have different lengths".into()));
        }
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        if !all_finite(&data) {
            return Err(PdError::InvalidData("matrix entries must be finite".into()));
        }
        Ok(Self { rows: m, cols: n, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    /// `A x`
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.data.chunks(self.cols).map(|row| dot(row, x)).collect()
    }

    /// `A^T y`
    pub fn apply_t(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (row, yi) in self.data.chunks(self.cols).zip(y) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * yi;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffineConstraint {
    pub a: DenseMatrix,
    pub b: Vec<f64>,
}

impl AffineConstraint {
    pub fn new(a: DenseMatrix, b: Vec<f64>) -> Result<Self, PdError> {
        if b.len() != a.rows() {
            return Err(PdError::InvalidData(format!(
                "b has length {} but A has {} rows",
                b.len(),
                a.rows()
            )));
        }
        if !all_finite(&b) {
            return Err(PdError::InvalidData("b must be finite".into()));
        }
        Ok(Self { a, b })
    }

    /// `||A x - b||_2`
    pub fn residual_norm(&self, x: &[f64]) -> f64 {
        norm2(&sub(&self.a.apply(x), &self.b))
    }
}

/// The inner problem `max_{x in Q} -f(x) - <s, x>` in closed form.
pub trait InnerOracle {
    fn dim(&self) -> usize;

    /// `x(s)`
    fn maximizer(&self, s: &[f64]) -> Vec<f64>;

    /// `max_{x in Q} -f(x) - <s, x>`
    fn max_value(&self, s: &[f64]) -> f64;

    fn f_value(&self, x: &[f64]) -> f64;
}

/// `f(x) = ||x||^2 / 2` on the whole space.
#[derive(Debug, Clone)]
pub struct HalfSquaredNorm {
    n: usize,
}

impl InnerOracle for HalfSquaredNorm {
    fn dim(&self) -> usize {
        self.n
    }
    fn maximizer(&self, s: &[f64]) -> Vec<f64> {
        s.iter().map(|v| -v).collect()
    }
    fn max_value(&self, s: &[f64]) -> f64 {
        0.5 * dot(s, s)
    }
    fn f_value(&self, x: &[f64]) -> f64 {
        0.5 * dot(x, x)
    }
}

/// `f(x) = sum x_j ln x_j` on the probability simplex.
#[derive(Debug, Clone)]
pub struct EntropySimplex {
    n: usize,
}

impl InnerOracle for EntropySimplex {
    fn dim(&self) -> usize {
        self.n
    }

    fn maximizer(&self, s: &[f64]) -> Vec<f64> {
        let m = s.iter().fold(f64::INFINITY, |m, v| m.min(*v));
        let w: Vec<f64> = s.iter().map(|v| (m - v).exp()).collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|v| v / total).collect()
    }

    fn max_value(&self, s: &[f64]) -> f64 {
        let m = s.iter().fold(f64::INFINITY, |m, v| m.min(*v));
        let total: f64 = s.iter().map(|v| (m - v).exp()).sum();
        -m + total.ln()
    }

    fn f_value(&self, x: &[f64]) -> f64 {
        x.iter().filter(|v| **v > 0.0).map(|v| v * v.ln()).sum()
    }
}

/// `phi(lambda) = <lambda, b> + max_{x in Q} (-f(x) - <A^T lambda, x>)`, to be minimized.
pub struct DualProblem {
    pub constraint: AffineConstraint,
    pub inner: Box<dyn InnerOracle + Send + Sync>,
}

impl std::fmt::Debug for DualProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DualProblem")
            .field("constraint", &self.constraint)
            .finish_non_exhaustive()
    }
}

impl DualProblem {
    pub fn new(constraint: AffineConstraint, inner: Box<dyn InnerOracle + Send + Sync>) -> Result<Self, PdError> {
        if inner.dim() != constraint.a.cols() {
            return Err(PdError::InvalidData("inner dimension does not match A".into()));
        }
        Ok(Self { constraint, inner })
    }

    /// `x(lambda)`
    pub fn primal_point(&self, lambda: &[f64]) -> Vec<f64> {
        self.inner.maximizer(&self.constraint.a.apply_t(lambda))
    }

    pub fn primal_value(&self, x: &[f64]) -> f64 {
        self.inner.f_value(x)
    }
}

impl Objective for DualProblem {
    fn dim(&self) -> usize {
        self.constraint.a.rows()
    }

    fn value(&self, lambda: &[f64]) -> f64 {
        dot(lambda, &self.constraint.b) + self.inner.max_value(&self.constraint.a.apply_t(lambda))
    }

    fn gradient(&self, lambda: &[f64]) -> Vec<f64> {
        let x = self.primal_point(lambda);
        sub(&self.constraint.b, &self.constraint.a.apply(&x))
    }
}

pub fn make_quadratic_dual(a: DenseMatrix, b: Vec<f64>) -> Result<DualProblem, PdError> {
    let n = a.cols();
    DualProblem::new(AffineConstraint::new(a, b)?, Box::new(HalfSquaredNorm { n }))
}

pub fn make_entropy_dual(a: DenseMatrix, b: Vec<f64>) -> Result<DualProblem, PdError> {
    let n = a.cols();
    DualProblem::new(AffineConstraint::new(a, b)?, Box::new(EntropySimplex { n }))
}

/// `(phi(lambda), b - A x(lambda))`.
pub fn dual_value_and_grad(problem: &DualProblem, lambda: &[f64]) -> Result<(f64, Vec<f64>), PdError> {
    let phi = problem.value(lambda);
    let grad = problem.gradient(lambda);
    if phi.is_finite() && all_finite(&grad) {
        Ok((phi, grad))
    } else {
        Err(PdError::InnerOracleFailure)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdConfig {
    pub eps_f: f64,
    pub eps_eq: f64,
    pub max_iter: usize,
    /// Guess for `||lambda*||` used to split the accuracy between both tests.
    pub r_guess: f64,
    pub linesearch: LineSearchConfig,
}

impl PdConfig {
    pub fn new(eps_f: f64, eps_eq: f64, max_iter: usize) -> Self {
        Self {
            eps_f,
            eps_eq,
            max_iter,
            r_guess: 1.0,
            linesearch: LineSearchConfig::default(),
        }
    }

    /// Accuracy handed to the universal method.
    pub fn working_eps(&self) -> f64 {
        self.eps_f.min(self.eps_eq * self.r_guess)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdRecord {
    pub k: usize,
    pub f_xhat: f64,
    pub phi_eta: f64,
    /// `|f(x_hat) + phi(eta)|`
    pub gap: f64,
    /// `||A x_hat - b||`
    pub feas: f64,
    pub a_sum: f64,
    pub eta_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdStatus {
    Converged,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdReport {
    pub x_hat: Vec<f64>,
    pub eta: Vec<f64>,
    pub gap: f64,
    pub feas: f64,
    pub eps: f64,
    pub status: PdStatus,
    /// Set when `||eta||` exceeded `1e8`, the signature of an infeasible primal.
    pub diverging: bool,
    pub trace: Vec<PdRecord>,
}

const DIVERGENCE_NORM: f64 = 1e8;

/// Runs the universal method on the dual from `lambda_0 = 0`, averaging the
/// inner maximizers with the method's weights, until both
/// `|f(x_hat) + phi(eta)| <= eps_f` and `||A x_hat - b|| <= eps_eq`.
pub fn pd_solve(problem: &DualProblem, cfg: &PdConfig) -> Result<PdReport, PdError> {
    if !(cfg.eps_f > 0.0 && cfg.eps_eq > 0.0 && cfg.r_guess > 0.0) {
        return Err(PdError::InvalidData("tolerances must be positive".into()));
    }
    let eps = cfg.working_eps();
    let m = problem.dim();
    let mut solver_cfg = SolverConfig::new(Variant::Universal { eps })
        .with_max_iter(cfg.max_iter)
        .with_linesearch(cfg.linesearch);
    solver_cfg.polynomial_ray = false;
    let lambda0 = vec![0.0; m];
    dual_value_and_grad(problem, &lambda0)?;
    let mut solver = Solver::new(problem, &Euclidean, solver_cfg, &lambda0).map_err(map_solve)?;

    let mut x_hat = vec![0.0; problem.constraint.a.cols()];
    let mut a_prev = 0.0;
    let mut trace = Vec::new();
    let mut diverging = false;
    let record = |k: usize, x_hat: &[f64], eta: &[f64], phi: f64, a_sum: f64| {
        let f_xhat = problem.primal_value(x_hat);
        PdRecord {
            k,
            f_xhat,
            phi_eta: phi,
            gap: (f_xhat + phi).abs(),
            feas: problem.constraint.residual_norm(x_hat),
            a_sum,
            eta_norm: norm2(eta),
        }
    };

    let status = loop {
        if solver.iteration() >= cfg.max_iter {
            break PdStatus::MaxIter;
        }
        match solver.step().map_err(map_solve)? {
            StepEvent::Stopped(SolveStatus::Stationary) => {
                // zero dual gradient: x(lambda) is feasible and closes the gap
                let lambda = solver.x().to_vec();
                x_hat = problem.primal_point(&lambda);
                let rec = record(
                    solver.iteration() + 1,
                    &x_hat,
                    &lambda,
                    solver.f_x(),
                    solver.estimate().a_sum,
                );
                trace.push(rec);
                break PdStatus::Converged;
            }
            StepEvent::Stopped(_) => break PdStatus::MaxIter,
            StepEvent::Advanced(info) => {
                let x_k = problem.primal_point(&info.y);
                if !all_finite(&x_k) {
                    return Err(PdError::InnerOracleFailure);
                }
                let a = info.record.a;
                let a_sum = info.record.a_sum;
                for (xh, xi) in x_hat.iter_mut().zip(&x_k) {
                    *xh = (a * xi + a_prev * *xh) / a_sum;
                }
                a_prev = a_sum;
                let rec = record(info.record.k, &x_hat, solver.x(), solver.f_x(), a_sum);
                if rec.eta_norm > DIVERGENCE_NORM && !diverging {
                    warn!(
                        "dual iterate norm {:e} exceeds {:e}; primal looks infeasible",
                        rec.eta_norm, DIVERGENCE_NORM
                    );
                    diverging = true;
                }
                let done = rec.gap <= cfg.eps_f && rec.feas <= cfg.eps_eq;
                trace.push(rec);
                if done {
                    break PdStatus::Converged;
                }
            }
        }
    };

    let (gap, feas) = trace.last().map_or_else(
        || {
            let r = record(0, &x_hat, solver.x(), solver.f_x(), 0.0);
            (r.gap, r.feas)
        },
        |r| (r.gap, r.feas),
    );
    info!(
        "primal-dual finished: {status:?} after {} iterations, gap {gap:e}, feas {feas:e}",
        trace.len()
    );
    Ok(PdReport {
        x_hat,
        eta: solver.x().to_vec(),
        gap,
        feas,
        eps,
        status,
        diverging,
        trace,
    })
}

fn map_solve(e: SolveError) -> PdError {
    match e {
        SolveError::NonFinite { .. } => PdError::InnerOracleFailure,
        other => PdError::Solve(other),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_by_two() -> DualProblem {
        make_quadratic_dual(DenseMatrix::from_rows(&[vec![1.0, 1.0]]).unwrap(), vec![1.0]).unwrap()
    }

    #[test]
    fn quadratic_dual_examples() {
        let p = one_by_two();
        let (phi, g) = dual_value_and_grad(&p, &[0.0]).unwrap();
        assert_eq!((phi, g), (0.0, vec![1.0]));
        let (phi, g) = dual_value_and_grad(&p, &[-0.5]).unwrap();
        assert!((phi + 0.25).abs() < 1e-15);
        assert!(g[0].abs() < 1e-15);
        assert_eq!(p.primal_point(&[2.0]), vec![-2.0, -2.0]);
    }

    #[test]
    fn zero_rhs_gives_zero_gradient_at_origin() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 3.0]]).unwrap();
        let p = make_quadratic_dual(a, vec![0.0, 0.0]).unwrap();
        assert_eq!(dual_value_and_grad(&p, &[0.0, 0.0]).unwrap().1, vec![0.0, 0.0]);
    }

    #[test]
    fn quadratic_instance_solves_to_kkt_point() {
        let rep = pd_solve(&one_by_two(), &PdConfig::new(1e-6, 1e-6, 5000)).unwrap();
        assert_eq!(rep.status, PdStatus::Converged);
        assert!((rep.x_hat[0] - 0.5).abs() < 1e-5 && (rep.x_hat[1] - 0.5).abs() < 1e-5);
        assert!(rep.gap <= 1e-6 && rep.feas <= 1e-6);
        assert!((rep.eta[0] + 0.5).abs() < 1e-2);
    }

    #[test]
    fn identity_constraint_with_zero_rhs_stops_immediately() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        let p = make_quadratic_dual(a, vec![0.0; 3]).unwrap();
        let rep = pd_solve(&p, &PdConfig::new(1e-8, 1e-8, 100)).unwrap();
        assert_eq!(rep.status, PdStatus::Converged);
        assert!(rep.trace.len() <= 2);
        assert_eq!(rep.gap, 0.0);
        assert_eq!(rep.feas, 0.0);
    }

    #[test]
    fn entropy_examples() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 1.0, 1.0]]).unwrap();
        let p = make_entropy_dual(a, vec![1.0]).unwrap();
        let x = p.primal_point(&[0.0]);
        assert!(x.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));

        let inner = EntropySimplex { n: 3 };
        let s = [0.3, -1.2, 2.0];
        let shifted: Vec<f64> = s.iter().map(|v| v + 7.5).collect();
        let (x1, x2) = (inner.maximizer(&s), inner.maximizer(&shifted));
        for (u, v) in x1.iter().zip(&x2) {
            assert!((u - v).abs() < 1e-15);
        }
        // max value equals -f(x) - <s, x> at the maximizer
        let direct = -inner.f_value(&x1) - dot(&s, &x1);
        assert!((inner.max_value(&s) - direct).abs() < 1e-13);
    }

    #[test]
    fn entropy_single_coordinate_constraint() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 0.0, 0.0]]).unwrap();
        let p = make_entropy_dual(a, vec![0.5]).unwrap();
        let rep = pd_solve(&p, &PdConfig::new(1e-8, 1e-8, 5000)).unwrap();
        assert_eq!(rep.status, PdStatus::Converged);
        for (v, e) in rep.x_hat.iter().zip([0.5, 0.25, 0.25]) {
            assert!((v - e).abs() < 1e-6, "x_hat = {:?}", rep.x_hat);
        }
    }

    #[test]
    fn infeasible_constraint_diverges() {
        let a = DenseMatrix::from_rows(&[vec![0.0, 0.0]]).unwrap();
        let p = make_quadratic_dual(a, vec![1.0]).unwrap();
        let rep = pd_solve(&p, &PdConfig::new(1e-6, 1e-6, 50)).unwrap();
        assert_eq!(rep.status, PdStatus::MaxIter);
        assert!(rep.diverging);
        assert!(rep.feas >= 1.0 - 1e-12);
    }

    #[test]
    fn malformed_data_rejected() {
        assert!(DenseMatrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(DenseMatrix::from_rows(&[]).is_err());
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(make_quadratic_dual(a, vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn incremental_average_matches_batch() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0, -1.0, 0.5], vec![0.0, 1.0, 3.0, -2.0]]).unwrap();
        let p = make_quadratic_dual(a, vec![1.0, -0.5]).unwrap();
        let mut solver_cfg = SolverConfig::new(Variant::Universal { eps: 1e-9 }).with_max_iter(100);
        solver_cfg.polynomial_ray = false;
        let mut solver = Solver::new(&p, &Euclidean, solver_cfg, &[0.0, 0.0]).unwrap();
        let mut weighted = Vec::new();
        let mut x_hat = [0.0; 4];
        let mut a_prev = 0.0;
        for _ in 0..100 {
            let StepEvent::Advanced(info) = solver.step().unwrap() else {
                break;
            };
            let xk = p.primal_point(&info.y);
            for (xh, xi) in x_hat.iter_mut().zip(&xk) {
                *xh = (info.record.a * xi + a_prev * *xh) / info.record.a_sum;
            }
            a_prev = info.record.a_sum;
            weighted.push((info.record.a, xk));
        }
        let total: f64 = weighted.iter().map(|(a, _)| a).sum();
        for j in 0..4 {
            let batch: f64 = weighted.iter().map(|(a, x)| a * x[j]).sum::<f64>() / total;
            assert!((batch - x_hat[j]).abs() <= 1e-10 * (1.0 + batch.abs()));
        }
    }
}
