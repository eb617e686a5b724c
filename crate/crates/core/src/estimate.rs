//! The estimating sequence `psi_k` in closed form and the scalar equations
//! that fix the weight `a_{k+1}` of each new linearization.

use thiserror::Error;

use crate::prox::ProxSetup;
use crate::vector::{axpy_mut, dot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EstimateError {
    #[error("strongly convex models require the Euclidean prox setup")]
    NonEuclideanStrongConvexity,
    #[error("linearization weight must be positive and finite")]
    InvalidWeight,
}

/// `psi_k(x) = V(x, x0) + sum_i a_i { f(y_i) + <g_i, x - y_i> + mu/2 ||x - y_i||^2 }`
/// stored through its accumulators.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateState {
    pub mu: f64,
    /// `A_k`, the sum of all weights.
    pub a_sum: f64,
    /// `1 + mu * A_k`.
    pub tau: f64,
    pub g_sum: Vec<f64>,
    /// `sum a_i (f(y_i) - <g_i, y_i>)`
    pub lin_const: f64,
    /// `mu * sum a_i y_i`
    pub mu_y_sum: Vec<f64>,
    /// `mu/2 * sum a_i ||y_i||^2`
    pub mu_ysq_sum: f64,
    pub x0: Vec<f64>,
    /// Minimizer of `psi_k`.
    pub v: Vec<f64>,
    /// `psi_k(v)`.
    pub psi_min: f64,
}

impl EstimateState {
    pub fn new(x0: &[f64], mu: f64) -> Self {
        assert!(mu >= 0.0 && mu.is_finite(), "mu must be finite and nonnegative");
        let n = x0.len();
        Self {
            mu,
            a_sum: 0.0,
            tau: 1.0,
            g_sum: vec![0.0; n],
            lin_const: 0.0,
            mu_y_sum: vec![0.0; n],
            mu_ysq_sum: 0.0,
            x0: x0.to_vec(),
            v: x0.to_vec(),
            psi_min: 0.0,
        }
    }

    /// Adds `a * { f_y + <grad, x - y> + mu/2 ||x - y||^2 }` to the model and
    /// moves `v` to the new minimizer.
    ///
    /// The minimum value is advanced through the exact identity
    /// `psi'(v') = psi(v) + tau V(v', v) + a l(v')`, which holds because the old
    /// model is `psi(v)` plus a scaled Bregman term around its minimizer.
    pub fn add_linearization<P: ProxSetup + ?Sized>(
        &mut self,
        a: f64,
        y: &[f64],
        f_y: f64,
        grad: &[f64],
        prox: &P,
    ) -> Result<(), EstimateError> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(EstimateError::InvalidWeight);
        }
        let mu = self.mu;
        if mu > 0.0 && !prox.is_euclidean() {
            return Err(EstimateError::NonEuclideanStrongConvexity);
        }

        let tau_old = self.tau;
        let tau_new = tau_old + mu * a;
        let v_new: Vec<f64> = if mu > 0.0 {
            self.v
                .iter()
                .zip(y)
                .zip(grad)
                .map(|((vi, yi), gi)| (tau_old * vi + mu * a * yi - a * gi) / tau_new)
                .collect()
        } else {
            let mut g_sum = self.g_sum.clone();
            axpy_mut(&mut g_sum, a, grad);
            prox.mirror_argmin(&g_sum, &self.x0)
        };

        let mut lin = f_y;
        let mut quad = 0.0;
        for ((vi, yi), gi) in v_new.iter().zip(y).zip(grad) {
            let d = vi - yi;
            lin += gi * d;
            quad += d * d;
        }
        let model_at_v_new = lin + 0.5 * mu * quad;
        self.psi_min += tau_old * prox.bregman(&v_new, &self.v) + a * model_at_v_new;

        axpy_mut(&mut self.g_sum, a, grad);
        self.lin_const += a * (f_y - dot(grad, y));
        if mu > 0.0 {
            axpy_mut(&mut self.mu_y_sum, mu * a, y);
            self.mu_ysq_sum += 0.5 * mu * a * dot(y, y);
        }
        self.a_sum += a;
        self.tau = tau_new;
        self.v = v_new;
        Ok(())
    }

    /// Evaluates `psi_k(x)` directly from the accumulators.
    pub fn psi_at<P: ProxSetup + ?Sized>(&self, x: &[f64], prox: &P) -> f64 {
        let mut val = prox.bregman(x, &self.x0) + self.lin_const + dot(&self.g_sum, x);
        if self.mu > 0.0 {
            val += 0.5 * self.mu * self.a_sum * dot(x, x) - dot(&self.mu_y_sum, x) + self.mu_ysq_sum;
        }
        val
    }

    pub fn psi_min_value(&self) -> f64 {
        self.psi_min
    }
}

/// Scalars entering the coefficient equations of the line-search variants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientInputs {
    /// `A_k`
    pub a_sum: f64,
    pub tau: f64,
    pub mu: f64,
    pub eps: f64,
    pub f_y: f64,
    pub f_xp: f64,
    pub grad_dual_norm: f64,
    /// `||v_k - y_k||`
    pub vy_dist: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum CoefError {
    /// The descent step did not decrease `f`.
    #[error("descent step did not decrease the objective")]
    NoDecrease,
    /// The leading coefficient is negative: the new point is already accurate.
    #[error("iterate is already optimal to the working accuracy")]
    AlreadyOptimal,
    /// The leading coefficient vanished; carries the root of the linear remainder.
    #[error("degenerate coefficient equation (linear root {linear_root})")]
    DegenerateQuadratic { linear_root: f64 },
    /// No positive root exists.
    #[error("coefficient equation has no positive root")]
    NoSolution,
    #[error("invalid coefficient inputs")]
    InvalidInput,
}

/// Greater root of `c2 a^2 + c1 a + c0` with `c2 > 0`, cancellation-free.
fn greater_root(c2: f64, c1: f64, c0: f64) -> Option<f64> {
    let disc = c1 * c1 - 4.0 * c2 * c0;
    if !(disc >= 0.0) {
        return None;
    }
    let sq = disc.sqrt();
    let r = if c1 <= 0.0 {
        (-c1 + sq) / (2.0 * c2)
    } else {
        -2.0 * c0 / (c1 + sq)
    };
    Some(r)
}

fn check_common(a_sum: f64, gnorm: f64) -> Result<(), CoefError> {
    if !(a_sum >= 0.0 && a_sum.is_finite() && gnorm > 0.0 && gnorm.is_finite()) {
        return Err(CoefError::InvalidInput);
    }
    Ok(())
}

/// Greater root of `a^2 L = A + a`.
pub fn solve_coef_smooth_known_l(a_sum: f64, l: f64) -> f64 {
    assert!(l > 0.0 && a_sum >= 0.0);
    (1.0 + (1.0 + 4.0 * a_sum * l).sqrt()) / (2.0 * l)
}

/// Greater root of `a^2 L = (tau + mu a)(A + a)`; requires `L > mu`.
pub fn solve_coef_sc_known_l(a_sum: f64, tau: f64, mu: f64, l: f64) -> f64 {
    assert!(l > mu && mu >= 0.0 && a_sum >= 0.0 && tau >= 1.0);
    let b = tau + mu * a_sum;
    (b + (b * b + 4.0 * (l - mu) * tau * a_sum).sqrt()) / (2.0 * (l - mu))
}

/// Root of `f_y - a^2 ||g||^2 / (2 (A + a)) = f_xp`.
pub fn solve_coef_smooth_linesearch(a_sum: f64, f_y: f64, f_xp: f64, gnorm: f64) -> Result<f64, CoefError> {
    check_common(a_sum, gnorm)?;
    let delta = f_y - f_xp;
    if !(delta > 0.0) {
        return Err(CoefError::NoDecrease);
    }
    let g2 = gnorm * gnorm;
    Ok((delta + (delta * delta + 2.0 * a_sum * delta * g2).sqrt()) / g2)
}

/// Coefficients `(c2, c1, c0)` of the strongly convex universal equation;
/// `eps = 0` gives the exact strongly convex one.
fn sc_coefficients(inp: &CoefficientInputs) -> (f64, f64, f64) {
    let delta = inp.f_xp - inp.f_y;
    let delta_eps = delta - 0.5 * inp.eps;
    let g2 = inp.grad_dual_norm * inp.grad_dual_norm;
    let c2 = g2 + 2.0 * inp.mu * delta_eps;
    let c1 =
        2.0 * delta_eps * inp.tau + 2.0 * inp.mu * inp.a_sum * delta - inp.mu * inp.tau * inp.vy_dist * inp.vy_dist;
    let c0 = 2.0 * inp.a_sum * delta * inp.tau;
    (c2, c1, c0)
}

fn solve_sc_quadratic(inp: &CoefficientInputs) -> Result<f64, CoefError> {
    let g2 = inp.grad_dual_norm * inp.grad_dual_norm;
    let (c2, c1, c0) = sc_coefficients(inp);
    if c2.abs() <= 1e-12 * g2 {
        let linear_root = if c1 != 0.0 { -c0 / c1 } else { 0.0 };
        return Err(CoefError::DegenerateQuadratic { linear_root });
    }
    if c2 < 0.0 {
        return Err(CoefError::AlreadyOptimal);
    }
    match greater_root(c2, c1, c0) {
        Some(a) if a > 0.0 && a.is_finite() => Ok(a),
        _ => Err(CoefError::NoSolution),
    }
}

fn check_inputs(inp: &CoefficientInputs) -> Result<(), CoefError> {
    check_common(inp.a_sum, inp.grad_dual_norm)?;
    let ok = inp.tau >= 1.0
        && inp.mu >= 0.0
        && inp.eps >= 0.0
        && inp.vy_dist >= 0.0
        && [inp.tau, inp.mu, inp.eps, inp.f_y, inp.f_xp, inp.vy_dist]
            .iter()
            .all(|v| v.is_finite());
    if ok {
        Ok(())
    } else {
        Err(CoefError::InvalidInput)
    }
}

/// Strongly convex line-search coefficient: positive root of
/// `(2 mu d + g^2) a^2 + (2 d (tau + mu A) - mu tau r^2) a + 2 tau A d = 0`
/// with `d = f_xp - f_y < 0` and `r = ||v - y||`.
pub fn solve_coef_strongly_convex(inp: &CoefficientInputs) -> Result<f64, CoefError> {
    check_inputs(inp)?;
    if !(inp.f_xp < inp.f_y) {
        return Err(CoefError::NoDecrease);
    }
    if inp.mu == 0.0 && inp.tau == 1.0 {
        return solve_coef_smooth_linesearch(inp.a_sum, inp.f_y, inp.f_xp, inp.grad_dual_norm);
    }
    solve_sc_quadratic(&CoefficientInputs { eps: 0.0, ..*inp })
}

/// Universal coefficient: greater root of
/// `f_y - a^2 g^2 / (2 (A + a)) + eps a / (2 (A + a)) = f_xp`.
pub fn solve_coef_universal(a_sum: f64, delta: f64, eps: f64, gnorm: f64) -> Result<f64, CoefError> {
    check_common(a_sum, gnorm)?;
    if !(eps >= 0.0 && eps.is_finite() && delta.is_finite()) {
        return Err(CoefError::InvalidInput);
    }
    let g2 = gnorm * gnorm;
    let delta_eps = delta - 0.5 * eps;
    match greater_root(g2, 2.0 * delta_eps, 2.0 * a_sum * delta) {
        Some(a) if a > 0.0 && a.is_finite() => Ok(a),
        _ => Err(CoefError::NoSolution),
    }
}

/// Strongly convex universal coefficient. With `d_e = d - eps/2` the equation is
/// `(g^2 + 2 mu d_e) a^2 + (2 d_e tau + 2 mu A d - mu tau r^2) a + 2 A d tau = 0`.
pub fn solve_coef_universal_sc(inp: &CoefficientInputs) -> Result<f64, CoefError> {
    check_inputs(inp)?;
    if inp.mu == 0.0 && inp.tau == 1.0 {
        return solve_coef_universal(inp.a_sum, inp.f_xp - inp.f_y, inp.eps, inp.grad_dual_norm);
    }
    solve_sc_quadratic(inp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prox::Euclidean;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * (1.0 + b.abs())
    }

    fn sc(mu: f64, delta: f64, eps: f64, tau: f64, a_sum: f64, g2: f64, r: f64) -> CoefficientInputs {
        CoefficientInputs {
            a_sum,
            tau,
            mu,
            eps,
            f_y: 0.0,
            f_xp: delta,
            grad_dual_norm: g2.sqrt(),
            vy_dist: r,
        }
    }

    #[test]
    fn add_linearization_euclidean_mu_zero() {
        let mut s = EstimateState::new(&[0.0, 0.0], 0.0);
        s.add_linearization(1.0, &[0.0, 0.0], 1.0, &[1.0, 0.0], &Euclidean)
            .unwrap();
        assert_eq!(s.v, vec![-1.0, 0.0]);
        assert!(close(s.psi_min_value(), 0.5, 1e-15));
        assert!(close(s.psi_at(&s.v, &Euclidean), 0.5, 1e-15));
    }

    #[test]
    fn add_linearization_strongly_convex_closed_form() {
        let mut s = EstimateState::new(&[0.0, 0.0], 1.0);
        s.add_linearization(1.0, &[2.0, 0.0], 0.0, &[1.0, 0.0], &Euclidean)
            .unwrap();
        assert!(close(s.v[0], 0.5, 1e-15) && s.v[1] == 0.0);
        assert!(close(s.tau, 2.0, 1e-15));
    }

    #[test]
    fn flat_linearization_adds_f_y() {
        let mut s = EstimateState::new(&[0.3, -0.2], 0.0);
        s.add_linearization(1.0, &[5.0, 7.0], 1.0, &[0.0, 0.0], &Euclidean)
            .unwrap();
        assert_eq!(s.v, vec![0.3, -0.2]);
        assert!(close(s.psi_min_value(), 1.0, 1e-15));
    }

    #[test]
    fn fresh_state_is_zero_at_center() {
        let s = EstimateState::new(&[1.0, 2.0], 0.5);
        assert_eq!(s.psi_min_value(), 0.0);
        assert_eq!(s.psi_at(&[1.0, 2.0], &Euclidean), 0.0);
    }

    #[test]
    fn rejects_bad_weight() {
        let mut s = EstimateState::new(&[0.0], 0.0);
        assert_eq!(
            s.add_linearization(0.0, &[0.0], 0.0, &[1.0], &Euclidean),
            Err(EstimateError::InvalidWeight)
        );
    }

    struct Scaled;
    impl ProxSetup for Scaled {
        fn norm(&self, x: &[f64]) -> f64 {
            Euclidean.norm(x)
        }
        fn dual_norm(&self, g: &[f64]) -> f64 {
            Euclidean.dual_norm(g)
        }
        fn sharp(&self, g: &[f64]) -> Result<Vec<f64>, crate::prox::ProxError> {
            Euclidean.sharp(g)
        }
        fn prox_value(&self, x: &[f64]) -> f64 {
            Euclidean.prox_value(x)
        }
        fn bregman(&self, x: &[f64], z: &[f64]) -> f64 {
            Euclidean.bregman(x, z)
        }
        fn mirror_argmin(&self, g: &[f64], z: &[f64]) -> Vec<f64> {
            Euclidean.mirror_argmin(g, z)
        }
    }

    #[test]
    fn strong_convexity_needs_euclidean() {
        let mut s = EstimateState::new(&[0.0], 1.0);
        assert_eq!(
            s.add_linearization(1.0, &[0.0], 0.0, &[1.0], &Scaled),
            Err(EstimateError::NonEuclideanStrongConvexity)
        );
        let mut s = EstimateState::new(&[0.0], 0.0);
        assert!(s.add_linearization(1.0, &[0.0], 0.0, &[1.0], &Scaled).is_ok());
    }

    #[test]
    fn known_l_examples() {
        assert_eq!(solve_coef_smooth_known_l(0.0, 1.0), 1.0);
        assert!(close(solve_coef_smooth_known_l(0.75, 1.0), 1.5, 1e-15));
        let a = solve_coef_smooth_known_l(2.0, 2.0);
        assert!(close(a, (1.0 + 17f64.sqrt()) / 4.0, 1e-15));
        assert!((2.0 * a * a - a - 2.0).abs() < 1e-14);
    }

    #[test]
    fn sc_known_l_satisfies_equation() {
        let (a_sum, tau, mu, l) = (3.0, 4.0, 1.0, 100.0);
        let a = solve_coef_sc_known_l(a_sum, tau, mu, l);
        let lhs = a * a * l;
        let rhs = (tau + mu * a) * (a_sum + a);
        assert!(close(lhs, rhs, 1e-13));
        assert_eq!(solve_coef_sc_known_l(0.0, 1.0, 0.0, 1.0), 1.0);
    }

    #[test]
    fn linesearch_examples() {
        assert!(close(
            solve_coef_smooth_linesearch(0.0, 1.0, 0.5, 1.0).unwrap(),
            1.0,
            1e-15
        ));
        let a = solve_coef_smooth_linesearch(1.5, 1.0, 0.5, 1.0).unwrap();
        assert!(close(a, 0.5 + 1.75f64.sqrt(), 1e-15));
        assert!(close(1.0 - a * a / (2.0 * (1.5 + a)), 0.5, 1e-14));
        assert_eq!(
            solve_coef_smooth_linesearch(1.0, 1.0, 1.0, 2.0),
            Err(CoefError::NoDecrease)
        );
    }

    #[test]
    fn strongly_convex_examples() {
        let a = solve_coef_strongly_convex(&sc(1.0, -0.5, 0.0, 1.0, 1.0, 2.0, 0.0)).unwrap();
        assert!(close(a, 1.0 + 2f64.sqrt(), 1e-14));
        match solve_coef_strongly_convex(&sc(1.0, -0.5, 0.0, 1.0, 0.0, 1.0, 0.0)) {
            Err(CoefError::DegenerateQuadratic { linear_root }) => assert_eq!(linear_root, 0.0),
            other => panic!("expected DegenerateQuadratic, got {other:?}"),
        }
        assert_eq!(
            solve_coef_strongly_convex(&sc(1.0, -2.0, 0.0, 1.0, 1.0, 1.0, 0.0)),
            Err(CoefError::AlreadyOptimal)
        );
        assert_eq!(
            solve_coef_strongly_convex(&sc(1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0)),
            Err(CoefError::NoDecrease)
        );
        let inp = sc(0.0, -0.5, 0.0, 1.0, 1.5, 1.0, 0.3);
        assert_eq!(
            solve_coef_strongly_convex(&inp),
            solve_coef_smooth_linesearch(1.5, 0.0, -0.5, 1.0)
        );
    }

    #[test]
    fn universal_examples() {
        assert!(close(solve_coef_universal(0.0, -0.5, 0.0, 1.0).unwrap(), 1.0, 1e-15));
        assert!(close(solve_coef_universal(1.0, 0.0, 0.2, 1.0).unwrap(), 0.2, 1e-15));
        let a = solve_coef_universal(1.0, -0.5, 0.2, 1.0).unwrap();
        assert!(close(a, 0.6 + 1.36f64.sqrt(), 1e-15));
        assert_eq!(solve_coef_universal(1.0, 1.0, 0.2, 1.0), Err(CoefError::NoSolution));
    }

    #[test]
    fn universal_sc_example_and_reductions() {
        // (2(-0.6) + 2) a^2 + (2(-0.6) + 2(-0.5)) a + 2(-0.5) = 0
        let a = solve_coef_universal_sc(&sc(1.0, -0.5, 0.2, 1.0, 1.0, 2.0, 0.0)).unwrap();
        assert!(close(a, (2.2 + 8.04f64.sqrt()) / 1.6, 1e-14), "a = {a}");
        assert!((0.8 * a * a - 2.2 * a - 1.0).abs() < 1e-12);

        let inp = sc(0.0, -0.3, 0.1, 1.0, 2.0, 1.5, 0.7);
        assert_eq!(
            solve_coef_universal_sc(&inp),
            solve_coef_universal(2.0, -0.3, 0.1, 1.5f64.sqrt())
        );
        let inp = sc(1.0, -0.5, 0.0, 1.0, 1.0, 2.0, 0.0);
        assert_eq!(solve_coef_universal_sc(&inp), solve_coef_strongly_convex(&inp));
    }

    proptest! {
        #[test]
        fn psi_min_matches_direct_evaluation(
            mu in prop_oneof![Just(0.0), 0.01..10.0_f64],
            steps in prop::collection::vec(
                (0.01..5.0_f64, prop::collection::vec(-3.0..3.0_f64, 3), -2.0..2.0_f64, prop::collection::vec(-3.0..3.0_f64, 3)),
                1..12,
            ),
        ) {
            let mut s = EstimateState::new(&[0.5, -1.0, 0.25], mu);
            let mut a_prev = 0.0;
            for (a, y, f_y, g) in steps {
                s.add_linearization(a, &y, f_y, &g, &Euclidean).unwrap();
                prop_assert!(s.a_sum > a_prev);
                a_prev = s.a_sum;
                prop_assert!((s.tau - (1.0 + mu * s.a_sum)).abs() <= 1e-12 * s.tau);
                let direct = s.psi_at(&s.v, &Euclidean);
                prop_assert!((direct - s.psi_min).abs() <= 1e-10 * (1.0 + direct.abs()));
                // v minimizes: psi(v + t e) - psi(v) = tau t^2 / 2
                for i in 0..3 {
                    let mut p = s.v.clone();
                    p[i] += 1e-3;
                    let inc = s.psi_at(&p, &Euclidean) - direct;
                    prop_assert!((inc - 0.5 * s.tau * 1e-6).abs() <= 1e-9 * (1.0 + direct.abs()));
                }
            }
        }

        #[test]
        fn smooth_linesearch_substitution(a_sum in 0.0..1e3_f64, delta in 1e-6..10.0_f64, g in 1e-3..1e2_f64) {
            let a = solve_coef_smooth_linesearch(a_sum, 1.0, 1.0 - delta, g).unwrap();
            let resid = a * a * g * g / (2.0 * (a_sum + a)) - delta;
            prop_assert!(resid.abs() <= 1e-9 * delta);
        }
    }
}
