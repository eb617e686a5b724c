//! Benchmark objectives with analytic gradients and known optima.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::oracle::Objective;

/// A test objective together with its starting point and whatever is known
/// about its solution and constants.
pub struct NamedProblem {
    pub name: String,
    pub params: String,
    pub oracle: Box<dyn Objective + Send + Sync>,
    pub x0: Vec<f64>,
    pub f_star: Option<f64>,
    pub x_star: Option<Vec<f64>>,
    pub lipschitz: Option<f64>,
    pub mu: Option<f64>,
}

impl NamedProblem {
    /// `||x0 - x*||_2` when the solution is known.
    pub fn radius(&self) -> Option<f64> {
        let xs = self.x_star.as_ref()?;
        Some(crate::vector::dist2(&self.x0, xs).sqrt())
    }
}

impl std::fmt::Debug for NamedProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NamedProblem")
            .field("name", &self.name)
            .field("params", &self.params)
            .field("f_star", &self.f_star)
            .field("lipschitz", &self.lipschitz)
            .field("mu", &self.mu)
            .finish_non_exhaustive()
    }
}

impl Objective for NamedProblem {
    fn dim(&self) -> usize {
        self.oracle.dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.oracle.value(x)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.oracle.gradient(x)
    }
    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        self.oracle.value_and_gradient(x)
    }
    fn line_polynomial(&self, x: &[f64], d: &[f64]) -> Option<[f64; 5]> {
        self.oracle.line_polynomial(x, d)
    }
}

/// `L/8 (x_1^2 + sum (x_i - x_{i+1})^2 + x_n^2) - L/4 x_1`.
#[derive(Debug, Clone)]
pub struct NesterovWorst {
    n: usize,
    l: f64,
}

impl Objective for NesterovWorst {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &[f64]) -> f64 {
        let n = self.n;
        let mut s = x[0] * x[0] + x[n - 1] * x[n - 1];
        for i in 0..n - 1 {
            let d = x[i] - x[i + 1];
            s += d * d;
        }
        self.l / 8.0 * s - self.l / 4.0 * x[0]
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let c = self.l / 4.0;
        let mut g: Vec<f64> = (0..n)
            .map(|i| {
                let left = if i > 0 { x[i - 1] } else { 0.0 };
                let right = if i + 1 < n { x[i + 1] } else { 0.0 };
                c * (2.0 * x[i] - left - right)
            })
            .collect();
        g[0] -= c;
        g
    }
}

/// Solves a tridiagonal system with the Thomas algorithm.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = if n > 1 { sup[0] / diag[0] } else { 0.0 };
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - sub[i - 1] * c[i - 1];
        if i < n - 1 {
            c[i] = sup[i] / m;
        }
        d[i] = (rhs[i] - sub[i - 1] * d[i - 1]) / m;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    x
}

pub fn nesterov_worst(n: usize, l: f64) -> NamedProblem {
    assert!(n >= 2, "nesterov_worst needs n >= 2");
    assert!(l > 0.0, "L must be positive");
    // Hessian (L/4) tridiag(-1, 2, -1), linear term (L/4) e_1
    let c = l / 4.0;
    let mut rhs = vec![0.0; n];
    rhs[0] = c;
    let x_star = solve_tridiagonal(&vec![-c; n - 1], &vec![2.0 * c; n], &vec![-c; n - 1], &rhs);
    let f_star = -0.5 * c * x_star[0];
    NamedProblem {
        name: "nesterov".into(),
        params: format!("n={n},L={l}"),
        oracle: Box::new(NesterovWorst { n, l }),
        x0: vec![0.0; n],
        f_star: Some(f_star),
        x_star: Some(x_star),
        lipschitz: Some(l),
        mu: None,
    }
}

/// `max_i x_i^2`.
#[derive(Debug, Clone)]
pub struct MaxQ {
    n: usize,
}

impl MaxQ {
    fn argmax(x: &[f64]) -> usize {
        let mut j = 0;
        for (i, v) in x.iter().enumerate() {
            if v * v > x[j] * x[j] {
                j = i;
            }
        }
        j
    }
}

impl Objective for MaxQ {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &[f64]) -> f64 {
        x.iter().fold(0.0_f64, |m, v| m.max(v * v))
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.n];
        let j = Self::argmax(x);
        g[j] = 2.0 * x[j];
        g
    }
}

pub fn maxq(n: usize) -> NamedProblem {
    assert!(n >= 2 && n.is_multiple_of(2), "maxq needs an even n >= 2");
    let x0 = (1..=n)
        .map(|i| if i <= n / 2 { i as f64 } else { -(i as f64) })
        .collect();
    NamedProblem {
        name: "maxq".into(),
        params: format!("n={n}"),
        oracle: Box::new(MaxQ { n }),
        x0,
        f_star: Some(0.0),
        x_star: Some(vec![0.0; n]),
        lipschitz: None,
        mu: None,
    }
}

/// `1/4 (x_1 - 1)^2 + sum_{i<n} (x_{i+1} - 2 x_i^2 + 1)^2`.
#[derive(Debug, Clone)]
pub struct ChainedNonconvex {
    n: usize,
}

impl Objective for ChainedNonconvex {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &[f64]) -> f64 {
        let mut s = 0.25 * (x[0] - 1.0) * (x[0] - 1.0);
        for i in 0..self.n - 1 {
            let r = x[i + 1] - 2.0 * x[i] * x[i] + 1.0;
            s += r * r;
        }
        s
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.n];
        g[0] = 0.5 * (x[0] - 1.0);
        for i in 0..self.n - 1 {
            let r = x[i + 1] - 2.0 * x[i] * x[i] + 1.0;
            g[i] -= 8.0 * r * x[i];
            g[i + 1] += 2.0 * r;
        }
        g
    }

    fn line_polynomial(&self, x: &[f64], d: &[f64]) -> Option<[f64; 5]> {
        let u = x[0] - 1.0;
        let mut c = [0.25 * u * u, 0.5 * u * d[0], 0.25 * d[0] * d[0], 0.0, 0.0];
        for i in 0..self.n - 1 {
            let p0 = x[i + 1] - 2.0 * x[i] * x[i] + 1.0;
            let p1 = d[i + 1] - 4.0 * x[i] * d[i];
            let p2 = -2.0 * d[i] * d[i];
            c[0] += p0 * p0;
            c[1] += 2.0 * p0 * p1;
            c[2] += p1 * p1 + 2.0 * p0 * p2;
            c[3] += 2.0 * p1 * p2;
            c[4] += p2 * p2;
        }
        Some(c)
    }
}

pub fn chained_nonconvex(n: usize) -> NamedProblem {
    assert!(n >= 2, "chained_nonconvex needs n >= 2");
    NamedProblem {
        name: "chained".into(),
        params: format!("n={n}"),
        oracle: Box::new(ChainedNonconvex { n }),
        x0: vec![-1.0; n],
        f_star: Some(0.0),
        x_star: Some(vec![1.0; n]),
        lipschitz: None,
        mu: None,
    }
}

/// `1/2 sum d_j (x_j - s_j)^2`.
#[derive(Debug, Clone)]
pub struct SeparableQuadratic {
    spectrum: Vec<f64>,
    shift: Vec<f64>,
}

impl Objective for SeparableQuadratic {
    fn dim(&self) -> usize {
        self.spectrum.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let s: f64 = self
            .spectrum
            .iter()
            .zip(x.iter().zip(&self.shift))
            .map(|(d, (xi, si))| d * (xi - si) * (xi - si))
            .sum();
        0.5 * s
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.spectrum
            .iter()
            .zip(x.iter().zip(&self.shift))
            .map(|(d, (xi, si))| d * (xi - si))
            .collect()
    }
}

/// Diagonal quadratic with minimizer `shift`, started at the origin.
pub fn quadratic(spectrum: Vec<f64>, shift: Vec<f64>) -> NamedProblem {
    assert_eq!(spectrum.len(), shift.len(), "spectrum and shift lengths differ");
    assert!(!spectrum.is_empty(), "quadratic needs n >= 1");
    assert!(
        spectrum.iter().all(|d| *d >= 0.0 && d.is_finite()),
        "spectrum must be nonnegative"
    );
    let n = spectrum.len();
    let l = spectrum.iter().cloned().fold(f64::MIN, f64::max);
    let mu = spectrum.iter().cloned().fold(f64::MAX, f64::min);
    NamedProblem {
        name: "quadratic".into(),
        params: format!("n={n},mu={mu},L={l}"),
        x_star: Some(shift.clone()),
        oracle: Box::new(SeparableQuadratic { spectrum, shift }),
        x0: vec![0.0; n],
        f_star: Some(0.0),
        lipschitz: Some(l),
        mu: (mu > 0.0).then_some(mu),
    }
}

/// Spectrum `1, 2, .., n` with minimizer at all-ones.
pub fn quadratic_linear_spectrum(n: usize) -> NamedProblem {
    quadratic((1..=n).map(|i| i as f64).collect(), vec![1.0; n])
}

/// Spectrum evenly spaced on `[mu, L]` with minimizer at all-ones.
pub fn quadratic_conditioned(n: usize, mu: f64, l: f64) -> NamedProblem {
    assert!(n >= 2 && mu > 0.0 && l >= mu);
    let spectrum = (0..n).map(|j| mu + (l - mu) * j as f64 / (n - 1) as f64).collect();
    quadratic(spectrum, vec![1.0; n])
}

/// Spectrum drawn uniformly from `[mu, L]` (with both ends attained) and a
/// shift drawn uniformly from `[-1, 1]^n`.
pub fn random_quadratic(n: usize, mu: f64, l: f64, seed: u64) -> NamedProblem {
    assert!(n >= 2 && mu > 0.0 && l >= mu);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spectrum: Vec<f64> = (0..n).map(|_| rng.random_range(mu..=l)).collect();
    spectrum[0] = mu;
    spectrum[n - 1] = l;
    let shift = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let mut p = quadratic(spectrum, shift);
    p.params = format!("n={n},mu={mu},L={l},seed={seed}");
    p
}
