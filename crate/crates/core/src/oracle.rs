//! First-order oracle abstraction consumed by every solver.

use std::cell::Cell;

use crate::vector::norm_inf;

/// A function `f: R^n -> R` with a (sub)gradient oracle.
///
/// Implementations must be deterministic for a fixed `x` and must not cache
/// mutable evaluation state, so a single instance can back many concurrent runs.
/// For nonsmooth objectives `gradient` may return any subgradient.
pub trait Objective {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64]) -> Vec<f64>;

    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        (self.value(x), self.gradient(x))
    }

    /// Coefficients `[c0, c1, c2, c3, c4]` of `h -> f(x + h d)` when that
    /// restriction is a polynomial of degree at most four. Enables the exact
    /// cubic-root ray search.
    fn line_polynomial(&self, _x: &[f64], _d: &[f64]) -> Option<[f64; 5]> {
        None
    }
}

impl<T: Objective + ?Sized> Objective for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (**self).gradient(x)
    }
    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        (**self).value_and_gradient(x)
    }
    fn line_polynomial(&self, x: &[f64], d: &[f64]) -> Option<[f64; 5]> {
        (**self).line_polynomial(x, d)
    }
}

/// Wraps an objective and counts every value and gradient evaluation.
///
/// A combined `value_and_gradient` call counts as two.
pub struct Counted<'a, O: ?Sized> {
    inner: &'a O,
    calls: Cell<u64>,
}

impl<'a, O: Objective + ?Sized> Counted<'a, O> {
    pub fn new(inner: &'a O) -> Self {
        Self {
            inner,
            calls: Cell::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.get()
    }

    fn bump(&self, n: u64) {
        self.calls.set(self.calls.get() + n);
    }
}

impl<O: Objective + ?Sized> Objective for Counted<'_, O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.bump(1);
        self.inner.value(x)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.bump(1);
        self.inner.gradient(x)
    }
    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        self.bump(2);
        self.inner.value_and_gradient(x)
    }
    fn line_polynomial(&self, x: &[f64], d: &[f64]) -> Option<[f64; 5]> {
        self.inner.line_polynomial(x, d)
    }
}

/// Default finite-difference step `1e-6 * (1 + ||x||_inf)`.
pub fn default_fd_step(x: &[f64]) -> f64 {
    1e-6 * (1.0 + norm_inf(x))
}

/// Compares the analytic gradient against central differences with step `h`.
///
/// Returns the worst componentwise error, scaled by `max(1, |g_i|)`.
pub fn check_gradient<O: Objective + ?Sized>(oracle: &O, x: &[f64], h: f64) -> f64 {
    assert!(h > 0.0, "finite-difference step must be positive");
    let g = oracle.gradient(x);
    let mut probe = x.to_vec();
    let mut worst = 0.0_f64;
    for i in 0..x.len() {
        let xi = probe[i];
        probe[i] = xi + h;
        let fp = oracle.value(&probe);
        probe[i] = xi - h;
        let fm = oracle.value(&probe);
        probe[i] = xi;
        let fd = (fp - fm) / (2.0 * h);
        let err = (g[i] - fd).abs() / g[i].abs().max(1.0);
        worst = worst.max(err);
    }
    worst
}
