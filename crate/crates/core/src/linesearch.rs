//! One-dimensional minimization: segment search for the coupling step,
//! ray search for the steepest-descent step, and an exact search for quartic
//! restrictions.

use thiserror::Error;

const GOLDEN: f64 = 0.381_966_011_250_105_1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchConfig {
    /// Abscissa tolerance. Interval searches use `tol * (1 + |hi - lo|)`;
    /// ray searches use it relative to the final bracket.
    pub tol: f64,
    pub max_evals: usize,
    /// Geometric factor of the ray bracketing phase.
    pub bracket_growth: f64,
}

impl Default for LineSearchConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_evals: 200,
            bracket_growth: 2.0,
        }
    }
}

impl LineSearchConfig {
    pub fn validate(&self) -> Result<(), LineSearchError> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(LineSearchError::InvalidConfig("tol must be positive"));
        }
        if self.max_evals < 3 {
            return Err(LineSearchError::InvalidConfig("max_evals must be at least 3"));
        }
        if !(self.bracket_growth > 1.0 && self.bracket_growth.is_finite()) {
            return Err(LineSearchError::InvalidConfig("bracket_growth must exceed 1"));
        }
        Ok(())
    }

    pub fn tightened(&self, factor: f64) -> Self {
        Self {
            tol: self.tol / factor,
            ..*self
        }
    }
}

/// Result of a scalar search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineMin {
    pub t: f64,
    pub value: f64,
    pub evals: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum LineSearchError {
    /// The evaluation budget ran out; carries the best point seen.
    #[error("line search budget exceeded after {} evaluations", .0.evals)]
    BudgetExceeded(LineMin),
    /// No probed step improved on `phi(0)`.
    #[error("no descent along the ray after {evals} evaluations")]
    NoDescent { evals: usize },
    #[error("invalid line search config: {0}")]
    InvalidConfig(&'static str),
}

impl LineSearchError {
    /// Best point available despite the error, if any.
    pub fn best(&self) -> Option<LineMin> {
        match self {
            LineSearchError::BudgetExceeded(m) => Some(*m),
            _ => None,
        }
    }
}

struct Brent {
    t: f64,
    value: f64,
    evals: usize,
    converged: bool,
}

/// Brent's method (golden section with parabolic steps) on `[a, b]`.
fn brent<F: FnMut(f64) -> f64>(phi: &mut F, mut a: f64, mut b: f64, xtol: f64, budget: usize) -> Brent {
    let mut x = a + GOLDEN * (b - a);
    let mut w = x;
    let mut v = x;
    let mut fx = phi(x);
    let mut fw = fx;
    let mut fv = fx;
    let mut evals = 1;
    let mut d = 0.0_f64;
    let mut e = 0.0_f64;

    loop {
        let m = 0.5 * (a + b);
        let tol1 = 0.5 * xtol + f64::EPSILON * x.abs();
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            return Brent {
                t: x,
                value: fx,
                evals,
                converged: true,
            };
        }
        if evals >= budget {
            return Brent {
                t: x,
                value: fx,
                evals,
                converged: false,
            };
        }

        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            } else {
                q = -q;
            }
            let e_prev = e;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < m { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x < m { b - x } else { a - x };
            d = GOLDEN * e;
        }

        let u = if d.abs() >= tol1 {
            x + d
        } else if d > 0.0 {
            x + tol1
        } else {
            x - tol1
        };
        let fu = phi(u);
        evals += 1;

        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
}

/// Minimizes `phi` over `[lo, hi]`.
///
/// The returned value never exceeds `min(phi(lo), phi(hi))`; an endpoint wins
/// whenever it is strictly better than the interior estimate.
pub fn minimize_on_interval<F: FnMut(f64) -> f64>(
    mut phi: F,
    lo: f64,
    hi: f64,
    cfg: &LineSearchConfig,
) -> Result<LineMin, LineSearchError> {
    cfg.validate()?;
    assert!(lo < hi, "interval must satisfy lo < hi");
    let f_lo = phi(lo);
    let f_hi = phi(hi);
    let xtol = cfg.tol * (1.0 + (hi - lo).abs());
    let inner = brent(&mut phi, lo, hi, xtol, cfg.max_evals - 2);

    let mut best = LineMin {
        t: inner.t,
        value: inner.value,
        evals: inner.evals + 2,
    };
    for (t, f) in [(lo, f_lo), (hi, f_hi)] {
        if f < best.value || best.value.is_nan() {
            best.t = t;
            best.value = f;
        }
    }
    if inner.converged {
        Ok(best)
    } else {
        Err(LineSearchError::BudgetExceeded(best))
    }
}

/// Minimizes `phi` over `h >= 0` by geometric bracketing from `cfg.tol`
/// followed by interval refinement. When the first probe fails to descend the
/// probes contract toward zero instead.
///
/// Bracketing walks across flat stretches, and the refinement only replaces
/// the bracketing probe when strictly better, so on a plateau of minimizers
/// the step lands well inside it rather than at its near edge.
pub fn minimize_on_ray<F: FnMut(f64) -> f64>(mut phi: F, cfg: &LineSearchConfig) -> Result<LineMin, LineSearchError> {
    cfg.validate()?;
    let rho = cfg.bracket_growth;
    let f0 = phi(0.0);
    let mut evals = 1;

    let mut h = cfg.tol;
    let mut fh = phi(h);
    evals += 1;

    // (lo, mid, hi) with phi(mid) < phi(lo) and phi(mid) <= phi(hi)
    let (lo, mid, fmid, hi);
    if fh < f0 {
        let (mut prev, mut cur, mut fcur) = (0.0, h, fh);
        loop {
            if evals >= cfg.max_evals {
                return Err(LineSearchError::BudgetExceeded(LineMin {
                    t: cur,
                    value: fcur,
                    evals,
                }));
            }
            let next = cur * rho;
            let fnext = phi(next);
            evals += 1;
            if !(fnext <= fcur) {
                lo = prev;
                mid = cur;
                fmid = fcur;
                hi = next;
                break;
            }
            prev = cur;
            cur = next;
            fcur = fnext;
        }
    } else {
        let mut upper = h;
        loop {
            if evals >= cfg.max_evals || h < 1e-300 {
                return Err(LineSearchError::NoDescent { evals });
            }
            h /= rho;
            fh = phi(h);
            evals += 1;
            if fh < f0 {
                lo = 0.0;
                mid = h;
                fmid = fh;
                hi = upper;
                break;
            }
            upper = h;
        }
    }

    let xtol = cfg.tol * hi;
    let budget = cfg.max_evals.saturating_sub(evals).max(1);
    let inner = brent(&mut phi, lo, hi, xtol, budget);
    evals += inner.evals;
    let mut best = LineMin {
        t: mid,
        value: fmid,
        evals,
    };
    if inner.value < best.value {
        best.t = inner.t;
        best.value = inner.value;
    }
    if inner.converged {
        Ok(best)
    } else {
        Err(LineSearchError::BudgetExceeded(best))
    }
}

/// Real roots of `c0 + c1 h + c2 h^2 + c3 h^3`, polished by Newton steps.
pub fn cubic_real_roots(c: [f64; 4]) -> Vec<f64> {
    let scale = c.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return vec![0.0];
    }
    let tiny = 1e-14 * scale;
    let mut roots = Vec::with_capacity(3);
    if c[3].abs() > tiny {
        let (a, b, cc) = (c[2] / c[3], c[1] / c[3], c[0] / c[3]);
        // depressed cubic t^3 + p t + q with h = t - a/3
        let shift = a / 3.0;
        let p = b - a * a / 3.0;
        let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + cc;
        let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
        if disc > 0.0 {
            let s = disc.sqrt();
            let u = (-q / 2.0 + s).cbrt();
            let v = (-q / 2.0 - s).cbrt();
            roots.push(u + v - shift);
        } else if p == 0.0 {
            roots.push(-shift);
        } else {
            let r = (-p / 3.0).sqrt();
            let arg = (3.0 * q / (2.0 * p) / r).clamp(-1.0, 1.0);
            let theta = arg.acos() / 3.0;
            for k in 0..3 {
                let t = 2.0 * r * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos();
                roots.push(t - shift);
            }
        }
    } else if c[2].abs() > tiny {
        let disc = c[1] * c[1] - 4.0 * c[2] * c[0];
        if disc >= 0.0 {
            let sq = disc.sqrt();
            let q = -0.5 * (c[1] + c[1].signum() * sq);
            if q != 0.0 {
                roots.push(q / c[2]);
                roots.push(c[0] / q);
            } else {
                roots.push(0.0);
            }
        }
    } else if c[1].abs() > tiny {
        roots.push(-c[0] / c[1]);
    }

    for r in roots.iter_mut() {
        for _ in 0..3 {
            let f = c[0] + *r * (c[1] + *r * (c[2] + *r * c[3]));
            let df = c[1] + *r * (2.0 * c[2] + *r * 3.0 * c[3]);
            if df == 0.0 || !df.is_finite() {
                break;
            }
            let step = f / df;
            if !step.is_finite() {
                break;
            }
            *r -= step;
        }
    }
    roots
}

/// Exact minimization over `h >= 0` of a quartic `phi` given the coefficients
/// of its derivative. Candidates are `h = 0` and the nonnegative real roots;
/// ties within rounding go to the larger step.
pub fn minimize_cubic_ray<F: FnMut(f64) -> f64>(dphi: [f64; 4], mut phi: F) -> LineMin {
    let mut best = LineMin {
        t: 0.0,
        value: phi(0.0),
        evals: 1,
    };
    for r in cubic_real_roots(dphi) {
        if !(r >= 0.0) || !r.is_finite() {
            continue;
        }
        let v = phi(r);
        best.evals += 1;
        let slack = 1e-12 * (v.abs().max(best.value.abs()) + 1e-300);
        if v < best.value - slack || (v <= best.value + slack && r > best.t) {
            best.t = r;
            best.value = v;
        }
    }
    best
}

/// Derivative coefficients of a quartic given as `[c0, .., c4]`.
pub fn quartic_derivative(c: [f64; 5]) -> [f64; 4] {
    [c[1], 2.0 * c[2], 3.0 * c[3], 4.0 * c[4]]
}
