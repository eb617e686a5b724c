//! Proximal setups: a norm pair, the sharp map, a prox-function and its
//! Bregman divergence.

use thiserror::Error;

use crate::vector::{dist2, dot, norm2};

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ProxError {
    /// The dual norm of the argument vanished; the caller sits at a stationary point.
    #[error("zero gradient: dual norm vanished")]
    ZeroGradient,
}

/// A proximal setup `(||.||, ||.||_*, d, V)`.
///
/// The prox-function `d` is 1-strongly convex with respect to `norm` and has
/// minimum value zero.
pub trait ProxSetup {
    fn norm(&self, x: &[f64]) -> f64;

    fn dual_norm(&self, g: &[f64]) -> f64;

    /// `argmax_{||s|| <= 1} <g, s>`.
    fn sharp(&self, g: &[f64]) -> Result<Vec<f64>, ProxError>;

    fn prox_value(&self, x: &[f64]) -> f64;

    /// `V(x, z) = d(x) - d(z) - <grad d(z), x - z>`.
    fn bregman(&self, x: &[f64], z: &[f64]) -> f64;

    /// `argmin_x <g, x> + V(x, z)`.
    fn mirror_argmin(&self, g: &[f64], z: &[f64]) -> Vec<f64>;

    /// Strongly convex solver variants are only defined for the Euclidean setup.
    fn is_euclidean(&self) -> bool {
        false
    }
}

/// `||.||_2` with `d(x) = ||x||^2 / 2`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Euclidean;

impl ProxSetup for Euclidean {
    fn norm(&self, x: &[f64]) -> f64 {
        norm2(x)
    }

    fn dual_norm(&self, g: &[f64]) -> f64 {
        norm2(g)
    }

    fn sharp(&self, g: &[f64]) -> Result<Vec<f64>, ProxError> {
        let n = norm2(g);
        if n == 0.0 || !n.is_finite() {
            return Err(ProxError::ZeroGradient);
        }
        Ok(g.iter().map(|v| v / n).collect())
    }

    fn prox_value(&self, x: &[f64]) -> f64 {
        0.5 * dot(x, x)
    }

    fn bregman(&self, x: &[f64], z: &[f64]) -> f64 {
        0.5 * dist2(x, z)
    }

    fn mirror_argmin(&self, g: &[f64], z: &[f64]) -> Vec<f64> {
        z.iter().zip(g).map(|(zi, gi)| zi - gi).collect()
    }

    fn is_euclidean(&self) -> bool {
        true
    }
}
