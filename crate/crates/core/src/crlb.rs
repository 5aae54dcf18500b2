//! Cramér-Rao lower bound for quantized Gaussian observations.

use crate::error::{Error, Result};
use crate::estimator::score_variance;
use crate::model::{cell_probs, cell_scores, GaussianNoise, QuantizerSpec};
use crate::numerics::{SymMatrix, Vector};
use crate::scalar::Scalar;

/// Fisher information `Σ h_i(x)² / H_i(x)` carried by one quantized
/// observation whose noise-free output is `x`. Never exceeds `1/σ²`.
pub fn rho<T: Scalar>(x: T, spec: &QuantizerSpec<T>, noise: &GaussianNoise<T>) -> T {
    score_variance(&cell_scores(x, spec, noise), &cell_probs(x, spec, noise).prob)
}

/// `rho(x) σ²` for thresholds spaced `spacing` standard deviations apart on
/// `[−span σ, span σ]`. Tends to one as the spacing shrinks.
pub fn refinement_ratio<T: Scalar>(noise: &GaussianNoise<T>, x: T, span: T, spacing: T) -> Result<T> {
    let sigma = noise.sigma();
    let spec = QuantizerSpec::uniform_grid(-span * sigma, span * sigma, spacing * sigma)?;
    Ok(rho(x, &spec, noise) * sigma * sigma)
}

/// Running Fisher information `Σ ρ_l φ_l φ_lᵀ` evaluated at the true parameter.
#[derive(Clone, Debug)]
pub struct CrlbAccumulator<T> {
    info: SymMatrix<T>,
    k: usize,
    spec: QuantizerSpec<T>,
    noise: GaussianNoise<T>,
}

impl<T: Scalar> CrlbAccumulator<T> {
    pub fn new(n: usize, spec: QuantizerSpec<T>, noise: GaussianNoise<T>) -> Result<Self> {
        Ok(CrlbAccumulator {
            info: SymMatrix::zeros(n)?,
            k: 0,
            spec,
            noise,
        })
    }

    pub fn info(&self) -> &SymMatrix<T> {
        &self.info
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Adds one observation with regressor `phi` and true output `x_true = φᵀθ`.
    /// Returns the information weight `ρ` used.
    pub fn accumulate(&mut self, phi: &[T], x_true: T) -> Result<T> {
        if phi.len() != self.info.order() {
            return Err(Error::DimensionMismatch {
                expected: self.info.order(),
                found: phi.len(),
            });
        }
        let r = rho(x_true, &self.spec, &self.noise);
        self.info.add_outer(r, phi);
        self.k += 1;
        Ok(r)
    }

    /// `Δ_k`, the inverse of the accumulated information.
    pub fn bound(&self) -> Result<SymMatrix<T>> {
        self.info.inverse().map_err(|e| match e {
            Error::NotPositiveDefinite { pivot } => Error::Insufficient(format!(
                "Fisher information after {} observations is singular (pivot {pivot}); regressors are not exciting enough",
                self.k
            )),
            other => other,
        })
    }
}

/// Runs the Sherman-Morrison recursion
/// `Δ_k = Δ_{k−1} − ρ Δ_{k−1}φφᵀΔ_{k−1} / (1 + ρ φᵀΔ_{k−1}φ)` over a stored
/// `(ρ_k, φ_k)` history and compares it with the direct inverse after every
/// step. Returns the largest elementwise absolute difference.
///
/// With a `prior`, the recursion starts from `Δ_0 = prior` (information
/// `prior⁻¹`). Without one it starts at the first step, no earlier than
/// the `n`-th, where the accumulated information is positive definite.
pub fn bound_recursive_check<T: Scalar>(history: &[(T, Vector<T>)], prior: Option<&SymMatrix<T>>) -> Result<T> {
    let n = match (prior, history.first()) {
        (Some(p), _) => p.order(),
        (None, Some((_, phi))) => phi.len(),
        (None, None) => return Err(Error::Insufficient("empty history".into())),
    };
    let mut info = match prior {
        Some(p) => p.inverse()?,
        None => SymMatrix::zeros(n)?,
    };
    let mut recursive: Option<SymMatrix<T>> = prior.cloned();
    let mut worst = T::zero();
    let mut compared = 0usize;
    for (k, (r, phi)) in history.iter().enumerate() {
        if phi.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: phi.len(),
            });
        }
        info.add_outer(*r, phi);
        match recursive.as_mut() {
            Some(delta) => {
                let d_phi = delta.mul_vec(phi);
                let denom = T::one() + *r * d_phi.dot(phi);
                delta.add_outer(-*r / denom, &d_phi);
                let direct = info.inverse()?;
                worst = worst.max(delta.max_abs_diff(&direct));
                compared += 1;
            }
            // fewer than n rank-one terms are singular however the pivots round
            None if k + 1 >= n => {
                if let Ok(inv) = info.inverse() {
                    recursive = Some(inv);
                }
            }
            None => {}
        }
    }
    if compared == 0 && recursive.is_none() {
        return Err(Error::Insufficient("information never became positive definite".into()));
    }
    Ok(worst)
}
