use crate::error::{Error, Result};
use crate::model::{cell_probs, cell_scores, BoxDomain, GaussianNoise, QuantizerSpec};
use crate::scalar::Scalar;

/// Constant conversion weights `α_1 < … < α_{m+1}` and gain weight `β`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstantWeights<T> {
    alphas: Vec<T>,
    beta: T,
}

impl<T: Scalar> ConstantWeights<T> {
    pub fn new(alphas: Vec<T>, beta: T) -> Result<Self> {
        if alphas.len() < 2 {
            return Err(Error::config(
                "alphas",
                "need at least two weights (one per sensor level)",
            ));
        }
        if alphas.iter().any(|a| !a.is_finite()) {
            return Err(Error::config("alphas", "weights must be finite"));
        }
        if let Some(i) = alphas.windows(2).position(|w| !(w[0] < w[1])) {
            return Err(Error::config(
                "alphas",
                format!("ordering violated: alpha_{} >= alpha_{}", i + 1, i + 2),
            ));
        }
        if !(beta > T::zero()) || !beta.is_finite() {
            return Err(Error::config(
                "beta",
                format!("must be finite and positive, got {beta}"),
            ));
        }
        Ok(ConstantWeights { alphas, beta })
    }

    pub fn from_f64(alphas: &[f64], beta: f64) -> Result<Self> {
        Self::new(alphas.iter().map(|&a| T::lit(a)).collect(), T::lit(beta))
    }

    pub fn alphas(&self) -> &[T] {
        &self.alphas
    }

    pub fn beta(&self) -> T {
        self.beta
    }
}

/// Weights of the information-based estimator at one step.
#[derive(Clone, Debug, PartialEq)]
pub struct IbidWeights<T> {
    /// Score of each cell, `−h_i / H_i`.
    pub alphas: Vec<T>,
    /// Fisher weight `Σ h_i² / H_i`.
    pub beta: T,
}

/// Adaptive weights evaluated at the predicted output `x_hat = φᵀθ̂`.
pub fn ibid_weights<T: Scalar>(x_hat: T, spec: &QuantizerSpec<T>, noise: &GaussianNoise<T>) -> IbidWeights<T> {
    let alphas = cell_scores(x_hat, spec, noise);
    let beta = score_variance(&alphas, &cell_probs(x_hat, spec, noise).prob);
    IbidWeights { alphas, beta }
}

/// `Σ α_i² H_i`, equal to `Σ h_i² / H_i` when `α_i = −h_i / H_i`.
pub(crate) fn score_variance<T: Scalar>(scores: &[T], prob: &[T]) -> T {
    scores.iter().zip(prob).map(|(&a, &p)| a * a * p).sum()
}

/// Diagnostic check of constant weights against the sufficient conditions
/// for mean-square convergence. Never blocks a run.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightReport {
    /// One weight per sensor level.
    pub length_ok: bool,
    /// First index `i` (1-based) with `α_i >= α_{i+1}`.
    pub ordering_violation: Option<usize>,
    /// `α_{m+1} − α_1`.
    pub gap: f64,
    pub gap_ok: bool,
    pub beta_ok: bool,
    /// Smallest noise density over the threshold neighbourhoods
    /// `[C_i − φ̄θ̄, C_i + φ̄θ̄]`.
    pub f_min: f64,
    /// `(2 gap / β) f_min`
    pub contraction_lhs: f64,
    /// `1 − 1/n`
    pub contraction_rhs: f64,
    pub contraction_ok: bool,
}

impl WeightReport {
    /// Structural conditions (length, ordering, gap, β). A violation makes
    /// the schedule unusable.
    pub fn is_admissible(&self) -> bool {
        self.length_ok && self.ordering_violation.is_none() && self.gap_ok && self.beta_ok
    }

    /// Human-readable list of every failed condition, structural or not.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.length_ok {
            out.push("length: number of alphas must equal the number of sensor levels".to_string());
        }
        if let Some(i) = self.ordering_violation {
            out.push(format!("ordering: alpha_{} >= alpha_{}", i, i + 1));
        }
        if !self.gap_ok {
            out.push(format!("gap: alpha_(m+1) - alpha_1 = {} is not positive", self.gap));
        }
        if !self.beta_ok {
            out.push("beta: must be finite and positive".to_string());
        }
        if !self.contraction_ok {
            out.push(format!(
                "contraction: (2*gap/beta)*f_min = {:.6e} does not exceed 1 - 1/n = {:.6}",
                self.contraction_lhs, self.contraction_rhs
            ));
        }
        out
    }
}

pub fn validate_wqnp_weights<T: Scalar>(
    alphas: &[T],
    beta: T,
    domain: &BoxDomain<T>,
    phi_bar: T,
    spec: &QuantizerSpec<T>,
    noise: &GaussianNoise<T>,
    n: usize,
) -> WeightReport {
    let length_ok = alphas.len() == spec.levels();
    let ordering_violation = alphas.windows(2).position(|w| !(w[0] < w[1])).map(|i| i + 1);
    let gap = match (alphas.first(), alphas.last()) {
        (Some(&a), Some(&b)) => (b - a).as_f64(),
        _ => 0.0,
    };
    let gap_ok = gap > 0.0 && gap.is_finite();
    let beta_ok = beta > T::zero() && beta.is_finite();

    // The Gaussian density is smallest at the endpoint farthest from zero.
    let radius = phi_bar * domain.theta_bar();
    let f_min = spec
        .thresholds()
        .iter()
        .map(|&c| noise.pdf(c.abs() + radius))
        .fold(T::infinity(), T::min)
        .as_f64();
    let beta_f = beta.as_f64();
    let contraction_lhs = if beta_ok { 2.0 * gap / beta_f * f_min } else { f64::NAN };
    let contraction_rhs = 1.0 - 1.0 / n.max(1) as f64;
    WeightReport {
        length_ok,
        ordering_violation,
        gap,
        gap_ok,
        beta_ok,
        f_min,
        contraction_lhs,
        contraction_rhs,
        contraction_ok: contraction_lhs > contraction_rhs,
    }
}
