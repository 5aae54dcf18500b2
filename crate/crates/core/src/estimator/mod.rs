//! Weighted Quasi-Newton projection estimators with constant (WQNP) or
//! information-based adaptive (IBID) weights.

mod projection;
mod weights;

pub use projection::project;
pub(crate) use weights::score_variance;
pub use weights::{ibid_weights, validate_wqnp_weights, ConstantWeights, IbidWeights, WeightReport};

use crate::error::{Error, Result};
use crate::model::{cell_probs, BoxDomain, GaussianNoise, QuantizerSpec};
use crate::numerics::{rank_one_downdate, SymMatrix, Vector};
use crate::scalar::Scalar;

/// What the estimator knows about the sensor, the noise and the prior box.
#[derive(Clone, Debug)]
pub struct ObservationModel<T> {
    pub quantizer: QuantizerSpec<T>,
    pub noise: GaussianNoise<T>,
    pub domain: BoxDomain<T>,
}

/// Estimate, gain matrix and its inverse accumulated as `P_0⁻¹ + Σ β φφᵀ`.
///
/// The initial estimate may lie outside the box; every estimate produced
/// by a projected step lies inside it.
#[derive(Clone, Debug)]
pub struct EstimatorState<T> {
    pub theta_hat: Vector<T>,
    pub p: SymMatrix<T>,
    pub p_inv: SymMatrix<T>,
    pub k: usize,
}

impl<T: Scalar> EstimatorState<T> {
    pub fn new(theta0: Vector<T>, p0: SymMatrix<T>, domain: &BoxDomain<T>) -> Result<Self> {
        if theta0.len() != domain.dim() {
            return Err(Error::config(
                "theta0",
                format!("has {} coordinates but the box has {}", theta0.len(), domain.dim()),
            ));
        }
        if !theta0.is_finite() {
            return Err(Error::config("theta0", "initial estimate must be finite"));
        }
        if p0.order() != theta0.len() {
            return Err(Error::DimensionMismatch {
                expected: theta0.len(),
                found: p0.order(),
            });
        }
        let p_inv = p0.inverse()?;
        Ok(EstimatorState {
            theta_hat: theta0,
            p: p0,
            p_inv,
            k: 0,
        })
    }

    /// `θ̂_0 = theta0` (box centre if `None`) and `P_0 = scale · I`.
    pub fn with_scaled_identity(theta0: Option<Vector<T>>, p0_scale: T, domain: &BoxDomain<T>) -> Result<Self> {
        if !(p0_scale > T::zero()) || !p0_scale.is_finite() {
            return Err(Error::config("p0_scale", "must be finite and positive"));
        }
        let theta0 = theta0.unwrap_or_else(|| domain.center());
        let p0 = SymMatrix::scaled_identity(domain.dim(), p0_scale)?;
        Self::new(theta0, p0, domain)
    }
}

/// Trace of one recursion step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord<T> {
    pub k: usize,
    pub q: usize,
    /// Converted observation `α_{q+1}`.
    pub s: T,
    pub s_tilde: T,
    pub a: T,
    pub alphas: Vec<T>,
    pub beta: T,
}

/// Weight of the observed level.
pub fn convert<T: Scalar>(q: usize, alphas: &[T]) -> Result<T> {
    alphas
        .get(q)
        .copied()
        .ok_or_else(|| Error::Domain(format!("level {q} out of range for {} weights", alphas.len())))
}

/// `α_{q+1} − Σ α_i Ĥ_i`
pub fn innovation<T: Scalar>(q: usize, alphas: &[T], h_hat: &[T]) -> Result<T> {
    if alphas.len() != h_hat.len() {
        return Err(Error::DimensionMismatch {
            expected: alphas.len(),
            found: h_hat.len(),
        });
    }
    let predicted: T = alphas.iter().zip(h_hat).map(|(&a, &h)| a * h).sum();
    Ok(convert(q, alphas)? - predicted)
}

fn check_step_inputs<T: Scalar>(
    state: &EstimatorState<T>,
    phi: &[T],
    q: usize,
    model: &ObservationModel<T>,
) -> Result<()> {
    if phi.len() != state.theta_hat.len() {
        return Err(Error::DimensionMismatch {
            expected: state.theta_hat.len(),
            found: phi.len(),
        });
    }
    if q >= model.quantizer.levels() {
        return Err(Error::Domain(format!(
            "level {q} out of range for a sensor with {} levels",
            model.quantizer.levels()
        )));
    }
    Ok(())
}

/// Shared gain recursion and projected update. The update direction uses
/// the previous `P`; the projection metric is the updated `P⁻¹`.
fn gain_update<T: Scalar>(
    state: &mut EstimatorState<T>,
    phi: &[T],
    s_tilde: T,
    beta: T,
    domain: &BoxDomain<T>,
    project_onto_box: bool,
) -> Result<T> {
    let (p_next, a) = rank_one_downdate(&state.p, phi, beta)?;
    let p_phi = state.p.mul_vec(phi);
    let candidate = state.theta_hat.add_scaled(a * s_tilde, &p_phi);
    state.p_inv.add_outer(beta, phi);
    state.theta_hat = if project_onto_box {
        project(&candidate, &state.p_inv, domain)?
    } else {
        candidate
    };
    state.p = p_next;
    state.k += 1;
    Ok(a)
}

/// One step of the constant-weight estimator.
pub fn wqnp_step<T: Scalar>(
    state: &mut EstimatorState<T>,
    phi: &[T],
    q: usize,
    weights: &ConstantWeights<T>,
    model: &ObservationModel<T>,
) -> Result<StepRecord<T>> {
    wqnp_step_inner(state, phi, q, weights, model, true)
}

fn wqnp_step_inner<T: Scalar>(
    state: &mut EstimatorState<T>,
    phi: &[T],
    q: usize,
    weights: &ConstantWeights<T>,
    model: &ObservationModel<T>,
    project_onto_box: bool,
) -> Result<StepRecord<T>> {
    check_step_inputs(state, phi, q, model)?;
    if weights.alphas().len() != model.quantizer.levels() {
        return Err(Error::DimensionMismatch {
            expected: model.quantizer.levels(),
            found: weights.alphas().len(),
        });
    }
    let x_hat = state.theta_hat.dot(phi);
    let cp = cell_probs(x_hat, &model.quantizer, &model.noise);
    let s = convert(q, weights.alphas())?;
    let s_tilde = innovation(q, weights.alphas(), &cp.prob)?;
    let a = gain_update(state, phi, s_tilde, weights.beta(), &model.domain, project_onto_box)?;
    Ok(StepRecord {
        k: state.k,
        q,
        s,
        s_tilde,
        a,
        alphas: weights.alphas().to_vec(),
        beta: weights.beta(),
    })
}

/// One step of the information-based estimator. The predicted mean of the
/// converted observation is identically zero, so the innovation is the
/// score of the observed cell.
pub fn ibid_step<T: Scalar>(
    state: &mut EstimatorState<T>,
    phi: &[T],
    q: usize,
    model: &ObservationModel<T>,
) -> Result<StepRecord<T>> {
    ibid_step_inner(state, phi, q, model, true)
}

fn ibid_step_inner<T: Scalar>(
    state: &mut EstimatorState<T>,
    phi: &[T],
    q: usize,
    model: &ObservationModel<T>,
    project_onto_box: bool,
) -> Result<StepRecord<T>> {
    check_step_inputs(state, phi, q, model)?;
    let x_hat = state.theta_hat.dot(phi);
    let w = ibid_weights(x_hat, &model.quantizer, &model.noise);
    let s = convert(q, &w.alphas)?;
    let a = gain_update(state, phi, s, w.beta, &model.domain, project_onto_box)?;
    Ok(StepRecord {
        k: state.k,
        q,
        s,
        s_tilde: s,
        a,
        alphas: w.alphas,
        beta: w.beta,
    })
}

/// Weighting rule of an estimator.
#[derive(Clone, Debug)]
pub enum Method<T> {
    Wqnp(ConstantWeights<T>),
    Ibid,
}

impl<T> Method<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Wqnp(_) => "wqnp",
            Method::Ibid => "ibid",
        }
    }
}

/// Estimator bound to an observation model.
#[derive(Clone, Debug)]
pub struct Estimator<T> {
    pub model: ObservationModel<T>,
    pub method: Method<T>,
    project_onto_box: bool,
}

impl<T: Scalar> Estimator<T> {
    pub fn new(model: ObservationModel<T>, method: Method<T>) -> Result<Self> {
        if let Method::Wqnp(w) = &method {
            if w.alphas().len() != model.quantizer.levels() {
                return Err(Error::config(
                    "alphas",
                    format!(
                        "expected {} weights (one per sensor level), got {}",
                        model.quantizer.levels(),
                        w.alphas().len()
                    ),
                ));
            }
        }
        Ok(Estimator {
            model,
            method,
            project_onto_box: true,
        })
    }

    /// Disables the projection step. Only for studying the unprojected
    /// recursion; estimates may leave the box.
    pub fn without_projection(mut self) -> Self {
        self.project_onto_box = false;
        self
    }

    pub fn step(&self, state: &mut EstimatorState<T>, phi: &[T], q: usize) -> Result<StepRecord<T>> {
        match &self.method {
            Method::Wqnp(w) => wqnp_step_inner(state, phi, q, w, &self.model, self.project_onto_box),
            Method::Ibid => ibid_step_inner(state, phi, q, &self.model, self.project_onto_box),
        }
    }
}
