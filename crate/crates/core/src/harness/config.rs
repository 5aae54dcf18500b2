use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{
    validate_wqnp_weights, ConstantWeights, Estimator, EstimatorState, Method, ObservationModel, WeightReport,
};
use crate::model::{
    example1, substream, BoxDomain, CyclicRegressors, Example1Regressors, GaussianNoise, QuantizerSpec,
    RegressorSource, TrueSystem,
};
use crate::numerics::Vector;
use crate::scalar::Scalar;

/// Number of points in the default logarithmic checkpoint grid.
pub const DEFAULT_CHECKPOINTS: usize = 40;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub system: SystemSection,
    pub regressors: RegressorSection,
    pub run: RunSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wqnp: Option<WqnpSection>,
    #[serde(default)]
    pub init: InitSection,
}

fn default_name() -> String {
    "experiment".to_string()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub thresholds: Vec<f64>,
    pub sigma: f64,
    pub theta: Vec<f64>,
    pub box_lo: Vec<f64>,
    pub box_hi: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegressorKind {
    /// `[1, u_k, u_{k−1}]` with the period-three jittered input.
    Example1,
    /// A fixed list of regressors repeated cyclically.
    Fixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressorSection {
    pub kind: RegressorKind,
    /// Master seed; every trial derives its own substreams from it.
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jitter: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Wqnp,
    Ibid,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Wqnp => "wqnp",
            EstimatorKind::Ibid => "ibid",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub trials: usize,
    pub horizon: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<usize>>,
    pub estimators: Vec<EstimatorKind>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WqnpSection {
    pub alphas: Vec<f64>,
    pub beta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSection {
    /// Initial estimate; the box centre when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta0: Option<Vec<f64>>,
    #[serde(default = "default_p0_scale")]
    pub p0_scale: f64,
}

fn default_p0_scale() -> f64 {
    example1::P0_SCALE
}

impl Default for InitSection {
    fn default() -> Self {
        InitSection {
            theta0: None,
            p0_scale: default_p0_scale(),
        }
    }
}

/// `count` log-spaced integers from `min(10, k_max)` to `k_max`, deduplicated.
pub fn log_checkpoints(k_max: usize, count: usize) -> Vec<usize> {
    if k_max == 0 {
        return Vec::new();
    }
    let start = k_max.min(10) as f64;
    let span = (k_max as f64 / start).log10();
    let steps = count.max(2) - 1;
    let mut grid: Vec<usize> = (0..=steps)
        .map(|i| (start * 10f64.powf(span * i as f64 / steps as f64)).round() as usize)
        .collect();
    grid.dedup();
    *grid.last_mut().expect("grid is non-empty") = k_max;
    grid.dedup();
    grid
}

/// Concrete objects built from a validated config.
#[derive(Clone, Debug)]
pub struct ExperimentSetup<T> {
    pub system: TrueSystem<T>,
    pub estimators: Vec<Estimator<T>>,
    pub initial_state: EstimatorState<T>,
    pub checkpoints: Vec<usize>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// The benchmark third-order system with both estimators.
    pub fn example1(trials: usize, horizon: usize, seed: u64) -> Self {
        ExperimentConfig {
            name: "example1".to_string(),
            system: SystemSection {
                thresholds: example1::THRESHOLDS.to_vec(),
                sigma: example1::SIGMA,
                theta: example1::THETA.to_vec(),
                box_lo: example1::BOX_LO.to_vec(),
                box_hi: example1::BOX_HI.to_vec(),
            },
            regressors: RegressorSection {
                kind: RegressorKind::Example1,
                seed,
                sequence: None,
                jitter: None,
            },
            run: RunSection {
                trials,
                horizon,
                checkpoints: None,
                estimators: vec![EstimatorKind::Wqnp, EstimatorKind::Ibid],
            },
            wqnp: Some(WqnpSection {
                alphas: example1::WQNP_ALPHAS.to_vec(),
                beta: example1::WQNP_BETA,
            }),
            init: InitSection {
                theta0: Some(example1::THETA0.to_vec()),
                p0_scale: example1::P0_SCALE,
            },
        }
    }

    /// `φ ≡ 1`, `θ = 0`, one threshold at zero, unit noise, box `[−3, 3]`,
    /// information-based estimator only.
    pub fn scalar_binary(trials: usize, horizon: usize, seed: u64) -> Self {
        ExperimentConfig {
            name: "scalar_binary".to_string(),
            system: SystemSection {
                thresholds: vec![0.0],
                sigma: 1.0,
                theta: vec![0.0],
                box_lo: vec![-3.0],
                box_hi: vec![3.0],
            },
            regressors: RegressorSection {
                kind: RegressorKind::Fixed,
                seed,
                sequence: Some(vec![vec![1.0]]),
                jitter: None,
            },
            run: RunSection {
                trials,
                horizon,
                checkpoints: None,
                estimators: vec![EstimatorKind::Ibid],
            },
            wqnp: None,
            init: InitSection::default(),
        }
    }

    pub fn dim(&self) -> usize {
        self.system.theta.len()
    }

    pub fn checkpoints(&self) -> Vec<usize> {
        self.run
            .checkpoints
            .clone()
            .unwrap_or_else(|| log_checkpoints(self.run.horizon, DEFAULT_CHECKPOINTS))
    }

    /// Checks every field and builds the simulation objects.
    pub fn build<T: Scalar>(&self) -> Result<ExperimentSetup<T>> {
        let quantizer = QuantizerSpec::<T>::from_f64(&self.system.thresholds)?;
        let noise = GaussianNoise::new(T::lit(self.system.sigma))?;
        let domain = BoxDomain::<T>::from_f64(&self.system.box_lo, &self.system.box_hi)?;
        let system = TrueSystem::new(Vector::from_f64(&self.system.theta), noise, quantizer.clone(), &domain)?;
        let n = system.dim();

        if self.run.trials == 0 {
            return Err(Error::config("run.trials", "must be at least 1"));
        }
        if self.run.horizon < n {
            return Err(Error::config(
                "run.horizon",
                format!("must be at least the parameter dimension {n}, got {}", self.run.horizon),
            ));
        }
        let checkpoints = self.checkpoints();
        if checkpoints.is_empty() {
            return Err(Error::config("run.checkpoints", "must not be empty"));
        }
        if checkpoints[0] == 0 {
            return Err(Error::config("run.checkpoints", "checkpoints start at step 1"));
        }
        if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("run.checkpoints", "must be strictly increasing"));
        }
        if *checkpoints.last().expect("non-empty") != self.run.horizon {
            return Err(Error::config(
                "run.checkpoints",
                "last checkpoint must equal run.horizon",
            ));
        }
        if self.run.estimators.is_empty() {
            return Err(Error::config(
                "run.estimators",
                "list at least one of \"wqnp\", \"ibid\"",
            ));
        }
        for (i, e) in self.run.estimators.iter().enumerate() {
            if self.run.estimators[..i].contains(e) {
                return Err(Error::config(
                    "run.estimators",
                    format!("\"{}\" listed twice", e.name()),
                ));
            }
        }

        match self.regressors.kind {
            RegressorKind::Example1 => {
                if n != 3 {
                    return Err(Error::config(
                        "regressors.kind",
                        format!("example1 regressors are three-dimensional but theta has {n} coordinates"),
                    ));
                }
                if let Some(j) = self.regressors.jitter {
                    if !(j >= 0.0) || !j.is_finite() {
                        return Err(Error::config("regressors.jitter", "must be finite and non-negative"));
                    }
                }
            }
            RegressorKind::Fixed => {
                let seq = self
                    .regressors
                    .sequence
                    .as_ref()
                    .ok_or_else(|| Error::config("regressors.sequence", "required for kind = \"fixed\""))?;
                let src = CyclicRegressors::<T>::new(seq.iter().map(|v| Vector::from_f64(v)).collect())
                    .map_err(|e| Error::config("regressors.sequence", e.to_string()))?;
                if src.dim() != n {
                    return Err(Error::config(
                        "regressors.sequence",
                        format!("regressors have {} coordinates but theta has {n}", src.dim()),
                    ));
                }
            }
        }

        let model = ObservationModel {
            quantizer,
            noise,
            domain: domain.clone(),
        };
        let mut estimators = Vec::new();
        for kind in &self.run.estimators {
            let method = match kind {
                EstimatorKind::Ibid => Method::Ibid,
                EstimatorKind::Wqnp => {
                    let w = self.wqnp.as_ref().ok_or_else(|| {
                        Error::config("wqnp", "section required when \"wqnp\" is listed in run.estimators")
                    })?;
                    Method::Wqnp(ConstantWeights::from_f64(&w.alphas, w.beta).map_err(|e| match e {
                        Error::InvalidConfig { field, message } => Error::config(format!("wqnp.{field}"), message),
                        other => other,
                    })?)
                }
            };
            estimators.push(Estimator::new(model.clone(), method)?);
        }

        let theta0 = self.init.theta0.as_ref().map(|v| Vector::from_f64(v));
        let initial_state =
            EstimatorState::with_scaled_identity(theta0, T::lit(self.init.p0_scale), &domain).map_err(|e| match e {
                Error::InvalidConfig { field, message } => Error::config(format!("init.{field}"), message),
                other => other,
            })?;

        Ok(ExperimentSetup {
            system,
            estimators,
            initial_state,
            checkpoints,
        })
    }

    /// Regressor stream of trial `trial`.
    pub fn regressors<T: Scalar>(&self, trial: u64) -> Result<Box<dyn RegressorSource<T> + Send>> {
        match self.regressors.kind {
            RegressorKind::Example1 => {
                let rng = substream(self.regressors.seed, 2 * trial + 1);
                let jitter = T::lit(self.regressors.jitter.unwrap_or(example1::JITTER));
                Ok(Box::new(Example1Regressors::with_jitter(rng, jitter)))
            }
            RegressorKind::Fixed => {
                let seq = self
                    .regressors
                    .sequence
                    .as_ref()
                    .ok_or_else(|| Error::config("regressors.sequence", "required for kind = \"fixed\""))?;
                Ok(Box::new(CyclicRegressors::new(
                    seq.iter().map(|v| Vector::from_f64(v)).collect(),
                )?))
            }
        }
    }

    /// Weight diagnostics for the constant-weight estimator, if configured.
    pub fn weight_report(&self) -> Result<Option<WeightReport>> {
        let Some(w) = &self.wqnp else {
            return Ok(None);
        };
        let quantizer = QuantizerSpec::<f64>::from_f64(&self.system.thresholds)?;
        let noise = GaussianNoise::new(self.system.sigma)?;
        let domain = BoxDomain::<f64>::from_f64(&self.system.box_lo, &self.system.box_hi)?;
        let phi_bar = self.regressors::<f64>(0)?.bound();
        Ok(Some(validate_wqnp_weights(
            &w.alphas,
            w.beta,
            &domain,
            phi_bar,
            &quantizer,
            &noise,
            self.dim(),
        )))
    }
}
