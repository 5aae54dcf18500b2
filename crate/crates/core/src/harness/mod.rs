//! Seeded Monte-Carlo experiments: many independent trials of the
//! estimators against a simulated system, aggregated at checkpoints.

mod config;
mod output;

pub use config::{
    log_checkpoints, EstimatorKind, ExperimentConfig, ExperimentSetup, InitSection, RegressorKind, RegressorSection,
    RunSection, SystemSection, WqnpSection, DEFAULT_CHECKPOINTS,
};
pub use output::{meta_json, metrics_csv, trace_csv, write_outputs, OutputPaths};

use rayon::prelude::*;

use crate::crlb::CrlbAccumulator;
use crate::error::{Error, Result};
use crate::estimator::Method;
use crate::model::substream;
use crate::scalar::Scalar;

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses all cores.
    pub jobs: Option<usize>,
    /// Trial whose per-step records are kept.
    pub trace_trial: Option<usize>,
}

/// Per-step record of one estimator in the traced trial.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub estimator: &'static str,
    pub q: usize,
    pub s: f64,
    pub s_tilde: f64,
    pub a: f64,
    pub beta: f64,
    pub theta_hat: Vec<f64>,
}

/// Raw outcome of one trial at every checkpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    /// `‖θ̂_0 − θ‖²` per estimator.
    pub initial_sq_err: Vec<f64>,
    /// `[estimator][checkpoint]` error vectors `θ̂_k − θ`.
    pub errors: Vec<Vec<Vec<f64>>>,
    /// `[estimator][checkpoint]` trace of the gain matrix.
    pub trace_p: Vec<Vec<f64>>,
    /// `[checkpoint]` trace of the bound at the true parameter.
    pub trace_crlb: Vec<f64>,
    /// Steps where `θ̂_k` left the box or the step gain left `(0, 1]`.
    pub violations: usize,
}

/// Across-trial statistics of one estimator at one checkpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorStats {
    /// Mean of `‖θ̃_k‖²`.
    pub mse: f64,
    /// Standard error of `mse`.
    pub mse_se: f64,
    /// Mean of `θ̃_k` per coordinate.
    pub bias: Vec<f64>,
    pub mean_trace_p: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointRow {
    pub k: usize,
    /// Aligned with [`AggregateMetrics::estimators`].
    pub stats: Vec<EstimatorStats>,
    /// Mean over trials of `tr(Δ_k)`.
    pub trace_crlb: f64,
    /// Mean and standard error of the paired difference
    /// `‖θ̃^ibid‖² − ‖θ̃^wqnp‖²`, when both estimators ran.
    pub ibid_minus_wqnp: Option<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregateMetrics {
    pub estimators: Vec<EstimatorKind>,
    pub trials: usize,
    pub initial_mse: Vec<f64>,
    pub rows: Vec<CheckpointRow>,
    pub violations: usize,
}

impl AggregateMetrics {
    pub fn index_of(&self, kind: EstimatorKind) -> Option<usize> {
        self.estimators.iter().position(|&e| e == kind)
    }

    pub fn row_at(&self, k: usize) -> Option<&CheckpointRow> {
        self.rows.iter().find(|r| r.k == k)
    }

    /// `(k, mse)` series of one estimator.
    pub fn mse_series(&self, kind: EstimatorKind) -> Option<(Vec<usize>, Vec<f64>)> {
        let idx = self.index_of(kind)?;
        Some((
            self.rows.iter().map(|r| r.k).collect(),
            self.rows.iter().map(|r| r.stats[idx].mse).collect(),
        ))
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub metrics: AggregateMetrics,
    pub trace: Option<Vec<TraceRow>>,
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Runs one trial. Trials are independent: trial `t` draws its noise from
/// substream `2t` and its regressor jitter from substream `2t + 1` of the
/// master seed.
pub fn run_trial<T: Scalar>(
    cfg: &ExperimentConfig,
    setup: &ExperimentSetup<T>,
    trial: usize,
    trace: Option<&mut Vec<TraceRow>>,
) -> Result<TrialResult> {
    let sys = &setup.system;
    let theta = sys.theta();
    let mut noise_rng = substream(cfg.regressors.seed, 2 * trial as u64);
    let mut regs = cfg.regressors::<T>(trial as u64)?;
    let mut states: Vec<_> = setup.estimators.iter().map(|_| setup.initial_state.clone()).collect();
    let mut crlb = CrlbAccumulator::new(sys.dim(), sys.quantizer().clone(), *sys.noise())?;
    let mut trace = trace;

    let n_est = setup.estimators.len();
    let n_ck = setup.checkpoints.len();
    let initial_sq_err = states
        .iter()
        .map(|s| sq_norm(&s.theta_hat.sub(theta).to_f64()))
        .collect();
    let mut errors = vec![Vec::with_capacity(n_ck); n_est];
    let mut trace_p = vec![Vec::with_capacity(n_ck); n_est];
    let mut trace_crlb = Vec::with_capacity(n_ck);
    let mut violations = 0usize;
    let mut next_ck = 0usize;
    let horizon = *setup.checkpoints.last().expect("validated non-empty");

    for k in 1..=horizon {
        let phi = regs.next_regressor();
        let x_true = sys.mean_output(&phi)?;
        let (q, _) = sys.step(&phi, &mut noise_rng)?;
        crlb.accumulate(&phi, x_true)?;
        for (est, state) in setup.estimators.iter().zip(states.iter_mut()) {
            let rec = est.step(state, &phi, q)?;
            if !(rec.a > T::zero() && rec.a <= T::one()) || !est.model.domain.contains(&state.theta_hat) {
                violations += 1;
            }
            if let Some(rows) = trace.as_deref_mut() {
                rows.push(TraceRow {
                    k,
                    estimator: est.method.name(),
                    q,
                    s: rec.s.as_f64(),
                    s_tilde: rec.s_tilde.as_f64(),
                    a: rec.a.as_f64(),
                    beta: rec.beta.as_f64(),
                    theta_hat: state.theta_hat.to_f64(),
                });
            }
        }
        if next_ck < n_ck && setup.checkpoints[next_ck] == k {
            for (e, state) in states.iter().enumerate() {
                errors[e].push(state.theta_hat.sub(theta).to_f64());
                trace_p[e].push(state.p.trace().as_f64());
            }
            trace_crlb.push(crlb.bound()?.trace().as_f64());
            next_ck += 1;
        }
    }

    Ok(TrialResult {
        trial,
        initial_sq_err,
        errors,
        trace_p,
        trace_crlb,
        violations,
    })
}

fn mean_and_se(values: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = values.clone().sum::<f64>() / nf;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0);
    (mean, (var / nf).sqrt())
}

/// Reduces trial results in trial-index order, so the outcome does not
/// depend on the order in which workers finished.
pub fn aggregate(
    estimators: &[EstimatorKind],
    checkpoints: &[usize],
    mut trials: Vec<TrialResult>,
) -> Result<AggregateMetrics> {
    if trials.is_empty() {
        return Err(Error::Insufficient("no trials to aggregate".into()));
    }
    trials.sort_by_key(|t| t.trial);
    let n = trials.len();
    let n_est = estimators.len();
    let ibid = estimators.iter().position(|&e| e == EstimatorKind::Ibid);
    let wqnp = estimators.iter().position(|&e| e == EstimatorKind::Wqnp);

    let initial_mse = (0..n_est)
        .map(|e| trials.iter().map(|t| t.initial_sq_err[e]).sum::<f64>() / n as f64)
        .collect();

    let rows = checkpoints
        .iter()
        .enumerate()
        .map(|(c, &k)| {
            let stats = (0..n_est)
                .map(|e| {
                    let (mse, mse_se) = mean_and_se(trials.iter().map(move |t| sq_norm(&t.errors[e][c])), n);
                    let dim = trials[0].errors[e][c].len();
                    let bias = (0..dim)
                        .map(|i| trials.iter().map(|t| t.errors[e][c][i]).sum::<f64>() / n as f64)
                        .collect();
                    let mean_trace_p = trials.iter().map(|t| t.trace_p[e][c]).sum::<f64>() / n as f64;
                    EstimatorStats {
                        mse,
                        mse_se,
                        bias,
                        mean_trace_p,
                    }
                })
                .collect();
            let trace_crlb = trials.iter().map(|t| t.trace_crlb[c]).sum::<f64>() / n as f64;
            let ibid_minus_wqnp = match (ibid, wqnp) {
                (Some(i), Some(w)) => Some(mean_and_se(
                    trials
                        .iter()
                        .map(move |t| sq_norm(&t.errors[i][c]) - sq_norm(&t.errors[w][c])),
                    n,
                )),
                _ => None,
            };
            CheckpointRow {
                k,
                stats,
                trace_crlb,
                ibid_minus_wqnp,
            }
        })
        .collect();

    Ok(AggregateMetrics {
        estimators: estimators.to_vec(),
        trials: n,
        initial_mse,
        rows,
        violations: trials.iter().map(|t| t.violations).sum(),
    })
}

/// Runs every trial of `cfg` in a worker pool with scalar type `T`.
pub fn run_experiment<T: Scalar>(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentResult> {
    let setup = cfg.build::<T>()?;
    let trials = cfg.run.trials;
    if let Some(t) = opts.trace_trial {
        if t >= trials {
            return Err(Error::config(
                "trace_trial",
                format!("trial {t} does not exist (trials = {trials})"),
            ));
        }
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = opts.jobs {
        if j == 0 {
            return Err(Error::config("jobs", "must be at least 1"));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Domain(format!("cannot start worker pool: {e}")))?;

    let outcomes: Vec<(TrialResult, Option<Vec<TraceRow>>)> = pool.install(|| {
        (0..trials)
            .into_par_iter()
            .map(|t| {
                if opts.trace_trial == Some(t) {
                    let mut rows = Vec::new();
                    let r = run_trial(cfg, &setup, t, Some(&mut rows))?;
                    Ok((r, Some(rows)))
                } else {
                    Ok((run_trial(cfg, &setup, t, None)?, None))
                }
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut trace = None;
    let mut results = Vec::with_capacity(trials);
    for (r, t) in outcomes {
        if t.is_some() {
            trace = t;
        }
        results.push(r);
    }
    let metrics = aggregate(&cfg.run.estimators, &setup.checkpoints, results)?;
    Ok(ExperimentResult { metrics, trace })
}

/// Least-squares slope of `log(value)` against `log(k)`.
pub fn log_log_slope(ks: &[usize], values: &[f64]) -> Result<f64> {
    if ks.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: ks.len(),
            found: values.len(),
        });
    }
    if ks.len() < 2 {
        return Err(Error::Insufficient("need at least two points for a slope".into()));
    }
    if values.iter().any(|&v| !(v > 0.0)) || ks.contains(&0) {
        return Err(Error::Domain("log-log fit needs positive k and values".into()));
    }
    let xs: Vec<f64> = ks.iter().map(|&k| (k as f64).ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

/// Minimum number of checkpoints in the fitting window.
pub const MIN_SLOPE_POINTS: usize = 5;

/// Slope of `log(mse)` against `log(k)` over the last decade of checkpoints
/// (`k >= k_max / 10`).
pub fn rate_slope_series(ks: &[usize], mse: &[f64]) -> Result<f64> {
    let k_max = *ks.last().ok_or_else(|| Error::Insufficient("no checkpoints".into()))?;
    let lo = k_max as f64 / 10.0;
    let (wk, wv): (Vec<usize>, Vec<f64>) = ks
        .iter()
        .zip(mse)
        .filter(|(&k, _)| k as f64 >= lo)
        .map(|(&k, &v)| (k, v))
        .unzip();
    if wk.len() < MIN_SLOPE_POINTS {
        return Err(Error::Insufficient(format!(
            "{} checkpoints in the last decade, need at least {MIN_SLOPE_POINTS}",
            wk.len()
        )));
    }
    log_log_slope(&wk, &wv)
}

pub fn rate_slope(metrics: &AggregateMetrics, kind: EstimatorKind) -> Result<f64> {
    let (ks, mse) = metrics
        .mse_series(kind)
        .ok_or_else(|| Error::Insufficient(format!("estimator {} was not run", kind.name())))?;
    rate_slope_series(&ks, &mse)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EfficiencyRow {
    pub k: usize,
    /// `k·mse / (k·tr Δ_k)`
    pub r1: f64,
    /// Standard error of `r1` from the trial spread of the error.
    pub r1_se: f64,
    /// `tr(mean P̂_k) / tr Δ_k`
    pub r2: f64,
}

/// Ratios of the information-based estimator's error and gain to the bound.
pub fn efficiency_report(metrics: &AggregateMetrics) -> Result<Vec<EfficiencyRow>> {
    efficiency_report_for(metrics, EstimatorKind::Ibid)
}

/// Same ratios for any estimator that was run.
pub fn efficiency_report_for(metrics: &AggregateMetrics, kind: EstimatorKind) -> Result<Vec<EfficiencyRow>> {
    let idx = metrics
        .index_of(kind)
        .ok_or_else(|| Error::Insufficient(format!("estimator {} was not run", kind.name())))?;
    Ok(metrics
        .rows
        .iter()
        .map(|r| {
            let s = &r.stats[idx];
            EfficiencyRow {
                k: r.k,
                r1: s.mse / r.trace_crlb,
                r1_se: s.mse_se / r.trace_crlb,
                r2: s.mean_trace_p / r.trace_crlb,
            }
        })
        .collect())
}

/// Config kind of a constructed method.
impl<T> From<&Method<T>> for EstimatorKind {
    fn from(m: &Method<T>) -> Self {
        match m {
            Method::Wqnp(_) => EstimatorKind::Wqnp,
            Method::Ibid => EstimatorKind::Ibid,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_law_slopes() {
        let ks: Vec<usize> = log_checkpoints(10_000, 40);
        let inv: Vec<f64> = ks.iter().map(|&k| 3.0 / k as f64).collect();
        assert!((rate_slope_series(&ks, &inv).unwrap() + 1.0).abs() < 1e-12);
        let half: Vec<f64> = ks.iter().map(|&k| 3.0 / (k as f64).sqrt()).collect();
        assert!((rate_slope_series(&ks, &half).unwrap() + 0.5).abs() < 1e-12);
        assert!(rate_slope_series(&[10, 100, 1000], &[1.0, 0.1, 0.01]).is_err());
    }

    #[test]
    fn perfect_information_ratio() {
        let metrics = AggregateMetrics {
            estimators: vec![EstimatorKind::Ibid],
            trials: 10,
            initial_mse: vec![0.0],
            rows: (1..5)
                .map(|k| CheckpointRow {
                    k: k * 10,
                    stats: vec![EstimatorStats {
                        mse: 1.0 / k as f64,
                        mse_se: 0.0,
                        bias: vec![0.0],
                        mean_trace_p: 1.0 / k as f64,
                    }],
                    trace_crlb: 1.0 / k as f64,
                    ibid_minus_wqnp: None,
                })
                .collect(),
            violations: 0,
        };
        for row in efficiency_report(&metrics).unwrap() {
            assert_eq!(row.r1, 1.0);
            assert_eq!(row.r2, 1.0);
        }
        assert!(efficiency_report_for(&metrics, EstimatorKind::Wqnp).is_err());
    }

    #[test]
    fn horizon_below_dimension_rejected() {
        let cfg = ExperimentConfig::example1(1, 0, 1);
        let err = run_experiment::<f64>(&cfg, &RunOptions::default()).unwrap_err();
        assert!(err.is_validation());
    }
}
