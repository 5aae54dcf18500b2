use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{AggregateMetrics, EstimatorKind, ExperimentConfig, TraceRow};
use crate::error::Result;

/// Twelve significant digits.
fn num(v: f64) -> String {
    format!("{v:.11e}")
}

/// Checkpoint table: `k`, per-estimator `mse_*` and `k_mse_*`,
/// `k_trace_crlb`, `mean_trace_phat` (information-based estimator), then
/// standard errors, `trace_crlb` and per-coordinate bias.
pub fn metrics_csv(m: &AggregateMetrics) -> String {
    let names: Vec<&str> = m.estimators.iter().map(|e| e.name()).collect();
    let ibid = m.index_of(EstimatorKind::Ibid);
    let dim = m.rows.first().and_then(|r| r.stats.first()).map_or(0, |s| s.bias.len());

    let mut header = vec!["k".to_string()];
    header.extend(names.iter().map(|n| format!("mse_{n}")));
    header.extend(names.iter().map(|n| format!("k_mse_{n}")));
    header.push("k_trace_crlb".into());
    if ibid.is_some() {
        header.push("mean_trace_phat".into());
    }
    header.extend(names.iter().map(|n| format!("se_mse_{n}")));
    header.push("trace_crlb".into());
    for n in &names {
        header.extend((1..=dim).map(|i| format!("bias_{n}_{i}")));
    }

    let mut out = header.join(",");
    out.push('\n');
    for r in &m.rows {
        let kf = r.k as f64;
        let mut cols = vec![r.k.to_string()];
        cols.extend(r.stats.iter().map(|s| num(s.mse)));
        cols.extend(r.stats.iter().map(|s| num(kf * s.mse)));
        cols.push(num(kf * r.trace_crlb));
        if let Some(i) = ibid {
            cols.push(num(r.stats[i].mean_trace_p));
        }
        cols.extend(r.stats.iter().map(|s| num(s.mse_se)));
        cols.push(num(r.trace_crlb));
        for s in &r.stats {
            cols.extend(s.bias.iter().map(|&b| num(b)));
        }
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    out
}

/// Per-step records of the traced trial.
pub fn trace_csv(rows: &[TraceRow]) -> String {
    let dim = rows.first().map_or(0, |r| r.theta_hat.len());
    let mut out = String::from("k,estimator,q,s,s_tilde,a,beta");
    for i in 1..=dim {
        let _ = write!(out, ",theta_hat_{i}");
    }
    out.push('\n');
    for r in rows {
        let _ = write!(
            out,
            "{},{},{},{},{},{},{}",
            r.k,
            r.estimator,
            r.q,
            num(r.s),
            num(r.s_tilde),
            num(r.a),
            num(r.beta)
        );
        for &t in &r.theta_hat {
            let _ = write!(out, ",{}", num(t));
        }
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct Meta<'a> {
    name: &'a str,
    version: String,
    config_hash: String,
    seed: u64,
    trials: usize,
    horizon: usize,
    checkpoints: usize,
    estimators: Vec<&'static str>,
    initial_mse: Vec<f64>,
    invariant_violations: usize,
    config: &'a ExperimentConfig,
}

/// Sidecar metadata. Contains nothing time- or host-dependent.
pub fn meta_json(cfg: &ExperimentConfig, m: &AggregateMetrics) -> String {
    let hash = Sha256::digest(cfg.to_toml_string().as_bytes());
    let meta = Meta {
        name: &cfg.name,
        version: format!("v{}", env!("CARGO_PKG_VERSION")),
        config_hash: hex::encode(hash),
        seed: cfg.regressors.seed,
        trials: m.trials,
        horizon: cfg.run.horizon,
        checkpoints: m.rows.len(),
        estimators: m.estimators.iter().map(|e| e.name()).collect(),
        initial_mse: m.initial_mse.clone(),
        invariant_violations: m.violations,
        config: cfg,
    };
    let mut s = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    s.push('\n');
    s
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputPaths {
    pub metrics: PathBuf,
    pub meta: PathBuf,
    pub trace: Option<PathBuf>,
}

/// Writes `<name>_metrics.csv`, `<name>_meta.json` and, when a trace is
/// given, `<name>_trace.csv` into `dir`.
pub fn write_outputs(
    dir: &Path,
    cfg: &ExperimentConfig,
    m: &AggregateMetrics,
    trace: Option<&[TraceRow]>,
) -> Result<OutputPaths> {
    std::fs::create_dir_all(dir)?;
    let metrics = dir.join(format!("{}_metrics.csv", cfg.name));
    let meta = dir.join(format!("{}_meta.json", cfg.name));
    std::fs::write(&metrics, metrics_csv(m))?;
    std::fs::write(&meta, meta_json(cfg, m))?;
    let trace = match trace {
        Some(rows) => {
            let p = dir.join(format!("{}_trace.csv", cfg.name));
            std::fs::write(&p, trace_csv(rows))?;
            Some(p)
        }
        None => None,
    };
    Ok(OutputPaths { metrics, meta, trace })
}
