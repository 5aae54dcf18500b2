use rand::seq::SliceRandom;

use qsysid_core::harness::{
    aggregate, meta_json, metrics_csv, run_experiment, run_trial, write_outputs, EstimatorKind, ExperimentConfig,
    RunOptions,
};
use qsysid_core::model::{example1, substream};

fn small_example1() -> ExperimentConfig {
    ExperimentConfig::example1(24, 400, 7)
}

#[test]
fn identical_configs_give_identical_bytes() {
    let cfg = small_example1();
    let one = run_experiment::<f64>(
        &cfg,
        &RunOptions {
            jobs: Some(1),
            trace_trial: None,
        },
    )
    .unwrap();
    let many = run_experiment::<f64>(
        &cfg,
        &RunOptions {
            jobs: Some(4),
            trace_trial: None,
        },
    )
    .unwrap();
    assert_eq!(metrics_csv(&one.metrics), metrics_csv(&many.metrics));
    assert_eq!(meta_json(&cfg, &one.metrics), meta_json(&cfg, &many.metrics));

    let mut other = cfg.clone();
    other.regressors.seed = 8;
    let moved = run_experiment::<f64>(&other, &RunOptions::default()).unwrap();
    assert_ne!(metrics_csv(&one.metrics), metrics_csv(&moved.metrics));
}

#[test]
fn aggregation_ignores_completion_order() {
    let cfg = small_example1();
    let setup = cfg.build::<f64>().unwrap();
    let trials: Vec<_> = (0..cfg.run.trials)
        .map(|t| run_trial(&cfg, &setup, t, None).unwrap())
        .collect();
    let reference = aggregate(&cfg.run.estimators, &setup.checkpoints, trials.clone()).unwrap();
    let mut rng = substream(41, 0);
    for _ in 0..5 {
        let mut shuffled = trials.clone();
        shuffled.shuffle(&mut rng);
        let m = aggregate(&cfg.run.estimators, &setup.checkpoints, shuffled).unwrap();
        assert_eq!(m, reference);
    }
}

#[test]
fn initial_error_is_recorded_exactly() {
    let cfg = small_example1();
    let res = run_experiment::<f64>(&cfg, &RunOptions::default()).unwrap();
    let expected: f64 = example1::THETA0
        .iter()
        .zip(&example1::THETA)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    for &mse in &res.metrics.initial_mse {
        assert_eq!(mse, expected);
    }
    assert_eq!(res.metrics.violations, 0);
}

#[test]
fn single_and_double_precision_agree_loosely() {
    let cfg = small_example1();
    let a = run_experiment::<f64>(&cfg, &RunOptions::default()).unwrap().metrics;
    let b = run_experiment::<f32>(&cfg, &RunOptions::default()).unwrap().metrics;
    let ibid = a.index_of(EstimatorKind::Ibid).unwrap();
    let (ra, rb) = (a.rows.last().unwrap(), b.rows.last().unwrap());
    assert!(rb.stats[ibid].mse.is_finite());
    assert!((ra.stats[ibid].mse / rb.stats[ibid].mse - 1.0).abs() < 0.5);
    assert!((ra.trace_crlb / rb.trace_crlb - 1.0).abs() < 1e-3);
}

#[test]
fn outputs_are_written_and_parse() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_example1();
    let res = run_experiment::<f64>(
        &cfg,
        &RunOptions {
            jobs: None,
            trace_trial: Some(3),
        },
    )
    .unwrap();
    let paths = write_outputs(dir.path(), &cfg, &res.metrics, res.trace.as_deref()).unwrap();

    let csv = std::fs::read_to_string(&paths.metrics).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header[0], "k");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), res.metrics.rows.len());
    assert!(rows.iter().all(|r| r.len() == header.len()));
    let first = rows[0][1];
    let mantissa = first
        .split('e')
        .next()
        .unwrap()
        .trim_start_matches('-')
        .replace('.', "");
    assert_eq!(mantissa.len(), 12, "{first}");

    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&paths.meta).unwrap()).unwrap();
    assert_eq!(meta["seed"], 7);
    assert_eq!(meta["horizon"], 400);
    assert_eq!(meta["config_hash"].as_str().unwrap().len(), 64);

    let trace = std::fs::read_to_string(paths.trace.unwrap()).unwrap();
    // one header plus one row per estimator and step
    assert_eq!(trace.lines().count(), 1 + 2 * 400);
}

#[test]
fn scalar_preset_approaches_the_bound() {
    let cfg = ExperimentConfig::scalar_binary(400, 400, 3);
    let m = run_experiment::<f64>(&cfg, &RunOptions::default()).unwrap().metrics;
    let last = m.rows.last().unwrap();
    let k = last.k as f64;
    assert!((k * last.trace_crlb - std::f64::consts::FRAC_PI_2).abs() < 1e-10);
    let ratio = last.stats[0].mse / last.trace_crlb;
    let se = last.stats[0].mse_se / last.trace_crlb;
    assert!((ratio - 1.0).abs() <= 0.1 + 4.0 * se, "ratio {ratio} (se {se})");
}
