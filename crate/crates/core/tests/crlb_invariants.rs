use proptest::prelude::*;
use rand::Rng;

use qsysid_core::crlb::{bound_recursive_check, rho};
use qsysid_core::model::{cell_probs, example1, substream, Example1Regressors, RegressorSource};
use qsysid_core::{CrlbAccumulator, GaussianNoise, QuantizerSpec, Vector};

#[test]
fn information_never_exceeds_the_unquantized_value() {
    let mut rng = substream(31, 0);
    for _ in 0..200 {
        let m = rng.gen_range(1..=12);
        let mut c = Vec::with_capacity(m);
        let mut t = rng.gen_range(-4.0..0.0);
        for _ in 0..m {
            c.push(t);
            t += rng.gen_range(0.01..1.0);
        }
        let spec = QuantizerSpec::new(c).unwrap();
        let sigma: f64 = rng.gen_range(0.2..3.0);
        let noise = GaussianNoise::new(sigma).unwrap();
        for i in 0..=200 {
            let x = -10.0 * sigma + 0.1 * sigma * i as f64;
            let r = rho(x, &spec, &noise);
            assert!(r > 0.0, "x={x}");
            assert!(r <= 1.0 / (sigma * sigma) * (1.0 + 1e-12), "x={x}: {r}");
        }
    }
}

#[test]
fn recursive_bound_agrees_with_direct_inverse() {
    let spec = QuantizerSpec::from_f64(&example1::THRESHOLDS).unwrap();
    let noise = GaussianNoise::new(example1::SIGMA).unwrap();
    let theta = Vector::from_f64(&example1::THETA);
    for seed in 0..5 {
        let mut regs = Example1Regressors::new(substream(32 + seed, 1));
        let mut acc = CrlbAccumulator::new(3, spec.clone(), noise).unwrap();
        let mut history = Vec::new();
        let mut last_trace = f64::INFINITY;
        for k in 1..=1_000 {
            let phi = regs.next_regressor();
            let r = acc.accumulate(&phi, theta.dot(&phi)).unwrap();
            history.push((r, phi));
            if k >= 3 {
                let tr = acc.bound().unwrap().trace();
                assert!(tr <= last_trace * (1.0 + 1e-12), "trace grew at k={k}");
                last_trace = tr;
            }
        }
        let residual = bound_recursive_check(&history, None).unwrap();
        assert!(residual <= 1e-9, "seed {seed}: residual {residual:e}");
    }
}

/// Sample variance of the numerically differentiated log-likelihood of the
/// observed level, against the analytic information.
fn fisher_consistency(spec: &QuantizerSpec, sigma: f64, x: f64, draws: usize, seed: u64) -> (f64, f64) {
    let noise = GaussianNoise::new(sigma).unwrap();
    let eps = 1e-5;
    let plus = cell_probs(x + eps, spec, &noise).prob;
    let minus = cell_probs(x - eps, spec, &noise).prob;
    let score: Vec<f64> = plus
        .iter()
        .zip(&minus)
        .map(|(p, m)| (p.ln() - m.ln()) / (2.0 * eps))
        .collect();
    let mut rng = substream(seed, 0);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..draws {
        let q = spec.quantize(x + noise.sample(&mut rng));
        sum += score[q];
        sum_sq += score[q] * score[q];
    }
    let n = draws as f64;
    let mean = sum / n;
    let var = (sum_sq - n * mean * mean) / (n - 1.0);
    (var, rho(x, spec, &noise))
}

#[test]
fn information_equals_score_variance() {
    let binary = QuantizerSpec::from_f64(&[0.0]).unwrap();
    let (var, r) = fisher_consistency(&binary, 1.0, 0.0, 1_000_000, 33);
    assert!((var / r - 1.0).abs() <= 0.02, "binary: {var} vs {r}");

    let four = QuantizerSpec::from_f64(&example1::THRESHOLDS).unwrap();
    let (var, r) = fisher_consistency(&four, example1::SIGMA, 0.4, 1_000_000, 34);
    assert!((var / r - 1.0).abs() <= 0.02, "four-level: {var} vs {r}");
}

proptest! {
    #[test]
    fn information_is_translation_invariant(shift in -5.0f64..5.0, x in -4.0f64..4.0, sigma in 0.3f64..3.0) {
        let spec = QuantizerSpec::from_f64(&example1::THRESHOLDS).unwrap();
        let noise = GaussianNoise::new(sigma).unwrap();
        let a = rho(x, &spec, &noise);
        let b = rho(x + shift, &spec.shifted(shift).unwrap(), &noise);
        prop_assert!((a - b).abs() <= 1e-10 * a.max(1e-300));
    }
}
