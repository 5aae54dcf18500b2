use proptest::prelude::*;
use rand::Rng;

use qsysid_core::estimator::{
    ibid_step, ibid_weights, innovation, project, wqnp_step, ConstantWeights, Estimator, Method,
};
use qsysid_core::model::{cell_probs, example1, substream, Example1Regressors, RegressorSource, TrueSystem};
use qsysid_core::numerics::gauss_cdf;
use qsysid_core::{
    BoxDomain, BoxDomain32, EstimatorState, EstimatorState32, GaussianNoise, GaussianNoise32, ObservationModel,
    QuantizerSpec, QuantizerSpec32, SymMatrix, Vector, Vector32,
};

fn random_pd(rng: &mut impl Rng, n: usize) -> SymMatrix {
    let a: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let mut q = SymMatrix::scaled_identity(n, 0.05).unwrap();
    for row in &a {
        q.add_outer(1.0, row);
    }
    q
}

fn random_box(rng: &mut impl Rng, n: usize) -> BoxDomain {
    let lo: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..1.0)).collect();
    let hi: Vec<f64> = lo.iter().map(|l| l + rng.gen_range(0.0..3.0)).collect();
    BoxDomain::new(lo, hi).unwrap()
}

fn q_norm(q: &SymMatrix, a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    q.quad_form(&d).sqrt()
}

fn example1_model() -> ObservationModel {
    ObservationModel {
        quantizer: QuantizerSpec::from_f64(&example1::THRESHOLDS).unwrap(),
        noise: GaussianNoise::new(example1::SIGMA).unwrap(),
        domain: BoxDomain::from_f64(&example1::BOX_LO, &example1::BOX_HI).unwrap(),
    }
}

#[test]
fn projection_is_nonexpansive_idempotent_and_optimal() {
    let mut rng = substream(21, 0);
    for case in 0..10_000 {
        let n = rng.gen_range(1..=6);
        let q = random_pd(&mut rng, n);
        let dom = random_box(&mut rng, n);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-6.0..6.0)).collect();
        let p = project(&x, &q, &dom).unwrap();
        assert!(dom.contains(&p), "case {case}: {p:?} outside the box");

        let again = project(&p, &q, &dom).unwrap();
        for (a, b) in again.iter().zip(p.iter()) {
            assert!((a - b).abs() <= 1e-12, "case {case}: not idempotent");
        }

        let star: Vec<f64> = dom
            .lo()
            .iter()
            .zip(dom.hi())
            .map(|(l, h)| rng.gen_range(*l..=*h))
            .collect();
        let before = q_norm(&q, &x, &star);
        let after = q_norm(&q, &p, &star);
        assert!(
            after <= before * (1.0 + 1e-12) + 1e-12,
            "case {case}: {after} > {before}"
        );

        // first-order optimality: gradient Q(p - x) has the sign fixed by the active bound
        let d: Vec<f64> = p.iter().zip(&x).map(|(a, b)| a - b).collect();
        let g = q.mul_vec(&d);
        let scale = 1e-9 * (1.0 + q.max_abs() * d.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        for i in 0..n {
            let at_lo = p[i] <= dom.lo()[i];
            let at_hi = p[i] >= dom.hi()[i];
            let ok = match (at_lo, at_hi) {
                (true, true) => true,
                (true, false) => g[i] >= -scale,
                (false, true) => g[i] <= scale,
                (false, false) => g[i].abs() <= scale,
            };
            assert!(ok, "case {case}, coordinate {i}: gradient {} at {}", g[i], p[i]);
        }
    }
}

#[test]
fn gain_inverse_matches_accumulated_information() {
    let model = example1_model();
    let sys = TrueSystem::new(
        Vector::from_f64(&example1::THETA),
        model.noise,
        model.quantizer.clone(),
        &model.domain,
    )
    .unwrap();
    let weights = ConstantWeights::from_f64(&example1::WQNP_ALPHAS, example1::WQNP_BETA).unwrap();
    for method in [Method::Wqnp(weights), Method::Ibid] {
        let est = Estimator::new(model.clone(), method).unwrap();
        let mut state =
            EstimatorState::with_scaled_identity(Some(Vector::from_f64(&example1::THETA0)), 3.0, &model.domain)
                .unwrap();
        let mut info = SymMatrix::scaled_identity(3, 1.0 / 3.0).unwrap();
        let mut regs = Example1Regressors::new(substream(22, 1));
        let mut rng = substream(22, 0);
        for _ in 0..10_000 {
            let phi = regs.next_regressor();
            let (q, _) = sys.step(&phi, &mut rng).unwrap();
            let rec = est.step(&mut state, &phi, q).unwrap();
            assert!(rec.a > 0.0 && rec.a <= 1.0);
            assert!(model.domain.contains(&state.theta_hat));
            info.add_outer(rec.beta, &phi);
        }
        let rel = state.p_inv.max_abs_diff(&info) / info.max_abs();
        assert!(rel <= 1e-8, "{}: shadow drift {rel:e}", est.method.name());
        let rel_p = state.p.inverse().unwrap().max_abs_diff(&info) / info.max_abs();
        assert!(rel_p <= 1e-8, "{}: inverse drift {rel_p:e}", est.method.name());
    }
}

#[test]
fn ibid_weights_increase_strictly_with_the_level() {
    let mut rng = substream(23, 0);
    for _ in 0..100_000 {
        let m = rng.gen_range(1..=8);
        let mut c = Vec::with_capacity(m);
        let mut t = rng.gen_range(-3.0..0.0);
        for _ in 0..m {
            c.push(t);
            t += rng.gen_range(0.05..1.5);
        }
        let spec = QuantizerSpec::new(c).unwrap();
        let noise = GaussianNoise::new(rng.gen_range(0.3..3.0)).unwrap();
        let x = rng.gen_range(-4.0..4.0);
        let w = ibid_weights(x, &spec, &noise);
        for pair in w.alphas.windows(2) {
            assert!(
                pair[0] < pair[1],
                "x = {x}, C = {:?}: {:?}",
                spec.thresholds(),
                w.alphas
            );
        }
        assert!(w.beta > 0.0);
    }
}

#[test]
fn ibid_gain_equals_score_variance() {
    let mut rng = substream(24, 0);
    let spec = QuantizerSpec::from_f64(&example1::THRESHOLDS).unwrap();
    let noise = GaussianNoise::new(example1::SIGMA).unwrap();
    for _ in 0..5_000 {
        let x = rng.gen_range(-6.0..6.0);
        let w = ibid_weights(x, &spec, &noise);
        let cp = cell_probs(x, &spec, &noise);
        let mean: f64 = w.alphas.iter().zip(&cp.prob).map(|(a, h)| a * h).sum();
        let second: f64 = w.alphas.iter().zip(&cp.prob).map(|(a, h)| a * a * h).sum();
        let neg_cross: f64 = -w.alphas.iter().zip(&cp.density_diff).map(|(a, h)| a * h).sum::<f64>();
        assert!(mean.abs() <= 1e-10);
        assert!((w.beta - (second - mean * mean)).abs() <= 1e-10, "x = {x}");
        assert!((w.beta - neg_cross).abs() <= 1e-10, "x = {x}");
        // the direct innovation equals the subtraction form
        for q in 0..spec.levels() {
            let sub = innovation(q, &w.alphas, &cp.prob).unwrap();
            assert!((sub - w.alphas[q]).abs() <= 1e-10);
        }
    }
}

#[test]
fn innovation_is_unbiased_at_the_truth() {
    let model = example1_model();
    let theta = Vector::from_f64(&example1::THETA);
    let sys = TrueSystem::new(theta.clone(), model.noise, model.quantizer.clone(), &model.domain).unwrap();
    let phi = [1.0, -2.0, 0.5];
    let x = theta.dot(&phi);
    let cp = cell_probs(x, &model.quantizer, &model.noise);
    let alphas = example1::WQNP_ALPHAS;
    let expected: f64 = alphas.iter().zip(&cp.prob).map(|(a, h)| a * h).sum();
    let exact: f64 = (0..alphas.len())
        .map(|q| cp.prob[q] * innovation(q, &alphas, &cp.prob).unwrap())
        .sum();
    assert!(exact.abs() <= 1e-12 * expected);

    let n = 100_000;
    let mut rng = substream(25, 0);
    let draws: Vec<f64> = (0..n)
        .map(|_| {
            let (q, _) = sys.step(&phi, &mut rng).unwrap();
            innovation(q, &alphas, &cp.prob).unwrap()
        })
        .collect();
    let mean = draws.iter().sum::<f64>() / n as f64;
    let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    assert!(mean.abs() <= 4.0 * se, "mean {mean}, se {se}");
}

/// Scalar binary case written out by hand.
fn scalar_reference(
    theta: f64,
    p: f64,
    phi: f64,
    q: usize,
    (a1, a2, beta): (f64, f64, f64),
    (c, sigma): (f64, f64),
    (lo, hi): (f64, f64),
) -> (f64, f64) {
    let x = theta * phi;
    let h1 = gauss_cdf(c - x, sigma).unwrap();
    let s_tilde = if q == 0 { a1 } else { a2 } - (a1 * h1 + a2 * (1.0 - h1));
    let a = 1.0 / (1.0 + beta * phi * phi * p);
    let cand = theta + a * s_tilde * p * phi;
    (cand.clamp(lo, hi), a * p)
}

#[test]
fn scalar_binary_step_matches_hand_recursion() {
    let (c, sigma) = (0.3, 1.2);
    let (lo, hi) = (-2.0, 2.0);
    let weights = (-1.0, 1.5, 0.7);
    let model = ObservationModel {
        quantizer: QuantizerSpec::from_f64(&[c]).unwrap(),
        noise: GaussianNoise::new(sigma).unwrap(),
        domain: BoxDomain::from_f64(&[lo], &[hi]).unwrap(),
    };
    let cw = ConstantWeights::from_f64(&[weights.0, weights.1], weights.2).unwrap();
    let mut state = EstimatorState::with_scaled_identity(Some(Vector::from_f64(&[1.9])), 2.0, &model.domain).unwrap();
    let (mut theta, mut p) = (1.9, 2.0);
    let mut rng = substream(26, 0);
    for _ in 0..1_000 {
        let phi = rng.gen_range(-2.0..2.0);
        let q = rng.gen_range(0..2);
        wqnp_step(&mut state, &[phi], q, &cw, &model).unwrap();
        (theta, p) = scalar_reference(theta, p, phi, q, weights, (c, sigma), (lo, hi));
        assert!((state.theta_hat[0] - theta).abs() <= 1e-12 * (1.0 + theta.abs()));
        assert!((state.p.get(0, 0) - p).abs() <= 1e-12 * p);
    }
}

#[test]
fn single_precision_run_converges() {
    let model = qsysid_core::estimator::ObservationModel {
        quantizer: QuantizerSpec32::from_f64(&example1::THRESHOLDS).unwrap(),
        noise: GaussianNoise32::new(example1::SIGMA as f32).unwrap(),
        domain: BoxDomain32::from_f64(&example1::BOX_LO, &example1::BOX_HI).unwrap(),
    };
    let theta = Vector32::from_f64(&example1::THETA);
    let sys = TrueSystem::new(theta.clone(), model.noise, model.quantizer.clone(), &model.domain).unwrap();
    let mut state = EstimatorState32::with_scaled_identity(None, 3.0, &model.domain).unwrap();
    let mut regs = Example1Regressors::<f32>::new(substream(27, 1));
    let mut rng = substream(27, 0);
    for _ in 0..5_000 {
        let phi = regs.next_regressor();
        let (q, _) = sys.step(&phi, &mut rng).unwrap();
        ibid_step(&mut state, &phi, q, &model).unwrap();
        assert!(state.theta_hat.is_finite());
    }
    let err = state.theta_hat.sub(&theta).norm();
    assert!(err < 0.3, "error {err}");
}

proptest! {
    #[test]
    fn wqnp_step_keeps_invariants(
        theta0 in prop::collection::vec(-3.0f64..3.0, 3),
        phi in prop::collection::vec(-3.0f64..3.0, 3),
        q in 0usize..4,
        scale in 0.01f64..50.0,
    ) {
        let model = example1_model();
        let w = ConstantWeights::from_f64(&example1::WQNP_ALPHAS, example1::WQNP_BETA).unwrap();
        let mut state = EstimatorState::with_scaled_identity(Some(Vector::new(theta0)), scale, &model.domain).unwrap();
        let before = state.p.clone();
        let rec = wqnp_step(&mut state, &phi, q, &w, &model).unwrap();
        prop_assert!(rec.a > 0.0 && rec.a <= 1.0);
        prop_assert!(model.domain.contains(&state.theta_hat));
        // P can only shrink
        let diff = before.add(&state.p.scale(-1.0));
        prop_assert!(diff.eigenvalues()[0] >= -1e-12 * scale);
    }
}
