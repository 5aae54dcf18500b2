//! True system, quantizing sensor, noise and regressor generators.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{erfcx, std_normal_cdf, std_normal_pdf, std_normal_sf, Vector};
use crate::scalar::Scalar;

/// Counter-based stream used for every simulated draw.
pub type SimRng = ChaCha8Rng;

/// Independent substream `stream` of the generator seeded by `seed`.
pub fn substream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Standard normal draw by the Box-Muller transform (cosine branch only).
pub fn standard_normal<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Ordered sensor thresholds `C_1 < … < C_m`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantizerSpec<T> {
    thresholds: Vec<T>,
}

impl<T: Scalar> QuantizerSpec<T> {
    pub fn new(thresholds: Vec<T>) -> Result<Self> {
        if thresholds.is_empty() {
            return Err(Error::config("thresholds", "at least one threshold is required"));
        }
        if let Some(bad) = thresholds.iter().find(|c| !c.is_finite()) {
            return Err(Error::config("thresholds", format!("threshold {bad} is not finite")));
        }
        if let Some(i) = thresholds.windows(2).position(|w| !(w[0] < w[1])) {
            return Err(Error::config(
                "thresholds",
                format!("must be strictly increasing (C_{} >= C_{})", i + 1, i + 2),
            ));
        }
        Ok(QuantizerSpec { thresholds })
    }

    pub fn from_f64(thresholds: &[f64]) -> Result<Self> {
        Self::new(thresholds.iter().map(|&c| T::lit(c)).collect())
    }

    /// Evenly spaced thresholds `lo, lo + step, …` up to `hi` inclusive.
    pub fn uniform_grid(lo: T, hi: T, step: T) -> Result<Self> {
        if !(step > T::zero()) || !(hi >= lo) {
            return Err(Error::Domain("uniform grid needs lo <= hi and step > 0".into()));
        }
        let count = ((hi - lo) / step + T::lit(1e-9)).floor().to_usize().unwrap_or(0) + 1;
        Self::new((0..count).map(|i| lo + step * T::lit(i as f64)).collect())
    }

    pub fn thresholds(&self) -> &[T] {
        &self.thresholds
    }

    /// Number of thresholds `m`.
    pub fn num_thresholds(&self) -> usize {
        self.thresholds.len()
    }

    /// Number of output levels `m + 1`.
    pub fn levels(&self) -> usize {
        self.thresholds.len() + 1
    }

    /// Same thresholds shifted by `c`.
    pub fn shifted(&self, c: T) -> Result<Self> {
        Self::new(self.thresholds.iter().map(|&t| t + c).collect())
    }

    /// Level `i` such that `C_i < y <= C_{i+1}`.
    pub fn quantize(&self, y: T) -> usize {
        self.thresholds.partition_point(|&c| c < y)
    }
}

/// Sensor reading for output `y`.
pub fn quantize<T: Scalar>(y: T, q: &QuantizerSpec<T>) -> usize {
    q.quantize(y)
}

/// Zero-mean Gaussian measurement noise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianNoise<T> {
    sigma: T,
}

impl<T: Scalar> GaussianNoise<T> {
    pub fn new(sigma: T) -> Result<Self> {
        if !(sigma > T::zero()) || !sigma.is_finite() {
            return Err(Error::config(
                "sigma",
                format!("must be finite and positive, got {sigma}"),
            ));
        }
        Ok(GaussianNoise { sigma })
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    pub fn pdf(&self, x: T) -> T {
        if x.is_infinite() {
            return T::zero();
        }
        std_normal_pdf(x / self.sigma) / self.sigma
    }

    pub fn cdf(&self, x: T) -> T {
        std_normal_cdf(x / self.sigma)
    }

    pub fn sf(&self, x: T) -> T {
        std_normal_sf(x / self.sigma)
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> T {
        self.sigma * T::lit(standard_normal(rng))
    }
}

/// Axis-aligned box of admissible parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxDomain<T> {
    lo: Vec<T>,
    hi: Vec<T>,
}

impl<T: Scalar> BoxDomain<T> {
    pub fn new(lo: Vec<T>, hi: Vec<T>) -> Result<Self> {
        if lo.is_empty() {
            return Err(Error::config("box_lo", "box must have at least one coordinate"));
        }
        if lo.len() != hi.len() {
            return Err(Error::config(
                "box_hi",
                format!("length {} does not match box_lo length {}", hi.len(), lo.len()),
            ));
        }
        for (i, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if !l.is_finite() || !h.is_finite() {
                return Err(Error::config("box", format!("bounds of coordinate {i} must be finite")));
            }
            if l > h {
                return Err(Error::config(
                    "box",
                    format!("coordinate {i}: lower bound {l} exceeds upper {h}"),
                ));
            }
        }
        Ok(BoxDomain { lo, hi })
    }

    pub fn from_f64(lo: &[f64], hi: &[f64]) -> Result<Self> {
        Self::new(
            lo.iter().map(|&v| T::lit(v)).collect(),
            hi.iter().map(|&v| T::lit(v)).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[T] {
        &self.lo
    }

    pub fn hi(&self) -> &[T] {
        &self.hi
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(&v, (&l, &h))| l <= v && v <= h)
    }

    pub fn center(&self) -> Vector<T> {
        Vector::new(
            self.lo
                .iter()
                .zip(&self.hi)
                .map(|(&l, &h)| (l + h) / T::lit(2.0))
                .collect(),
        )
    }

    /// Coordinatewise clipping (the Euclidean projection).
    pub fn clip(&self, x: &[T]) -> Vector<T> {
        Vector::new(
            x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .map(|(&v, (&l, &h))| v.max(l).min(h))
                .collect(),
        )
    }

    /// `sup_{z in box} ‖z‖`, attained at the corner farthest from the origin.
    pub fn theta_bar(&self) -> T {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| {
                let m = l.abs().max(h.abs());
                m * m
            })
            .sum::<T>()
            .sqrt()
    }
}

/// Simulated plant `y = φᵀθ + d` read through a quantizer.
#[derive(Clone, Debug)]
pub struct TrueSystem<T> {
    theta: Vector<T>,
    noise: GaussianNoise<T>,
    quantizer: QuantizerSpec<T>,
}

impl<T: Scalar> TrueSystem<T> {
    pub fn new(
        theta: Vector<T>,
        noise: GaussianNoise<T>,
        quantizer: QuantizerSpec<T>,
        domain: &BoxDomain<T>,
    ) -> Result<Self> {
        if theta.len() != domain.dim() {
            return Err(Error::config(
                "theta",
                format!("has {} coordinates but the box has {}", theta.len(), domain.dim()),
            ));
        }
        if !domain.contains(&theta) {
            return Err(Error::config("theta", "true parameter lies outside the box"));
        }
        Ok(TrueSystem {
            theta,
            noise,
            quantizer,
        })
    }

    pub fn theta(&self) -> &Vector<T> {
        &self.theta
    }

    pub fn noise(&self) -> &GaussianNoise<T> {
        &self.noise
    }

    pub fn quantizer(&self) -> &QuantizerSpec<T> {
        &self.quantizer
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    /// Noise-free output `φᵀθ`.
    pub fn mean_output(&self, phi: &[T]) -> Result<T> {
        if phi.len() != self.theta.len() {
            return Err(Error::DimensionMismatch {
                expected: self.theta.len(),
                found: phi.len(),
            });
        }
        Ok(self.theta.dot(phi))
    }

    /// One observation. Returns the sensor level and the hidden output
    /// (the latter only for test oracles).
    pub fn step<R: RngCore + ?Sized>(&self, phi: &[T], rng: &mut R) -> Result<(usize, T)> {
        let y = self.mean_output(phi)? + self.noise.sample(rng);
        Ok((self.quantizer.quantize(y), y))
    }
}

/// Cell probabilities `H_i(x)` and their density differences `h_i(x)`,
/// `i = 1..=m+1`, stored zero-based.
#[derive(Clone, Debug, PartialEq)]
pub struct CellProbs<T> {
    pub prob: Vec<T>,
    pub density_diff: Vec<T>,
}

/// `H_i = F(C_i − x) − F(C_{i−1} − x)` and `h_i = f(C_i − x) − f(C_{i−1} − x)`.
///
/// Cells lying above the median are differenced through the survival
/// function so that tail probabilities keep full relative precision.
pub fn cell_probs<T: Scalar>(x: T, q: &QuantizerSpec<T>, noise: &GaussianNoise<T>) -> CellProbs<T> {
    let m = q.num_thresholds();
    let mut prob = Vec::with_capacity(m + 1);
    let mut density_diff = Vec::with_capacity(m + 1);
    let mut prev_z = T::neg_infinity();
    for i in 0..=m {
        let z = if i < m { q.thresholds()[i] - x } else { T::infinity() };
        let p = if prev_z > T::zero() {
            noise.sf(prev_z) - noise.sf(z)
        } else {
            noise.cdf(z) - noise.cdf(prev_z)
        };
        prob.push(p);
        density_diff.push(noise.pdf(z) - noise.pdf(prev_z));
        prev_z = z;
    }
    CellProbs { prob, density_diff }
}

/// Scores `∂/∂x log H_i(x) = −h_i(x) / H_i(x)` of each cell.
///
/// Cells lying entirely in one tail are evaluated as ratios of scaled
/// complementary error functions, so the score stays exact where both
/// `H_i` and `h_i` underflow.
pub fn cell_scores<T: Scalar>(x: T, q: &QuantizerSpec<T>, noise: &GaussianNoise<T>) -> Vec<T> {
    let sigma = noise.sigma();
    let m = q.num_thresholds();
    let mut out = Vec::with_capacity(m + 1);
    let mut lo = T::neg_infinity();
    for i in 0..=m {
        let hi = if i < m {
            (q.thresholds()[i] - x) / sigma
        } else {
            T::infinity()
        };
        let score = if hi <= T::zero() {
            -tail_ratio(-hi, -lo)
        } else if lo >= T::zero() {
            tail_ratio(lo, hi)
        } else {
            -(std_normal_pdf(hi) - std_normal_pdf(lo)) / (std_normal_cdf(hi) - std_normal_cdf(lo))
        };
        out.push(score / sigma);
        lo = hi;
    }
    out
}

/// `(φ(u) − φ(v)) / (Q(u) − Q(v))` for `0 ≤ u < v ≤ ∞`, `Q` the standard
/// normal survival function.
fn tail_ratio<T: Scalar>(u: T, v: T) -> T {
    let sqrt_2_over_pi = T::lit((2.0 / std::f64::consts::PI).sqrt());
    let r = T::lit(std::f64::consts::FRAC_1_SQRT_2);
    if v.is_infinite() {
        return sqrt_2_over_pi / erfcx(u * r);
    }
    let half_gap = (v - u) * (v + u) / T::lit(2.0);
    let decay = (-half_gap).exp();
    sqrt_2_over_pi * -(-half_gap).exp_m1() / (erfcx(u * r) - erfcx(v * r) * decay)
}

/// Source of regressor vectors `φ_1, φ_2, …`.
pub trait RegressorSource<T> {
    fn dim(&self) -> usize;

    /// Upper bound on `‖φ_k‖`.
    fn bound(&self) -> T;

    fn next_regressor(&mut self) -> Vector<T>;
}

/// Parameters of the third-order benchmark system.
pub mod example1 {
    pub const THETA: [f64; 3] = [-0.5, 1.0, -1.0];
    pub const BOX_LO: [f64; 3] = [-3.0, 0.0, -2.0];
    pub const BOX_HI: [f64; 3] = [3.0, 2.0, 0.0];
    pub const SIGMA: f64 = 1.5;
    pub const THRESHOLDS: [f64; 3] = [-1.0, 0.0, 0.5];
    pub const WQNP_ALPHAS: [f64; 4] = [1.0, 8.0, 14.0, 20.0];
    pub const WQNP_BETA: f64 = 0.5;
    pub const THETA0: [f64; 3] = [0.5, 0.5, 0.5];
    pub const P0_SCALE: f64 = 3.0;
    pub const TRIALS: usize = 500;
    pub const HORIZON: usize = 10_000;
    /// Base input levels cycled with period three.
    pub const INPUT_LEVELS: [f64; 3] = [-2.0, 0.0, 0.5];
    /// Width of the uniform perturbation added to each input.
    pub const JITTER: f64 = 0.1;
}

/// Input `u_j = level[j mod 3] + e_j`.
pub fn example1_input<T: Scalar>(j: usize, e: T) -> T {
    T::lit(example1::INPUT_LEVELS[j % 3]) + e
}

/// Regressors `φ_k = [1, u_k, u_{k−1}]` of the benchmark system, with
/// `e_j ~ Uniform[0, jitter]`.
#[derive(Clone, Debug)]
pub struct Example1Regressors<T> {
    rng: SimRng,
    jitter: T,
    k: usize,
    prev_u: T,
}

impl<T: Scalar> Example1Regressors<T> {
    pub fn new(rng: SimRng) -> Self {
        Self::with_jitter(rng, T::lit(example1::JITTER))
    }

    pub fn with_jitter(mut rng: SimRng, jitter: T) -> Self {
        let e0 = T::lit(rng.gen::<f64>()) * jitter;
        Example1Regressors {
            rng,
            jitter,
            k: 0,
            prev_u: example1_input(0, e0),
        }
    }

    /// Index of the regressor most recently returned.
    pub fn step_index(&self) -> usize {
        self.k
    }
}

impl<T: Scalar> RegressorSource<T> for Example1Regressors<T> {
    fn dim(&self) -> usize {
        3
    }

    fn bound(&self) -> T {
        let u = T::lit(2.0) + T::lit(example1::JITTER);
        (T::one() + T::lit(2.0) * u * u).sqrt()
    }

    fn next_regressor(&mut self) -> Vector<T> {
        self.k += 1;
        let e = T::lit(self.rng.gen::<f64>()) * self.jitter;
        let u = example1_input(self.k, e);
        let phi = Vector::new(vec![T::one(), u, self.prev_u]);
        self.prev_u = u;
        phi
    }
}

/// Fixed sequence of regressors repeated cyclically.
#[derive(Clone, Debug)]
pub struct CyclicRegressors<T> {
    seq: Vec<Vector<T>>,
    pos: usize,
}

impl<T: Scalar> CyclicRegressors<T> {
    pub fn new(seq: Vec<Vector<T>>) -> Result<Self> {
        let n = seq
            .first()
            .map(|v| v.len())
            .ok_or_else(|| Error::config("sequence", "must not be empty"))?;
        if n == 0 {
            return Err(Error::config(
                "sequence",
                "regressors must have at least one coordinate",
            ));
        }
        if let Some(bad) = seq.iter().find(|v| v.len() != n) {
            return Err(Error::config(
                "sequence",
                format!("all regressors must have {n} coordinates, found one with {}", bad.len()),
            ));
        }
        if seq.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("sequence", "regressor entries must be finite"));
        }
        Ok(CyclicRegressors { seq, pos: 0 })
    }
}

impl<T: Scalar> RegressorSource<T> for CyclicRegressors<T> {
    fn dim(&self) -> usize {
        self.seq[0].len()
    }

    fn bound(&self) -> T {
        self.seq.iter().map(|v| v.norm()).fold(T::zero(), T::max)
    }

    fn next_regressor(&mut self) -> Vector<T> {
        let phi = self.seq[self.pos].clone();
        self.pos = (self.pos + 1) % self.seq.len();
        phi
    }
}

impl<T, S: RegressorSource<T> + ?Sized> RegressorSource<T> for Box<S> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn bound(&self) -> T {
        (**self).bound()
    }
    fn next_regressor(&mut self) -> Vector<T> {
        (**self).next_regressor()
    }
}
