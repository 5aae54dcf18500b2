#![allow(clippy::excessive_precision)]

use crate::error::{Error, Result};
use crate::scalar::Scalar;

// Rational approximations of erf/erfc from FreeBSD msun s_erf.c
// (Copyright (C) 1993 Sun Microsystems, Inc.; permission to use, copy,
// modify and distribute freely granted provided this notice is preserved).
// Each branch is accurate to better than 2^-57 relative.

const ERX: f64 = 8.45062911510467529297e-01;

const PP: [f64; 5] = [
    1.28379167095512558561e-01,
    -3.25042107247001499370e-01,
    -2.84817495755985104766e-02,
    -5.77027029648944159157e-03,
    -2.37630166566501626084e-05,
];
const QQ: [f64; 6] = [
    1.0,
    3.97917223959155352819e-01,
    6.50222499887672944485e-02,
    5.08130628187576562776e-03,
    1.32494738004321644526e-04,
    -3.96022827877536812320e-06,
];

const PA: [f64; 7] = [
    -2.36211856075265944077e-03,
    4.14856118683748331666e-01,
    -3.72207876035701323847e-01,
    3.18346619901161753674e-01,
    -1.10894694282396677476e-01,
    3.54783043256182359371e-02,
    -2.16637559486879084300e-03,
];
const QA: [f64; 7] = [
    1.0,
    1.06420880400844228286e-01,
    5.40397917702171048937e-01,
    7.18286544141962662868e-02,
    1.26171219808761642112e-01,
    1.36370839120290507362e-02,
    1.19844998467991074170e-02,
];

const RA: [f64; 8] = [
    -9.86494403484714822705e-03,
    -6.93858572707181764372e-01,
    -1.05586262253232909814e+01,
    -6.23753324503260060396e+01,
    -1.62396669462573470355e+02,
    -1.84605092906711035994e+02,
    -8.12874355063065934246e+01,
    -9.81432934416914548592e+00,
];
const SA: [f64; 9] = [
    1.0,
    1.96512716674392571292e+01,
    1.37657754143519042600e+02,
    4.34565877475229228821e+02,
    6.45387271733267880336e+02,
    4.29008140027567833386e+02,
    1.08635005541779435134e+02,
    6.57024977031928170135e+00,
    -6.04244152148580987438e-02,
];

const RB: [f64; 7] = [
    -9.86494292470009928597e-03,
    -7.99283237680523006574e-01,
    -1.77579549177547519889e+01,
    -1.60636384855821916062e+02,
    -6.37566443368389627722e+02,
    -1.02509513161107724954e+03,
    -4.83519191608651397019e+02,
];
const SB: [f64; 8] = [
    1.0,
    3.03380607434824582924e+01,
    3.25792512996573918826e+02,
    1.53672958608443695994e+03,
    3.19985821950859553908e+03,
    2.55305040643316442583e+03,
    4.74528541206955367215e+02,
    -2.24409524465858183362e+01,
];

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_677_94;

#[inline]
fn horner<T: Scalar>(coeffs: &[f64], x: T) -> T {
    coeffs.iter().rev().fold(T::zero(), |acc, &c| acc * x + T::lit(c))
}

/// Complementary error function.
pub fn erfc<T: Scalar>(x: T) -> T {
    if x.is_nan() {
        return x;
    }
    let one = T::one();
    let two = T::lit(2.0);
    let neg = x < T::zero();
    let ax = x.abs();

    if ax < T::lit(0.84375) {
        if ax < T::lit(1.0e-17) {
            return one - x;
        }
        let z = ax * ax;
        let y = horner(&PP, z) / horner(&QQ, z);
        let erf_ax = if ax < T::lit(0.25) {
            ax + ax * y
        } else {
            T::lit(0.5) + (ax * y + (ax - T::lit(0.5)))
        };
        return if neg { one + erf_ax } else { one - erf_ax };
    }

    if ax < T::lit(1.25) {
        let s = ax - one;
        let pq = horner(&PA, s) / horner(&QA, s);
        return if neg {
            one + T::lit(ERX) + pq
        } else {
            one - T::lit(ERX) - pq
        };
    }

    if ax >= T::lit(28.0) {
        return if neg { two } else { T::zero() };
    }
    if neg && ax >= T::lit(6.0) {
        return two;
    }

    let s = one / (ax * ax);
    let rs = if ax < T::lit(1.0 / 0.35) {
        horner(&RA, s) / horner(&SA, s)
    } else {
        horner(&RB, s) / horner(&SB, s)
    };
    // Split exp(-x^2) so the dominant square is computed exactly.
    let scale = T::lit(1_048_576.0);
    let hi = (ax * scale).floor() / scale;
    let r = (-hi * hi - T::lit(0.5625)).exp() * ((hi - ax) * (hi + ax) + rs).exp();
    let tail = r / ax;
    if neg {
        two - tail
    } else {
        tail
    }
}

/// Scaled complementary error function `exp(x²)·erfc(x)`. Finite for every
/// finite `x ≥ 0`, decaying like `1/(x√π)`.
pub fn erfcx<T: Scalar>(x: T) -> T {
    if x.is_nan() {
        return x;
    }
    if x < T::lit(1.25) {
        return (x * x).exp() * erfc(x);
    }
    if x.is_infinite() {
        return T::zero();
    }
    let s = T::one() / (x * x);
    let rs = if x < T::lit(1.0 / 0.35) {
        horner(&RA, s) / horner(&SA, s)
    } else {
        horner(&RB, s) / horner(&SB, s)
    };
    (rs - T::lit(0.5625)).exp() / x
}

#[inline]
pub fn std_normal_pdf<T: Scalar>(z: T) -> T {
    T::lit(FRAC_1_SQRT_2PI) * (-(z * z) / T::lit(2.0)).exp()
}

#[inline]
pub fn std_normal_cdf<T: Scalar>(z: T) -> T {
    T::lit(0.5) * erfc(-z / T::lit(std::f64::consts::SQRT_2))
}

/// Upper tail `1 - Φ(z)` without cancellation for large positive `z`.
#[inline]
pub fn std_normal_sf<T: Scalar>(z: T) -> T {
    T::lit(0.5) * erfc(z / T::lit(std::f64::consts::SQRT_2))
}

fn check_sigma<T: Scalar>(sigma: T) -> Result<()> {
    if sigma.is_finite() && sigma > T::zero() {
        Ok(())
    } else {
        Err(Error::Domain(format!("sigma must be finite and positive, got {sigma}")))
    }
}

/// Density of `N(0, sigma^2)` at `x`.
pub fn gauss_pdf<T: Scalar>(x: T, sigma: T) -> Result<T> {
    check_sigma(sigma)?;
    if !x.is_finite() {
        return Err(Error::Domain(format!("x must be finite, got {x}")));
    }
    Ok(std_normal_pdf(x / sigma) / sigma)
}

/// Distribution function of `N(0, sigma^2)` at `x`. Infinite `x` maps to 0 or 1.
pub fn gauss_cdf<T: Scalar>(x: T, sigma: T) -> Result<T> {
    check_sigma(sigma)?;
    Ok(std_normal_cdf(x / sigma))
}

/// Survival function `1 - F(x)` of `N(0, sigma^2)`.
pub fn gauss_sf<T: Scalar>(x: T, sigma: T) -> Result<T> {
    check_sigma(sigma)?;
    Ok(std_normal_sf(x / sigma))
}
