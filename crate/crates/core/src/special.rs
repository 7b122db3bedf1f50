//! Error function and its inverse.

use crate::scalar::Real;

const MAX_TERMS: usize = 500;

/// Below this argument `erf` is summed from its power series; above it,
/// `erfc` comes from the continued fraction.
const SERIES_CUTOFF: f64 = 3.0;

pub fn erf<F: Real>(x: F) -> F {
    if x.is_nan() {
        return x;
    }
    if x < F::zero() {
        return -erf(-x);
    }
    if x < F::lit(SERIES_CUTOFF) {
        erf_series(x)
    } else {
        F::one() - erfc_fraction(x)
    }
}

/// Complementary error function `1 - erf(x)`, accurate in the upper tail.
pub fn erfc<F: Real>(x: F) -> F {
    if x.is_nan() {
        return x;
    }
    if x < F::zero() {
        return F::lit(2.0) - erfc(-x);
    }
    if x < F::lit(SERIES_CUTOFF) {
        F::one() - erf_series(x)
    } else {
        erfc_fraction(x)
    }
}

// erf(x) = 2/sqrt(pi) * exp(-x^2) * sum_n 2^n x^(2n+1) / (2n+1)!!
// Every term is positive, so there is no cancellation.
fn erf_series<F: Real>(x: F) -> F {
    let x2 = x * x;
    let two = F::lit(2.0);
    let mut term = x;
    let mut sum = x;
    for n in 1..MAX_TERMS {
        term = term * two * x2 / F::from_count(2 * n as u64 + 1);
        sum += term;
        if term <= sum * F::epsilon() {
            break;
        }
    }
    F::FRAC_2_SQRT_PI() * (-x2).exp() * sum
}

// erfc(x) = exp(-x^2)/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
// evaluated with the modified Lentz method.
fn erfc_fraction<F: Real>(x: F) -> F {
    let tiny = F::min_positive_value().sqrt();
    let mut f = x;
    let mut c = f;
    let mut d = F::zero();
    for k in 1..MAX_TERMS {
        let a = F::from_count(k as u64) / F::lit(2.0);
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        d = d.recip();
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        let delta = c * d;
        f *= delta;
        if (delta - F::one()).abs() <= F::epsilon() {
            break;
        }
    }
    (-x * x).exp() * (F::FRAC_2_SQRT_PI() / F::lit(2.0)) / f
}

/// Inverse of [`erf`] on `(-1, 1)`, by bisection on `erf`.
///
/// Returns `±inf` at `±1` and NaN outside `[-1, 1]`.
pub fn erf_inv<F: Real>(y: F) -> F {
    if y.is_nan() || y.abs() > F::one() {
        return F::nan();
    }
    if y == F::one() {
        return F::infinity();
    }
    if y == -F::one() {
        return F::neg_infinity();
    }
    if y == F::zero() {
        return F::zero();
    }
    if y < F::zero() {
        return -erf_inv(-y);
    }
    let mut lo = F::zero();
    let mut hi = F::one();
    while erf(hi) < y {
        lo = hi;
        hi = hi + hi;
    }
    let half = F::lit(0.5);
    for _ in 0..200 {
        let mid = (lo + hi) * half;
        if mid <= lo || mid >= hi {
            break;
        }
        if erf(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) * half
}
