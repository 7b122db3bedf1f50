//! Poisson relative entropy and the covertness budgets derived from it.
//!
//! All divergences are in nats.

use crate::error::{ensure, Result};
use crate::scalar::Real;

/// A covert rate perturbation `delta` chosen for covertness `epsilon` over
/// `horizon` seconds of a rate-`base_rate` stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovertBudget<F> {
    pub epsilon: F,
    pub delta: F,
    pub horizon: F,
    pub base_rate: F,
}

impl<F: Real> CovertBudget<F> {
    /// Expected number of packets added (or held back) over the horizon.
    pub fn packets(&self) -> F {
        self.delta * self.horizon
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceReport<F> {
    pub kl_nats: F,
    /// `1 - sqrt(kl/2)`, the floor on `P_FA + P_MD`.
    pub tv_bound: F,
}

impl<F: Real> DivergenceReport<F> {
    pub fn from_kl(kl_nats: F) -> Result<Self> {
        let floor = tv_error_floor(kl_nats)?;
        Ok(Self {
            kl_nats,
            tv_bound: floor.value,
        })
    }
}

/// Exact relative entropy together with its quadratic upper bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlBound<F> {
    pub exact: F,
    pub bound: F,
}

/// Lower bound on a detector's error sum. `vacuous` is set when the value
/// is not positive, in which case it says nothing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvFloor<F> {
    pub value: F,
    pub vacuous: bool,
}

fn positive<F: Real>(x: F, name: &'static str) -> Result<()> {
    ensure(x.is_finite() && x > F::zero(), name, || {
        format!("must be positive, got {x}")
    })
}

fn unit_open<F: Real>(x: F, name: &'static str) -> Result<()> {
    ensure(x > F::zero() && x < F::one(), name, || {
        format!("must lie in (0, 1), got {x}")
    })
}

/// `D(Poi(mean1) || Poi(mean2)) = mean2 - mean1 + mean1 ln(mean1/mean2)`.
pub fn kl_poisson<F: Real>(mean1: F, mean2: F) -> Result<F> {
    positive(mean1, "mean1")?;
    positive(mean2, "mean2")?;
    let kl = mean2 - mean1 + mean1 * (mean1 / mean2).ln();
    Ok(kl.max(F::zero()))
}

/// Insertion rate keeping the count divergence at or below `2 epsilon^2`:
/// `delta = epsilon * sqrt(2 lambda / T)`.
pub fn insertion_budget<F: Real>(lambda: F, horizon: F, epsilon: F) -> Result<CovertBudget<F>> {
    positive(lambda, "lambda")?;
    positive(horizon, "horizon")?;
    unit_open(epsilon, "epsilon")?;
    let delta = epsilon * (F::lit(2.0) * lambda / horizon).sqrt();
    Ok(CovertBudget {
        epsilon,
        delta,
        horizon,
        base_rate: lambda,
    })
}

/// Slowdown rate for a buffering window of length `window`:
/// `delta = epsilon * sqrt(2 lambda / window)`, required to stay below `lambda`.
pub fn buffering_budget<F: Real>(lambda: F, window: F, epsilon: F) -> Result<CovertBudget<F>> {
    let budget = insertion_budget(lambda, window, epsilon)?;
    ensure(budget.delta < lambda, "window", || {
        format!(
            "slowdown {} would reach the base rate {lambda}; the window is too short",
            budget.delta
        )
    })?;
    Ok(budget)
}

/// Divergence between the count under a rate-`lambda` stream and under one
/// with `delta` packets/s inserted: exact `ΔT - λT ln(1 + Δ/λ)`, bound
/// `Δ²T/λ`.
pub fn kl_bound_insertion<F: Real>(lambda: F, delta: F, horizon: F) -> Result<KlBound<F>> {
    positive(lambda, "lambda")?;
    positive(horizon, "horizon")?;
    ensure(delta.is_finite() && delta >= F::zero(), "delta", || {
        format!("must be nonnegative, got {delta}")
    })?;
    let exact = delta * horizon - lambda * horizon * (delta / lambda).ln_1p();
    Ok(KlBound {
        exact: exact.max(F::zero()),
        bound: delta * delta * horizon / lambda,
    })
}

/// Divergence of a stream slowed from `lambda` to `lambda - delta` against
/// the unmodified stream: exact `ΔT - (λ-Δ)T ln(1 + Δ/(λ-Δ))`, bound
/// `TΔ²/(2(λ-Δ))`.
pub fn kl_bound_buffering<F: Real>(lambda: F, delta: F, horizon: F) -> Result<KlBound<F>> {
    positive(lambda, "lambda")?;
    positive(horizon, "horizon")?;
    ensure(delta >= F::zero() && delta < lambda, "delta", || {
        format!("must satisfy 0 <= delta < lambda = {lambda}, got {delta}")
    })?;
    let slow = lambda - delta;
    let exact = delta * horizon - slow * horizon * (delta / slow).ln_1p();
    Ok(KlBound {
        exact: exact.max(F::zero()),
        bound: horizon * delta * delta / (F::lit(2.0) * slow),
    })
}

/// `1 - sqrt(kl/2)`, returned unclamped.
pub fn tv_error_floor<F: Real>(kl: F) -> Result<TvFloor<F>> {
    ensure(kl >= F::zero(), "kl", || {
        format!("must be nonnegative, got {kl}")
    })?;
    let value = F::one() - (kl / F::lit(2.0)).sqrt();
    Ok(TvFloor {
        value,
        vacuous: value <= F::zero(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn kl_poisson_examples() {
        assert_eq!(kl_poisson(3.0, 3.0).unwrap(), 0.0);
        assert_abs_diff_eq!(
            kl_poisson(1.0, 2.0).unwrap(),
            0.306_852_819_440_054_7,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            kl_poisson(2.0, 1.0).unwrap(),
            0.386_294_361_119_890_6,
            epsilon = 1e-12
        );
        assert!(kl_poisson(0.0, 1.0).is_err());
        assert!(kl_poisson(1.0, -1.0).is_err());
        assert_abs_diff_eq!(
            kl_poisson(1.0_f32, 2.0).unwrap(),
            0.306_852_8,
            epsilon = 1e-6
        );
    }

    #[test]
    fn insertion_budget_examples() {
        let b = insertion_budget(50.0, 200.0, 0.2).unwrap();
        assert_abs_diff_eq!(b.delta, 0.141_421_356_237_309_5, epsilon = 1e-12);
        assert_abs_diff_eq!(b.packets(), 28.284_271_247_461_9, epsilon = 1e-9);
        let b = insertion_budget(100.0, 400.0, 0.1).unwrap();
        assert_abs_diff_eq!(b.packets(), 28.284_271_247_461_9, epsilon = 1e-9);
        assert!(insertion_budget(50.0, 200.0, 1.0).is_err());
        assert!(insertion_budget(50.0, 200.0, 0.0).is_err());
        assert!(insertion_budget(50.0, 200.0, 1e-9).unwrap().delta < 1e-9);
    }

    #[test]
    fn budget_meets_its_divergence_target() {
        let b = insertion_budget(50.0, 200.0, 0.2).unwrap();
        let kl: KlBound<f64> = kl_bound_insertion(50.0, b.delta, 200.0).unwrap();
        assert_abs_diff_eq!(kl.bound, 0.08, epsilon = 1e-12);
        assert!(kl.exact <= kl.bound);
        assert!((kl.bound / 2.0).sqrt() <= 0.2 + 1e-12);
    }

    #[test]
    fn kl_bound_examples() {
        let z = kl_bound_insertion(5.0, 0.0, 3.0).unwrap();
        assert_eq!((z.exact, z.bound), (0.0, 0.0));
        let k = kl_bound_insertion(1.0, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(k.exact, 1.0 - std::f64::consts::LN_2, epsilon = 1e-12);
        assert_eq!(k.bound, 1.0);

        let z = kl_bound_buffering(5.0, 0.0, 3.0).unwrap();
        assert_eq!((z.exact, z.bound), (0.0, 0.0));
        assert_abs_diff_eq!(
            kl_bound_buffering(1.0, 0.5, 1.0).unwrap().bound,
            0.25,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            kl_bound_buffering(2.0, 1.0, 1.0).unwrap().exact,
            1.0 - std::f64::consts::LN_2,
            epsilon = 1e-12
        );
        assert!(kl_bound_buffering(1.0, 1.0, 1.0).is_err());
        assert!(kl_bound_insertion(1.0, -0.1, 1.0).is_err());
    }

    #[test]
    fn tv_floor_examples() {
        assert_eq!(tv_error_floor(0.0).unwrap().value, 1.0);
        assert_abs_diff_eq!(tv_error_floor(0.08).unwrap().value, 0.8, epsilon = 1e-12);
        let f = tv_error_floor(8.0).unwrap();
        assert_eq!(f.value, -1.0);
        assert!(f.vacuous);
        assert!(tv_error_floor(-1e-3).is_err());
        let r = DivergenceReport::from_kl(0.08).unwrap();
        assert!(r.tv_bound <= 1.0);
    }

    #[test]
    fn buffering_budget_requires_room_below_lambda() {
        assert!(buffering_budget(0.01, 0.01, 0.9).is_err());
        let b = buffering_budget(50.0, 200.0, 0.2).unwrap();
        assert!(b.delta < 50.0);
    }
}
