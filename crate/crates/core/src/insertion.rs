//! Packet insertion: Alice superimposes an independent Poisson(Δ) stream on
//! the overt Poisson(λ) stream, and Bob strips her packets back out.

use crate::detector::{
    calibrate_threshold, estimate_count_errors, estimate_errors, DetectorConfig, ErrorEstimate,
};
use crate::divergence::insertion_budget;
use crate::error::{ensure, Result};
use crate::rng::{RngSeed, StreamRng};
use crate::trace::{merge_with_sources, poisson_count, sample_interarrival, PacketTrace, Source};

/// How the Monte Carlo experiments realize each hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sampling {
    /// Full timestamp traces, merged packet by packet.
    #[default]
    Traces,
    /// Packet counts only: Poisson(λT) under H0 and Poisson(λT) plus an
    /// independent Poisson(ΔT) under H1. Count detectors see the same
    /// distribution as with traces at a fraction of the cost.
    Counts,
}

#[derive(Debug, Clone)]
pub struct InsertionTrial {
    pub overt: PacketTrace,
    pub covert: PacketTrace,
    /// What Willie sees.
    pub combined: PacketTrace,
    pub delta: f64,
    pub covert_count: usize,
    // Origin of each packet in `combined`. Only Bob (who can authenticate)
    // gets to use it, via `bob_recover`.
    origin: Vec<Source>,
}

impl InsertionTrial {
    /// Bob's view after discarding Alice's packets: the overt stream.
    pub fn bob_recover(&self) -> PacketTrace {
        let times = self
            .combined
            .times()
            .iter()
            .zip(&self.origin)
            .filter(|(_, &src)| src == Source::First)
            .map(|(&t, _)| t)
            .collect();
        PacketTrace::from_sorted(times, self.combined.horizon())
    }

    /// Timestamps of Alice's packets as Bob extracts them.
    pub fn bob_covert(&self) -> Vec<f64> {
        self.combined
            .times()
            .iter()
            .zip(&self.origin)
            .filter(|(_, &src)| src == Source::Second)
            .map(|(&t, _)| t)
            .collect()
    }
}

fn check(lambda: f64, delta: f64, horizon: f64) -> Result<()> {
    ensure(lambda > 0.0 && lambda.is_finite(), "lambda", || {
        format!("must be positive, got {lambda}")
    })?;
    ensure(delta >= 0.0 && delta.is_finite(), "delta", || {
        format!("must be nonnegative, got {delta}")
    })?;
    ensure(horizon > 0.0 && horizon.is_finite(), "horizon", || {
        format!("must be positive, got {horizon}")
    })
}

/// One realization drawn from `rng`: overt stream first, then covert.
pub fn insertion_trial_from(
    lambda: f64,
    delta: f64,
    horizon: f64,
    rng: &mut StreamRng,
) -> Result<InsertionTrial> {
    check(lambda, delta, horizon)?;
    let overt = sample_interarrival(lambda, horizon, rng)?;
    let covert = if delta > 0.0 {
        sample_interarrival(delta, horizon, rng)?
    } else {
        PacketTrace::empty(horizon)?
    };
    let (combined, origin) = merge_with_sources(&overt, &covert)?;
    Ok(InsertionTrial {
        covert_count: covert.len(),
        overt,
        covert,
        combined,
        delta,
        origin,
    })
}

pub fn run_insertion_trial(
    lambda: f64,
    delta: f64,
    horizon: f64,
    seed: RngSeed,
) -> Result<InsertionTrial> {
    insertion_trial_from(lambda, delta, horizon, &mut seed.rng())
}

/// Error rates of the Chebyshev count detector at level `alpha` against
/// insertion at rate `delta`, plus the best count-threshold error sum.
pub fn insertion_errors(
    lambda: f64,
    delta: f64,
    horizon: f64,
    alpha: f64,
    trials: usize,
    seed: RngSeed,
    sampling: Sampling,
) -> Result<ErrorEstimate> {
    check(lambda, delta, horizon)?;
    let cfg = DetectorConfig::calibrated(lambda, horizon, alpha)?;
    match sampling {
        Sampling::Traces => {
            let gen0 = move |rng: &mut StreamRng| sample_interarrival(lambda, horizon, rng);
            let gen1 = move |rng: &mut StreamRng| {
                insertion_trial_from(lambda, delta, horizon, rng).map(|t| t.combined)
            };
            estimate_errors(&gen0, &gen1, &cfg, trials, seed)
        }
        Sampling::Counts => {
            let gen0 = move |rng: &mut StreamRng| poisson_count(lambda * horizon, rng) as usize;
            let gen1 = move |rng: &mut StreamRng| {
                (poisson_count(lambda * horizon, rng) + poisson_count(delta * horizon, rng))
                    as usize
            };
            estimate_count_errors(&gen0, &gen1, &cfg, trials, seed)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingRow {
    pub horizon: f64,
    pub delta: f64,
    /// Expected covert packets, `Δ·T`.
    pub covert_packets: f64,
    /// Chebyshev threshold `U` of the count detector.
    pub threshold_u: f64,
    pub pfa: f64,
    pub pmd: f64,
    pub min_error_sum: f64,
}

/// Square-root-law sweep: for each horizon, insert at the covert budget
/// for `epsilon` and measure Willie's count detectors.
pub fn throughput_scaling_experiment(
    lambda: f64,
    horizons: &[f64],
    epsilon: f64,
    alpha: f64,
    trials: usize,
    seed: RngSeed,
    sampling: Sampling,
) -> Result<Vec<ScalingRow>> {
    sweep(lambda, horizons, alpha, trials, seed, sampling, |horizon| {
        Ok(insertion_budget(lambda, horizon, epsilon)?.delta)
    })
}

/// Companion converse sweep: insert `covert_packets(λT)` packets in
/// expectation, typically more than the budget allows.
pub fn overload_scaling_experiment(
    lambda: f64,
    horizons: &[f64],
    covert_packets: impl Fn(f64) -> f64,
    alpha: f64,
    trials: usize,
    seed: RngSeed,
    sampling: Sampling,
) -> Result<Vec<ScalingRow>> {
    sweep(lambda, horizons, alpha, trials, seed, sampling, |horizon| {
        Ok(covert_packets(lambda * horizon) / horizon)
    })
}

fn sweep(
    lambda: f64,
    horizons: &[f64],
    alpha: f64,
    trials: usize,
    seed: RngSeed,
    sampling: Sampling,
    rate_for: impl Fn(f64) -> Result<f64>,
) -> Result<Vec<ScalingRow>> {
    ensure(!horizons.is_empty(), "T", || {
        "need at least one horizon".into()
    })?;
    horizons
        .iter()
        .enumerate()
        .map(|(k, &horizon)| {
            let delta = rate_for(horizon)?;
            let threshold_u = calibrate_threshold(lambda, horizon, alpha)?;
            let est = insertion_errors(
                lambda,
                delta,
                horizon,
                alpha,
                trials,
                seed.derive(k as u64),
                sampling,
            )?;
            Ok(ScalingRow {
                horizon,
                delta,
                covert_packets: delta * horizon,
                threshold_u,
                pfa: est.pfa,
                pmd: est.pmd,
                min_error_sum: est.min_error_sum,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_delta_inserts_nothing() {
        let t = run_insertion_trial(5.0, 0.0, 10.0, RngSeed(1)).unwrap();
        assert_eq!(t.covert_count, 0);
        assert_eq!(t.combined, t.overt);
    }

    #[test]
    fn bob_recovers_overt_exactly() {
        for s in 0..20 {
            let t = run_insertion_trial(4.0, 1.5, 25.0, RngSeed(s)).unwrap();
            assert_eq!(t.bob_recover(), t.overt);
            assert_eq!(t.bob_covert(), t.covert.times());
            assert_eq!(t.combined.len(), t.overt.len() + t.covert_count);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(run_insertion_trial(0.0, 1.0, 1.0, RngSeed(0)).is_err());
        assert!(run_insertion_trial(1.0, -1.0, 1.0, RngSeed(0)).is_err());
        assert!(throughput_scaling_experiment(
            1.0,
            &[],
            0.2,
            0.05,
            10,
            RngSeed(0),
            Sampling::Traces
        )
        .is_err());
    }

    #[test]
    fn scaling_rows_follow_square_root() {
        let rows = throughput_scaling_experiment(
            2.0,
            &[10.0, 40.0],
            0.3,
            0.05,
            200,
            RngSeed(5),
            Sampling::Counts,
        )
        .unwrap();
        let r0 = rows[0].covert_packets / rows[0].horizon.sqrt();
        let r1 = rows[1].covert_packets / rows[1].horizon.sqrt();
        assert!((r0 - r1).abs() < 1e-12);
    }
}
