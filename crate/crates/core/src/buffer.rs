//! Covert buffering by slowdown.
//!
//! Alice holds the Jack→Steve stream back by stretching time: the packet that
//! arrives at `a` leaves at `a·λ/(λ-Δ)`. A stretched Poisson(λ) process is
//! Poisson(λ-Δ), and because the factor exceeds one no packet leaves before
//! it arrives. Whatever has arrived but not left by the end of the window is
//! Alice's buffer.

use crate::detector::{estimate_errors, Detector, DetectorConfig, ErrorEstimate, LrtDetector};
use crate::divergence::buffering_budget;
use crate::error::{ensure, Result};
use crate::rng::{RngSeed, StreamRng};
use crate::trace::{sample_interarrival, PacketTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BufferEvent {
    Arrival,
    Release,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BufferTimeline {
    /// Arrivals and releases in time order; at equal times the arrival
    /// comes first.
    pub events: Vec<(f64, BufferEvent)>,
    pub occupancy_at_end: usize,
    pub max_occupancy: usize,
    pub min_occupancy: usize,
}

impl BufferTimeline {
    pub fn arrivals(&self) -> usize {
        self.events
            .iter()
            .filter(|(_, e)| *e == BufferEvent::Arrival)
            .count()
    }

    pub fn releases(&self) -> usize {
        self.events.len() - self.arrivals()
    }
}

/// Slows `overt` from rate `lambda` to `lambda - delta` over `[0, window]`.
///
/// Returns the released stream on `[0, window]` and the buffer history.
pub fn slowdown(
    overt: &PacketTrace,
    lambda: f64,
    delta: f64,
    window: f64,
) -> Result<(PacketTrace, BufferTimeline)> {
    let released = release_times(overt, lambda, delta, window)?;
    let arrivals = &overt.times()[..overt.times().partition_point(|&t| t <= window)];

    let mut events = Vec::with_capacity(arrivals.len() + released.len());
    let (mut i, mut j) = (0, 0);
    let mut occupancy = 0usize;
    let (mut max_occ, mut min_occ) = (0usize, 0usize);
    while i < arrivals.len() || j < released.len() {
        if j == released.len() || (i < arrivals.len() && arrivals[i] <= released[j]) {
            events.push((arrivals[i], BufferEvent::Arrival));
            occupancy += 1;
            i += 1;
        } else {
            events.push((released[j], BufferEvent::Release));
            // release j is packet j, whose arrival is already counted
            debug_assert!(occupancy > 0);
            occupancy -= 1;
            j += 1;
        }
        max_occ = max_occ.max(occupancy);
        min_occ = min_occ.min(occupancy);
    }

    let timeline = BufferTimeline {
        events,
        occupancy_at_end: occupancy,
        max_occupancy: max_occ,
        min_occupancy: min_occ,
    };
    Ok((PacketTrace::from_sorted(released, window), timeline))
}

// Release times of the stretched stream inside the window, without the
// event log.
fn release_times(overt: &PacketTrace, lambda: f64, delta: f64, window: f64) -> Result<Vec<f64>> {
    ensure(lambda > 0.0 && lambda.is_finite(), "lambda", || {
        format!("must be positive, got {lambda}")
    })?;
    ensure(delta >= 0.0 && delta < lambda, "delta", || {
        format!("must satisfy 0 <= delta < lambda = {lambda}, got {delta}")
    })?;
    ensure(window > 0.0 && window <= overt.horizon(), "window", || {
        format!(
            "must lie in (0, {}] (the overt horizon), got {window}",
            overt.horizon()
        )
    })?;
    let stretch = lambda / (lambda - delta);
    Ok(overt
        .times()
        .iter()
        .map(|&a| a * stretch)
        .take_while(|&r| r <= window)
        .collect())
}

/// Error rates when Willie watches a buffering window of length `window`
/// and Alice slows the stream by `delta`. The reported P_FA / P_MD belong
/// to the count LRT for the slowdown (or the level-0.05 Chebyshev count
/// detector when `delta == 0`).
pub fn buffering_errors(
    lambda: f64,
    delta: f64,
    window: f64,
    trials: usize,
    seed: RngSeed,
) -> Result<ErrorEstimate> {
    let gen0 = move |rng: &mut StreamRng| sample_interarrival(lambda, window, rng);
    let gen1 = move |rng: &mut StreamRng| {
        let overt = sample_interarrival(lambda, window, rng)?;
        release_times(&overt, lambda, delta, window).map(|r| PacketTrace::from_sorted(r, window))
    };
    let detector: Box<dyn Detector> = if delta > 0.0 {
        Box::new(LrtDetector::new(lambda, -delta, window)?)
    } else {
        Box::new(DetectorConfig::calibrated(lambda, window, 0.05)?)
    };
    estimate_errors(&gen0, &gen1, detector.as_ref(), trials, seed)
}

/// Buffering at the covert budget for `epsilon` over a window of length
/// `window`, checked against Willie's count tests.
pub fn buffering_covertness_check(
    lambda: f64,
    window: f64,
    epsilon: f64,
    trials: usize,
    seed: RngSeed,
) -> Result<ErrorEstimate> {
    let budget = buffering_budget(lambda, window, epsilon)?;
    buffering_errors(lambda, budget.delta, window, trials, seed)
}
