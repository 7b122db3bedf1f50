//! Symmetric ±1 random walk: probability of staying at or below `m` for
//! `k` steps, by simulation and by the reflection principle.
//!
//! This is the buffer picture of the transmission phase: every event of the
//! merged arrival/release process moves the buffer up or down by one with
//! equal probability, and the buffer runs dry once the walk (counted in
//! releases minus arrivals) climbs to `m + 1`.

use rand::RngCore;
use rayon::prelude::*;

use crate::error::{ensure, Error, Result};
use crate::rng::RngSeed;

/// Largest step count [`exact_survival`] accepts.
pub const MAX_EXACT_STEPS: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkResult {
    /// The barrier sits at `m + 1`.
    pub m: u64,
    pub steps: u64,
    pub trials: u64,
    /// Fraction of walks whose maximum over `steps` steps stayed `<= m`.
    pub survival_rate: f64,
}

impl WalkResult {
    /// Binomial standard error of `survival_rate` around probability `p`.
    pub fn sigma(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

/// Runs `trials` independent walks; walk `i` uses stream `i` of `seed`.
pub fn simulate_survival(m: u64, steps: u64, trials: u64, seed: RngSeed) -> Result<WalkResult> {
    ensure(steps >= 1, "steps", || "need at least one step".into())?;
    ensure(trials >= 1, "trials", || "need at least one trial".into())?;
    let survivors: u64 = (0..trials)
        .into_par_iter()
        .map(|i| survives(m, steps, &mut seed.stream(i)) as u64)
        .sum();
    Ok(WalkResult {
        m,
        steps,
        trials,
        survival_rate: survivors as f64 / trials as f64,
    })
}

fn survives<R: RngCore>(m: u64, steps: u64, rng: &mut R) -> bool {
    let barrier = m as i64 + 1;
    let mut z = 0i64;
    let mut left = steps;
    while left > 0 {
        let bits = rng.next_u64();
        let take = left.min(64);
        for b in 0..take {
            z += if (bits >> b) & 1 == 1 { 1 } else { -1 };
            if z >= barrier {
                return false;
            }
        }
        left -= take;
    }
    true
}

/// `P(max_{t <= k} S_t <= m) = P(S_k <= m) - P(S_k >= m + 2)`, from exact
/// binomial sums in log space.
pub fn exact_survival(m: u64, steps: u64) -> Result<f64> {
    ensure(steps >= 1, "steps", || "need at least one step".into())?;
    if steps > MAX_EXACT_STEPS {
        return Err(Error::Capability(format!(
            "exact survival supports at most {MAX_EXACT_STEPS} steps, got {steps}"
        )));
    }
    if m >= steps {
        return Ok(1.0);
    }
    let k = steps as usize;
    let mut ln_fact = vec![0.0f64; k + 1];
    for i in 1..=k {
        ln_fact[i] = ln_fact[i - 1] + (i as f64).ln();
    }
    let ln_half_k = -(k as f64) * std::f64::consts::LN_2;
    // S_k = 2j - k for j up-steps
    let pmf = |j: usize| (ln_fact[k] - ln_fact[j] - ln_fact[k - j] + ln_half_k).exp();

    let m = m as usize;
    let upto = (m + k) / 2; // largest j with 2j - k <= m
    let from = (m + 2 + k).div_ceil(2); // smallest j with 2j - k >= m + 2
    let below: f64 = (0..=upto.min(k)).map(pmf).sum();
    let above: f64 = (from..=k).map(pmf).sum();
    Ok((below - above).clamp(0.0, 1.0))
}
