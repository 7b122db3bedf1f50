//! Willie's detectors.
//!
//! Under both hypotheses the observed stream is Poisson, so the packet count
//! over the observation window is a sufficient statistic: every detector
//! here reduces a trace to its count. [`estimate_errors`] runs any
//! [`Detector`] against two trace sources and also reports the error sum
//! of the best count-threshold test found empirically.

use rayon::prelude::*;

use crate::error::{ensure, Result};
use crate::rng::{RngSeed, StreamRng};
use crate::scalar::Real;
use crate::trace::PacketTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hypothesis {
    /// No covert activity.
    H0,
    /// Covert activity present.
    H1,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorReport {
    pub decision: Hypothesis,
    pub observed_count: usize,
    /// Count at or beyond which the detector flips to H1.
    pub threshold_used: f64,
}

pub trait Detector: Sync {
    fn decide(&self, trace: &PacketTrace) -> Result<DetectorReport>;
}

/// Chebyshev threshold `U = sqrt(λT/α)`, which keeps `P_FA <= α`.
pub fn calibrate_threshold<F: Real>(lambda: F, horizon: F, alpha: F) -> Result<F> {
    ensure(lambda > F::zero() && lambda.is_finite(), "lambda", || {
        format!("must be positive, got {lambda}")
    })?;
    ensure(
        horizon > F::zero() && horizon.is_finite(),
        "horizon",
        || format!("must be positive, got {horizon}"),
    )?;
    ensure(alpha > F::zero() && alpha < F::one(), "alpha", || {
        format!("must lie in (0, 1), got {alpha}")
    })?;
    Ok((lambda * horizon / alpha).sqrt())
}

/// Count-threshold detector: H1 iff `S >= λT + U`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    pub lambda: f64,
    pub horizon: f64,
    pub alpha: f64,
    pub threshold_u: f64,
}

impl DetectorConfig {
    /// Config with `U` chosen by [`calibrate_threshold`].
    pub fn calibrated(lambda: f64, horizon: f64, alpha: f64) -> Result<Self> {
        let threshold_u = calibrate_threshold(lambda, horizon, alpha)?;
        Ok(Self {
            lambda,
            horizon,
            alpha,
            threshold_u,
        })
    }

    pub fn critical_count(&self) -> f64 {
        self.lambda * self.horizon + self.threshold_u
    }
}

pub fn count_detect(trace: &PacketTrace, cfg: &DetectorConfig) -> Result<DetectorReport> {
    ensure(trace.horizon() == cfg.horizon, "horizon", || {
        format!(
            "trace horizon {} differs from detector horizon {}",
            trace.horizon(),
            cfg.horizon
        )
    })?;
    let s = trace.count();
    Ok(DetectorReport {
        decision: cfg.decide_count(s),
        observed_count: s,
        threshold_used: cfg.critical_count(),
    })
}

impl Detector for DetectorConfig {
    fn decide(&self, trace: &PacketTrace) -> Result<DetectorReport> {
        count_detect(trace, self)
    }
}

/// A detector that only looks at the packet count.
pub trait CountDetector: Sync {
    fn decide_count(&self, n: usize) -> Hypothesis;
}

impl CountDetector for DetectorConfig {
    fn decide_count(&self, n: usize) -> Hypothesis {
        if n as f64 >= self.critical_count() {
            Hypothesis::H1
        } else {
            Hypothesis::H0
        }
    }
}

/// Likelihood-ratio test between Poisson(λT) and Poisson((λ+Δ)T) counts.
/// `delta_hyp` is negative for a slowed-down alternative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrtDetector {
    pub lambda: f64,
    pub delta_hyp: f64,
    pub horizon: f64,
}

impl LrtDetector {
    pub fn new(lambda: f64, delta_hyp: f64, horizon: f64) -> Result<Self> {
        ensure(lambda > 0.0 && lambda.is_finite(), "lambda", || {
            format!("must be positive, got {lambda}")
        })?;
        ensure(horizon > 0.0 && horizon.is_finite(), "horizon", || {
            format!("must be positive, got {horizon}")
        })?;
        ensure(
            delta_hyp != 0.0 && delta_hyp > -lambda && delta_hyp.is_finite(),
            "delta_hyp",
            || {
                format!(
                    "must be nonzero and above -lambda = {}, got {delta_hyp}",
                    -lambda
                )
            },
        )?;
        Ok(Self {
            lambda,
            delta_hyp,
            horizon,
        })
    }

    /// `ln P1(n)/P0(n) = n ln(1 + Δ/λ) - ΔT`.
    pub fn log_ratio(&self, n: usize) -> f64 {
        n as f64 * (self.delta_hyp / self.lambda).ln_1p() - self.delta_hyp * self.horizon
    }

    /// Count at which the log ratio crosses zero.
    pub fn crossing(&self) -> f64 {
        self.delta_hyp * self.horizon / (self.delta_hyp / self.lambda).ln_1p()
    }
}

impl CountDetector for LrtDetector {
    fn decide_count(&self, n: usize) -> Hypothesis {
        if self.log_ratio(n) >= 0.0 {
            Hypothesis::H1
        } else {
            Hypothesis::H0
        }
    }
}

pub fn lrt_count_detect(trace: &PacketTrace, lrt: &LrtDetector) -> Result<DetectorReport> {
    ensure(trace.horizon() == lrt.horizon, "horizon", || {
        format!(
            "trace horizon {} differs from detector horizon {}",
            trace.horizon(),
            lrt.horizon
        )
    })?;
    let n = trace.count();
    Ok(DetectorReport {
        decision: lrt.decide_count(n),
        observed_count: n,
        threshold_used: lrt.crossing(),
    })
}

impl Detector for LrtDetector {
    fn decide(&self, trace: &PacketTrace) -> Result<DetectorReport> {
        lrt_count_detect(trace, self)
    }
}

/// Draws one trace per call from the caller's stream.
pub trait TraceSource: Sync {
    fn draw(&self, rng: &mut StreamRng) -> Result<PacketTrace>;
}

impl<G> TraceSource for G
where
    G: Fn(&mut StreamRng) -> Result<PacketTrace> + Sync,
{
    fn draw(&self, rng: &mut StreamRng) -> Result<PacketTrace> {
        self(rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorEstimate {
    pub pfa: f64,
    pub pmd: f64,
    pub trials: usize,
    /// Smallest `P_FA + P_MD` over all count-threshold tests, in either
    /// direction, evaluated on the pooled samples.
    pub min_error_sum: f64,
}

impl ErrorEstimate {
    pub fn error_sum(&self) -> f64 {
        self.pfa + self.pmd
    }
}

/// Monte Carlo error rates of `detector`, with trial `i` drawing its H0 and
/// then its H1 trace from stream `i` of `seed`.
pub fn estimate_errors<D: Detector + ?Sized>(
    gen0: &dyn TraceSource,
    gen1: &dyn TraceSource,
    detector: &D,
    trials: usize,
    seed: RngSeed,
) -> Result<ErrorEstimate> {
    ensure(trials >= 1, "trials", || "need at least one trial".into())?;
    let outcomes: Vec<(DetectorReport, DetectorReport)> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed.stream(i);
            let t0 = gen0.draw(&mut rng)?;
            let t1 = gen1.draw(&mut rng)?;
            Ok((detector.decide(&t0)?, detector.decide(&t1)?))
        })
        .collect::<Result<_>>()?;
    Ok(summarize(&outcomes))
}

/// [`estimate_errors`] for sources that draw the packet count directly
/// rather than a full trace. Since the count is sufficient under both
/// hypotheses, the error rates have the same distribution as with traces.
pub fn estimate_count_errors<D: CountDetector + ?Sized>(
    gen0: &(dyn Fn(&mut StreamRng) -> usize + Sync),
    gen1: &(dyn Fn(&mut StreamRng) -> usize + Sync),
    detector: &D,
    trials: usize,
    seed: RngSeed,
) -> Result<ErrorEstimate> {
    ensure(trials >= 1, "trials", || "need at least one trial".into())?;
    let outcomes: Vec<(DetectorReport, DetectorReport)> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed.stream(i);
            let n0 = gen0(&mut rng);
            let n1 = gen1(&mut rng);
            let report = |n| DetectorReport {
                decision: detector.decide_count(n),
                observed_count: n,
                threshold_used: f64::NAN,
            };
            (report(n0), report(n1))
        })
        .collect();
    Ok(summarize(&outcomes))
}

fn summarize(outcomes: &[(DetectorReport, DetectorReport)]) -> ErrorEstimate {
    let trials = outcomes.len();
    let n = trials as f64;
    let false_alarms = outcomes
        .iter()
        .filter(|(r0, _)| r0.decision == Hypothesis::H1)
        .count();
    let misses = outcomes
        .iter()
        .filter(|(_, r1)| r1.decision == Hypothesis::H0)
        .count();
    let counts0: Vec<usize> = outcomes.iter().map(|(r, _)| r.observed_count).collect();
    let counts1: Vec<usize> = outcomes.iter().map(|(_, r)| r.observed_count).collect();
    ErrorEstimate {
        pfa: false_alarms as f64 / n,
        pmd: misses as f64 / n,
        trials,
        min_error_sum: min_threshold_error_sum(&counts0, &counts1),
    }
}

/// Best empirical `P_FA + P_MD` over the tests "H1 iff S >= t" and
/// "H1 iff S <= t" for every integer `t` spanning the pooled counts; the
/// always-H0 and always-H1 tests (sum exactly 1) are included.
pub fn min_threshold_error_sum(counts0: &[usize], counts1: &[usize]) -> f64 {
    if counts0.is_empty() || counts1.is_empty() {
        return 1.0;
    }
    let mut c0 = counts0.to_vec();
    let mut c1 = counts1.to_vec();
    c0.sort_unstable();
    c1.sort_unstable();
    let (n0, n1) = (c0.len() as f64, c1.len() as f64);
    let lo = c0[0].min(c1[0]);
    let hi = *c0.last().unwrap().max(c1.last().unwrap());
    let below = |v: &[usize], t: usize| v.partition_point(|&c| c < t);

    let mut best = 1.0_f64;
    for t in lo..=hi + 1 {
        // H1 iff S >= t
        let fa = (c0.len() - below(&c0, t)) as f64 / n0;
        let md = below(&c1, t) as f64 / n1;
        best = best.min(fa + md);
        // H1 iff S < t, i.e. S <= t - 1
        let fa = below(&c0, t) as f64 / n0;
        let md = (c1.len() - below(&c1, t)) as f64 / n1;
        best = best.min(fa + md);
    }
    best
}
