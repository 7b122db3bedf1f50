//! Poisson packet traces: sampling, superposition and counting.

use std::io::{BufRead, Write};
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};

use crate::error::{ensure, param, Error, Result};
use crate::fmt::sig9;

/// Packet timestamps (seconds) observed on `[0, horizon]`.
///
/// Times are sorted and lie inside the horizon. Traces built by
/// [`PacketTrace::new`] and by the samplers are strictly increasing; a merge
/// of two traces that share a timestamp keeps both copies (see [`merge`]).
/// The timestamp buffer is shared, so clones are cheap and a trace can be
/// sent across threads freely.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketTrace {
    times: Arc<[f64]>,
    horizon: f64,
}

/// Which input of a [`merge`] a packet came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    First,
    Second,
}

impl PacketTrace {
    pub fn new(times: Vec<f64>, horizon: f64) -> Result<Self> {
        ensure(horizon.is_finite() && horizon > 0.0, "horizon", || {
            format!("must be positive and finite, got {horizon}")
        })?;
        if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(param(
                "times",
                format!("not strictly increasing at index {}", i + 1),
            ));
        }
        if let (Some(&first), Some(&last)) = (times.first(), times.last()) {
            ensure(first >= 0.0 && last <= horizon, "times", || {
                format!("timestamps must lie in [0, {horizon}], got [{first}, {last}]")
            })?;
        }
        Ok(Self::from_sorted(times, horizon))
    }

    pub fn empty(horizon: f64) -> Result<Self> {
        Self::new(Vec::new(), horizon)
    }

    pub(crate) fn from_sorted(times: Vec<f64>, horizon: f64) -> Self {
        debug_assert!(times.windows(2).all(|w| w[0] <= w[1]));
        Self {
            times: times.into(),
            horizon,
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Gaps between consecutive packets; `len() - 1` entries.
    pub fn interarrivals(&self) -> Vec<f64> {
        self.times.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Number of packets with timestamp in the closed window `[t0, t1]`.
    pub fn count_in(&self, t0: f64, t1: f64) -> Result<usize> {
        ensure(
            t0 >= 0.0 && t0 <= t1 && t1 <= self.horizon,
            "window",
            || format!("need 0 <= t0 <= t1 <= {}, got [{t0}, {t1}]", self.horizon),
        )?;
        let lo = self.times.partition_point(|&t| t < t0);
        let hi = self.times.partition_point(|&t| t <= t1);
        Ok(hi - lo)
    }

    /// Packet count over the whole horizon.
    pub fn count(&self) -> usize {
        self.times.len()
    }

    /// The same timestamps shifted by `offset` and viewed on a new horizon.
    pub fn shifted(&self, offset: f64, horizon: f64) -> Result<Self> {
        Self::new(self.times.iter().map(|t| t + offset).collect(), horizon)
    }

    /// Writes one timestamp per line (9 significant digits) followed by a
    /// `# horizon=<T>` trailer.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        for &t in self.times.iter() {
            writeln!(out, "{}", sig9(t))?;
        }
        writeln!(out, "# horizon={}", sig9(self.horizon))?;
        Ok(())
    }

    /// Parses the format produced by [`PacketTrace::write_to`].
    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let mut times = Vec::new();
        let mut horizon = None;
        for (idx, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            let lineno = idx + 1;
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(value) = rest.trim().strip_prefix("horizon=") {
                    horizon = Some(value.trim().parse::<f64>().map_err(|e| Error::Parse {
                        line: lineno,
                        reason: format!("bad horizon: {e}"),
                    })?);
                }
                continue;
            }
            if horizon.is_some() {
                return Err(Error::Parse {
                    line: lineno,
                    reason: "timestamp after horizon trailer".into(),
                });
            }
            times.push(line.parse::<f64>().map_err(|e| Error::Parse {
                line: lineno,
                reason: format!("bad timestamp: {e}"),
            })?);
        }
        let horizon = horizon.ok_or(Error::Parse {
            line: 0,
            reason: "missing `# horizon=` trailer".into(),
        })?;
        Self::new(times, horizon)
    }
}

fn check_rate_horizon(rate: f64, horizon: f64) -> Result<()> {
    ensure(rate.is_finite() && rate > 0.0, "rate", || {
        format!("must be positive, got {rate}")
    })?;
    ensure(horizon.is_finite() && horizon > 0.0, "horizon", || {
        format!("must be positive, got {horizon}")
    })
}

/// Homogeneous Poisson process on `[0, horizon]` built from exponential
/// gaps. The first point past the horizon is dropped.
pub fn sample_interarrival<R: Rng + ?Sized>(
    rate: f64,
    horizon: f64,
    rng: &mut R,
) -> Result<PacketTrace> {
    check_rate_horizon(rate, horizon)?;
    let mut times =
        Vec::with_capacity((rate * horizon + 4.0 * (rate * horizon).sqrt()) as usize + 8);
    let scale = 1.0 / rate;
    let mut t = 0.0f64;
    let mut last = f64::NEG_INFINITY;
    loop {
        let gap: f64 = Exp1.sample(rng);
        t += gap * scale;
        if t > horizon {
            break;
        }
        // a gap below half an ulp of `t` would repeat the timestamp
        if t > last {
            times.push(t);
            last = t;
        }
    }
    Ok(PacketTrace::from_sorted(times, horizon))
}

/// Homogeneous Poisson process on `[0, horizon]` built as a
/// Poisson(rate·horizon) count of sorted uniform points.
pub fn sample_conditional<R: Rng + ?Sized>(
    rate: f64,
    horizon: f64,
    rng: &mut R,
) -> Result<PacketTrace> {
    check_rate_horizon(rate, horizon)?;
    let n = poisson_count(rate * horizon, rng);
    loop {
        let mut times: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * horizon).collect();
        times.sort_unstable_by(f64::total_cmp);
        if times.windows(2).all(|w| w[0] < w[1]) {
            return Ok(PacketTrace::from_sorted(times, horizon));
        }
    }
}

/// A Poisson(mean) variate; `mean` must be nonnegative.
pub fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(mean).expect("positive finite mean");
    let n: f64 = dist.sample(rng);
    n as u64
}

/// Superposition of two traces on the same horizon.
///
/// Coincident timestamps are both kept, `a`'s copy first.
pub fn merge(a: &PacketTrace, b: &PacketTrace) -> Result<PacketTrace> {
    merge_with_sources(a, b).map(|(trace, _)| trace)
}

/// [`merge`], additionally reporting which input each merged packet came from.
pub fn merge_with_sources(a: &PacketTrace, b: &PacketTrace) -> Result<(PacketTrace, Vec<Source>)> {
    ensure(a.horizon == b.horizon, "horizon", || {
        format!(
            "cannot merge traces on horizons {} and {}",
            a.horizon, b.horizon
        )
    })?;
    let (x, y) = (a.times(), b.times());
    let mut times = Vec::with_capacity(x.len() + y.len());
    let mut sources = Vec::with_capacity(x.len() + y.len());
    let (mut i, mut j) = (0, 0);
    while i < x.len() || j < y.len() {
        let take_first = j == y.len() || (i < x.len() && x[i] <= y[j]);
        if take_first {
            times.push(x[i]);
            sources.push(Source::First);
            i += 1;
        } else {
            times.push(y[j]);
            sources.push(Source::Second);
            j += 1;
        }
    }
    Ok((PacketTrace::from_sorted(times, a.horizon), sources))
}
