//! Buffer-and-release timing code over an M/M/1 queue.
//!
//! A session of length `T` has two phases. During the buffering phase
//! `[0, ψT]` Alice slows the overt stream (see [`crate::buffer`]) and keeps
//! the excess. During the transmission phase `[ψT, T]` she releases packets
//! at the times of a secret random codeword while continuing to buffer
//! Jack's arrivals. Bob sees the releases after an exponential-service FIFO
//! queue and picks the codeword with the highest passage likelihood.
//!
//! Codewords are themselves Poisson(λ) realizations, so the released stream
//! looks like ordinary overt traffic. The only risk is running out of
//! packets mid-codeword, which is what `ψ` is sized against.

use std::io::{BufRead, Write};

use rand::Rng;
use rayon::prelude::*;

use crate::buffer::slowdown;
use crate::detector::min_threshold_error_sum;
use crate::divergence::buffering_budget;
use crate::error::{ensure, Error, Result};
use crate::fmt::sig9;
use crate::params::ChannelParams;
use crate::queue::{passage_log_likelihood_after, serve};
use crate::rng::RngSeed;
use crate::scalar::Real;
use crate::special::{erf_inv, erfc};
use crate::trace::{merge, sample_conditional, sample_interarrival, PacketTrace};

/// `M` codewords, each a Poisson(λ) realization on `[0, window]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub codewords: Vec<PacketTrace>,
    pub lambda: f64,
    pub window: f64,
    pub seed: RngSeed,
}

impl Codebook {
    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    /// Header `M=<int> lambda=<real> window=<real> seed=<u64>`, then one
    /// codeword per line as space-separated timings.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "M={} lambda={} window={} seed={}",
            self.codewords.len(),
            sig9(self.lambda),
            sig9(self.window),
            self.seed.0
        )?;
        for cw in &self.codewords {
            let line: Vec<String> = cw.times().iter().map(|&t| sig9(t)).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().ok_or(Error::Parse {
            line: 1,
            reason: "missing header".into(),
        })??;
        let (mut m, mut lambda, mut window, mut seed) = (None, None, None, None);
        for field in header.split_whitespace() {
            let (key, value) = field.split_once('=').ok_or_else(|| Error::Parse {
                line: 1,
                reason: format!("expected key=value, got `{field}`"),
            })?;
            let bad = |e: &dyn std::fmt::Display| Error::Parse {
                line: 1,
                reason: format!("bad value for {key}: {e}"),
            };
            match key {
                "M" => m = Some(value.parse::<usize>().map_err(|e| bad(&e))?),
                "lambda" => lambda = Some(value.parse::<f64>().map_err(|e| bad(&e))?),
                "window" => window = Some(value.parse::<f64>().map_err(|e| bad(&e))?),
                "seed" => seed = Some(value.parse::<u64>().map_err(|e| bad(&e))?),
                other => {
                    return Err(Error::Parse {
                        line: 1,
                        reason: format!("unknown header key `{other}`"),
                    })
                }
            }
        }
        let missing = |k: &str| Error::Parse {
            line: 1,
            reason: format!("header lacks `{k}`"),
        };
        let m = m.ok_or_else(|| missing("M"))?;
        let lambda = lambda.ok_or_else(|| missing("lambda"))?;
        let window = window.ok_or_else(|| missing("window"))?;
        let seed = seed.ok_or_else(|| missing("seed"))?;

        let mut codewords = Vec::with_capacity(m);
        for (idx, line) in lines.enumerate() {
            let line = line?;
            if codewords.len() == m {
                if line.trim().is_empty() {
                    continue;
                }
                return Err(Error::Parse {
                    line: idx + 2,
                    reason: format!("more than M={m} codewords"),
                });
            }
            let times = line
                .split_whitespace()
                .map(|tok| tok.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse {
                    line: idx + 2,
                    reason: format!("bad timing: {e}"),
                })?;
            codewords.push(PacketTrace::new(times, window)?);
        }
        if codewords.len() != m {
            return Err(Error::Parse {
                line: codewords.len() + 2,
                reason: format!("expected {m} codewords, found {}", codewords.len()),
            });
        }
        Ok(Self {
            codewords,
            lambda,
            window,
            seed: RngSeed(seed),
        })
    }
}

/// `m` independent Poisson(λ) realizations on `[0, window]`; codeword `i`
/// comes from stream `i` of `seed`.
pub fn generate_codebook(m: usize, lambda: f64, window: f64, seed: RngSeed) -> Result<Codebook> {
    ensure(m >= 1, "M", || {
        "codebook needs at least one codeword".into()
    })?;
    let codewords = (0..m as u64)
        .map(|i| sample_conditional(lambda, window, &mut seed.stream(i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Codebook {
        codewords,
        lambda,
        window,
        seed,
    })
}

/// Split of a session of length `horizon` into buffering and transmission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePlan<F> {
    pub psi: F,
    /// `ψT`
    pub buffer_window: F,
    /// `T' = (1-ψ)T`
    pub transmit_window: F,
    pub epsilon: F,
    pub zeta: F,
}

impl<F: Real> PhasePlan<F> {
    /// `m = ε sqrt(2 λ ψT)`, the expected buffer after the first phase.
    pub fn planned_buffer(&self, lambda: F) -> F {
        self.epsilon * (F::lit(2.0) * lambda * self.buffer_window).sqrt()
    }

    /// Failure probability this plan targets in the large-`T` limit,
    /// `1 - erf((ε/2) sqrt(ψ/(1-ψ)))`.
    pub fn limiting_failure(&self) -> F {
        let ratio = self.psi / (F::one() - self.psi);
        erfc(self.epsilon / F::lit(2.0) * ratio.sqrt())
    }
}

/// `ψ/(1-ψ) = ((2/ε) erf⁻¹(1 - ζ/2))²`.
pub fn phase_ratio<F: Real>(epsilon: F, zeta: F) -> Result<F> {
    ensure(epsilon > F::zero() && epsilon < F::one(), "epsilon", || {
        format!("must lie in (0, 1), got {epsilon}")
    })?;
    ensure(zeta > F::zero() && zeta < F::one(), "zeta", || {
        format!("must lie in (0, 1), got {zeta}")
    })?;
    let two = F::lit(2.0);
    let root = two / epsilon * erf_inv(F::one() - zeta / two);
    Ok(root * root)
}

pub fn plan_phases<F: Real>(epsilon: F, zeta: F, horizon: F) -> Result<PhasePlan<F>> {
    ensure(horizon > F::zero() && horizon.is_finite(), "T", || {
        format!("must be positive, got {horizon}")
    })?;
    let r = phase_ratio(epsilon, zeta)?;
    let psi = r / (F::one() + r);
    Ok(PhasePlan {
        psi,
        buffer_window: psi * horizon,
        transmit_window: horizon - psi * horizon,
        epsilon,
        zeta,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionOutcome {
    /// Released packets at absolute times `phase_offset + w_j`.
    pub released: PacketTrace,
    /// The buffer was empty at some scheduled release.
    pub failure: bool,
    /// Lowest buffer occupancy seen during the phase.
    pub buffer_min: usize,
    /// Occupancy at the end of the phase.
    pub buffer_final: usize,
    /// Jack arrivals absorbed during the phase.
    pub arrivals: usize,
    pub sent_index: usize,
    pub decoded_index: Option<usize>,
}

/// Releases `codeword` starting at `phase_offset` from a buffer that holds
/// `initial_buffer` packets and keeps absorbing every arrival of
/// `jack_arrivals` after `phase_offset`.
///
/// On the first release that finds the buffer empty the codeword is
/// abandoned; later arrivals are still buffered.
pub fn transmit(
    codeword: &PacketTrace,
    sent_index: usize,
    initial_buffer: usize,
    jack_arrivals: &PacketTrace,
    phase_offset: f64,
) -> Result<TransmissionOutcome> {
    ensure(
        phase_offset >= 0.0 && phase_offset.is_finite(),
        "phase_offset",
        || format!("must be nonnegative, got {phase_offset}"),
    )?;
    let end = phase_offset + codeword.horizon();
    ensure(
        jack_arrivals.horizon() + 1e-9 * end >= end,
        "jack_arrivals",
        || {
            format!(
                "arrivals end at {} but the phase ends at {end}",
                jack_arrivals.horizon()
            )
        },
    )?;
    let all = jack_arrivals.times();
    let arrivals = &all[all.partition_point(|&t| t <= phase_offset)..];

    let mut buffer = initial_buffer;
    let mut buffer_min = buffer;
    let mut released = Vec::with_capacity(codeword.len());
    let mut failure = false;
    let mut next_arrival = 0;
    for &w in codeword.times() {
        let t = phase_offset + w;
        while next_arrival < arrivals.len() && arrivals[next_arrival] <= t {
            buffer += 1;
            next_arrival += 1;
        }
        if buffer == 0 {
            failure = true;
            break;
        }
        buffer -= 1;
        buffer_min = buffer_min.min(buffer);
        released.push(t);
    }
    buffer += arrivals.len() - next_arrival;
    Ok(TransmissionOutcome {
        released: PacketTrace::from_sorted(released, end.max(jack_arrivals.horizon())),
        failure,
        buffer_min,
        buffer_final: buffer,
        arrivals: arrivals.len(),
        sent_index,
        decoded_index: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decoded {
    Message {
        index: usize,
        log_likelihood: f64,
    },
    /// No codeword could have produced the departures.
    NoFeasibleCodeword,
}

impl Decoded {
    pub fn index(self) -> Option<usize> {
        match self {
            Decoded::Message { index, .. } => Some(index),
            Decoded::NoFeasibleCodeword => None,
        }
    }
}

/// Maximum-likelihood codeword for `departures`, assuming an initially
/// empty queue. Ties go to the lowest index.
pub fn decode_ml(
    departures: &[f64],
    codebook: &Codebook,
    mu: f64,
    phase_offset: f64,
) -> Result<Decoded> {
    decode_ml_after(departures, f64::NEG_INFINITY, codebook, mu, phase_offset)
}

/// [`decode_ml`] for a queue whose last departure before the codeword's
/// first one happened at `prior_departure`.
pub fn decode_ml_after(
    departures: &[f64],
    prior_departure: f64,
    codebook: &Codebook,
    mu: f64,
    phase_offset: f64,
) -> Result<Decoded> {
    ensure(!codebook.is_empty(), "codebook", || {
        "codebook is empty".into()
    })?;
    ensure(mu > 0.0 && mu.is_finite(), "mu", || {
        format!("must be positive, got {mu}")
    })?;
    let mut best: Option<(usize, f64)> = None;
    let mut release = Vec::new();
    for (index, cw) in codebook.codewords.iter().enumerate() {
        if cw.len() != departures.len() {
            continue;
        }
        release.clear();
        release.extend(cw.times().iter().map(|&w| phase_offset + w));
        let ll = passage_log_likelihood_after(&release, departures, mu, prior_departure).value();
        if ll.is_finite() && best.is_none_or(|(_, b)| ll > b) {
            best = Some((index, ll));
        }
    }
    Ok(match best {
        Some((index, log_likelihood)) => Decoded::Message {
            index,
            log_likelihood,
        },
        None => Decoded::NoFeasibleCodeword,
    })
}

/// Timing capacity of the exponential-server queue at output rate λ,
/// `λ ln(μ/λ)` nats/s.
pub fn capacity<F: Real>(lambda: F, mu: F) -> Result<F> {
    ensure(lambda > F::zero() && lambda.is_finite(), "lambda", || {
        format!("must be positive, got {lambda}")
    })?;
    ensure(mu >= lambda && mu.is_finite(), "mu", || {
        format!("must be at least lambda = {lambda}, got {mu}")
    })?;
    Ok(lambda * (mu / lambda).ln())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodebookSize<F> {
    /// `ln M` in nats.
    pub log_m: F,
    /// `M` itself, when it fits in `F`.
    pub m: Option<F>,
}

/// `ln M = (1-ψ) λT ln(μ/λ)`.
pub fn codebook_size<F: Real>(lambda: F, horizon: F, psi: F, mu: F) -> Result<CodebookSize<F>> {
    ensure(horizon > F::zero() && horizon.is_finite(), "T", || {
        format!("must be positive, got {horizon}")
    })?;
    ensure(psi > F::zero() && psi < F::one(), "psi", || {
        format!("must lie in (0, 1), got {psi}")
    })?;
    let log_m = (F::one() - psi) * horizon * capacity(lambda, mu)?;
    let m = log_m.exp();
    Ok(CodebookSize {
        log_m,
        m: m.is_finite().then_some(m),
    })
}

/// Limiting probability that a walk started `m` below the barrier hits it
/// within `k` steps: `1 - erf(m / sqrt(2k))`.
pub fn predict_failure<F: Real>(m: F, k: F) -> Result<F> {
    ensure(m >= F::zero() && m.is_finite(), "m", || {
        format!("must be nonnegative, got {m}")
    })?;
    ensure(k >= F::one() && k.is_finite(), "k", || {
        format!("must be at least 1, got {k}")
    })?;
    Ok(erfc(m / (F::lit(2.0) * k).sqrt()))
}

/// Chernoff bound `P(K >= 4λT') <= (e/4)^{2λT'}` for K ~ Poisson(2λT').
pub fn chernoff_event_bound<F: Real>(lambda_window: F) -> Result<F> {
    ensure(
        lambda_window > F::zero() && lambda_window.is_finite(),
        "lambda_window",
        || format!("must be positive, got {lambda_window}"),
    )?;
    Ok((F::E() / F::lit(4.0)).powf(F::lit(2.0) * lambda_window))
}

/// One end-to-end session.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    /// Everything Alice put on the wire over `[0, T]`.
    pub released: PacketTrace,
    pub psi: f64,
    pub delta: f64,
    /// `ε sqrt(2λψT)`.
    pub planned_buffer: f64,
    /// Packets actually buffered when transmission started.
    pub buffered: usize,
    pub phase1_released: usize,
    pub phase2_released: usize,
    pub codeword_len: usize,
    pub arrivals_total: usize,
    pub buffer_final: usize,
    pub buffer_min: usize,
    pub failure: bool,
    pub sent_index: usize,
    pub decoded_index: Option<usize>,
}

impl TrialRecord {
    pub fn decoded_correctly(&self) -> bool {
        self.decoded_index == Some(self.sent_index)
    }

    pub fn releases_total(&self) -> usize {
        self.phase1_released + self.phase2_released
    }
}

/// Full pipeline for one session: slowdown on `[0, ψT]`, codeword release
/// on `[ψT, T]`, M/M/1 passage of everything released, ML decoding.
///
/// `seed` is the session's shared secret: it fixes Jack's traffic, the
/// codebook, the message and the queue noise through separate streams.
pub fn run_scenario2(params: &ChannelParams, m: usize, seed: RngSeed) -> Result<TrialRecord> {
    params.validate_timing()?;
    ensure(m >= 1, "M", || {
        "codebook needs at least one codeword".into()
    })?;
    let plan = plan_phases(params.epsilon, params.zeta, params.horizon)?;
    let budget = buffering_budget(params.lambda, plan.buffer_window, params.epsilon)?;

    let overt = sample_interarrival(params.lambda, params.horizon, &mut seed.stream(0))?;
    let (phase1, timeline) = slowdown(&overt, params.lambda, budget.delta, plan.buffer_window)?;

    let codebook = generate_codebook(m, params.lambda, plan.transmit_window, seed.derive(1))?;
    let sent = seed.stream(2).random_range(0..m);
    let codeword = &codebook.codewords[sent];
    let out = transmit(
        codeword,
        sent,
        timeline.occupancy_at_end,
        &overt,
        plan.buffer_window,
    )?;

    let phase1_full = PacketTrace::from_sorted(phase1.times().to_vec(), params.horizon);
    let phase2_full = PacketTrace::from_sorted(out.released.times().to_vec(), params.horizon);
    let released = merge(&phase1_full, &phase2_full)?;

    // The queue carries the whole released stream; FIFO puts every
    // buffering-phase packet ahead of the codeword packets.
    let passage = serve(&released, params.mu, &mut seed.stream(3))?;
    let deps = passage.departures.times();
    let split = phase1.len();
    let prior = if split > 0 {
        deps[split - 1]
    } else {
        f64::NEG_INFINITY
    };
    let decoded = decode_ml_after(
        &deps[split..],
        prior,
        &codebook,
        params.mu,
        plan.buffer_window,
    )?;

    Ok(TrialRecord {
        psi: plan.psi,
        delta: budget.delta,
        planned_buffer: plan.planned_buffer(params.lambda),
        buffered: timeline.occupancy_at_end,
        phase1_released: phase1.len(),
        phase2_released: out.released.len(),
        codeword_len: codeword.len(),
        arrivals_total: overt.len(),
        buffer_final: out.buffer_final,
        buffer_min: out.buffer_min,
        failure: out.failure,
        sent_index: sent,
        decoded_index: decoded.index(),
        released,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario2Summary {
    pub psi: f64,
    pub planned_buffer: f64,
    /// Mean realized buffer at the start of transmission.
    pub m_mean: f64,
    pub failure_rate: f64,
    /// Sessions whose decoded message differs from the sent one, failures
    /// included.
    pub decode_error_rate: f64,
    /// Best count-threshold `P_FA + P_MD` of Willie over `[0, T]`.
    pub min_error_sum: f64,
    pub trials: usize,
    pub phase2_counts: Vec<usize>,
}

/// `trials` independent sessions; session `i` uses `seed.derive(i)` and
/// Willie's reference H0 trace comes from stream `i` of `seed`.
pub fn run_scenario2_experiment(
    params: &ChannelParams,
    m: usize,
    trials: usize,
    seed: RngSeed,
) -> Result<Scenario2Summary> {
    ensure(trials >= 1, "trials", || "need at least one trial".into())?;
    let plan = plan_phases(params.epsilon, params.zeta, params.horizon)?;
    let rows: Vec<(TrialSummary, usize)> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let rec = run_scenario2(params, m, seed.derive(i))?;
            let h0 = sample_interarrival(params.lambda, params.horizon, &mut seed.stream(i))?;
            Ok((TrialSummary::from(&rec), h0.len()))
        })
        .collect::<Result<_>>()?;

    let n = trials as f64;
    let counts0: Vec<usize> = rows.iter().map(|(_, c)| *c).collect();
    let counts1: Vec<usize> = rows.iter().map(|(r, _)| r.released).collect();
    Ok(Scenario2Summary {
        psi: plan.psi,
        planned_buffer: plan.planned_buffer(params.lambda),
        m_mean: rows.iter().map(|(r, _)| r.buffered as f64).sum::<f64>() / n,
        failure_rate: rows.iter().filter(|(r, _)| r.failure).count() as f64 / n,
        decode_error_rate: rows.iter().filter(|(r, _)| !r.correct).count() as f64 / n,
        min_error_sum: min_threshold_error_sum(&counts0, &counts1),
        trials,
        phase2_counts: rows.iter().map(|(r, _)| r.phase2).collect(),
    })
}

struct TrialSummary {
    released: usize,
    phase2: usize,
    buffered: usize,
    failure: bool,
    correct: bool,
}

impl From<&TrialRecord> for TrialSummary {
    fn from(r: &TrialRecord) -> Self {
        Self {
            released: r.released.len(),
            phase2: r.phase2_released,
            buffered: r.buffered,
            failure: r.failure,
            correct: r.decoded_correctly(),
        }
    }
}
