//! FIFO M/M/1 server and the exact likelihood of a departure sequence.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{ensure, Result};
use crate::scalar::Real;
use crate::trace::PacketTrace;

#[derive(Debug, Clone, PartialEq)]
pub struct QueuePassage {
    pub arrivals: PacketTrace,
    pub departures: PacketTrace,
    pub service_rate: f64,
}

impl QueuePassage {
    /// Time each packet spent in the system.
    pub fn sojourn_times(&self) -> Vec<f64> {
        self.departures
            .times()
            .iter()
            .zip(self.arrivals.times())
            .map(|(d, a)| d - a)
            .collect()
    }
}

/// Passes `arrivals` through a work-conserving FIFO server with
/// exponential(`mu`) service: `d_i = max(a_i, d_{i-1}) + S_i`.
///
/// The departure trace's horizon is the later of the arrival horizon and
/// the last departure.
pub fn serve<R: Rng + ?Sized>(
    arrivals: &PacketTrace,
    mu: f64,
    rng: &mut R,
) -> Result<QueuePassage> {
    ensure(mu > 0.0 && mu.is_finite(), "mu", || {
        format!("must be positive, got {mu}")
    })?;
    let mut departures = Vec::with_capacity(arrivals.len());
    let mut last = f64::NEG_INFINITY;
    for &a in arrivals.times() {
        let service: f64 = Exp1.sample(rng);
        let mut d = a.max(last) + service / mu;
        if d <= last {
            // zero service time after rounding; keep departures distinct
            d = next_up(last);
        }
        departures.push(d);
        last = d;
    }
    let horizon = arrivals.horizon().max(last);
    Ok(QueuePassage {
        arrivals: arrivals.clone(),
        departures: PacketTrace::from_sorted(departures, horizon),
        service_rate: mu,
    })
}

fn next_up(x: f64) -> f64 {
    f64::from_bits(if x >= 0.0 {
        x.to_bits() + 1
    } else {
        x.to_bits() - 1
    })
}

/// Outcome of [`passage_log_likelihood`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PassageLikelihood<F> {
    /// Log-density of the departures given the arrivals.
    Finite(F),
    /// Some implied service time is negative: zero density.
    Infeasible,
    /// Arrival and departure counts differ.
    LengthMismatch,
}

impl<F: Real> PassageLikelihood<F> {
    /// The log-density, with both impossible cases mapped to `-inf`.
    pub fn value(self) -> F {
        match self {
            Self::Finite(v) => v,
            _ => F::neg_infinity(),
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Self::Finite(_))
    }
}

/// Log-density of FIFO departure times `departures` given arrival times
/// `arrivals` at service rate `mu`.
///
/// Service times are recovered exactly as `x_i = d_i - max(a_i, d_{i-1})`;
/// the result is `n ln mu - mu Σ x_i` when every `x_i >= 0`.
pub fn passage_log_likelihood<F: Real>(
    arrivals: &[F],
    departures: &[F],
    mu: F,
) -> PassageLikelihood<F> {
    passage_log_likelihood_after(arrivals, departures, mu, F::neg_infinity())
}

/// As [`passage_log_likelihood`], for a queue whose previous departure (the
/// one before `departures[0]`) happened at `prior_departure`.
pub fn passage_log_likelihood_after<F: Real>(
    arrivals: &[F],
    departures: &[F],
    mu: F,
    prior_departure: F,
) -> PassageLikelihood<F> {
    if arrivals.len() != departures.len() {
        return PassageLikelihood::LengthMismatch;
    }
    let mut total_service = F::zero();
    let mut last = prior_departure;
    for (&a, &d) in arrivals.iter().zip(departures) {
        let x = d - a.max(last);
        if x < F::zero() {
            return PassageLikelihood::Infeasible;
        }
        total_service += x;
        last = d;
    }
    PassageLikelihood::Finite(F::from_count(arrivals.len() as u64) * mu.ln() - mu * total_service)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngSeed;
    use crate::trace::sample_interarrival;
    use approx::assert_abs_diff_eq;

    #[test]
    fn empty_in_empty_out() {
        let p = serve(
            &PacketTrace::empty(3.0).unwrap(),
            2.0,
            &mut RngSeed(0).rng(),
        )
        .unwrap();
        assert!(p.departures.is_empty());
        assert!(serve(
            &PacketTrace::empty(3.0).unwrap(),
            0.0,
            &mut RngSeed(0).rng()
        )
        .is_err());
    }

    #[test]
    fn passage_invariants() {
        let mut rng = RngSeed(12).rng();
        for _ in 0..20 {
            let a = sample_interarrival(3.0, 30.0, &mut rng).unwrap();
            let p = serve(&a, 4.0, &mut rng).unwrap();
            assert_eq!(p.departures.len(), a.len());
            let d = p.departures.times();
            for i in 0..d.len() {
                assert!(d[i] >= a.times()[i]);
                if i > 0 {
                    assert!(d[i] > d[i - 1]);
                }
            }
            assert!(passage_log_likelihood(a.times(), d, 4.0).is_finite());
        }
    }

    #[test]
    fn fast_server_barely_delays() {
        let a = sample_interarrival(1.0, 50.0, &mut RngSeed(3).rng()).unwrap();
        let p = serve(&a, 1e9, &mut RngSeed(4).rng()).unwrap();
        for s in p.sojourn_times() {
            assert!(s < 1e-6);
        }
    }

    #[test]
    fn likelihood_examples() {
        let l = passage_log_likelihood(&[0.0, 1.0], &[0.0, 1.0], 1.0);
        assert_eq!(l, PassageLikelihood::Finite(0.0));
        let l = passage_log_likelihood(&[0.0], &[0.5], 2.0);
        assert_abs_diff_eq!(l.value(), std::f64::consts::LN_2 - 1.0, epsilon = 1e-12);
        assert_eq!(
            passage_log_likelihood(&[0.0, 1.0], &[0.5, 0.4], 2.0),
            PassageLikelihood::Infeasible
        );
        assert_eq!(
            passage_log_likelihood(&[0.0, 1.0], &[0.5], 2.0),
            PassageLikelihood::LengthMismatch
        );
        assert_eq!(
            PassageLikelihood::<f64>::Infeasible.value(),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn busy_period_uses_previous_departure() {
        // second packet waits for the first: x = [1.0, 0.5]
        let l = passage_log_likelihood(&[0.0, 0.2], &[1.0, 1.5], 1.0);
        assert_abs_diff_eq!(l.value(), -1.5, epsilon = 1e-12);
        let l = passage_log_likelihood_after(&[0.2], &[1.5], 1.0, 1.0);
        assert_abs_diff_eq!(l.value(), -0.5, epsilon = 1e-12);
    }
}
