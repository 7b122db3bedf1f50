use covertsim::buffer::{buffering_covertness_check, buffering_errors, slowdown};
use covertsim::divergence::buffering_budget;
use covertsim::gof::{chi_square_poisson, ks_one_sample, mean_var};
use covertsim::queue::{passage_log_likelihood, serve};
use covertsim::trace::sample_interarrival;
use covertsim::{PacketTrace, RngSeed};
use rayon::prelude::*;

#[test]
fn buffer_collects_delta_times_window() {
    let b = buffering_budget(50.0, 200.0, 0.2).unwrap();
    let n = 10_000u64;
    let occ: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let overt = sample_interarrival(50.0, 200.0, &mut RngSeed(21).stream(i)).unwrap();
            slowdown(&overt, 50.0, b.delta, 200.0)
                .unwrap()
                .1
                .occupancy_at_end as f64
        })
        .collect();
    let (mean, _) = mean_var(&occ);
    let target = b.delta * 200.0;
    assert!(
        (mean - target).abs() < 4.0 * (target / n as f64).sqrt(),
        "{mean} vs {target}"
    );
}

#[test]
fn released_stream_is_slower_poisson() {
    let (lambda, w) = (5.0, 40.0);
    let b = buffering_budget(lambda, w, 0.2).unwrap();
    let counts: Vec<u64> = (0..100_000u64)
        .into_par_iter()
        .map(|i| {
            let overt = sample_interarrival(lambda, w, &mut RngSeed(22).stream(i)).unwrap();
            slowdown(&overt, lambda, b.delta, w).unwrap().0.len() as u64
        })
        .collect();
    let r = chi_square_poisson(&counts, (lambda - b.delta) * w).unwrap();
    assert!(r.p_value > 0.01, "{r:?}");
}

#[test]
fn budgeted_slowdown_stays_hidden() {
    let est = buffering_covertness_check(50.0, 200.0, 0.2, 20_000, RngSeed(23)).unwrap();
    assert!(est.min_error_sum >= 0.8 - 0.04, "{est:?}");
}

#[test]
fn heavy_slowdown_is_detected() {
    let (lambda, w) = (50.0, 200.0);
    let delta = 4.0 * f64::powf(lambda * w, 0.75) / w;
    let est = buffering_errors(lambda, delta, w, 2_000, RngSeed(24)).unwrap();
    assert!(est.min_error_sum < 0.5, "{est:?}");
    assert!(est.pmd < 0.5 && est.pfa < 0.5, "{est:?}");
}

#[test]
fn single_packet_departs_after_exponential_service() {
    let arrival = PacketTrace::new(vec![0.0], 1.0).unwrap();
    let deps: Vec<f64> = (0..100_000u64)
        .into_par_iter()
        .map(|i| {
            serve(&arrival, 2.0, &mut RngSeed(25).stream(i))
                .unwrap()
                .departures
                .times()[0]
        })
        .collect();
    let r = ks_one_sample(&deps, |x| 1.0 - (-2.0 * x).exp()).unwrap();
    assert!(r.p_value > 0.01, "{r:?}");
}

#[test]
fn littles_law_sojourn() {
    let arrivals = sample_interarrival(1.0, 1_000_000.0, &mut RngSeed(26).rng()).unwrap();
    let p = serve(&arrivals, 2.0, &mut RngSeed(27).rng()).unwrap();
    let (mean, _) = mean_var(&p.sojourn_times());
    assert!((mean - 1.0).abs() < 0.1, "mean sojourn {mean}");
}

#[test]
fn served_sequences_have_finite_likelihood() {
    for s in 0..50 {
        let a = sample_interarrival(3.0, 10.0, &mut RngSeed(28).stream(s)).unwrap();
        let p = serve(&a, 5.0, &mut RngSeed(29).stream(s)).unwrap();
        let ll = passage_log_likelihood(a.times(), p.departures.times(), 5.0);
        assert!(ll.is_finite());
    }
    let ll = passage_log_likelihood(&[0.0], &[0.5], 2.0).value();
    assert!((ll - (std::f64::consts::LN_2 - 1.0)).abs() < 1e-12);
    assert_eq!(
        passage_log_likelihood(&[1.0], &[0.5], 2.0).value(),
        f64::NEG_INFINITY
    );
}
