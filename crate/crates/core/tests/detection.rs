use covertsim::detector::{
    count_detect, estimate_errors, min_threshold_error_sum, DetectorConfig, Hypothesis,
};
use covertsim::divergence::insertion_budget;
use covertsim::gof::{chi_square_poisson, mean_var};
use covertsim::insertion::{
    insertion_errors, overload_scaling_experiment, run_insertion_trial,
    throughput_scaling_experiment, Sampling,
};
use covertsim::trace::sample_interarrival;
use covertsim::{RngSeed, StreamRng};
use rayon::prelude::*;

fn three_sigma(p: f64, n: usize) -> f64 {
    3.0 * (p * (1.0 - p) / n as f64).sqrt()
}

#[test]
fn chebyshev_keeps_false_alarms_below_alpha() {
    for &(lambda, t, alpha) in &[(100.0, 100.0, 0.04), (50.0, 200.0, 0.1), (2.0, 30.0, 0.2)] {
        let est =
            insertion_errors(lambda, 0.0, t, alpha, 100_000, RngSeed(1), Sampling::Counts).unwrap();
        assert!(
            est.pfa <= alpha + three_sigma(alpha, est.trials),
            "{lambda} {t}: {est:?}"
        );
    }
    let est = insertion_errors(
        100.0,
        0.0,
        100.0,
        0.04,
        10_000,
        RngSeed(2),
        Sampling::Traces,
    )
    .unwrap();
    assert!(est.pfa <= 0.04 + three_sigma(0.04, est.trials), "{est:?}");
}

#[test]
fn overload_is_caught_with_rising_power() {
    let horizons = [100.0, 400.0, 1600.0];
    let schedule = |lt: f64| 4.0 * lt.powf(0.75);
    let rows = overload_scaling_experiment(
        100.0,
        &horizons,
        schedule,
        0.05,
        10_000,
        RngSeed(3),
        Sampling::Counts,
    )
    .unwrap();
    assert!(rows[0].pmd < 0.5);
    for w in rows.windows(2) {
        assert!(w[1].pmd <= w[0].pmd);
        assert!(w[1].min_error_sum <= w[0].min_error_sum + 0.01);
    }
    assert!(rows[2].min_error_sum < 0.5);
    for r in &rows {
        assert!(r.pfa <= 0.05 + three_sigma(0.05, 10_000));
    }
}

#[test]
fn budgeted_insertion_stays_hidden_in_both_sampling_modes() {
    let b = insertion_budget(50.0, 200.0, 0.2).unwrap();
    for sampling in [Sampling::Traces, Sampling::Counts] {
        let est =
            insertion_errors(50.0, b.delta, 200.0, 0.05, 20_000, RngSeed(4), sampling).unwrap();
        assert!(est.min_error_sum >= 0.8 - 0.04, "{sampling:?}: {est:?}");
    }
}

#[test]
fn square_root_rows() {
    let rows = throughput_scaling_experiment(
        50.0,
        &[100.0, 400.0, 1600.0],
        0.2,
        0.05,
        20_000,
        RngSeed(5),
        Sampling::Counts,
    )
    .unwrap();
    let r0 = rows[0].covert_packets / rows[0].horizon.sqrt();
    for r in &rows {
        assert!((r.covert_packets / r.horizon.sqrt() - r0).abs() < 1e-9);
        assert!(r.min_error_sum >= 0.8 - 0.04, "{r:?}");
    }
}

#[test]
fn identical_hypotheses_leave_error_sum_near_one() {
    let gen = |rng: &mut StreamRng| sample_interarrival(3.0, 10.0, rng);
    let cfg = DetectorConfig::calibrated(3.0, 10.0, 0.1).unwrap();
    let est = estimate_errors(&gen, &gen, &cfg, 10_000, RngSeed(6)).unwrap();
    assert!(est.min_error_sum > 0.97, "{est:?}");
    assert!(est.min_error_sum <= 1.0);
}

#[test]
fn threshold_sweep_on_hand_data() {
    assert_eq!(min_threshold_error_sum(&[1, 2, 3], &[4, 5, 6]), 0.0);
    assert_eq!(min_threshold_error_sum(&[4, 5, 6], &[1, 2, 3]), 0.0);
    assert_eq!(min_threshold_error_sum(&[2, 2], &[2, 2]), 1.0);
    let v = min_threshold_error_sum(&[1, 2, 3, 4], &[3, 4, 5, 6]);
    assert!((v - 0.5).abs() < 1e-15);
}

#[test]
fn detector_sees_only_counts() {
    let cfg = DetectorConfig::calibrated(50.0, 200.0, 0.05).unwrap();
    let t = run_insertion_trial(50.0, 5.0, 200.0, RngSeed(7)).unwrap();
    let r = count_detect(&t.combined, &cfg).unwrap();
    assert_eq!(r.observed_count, t.overt.len() + t.covert_count);
    assert_eq!(r.decision, Hypothesis::H1);
}

#[test]
fn covert_count_matches_budget() {
    let b = insertion_budget(50.0, 200.0, 0.2).unwrap();
    let n = 10_000u64;
    let pairs: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let t = run_insertion_trial(50.0, b.delta, 200.0, RngSeed(8).derive(i)).unwrap();
            (t.overt.len() as f64, t.covert_count as f64)
        })
        .collect();
    let covert: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let overt: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let (mc, _) = mean_var(&covert);
    let sigma = (b.packets() / n as f64).sqrt();
    assert!((mc - b.packets()).abs() < 4.0 * sigma, "mean {mc}");

    // overt and covert counts are independent
    let (mo, vo) = mean_var(&overt);
    let (_, vc) = mean_var(&covert);
    let cov = pairs.iter().map(|(o, c)| (o - mo) * (c - mc)).sum::<f64>() / (n as f64 - 1.0);
    let r = cov / (vo * vc).sqrt();
    assert!(r.abs() < 4.0 / (n as f64).sqrt(), "correlation {r}");
}

#[test]
fn combined_stream_is_poisson() {
    let (lambda, t) = (5.0, 20.0);
    let b = insertion_budget(lambda, t, 0.2).unwrap();
    let counts: Vec<u64> = (0..100_000u64)
        .into_par_iter()
        .map(|i| {
            run_insertion_trial(lambda, b.delta, t, RngSeed(9).derive(i))
                .unwrap()
                .combined
                .len() as u64
        })
        .collect();
    let r = chi_square_poisson(&counts, (lambda + b.delta) * t).unwrap();
    assert!(r.p_value > 0.01, "{r:?}");
}
