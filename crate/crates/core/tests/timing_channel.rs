use covertsim::codec::{
    capacity, chernoff_event_bound, codebook_size, decode_ml, generate_codebook, plan_phases,
    predict_failure, run_scenario2, run_scenario2_experiment, transmit,
};
use covertsim::gof::chi_square_poisson;
use covertsim::queue::serve;
use covertsim::special::{erf, erf_inv};
use covertsim::trace::{poisson_count, sample_interarrival};
use covertsim::walk::{exact_survival, simulate_survival};
use covertsim::{ChannelParams, RngSeed};
use rand::Rng;
use rayon::prelude::*;

#[test]
fn pooled_codeword_counts_are_poisson() {
    let book = generate_codebook(10_000, 1.0, 10.0, RngSeed(31)).unwrap();
    let counts: Vec<u64> = book.codewords.iter().map(|c| c.len() as u64).collect();
    let r = chi_square_poisson(&counts, 10.0).unwrap();
    assert!(r.p_value > 0.01, "{r:?}");
}

fn block_error_rate(
    m: usize,
    lambda: f64,
    window: f64,
    mu: f64,
    trials: u64,
    seed: RngSeed,
) -> f64 {
    let errors: usize = (0..trials)
        .into_par_iter()
        .map(|i| {
            let s = seed.derive(i);
            let book = generate_codebook(m, lambda, window, s.derive(0)).unwrap();
            let mut rng = s.stream(1);
            let sent = rng.random_range(0..m);
            let p = serve(&book.codewords[sent], mu, &mut rng).unwrap();
            let got = decode_ml(p.departures.times(), &book, mu, 0.0).unwrap();
            (got.index() != Some(sent)) as usize
        })
        .sum();
    errors as f64 / trials as f64
}

#[test]
fn decoding_well_below_capacity_is_reliable() {
    // ln 16 / 30 nats/s against a capacity of ln 8
    let rate = 16f64.ln() / 30.0;
    assert!(rate < 0.3 * capacity(1.0, 8.0).unwrap());
    let err = block_error_rate(16, 1.0, 30.0, 8.0, 1_000, RngSeed(32));
    assert!(err < 0.05, "block error rate {err}");
}

#[test]
fn near_noiseless_queue_decodes_perfectly() {
    for m in [2, 16, 64] {
        let err = block_error_rate(m, 1.0, 20.0, 1_000.0, 200, RngSeed(33 + m as u64));
        assert_eq!(err, 0.0, "M = {m}");
    }
}

#[test]
fn transmission_conserves_packets() {
    for s in 0..200u64 {
        let seed = RngSeed(34).derive(s);
        let jack = sample_interarrival(2.0, 30.0, &mut seed.stream(0)).unwrap();
        let book = generate_codebook(1, 2.0, 10.0, seed.derive(1)).unwrap();
        let out = transmit(&book.codewords[0], 0, 3, &jack, 20.0).unwrap();
        let after = jack.times().iter().filter(|&&t| t > 20.0).count();
        assert_eq!(out.arrivals, after);
        assert_eq!(3 + out.arrivals, out.released.len() + out.buffer_final);
        if !out.failure {
            assert_eq!(out.released.len(), book.codewords[0].len());
        }
        for (r, w) in out.released.times().iter().zip(book.codewords[0].times()) {
            assert!((r - (20.0 + w)).abs() < 1e-12);
        }
    }
}

#[test]
fn predicted_failure_grows_with_transmission_length() {
    let mut prev = 0.0;
    for k in [10.0, 50.0, 100.0, 400.0, 1000.0, 5000.0] {
        let p = predict_failure(20.0_f64, k).unwrap();
        assert!(p > prev);
        prev = p;
    }
}

#[test]
fn predicted_failure_matches_walk_simulation() {
    // the limit ignores an O(1/sqrt(k)) lattice correction, so stay at large k
    for &(m, k) in &[(60u64, 7200u64), (100, 5000)] {
        let predicted = predict_failure(m as f64, k as f64).unwrap();
        let sim = simulate_survival(m, k, 100_000, RngSeed(35)).unwrap();
        assert!(
            (1.0 - sim.survival_rate - predicted).abs() < 0.01,
            "({m}, {k})"
        );
    }
}

#[test]
fn chernoff_bound_holds_empirically() {
    let bound = chernoff_event_bound(5.0_f64).unwrap();
    assert!((bound - 0.021_006_074_709_707_93).abs() < 1e-15);
    let hits: usize = (0..1_000_000u64)
        .into_par_iter()
        .map(|i| (poisson_count(10.0, &mut RngSeed(36).stream(i)) >= 20) as usize)
        .sum();
    let rate = hits as f64 / 1e6;
    assert!(rate <= bound, "{rate} > {bound}");
}

#[test]
fn codebook_size_is_linear_in_horizon() {
    let psi = plan_phases(0.2_f64, 0.1, 1.0).unwrap().psi;
    let base = codebook_size(20.0_f64, 1.0, psi, 80.0).unwrap().log_m;
    for t in [10.0, 100.0, 2000.0, 1e5] {
        let s = codebook_size(20.0_f64, t, psi, 80.0).unwrap();
        assert!((s.log_m - t * base).abs() <= 1e-12 * s.log_m);
    }
    let s = codebook_size(1.0_f64, 1000.0, 0.995, std::f64::consts::E).unwrap();
    assert!((s.log_m - 5.0).abs() < 1e-9);
    assert!((s.m.unwrap() - 148.413_159_102_576_6).abs() < 1e-6);
    assert!(codebook_size(1.0_f64, 1e9, 0.5, 1e6).unwrap().m.is_none());
}

#[test]
fn phase_plan_numbers() {
    assert!((erf_inv(0.95_f64) - 1.385_903_824_349_678).abs() < 1e-12);
    let p = plan_phases(0.2_f64, 0.1, 2000.0).unwrap();
    assert!((p.psi - 0.994_820_610_311).abs() < 1e-9);
    assert_eq!(p.buffer_window + p.transmit_window, 2000.0);
    // a buffer of m = ε sqrt(2λψT) survives 4λT' steps with probability 1 - ζ/2
    let m = p.planned_buffer(20.0);
    let k = 4.0 * 20.0 * p.transmit_window;
    assert!((erf(m / (2.0 * k).sqrt()) - 0.95).abs() < 1e-9);
}

#[test]
fn sessions_are_reproducible_and_consistent() {
    let params = ChannelParams {
        lambda: 2.0,
        mu: 10.0,
        horizon: 2000.0,
        epsilon: 0.2,
        zeta: 0.1,
    };
    let a = run_scenario2(&params, 8, RngSeed(37)).unwrap();
    let b = run_scenario2(&params, 8, RngSeed(37)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.released.len(), a.releases_total());
    // every packet Jack sent is released or still buffered at T
    assert_eq!(a.arrivals_total, a.releases_total() + a.buffer_final);
}

#[test]
fn end_to_end_at_desk_scale() {
    let params = ChannelParams {
        lambda: 2.0,
        mu: 10.0,
        horizon: 2000.0,
        epsilon: 0.2,
        zeta: 0.1,
    };
    let s = run_scenario2_experiment(&params, 16, 1_000, RngSeed(38)).unwrap();
    assert!(s.failure_rate < 0.1, "{s:?}");
    assert!(s.decode_error_rate < 0.05, "{s:?}");
    let plan = plan_phases(0.2_f64, 0.1, 2000.0).unwrap();
    let counts: Vec<u64> = s.phase2_counts.iter().map(|&c| c as u64).collect();
    let r = chi_square_poisson(&counts, 2.0 * plan.transmit_window).unwrap();
    assert!(r.p_value > 0.01, "{r:?}");
    assert!(s.min_error_sum >= 0.8 - 0.06, "{s:?}");
}

#[test]
fn walk_simulation_agrees_with_exact() {
    for &(m, k) in &[(20u64, 400u64), (5, 60), (0, 9)] {
        let exact = exact_survival(m, k).unwrap();
        let sim = simulate_survival(m, k, 100_000, RngSeed(39)).unwrap();
        let sigma = sim.sigma(exact).max(1e-6);
        assert!(
            (sim.survival_rate - exact).abs() < 4.0 * sigma,
            "({m}, {k})"
        );
    }
}

#[test]
fn exact_survival_approaches_erf() {
    // fixed argument m/sqrt(2k) = 1/sqrt(2); the gap shrinks as m grows
    let mut prev = f64::INFINITY;
    for m in [10u64, 20, 40] {
        let k = 2 * m * m;
        let gap = (exact_survival(m, k).unwrap() - erf(m as f64 / (2.0 * k as f64).sqrt())).abs();
        assert!(gap < prev, "m = {m}");
        prev = gap;
    }
}

#[test]
fn exact_survival_sits_one_lattice_step_above_erf() {
    // staying at or below m on the lattice is the continuum event for level m + 1
    for &(m, k) in &[(10u64, 200u64), (20, 400), (30, 1000), (40, 3200)] {
        let exact = exact_survival(m, k).unwrap();
        let shifted = erf((m + 1) as f64 / (2.0 * k as f64).sqrt());
        assert!(
            (exact - shifted).abs() < 2e-3,
            "({m}, {k}): {exact} vs {shifted}"
        );
    }
}
