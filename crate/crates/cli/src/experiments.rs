//! One function per scenario, each producing a CSV table and a summary.

use covertsim::buffer::buffering_covertness_check;
use covertsim::codec::{
    capacity, chernoff_event_bound, codebook_size, plan_phases, predict_failure,
    run_scenario2_experiment,
};
use covertsim::divergence::{
    buffering_budget, insertion_budget, kl_bound_buffering, kl_bound_insertion, tv_error_floor,
};
use covertsim::fmt::{prob, sig9};
use covertsim::insertion::{overload_scaling_experiment, throughput_scaling_experiment};
use covertsim::special::erf;
use covertsim::walk::{exact_survival, simulate_survival};
use covertsim::{ChannelParams, RngSeed};

use crate::config::{ExperimentConfig, Scenario, Schedule};

/// A finished experiment: CSV text (header plus rows, LF line endings) and
/// a one-line summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub csv: String,
    pub summary: String,
}

/// Column headers, fixed per scenario.
pub fn columns(scenario: Scenario) -> &'static str {
    match scenario {
        Scenario::Kl => {
            "T,delta,kl_insertion_exact,kl_insertion_bound,kl_buffering_exact,kl_buffering_bound,tv_floor"
        }
        Scenario::Detect => "T,threshold_U,covert_packets,pfa,pmd,min_error_sum",
        Scenario::Sqrtlaw => "T,delta,covert_packets,min_error_sum",
        Scenario::Buffering => "T,delta,buffer_packets,pfa,pmd,min_error_sum",
        Scenario::Walk => "m,steps,mc_survival,exact_survival,erf_limit",
        Scenario::Timing => {
            "psi,buffer_window,transmit_window,m_planned,capacity,log_codebook_size,predicted_failure,chernoff_bound"
        }
        Scenario::E2e => "psi,m_mean,failure_rate,decode_error_rate,min_error_sum",
    }
}

pub fn run(cfg: &ExperimentConfig) -> covertsim::Result<Report> {
    let (rows, summary) = match cfg.scenario {
        Scenario::Kl => kl(cfg)?,
        Scenario::Detect => detect(cfg)?,
        Scenario::Sqrtlaw => sqrtlaw(cfg)?,
        Scenario::Buffering => buffering(cfg)?,
        Scenario::Walk => walk(cfg)?,
        Scenario::Timing => timing(cfg)?,
        Scenario::E2e => e2e(cfg)?,
    };
    let mut csv = String::from(columns(cfg.scenario));
    csv.push('\n');
    for row in rows {
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    Ok(Report {
        csv,
        summary: format!("{}: {summary}", cfg.scenario),
    })
}

type Table = (Vec<Vec<String>>, String);

fn kl(cfg: &ExperimentConfig) -> covertsim::Result<Table> {
    let mut rows = Vec::new();
    let mut worst = f64::INFINITY;
    for &t in &cfg.horizons {
        let b = insertion_budget(cfg.lambda, t, cfg.epsilon)?;
        let ins = kl_bound_insertion(cfg.lambda, b.delta, t)?;
        let (buf_exact, buf_bound) = match buffering_budget(cfg.lambda, t, cfg.epsilon) {
            Ok(bb) => {
                let k = kl_bound_buffering(cfg.lambda, bb.delta, t)?;
                (sig9(k.exact), sig9(k.bound))
            }
            Err(_) => ("nan".into(), "nan".into()),
        };
        let floor = tv_error_floor(ins.exact)?.value;
        worst = worst.min(floor);
        rows.push(vec![
            sig9(t),
            sig9(b.delta),
            sig9(ins.exact),
            sig9(ins.bound),
            buf_exact,
            buf_bound,
            prob(floor),
        ]);
    }
    Ok((
        rows,
        format!(
            "lowest error-sum floor {} over {} horizons",
            prob(worst),
            cfg.horizons.len()
        ),
    ))
}

fn detect(cfg: &ExperimentConfig) -> covertsim::Result<Table> {
    let seed = RngSeed(cfg.seed);
    let rows = match cfg.schedule {
        Schedule::Overload => overload_scaling_experiment(
            cfg.lambda,
            &cfg.horizons,
            |lt| 4.0 * lt.powf(0.75),
            cfg.alpha,
            cfg.trials,
            seed,
            cfg.sampling,
        )?,
        Schedule::Budget => throughput_scaling_experiment(
            cfg.lambda,
            &cfg.horizons,
            cfg.epsilon,
            cfg.alpha,
            cfg.trials,
            seed,
            cfg.sampling,
        )?,
    };
    let max_pfa = rows.iter().map(|r| r.pfa).fold(0.0, f64::max);
    let last_pmd = rows.last().map_or(f64::NAN, |r| r.pmd);
    let table = rows
        .iter()
        .map(|r| {
            vec![
                sig9(r.horizon),
                sig9(r.threshold_u),
                sig9(r.covert_packets),
                prob(r.pfa),
                prob(r.pmd),
                prob(r.min_error_sum),
            ]
        })
        .collect();
    Ok((
        table,
        format!(
            "max pfa {} at alpha {}, pmd {} at the largest T",
            prob(max_pfa),
            prob(cfg.alpha),
            prob(last_pmd)
        ),
    ))
}

fn sqrtlaw(cfg: &ExperimentConfig) -> covertsim::Result<Table> {
    let rows = throughput_scaling_experiment(
        cfg.lambda,
        &cfg.horizons,
        cfg.epsilon,
        cfg.alpha,
        cfg.trials,
        RngSeed(cfg.seed),
        cfg.sampling,
    )?;
    let lowest = rows.iter().map(|r| r.min_error_sum).fold(1.0, f64::min);
    let table = rows
        .iter()
        .map(|r| {
            vec![
                sig9(r.horizon),
                sig9(r.delta),
                sig9(r.covert_packets),
                prob(r.min_error_sum),
            ]
        })
        .collect();
    Ok((
        table,
        format!(
            "lowest min_error_sum {} against target {}",
            prob(lowest),
            prob(1.0 - cfg.epsilon)
        ),
    ))
}

fn buffering(cfg: &ExperimentConfig) -> covertsim::Result<Table> {
    let mut rows = Vec::new();
    let mut lowest = 1.0_f64;
    for (k, &w) in cfg.horizons.iter().enumerate() {
        let b = buffering_budget(cfg.lambda, w, cfg.epsilon)?;
        let est = buffering_covertness_check(
            cfg.lambda,
            w,
            cfg.epsilon,
            cfg.trials,
            RngSeed(cfg.seed).derive(k as u64),
        )?;
        lowest = lowest.min(est.min_error_sum);
        rows.push(vec![
            sig9(w),
            sig9(b.delta),
            sig9(b.packets()),
            prob(est.pfa),
            prob(est.pmd),
            prob(est.min_error_sum),
        ]);
    }
    Ok((
        rows,
        format!(
            "lowest min_error_sum {} against target {}",
            prob(lowest),
            prob(1.0 - cfg.epsilon)
        ),
    ))
}

fn walk(cfg: &ExperimentConfig) -> covertsim::Result<Table> {
    let exact = exact_survival(cfg.m, cfg.steps)?;
    let sim = simulate_survival(cfg.m, cfg.steps, cfg.trials as u64, RngSeed(cfg.seed))?;
    let limit = erf(cfg.m as f64 / (2.0 * cfg.steps as f64).sqrt());
    let row = vec![
        cfg.m.to_string(),
        cfg.steps.to_string(),
        prob(sim.survival_rate),
        prob(exact),
        prob(limit),
    ];
    let sigma = sim.sigma(exact);
    let z = if sigma > 0.0 {
        (sim.survival_rate - exact) / sigma
    } else {
        0.0
    };
    Ok((
        vec![row],
        format!(
            "simulation off exact by {} sigma, erf limit off by {}",
            sig9(z),
            prob((exact - limit).abs())
        ),
    ))
}

fn timing(cfg: &ExperimentConfig) -> covertsim::Result<Table> {
    let t = cfg.horizons[0];
    let plan = plan_phases(cfg.epsilon, cfg.zeta, t)?;
    let m = plan.planned_buffer(cfg.lambda);
    let steps = 4.0 * cfg.lambda * plan.transmit_window;
    let size = codebook_size(cfg.lambda, t, plan.psi, cfg.mu)?;
    let cap = capacity(cfg.lambda, cfg.mu)?;
    let fail = predict_failure(m, steps.max(1.0))?;
    let chernoff = chernoff_event_bound(cfg.lambda * plan.transmit_window)?;
    let row = vec![
        sig9(plan.psi),
        sig9(plan.buffer_window),
        sig9(plan.transmit_window),
        sig9(m),
        sig9(cap),
        sig9(size.log_m),
        prob(fail),
        prob(chernoff),
    ];
    Ok((
        vec![row],
        format!(
            "failure bound {} against zeta {}",
            prob(fail + chernoff),
            prob(cfg.zeta)
        ),
    ))
}

fn e2e(cfg: &ExperimentConfig) -> covertsim::Result<Table> {
    let params = ChannelParams {
        lambda: cfg.lambda,
        mu: cfg.mu,
        horizon: cfg.horizons[0],
        epsilon: cfg.epsilon,
        zeta: cfg.zeta,
    };
    let s = run_scenario2_experiment(&params, cfg.codebook_size, cfg.trials, RngSeed(cfg.seed))?;
    let row = vec![
        sig9(s.psi),
        sig9(s.m_mean),
        prob(s.failure_rate),
        prob(s.decode_error_rate),
        prob(s.min_error_sum),
    ];
    Ok((
        vec![row],
        format!(
            "{} sessions, failure {} decode error {}",
            s.trials,
            prob(s.failure_rate),
            prob(s.decode_error_rate)
        ),
    ))
}
