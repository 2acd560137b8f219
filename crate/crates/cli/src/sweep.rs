//! Parameter sweeps, including the star scaling experiment.

use rayon::prelude::*;
use serde::Serialize;
use weaklink::amc::{AmcModel, AmcOptions};
use weaklink::engine::{estimate_welfare, Simulation};
use weaklink::network::{classify_regime, gen_star, NetworkSpec, Regime};
use weaklink::welfare::{Method, WelfareEstimate};
use weaklink::SimParams;

use crate::config::{Axis, MethodChoice};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StarScalingRow {
    pub n: usize,
    pub m: usize,
    pub gamma: f64,
    pub phi: f64,
    pub epsilon: f64,
    pub welfare: f64,
    pub stderr: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    /// Fraction of snapshots with the core playing the better action.
    pub core_correct: f64,
    /// (n−m+1)/n · core_correct.
    pub lower_bound: f64,
    pub lower_bound_ok: bool,
    /// Welfare above the previous row.
    pub up_from_previous: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StarScaling {
    pub rows: Vec<StarScalingRow>,
    pub increasing_steps: usize,
    pub decreasing_steps: usize,
    /// Strictly increasing, except at most one decrease whose CIs overlap.
    pub trend_ok: bool,
}

/// Rates of the scaling recipe for a star with `m` weak-link islands.
pub fn star_rates(lambda: f64, m: usize, tau: f64, seed: u64) -> SimParams<f64> {
    let mf = m as f64;
    SimParams::new(lambda, mf.sqrt() * lambda, mf.powf(-0.25) * lambda, 1e-4 * lambda, tau).with_seed(seed)
}

/// Monte Carlo welfare of stars with m = ⌈√n⌉, γ = √m·λ, φ = m^{−1/4}·λ and
/// ε = 10⁻⁴λ for each n.
pub fn sweep_star_scaling(
    ns: &[usize],
    lambda: f64,
    tau: f64,
    seed: u64,
    epochs: u64,
    burn_in: u64,
    replicas: u64,
) -> CliResult<StarScaling> {
    let mut rows: Vec<StarScalingRow> = Vec::with_capacity(ns.len());
    for &n in ns {
        let m = (n as f64).sqrt().ceil() as usize;
        let net = gen_star(n, m)?;
        let params = star_rates(lambda, m, tau, seed);
        if classify_regime(&net, tau) != Regime::Coordinated {
            return Err(CliError::Invalid(format!("τ={tau} is not in the Coordinated regime for the n={n} star; lower it")));
        }
        let runs: Vec<(Vec<f64>, u64)> = (0..replicas)
            .into_par_iter()
            .map(|r| core_run(&net, params, epochs, burn_in, r))
            .collect::<Result<_, _>>()?;
        let core_hits: u64 = runs.iter().map(|r| r.1).sum();
        let values: Vec<Vec<f64>> = runs.into_iter().map(|r| r.0).collect();
        let samples: usize = values.iter().map(Vec::len).sum();
        let est = WelfareEstimate::from_replicas(&values, Method::MonteCarlo);
        let core_correct = core_hits as f64 / samples as f64;
        let lower_bound = (n - m + 1) as f64 / n as f64 * core_correct;
        rows.push(StarScalingRow {
            n,
            m,
            gamma: params.gamma,
            phi: params.phi,
            epsilon: params.epsilon,
            welfare: est.mean,
            stderr: est.stderr,
            ci95_low: est.ci95.0,
            ci95_high: est.ci95.1,
            core_correct,
            lower_bound,
            lower_bound_ok: est.mean >= lower_bound - 1e-12,
            up_from_previous: rows.last().map(|prev| est.mean > prev.welfare),
        });
    }
    let increasing_steps = rows.iter().filter(|r| r.up_from_previous == Some(true)).count();
    let decreases: Vec<usize> = (1..rows.len()).filter(|&i| rows[i].up_from_previous == Some(false)).collect();
    let overlapping = |i: usize| rows[i].ci95_high >= rows[i - 1].ci95_low;
    let trend_ok = decreases.len() <= 1 && decreases.iter().all(|&i| overlapping(i));
    Ok(StarScaling { increasing_steps, decreasing_steps: decreases.len(), trend_ok, rows })
}

/// One replica: welfare samples and the number of snapshots with the core right.
fn core_run(net: &NetworkSpec, params: SimParams<f64>, epochs: u64, burn_in: u64, replica: u64) -> weaklink::Result<(Vec<f64>, u64)> {
    let mut sim = Simulation::new(net, params, replica)?;
    let mut values = Vec::new();
    let mut hits = 0;
    sim.run_with(epochs, burn_in, |_, snap| {
        if let Some(s) = snap {
            values.push(s.fraction_correct);
            // agent 0 belongs to the core clique
            hits += u64::from(s.profile[0] == s.better);
        }
    })?;
    Ok((values, hits))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamSweepRow {
    pub axis: Axis,
    pub value: f64,
    pub method: Method,
    pub welfare: Option<f64>,
    pub stderr: Option<f64>,
    pub ci95_low: Option<f64>,
    pub ci95_high: Option<f64>,
    pub regime: Regime,
    pub error: Option<String>,
}

pub fn with_axis(params: &SimParams<f64>, axis: Axis, value: f64) -> SimParams<f64> {
    let mut p = *params;
    match axis {
        Axis::Lambda => p.lambda = value,
        Axis::Gamma => p.gamma = value,
        Axis::Phi => p.phi = value,
        Axis::Epsilon => p.epsilon = value,
        Axis::Tau => p.tau = value,
        Axis::StarScaling => unreachable!("star scaling is not a rate axis"),
    }
    p
}

/// Welfare of one network along a rate axis. Points that fail (bad value,
/// unsupported regime) are reported in their row.
pub fn sweep_param(
    net: &NetworkSpec,
    params: &SimParams<f64>,
    axis: Axis,
    values: &[f64],
    method: MethodChoice,
    budget: (u64, u64, u64),
) -> Vec<ParamSweepRow> {
    values
        .par_iter()
        .map(|&value| {
            let p = with_axis(params, axis, value);
            let est = p.validate().and_then(|_| match method {
                MethodChoice::Exact => AmcModel::solve(net, &p, &AmcOptions::default())
                    .map(|m| WelfareEstimate::exact(m.welfare, Method::ExactAmc)),
                MethodChoice::MonteCarlo => estimate_welfare(net, &p, budget.0, budget.1, budget.2),
            });
            let method = match method {
                MethodChoice::Exact => Method::ExactAmc,
                MethodChoice::MonteCarlo => Method::MonteCarlo,
            };
            let regime = classify_regime(net, p.tau);
            match est {
                Ok(e) => ParamSweepRow {
                    axis,
                    value,
                    method,
                    welfare: Some(e.mean),
                    stderr: Some(e.stderr),
                    ci95_low: Some(e.ci95.0),
                    ci95_high: Some(e.ci95.1),
                    regime,
                    error: None,
                },
                Err(err) => ParamSweepRow {
                    axis,
                    value,
                    method,
                    welfare: None,
                    stderr: None,
                    ci95_low: None,
                    ci95_high: None,
                    regime,
                    error: Some(err.to_string()),
                },
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn star_row_is_reproducible() {
        let a = sweep_star_scaling(&[9], 1.0, 0.0, 11, 2_000, 0, 2).unwrap();
        let b = sweep_star_scaling(&[9], 1.0, 0.0, 11, 2_000, 0, 2).unwrap();
        assert_eq!(a, b);
        let row = a.rows[0];
        assert_eq!((row.n, row.m), (9, 3));
        assert!(row.lower_bound_ok);
        assert!((row.gamma - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn frozen_tau_is_rejected() {
        assert!(matches!(sweep_star_scaling(&[9], 1.0, 0.9, 1, 100, 0, 1), Err(CliError::Invalid(_))));
    }

    #[test]
    fn exact_sweep_reports_each_point() {
        let net = weaklink::gen_clique(3).unwrap();
        let p = SimParams::new(1.0, 0.0, 0.0, 0.1, 0.0);
        let rows = sweep_param(&net, &p, Axis::Tau, &[0.1, 0.5, 0.75], MethodChoice::Exact, (1, 0, 1));
        assert!((rows[0].welfare.unwrap() - 6.0 / 11.0).abs() < 1e-12);
        assert_eq!(rows[1].regime, Regime::Coordinated);
        assert_eq!(rows[2].welfare, Some(0.5));
    }
}
