//! Mode dispatch: turns a validated configuration into result tables.

use std::io::Write;

use serde::Serialize;
use weaklink::amc::{AmcModel, AmcOptions};
use weaklink::engine::{estimate_welfare, InfoRecord, Simulation, TraceRecord};
use weaklink::network::{classify_regime, on_regime_boundary, NetworkSpec, Regime};
use weaklink::welfare::{bound_discount, bound_island, bound_no_weak, compare_networks, tremble_learn_prob, Budget};
use weaklink::SimParams;

use crate::config::{Axis, ExperimentConfig, MethodChoice, Mode};
use crate::error::{CliError, CliResult};
use crate::output::{OutputDir, Table};
use crate::sweep::{sweep_param, sweep_star_scaling};

pub fn amc_options(config: &ExperimentConfig) -> AmcOptions {
    let mut o = AmcOptions::default();
    if let Some(cap) = config.state_cap {
        o.state_cap = cap;
    }
    o
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateRow {
    pub spec_hash: String,
    pub n: usize,
    pub regime: Regime,
    pub boundary: bool,
    pub seed: u64,
    pub epochs: u64,
    pub burn_in: u64,
    pub replicas: u64,
    pub welfare: f64,
    pub stderr: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    pub bound_no_weak: Option<f64>,
}

pub fn simulate(config: &ExperimentConfig, out: &mut OutputDir, trace: bool) -> CliResult<Vec<Table>> {
    let net = config.network()?;
    let p = config.params;
    let est = estimate_welfare(&net, &p, config.epochs, config.burn_in, config.replicas)?;
    if trace {
        write_trace(&net, p, config.epochs, out)?;
    }
    let row = SimulateRow {
        spec_hash: net.spec_hash(),
        n: net.n(),
        regime: classify_regime(&net, p.tau),
        boundary: on_regime_boundary(&net, p.tau),
        seed: p.seed,
        epochs: config.epochs,
        burn_in: config.burn_in,
        replicas: config.replicas,
        welfare: est.mean,
        stderr: est.stderr,
        ci95_low: est.ci95.0,
        ci95_high: est.ci95.1,
        bound_no_weak: net.weak_edges().is_empty().then(|| bound_no_weak(p.lambda, p.epsilon)),
    };
    Ok(vec![Table::from_rows("simulate", &[row])?])
}

/// Event trace and cascade log of replica 0, one JSON object per line.
fn write_trace(net: &NetworkSpec, p: SimParams<f64>, epochs: u64, out: &mut OutputDir) -> CliResult<()> {
    let mut events = out.stream("trace.jsonl")?;
    let mut infos = out.stream("cascade.jsonl")?;
    // same seed and replica index as the first Monte Carlo replica
    let mut sim = Simulation::new(net, p, 0)?;
    let mut io_err = None;
    while sim.state().epoch_index < epochs {
        let step = sim.step()?;
        let rec = TraceRecord::new(&step, sim.state());
        let mut res = serde_json::to_writer(&mut events, &rec).map_err(std::io::Error::from).and_then(|_| writeln!(events));
        for e in &step.outcome.log {
            let info = InfoRecord { time: step.event.time, event: *e };
            res = res.and_then(|_| serde_json::to_writer(&mut infos, &info).map_err(std::io::Error::from)).and_then(|_| writeln!(infos));
        }
        if let Err(e) = res {
            io_err = Some(e);
            break;
        }
    }
    if let Some(e) = io_err {
        return Err(CliError::io("writing trace")(e));
    }
    events.flush().map_err(CliError::io("writing trace.jsonl"))?;
    infos.flush().map_err(CliError::io("writing cascade.jsonl"))?;
    drop((events, infos));
    out.register("trace.jsonl")?;
    out.register("cascade.jsonl")?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct StateRow {
    pub index: usize,
    pub better: u8,
    /// One digit per agent.
    pub profile: String,
    /// Dormant weak-link indices separated by `;`.
    pub dormant: String,
    pub eta: f64,
    pub fraction_correct: f64,
}

#[derive(Debug, Clone, Serialize)]
struct ExactDoc<'a> {
    spec_hash: String,
    boundary: bool,
    recurrent_states: usize,
    #[serde(flatten)]
    model: &'a weaklink::amc::ModelExport,
}

pub fn exact(config: &ExperimentConfig) -> CliResult<(Vec<Table>, f64)> {
    let net = config.network()?;
    let model = AmcModel::solve(&net, &config.params, &amc_options(config))?;
    let rows: Vec<StateRow> = model
        .states
        .iter()
        .enumerate()
        .map(|(i, s)| StateRow {
            index: i,
            better: s.better.bit() as u8,
            profile: model.space.expand_profile(s.profile).iter().map(|a| if a.bit() { '1' } else { '0' }).collect(),
            dormant: model.space.dormant_links(s.dormant).iter().map(|l| l.to_string()).collect::<Vec<_>>().join(";"),
            eta: model.eta[i],
            fraction_correct: model.space.fraction_correct(s),
        })
        .collect();
    let export = model.to_export();
    let doc = ExactDoc {
        spec_hash: net.spec_hash(),
        boundary: on_regime_boundary(&net, config.params.tau),
        recurrent_states: model.recurrent_states,
        model: &export,
    };
    Ok((vec![Table::from_rows("exact", &rows)?.with_json(&doc)], model.welfare))
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsRow {
    pub spec_hash: String,
    pub regime: Regime,
    pub boundary: bool,
    pub d_min: usize,
    pub d_max: usize,
    pub tremble_learn_prob: f64,
    pub bound_no_weak: f64,
    pub bound_island: Option<f64>,
    pub p_conditional: Option<f64>,
    pub bound_discount: Option<f64>,
    pub beta: Option<f64>,
    pub beta_below_bound: Option<bool>,
}

pub fn bounds(config: &ExperimentConfig) -> CliResult<Vec<Table>> {
    let net = config.network()?;
    let p = config.params;
    let (mut island, mut p_cond) = (None, None);
    if let Some(sizes) = net.island_sizes().filter(|s| s.len() >= 2 && p.epsilon > 0.0) {
        let model = AmcModel::solve(&net, &p, &amc_options(config))?;
        p_cond = model.p_conditional;
        island = Some(bound_island(p_cond.unwrap_or(0.0), p.lambda, p.epsilon, p.gamma, &sizes)?);
    }
    let (d_min, d_max) = (net.d_min(), net.d_max());
    let discount = if d_min >= 1 { Some(bound_discount(p.tau, d_min, d_max)?) } else { None };
    let row = BoundsRow {
        spec_hash: net.spec_hash(),
        regime: classify_regime(&net, p.tau),
        boundary: on_regime_boundary(&net, p.tau),
        d_min,
        d_max,
        tremble_learn_prob: tremble_learn_prob(p.lambda, p.epsilon),
        bound_no_weak: bound_no_weak(p.lambda, p.epsilon),
        bound_island: island,
        p_conditional: p_cond,
        bound_discount: discount,
        beta: p.beta,
        beta_below_bound: p.beta.zip(discount).map(|(b, d)| b < d),
    };
    Ok(vec![Table::from_rows("bounds", &[row])?])
}

pub fn compare(config: &ExperimentConfig) -> CliResult<(Vec<Table>, weaklink::ComparisonReport)> {
    let specs = config
        .networks
        .iter()
        .map(|n| Ok((n.name.clone(), n.network.build()?)))
        .collect::<CliResult<Vec<_>>>()?;
    let budget = match config.method {
        MethodChoice::Exact => Budget::Exact,
        MethodChoice::MonteCarlo => {
            Budget::MonteCarlo { epochs: config.epochs, burn_in: config.burn_in, replicas: config.replicas }
        }
    };
    let report = compare_networks(&specs, &config.params, budget)?;
    let table = Table::from_rows("compare", &report.rows())?.with_json(&report);
    Ok((vec![table], report))
}

pub fn sweep(config: &ExperimentConfig) -> CliResult<Vec<Table>> {
    let sweep = config.sweep.as_ref().expect("validated");
    if sweep.axis == Axis::StarScaling {
        let ns: Vec<usize> = sweep.values.iter().map(|&v| v as usize).collect();
        let p = config.params;
        let res = sweep_star_scaling(&ns, p.lambda, p.tau, p.seed, config.epochs, config.burn_in, config.replicas)?;
        return Ok(vec![Table::from_rows("sweep", &res.rows)?.with_json(&res)]);
    }
    let net = config.network()?;
    let rows = sweep_param(
        &net,
        &config.params,
        sweep.axis,
        &sweep.values,
        config.method,
        (config.epochs, config.burn_in, config.replicas),
    );
    Ok(vec![Table::from_rows("sweep", &rows)?])
}

/// Tables to write, a one-line summary, and a failure to raise once the
/// tables are on disk.
pub struct RunOutput {
    pub tables: Vec<Table>,
    pub summary: String,
    pub failure: Option<CliError>,
}

impl RunOutput {
    pub fn ok(tables: Vec<Table>, summary: impl Into<String>) -> Self {
        Self { tables, summary: summary.into(), failure: None }
    }
}

pub fn run_mode(config: &ExperimentConfig, mode: Mode, out: &mut OutputDir, trace: bool) -> CliResult<RunOutput> {
    Ok(match mode {
        Mode::Simulate => RunOutput::ok(simulate(config, out, trace)?, "simulation finished"),
        Mode::Exact => {
            let (t, w) = exact(config)?;
            RunOutput::ok(t, format!("exact welfare {w:.12}"))
        }
        Mode::Bounds => RunOutput::ok(bounds(config)?, "bounds computed"),
        Mode::Compare => {
            let (tables, report) = compare(config)?;
            let best = report.ranking.first().map(|&i| report.entries[i].name.clone()).unwrap_or_default();
            let summary =
                format!("{} networks compared, best: {best}, violations: {}", report.entries.len(), report.violations.len());
            RunOutput { tables, summary, failure: report.ensure_no_violations().err().map(CliError::from) }
        }
        Mode::Sweep => RunOutput::ok(sweep(config)?, "sweep finished"),
    })
}
