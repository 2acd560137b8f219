//! Built-in experiments, one per published claim.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use weaklink::amc::{AmcModel, AmcOptions};
use weaklink::engine::{estimate_welfare, Simulation};
use weaklink::network::{gen_clique, gen_island, hub_topology, partitions, spanning_trees};
use weaklink::welfare::{bound_island_terms, bound_no_weak, two_node_comparison};
use weaklink::SimParams;

use crate::error::CliResult;
use crate::output::{Format, Table};
use crate::run::RunOutput;
use crate::sweep::sweep_star_scaling;

pub const DEFAULT_SEED: u64 = 2024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Preset {
    NoWeakClique,
    FrozenClique,
    TwoNode,
    IslandBoundGrid,
    StarVsIslandsExact,
    StarScaling,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::NoWeakClique => "no_weak_clique",
            Preset::FrozenClique => "frozen_clique",
            Preset::TwoNode => "two_node",
            Preset::IslandBoundGrid => "island_bound_grid",
            Preset::StarVsIslandsExact => "star_vs_islands_exact",
            Preset::StarScaling => "star_scaling",
        }
    }

    pub fn default_format(self) -> Format {
        match self {
            Preset::TwoNode => Format::Json,
            _ => Format::Csv,
        }
    }

    pub fn run(self, seed: u64) -> CliResult<RunOutput> {
        match self {
            Preset::NoWeakClique => no_weak_clique(seed),
            Preset::FrozenClique => frozen_clique(seed),
            Preset::TwoNode => two_node(),
            Preset::IslandBoundGrid => island_bound_grid(),
            Preset::StarVsIslandsExact => star_vs_islands_exact(),
            Preset::StarScaling => star_scaling(seed),
        }
    }
}

fn exact_model(net: &weaklink::NetworkSpec, p: &SimParams<f64>) -> CliResult<AmcModel<f64>> {
    Ok(AmcModel::solve(net, p, &AmcOptions::default())?)
}

#[derive(Debug, Clone, Serialize)]
struct NoWeakRow {
    n: usize,
    epsilon: f64,
    tau: f64,
    welfare: f64,
    ci99_low: f64,
    ci99_high: f64,
    welfare_exact: f64,
    bound_no_weak: f64,
    bound_in_ci: bool,
}

fn no_weak_clique(seed: u64) -> CliResult<RunOutput> {
    let mut rows = Vec::new();
    for n in [1, 3, 6] {
        for eps in [0.01, 0.1] {
            let net = gen_clique(n)?;
            let p = SimParams::new(1.0, 0.0, 0.0, eps, 0.1).with_seed(seed);
            let est = estimate_welfare(&net, &p, 100_000, 0, 8)?;
            let bound = bound_no_weak(1.0, eps);
            let (lo, hi) = est.ci(0.99);
            rows.push(NoWeakRow {
                n,
                epsilon: eps,
                tau: 0.1,
                welfare: est.mean,
                ci99_low: lo,
                ci99_high: hi,
                welfare_exact: exact_model(&net, &p)?.welfare,
                bound_no_weak: bound,
                bound_in_ci: lo <= bound && bound <= hi,
            });
        }
    }
    let covered = rows.iter().filter(|r| r.bound_in_ci).count();
    Ok(RunOutput::ok(vec![Table::from_rows("no_weak_clique", &rows)?], format!("{covered}/{} cells cover ½(1+q)", rows.len())))
}

#[derive(Debug, Clone, Serialize)]
struct FrozenRow {
    n: usize,
    tau: f64,
    regime: weaklink::Regime,
    welfare_exact: f64,
    events_simulated: u64,
    profile_changes: u64,
}

fn frozen_clique(seed: u64) -> CliResult<RunOutput> {
    let net = gen_clique(4)?;
    let p = SimParams::new(1.0, 0.0, 0.0, 0.1, 0.5).with_seed(seed);
    let welfare = exact_model(&net, &p)?.welfare;
    let mut sim = Simulation::new(&net, p, 0)?;
    let mut changes = 0;
    let events = 100_000;
    for _ in 0..events {
        let before = sim.state().actions.clone();
        sim.step()?;
        changes += u64::from(sim.state().actions != before);
    }
    let row = FrozenRow {
        n: 4,
        tau: 0.5,
        regime: weaklink::classify_regime(&net, 0.5),
        welfare_exact: welfare,
        events_simulated: events,
        profile_changes: changes,
    };
    Ok(RunOutput::ok(vec![Table::from_rows("frozen_clique", &[row])?], format!("exact welfare {welfare}, {changes} profile changes")))
}

#[derive(Debug, Clone, Serialize)]
struct TwoNodeRow {
    lambda: f64,
    epsilon: f64,
    gamma: f64,
    phi: f64,
    welfare_strong: f64,
    welfare_weak: f64,
    strong_minus_weak: f64,
}

fn two_node() -> CliResult<RunOutput> {
    let mut rows = Vec::new();
    for eps in [1e-3, 1e-2, 1e-1] {
        for gamma in [0.1, 1.0, 10.0] {
            let c = two_node_comparison(&SimParams::new(1.0, gamma, 1e4, eps, 0.0))?;
            rows.push(TwoNodeRow {
                lambda: 1.0,
                epsilon: eps,
                gamma,
                phi: 1e4,
                welfare_strong: c.welfare_strong,
                welfare_weak: c.welfare_weak,
                strong_minus_weak: c.welfare_strong - c.welfare_weak,
            });
        }
    }
    let ordered = rows.iter().filter(|r| r.welfare_strong > r.welfare_weak).count();
    Ok(RunOutput::ok(vec![Table::from_rows("two_node", &rows)?], format!("strong link ahead in {ordered}/{} cells", rows.len())))
}

#[derive(Debug, Clone, Serialize)]
struct IslandRow {
    sizes: String,
    gamma: f64,
    welfare: f64,
    p_raw: f64,
    p_conditional: Option<f64>,
    term_i: f64,
    term_ii: f64,
    term_iii: f64,
    bound: f64,
    slack: f64,
}

fn dashed(xs: &[usize]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("-")
}

fn island_bound_grid() -> CliResult<RunOutput> {
    let cases: Vec<(Vec<usize>, f64)> =
        (1..=3).flat_map(|k| partitions(6, k)).flat_map(|s| [0.5, 2.0].map(|g| (s.clone(), g))).collect();
    let rows = cases
        .par_iter()
        .map(|(sizes, gamma)| {
            let net = gen_island(sizes, &hub_topology(sizes.len(), 0))?;
            let p = SimParams::new(1.0, *gamma, 1e4, 0.01, 0.0);
            let m = exact_model(&net, &p)?;
            let b = bound_island_terms(m.p_conditional.unwrap_or(0.0), 1.0, 0.01, *gamma, sizes)?;
            Ok(IslandRow {
                sizes: dashed(sizes),
                gamma: *gamma,
                welfare: m.welfare,
                p_raw: m.p_raw,
                p_conditional: m.p_conditional,
                term_i: b.term_i,
                term_ii: b.term_ii,
                term_iii: b.term_iii,
                bound: b.value,
                slack: b.value - m.welfare,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let held = rows.iter().filter(|r| r.welfare <= r.bound + 1e-9).count();
    Ok(RunOutput::ok(vec![Table::from_rows("island_bound_grid", &rows)?], format!("bound holds in {held}/{} cases", rows.len())))
}

#[derive(Debug, Clone, Serialize)]
struct FamilyRow {
    n: usize,
    phi: f64,
    sizes: String,
    weak_topology: String,
    is_star: bool,
    welfare: f64,
    eta_core_good: f64,
    rank: usize,
}

fn star_vs_islands_exact() -> CliResult<RunOutput> {
    let mut rows = Vec::new();
    let mut star_first = 0;
    let mut groups = 0;
    for n in [6, 7] {
        for phi in [1e4, 1e-4] {
            let p = SimParams::new(1.0, 2.0, phi, 1e-4, 0.0);
            let members: Vec<(Vec<usize>, Vec<(usize, usize)>)> =
                partitions(n, 3).into_iter().flat_map(|s| spanning_trees(3).into_iter().map(move |t| (s.clone(), t))).collect();
            let mut group = members
                .par_iter()
                .map(|(sizes, tree)| {
                    let m = exact_model(&gen_island(sizes, tree)?, &p)?;
                    Ok(FamilyRow {
                        n,
                        phi,
                        sizes: dashed(sizes),
                        weak_topology: tree.iter().map(|(a, b)| format!("{a}:{b}")).collect::<Vec<_>>().join(";"),
                        is_star: *sizes == vec![n - 2, 1, 1] && *tree == hub_topology(3, 0),
                        welfare: m.welfare,
                        eta_core_good: m.eta_core_good,
                        rank: 0,
                    })
                })
                .collect::<CliResult<Vec<_>>>()?;
            let mut order: Vec<usize> = (0..group.len()).collect();
            order.sort_by(|&a, &b| group[b].welfare.total_cmp(&group[a].welfare).then(a.cmp(&b)));
            for (rank, &i) in order.iter().enumerate() {
                group[i].rank = rank + 1;
            }
            let best = group[order[0]].welfare;
            groups += 1;
            star_first += usize::from(group.iter().any(|r| r.is_star && r.welfare >= best - 1e-6));
            rows.extend(group);
        }
    }
    Ok(RunOutput::ok(
        vec![Table::from_rows("star_vs_islands_exact", &rows)?],
        format!("star attains the maximum in {star_first}/{groups} groups"),
    ))
}

fn star_scaling(seed: u64) -> CliResult<RunOutput> {
    let res = sweep_star_scaling(&[9, 25, 64, 144], 1.0, 1.0 / 144.0, seed, 20_000, 0, 8)?;
    let last = res.rows.last().map_or(f64::NAN, |r| r.welfare);
    let summary = format!(
        "{} of {} steps up, trend {}, welfare at n=144: {last:.4}",
        res.increasing_steps,
        res.rows.len() - 1,
        if res.trend_ok { "monotone" } else { "not monotone" }
    );
    Ok(RunOutput::ok(vec![Table::from_rows("star_scaling", &res.rows)?.with_json(&res)], summary))
}
