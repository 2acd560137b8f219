//! Closed-form welfare bounds, Monte Carlo estimates and network comparisons.

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::amc::{AmcModel, AmcOptions};
use crate::engine::{estimate_welfare, SimParams};
use crate::error::{Error, Result};
use crate::network::{classify_regime, gen_island, on_regime_boundary, NetworkSpec, Regime};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    MonteCarlo,
    ExactAmc,
    ClosedForm,
}

/// Long-run average welfare with its uncertainty. Exact and closed-form
/// values carry a zero-width interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WelfareEstimate<T> {
    pub mean: T,
    pub stderr: T,
    pub ci95: (T, T),
    pub epochs_used: u64,
    pub replicas: u64,
    pub method: Method,
    /// Degrees of freedom behind `stderr` (0 for exact values).
    pub dof: u64,
}

const BATCHES: usize = 10;

impl<T: Real> WelfareEstimate<T> {
    pub fn exact(mean: T, method: Method) -> Self {
        Self { mean, stderr: T::zero(), ci95: (mean, mean), epochs_used: 0, replicas: 0, method, dof: 0 }
    }

    /// Estimate from per-replica welfare samples. Several replicas are
    /// treated as independent means; a single replica falls back to
    /// `BATCHES` batch means.
    pub fn from_replicas(runs: &[Vec<T>], method: Method) -> Self {
        let epochs_used = runs.iter().map(|r| r.len() as u64).sum();
        let groups: Vec<T> = if runs.len() >= 2 {
            runs.iter().map(|r| mean_of(r)).collect()
        } else {
            let r = runs.first().map(Vec::as_slice).unwrap_or(&[]);
            let size = (r.len() / BATCHES).max(1);
            r.chunks(size).filter(|c| c.len() == size).map(mean_of).collect()
        };
        let all: Vec<T> = runs.iter().flatten().copied().collect();
        let mean = mean_of(&all);
        let g = groups.len();
        let stderr = if g >= 2 {
            let gm = mean_of(&groups);
            let var = groups.iter().map(|&x| (x - gm) * (x - gm)).sum::<T>() / T::from_usize(g - 1).unwrap();
            (var / T::from_usize(g).unwrap()).sqrt()
        } else {
            T::infinity()
        };
        let mut est = Self {
            mean,
            stderr,
            ci95: (mean, mean),
            epochs_used,
            replicas: runs.len() as u64,
            method,
            dof: g.saturating_sub(1) as u64,
        };
        est.ci95 = est.ci(0.95);
        est
    }

    /// Two-sided confidence interval at `level`, Student-t on `dof`.
    pub fn ci(&self, level: f64) -> (T, T) {
        if self.stderr == T::zero() {
            return (self.mean, self.mean);
        }
        if self.dof == 0 || !self.stderr.is_finite() {
            return (T::neg_infinity(), T::infinity());
        }
        let t = StudentsT::new(0.0, 1.0, self.dof as f64).expect("positive dof");
        let half = T::lit(t.inverse_cdf(0.5 + level / 2.0)) * self.stderr;
        (self.mean - half, self.mean + half)
    }

    pub fn contains(&self, value: T, level: f64) -> bool {
        let (lo, hi) = self.ci(level);
        lo <= value && value <= hi
    }
}

fn mean_of<T: Real>(xs: &[T]) -> T {
    if xs.is_empty() {
        return T::nan();
    }
    xs.iter().copied().sum::<T>() / T::from_usize(xs.len()).unwrap()
}

/// Probability that a tremble beats the next payoff shock: ε/(λ+ε).
pub fn tremble_learn_prob<T: Real>(lambda: T, epsilon: T) -> T {
    if epsilon == T::zero() {
        return T::zero();
    }
    epsilon / (lambda + epsilon)
}

/// Welfare ceiling without weak links: ½ + ε/(2(λ+ε)).
pub fn bound_no_weak<T: Real>(lambda: T, epsilon: T) -> T {
    T::lit(0.5) * (T::one() + tremble_learn_prob(lambda, epsilon))
}

/// The three terms of the island bound and their combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IslandBound<T> {
    pub term_i: T,
    pub term_ii: T,
    pub term_iii: T,
    /// `min(1, I + II·III)`.
    pub value: T,
}

/// Island-network welfare ceiling from the diverse → conformal probability
/// `p`, with island sizes in descending order.
pub fn bound_island_terms<T: Real>(p: T, lambda: T, epsilon: T, gamma: T, sizes: &[usize]) -> Result<IslandBound<T>> {
    if sizes.is_empty() || sizes.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::Validation(format!("island sizes must be non-empty and descending, got {sizes:?}")));
    }
    if !(p >= T::zero() && p <= T::one()) {
        return Err(Error::Validation(format!("p must lie in [0, 1], got {p}")));
    }
    if !(lambda > T::zero() && epsilon > T::zero() && gamma >= T::zero()) {
        return Err(Error::Validation("island bound needs λ > 0, ε > 0, γ ≥ 0".into()));
    }
    let r = lambda / epsilon;
    let two = T::lit(2.0);
    let denom = T::one() + two * p + two * r * p;
    let term_i = (two * p + r * p) / denom;
    let term_ii = T::one() / denom;
    let reach = (gamma / lambda).ceil().to_usize().unwrap_or(usize::MAX).min(sizes.len());
    let top: usize = sizes[..reach].iter().sum();
    let total: usize = sizes.iter().sum();
    let term_iii = T::lit(0.5) + T::from_usize(top).unwrap() / T::from_usize(total).unwrap();
    let value = (term_i + term_ii * term_iii).min(T::one());
    Ok(IslandBound { term_i, term_ii, term_iii, value })
}

pub fn bound_island<T: Real>(p: T, lambda: T, epsilon: T, gamma: T, sizes: &[usize]) -> Result<T> {
    Ok(bound_island_terms(p, lambda, epsilon, gamma, sizes)?.value)
}

/// Largest discount factor for which forward-looking agents behave myopically:
/// τ·d_min/(2 + τ·d_max).
pub fn bound_discount<T: Real>(tau: T, d_min: usize, d_max: usize) -> Result<T> {
    if d_min > d_max {
        return Err(Error::Validation(format!("d_min {d_min} exceeds d_max {d_max}")));
    }
    if !(tau >= T::zero()) {
        return Err(Error::Validation(format!("tau must be non-negative, got {tau}")));
    }
    let lo = T::from_usize(d_min).unwrap();
    let hi = T::from_usize(d_max).unwrap();
    Ok(tau * lo / (T::lit(2.0) + tau * hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoNodeComparison<T> {
    pub welfare_strong: T,
    pub welfare_weak: T,
}

/// Two agents joined by a strong link (closed form) against two agents joined
/// by a single weak link (exact chain).
pub fn two_node_comparison<T: Real>(params: &SimParams<T>) -> Result<TwoNodeComparison<T>> {
    params.validate()?;
    let weak = gen_island(&[1, 1], &[(0, 1)])?;
    let model = AmcModel::solve(&weak, params, &AmcOptions::default())?;
    Ok(TwoNodeComparison { welfare_strong: bound_no_weak(params.lambda, params.epsilon), welfare_weak: model.welfare })
}

/// How each network in a comparison is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Budget {
    Exact,
    MonteCarlo { epochs: u64, burn_in: u64, replicas: u64 },
}

impl Budget {
    pub fn method(&self) -> Method {
        match self {
            Budget::Exact => Method::ExactAmc,
            Budget::MonteCarlo { .. } => Method::MonteCarlo,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bounds {
    pub no_weak: Option<f64>,
    pub island: Option<f64>,
    /// p used by the island bound; `None` when no diverse state has mass.
    pub p_conditional: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonEntry {
    pub name: String,
    pub spec_hash: String,
    pub regime: Regime,
    pub boundary: bool,
    pub params: SimParams<f64>,
    pub estimate: Option<WelfareEstimate<f64>>,
    pub bounds: Bounds,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundViolation {
    pub name: String,
    pub bound: &'static str,
    pub value: f64,
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub method: Method,
    pub entries: Vec<ComparisonEntry>,
    /// Entry indices by decreasing mean welfare; failed entries are left out.
    pub ranking: Vec<usize>,
    pub violations: Vec<BoundViolation>,
}

/// One CSV row of a report; column order is the field order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub rank: Option<usize>,
    pub name: String,
    pub spec_hash: String,
    pub regime: Regime,
    pub boundary: bool,
    pub method: Method,
    pub welfare: Option<f64>,
    pub stderr: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub bound_no_weak: Option<f64>,
    pub bound_island: Option<f64>,
    pub p_conditional: Option<f64>,
    pub error: Option<String>,
}

impl ComparisonReport {
    pub fn ensure_no_violations(&self) -> Result<()> {
        match self.violations.first() {
            None => Ok(()),
            Some(v) => Err(Error::Consistency(format!(
                "{} welfare {} exceeds {} bound {} ({} violation(s) in total)",
                v.name,
                v.value,
                v.bound,
                v.limit,
                self.violations.len()
            ))),
        }
    }

    pub fn rows(&self) -> Vec<ReportRow> {
        self.entries
            .iter()
            .enumerate()
            .map(|(i, e)| ReportRow {
                rank: self.ranking.iter().position(|&r| r == i).map(|r| r + 1),
                name: e.name.clone(),
                spec_hash: e.spec_hash.clone(),
                regime: e.regime,
                boundary: e.boundary,
                method: self.method,
                welfare: e.estimate.map(|x| x.mean),
                stderr: e.estimate.map(|x| x.stderr),
                ci_low: e.estimate.map(|x| x.ci95.0),
                ci_high: e.estimate.map(|x| x.ci95.1),
                bound_no_weak: e.bounds.no_weak,
                bound_island: e.bounds.island,
                p_conditional: e.bounds.p_conditional,
                error: e.error.clone(),
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

const BOUND_TOL: f64 = 1e-9;

fn params_f64<T: Real>(p: &SimParams<T>) -> SimParams<f64> {
    SimParams {
        lambda: p.lambda.as_f64(),
        gamma: p.gamma.as_f64(),
        phi: p.phi.as_f64(),
        epsilon: p.epsilon.as_f64(),
        tau: p.tau.as_f64(),
        beta: p.beta.map(Real::as_f64),
        seed: p.seed,
    }
}

fn evaluate<T: Real>(name: &str, net: &NetworkSpec, params: &SimParams<T>, budget: Budget) -> ComparisonEntry {
    let mut entry = ComparisonEntry {
        name: name.to_string(),
        spec_hash: net.spec_hash(),
        regime: classify_regime(net, params.tau),
        boundary: on_regime_boundary(net, params.tau),
        params: params_f64(params),
        estimate: None,
        bounds: Bounds { no_weak: None, island: None, p_conditional: None },
        error: None,
    };
    if net.weak_edges().is_empty() {
        entry.bounds.no_weak = Some(bound_no_weak(params.lambda, params.epsilon).as_f64());
    }
    let model = AmcModel::solve(net, params, &AmcOptions::default());
    // a lone island has no diverse states, so the bound has nothing to say
    if let (Ok(m), Some(sizes)) = (&model, net.island_sizes()) {
        if params.epsilon > T::zero() && sizes.len() >= 2 {
            let p = m.p_conditional;
            entry.bounds.p_conditional = p.map(Real::as_f64);
            entry.bounds.island =
                bound_island(p.unwrap_or(T::zero()), params.lambda, params.epsilon, params.gamma, &sizes)
                    .ok()
                    .map(Real::as_f64);
        }
    }
    let estimate = match budget {
        Budget::Exact => model.map(|m| WelfareEstimate::exact(m.welfare, Method::ExactAmc)),
        Budget::MonteCarlo { epochs, burn_in, replicas } => estimate_welfare(net, params, epochs, burn_in, replicas),
    };
    match estimate {
        Ok(e) => {
            entry.estimate = Some(WelfareEstimate {
                mean: e.mean.as_f64(),
                stderr: e.stderr.as_f64(),
                ci95: (e.ci95.0.as_f64(), e.ci95.1.as_f64()),
                epochs_used: e.epochs_used,
                replicas: e.replicas,
                method: e.method,
                dof: e.dof,
            })
        }
        Err(err) => entry.error = Some(err.to_string()),
    }
    entry
}

/// Evaluates each named network under the same parameters. Failures are
/// recorded per entry; bound violations (judged on the lower CI edge for
/// Monte Carlo) are collected in the report.
pub fn compare_networks<T: Real>(specs: &[(String, NetworkSpec)], params: &SimParams<T>, budget: Budget) -> Result<ComparisonReport> {
    params.validate()?;
    if let Budget::MonteCarlo { replicas: 0, .. } = budget {
        return Err(Error::Validation("Monte Carlo comparison needs at least one replica".into()));
    }
    let entries: Vec<ComparisonEntry> =
        specs.par_iter().map(|(name, net)| evaluate(name, net, params, budget)).collect();

    let mut ranking: Vec<usize> = (0..entries.len()).filter(|&i| entries[i].estimate.is_some()).collect();
    ranking.sort_by(|&a, &b| {
        let (x, y) = (entries[a].estimate.unwrap().mean, entries[b].estimate.unwrap().mean);
        y.total_cmp(&x).then(a.cmp(&b))
    });

    let mut violations = Vec::new();
    for e in &entries {
        let Some(est) = e.estimate else { continue };
        let value = est.ci95.0;
        for (bound, limit) in [("no_weak", e.bounds.no_weak), ("island", e.bounds.island)] {
            if let Some(limit) = limit {
                if value > limit + BOUND_TOL {
                    violations.push(BoundViolation { name: e.name.clone(), bound, value, limit });
                }
            }
        }
    }
    Ok(ComparisonReport { method: budget.method(), entries, ranking, violations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{gen_clique, gen_star};

    #[test]
    fn tremble_probability_examples() {
        assert_eq!(tremble_learn_prob(1.0, 0.0), 0.0);
        assert_eq!(tremble_learn_prob(2.0, 2.0), 0.5);
        assert!((tremble_learn_prob(1.0_f64, 0.1) - 1.0 / 11.0).abs() < 1e-15);
    }

    #[test]
    fn no_weak_bound_examples() {
        assert_eq!(bound_no_weak(1.0, 0.0), 0.5);
        assert!((bound_no_weak(1.0_f64, 0.1) - 0.545_454_545_454_545_4).abs() < 1e-15);
        let near = bound_no_weak(1.0, 1e6);
        assert!(near < 1.0 && near > 1.0 - 1e-6);
    }

    #[test]
    fn island_bound_examples() {
        // p = 0 leaves only term (III)
        let b = bound_island_terms(0.0, 1.0, 0.01, 0.5, &[3, 2, 1]).unwrap();
        assert_eq!(b.term_i, 0.0);
        assert_eq!(b.value, 1.0_f64.min(0.5 + 3.0 / 6.0));
        // every island reached: (III) = 3/2, clipped
        let b = bound_island_terms(0.0, 1.0, 0.01, 5.0, &[2, 2, 2]).unwrap();
        assert_eq!(b.term_iii, 1.5);
        assert_eq!(b.value, 1.0);
        // verbatim evaluation
        let b = bound_island_terms(0.1_f64, 1.0, 0.01, 1.0, &[4, 1, 1]).unwrap();
        let denom = 1.0 + 0.2 + 2.0 * 100.0 * 0.1;
        assert!((b.term_i - (0.2 + 100.0 * 0.1) / denom).abs() < 1e-15);
        assert!((b.term_ii - 1.0 / denom).abs() < 1e-15);
        assert!((b.term_iii - (0.5 + 4.0 / 6.0)).abs() < 1e-15);
        assert!((b.value - (b.term_i + b.term_ii * b.term_iii)).abs() < 1e-15);
    }

    #[test]
    fn island_bound_rejects_unsorted() {
        assert!(matches!(bound_island(0.1, 1.0, 0.01, 1.0, &[1, 4, 1]), Err(Error::Validation(_))));
    }

    #[test]
    fn discount_bound_examples() {
        assert_eq!(bound_discount(0.0, 1, 3).unwrap(), 0.0);
        assert!((bound_discount(0.2_f64, 5, 5).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(bound_discount(1e6, 4, 4).unwrap() > 1.0 - 1e-6);
        assert!(matches!(bound_discount(1.0, 3, 2), Err(Error::Validation(_))));
    }

    #[test]
    fn exact_estimate_has_zero_width() {
        let e = WelfareEstimate::exact(0.6, Method::ExactAmc);
        assert_eq!(e.ci(0.99), (0.6, 0.6));
        assert!(e.contains(0.6, 0.95));
    }

    #[test]
    fn estimate_from_replicas_and_batches() {
        let runs = vec![vec![0.4_f64, 0.6], vec![0.5, 0.5], vec![0.6, 0.6]];
        let e = WelfareEstimate::from_replicas(&runs, Method::MonteCarlo);
        assert!((e.mean - 3.2 / 6.0).abs() < 1e-15);
        assert_eq!(e.dof, 2);
        assert!(e.ci95.0 <= e.mean && e.mean <= e.ci95.1);
        assert!(e.ci(0.99).1 > e.ci95.1);

        let single = vec![(0..100).map(|i| (i % 2) as f64).collect::<Vec<_>>()];
        let e = WelfareEstimate::from_replicas(&single, Method::MonteCarlo);
        assert_eq!(e.dof, 9);
        assert_eq!(e.mean, 0.5);
        assert_eq!(e.epochs_used, 100);
    }

    #[test]
    fn two_node_examples() {
        let c = two_node_comparison(&SimParams::new(1.0_f64, 1.0, 1e4, 0.1, 0.0)).unwrap();
        assert!((c.welfare_strong - 6.0 / 11.0).abs() < 1e-12);
        assert!(c.welfare_weak < c.welfare_strong);

        let c = two_node_comparison(&SimParams::new(1.0_f64, 1.0, 1e4, 0.0, 0.0)).unwrap();
        assert_eq!(c.welfare_strong, 0.5);
        assert!((c.welfare_weak - 0.5).abs() < 1e-12);

        // without activations each singleton learns only from its own trembles
        let c = two_node_comparison(&SimParams::new(1.0_f64, 0.0, 1e4, 0.1, 0.0)).unwrap();
        assert!((c.welfare_weak - 0.5 * (1.0 + 0.1 / 2.1)).abs() < 1e-12);
        assert!(c.welfare_weak < c.welfare_strong);
    }

    #[test]
    fn star_ranks_first_against_clique() {
        let specs = vec![("clique4".to_string(), gen_clique(4).unwrap()), ("star4_2".to_string(), gen_star(4, 2).unwrap())];
        let report = compare_networks(&specs, &SimParams::new(1.0, 5.0, 1e4, 1e-4, 0.0), Budget::Exact).unwrap();
        assert_eq!(report.ranking[0], 1);
        assert!(report.violations.is_empty());
        report.ensure_no_violations().unwrap();
        assert_eq!(report.rows().len(), 2);
    }

    #[test]
    fn single_network_report() {
        let specs = vec![("clique3".to_string(), gen_clique(3).unwrap())];
        let report = compare_networks(&specs, &SimParams::new(1.0, 0.0, 0.0, 0.1, 0.1), Budget::Exact).unwrap();
        assert_eq!(report.entries.len(), 1);
        assert!(report.violations.is_empty());
        assert!(report.to_json().contains("\"no_weak\""));
    }

    #[test]
    fn intermediate_entry_records_error_without_aborting() {
        let path = crate::network::build_network(3, &[(0, 1), (1, 2)], &[]).unwrap();
        let specs = vec![("path".to_string(), path), ("clique".to_string(), gen_clique(3).unwrap())];
        let report = compare_networks(&specs, &SimParams::new(1.0, 0.0, 0.0, 0.1, 0.75), Budget::Exact).unwrap();
        assert!(report.entries[0].error.is_some());
        assert_eq!(report.ranking, vec![1]);
    }
}
