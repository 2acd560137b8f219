//! Exact analysis through the activation Markov chain: the chain of
//! (profile, better action, dormant links) observed at payoff shocks.
//!
//! Within an epoch the pair (profile, dormant set) evolves as a continuous
//! time chain with generator `Q_R` for the epoch's better action `R`. The next
//! shock arrives after an independent Exp(λ) time, so the one-epoch transition
//! matrix is the resolvent `λ(λI − Q_R)⁻¹`. The better action of the next
//! epoch is uniform, which gives the factor ½ in the embedded kernel.
//!
//! Profiles are encoded per strong component (bit `c` set when component `c`
//! plays Action 1). This is exact in the Coordinated regime, where components
//! always act uniformly, and in the Frozen regime, where the profile never
//! leaves all-zeros.

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

use crate::equilibrium::Action;
use crate::engine::SimParams;
use crate::error::{Error, Result};
use crate::linalg::{solve, Lu, Matrix};
use crate::network::{classify_regime, ComponentPartition, NetworkSpec, Regime};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AmcOptions {
    /// Maximum number of enumerated chain states.
    pub state_cap: usize,
    /// Maximum number of intra-epoch states for the dense resolvent.
    pub dense_cap: usize,
    /// Above this many recurrent states the stationary solve uses power iteration.
    pub direct_limit: usize,
}

impl Default for AmcOptions {
    fn default() -> Self {
        Self { state_cap: 1 << 20, dense_cap: 4096, direct_limit: 2048 }
    }
}

/// One state of the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct AmcState {
    /// Bit `c` set iff strong component `c` plays Action 1.
    pub profile: u64,
    pub better: Action,
    /// Bit `l` set iff weak link `l` is dormant.
    pub dormant: u64,
}

/// Indexing of the enumerated state space.
#[derive(Debug, Clone)]
pub struct AmcSpace {
    regime: Regime,
    parts: ComponentPartition,
    n: usize,
    /// Weak links as (component, component) pairs, same order as the network.
    links: Vec<(usize, usize)>,
}

impl AmcSpace {
    pub fn new<T: Real>(net: &NetworkSpec, tau: T, options: &AmcOptions) -> Result<Self> {
        let regime = classify_regime(net, tau);
        if regime == Regime::Intermediate {
            return Err(Error::UnsupportedRegime(
                "exact analysis needs the Coordinated or Frozen regime; Intermediate cascades are order dependent"
                    .into(),
            ));
        }
        let parts = net.strong_components();
        let links = net
            .weak_edges()
            .iter()
            .map(|&(a, b)| (parts.component_of[a], parts.component_of[b]))
            .collect::<Vec<_>>();
        let space = Self { regime, parts, n: net.n(), links };
        let comps = space.parts.count();
        let w = space.links.len();
        let profile_bits = if regime == Regime::Coordinated { comps } else { 0 };
        let bits = profile_bits + 1 + w;
        if bits >= 63 || (1usize << bits) > options.state_cap {
            return Err(Error::Capacity(format!(
                "{comps} components and {w} weak links need 2^{bits} states, cap is {}",
                options.state_cap
            )));
        }
        if space.intra_count() > options.dense_cap {
            return Err(Error::Capacity(format!(
                "{} intra-epoch states exceed the dense resolvent cap {}",
                space.intra_count(),
                options.dense_cap
            )));
        }
        Ok(space)
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn partition(&self) -> &ComponentPartition {
        &self.parts
    }

    pub fn components(&self) -> usize {
        self.parts.count()
    }

    pub fn weak_links(&self) -> usize {
        self.links.len()
    }

    fn profile_count(&self) -> usize {
        match self.regime {
            Regime::Coordinated => 1 << self.components(),
            _ => 1,
        }
    }

    fn link_sets(&self) -> usize {
        1 << self.links.len()
    }

    /// Number of (profile, dormant set) pairs.
    pub fn intra_count(&self) -> usize {
        self.profile_count() * self.link_sets()
    }

    pub fn len(&self) -> usize {
        2 * self.intra_count()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn intra_index(&self, profile: u64, dormant: u64) -> usize {
        let p = if self.regime == Regime::Coordinated { profile as usize } else { 0 };
        p * self.link_sets() + dormant as usize
    }

    fn intra_state(&self, idx: usize) -> (u64, u64) {
        let p = idx / self.link_sets();
        let b = idx % self.link_sets();
        (p as u64, b as u64)
    }

    pub fn index(&self, s: &AmcState) -> usize {
        (s.better.bit() as usize) * self.intra_count() + self.intra_index(s.profile, s.dormant)
    }

    pub fn state(&self, idx: usize) -> AmcState {
        let intra = self.intra_count();
        let (profile, dormant) = self.intra_state(idx % intra);
        AmcState { profile, better: Action::from_bit(idx >= intra), dormant }
    }

    /// All states in canonical order: better action, then profile, then dormant set.
    pub fn states(&self) -> Vec<AmcState> {
        (0..self.len()).map(|i| self.state(i)).collect()
    }

    fn all_ones(&self) -> u64 {
        (1u64 << self.components()) - 1
    }

    fn uniform_profile(&self, a: Action) -> u64 {
        if a.bit() {
            self.all_ones()
        } else {
            0
        }
    }

    fn comp_plays(&self, profile: u64, c: usize) -> Action {
        Action::from_bit(profile >> c & 1 == 1)
    }

    /// Number of agents playing `better` in `profile`.
    pub fn correct_agents(&self, profile: u64, better: Action) -> usize {
        (0..self.components())
            .filter(|&c| self.comp_plays(profile, c) == better)
            .map(|c| self.parts.size(c))
            .sum()
    }

    /// Number of components playing `better`.
    pub fn correct_components(&self, profile: u64, better: Action) -> usize {
        (0..self.components()).filter(|&c| self.comp_plays(profile, c) == better).count()
    }

    /// Fraction of agents playing the better action.
    pub fn fraction_correct<T: Real>(&self, s: &AmcState) -> T {
        T::from_usize(self.correct_agents(s.profile, s.better)).unwrap() / T::from_usize(self.n).unwrap()
    }

    pub fn is_conformal(&self, s: &AmcState) -> bool {
        s.profile == self.uniform_profile(s.better)
    }

    pub fn is_diverse(&self, s: &AmcState) -> bool {
        s.profile != 0 && s.profile != self.all_ones()
    }

    /// Per-agent profile.
    pub fn expand_profile(&self, profile: u64) -> Vec<Action> {
        self.parts.component_of.iter().map(|&c| self.comp_plays(profile, c)).collect()
    }

    /// Dormant links of a state as link indices.
    pub fn dormant_links(&self, dormant: u64) -> Vec<usize> {
        (0..self.weak_links()).filter(|&l| dormant >> l & 1 == 1).collect()
    }

    /// Intra-epoch successors with their rates for better action `better`.
    fn transitions<T: Real>(&self, profile: u64, dormant: u64, params: &SimParams<T>, better: Action) -> Vec<(usize, T)> {
        let mut out = Vec::new();
        if self.regime == Regime::Coordinated {
            let eligible: Vec<usize> = (0..self.weak_links())
                .filter(|&l| {
                    let (a, b) = self.links[l];
                    dormant >> l & 1 == 1 && self.comp_plays(profile, a) != self.comp_plays(profile, b)
                })
                .collect();
            if !eligible.is_empty() && params.gamma > T::zero() {
                let rate = params.gamma / T::from_usize(eligible.len()).unwrap();
                for &l in &eligible {
                    let (a, b) = self.links[l];
                    let wrong = if self.comp_plays(profile, a) != better { a } else { b };
                    let p2 = set_bit(profile, wrong, better.bit());
                    out.push((self.intra_index(p2, dormant & !(1 << l)), rate));
                }
            }
            if params.epsilon > T::zero() {
                let n = T::from_usize(self.n).unwrap();
                for c in 0..self.components() {
                    if self.comp_plays(profile, c) != better {
                        let p2 = set_bit(profile, c, better.bit());
                        let rate = params.epsilon * T::from_usize(self.parts.size(c)).unwrap() / n;
                        out.push((self.intra_index(p2, dormant), rate));
                    }
                }
            }
        }
        if params.phi > T::zero() {
            for l in 0..self.weak_links() {
                if dormant >> l & 1 == 0 {
                    out.push((self.intra_index(profile, dormant | 1 << l), params.phi));
                }
            }
        }
        out
    }
}

fn set_bit(x: u64, bit: usize, on: bool) -> u64 {
    if on {
        x | 1 << bit
    } else {
        x & !(1 << bit)
    }
}

pub fn enumerate_states<T: Real>(net: &NetworkSpec, tau: T, options: &AmcOptions) -> Result<Vec<AmcState>> {
    Ok(AmcSpace::new(net, tau, options)?.states())
}

/// Intra-epoch generator over (profile, dormant set) pairs. The shock clock is
/// not part of it.
pub fn intra_epoch_generator<T: Real>(space: &AmcSpace, params: &SimParams<T>, better: Action) -> Matrix<T> {
    let n = space.intra_count();
    let mut q = Matrix::zeros(n, n);
    for i in 0..n {
        let (p, b) = space.intra_state(i);
        let mut out = T::zero();
        for (j, rate) in space.transitions(p, b, params, better) {
            q[(i, j)] = q[(i, j)] + rate;
            out = out + rate;
        }
        q[(i, i)] = q[(i, i)] - out;
    }
    q
}

/// Distribution of the intra-epoch state at an independent Exp(λ) time:
/// `λ(λI − Q)⁻¹`.
pub fn epoch_kernel<T: Real>(q: &Matrix<T>, lambda: T) -> Result<Matrix<T>> {
    if !(lambda > T::zero()) {
        return Err(Error::Validation(format!("shock rate must be positive, got {lambda}")));
    }
    let n = q.rows();
    let mut a = q.clone();
    a.scale(-T::one());
    for i in 0..n {
        a[(i, i)] = a[(i, i)] + lambda;
    }
    let mut k = Lu::factor(&a)?.inverse();
    k.scale(lambda);
    // entries are probabilities; clear round-off negatives
    for i in 0..n {
        for x in k.row_mut(i) {
            if *x < T::zero() {
                *x = T::zero();
            }
        }
    }
    let err = k.max_abs_row_sum_error(T::one());
    if err > T::tol(1e-12) {
        return Err(Error::Numerical(format!("epoch kernel rows deviate from 1 by {err}")));
    }
    Ok(k)
}

/// Embedded chain with its kernel filled in.
#[derive(Debug, Clone)]
pub struct AmcKernel<T> {
    pub space: AmcSpace,
    pub kernel: Matrix<T>,
}

pub fn amc_kernel<T: Real>(net: &NetworkSpec, params: &SimParams<T>, options: &AmcOptions) -> Result<AmcKernel<T>> {
    params.validate()?;
    let space = AmcSpace::new(net, params.tau, options)?;
    let intra = space.intra_count();
    let half = T::lit(0.5);
    let mut kernel = Matrix::zeros(space.len(), space.len());
    for next in [Action::Zero, Action::One] {
        let e = epoch_kernel(&intra_epoch_generator(&space, params, next), params.lambda)?;
        let col0 = next.bit() as usize * intra;
        for from in 0..space.len() {
            let src = from % intra;
            for to in 0..intra {
                kernel[(from, col0 + to)] = half * e[(src, to)];
            }
        }
    }
    Ok(AmcKernel { space, kernel })
}

fn positive_digraph<T: Real>(kernel: &Matrix<T>) -> DiGraph<(), ()> {
    let n = kernel.rows();
    let mut g = DiGraph::with_capacity(n, 0);
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for i in 0..n {
        for j in 0..n {
            if i != j && kernel[(i, j)] > T::zero() {
                g.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    g
}

/// Stationary distribution of an irreducible, aperiodic row-stochastic kernel.
///
/// Small chains are solved directly from `(Kᵀ − I)η = 0, Ση = 1`; chains above
/// `direct_limit` states use power iteration to a per-entry change of 1e-12.
pub fn stationary<T: Real>(kernel: &Matrix<T>, direct_limit: usize) -> Result<Vec<T>> {
    let n = kernel.rows();
    if n == 0 || kernel.cols() != n {
        return Err(Error::Numerical("stationary distribution of an empty or non-square kernel".into()));
    }
    let row_err = kernel.max_abs_row_sum_error(T::one());
    if row_err > T::tol(1e-12) {
        return Err(Error::Numerical(format!("kernel rows deviate from 1 by {row_err}")));
    }
    if (0..n).any(|i| !(kernel[(i, i)] > T::zero())) {
        return Err(Error::Consistency("kernel has a zero diagonal entry; aperiodicity not certified".into()));
    }
    if tarjan_scc(&positive_digraph(kernel)).len() != 1 {
        return Err(Error::Consistency("kernel is reducible".into()));
    }

    let eta = if n <= direct_limit {
        let mut a = kernel.transpose();
        for i in 0..n {
            a[(i, i)] = a[(i, i)] - T::one();
        }
        a.row_mut(n - 1).iter_mut().for_each(|x| *x = T::one());
        let mut rhs = vec![T::zero(); n];
        rhs[n - 1] = T::one();
        let (mut eta, _) = solve(&a, &rhs)?;
        for x in &mut eta {
            if *x < T::zero() {
                *x = T::zero();
            }
        }
        let total: T = eta.iter().copied().sum();
        eta.iter_mut().for_each(|x| *x = *x / total);
        eta
    } else {
        power_iteration(kernel)?
    };

    let residual = stationarity_residual(kernel, &eta);
    if residual > T::tol(1e-10) {
        return Err(Error::Numerical(format!("stationarity residual {residual} exceeds 1e-10")));
    }
    Ok(eta)
}

fn power_iteration<T: Real>(kernel: &Matrix<T>) -> Result<Vec<T>> {
    let n = kernel.rows();
    let mut eta = vec![T::one() / T::from_usize(n).unwrap(); n];
    let tol = T::tol(1e-12);
    for _ in 0..1_000_000 {
        let next = kernel.left_mul(&eta);
        let change = next.iter().zip(&eta).map(|(a, b)| (*a - *b).abs()).fold(T::zero(), T::max);
        eta = next;
        if change <= tol {
            let total: T = eta.iter().copied().sum();
            return Ok(eta.into_iter().map(|x| x / total).collect());
        }
    }
    Err(Error::Numerical("power iteration did not converge".into()))
}

/// `‖ηK − η‖∞`.
pub fn stationarity_residual<T: Real>(kernel: &Matrix<T>, eta: &[T]) -> T {
    kernel.left_mul(eta).iter().zip(eta).map(|(a, b)| (*a - *b).abs()).fold(T::zero(), T::max)
}

/// Solved chain with the derived welfare quantities.
#[derive(Debug, Clone)]
pub struct AmcModel<T> {
    pub space: AmcSpace,
    pub states: Vec<AmcState>,
    pub kernel: Matrix<T>,
    pub eta: Vec<T>,
    /// Long-run average welfare Σ η_q f(q).
    pub welfare: T,
    /// Σ over diverse states s of P(conformal | s)·η_s.
    pub p_raw: T,
    /// `p_raw / η(diverse)`; `None` when diverse states carry no mass.
    pub p_conditional: Option<T>,
    /// Stationary mass of exactly k components playing the better action.
    pub dk: Vec<T>,
    /// Stationary mass of states where the largest component plays the better action.
    pub eta_core_good: T,
    /// Number of recurrent states the stationary solve ran on.
    pub recurrent_states: usize,
}

/// The unique closed class reachable from the initial condition
/// (all actions 0, all links dormant, either better action).
fn recurrent_class<T: Real>(k: &AmcKernel<T>) -> Result<Vec<usize>> {
    let space = &k.space;
    let n = space.len();
    let g = positive_digraph(&k.kernel);
    let all_dormant = (1u64 << space.weak_links()) - 1;
    let mut reach = vec![false; n];
    let mut stack: Vec<usize> = [Action::Zero, Action::One]
        .iter()
        .map(|&b| space.index(&AmcState { profile: 0, better: b, dormant: all_dormant }))
        .collect();
    while let Some(i) = stack.pop() {
        if std::mem::replace(&mut reach[i], true) {
            continue;
        }
        stack.extend(g.neighbors(petgraph::graph::NodeIndex::new(i)).map(|x| x.index()).filter(|&j| !reach[j]));
    }
    let sccs = tarjan_scc(&g);
    let mut scc_of = vec![0; n];
    for (c, comp) in sccs.iter().enumerate() {
        for v in comp {
            scc_of[v.index()] = c;
        }
    }
    let closed: Vec<usize> = (0..sccs.len())
        .filter(|&c| sccs[c][0].index() < n && reach[sccs[c][0].index()])
        .filter(|&c| {
            sccs[c]
                .iter()
                .all(|v| g.neighbors(*v).all(|w| scc_of[w.index()] == c))
        })
        .collect();
    match closed.as_slice() {
        [c] => {
            let mut members: Vec<usize> = sccs[*c].iter().map(|v| v.index()).collect();
            members.sort_unstable();
            Ok(members)
        }
        _ => Err(Error::Consistency(format!(
            "expected one recurrent class reachable from the initial state, found {}",
            closed.len()
        ))),
    }
}

impl<T: Real> AmcModel<T> {
    pub fn solve(net: &NetworkSpec, params: &SimParams<T>, options: &AmcOptions) -> Result<Self> {
        let k = amc_kernel(net, params, options)?;
        Self::from_kernel(k, options)
    }

    pub fn from_kernel(k: AmcKernel<T>, options: &AmcOptions) -> Result<Self> {
        let class = recurrent_class(&k)?;
        let m = class.len();
        let mut sub = Matrix::zeros(m, m);
        for (a, &i) in class.iter().enumerate() {
            for (b, &j) in class.iter().enumerate() {
                sub[(a, b)] = k.kernel[(i, j)];
            }
            // mass leaking out of a closed class is pure round-off
            let total: T = sub.row(a).iter().copied().sum();
            sub.row_mut(a).iter_mut().for_each(|x| *x = *x / total);
        }
        let sub_eta = stationary(&sub, options.direct_limit)?;
        let mut eta = vec![T::zero(); k.space.len()];
        for (a, &i) in class.iter().enumerate() {
            eta[i] = sub_eta[a];
        }

        let space = k.space;
        let states = space.states();
        let welfare = exact_welfare_of(&space, &states, &eta);
        let (p_raw, p_conditional) = conformal_prob_of(&space, &states, &k.kernel, &eta);
        let mut dk = vec![T::zero(); space.components() + 1];
        let core = space.partition().largest();
        let mut eta_core_good = T::zero();
        for (s, &mass) in states.iter().zip(&eta) {
            let kk = space.correct_components(s.profile, s.better);
            dk[kk] = dk[kk] + mass;
            if space.comp_plays(s.profile, core) == s.better {
                eta_core_good = eta_core_good + mass;
            }
        }
        Ok(Self {
            space,
            states,
            kernel: k.kernel,
            eta,
            welfare,
            p_raw,
            p_conditional,
            dk,
            eta_core_good,
            recurrent_states: m,
        })
    }

    pub fn residual(&self) -> T {
        stationarity_residual(&self.kernel, &self.eta)
    }

    pub fn to_export(&self) -> ModelExport {
        ModelExport {
            regime: self.space.regime(),
            states: self
                .states
                .iter()
                .map(|s| StateExport {
                    profile: self.space.expand_profile(s.profile),
                    better: s.better,
                    dormant: self.space.dormant_links(s.dormant),
                })
                .collect(),
            kernel: self.kernel.to_rows().into_iter().map(|r| r.into_iter().map(Real::as_f64).collect()).collect(),
            eta: self.eta.iter().map(|x| x.as_f64()).collect(),
            welfare: self.welfare.as_f64(),
            p_conformal: self.p_conditional.map(Real::as_f64),
            p_raw: self.p_raw.as_f64(),
            dk: self.dk.iter().map(|x| x.as_f64()).collect(),
            eta_core_good: self.eta_core_good.as_f64(),
        }
    }
}

fn exact_welfare_of<T: Real>(space: &AmcSpace, states: &[AmcState], eta: &[T]) -> T {
    states.iter().zip(eta).map(|(s, &m)| m * space.fraction_correct::<T>(s)).sum()
}

fn conformal_prob_of<T: Real>(space: &AmcSpace, states: &[AmcState], kernel: &Matrix<T>, eta: &[T]) -> (T, Option<T>) {
    let conformal: Vec<usize> = (0..states.len()).filter(|&j| space.is_conformal(&states[j])).collect();
    let mut raw = T::zero();
    let mut diverse_mass = T::zero();
    for (i, s) in states.iter().enumerate() {
        if !space.is_diverse(s) {
            continue;
        }
        let to_c: T = conformal.iter().map(|&j| kernel[(i, j)]).sum();
        raw = raw + to_c * eta[i];
        diverse_mass = diverse_mass + eta[i];
    }
    let cond = if diverse_mass > T::zero() { Some(raw / diverse_mass) } else { None };
    (raw, cond)
}

pub fn exact_welfare<T: Real>(model: &AmcModel<T>) -> T {
    model.welfare
}

/// `(p_raw, p_conditional)`.
pub fn conformal_prob<T: Real>(model: &AmcModel<T>) -> (T, Option<T>) {
    (model.p_raw, model.p_conditional)
}

#[derive(Debug, Clone, Serialize)]
pub struct StateExport {
    pub profile: Vec<Action>,
    pub better: Action,
    pub dormant: Vec<usize>,
}

/// JSON document of a solved model.
#[derive(Debug, Clone, Serialize)]
pub struct ModelExport {
    pub regime: Regime,
    pub states: Vec<StateExport>,
    pub kernel: Vec<Vec<f64>>,
    pub eta: Vec<f64>,
    pub welfare: f64,
    pub p_conformal: Option<f64>,
    pub p_raw: f64,
    pub dk: Vec<f64>,
    pub eta_core_good: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{gen_clique, gen_island};

    fn params(lambda: f64, gamma: f64, phi: f64, eps: f64, tau: f64) -> SimParams<f64> {
        SimParams::new(lambda, gamma, phi, eps, tau)
    }

    #[test]
    fn state_counts() {
        let opts = AmcOptions::default();
        let two_weak = gen_island(&[1, 1], &[(0, 1)]).unwrap();
        assert_eq!(enumerate_states(&two_weak, 0.0, &opts).unwrap().len(), 16);
        let clique = gen_clique(4).unwrap();
        assert_eq!(enumerate_states(&clique, 0.2, &opts).unwrap().len(), 4);
        let frozen = gen_island(&[3, 3], &[(0, 1)]).unwrap();
        let states = enumerate_states(&frozen, 0.9, &opts).unwrap();
        assert_eq!(states.len(), 4);
        assert!(states.iter().all(|s| s.profile == 0));
    }

    #[test]
    fn enumeration_is_canonical_and_unique() {
        let net = gen_island(&[2, 1, 1], &[(0, 1), (0, 2)]).unwrap();
        let space = AmcSpace::new(&net, 0.1, &AmcOptions::default()).unwrap();
        let states = space.states();
        let mut sorted = states.clone();
        sorted.sort_by_key(|s| (s.better, s.profile, s.dormant));
        assert_eq!(states, sorted);
        sorted.dedup();
        assert_eq!(sorted.len(), states.len());
        for (i, s) in states.iter().enumerate() {
            assert_eq!(space.index(s), i);
        }
    }

    #[test]
    fn capacity_and_regime_errors() {
        let net = gen_island(&[1; 12], &crate::network::hub_topology(12, 0)).unwrap();
        let opts = AmcOptions { state_cap: 1 << 20, ..AmcOptions::default() };
        match AmcSpace::new(&net, 0.0, &opts) {
            Err(Error::Capacity(msg)) => assert!(msg.contains("12 components and 11 weak links")),
            other => panic!("expected capacity error, got {other:?}"),
        }
        let path = crate::network::build_network(3, &[(0, 1), (1, 2)], &[]).unwrap();
        assert!(matches!(AmcSpace::new(&path, 0.75, &opts), Err(Error::UnsupportedRegime(_))));
    }

    #[test]
    fn absorbing_row_without_events() {
        let net = gen_island(&[1, 1], &[(0, 1)]).unwrap();
        let space = AmcSpace::new(&net, 0.0, &AmcOptions::default()).unwrap();
        let q = intra_epoch_generator(&space, &params(1.0, 2.0, 3.0, 0.0, 0.0), Action::One);
        let i = space.intra_index(0b11, 0b1);
        assert!(q.row(i).iter().all(|&x| x == 0.0));
        for r in 0..q.rows() {
            assert_eq!(q.row(r).iter().sum::<f64>(), 0.0);
        }
    }

    #[test]
    fn single_eligible_link_rate() {
        let net = gen_island(&[1, 1], &[(0, 1)]).unwrap();
        let space = AmcSpace::new(&net, 0.0, &AmcOptions::default()).unwrap();
        let q = intra_epoch_generator(&space, &params(1.0, 2.0, 3.0, 0.0, 0.0), Action::One);
        // agent 0 plays 0, agent 1 plays 1, link dormant
        let from = space.intra_index(0b10, 0b1);
        let to = space.intra_index(0b11, 0b0);
        assert_eq!(q[(from, to)], 2.0);
    }

    #[test]
    fn resolvent_closed_forms() {
        let zero = Matrix::<f64>::zeros(3, 3);
        assert_eq!(epoch_kernel(&zero, 1.5).unwrap(), Matrix::identity(3));

        let r = 0.7_f64;
        let lambda = 1.3;
        let q = Matrix::from_rows(&[vec![-r, r], vec![0.0, 0.0]]);
        let k = epoch_kernel(&q, lambda).unwrap();
        assert!((k[(0, 1)] - r / (r + lambda)).abs() < 1e-15);

        let k = epoch_kernel(&q, 1e6 * r).unwrap();
        assert!((k[(0, 0)] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn stationary_examples() {
        let k = Matrix::<f64>::from_rows(&[vec![0.3, 0.7], vec![0.7, 0.3]]);
        let eta = stationary(&k, 16).unwrap();
        assert!((eta[0] - 0.5).abs() < 1e-15 && (eta[1] - 0.5).abs() < 1e-15);

        let q = 0.2_f64;
        let k = Matrix::from_rows(&[vec![0.5 * (1.0 + q), 0.5 * (1.0 - q)], vec![0.5 * (1.0 + q), 0.5 * (1.0 - q)]]);
        let eta = stationary(&k, 16).unwrap();
        assert!((eta[0] - 0.5 * (1.0 + q)).abs() < 1e-15);
        // same answer through power iteration
        let eta_pi = stationary(&k, 0).unwrap();
        assert!((eta_pi[0] - 0.5 * (1.0 + q)).abs() < 1e-12);
    }

    #[test]
    fn reducible_kernel_is_structural_error() {
        let k = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(matches!(stationary(&k, 16), Err(Error::Consistency(_))));
    }

    #[test]
    fn clique_welfare_and_kernel_properties() {
        let net = gen_clique(3).unwrap();
        let p = params(1.0, 0.0, 0.0, 0.1, 0.2);
        let model = AmcModel::solve(&net, &p, &AmcOptions::default()).unwrap();
        assert!((model.welfare - 0.5 * (1.0 + 1.0 / 11.0)).abs() < 1e-12);
        assert!(model.residual() <= 1e-10);
        for i in 0..model.kernel.rows() {
            assert!(model.kernel[(i, i)] > 0.0);
            for next in [Action::Zero, Action::One] {
                let half: f64 =
                    (0..model.states.len()).filter(|&j| model.states[j].better == next).map(|j| model.kernel[(i, j)]).sum();
                assert!((half - 0.5).abs() < 1e-12);
            }
        }
        assert_eq!(model.p_conditional, None);
    }

    #[test]
    fn frozen_welfare_is_half() {
        let net = gen_clique(4).unwrap();
        let model = AmcModel::solve(&net, &params(1.0, 0.0, 0.0, 0.1, 0.5), &AmcOptions::default()).unwrap();
        assert!((model.welfare - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fraction_correct_definition() {
        let net = gen_island(&[2, 2], &[(0, 1)]).unwrap();
        let space = AmcSpace::new(&net, 0.1, &AmcOptions::default()).unwrap();
        let all = AmcState { profile: 0b11, better: Action::One, dormant: 1 };
        let half = AmcState { profile: 0b01, better: Action::One, dormant: 1 };
        assert_eq!(space.fraction_correct::<f64>(&all), 1.0);
        assert_eq!(space.fraction_correct::<f64>(&half), 0.5);
    }

    #[test]
    fn transient_link_states_get_no_mass_without_recovery() {
        // φ = 0: once used, links never come back
        let net = gen_island(&[2, 1], &[(0, 1)]).unwrap();
        let model = AmcModel::solve(&net, &params(1.0, 1.0, 0.0, 0.1, 0.1), &AmcOptions::default()).unwrap();
        for (s, &m) in model.states.iter().zip(&model.eta) {
            if s.dormant != 0 {
                assert_eq!(m, 0.0);
            }
        }
        assert!(model.residual() <= 1e-10);
    }

    #[test]
    fn single_precision_model() {
        let net = gen_clique(2).unwrap();
        let p = SimParams::<f32>::new(1.0, 0.0, 0.0, 0.1, 0.2);
        let model = AmcModel::solve(&net, &p, &AmcOptions::default()).unwrap();
        assert!((model.welfare - 0.5 * (1.0 + 1.0 / 11.0)).abs() < 1e-5);
    }
}
