//! Continuous-time event simulator.
//!
//! Four Poisson clock families are superposed: payoff shocks (rate λ),
//! trembles (rate ε, agent uniform), the weak-activation clock (rate γ, link
//! uniform over the eligible set) and one recovery clock of rate φ per
//! inactive weak link. Welfare is sampled at payoff shocks.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{cascade_in_place, Action, InfoEvent, InfoKind};
use crate::error::{Error, Result};
use crate::network::{classify_regime, AgentId, ComponentPartition, NetworkSpec, Regime};
use crate::scalar::Real;
use crate::welfare::{Method, WelfareEstimate};

/// Rates and weights of one experiment. `beta` is only consulted by the
/// discount-factor bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct SimParams<T> {
    pub lambda: T,
    #[serde(default = "num_traits::zero")]
    pub gamma: T,
    #[serde(default = "num_traits::zero")]
    pub phi: T,
    #[serde(default = "num_traits::zero")]
    pub epsilon: T,
    #[serde(default = "num_traits::zero")]
    pub tau: T,
    #[serde(default)]
    pub beta: Option<T>,
    #[serde(default)]
    pub seed: u64,
}

impl<T: Real> SimParams<T> {
    pub fn new(lambda: T, gamma: T, phi: T, epsilon: T, tau: T) -> Self {
        Self { lambda, gamma, phi, epsilon, tau, beta: None, seed: 0 }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_beta(mut self, beta: T) -> Self {
        self.beta = Some(beta);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("lambda", self.lambda),
            ("gamma", self.gamma),
            ("phi", self.phi),
            ("epsilon", self.epsilon),
            ("tau", self.tau),
        ];
        for (name, v) in named {
            if !v.is_finite() || v < T::zero() {
                return Err(Error::Validation(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        if self.lambda <= T::zero() {
            return Err(Error::Validation("lambda must be strictly positive".into()));
        }
        if let Some(b) = self.beta {
            if !(b >= T::zero() && b < T::one()) {
                return Err(Error::Validation(format!("beta must lie in [0, 1), got {b}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkState {
    Dormant,
    Inactive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    /// Clock time; kept in binary64 regardless of the scalar type.
    pub t: f64,
    pub actions: Vec<Action>,
    pub better: Action,
    pub link_state: Vec<LinkState>,
    pub epoch_index: u64,
}

impl WorldState {
    /// Dormant weak links whose endpoints currently disagree, ascending.
    pub fn eligible_links(&self, net: &NetworkSpec) -> Vec<usize> {
        net.weak_edges()
            .iter()
            .enumerate()
            .filter(|&(l, &(a, b))| self.link_state[l] == LinkState::Dormant && self.actions[a] != self.actions[b])
            .map(|(l, _)| l)
            .collect()
    }

    pub fn inactive_links(&self) -> Vec<usize> {
        (0..self.link_state.len()).filter(|&l| self.link_state[l] == LinkState::Inactive).collect()
    }

    pub fn dormant_links(&self) -> Vec<usize> {
        (0..self.link_state.len()).filter(|&l| self.link_state[l] == LinkState::Dormant).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    /// The better action is redrawn to `next_better` right after the shock.
    PayoffShock { next_better: Action },
    Tremble { agent: AgentId },
    WeakActivation { link: usize },
    LinkRecovery { link: usize },
    /// γ-tick with an empty eligible set.
    NullActivation,
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::PayoffShock { .. } => "payoff_shock",
            EventKind::Tremble { .. } => "tremble",
            EventKind::WeakActivation { .. } => "weak_activation",
            EventKind::LinkRecovery { .. } => "link_recovery",
            EventKind::NullActivation => "null_activation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
}

/// Observation taken at a payoff shock: the profile in force at the shock
/// instant against the better action of the epoch that just ended.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochSnapshot<T> {
    pub k: u64,
    pub profile: Vec<Action>,
    pub better: Action,
    pub dormant: Vec<usize>,
    pub fraction_correct: T,
}

impl<T: Real> EpochSnapshot<T> {
    pub fn recompute_fraction(&self) -> T {
        let hits = self.profile.iter().filter(|&&a| a == self.better).count();
        T::from_usize(hits).unwrap() / T::from_usize(self.profile.len()).unwrap()
    }
}

/// Result of applying one event.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventOutcome<T> {
    pub snapshot: Option<EpochSnapshot<T>>,
    pub log: Vec<InfoEvent>,
}

pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ replica)
}

pub fn init_state<T: Real, R: Rng + ?Sized>(net: &NetworkSpec, _params: &SimParams<T>, rng: &mut R) -> WorldState {
    WorldState {
        t: 0.0,
        actions: vec![Action::Zero; net.n()],
        better: Action::from_bit(rng.gen_bool(0.5)),
        link_state: vec![LinkState::Dormant; net.weak_edges().len()],
        epoch_index: 0,
    }
}

/// Samples the next event of the superposed clocks.
pub fn next_event<T: Real, R: Rng + ?Sized>(
    state: &WorldState,
    net: &NetworkSpec,
    params: &SimParams<T>,
    rng: &mut R,
) -> Event {
    let lambda = params.lambda.as_f64();
    let eps = params.epsilon.as_f64();
    let gamma = params.gamma.as_f64();
    let inactive = state.inactive_links();
    let recovery = params.phi.as_f64() * inactive.len() as f64;
    let total = lambda + eps + gamma + recovery;

    let gap: f64 = rng.sample::<f64, _>(Exp1) / total;
    let time = state.t + gap;
    let u = rng.gen::<f64>() * total;
    let kind = if u < lambda {
        EventKind::PayoffShock { next_better: Action::from_bit(rng.gen_bool(0.5)) }
    } else if u < lambda + eps {
        EventKind::Tremble { agent: rng.gen_range(0..net.n()) }
    } else if u < lambda + eps + gamma {
        let eligible = state.eligible_links(net);
        if eligible.is_empty() {
            EventKind::NullActivation
        } else {
            EventKind::WeakActivation { link: eligible[rng.gen_range(0..eligible.len())] }
        }
    } else if !inactive.is_empty() {
        EventKind::LinkRecovery { link: inactive[rng.gen_range(0..inactive.len())] }
    } else {
        // u landed on the upper edge through rounding; only λ is guaranteed positive
        EventKind::PayoffShock { next_better: Action::from_bit(rng.gen_bool(0.5)) }
    };
    Event { time, kind }
}

/// Applies `event` to `state`. Deterministic: all randomness lives in the event.
pub fn apply_event<T: Real>(
    state: &mut WorldState,
    event: &Event,
    net: &NetworkSpec,
    params: &SimParams<T>,
) -> Result<EventOutcome<T>> {
    if !(event.time > state.t) {
        return Err(Error::Consistency(format!(
            "event at t={} does not follow current time {}",
            event.time, state.t
        )));
    }
    state.t = event.time;
    let mut out = EventOutcome { snapshot: None, log: Vec::new() };
    match event.kind {
        EventKind::PayoffShock { next_better } => {
            let hits = state.actions.iter().filter(|&&a| a == state.better).count();
            out.snapshot = Some(EpochSnapshot {
                k: state.epoch_index,
                profile: state.actions.clone(),
                better: state.better,
                dormant: state.dormant_links(),
                fraction_correct: T::from_usize(hits).unwrap() / T::from_usize(net.n()).unwrap(),
            });
            state.better = next_better;
            state.epoch_index += 1;
        }
        EventKind::Tremble { agent } => {
            if agent >= net.n() {
                return Err(Error::Consistency(format!("tremble on unknown agent {agent}")));
            }
            cascade_in_place(
                net,
                &mut state.actions,
                &[agent],
                InfoKind::Tremble,
                state.better,
                params.tau,
                &mut out.log,
            );
        }
        EventKind::WeakActivation { link } => {
            let &(a, b) = net
                .weak_edges()
                .get(link)
                .ok_or_else(|| Error::Consistency(format!("unknown weak link {link}")))?;
            if state.link_state[link] != LinkState::Dormant || state.actions[a] == state.actions[b] {
                return Err(Error::Consistency(format!("weak link {link} ({a}, {b}) is not eligible")));
            }
            cascade_in_place(
                net,
                &mut state.actions,
                &[a, b],
                InfoKind::WeakLinkActivated,
                state.better,
                params.tau,
                &mut out.log,
            );
            state.link_state[link] = LinkState::Inactive;
        }
        EventKind::LinkRecovery { link } => {
            match state.link_state.get(link) {
                Some(LinkState::Inactive) => state.link_state[link] = LinkState::Dormant,
                _ => return Err(Error::Consistency(format!("recovery on link {link} which is not inactive"))),
            }
        }
        EventKind::NullActivation => {}
    }
    Ok(out)
}

/// A single simulation run owning its state and random stream.
#[derive(Debug, Clone)]
pub struct Simulation<'a, T> {
    net: &'a NetworkSpec,
    params: SimParams<T>,
    state: WorldState,
    rng: ChaCha8Rng,
}

/// One processed event together with its effects.
#[derive(Debug, Clone, PartialEq)]
pub struct Step<T> {
    pub event: Event,
    pub outcome: EventOutcome<T>,
}

impl<'a, T: Real> Simulation<'a, T> {
    pub fn new(net: &'a NetworkSpec, params: SimParams<T>, replica: u64) -> Result<Self> {
        params.validate()?;
        let mut rng = replica_rng(params.seed, replica);
        let state = init_state(net, &params, &mut rng);
        Ok(Self { net, params, state, rng })
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn network(&self) -> &NetworkSpec {
        self.net
    }

    pub fn step(&mut self) -> Result<Step<T>> {
        let event = next_event(&self.state, self.net, &self.params, &mut self.rng);
        let outcome = apply_event(&mut self.state, &event, self.net, &self.params)?;
        Ok(Step { event, outcome })
    }

    /// Runs until `epochs` shocks have occurred, handing every snapshot with
    /// index ≥ `burn_in` to `visit`.
    pub fn run_with<F>(&mut self, epochs: u64, burn_in: u64, mut visit: F) -> Result<()>
    where
        F: FnMut(&Step<T>, Option<&EpochSnapshot<T>>),
    {
        check_budget(epochs, burn_in)?;
        while self.state.epoch_index < epochs {
            let step = self.step()?;
            let kept = step.outcome.snapshot.as_ref().filter(|s| s.k >= burn_in);
            visit(&step, kept);
        }
        Ok(())
    }
}

fn check_budget(epochs: u64, burn_in: u64) -> Result<()> {
    if epochs == 0 {
        return Err(Error::Validation("epochs must be positive".into()));
    }
    if burn_in >= epochs {
        return Err(Error::Validation(format!("burn_in {burn_in} must be below epochs {epochs}")));
    }
    Ok(())
}

/// Snapshots with index ≥ `burn_in` from a run of `epochs` shocks, using
/// replica 0 of `params.seed`.
pub fn run_epochs<T: Real>(
    net: &NetworkSpec,
    params: &SimParams<T>,
    epochs: u64,
    burn_in: u64,
) -> Result<Vec<EpochSnapshot<T>>> {
    let mut sim = Simulation::new(net, *params, 0)?;
    let mut snaps = Vec::with_capacity((epochs - burn_in.min(epochs)) as usize);
    sim.run_with(epochs, burn_in, |_, s| {
        if let Some(s) = s {
            snaps.push(s.clone());
        }
    })?;
    Ok(snaps)
}

/// Mean welfare of one replica over its retained snapshots.
pub fn replica_welfare<T: Real>(
    net: &NetworkSpec,
    params: &SimParams<T>,
    epochs: u64,
    burn_in: u64,
    replica: u64,
) -> Result<Vec<T>> {
    let mut sim = Simulation::new(net, *params, replica)?;
    let mut values = Vec::with_capacity((epochs - burn_in.min(epochs)) as usize);
    sim.run_with(epochs, burn_in, |_, s| {
        if let Some(s) = s {
            values.push(s.fraction_correct);
        }
    })?;
    Ok(values)
}

/// Monte Carlo welfare over `replicas` independent runs seeded
/// `params.seed ^ replica`. Replicas run in parallel; the result does not
/// depend on scheduling.
pub fn estimate_welfare<T: Real>(
    net: &NetworkSpec,
    params: &SimParams<T>,
    epochs: u64,
    burn_in: u64,
    replicas: u64,
) -> Result<WelfareEstimate<T>> {
    if replicas == 0 {
        return Err(Error::Validation("replicas must be at least 1".into()));
    }
    check_budget(epochs, burn_in)?;
    let runs: Vec<Vec<T>> = (0..replicas)
        .into_par_iter()
        .map(|r| replica_welfare(net, params, epochs, burn_in, r))
        .collect::<Result<_>>()?;
    Ok(WelfareEstimate::from_replicas(&runs, Method::MonteCarlo))
}

/// Structural invariant violated by a simulated step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// An agent changed action without an information arrival.
    SwitchWithoutInformation { agent: AgentId },
    /// A strong component is not action-uniform in the Coordinated regime.
    NonUniformComponent { component: usize },
    /// The profile changed in the Frozen regime.
    FrozenProfileMoved,
    /// A link changed lifecycle state other than through its legal event.
    IllegalLifecycle { link: usize },
    /// The activated link was not dormant with disagreeing endpoints.
    IneligibleActivation { link: usize },
}

/// Checks one step against the behavioural invariants. `before` is the state
/// right before the step.
#[derive(Debug, Clone)]
pub struct Auditor {
    regime: Regime,
    parts: ComponentPartition,
    /// Dormant→Inactive and Inactive→Dormant transition counts.
    pub activations: u64,
    pub recoveries: u64,
}

impl Auditor {
    pub fn new<T: Real>(net: &NetworkSpec, tau: T) -> Self {
        Self { regime: classify_regime(net, tau), parts: net.strong_components(), activations: 0, recoveries: 0 }
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn check<T: Real>(
        &mut self,
        net: &NetworkSpec,
        before: &WorldState,
        step: &Step<T>,
        after: &WorldState,
    ) -> Vec<Violation> {
        let mut found = Vec::new();
        for i in 0..net.n() {
            if before.actions[i] != after.actions[i]
                && !step.outcome.log.iter().any(|e| e.agent == i && e.action_after != e.action_before)
            {
                found.push(Violation::SwitchWithoutInformation { agent: i });
            }
        }
        match self.regime {
            Regime::Coordinated => {
                for (c, members) in self.parts.members.iter().enumerate() {
                    let a = after.actions[members[0]];
                    if members.iter().any(|&v| after.actions[v] != a) {
                        found.push(Violation::NonUniformComponent { component: c });
                    }
                }
            }
            Regime::Frozen => {
                if before.actions != after.actions {
                    found.push(Violation::FrozenProfileMoved);
                }
            }
            Regime::Intermediate => {}
        }
        let legal = match step.event.kind {
            EventKind::WeakActivation { link } => {
                let (a, b) = net.weak_edges()[link];
                if before.link_state[link] != LinkState::Dormant || before.actions[a] == before.actions[b] {
                    found.push(Violation::IneligibleActivation { link });
                }
                self.activations += 1;
                Some((link, LinkState::Dormant, LinkState::Inactive))
            }
            EventKind::LinkRecovery { link } => {
                self.recoveries += 1;
                Some((link, LinkState::Inactive, LinkState::Dormant))
            }
            _ => None,
        };
        for l in 0..before.link_state.len() {
            let (was, now) = (before.link_state[l], after.link_state[l]);
            let ok = match legal {
                Some((link, from, to)) if link == l => was == from && now == to,
                _ => was == now,
            };
            if !ok {
                found.push(Violation::IllegalLifecycle { link: l });
            }
        }
        let inactive = after.link_state.iter().filter(|&&s| s == LinkState::Inactive).count() as u64;
        if self.activations < self.recoveries || self.activations - self.recoveries != inactive {
            found.push(Violation::IllegalLifecycle { link: usize::MAX });
        }
        found
    }
}

/// Encodes a profile as `[action, run length]` pairs.
pub fn run_length(actions: &[Action]) -> Vec<[u64; 2]> {
    let mut runs: Vec<[u64; 2]> = Vec::new();
    for &a in actions {
        let bit = a.bit() as u64;
        match runs.last_mut() {
            Some(last) if last[0] == bit => last[1] += 1,
            _ => runs.push([bit, 1]),
        }
    }
    runs
}

/// One line of the event trace export.
#[derive(Debug, Clone, Serialize)]
pub struct TraceRecord {
    pub t: f64,
    pub kind: &'static str,
    pub payload: EventKind,
    pub actions_after: Vec<[u64; 2]>,
    pub better: Action,
}

impl TraceRecord {
    pub fn new<T: Real>(step: &Step<T>, after: &WorldState) -> Self {
        Self {
            t: step.event.time,
            kind: step.event.kind.name(),
            payload: step.event.kind,
            actions_after: run_length(&after.actions),
            better: after.better,
        }
    }
}

/// One line of the cascade log export.
#[derive(Debug, Clone, Serialize)]
pub struct InfoRecord {
    pub time: f64,
    #[serde(flatten)]
    pub event: InfoEvent,
}
