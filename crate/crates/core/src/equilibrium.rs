//! Myopic Bayes-Nash decision layer: best responses under full revelation,
//! best-response cascades along strong links, and belief bookkeeping.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{AgentId, NetworkSpec};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Action {
    Zero,
    One,
}

impl Action {
    pub fn from_bit(bit: bool) -> Self {
        if bit {
            Action::One
        } else {
            Action::Zero
        }
    }

    pub fn bit(self) -> bool {
        self == Action::One
    }

    pub fn flip(self) -> Self {
        match self {
            Action::Zero => Action::One,
            Action::One => Action::Zero,
        }
    }
}

impl From<Action> for u8 {
    fn from(a: Action) -> u8 {
        a.bit() as u8
    }
}

impl TryFrom<u8> for Action {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            0 => Ok(Action::Zero),
            1 => Ok(Action::One),
            other => Err(format!("action must be 0 or 1, got {other}")),
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", u8::from(*self))
    }
}

/// Why an agent received information.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfoKind {
    WeakLinkActivated,
    NeighborDisagrees,
    Tremble,
}

/// One information arrival processed by a cascade, with the decision it led to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfoEvent {
    pub agent: AgentId,
    pub kind: InfoKind,
    pub revealed_best: Action,
    pub action_before: Action,
    pub action_after: Action,
}

/// Myopic choice of an agent who has just learned that `revealed_best` carries
/// the higher material payoff (gap normalized to 1).
///
/// `same_count` neighbours play `current`, `other_count` play `revealed_best`.
/// Ties go to `revealed_best`.
pub fn best_response<T: Real>(
    current: Action,
    revealed_best: Action,
    same_count: usize,
    other_count: usize,
    tau: T,
) -> Action {
    if current == revealed_best {
        return current;
    }
    let delta = T::from_usize(other_count).unwrap() - T::from_usize(same_count).unwrap();
    if T::one() + tau * delta >= T::zero() {
        revealed_best
    } else {
        current
    }
}

fn count_playing(net: &NetworkSpec, actions: &[Action], i: AgentId, a: Action) -> usize {
    net.neighbors(i).iter().filter(|&&j| actions[j] == a).count()
}

/// Fixed point of a cascade plus the ordered information log that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cascade {
    pub profile: Vec<Action>,
    pub log: Vec<InfoEvent>,
}

/// Best-response cascade started by `seeds` learning `revealed_best`.
pub fn cascade<T: Real>(
    net: &NetworkSpec,
    actions: &[Action],
    seeds: &[AgentId],
    revealed_best: Action,
    tau: T,
) -> Cascade {
    let mut profile = actions.to_vec();
    let mut log = Vec::new();
    cascade_in_place(net, &mut profile, seeds, InfoKind::Tremble, revealed_best, tau, &mut log);
    Cascade { profile, log }
}

/// In-place cascade. Seeds are processed in ascending id order with
/// `seed_kind` recorded as their arrival kind; the queue is FIFO.
///
/// A strong neighbour that disagrees with a processed agent is enqueued on its
/// first arrival in this cascade and again whenever one of its neighbours
/// switches. Every switch moves toward `revealed_best`, so each agent switches
/// at most once and the loop terminates.
pub fn cascade_in_place<T: Real>(
    net: &NetworkSpec,
    actions: &mut [Action],
    seeds: &[AgentId],
    seed_kind: InfoKind,
    revealed_best: Action,
    tau: T,
    log: &mut Vec<InfoEvent>,
) {
    let n = net.n();
    let mut informed = vec![false; n];
    let mut queued = vec![false; n];
    let mut switched = vec![false; n];
    let mut queue: VecDeque<(AgentId, InfoKind)> = VecDeque::new();

    let mut sorted = seeds.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    for s in sorted {
        informed[s] = true;
        queued[s] = true;
        queue.push_back((s, seed_kind));
    }

    while let Some((i, kind)) = queue.pop_front() {
        queued[i] = false;
        let before = actions[i];
        let same = count_playing(net, actions, i, before);
        let other = count_playing(net, actions, i, revealed_best);
        let after = if before == revealed_best {
            before
        } else {
            best_response(before, revealed_best, same, other, tau)
        };
        log.push(InfoEvent { agent: i, kind, revealed_best, action_before: before, action_after: after });
        let did_switch = after != before;
        if did_switch {
            assert!(!switched[i], "agent {i} switched twice in one cascade");
            switched[i] = true;
            actions[i] = after;
        }
        for &j in net.neighbors(i) {
            if actions[j] == actions[i] || queued[j] {
                continue;
            }
            if !informed[j] || did_switch {
                informed[j] = true;
                queued[j] = true;
                queue.push_back((j, InfoKind::NeighborDisagrees));
            }
        }
    }
}

/// Per-agent belief that Action 1 is currently the better action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeliefState<T> {
    pub mu: T,
    pub last_info_time: T,
    pub mu_at_last_info: T,
}

impl<T: Real> BeliefState<T> {
    /// Uninformed prior at time zero.
    pub fn prior() -> Self {
        let half = T::lit(0.5);
        Self { mu: half, last_info_time: T::zero(), mu_at_last_info: half }
    }

    /// Fully revealing arrival at time `t`.
    pub fn observe(&mut self, t: T, revealed_best: Action) {
        let mu = if revealed_best.bit() { T::one() } else { T::zero() };
        self.mu = mu;
        self.mu_at_last_info = mu;
        self.last_info_time = t;
    }
}

/// Belief at time `t` after the last arrival, for shocks of rate `lambda`
/// redrawing the better action uniformly:
/// `(1 − e^{−λΔ})·½ + e^{−λΔ}·μ(T_i)` with `Δ = t − T_i`.
pub fn update_belief<T: Real>(b: &BeliefState<T>, t: T, lambda: T) -> Result<T> {
    if t < b.last_info_time {
        return Err(Error::Validation(format!(
            "belief queried at t={t} before last arrival {}",
            b.last_info_time
        )));
    }
    if lambda < T::zero() {
        return Err(Error::Validation(format!("negative shock rate {lambda}")));
    }
    let decay = (-(lambda * (t - b.last_info_time))).exp();
    Ok((T::one() - decay) * T::lit(0.5) + decay * b.mu_at_last_info)
}

/// Whether `actions` is a Bayes-Nash profile given what each agent knows.
///
/// Agents with `Some(best)` compare material plus network payoff; agents with
/// `None` hold belief ½ and compare network payoff only. A profile passes if
/// nobody strictly gains by deviating.
pub fn verify_equilibrium<T: Real>(
    net: &NetworkSpec,
    actions: &[Action],
    knowledge: &[Option<Action>],
    tau: T,
) -> bool {
    (0..net.n()).all(|i| {
        let cur = actions[i];
        let dev = cur.flip();
        let same = T::from_usize(count_playing(net, actions, i, cur)).unwrap();
        let diff = T::from_usize(count_playing(net, actions, i, dev)).unwrap();
        let material = match knowledge[i] {
            Some(best) if best == dev => T::one(),
            Some(_) => -T::one(),
            None => T::zero(),
        };
        material + tau * (diff - same) <= T::zero()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_network, gen_clique, gen_island};
    use Action::{One, Zero};

    #[test]
    fn best_response_examples() {
        assert_eq!(best_response(Zero, One, 0, 4, 0.2), One);
        // all four neighbours on the current action, τ > 1/d
        assert_eq!(best_response(Zero, One, 4, 0, 0.3), Zero);
        // 1 + 0.4·(0 − 2) = 0.2 > 0
        assert_eq!(best_response(Zero, One, 2, 0, 0.4), One);
        assert_eq!(best_response(One, One, 5, 0, 10.0), One);
    }

    #[test]
    fn best_response_tie_adopts_revealed() {
        // 1 + 0.25·(0 − 4) = 0
        assert_eq!(best_response(Zero, One, 4, 0, 0.25), One);
    }

    #[test]
    fn best_response_matches_direct_payoff_comparison() {
        for same in 0..6 {
            for other in 0..6 {
                for &tau in &[0.0, 0.1, 0.25, 0.4, 1.0, 3.0] {
                    let stay = 0.0 + tau * same as f64;
                    let go = 1.0 + tau * other as f64;
                    let expect = if go >= stay { One } else { Zero };
                    assert_eq!(best_response(Zero, One, same, other, tau), expect);
                }
            }
        }
    }

    #[test]
    fn clique_cascade_hand_trace() {
        let net = gen_clique(3).unwrap();
        let out = cascade(&net, &[Zero; 3], &[1], One, 0.2);
        assert_eq!(out.profile, vec![One; 3]);
        let order: Vec<_> = out.log.iter().map(|e| (e.agent, e.kind)).collect();
        assert_eq!(
            order,
            vec![
                (1, InfoKind::Tremble),
                (0, InfoKind::NeighborDisagrees),
                (2, InfoKind::NeighborDisagrees),
            ]
        );
    }

    #[test]
    fn empty_seed_set_is_identity() {
        let net = gen_clique(4).unwrap();
        let start = vec![Zero, One, Zero, One];
        let out = cascade(&net, &start, &[], One, 0.2);
        assert_eq!(out.profile, start);
        assert!(out.log.is_empty());
    }

    #[test]
    fn frozen_clique_does_not_move() {
        let net = gen_clique(3).unwrap();
        let out = cascade(&net, &[Zero; 3], &[1], One, 0.6);
        assert_eq!(out.profile, vec![Zero; 3]);
        assert_eq!(out.log.len(), 1);
    }

    #[test]
    fn cascade_is_idempotent_on_its_fixed_point() {
        let net = build_network(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (1, 5)], &[]).unwrap();
        let out = cascade(&net, &[Zero; 6], &[0], One, 0.6);
        let again = cascade(&net, &out.profile, &[0], One, 0.6);
        assert_eq!(again.profile, out.profile);
    }

    #[test]
    fn split_fixed_point_terminates() {
        // triangle {0,1,2} bridged to a 5-clique {3..7}; 3 keeps its side at τ = 2/5
        let mut strong = vec![(0, 1), (0, 2), (1, 2), (0, 3)];
        for a in 3..8 {
            for b in a + 1..8 {
                strong.push((a, b));
            }
        }
        let net = build_network(8, &strong, &[]).unwrap();
        let start = [One, One, One, Zero, Zero, Zero, Zero, Zero];
        let out = cascade(&net, &start, &[0], One, 0.4);
        assert_eq!(out.profile, start.to_vec());
        assert_eq!(out.log.len(), 2);
        assert_eq!(out.log[1].agent, 3);
    }

    #[test]
    fn belief_examples() {
        let mut b = BeliefState::<f64>::prior();
        b.observe(1.0, One);
        assert_eq!(update_belief(&b, 1.0, 3.0).unwrap(), 1.0);
        assert_eq!(update_belief(&b, 7.5, 0.0).unwrap(), 1.0);
        let v = update_belief(&b, 1.0 + std::f64::consts::LN_2, 1.0).unwrap();
        assert!((v - 0.75).abs() < 1e-15);
        assert!(update_belief(&b, 0.5, 1.0).is_err());
    }

    #[test]
    fn belief_works_in_single_precision() {
        let mut b = BeliefState::<f32>::prior();
        b.observe(0.0, Zero);
        let v = update_belief(&b, 2.0, 1.0).unwrap();
        assert!(v < 0.5 && v > 0.0);
    }

    #[test]
    fn equilibrium_checks() {
        let net = gen_clique(4).unwrap();
        let know = vec![Some(One); 4];
        assert!(verify_equilibrium(&net, &[One; 4], &know, 0.2));
        assert!(!verify_equilibrium(&net, &[One, One, One, Zero], &know, 0.2));
        // uninformed agents in a uniform profile have no reason to move
        assert!(verify_equilibrium(&net, &[Zero; 4], &[None; 4], 0.2));
    }

    #[test]
    fn island_weak_links_do_not_carry_cascades() {
        let net = gen_island(&[2, 2], &[(0, 1)]).unwrap();
        let out = cascade(&net, &[Zero; 4], &[0], One, 0.0);
        assert_eq!(out.profile, vec![One, One, Zero, Zero]);
    }
}
