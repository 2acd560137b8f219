use proptest::prelude::*;

use weaklink::amc::{AmcModel, AmcOptions};
use weaklink::engine::{run_epochs, Auditor, Simulation};
use weaklink::equilibrium::{cascade, update_belief, BeliefState};
use weaklink::network::{classify_regime, gen_island, hub_topology, spanning_trees, NetworkSpec, Regime};
use weaklink::welfare::{bound_discount, bound_island, bound_no_weak};
use weaklink::{Action, SimParams};

fn island_net() -> impl Strategy<Value = NetworkSpec> {
    (prop::collection::vec(1usize..4, 1..4), any::<prop::sample::Index>()).prop_map(|(mut sizes, pick)| {
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        let trees = spanning_trees(sizes.len());
        gen_island(&sizes, &trees[pick.index(trees.len())]).unwrap()
    })
}

fn rates() -> impl Strategy<Value = SimParams<f64>> {
    (0.2f64..3.0, 0.0f64..5.0, 0.0f64..50.0, 0.001f64..1.0)
        .prop_map(|(lambda, gamma, phi, eps)| SimParams::new(lambda, gamma, phi, eps, 0.0))
}

fn graph() -> impl Strategy<Value = NetworkSpec> {
    (2usize..9).prop_flat_map(|n| {
        prop::collection::vec(0u8..3, n * (n - 1) / 2).prop_map(move |kinds| {
            let mut strong = Vec::new();
            let mut weak = Vec::new();
            let mut k = 0;
            for a in 0..n {
                for b in a + 1..n {
                    match kinds[k] {
                        0 => strong.push((a, b)),
                        1 => weak.push((a, b)),
                        _ => {}
                    }
                    k += 1;
                }
            }
            NetworkSpec::new(n, &strong, &weak).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn chain_is_a_proper_markov_chain(net in island_net(), p in rates()) {
        let model = AmcModel::solve(&net, &p, &AmcOptions::default()).unwrap();
        let k = &model.kernel;
        for i in 0..k.rows() {
            prop_assert!(k[(i, i)] > 0.0);
            for next in [Action::Zero, Action::One] {
                let half: f64 = (0..k.cols()).filter(|&j| model.states[j].better == next).map(|j| k[(i, j)]).sum();
                prop_assert!((half - 0.5).abs() < 1e-12);
            }
        }
        let total: f64 = model.eta.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(model.residual() <= 1e-10);
        prop_assert!((0.0..=1.0).contains(&model.welfare));
        let dk_total: f64 = model.dk.iter().sum();
        prop_assert!((dk_total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn island_welfare_respects_island_bound(sizes in prop::collection::vec(1usize..4, 2..4), gamma in 0.3f64..4.0) {
        let mut sizes = sizes;
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        let net = gen_island(&sizes, &hub_topology(sizes.len(), 0)).unwrap();
        let p = SimParams::new(1.0, gamma, 1e4, 0.01, 0.0);
        let m = AmcModel::solve(&net, &p, &AmcOptions::default()).unwrap();
        let b = bound_island(m.p_conditional.unwrap_or(0.0), 1.0, 0.01, gamma, &sizes).unwrap();
        prop_assert!(m.welfare <= b + 1e-9, "{} > {}", m.welfare, b);
    }

    #[test]
    fn single_precision_agrees_with_double(net in island_net(), p in rates()) {
        let m64 = AmcModel::solve(&net, &p, &AmcOptions::default()).unwrap();
        let p32 = SimParams::<f32>::new(p.lambda as f32, p.gamma as f32, p.phi as f32, p.epsilon as f32, 0.0);
        let m32 = AmcModel::solve(&net, &p32, &AmcOptions::default()).unwrap();
        prop_assert!((m64.welfare - m32.welfare as f64).abs() < 1e-3);
    }

    #[test]
    fn cascade_reaches_a_stable_fixed_point(net in graph(), tau in 0.0f64..1.5, seed in 0usize..8, start in prop::collection::vec(any::<bool>(), 8)) {
        let seed = seed % net.n();
        let actions: Vec<Action> = (0..net.n()).map(|i| Action::from_bit(start[i])).collect();
        let out = cascade(&net, &actions, &[seed], Action::One, tau);
        let again = cascade(&net, &out.profile, &[seed], Action::One, tau);
        prop_assert_eq!(&again.profile, &out.profile);
        // nobody moves away from the revealed action
        for i in 0..net.n() {
            prop_assert!(actions[i] == Action::One && out.profile[i] == Action::One || actions[i] == out.profile[i] || out.profile[i] == Action::One);
        }
        let switches = out.log.iter().filter(|e| e.action_before != e.action_after).count();
        prop_assert!(switches <= net.n());
    }

    #[test]
    fn coordinated_cascades_keep_components_uniform(net in graph(), seed in 0usize..8) {
        let tau = 1.0 / net.d_max().max(1) as f64;
        prop_assume!(classify_regime(&net, tau) == Regime::Coordinated);
        let seed = seed % net.n();
        let out = cascade(&net, &vec![Action::Zero; net.n()], &[seed], Action::One, tau);
        let parts = net.strong_components();
        for members in &parts.members {
            prop_assert!(members.iter().all(|&v| out.profile[v] == out.profile[members[0]]));
        }
    }

    #[test]
    fn simulated_steps_pass_the_audit(net in graph(), p in rates(), tau in 0.0f64..1.2, seed in any::<u64>()) {
        let p = SimParams { tau, ..p }.with_seed(seed);
        let mut sim = Simulation::new(&net, p, 0).unwrap();
        let mut audit = Auditor::new(&net, tau);
        let mut last = 0.0;
        for _ in 0..500 {
            let before = sim.state().clone();
            let step = sim.step().unwrap();
            prop_assert!(step.event.time > last);
            last = step.event.time;
            let found = audit.check(&net, &before, &step, sim.state());
            prop_assert!(found.is_empty(), "{:?} at {:?}", found, step.event);
        }
    }

    #[test]
    fn runs_are_reproducible(net in graph(), p in rates(), seed in any::<u64>()) {
        let p = p.with_seed(seed);
        let a = run_epochs(&net, &p, 50, 0).unwrap();
        let b = run_epochs(&net, &p, 50, 0).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn belief_decays_toward_half(mu in 0.0f64..=1.0, lambda in 0.0f64..10.0, t1 in 0.0f64..5.0, dt in 0.0f64..5.0) {
        let mut b = BeliefState::prior();
        b.observe(0.0, Action::Zero);
        b.mu_at_last_info = mu;
        let x = update_belief(&b, t1, lambda).unwrap();
        let y = update_belief(&b, t1 + dt, lambda).unwrap();
        prop_assert!((y - 0.5).abs() <= (x - 0.5).abs() + 1e-15);
        prop_assert!(x >= mu.min(0.5) - 1e-15 && x <= mu.max(0.5) + 1e-15);
    }

    #[test]
    fn closed_form_bounds_are_monotone(lambda in 0.1f64..5.0, eps in 0.0f64..5.0, tau in 0.0f64..5.0, d_min in 1usize..10, extra in 0usize..10) {
        prop_assert!(bound_no_weak(lambda, eps + 0.1) > bound_no_weak(lambda, eps));
        if eps > 0.0 {
            prop_assert!(bound_no_weak(lambda + 0.1, eps) < bound_no_weak(lambda, eps));
        }
        let d_max = d_min + extra;
        let b = bound_discount(tau, d_min, d_max).unwrap();
        prop_assert!(bound_discount(tau + 0.1, d_min, d_max).unwrap() >= b);
        prop_assert!(bound_discount(tau, d_min, d_max + 1).unwrap() <= b);
        prop_assert!((0.0..1.0).contains(&b));
    }

    #[test]
    fn network_files_round_trip(net in graph()) {
        let json = serde_json::to_string(&net).unwrap();
        let back: NetworkSpec = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(back.spec_hash(), net.spec_hash());
    }
}
