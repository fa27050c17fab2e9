use cascadelab::engine::{self, Distancing, Model, OutcomeRealization, Seeding, Trigger};
use cascadelab::monotonicity::{self, classify, Concordance, SweepMode, SweepSpec};
use cascadelab::netcore::{self, dominates, ContactNetwork, EpidemicParams, NodeState};
use cascadelab::oracle::{exact_model, exact_sir};
use cascadelab::reductions::{self, ReductionKind};
use proptest::prelude::*;
use rand::Rng;

/// Probabilities drawn mostly from the interior with the endpoints well represented.
fn probability() -> impl Strategy<Value = f64> {
    prop_oneof![1 => Just(0.0), 1 => Just(1.0), 3 => 0.0..=1.0f64]
}

/// A random digraph with `min..=max` nodes and arbitrary parameter maps.
fn instance(min: usize, max: usize) -> impl Strategy<Value = (ContactNetwork, EpidemicParams)> {
    (min..=max)
        .prop_flat_map(|n| {
            (
                Just(n),
                proptest::collection::vec(any::<bool>(), n * (n - 1)),
                proptest::collection::vec(probability(), n),
                proptest::collection::vec(probability(), n),
                proptest::collection::vec(probability(), n * (n - 1)),
            )
        })
        .prop_map(|(n, mask, sigma, gamma, tau)| {
            let mut net = ContactNetwork::new();
            for i in 0..n {
                net.add_node(&i.to_string());
            }
            let mut transmission = Vec::new();
            let pairs = (0..n).flat_map(|u| (0..n).filter(move |&v| v != u).map(move |v| (u, v)));
            for (i, (u, v)) in pairs.enumerate() {
                if mask[i] {
                    net.add_arc(u, v).unwrap();
                    transmission.push(tau[i]);
                }
            }
            let params = EpidemicParams { induction: sigma, removal: gamma, transmission };
            (net, params)
        })
}

fn model() -> impl Strategy<Value = Model> {
    prop_oneof![
        Just(Model::Sir),
        (1usize..=3).prop_map(|threshold| Model::FleeSir(Distancing { threshold, trigger: Trigger::EverInfected })),
        (1usize..=3).prop_map(|threshold| Model::FleeSir(Distancing { threshold, trigger: Trigger::CurrentlyInfected })),
    ]
}

fn with_node_state(states: &[NodeState], state: NodeState) -> Vec<bool> {
    states.iter().map(|&s| s == state).collect()
}

fn subset(a: &[bool], b: &[bool]) -> bool {
    a.iter().zip(b).all(|(&x, &y)| !x || y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn trajectory_invariants((net, params) in instance(1, 8), model in model(), seed in any::<u64>()) {
        let mut source = engine::RandomSource(engine::rng_from_seed(seed));
        let record = engine::simulate_with(&net, &params, &model, &mut source);
        let n = net.node_count();
        let t_end = record.final_time();
        prop_assert!(t_end <= n);
        prop_assert!(record.nodes_in(t_end, NodeState::Infected).is_empty());
        for t in 0..t_end {
            let (now, next) = (record.states_at(t), record.states_at(t + 1));
            prop_assert!(!record.nodes_in(t, NodeState::Infected).is_empty());
            let removed = with_node_state(now, NodeState::Removed);
            prop_assert!(subset(&removed, &with_node_state(next, NodeState::Removed)));
            prop_assert!(subset(&with_node_state(now, NodeState::Distanced), &with_node_state(next, NodeState::Distanced)));
            prop_assert!(subset(&with_node_state(now, NodeState::Infected), &with_node_state(next, NodeState::Removed)));
        }
        if model == Model::Sir {
            prop_assert!(record.steps_contain_no_distanced());
        }
        let mut again = engine::RandomSource(engine::rng_from_seed(seed));
        prop_assert_eq!(&record, &engine::simulate_with(&net, &params, &model, &mut again));
    }

    #[test]
    fn edge_list_round_trip((net, params) in instance(1, 7)) {
        let (back, mut back_params) = netcore::build_from_edge_list(&netcore::write_edge_list(&net, &params), true).unwrap();
        netcore::apply_params_file(&netcore::write_params(&net, &params), &back, &mut back_params).unwrap();
        prop_assert_eq!(back, net);
        prop_assert_eq!(back_params, params);
    }

    #[test]
    fn dominance_is_a_partial_order((_, a) in instance(2, 6), b_seed in any::<u64>()) {
        prop_assert!(dominates(&a, &a).unwrap());
        // b moves every value of a towards more spread, c moves b further.
        let mut rng = engine::rng_from_seed(b_seed);
        let mut shift = |x: f64, up: bool| {
            let d = rng.gen::<f64>() * 0.3;
            if up { (x + d).min(1.0) } else { (x - d).max(0.0) }
        };
        let raise = |p: &EpidemicParams, shift: &mut dyn FnMut(f64, bool) -> f64| EpidemicParams {
            induction: p.induction.iter().map(|&x| shift(x, true)).collect(),
            removal: p.removal.iter().map(|&x| shift(x, false)).collect(),
            transmission: p.transmission.iter().map(|&x| shift(x, true)).collect(),
        };
        let b = raise(&a, &mut shift);
        let c = raise(&b, &mut shift);
        prop_assert!(dominates(&b, &a).unwrap());
        prop_assert!(dominates(&c, &b).unwrap());
        prop_assert!(dominates(&c, &a).unwrap());
        if dominates(&a, &b).unwrap() {
            prop_assert_eq!(&a, &b);
        }
    }

    #[test]
    fn realization_drives_sir_to_its_percolation_set((net, params) in instance(1, 8), seed in any::<u64>(), threshold in 1usize..=3) {
        let realization = OutcomeRealization::draw(&params, &mut engine::rng_from_seed(seed));
        let percolation = realization.infected_set(&net);
        let dynamic = engine::simulate_with(&net, &params, &Model::Sir, &mut realization.clone()).infected_set();
        prop_assert_eq!(&dynamic, &percolation);
        let distancing = Distancing { threshold, trigger: Trigger::EverInfected };
        let flee = engine::simulate_with(&net, &params, &Model::FleeSir(distancing), &mut realization.clone()).infected_set();
        prop_assert!(subset(&flee, &percolation));
    }

    #[test]
    fn reductions_preserve_dominance((net, under) in instance(1, 5), seed in any::<u64>()) {
        let over = {
            let mut rng = engine::rng_from_seed(seed);
                EpidemicParams {
                induction: under.induction.iter().map(|&x| x + (1.0 - x) * rng.gen::<f64>()).collect(),
                removal: under.removal.iter().map(|&x| x * rng.gen::<f64>()).collect(),
                transmission: under.transmission.iter().map(|&x| x + (1.0 - x) * rng.gen::<f64>()).collect(),
            }
        };
        prop_assume!(dominates(&over, &under).unwrap());
        for kind in [ReductionKind::TauToGamma, ReductionKind::SigmaToAlpha] {
            let hi = reductions::reduce(kind, &net, &over).unwrap();
            let lo = reductions::reduce(kind, &net, &under).unwrap();
            prop_assert_eq!(&hi.network, &lo.network);
            prop_assert!(dominates(&hi.params, &lo.params).unwrap());
        }
    }

    #[test]
    fn helper_reduction_at_most_doubles_duration((net, params) in instance(1, 7), seed in any::<u64>()) {
        let reduced = reductions::tau_to_gamma(&net, &params).unwrap();
        prop_assert_eq!(reduced.time_dilation, 2);
        let record = engine::simulate_sir(&reduced.network, &reduced.params, seed);
        prop_assert!(record.final_time() <= 2 * net.node_count());
    }

    #[test]
    fn composed_reductions_give_single_certain_seed((net, params) in instance(1, 6)) {
        let first = reductions::sigma_to_alpha(&net, &params).unwrap();
        let second = reductions::tau_to_gamma(&first.network, &first.params).unwrap();
        let alpha = first.alpha.unwrap();
        let seeds: Vec<usize> = second.params.induction.iter().enumerate().filter(|(_, &s)| s > 0.0).map(|(v, _)| v).collect();
        prop_assert_eq!(seeds, vec![alpha]);
        prop_assert_eq!(second.params.induction[alpha], 1.0);
        prop_assert!(second.params.transmission.iter().all(|&t| t == 1.0));
        prop_assert_eq!(second.params.removal[alpha], 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn adding_an_arc_never_shrinks_sir_extent((net, params) in instance(2, 4), pick in any::<prop::sample::Index>(), tau in probability()) {
        let n = net.node_count();
        let missing: Vec<(usize, usize)> = (0..n)
            .flat_map(|u| (0..n).map(move |v| (u, v)))
            .filter(|&(u, v)| u != v && net.arc_id(u, v).is_none())
            .collect();
        prop_assume!(!missing.is_empty());
        let (u, v) = missing[pick.index(missing.len())];
        let mut bigger = net.clone();
        bigger.add_arc(u, v).unwrap();
        let mut with_arc = params.clone();
        with_arc.transmission.push(tau);
        let before = exact_sir(&net, &params).unwrap();
        let after = exact_sir(&bigger, &with_arc).unwrap();
        prop_assert!(after.mean_extent >= before.mean_extent - 1e-12);
        for (a, b) in after.infect_prob.iter().zip(&before.infect_prob) {
            prop_assert!(*a >= b - 1e-12);
        }
    }
}

trait NoDistanced {
    fn steps_contain_no_distanced(&self) -> bool;
}

impl NoDistanced for engine::TrajectoryRecord {
    fn steps_contain_no_distanced(&self) -> bool {
        (0..=self.final_time()).all(|t| self.nodes_in(t, NodeState::Distanced).is_empty())
    }
}

#[test]
fn monte_carlo_agrees_with_exact_on_random_graphs() {
    let mut misses = Vec::new();
    for seed in 0..20u64 {
        let n = 2 + (seed % 4) as usize;
        let (net, _, params) = monotonicity::random_dominated_pair(n, 0.5, seed).unwrap();
        for model in [Model::Sir, Model::fleesir()] {
            let exact = exact_model(&net, &params, &model, Seeding::Params).unwrap().mean_extent;
            let est = engine::estimate_mean_extent(&model, &net, &params, 100_000, seed).unwrap();
            if !est.contains(exact) {
                misses.push((seed, model.name(), exact, est.mean, est.half_width_95));
            }
        }
    }
    for model in ["sir", "fleesir"] {
        let count = misses.iter().filter(|m| m.1 == model).count();
        assert!(count <= 1, "{model}: intervals missed the exact value: {misses:?}");
    }
}

#[test]
fn uniform_seeded_diamond_declines_slightly() {
    let net = netcore::make_diamond();
    let base = EpidemicParams::new(&net);
    let grid: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    for trigger in [Trigger::EverInfected, Trigger::CurrentlyInfected] {
        let spec = SweepSpec {
            model: Model::FleeSir(Distancing { threshold: 2, trigger }),
            seeding: Seeding::UniformSingle,
            base: &base,
            tau_grid: &grid,
            mode: SweepMode::Exact,
            replications: 1,
            seed: 0,
        };
        let curve = monotonicity::sweep(&net, &spec).unwrap();
        assert_eq!(classify(&curve, 1e-12).unwrap(), Concordance::Discordant);
        let (_, peak) = curve.peak();
        let drop = peak.mean - curve.means().last().unwrap();
        assert!(drop > 0.0 && drop < 0.1, "drop {drop}");
    }
    let spec = SweepSpec {
        model: Model::Sir,
        seeding: Seeding::UniformSingle,
        base: &base,
        tau_grid: &grid,
        mode: SweepMode::Exact,
        replications: 1,
        seed: 0,
    };
    let curve = monotonicity::sweep(&net, &spec).unwrap();
    assert_eq!(classify(&curve, 1e-12).unwrap(), Concordance::Concordant);
    assert!((curve.means().last().unwrap() - 6.0).abs() < 1e-12);
}
