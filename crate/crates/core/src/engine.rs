//! Stochastic SIR and threshold-distancing ("2FleeSIR") dynamics, the
//! deferred-decision percolation sampler, and Monte Carlo extent estimation.
//!
//! All dynamics draw their Bernoulli outcomes through a [`DecisionSource`].
//! The same step loop therefore serves on-line random simulation, coupled
//! runs over a pre-drawn [`OutcomeRealization`], and exact enumeration in the
//! oracle module.

use std::fmt::Write as _;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::netcore::{ArcId, ContactNetwork, EpidemicParams, NodeId, NodeState};

/// Finalizer of SplitMix64. Bijective on `u64`.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `r`: `mix64(seed ^ (r * 0x9E3779B97F4A7C15))`.
pub fn sub_seed(seed: u64, replication: u64) -> u64 {
    mix64(seed ^ replication.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Generator used everywhere: ChaCha with 8 rounds, seeded through
/// `SeedableRng::seed_from_u64`. Its stream is fixed across platforms.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Bernoulli(p) that consumes no randomness when p is 0 or 1.
/// Otherwise draws u = (next_u64 >> 11) * 2^-53 and returns u < p.
pub fn bernoulli(rng: &mut impl Rng, p: f64) -> bool {
    if p <= 0.0 {
        false
    } else if p >= 1.0 {
        true
    } else {
        ((rng.next_u64() >> 11) as f64) * (1.0 / (1u64 << 53) as f64) < p
    }
}

/// One Bernoulli event of the process.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Decision {
    Seed(NodeId),
    Removal(NodeId),
    Transmit(ArcId),
}

pub trait DecisionSource {
    /// Outcome of `decision`, which has success probability `p`.
    fn decide(&mut self, decision: Decision, p: f64) -> bool;
}

/// Fresh randomness drawn in the order the dynamics ask for it.
pub struct RandomSource<R>(pub R);

impl<R: Rng> DecisionSource for RandomSource<R> {
    fn decide(&mut self, _decision: Decision, p: f64) -> bool {
        bernoulli(&mut self.0, p)
    }
}

/// Every Bernoulli outcome fixed in advance: which nodes are seeded, which
/// would be removed before transmitting, and which arcs would transmit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutcomeRealization {
    pub seeded: Vec<bool>,
    pub removed: Vec<bool>,
    pub transmits: Vec<bool>,
}

impl OutcomeRealization {
    /// Draws seeds by node, then removals by node, then transmissions by arc.
    pub fn draw(params: &EpidemicParams, rng: &mut impl Rng) -> Self {
        let seeded = params.induction.iter().map(|&p| bernoulli(rng, p)).collect();
        let removed = params.removal.iter().map(|&p| bernoulli(rng, p)).collect();
        let transmits = params.transmission.iter().map(|&p| bernoulli(rng, p)).collect();
        Self { seeded, removed, transmits }
    }

    /// Seeded nodes plus everything reachable from them through transmitting
    /// arcs whose source is not removed.
    pub fn infected_set(&self, net: &ContactNetwork) -> Vec<bool> {
        let mut infected = self.seeded.clone();
        let mut stack: Vec<NodeId> = (0..net.node_count()).filter(|&v| infected[v]).collect();
        while let Some(u) = stack.pop() {
            if self.removed[u] {
                continue;
            }
            for &arc in net.out_arcs(u) {
                let v = net.arc(arc).1;
                if self.transmits[arc] && !infected[v] {
                    infected[v] = true;
                    stack.push(v);
                }
            }
        }
        infected
    }
}

impl DecisionSource for OutcomeRealization {
    fn decide(&mut self, decision: Decision, _p: f64) -> bool {
        match decision {
            Decision::Seed(v) => self.seeded[v],
            Decision::Removal(v) => self.removed[v],
            Decision::Transmit(a) => self.transmits[a],
        }
    }
}

/// Which infected in-neighbors a susceptible node counts toward its threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Trigger {
    /// Currently infected or infected earlier (now removed).
    #[default]
    EverInfected,
    /// Currently infected only.
    CurrentlyInfected,
}

/// Distancing rule: a susceptible node that sees at least `threshold`
/// infected in-neighbors becomes permanently uninfectable.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Distancing {
    pub threshold: usize,
    pub trigger: Trigger,
}

impl Default for Distancing {
    fn default() -> Self {
        Self { threshold: 2, trigger: Trigger::EverInfected }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Model {
    Sir,
    FleeSir(Distancing),
}

impl Model {
    pub fn fleesir() -> Self {
        Model::FleeSir(Distancing::default())
    }

    pub fn name(&self) -> &'static str {
        match self {
            Model::Sir => "sir",
            Model::FleeSir(_) => "fleesir",
        }
    }

    fn distancing(&self) -> Option<&Distancing> {
        match self {
            Model::Sir => None,
            Model::FleeSir(d) => Some(d),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Model::FleeSir(d) if d.threshold == 0 => Err(Error::Invalid("distancing threshold must be >= 1".into())),
            _ => Ok(()),
        }
    }
}

/// How the initial infectees are chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Seeding {
    /// Independently per node with the induction probabilities.
    Params,
    /// Exactly this node.
    Node(NodeId),
    /// One node drawn uniformly at random per replication.
    UniformSingle,
}

/// State partitions at every time step of one realized epidemic.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrajectoryRecord {
    steps: Vec<Vec<NodeState>>,
}

impl TrajectoryRecord {
    /// First time with no infected node.
    pub fn final_time(&self) -> usize {
        self.steps.len() - 1
    }

    /// Number of nodes ever infected.
    pub fn extent(&self) -> usize {
        self.final_states().iter().filter(|&&s| s == NodeState::Removed).count()
    }

    pub fn states_at(&self, t: usize) -> &[NodeState] {
        &self.steps[t]
    }

    pub fn final_states(&self) -> &[NodeState] {
        self.steps.last().expect("trajectory has at least one step")
    }

    pub fn nodes_in(&self, t: usize, state: NodeState) -> Vec<NodeId> {
        self.steps[t].iter().enumerate().filter(|(_, &s)| s == state).map(|(v, _)| v).collect()
    }

    /// Nodes that were ever infected.
    pub fn infected_set(&self) -> Vec<bool> {
        self.final_states().iter().map(|&s| s == NodeState::Removed).collect()
    }

    /// Debug dump, one line per step: `t: S=a,b I=c R= D=`.
    pub fn to_text(&self, net: &ContactNetwork) -> String {
        let mut out = String::new();
        for (t, states) in self.steps.iter().enumerate() {
            write!(out, "{t}:").unwrap();
            for kind in [NodeState::Susceptible, NodeState::Infected, NodeState::Removed, NodeState::Distanced] {
                let members: Vec<&str> = states
                    .iter()
                    .enumerate()
                    .filter(|(_, &s)| s == kind)
                    .map(|(v, _)| net.name(v))
                    .collect();
                write!(out, " {}={}", kind.symbol(), members.join(",")).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Runs the discrete-time dynamics to absorption.
///
/// At t = 0 each node is seeded with its induction probability (or `fixed_seed`
/// alone is). Then, while infected nodes remain: under distancing, every
/// susceptible node whose counted infected in-neighbors reach the threshold
/// becomes distanced; each infected node, in index order, is removed with its
/// removal probability, otherwise attempts each susceptible out-neighbor not
/// already hit this step; all infected nodes become removed and the hit nodes
/// become infected.
///
/// A removal outcome is only requested when the node has a target left, and a
/// transmission only toward a node not yet hit, so every decision requested
/// can change the trajectory.
pub(crate) fn run_dynamics(
    net: &ContactNetwork,
    params: &EpidemicParams,
    distancing: Option<&Distancing>,
    fixed_seed: Option<NodeId>,
    source: &mut impl DecisionSource,
    mut history: Option<&mut Vec<Vec<NodeState>>>,
) -> (Vec<NodeState>, usize) {
    let n = net.node_count();
    let mut state = vec![NodeState::Susceptible; n];
    let mut current: Vec<NodeId> = match fixed_seed {
        Some(v) => vec![v],
        None => (0..n).filter(|&v| source.decide(Decision::Seed(v), params.induction[v])).collect(),
    };
    for &v in &current {
        state[v] = NodeState::Infected;
    }
    let mut hit = vec![false; n];
    let mut next: Vec<NodeId> = Vec::new();
    let mut t = 0;
    loop {
        if let Some(rule) = distancing {
            if !current.is_empty() {
                apply_distancing(net, rule, &mut state);
            }
        }
        if let Some(h) = history.as_deref_mut() {
            h.push(state.clone());
        }
        if current.is_empty() {
            return (state, t);
        }
        for &u in &current {
            let has_target = net
                .out_arcs(u)
                .iter()
                .any(|&a| params.transmission[a] > 0.0 && {
                    let v = net.arc(a).1;
                    state[v] == NodeState::Susceptible && !hit[v]
                });
            if !has_target || source.decide(Decision::Removal(u), params.removal[u]) {
                continue;
            }
            for &arc in net.out_arcs(u) {
                let v = net.arc(arc).1;
                if state[v] == NodeState::Susceptible
                    && !hit[v]
                    && source.decide(Decision::Transmit(arc), params.transmission[arc])
                {
                    hit[v] = true;
                    next.push(v);
                }
            }
        }
        for &u in &current {
            state[u] = NodeState::Removed;
        }
        next.sort_unstable();
        for &v in &next {
            state[v] = NodeState::Infected;
            hit[v] = false;
        }
        std::mem::swap(&mut current, &mut next);
        next.clear();
        t += 1;
    }
}

fn apply_distancing(net: &ContactNetwork, rule: &Distancing, state: &mut [NodeState]) {
    let counts = |w: NodeId, state: &[NodeState]| match rule.trigger {
        Trigger::EverInfected => matches!(state[w], NodeState::Infected | NodeState::Removed),
        Trigger::CurrentlyInfected => state[w] == NodeState::Infected,
    };
    let fleeing: Vec<NodeId> = (0..net.node_count())
        .filter(|&u| state[u] == NodeState::Susceptible)
        .filter(|&u| net.in_neighbors(u).filter(|&w| counts(w, state)).count() >= rule.threshold)
        .collect();
    for u in fleeing {
        state[u] = NodeState::Distanced;
    }
}

fn record(
    net: &ContactNetwork,
    params: &EpidemicParams,
    model: &Model,
    fixed_seed: Option<NodeId>,
    source: &mut impl DecisionSource,
) -> TrajectoryRecord {
    let mut steps = Vec::new();
    run_dynamics(net, params, model.distancing(), fixed_seed, source, Some(&mut steps));
    TrajectoryRecord { steps }
}

/// SIR epidemic with fresh randomness from `seed`.
pub fn simulate_sir(net: &ContactNetwork, params: &EpidemicParams, seed: u64) -> TrajectoryRecord {
    record(net, params, &Model::Sir, None, &mut RandomSource(rng_from_seed(seed)))
}

/// SIR plus distancing with fresh randomness from `seed`.
pub fn simulate_fleesir(
    net: &ContactNetwork,
    params: &EpidemicParams,
    distancing: Distancing,
    seed: u64,
) -> Result<TrajectoryRecord> {
    let model = Model::FleeSir(distancing);
    model.validate()?;
    Ok(record(net, params, &model, None, &mut RandomSource(rng_from_seed(seed))))
}

/// Either model driven by an arbitrary decision source, e.g. a shared
/// [`OutcomeRealization`] for coupled runs.
pub fn simulate_with(
    net: &ContactNetwork,
    params: &EpidemicParams,
    model: &Model,
    source: &mut impl DecisionSource,
) -> TrajectoryRecord {
    record(net, params, model, None, source)
}

/// Final infected set of one epidemic in deferred-decision form.
pub fn sample_sir_percolation(net: &ContactNetwork, params: &EpidemicParams, seed: u64) -> Vec<bool> {
    OutcomeRealization::draw(params, &mut rng_from_seed(seed)).infected_set(net)
}

/// Mean final extent, exact or with a normal-approximation 95% interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtentEstimate {
    pub mean: f64,
    pub half_width_95: f64,
    pub replications: u64,
    pub exact: bool,
}

impl ExtentEstimate {
    pub fn exact(mean: f64) -> Self {
        Self { mean, half_width_95: 0.0, replications: 0, exact: true }
    }

    /// From the sum and sum of squares of integer extents.
    pub fn from_sums(sum: u64, sum_sq: u128, replications: u64) -> Self {
        let r = replications as f64;
        let mean = sum as f64 / r;
        let half_width_95 = if replications > 1 {
            // Integer accumulation keeps the variance independent of summation order.
            let centered = (sum_sq as f64) - (sum as f64) * (sum as f64) / r;
            let var = (centered / (r - 1.0)).max(0.0);
            1.96 * (var / r).sqrt()
        } else {
            0.0
        };
        Self { mean, half_width_95, replications, exact: false }
    }

    pub fn lower(&self) -> f64 {
        self.mean - self.half_width_95
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.half_width_95
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower() <= value && value <= self.upper()
    }

    pub fn overlaps(&self, other: &Self) -> bool {
        self.lower() <= other.upper() && other.lower() <= self.upper()
    }
}

/// Final extent of one replication under `seeding`.
pub(crate) fn replicate_extent(
    net: &ContactNetwork,
    params: &EpidemicParams,
    model: &Model,
    seeding: Seeding,
    seed: u64,
) -> usize {
    let mut rng = rng_from_seed(seed);
    let fixed = match seeding {
        Seeding::Params => None,
        Seeding::Node(v) => Some(v),
        Seeding::UniformSingle => Some(rng.gen_range(0..net.node_count())),
    };
    let (state, _) = run_dynamics(net, params, model.distancing(), fixed, &mut RandomSource(rng), None);
    state.iter().filter(|&&s| s == NodeState::Removed).count()
}

/// Monte Carlo mean extent with seeds from [`Seeding::Params`].
pub fn estimate_mean_extent(
    model: &Model,
    net: &ContactNetwork,
    params: &EpidemicParams,
    replications: u64,
    seed: u64,
) -> Result<ExtentEstimate> {
    estimate_mean_extent_seeded(model, net, params, Seeding::Params, replications, seed)
}

/// Monte Carlo mean extent. Replication `r` runs on [`sub_seed`]`(seed, r)`,
/// so the result does not depend on scheduling.
pub fn estimate_mean_extent_seeded(
    model: &Model,
    net: &ContactNetwork,
    params: &EpidemicParams,
    seeding: Seeding,
    replications: u64,
    seed: u64,
) -> Result<ExtentEstimate> {
    if replications == 0 {
        return Err(Error::Invalid("replications must be >= 1".into()));
    }
    model.validate()?;
    params.validate(net)?;
    check_seeding(net, seeding)?;
    let (sum, sum_sq) = (0..replications)
        .into_par_iter()
        .map(|r| {
            let x = replicate_extent(net, params, model, seeding, sub_seed(seed, r)) as u64;
            (x, (x as u128) * (x as u128))
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok(ExtentEstimate::from_sums(sum, sum_sq, replications))
}

pub(crate) fn check_seeding(net: &ContactNetwork, seeding: Seeding) -> Result<()> {
    match seeding {
        Seeding::Node(v) if v >= net.node_count() => Err(Error::Invalid(format!("seed node {v} out of range"))),
        Seeding::UniformSingle if net.node_count() == 0 => Err(Error::Invalid("empty network".into())),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcore::{build_from_edge_list, make_complete, make_diamond};
    use rand::RngCore;

    fn chain() -> (ContactNetwork, EpidemicParams) {
        build_from_edge_list("s u", true).unwrap()
    }

    fn seeded(net: &ContactNetwork, params: EpidemicParams, name: &str) -> EpidemicParams {
        params.with_single_seed(net.require(name).unwrap())
    }

    #[test]
    fn no_seeds_no_epidemic() {
        let net = make_diamond();
        let params = EpidemicParams::uniform(&net, 0.0, 0.1, 0.9);
        for seed in 0..20 {
            let rec = simulate_sir(&net, &params, seed);
            assert_eq!(rec.extent(), 0);
            assert_eq!(rec.final_time(), 0);
        }
    }

    #[test]
    fn deterministic_chain() {
        let (net, params) = chain();
        let params = seeded(&net, params, "s");
        let rec = simulate_sir(&net, &params, 1);
        assert_eq!(rec.extent(), 2);
        assert_eq!(rec.final_time(), 2);
        assert_eq!(rec.nodes_in(1, NodeState::Infected), vec![1]);
        assert_eq!(rec.nodes_in(1, NodeState::Removed), vec![0]);
    }

    #[test]
    fn removal_precedes_transmission() {
        let (net, params) = chain();
        let mut params = seeded(&net, params, "s");
        params.removal[0] = 1.0;
        for seed in 0..20 {
            assert_eq!(simulate_sir(&net, &params, seed).extent(), 1);
        }
    }

    #[test]
    fn percolation_examples() {
        let (net, params) = build_from_edge_list("s v\nv u", true).unwrap();
        let params = seeded(&net, params, "s");
        assert_eq!(sample_sir_percolation(&net, &params, 3), vec![true, true, true]);
        let silent = params.clone().with_uniform_transmission(0.0);
        assert_eq!(sample_sir_percolation(&net, &silent, 3), vec![true, false, false]);
    }

    #[test]
    fn diamond_fleesir_traces() {
        let net = make_diamond();
        let base = seeded(&net, EpidemicParams::new(&net), "a");
        let rec = simulate_fleesir(&net, &base, Distancing::default(), 0).unwrap();
        assert_eq!(rec.extent(), 3);
        assert_eq!(rec.nodes_in(rec.final_time(), NodeState::Distanced), vec![3, 4, 5]);
        let rec = simulate_fleesir(&net, &base.clone().with_uniform_transmission(0.0), Distancing::default(), 0).unwrap();
        assert_eq!(rec.extent(), 1);
        assert_eq!(simulate_sir(&net, &base, 0).extent(), 6);
    }

    #[test]
    fn currently_infected_trigger_differs_on_complete_graph() {
        // One second-generation case in K4 cannot push anyone over a
        // currently-infected threshold of 2, so the epidemic keeps going.
        let net = make_complete(4).unwrap();
        let mut params = EpidemicParams::new(&net).with_single_seed(0).with_uniform_transmission(0.0);
        params.transmission[net.arc_id(0, 1).unwrap()] = 1.0;
        params.transmission[net.arc_id(1, 2).unwrap()] = 1.0;
        let ever = simulate_fleesir(&net, &params, Distancing::default(), 0).unwrap();
        assert_eq!(ever.extent(), 2);
        let current = Distancing { threshold: 2, trigger: Trigger::CurrentlyInfected };
        let rec = simulate_fleesir(&net, &params, current, 0).unwrap();
        assert_eq!(rec.extent(), 3);
    }

    #[test]
    fn zero_threshold_rejected() {
        let net = make_diamond();
        let params = EpidemicParams::new(&net);
        let rule = Distancing { threshold: 0, trigger: Trigger::EverInfected };
        assert!(simulate_fleesir(&net, &params, rule, 0).is_err());
    }

    #[test]
    fn trajectory_text() {
        let (net, params) = chain();
        let rec = simulate_sir(&net, &seeded(&net, params, "s"), 0);
        assert_eq!(rec.to_text(&net), "0: S=u I=s R= D=\n1: S= I=u R=s D=\n2: S= I= R=s,u D=\n");
    }

    #[test]
    fn estimate_zero_without_seeds() {
        let net = make_diamond();
        let params = EpidemicParams::uniform(&net, 0.0, 0.0, 0.5);
        for model in [Model::Sir, Model::fleesir()] {
            let est = estimate_mean_extent(&model, &net, &params, 100, 9).unwrap();
            assert_eq!(est.mean, 0.0);
            assert_eq!(est.half_width_95, 0.0);
        }
        assert!(estimate_mean_extent(&Model::Sir, &net, &params, 0, 9).is_err());
    }

    #[test]
    fn estimate_chain_mean() {
        let (net, params) = chain();
        let params = seeded(&net, params, "s").with_uniform_transmission(0.5);
        let est = estimate_mean_extent(&Model::Sir, &net, &params, 100_000, 17).unwrap();
        assert!(est.contains(1.5), "{est:?}");
        assert!(est.half_width_95 < 0.01);
    }

    #[test]
    fn estimate_is_reproducible() {
        let net = make_diamond();
        let params = EpidemicParams::uniform(&net, 0.2, 0.1, 0.6);
        let a = estimate_mean_extent(&Model::fleesir(), &net, &params, 2000, 5).unwrap();
        let b = estimate_mean_extent(&Model::fleesir(), &net, &params, 2000, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bernoulli_edges() {
        let mut rng = rng_from_seed(0);
        let before = rng.clone();
        assert!(!bernoulli(&mut rng, 0.0));
        assert!(bernoulli(&mut rng, 1.0));
        assert_eq!(rng.next_u64(), before.clone().next_u64());
    }

    #[test]
    fn sub_seeds_are_distinct() {
        let seeds: std::collections::HashSet<u64> = (0..10_000).map(|r| sub_seed(42, r)).collect();
        assert_eq!(seeds.len(), 10_000);
        assert_eq!(mix64(0), 0);
        assert_eq!(mix64(1), 0x5692_161D_100B_05E5);
    }
}
