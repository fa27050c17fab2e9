//! Exact extent distributions and infection probabilities on small graphs,
//! by exhaustive enumeration of Bernoulli outcomes, plus the s-u cut
//! analysis behind the per-node monotonicity argument.
//!
//! Two independent enumerators exist for SIR:
//! * [`exact_sir`] walks every deferred-decision realization (seed, removal
//!   and transmission flags) and computes reachability at the leaves.
//! * [`exact_sir_dynamic`] replays the step-by-step engine, branching on each
//!   Bernoulli outcome in the order the dynamics request it.
//!
//! Distancing dynamics are not reachability problems, so [`exact_fleesir`]
//! only has the replay form.

use rayon::prelude::*;

use crate::engine::{self, Decision, DecisionSource, Distancing, Model, Seeding};
use crate::error::{Error, Result};
use crate::netcore::{ContactNetwork, EpidemicParams, NodeId, NodeState};

/// Maximum number of non-deterministic decisions enumerated.
pub const DECISION_BUDGET: usize = 24;

/// Node masks are `u128`.
pub const MAX_NODES: usize = 128;

/// Compensated (Neumaier) running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &Self) {
        self.add(other.sum);
        self.add(other.carry);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Exact outcome statistics of one instance.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactResult {
    pub mean_extent: f64,
    /// Probability of each final extent `0..=n`.
    pub extent_distribution: Vec<f64>,
    /// Probability that each node is ever infected.
    pub infect_prob: Vec<f64>,
}

impl ExactResult {
    /// Mean of the per-node infection probabilities over `nodes`.
    pub fn expected_count(&self, nodes: impl IntoIterator<Item = NodeId>) -> f64 {
        let mut acc = CompensatedSum::default();
        nodes.into_iter().for_each(|v| acc.add(self.infect_prob[v]));
        acc.value()
    }

    /// Mixture `sum_i w_i * r_i` of results on the same network.
    fn mixture(parts: &[(f64, ExactResult)]) -> ExactResult {
        let n = parts[0].1.infect_prob.len();
        let mut dist = vec![CompensatedSum::default(); n + 1];
        let mut nodes = vec![CompensatedSum::default(); n];
        for (w, r) in parts {
            for (acc, p) in dist.iter_mut().zip(&r.extent_distribution) {
                acc.add(w * p);
            }
            for (acc, p) in nodes.iter_mut().zip(&r.infect_prob) {
                acc.add(w * p);
            }
        }
        Accumulator { dist, nodes }.finish()
    }
}

#[derive(Clone)]
struct Accumulator {
    dist: Vec<CompensatedSum>,
    nodes: Vec<CompensatedSum>,
}

impl Accumulator {
    fn new(n: usize) -> Self {
        Self { dist: vec![CompensatedSum::default(); n + 1], nodes: vec![CompensatedSum::default(); n] }
    }

    fn add_mask(&mut self, infected: u128, weight: f64) {
        self.dist[infected.count_ones() as usize].add(weight);
        let mut rest = infected;
        while rest != 0 {
            self.nodes[rest.trailing_zeros() as usize].add(weight);
            rest &= rest - 1;
        }
    }

    fn add_states(&mut self, states: &[NodeState], weight: f64) {
        let mut extent = 0;
        for (v, &s) in states.iter().enumerate() {
            if s == NodeState::Removed {
                extent += 1;
                self.nodes[v].add(weight);
            }
        }
        self.dist[extent].add(weight);
    }

    fn merge(&mut self, other: &Self) {
        self.dist.iter_mut().zip(&other.dist).for_each(|(a, b)| a.merge(b));
        self.nodes.iter_mut().zip(&other.nodes).for_each(|(a, b)| a.merge(b));
    }

    fn finish(self) -> ExactResult {
        let extent_distribution: Vec<f64> = self.dist.iter().map(CompensatedSum::value).collect();
        let mut mean = CompensatedSum::default();
        for (k, p) in extent_distribution.iter().enumerate() {
            mean.add(k as f64 * p);
        }
        ExactResult {
            mean_extent: mean.value(),
            extent_distribution,
            infect_prob: self.nodes.iter().map(CompensatedSum::value).collect(),
        }
    }
}

fn is_free(p: f64) -> bool {
    p > 0.0 && p < 1.0
}

/// Seed, removal and transmission probabilities strictly between 0 and 1.
pub fn free_decision_count(params: &EpidemicParams) -> usize {
    params.induction.iter().chain(&params.removal).chain(&params.transmission).filter(|&&p| is_free(p)).count()
}

fn check_instance(net: &ContactNetwork, params: &EpidemicParams) -> Result<()> {
    params.validate(net)?;
    if net.node_count() > MAX_NODES {
        return Err(Error::TooManyNodes { nodes: net.node_count(), max: MAX_NODES });
    }
    Ok(())
}

/// Realization state for the full enumeration, as bit masks.
#[derive(Clone)]
struct MaskState {
    seeds: u128,
    removed: u128,
    /// Targets of transmitting out-arcs, per source node.
    transmit_to: Vec<u128>,
}

impl MaskState {
    fn apply(&mut self, net: &ContactNetwork, decision: Decision, outcome: bool) {
        let (mask, bit) = match decision {
            Decision::Seed(v) => (&mut self.seeds, 1u128 << v),
            Decision::Removal(v) => (&mut self.removed, 1u128 << v),
            Decision::Transmit(a) => {
                let (u, v) = net.arc(a);
                (&mut self.transmit_to[u], 1u128 << v)
            }
        };
        if outcome {
            *mask |= bit;
        } else {
            *mask &= !bit;
        }
    }

    fn infected(&self) -> u128 {
        let mut infected = self.seeds;
        let mut frontier = infected & !self.removed;
        while frontier != 0 {
            let mut reached = 0u128;
            let mut rest = frontier;
            while rest != 0 {
                reached |= self.transmit_to[rest.trailing_zeros() as usize];
                rest &= rest - 1;
            }
            let fresh = reached & !infected;
            infected |= fresh;
            frontier = fresh & !self.removed;
        }
        infected
    }
}

fn enumerate(
    net: &ContactNetwork,
    free: &[(Decision, f64)],
    state: &mut MaskState,
    weight: f64,
    acc: &mut Accumulator,
) {
    match free.split_first() {
        None => acc.add_mask(state.infected(), weight),
        Some((&(decision, p), rest)) => {
            state.apply(net, decision, true);
            enumerate(net, rest, state, weight * p, acc);
            state.apply(net, decision, false);
            enumerate(net, rest, state, weight * (1.0 - p), acc);
        }
    }
}

/// Exact SIR statistics by enumerating every deferred-decision realization.
/// Deterministic decisions (probability 0 or 1) are fixed, not enumerated.
pub fn exact_sir(net: &ContactNetwork, params: &EpidemicParams) -> Result<ExactResult> {
    check_instance(net, params)?;
    let mut base = MaskState { seeds: 0, removed: 0, transmit_to: vec![0; net.node_count()] };
    let mut free = Vec::new();
    let decisions = (0..net.node_count())
        .map(|v| (Decision::Seed(v), params.induction[v]))
        .chain((0..net.node_count()).map(|v| (Decision::Removal(v), params.removal[v])))
        .chain((0..net.arc_count()).map(|a| (Decision::Transmit(a), params.transmission[a])));
    for (decision, p) in decisions {
        if is_free(p) {
            free.push((decision, p));
        } else {
            base.apply(net, decision, p >= 1.0);
        }
    }
    if free.len() > DECISION_BUDGET {
        return Err(Error::Budget { needed: free.len(), budget: DECISION_BUDGET });
    }

    // Fixed split of the outcome space; partial sums are merged in prefix
    // order, so the result does not depend on thread scheduling.
    let split = free.len().min(6);
    let (head, tail) = free.split_at(split);
    let parts: Vec<Accumulator> = (0..1u32 << split)
        .into_par_iter()
        .map(|prefix| {
            let mut state = base.clone();
            let mut weight = 1.0;
            for (i, &(decision, p)) in head.iter().enumerate() {
                let outcome = prefix & (1 << (split - 1 - i)) == 0;
                state.apply(net, decision, outcome);
                weight *= if outcome { p } else { 1.0 - p };
            }
            let mut acc = Accumulator::new(net.node_count());
            enumerate(net, tail, &mut state, weight, &mut acc);
            acc
        })
        .collect();
    let mut total = Accumulator::new(net.node_count());
    parts.iter().for_each(|p| total.merge(p));
    Ok(total.finish())
}

/// Replays a recorded prefix of outcomes, extending it with `true` for every
/// new free decision.
struct Replay<'a> {
    script: &'a mut Vec<bool>,
    pos: usize,
    weight: f64,
    overflow: bool,
}

impl DecisionSource for Replay<'_> {
    fn decide(&mut self, _decision: Decision, p: f64) -> bool {
        if !is_free(p) {
            return p >= 1.0;
        }
        if self.pos == DECISION_BUDGET {
            self.overflow = true;
        }
        if self.pos == self.script.len() {
            self.script.push(true);
        }
        let outcome = self.script[self.pos];
        self.pos += 1;
        self.weight *= if outcome { p } else { 1.0 - p };
        outcome
    }
}

/// Depth-first walk over the dynamic decision tree.
fn enumerate_dynamics(
    net: &ContactNetwork,
    params: &EpidemicParams,
    distancing: Option<&Distancing>,
    fixed_seed: Option<NodeId>,
) -> Result<ExactResult> {
    check_instance(net, params)?;
    let mut acc = Accumulator::new(net.node_count());
    let mut script: Vec<bool> = Vec::new();
    loop {
        let mut replay = Replay { script: &mut script, pos: 0, weight: 1.0, overflow: false };
        let (states, _) = engine::run_dynamics(net, params, distancing, fixed_seed, &mut replay, None);
        if replay.overflow {
            return Err(Error::Budget { needed: free_decision_count(params), budget: DECISION_BUDGET });
        }
        let (weight, consumed) = (replay.weight, replay.pos);
        debug_assert_eq!(consumed, script.len());
        acc.add_states(&states, weight);
        while script.last() == Some(&false) {
            script.pop();
        }
        match script.last_mut() {
            Some(last) => *last = false,
            None => break,
        }
    }
    Ok(acc.finish())
}

/// Exact SIR statistics via the step-by-step engine.
pub fn exact_sir_dynamic(net: &ContactNetwork, params: &EpidemicParams) -> Result<ExactResult> {
    enumerate_dynamics(net, params, None, None)
}

/// Exact statistics of SIR with distancing. The budget applies to the number
/// of free decisions met along any single run.
pub fn exact_fleesir(net: &ContactNetwork, params: &EpidemicParams, distancing: Distancing) -> Result<ExactResult> {
    if distancing.threshold == 0 {
        return Err(Error::Invalid("distancing threshold must be >= 1".into()));
    }
    enumerate_dynamics(net, params, Some(&distancing), None)
}

/// Exact statistics for either model under any seeding rule.
/// Uniform single seeding is the equal-weight mixture over seed nodes.
pub fn exact_model(net: &ContactNetwork, params: &EpidemicParams, model: &Model, seeding: Seeding) -> Result<ExactResult> {
    engine::check_seeding(net, seeding)?;
    let run = |params: &EpidemicParams| match model {
        Model::Sir => exact_sir(net, params),
        Model::FleeSir(rule) => exact_fleesir(net, params, *rule),
    };
    match seeding {
        Seeding::Params => run(params),
        Seeding::Node(v) => run(&params.clone().with_single_seed(v)),
        Seeding::UniformSingle => {
            let n = net.node_count();
            let parts = (0..n)
                .map(|v| Ok((1.0 / n as f64, run(&params.clone().with_single_seed(v))?)))
                .collect::<Result<Vec<_>>>()?;
            Ok(ExactResult::mixture(&parts))
        }
    }
}

fn check_endpoints(net: &ContactNetwork, s: NodeId, u: NodeId, cut: &[NodeId]) -> Result<()> {
    let n = net.node_count();
    if s >= n || u >= n || cut.iter().any(|&c| c >= n) {
        return Err(Error::Invalid("node index out of range".into()));
    }
    if s == u {
        return Err(Error::Invalid("source and target coincide".into()));
    }
    if cut.contains(&u) {
        return Err(Error::Invalid(format!("target {} cannot belong to a cut", net.name(u))));
    }
    Ok(())
}

fn blocks(net: &ContactNetwork, s: NodeId, u: NodeId, blocked: &[bool]) -> bool {
    !net.reachable_from(s, blocked)[u]
}

/// True iff every directed path `s -> u` meets `cut`. The source may be in
/// the cut (a removed source never transmits); the target may not.
pub fn is_su_cut(net: &ContactNetwork, s: NodeId, u: NodeId, cut: &[NodeId]) -> Result<bool> {
    check_endpoints(net, s, u, cut)?;
    let mut blocked = vec![false; net.node_count()];
    cut.iter().for_each(|&c| blocked[c] = true);
    Ok(blocks(net, s, u, &blocked))
}

/// True iff `cut` contains `z`, is an s-u cut, and stops being one without `z`.
pub fn is_z_vital(net: &ContactNetwork, s: NodeId, u: NodeId, cut: &[NodeId], z: NodeId) -> Result<bool> {
    if !is_su_cut(net, s, u, cut)? || !cut.contains(&z) {
        return Ok(false);
    }
    let without: Vec<NodeId> = cut.iter().copied().filter(|&c| c != z).collect();
    Ok(!is_su_cut(net, s, u, &without)?)
}

/// Split of the event "u is never infected" for an epidemic seeded at `s`
/// with every arc transmitting.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutDecomposition {
    /// Removed nodes form a cut that needs `z`.
    pub p_fz: f64,
    /// Removed nodes form a cut that does not need `z`.
    pub p_fzbar: f64,
    /// Probability of a z-vital cut given that `z` is removed.
    pub c1: f64,
    /// Equals `p_fzbar`; computed without ever removing `z`.
    pub c2: f64,
}

impl CutDecomposition {
    pub fn infect_prob(&self) -> f64 {
        1.0 - self.p_fz - self.p_fzbar
    }
}

/// Enumerates removal outcomes of `nodes` (others fixed by `base`) and sums
/// `weight` over realizations accepted by `classify`.
fn removal_enumeration(
    removal: &[f64],
    nodes: &[NodeId],
    base: &[bool],
    mut classify: impl FnMut(&[bool], f64),
) {
    fn walk(
        removal: &[f64],
        nodes: &[NodeId],
        blocked: &mut Vec<bool>,
        weight: f64,
        classify: &mut impl FnMut(&[bool], f64),
    ) {
        match nodes.split_first() {
            None => classify(blocked, weight),
            Some((&v, rest)) => {
                blocked[v] = true;
                walk(removal, rest, blocked, weight * removal[v], classify);
                blocked[v] = false;
                walk(removal, rest, blocked, weight * (1.0 - removal[v]), classify);
            }
        }
    }
    walk(removal, nodes, &mut base.to_vec(), 1.0, &mut classify);
}

/// Decomposes `P(u never infected)` into z-vital and other cuts, for the
/// epidemic seeded at `s` alone with all transmissions certain.
///
/// `c1` and `c2` are computed on realizations of every node except `z`, so
/// they cannot depend on the removal probability of `z`; `p_fz = c1 * removal[z]`.
pub fn cut_decompose(
    net: &ContactNetwork,
    params: &EpidemicParams,
    s: NodeId,
    u: NodeId,
    z: NodeId,
) -> Result<CutDecomposition> {
    check_instance(net, params)?;
    check_endpoints(net, s, u, &[])?;
    if z >= net.node_count() {
        return Err(Error::Invalid("z out of range".into()));
    }
    if params.transmission.iter().any(|&t| t != 1.0) {
        return Err(Error::Invalid("cut decomposition requires transmission 1 on every arc".into()));
    }
    let removal = &params.removal;
    let n = net.node_count();
    // The target's own removal never prevents its infection.
    let mut base = vec![false; n];
    let mut free = Vec::new();
    for v in (0..n).filter(|&v| v != u) {
        if is_free(removal[v]) {
            free.push(v);
        } else {
            base[v] = removal[v] >= 1.0;
        }
    }
    if free.len() > DECISION_BUDGET {
        return Err(Error::Budget { needed: free.len(), budget: DECISION_BUDGET });
    }

    let mut p_fz = CompensatedSum::default();
    let mut p_fzbar = CompensatedSum::default();
    removal_enumeration(removal, &free, &base, |blocked, w| {
        if !blocks(net, s, u, blocked) {
            return;
        }
        let needs_z = z != u && blocked[z] && {
            let mut without = blocked.to_vec();
            without[z] = false;
            !blocks(net, s, u, &without)
        };
        if needs_z {
            p_fz.add(w);
        } else {
            p_fzbar.add(w);
        }
    });

    let others: Vec<NodeId> = free.iter().copied().filter(|&v| v != z).collect();
    let mut c1 = CompensatedSum::default();
    let mut c2 = CompensatedSum::default();
    if z != u {
        let mut rest = base.clone();
        rest[z] = false;
        removal_enumeration(removal, &others, &rest, |blocked, w| {
            if blocks(net, s, u, blocked) {
                c2.add(w);
            } else {
                let mut with_z = blocked.to_vec();
                with_z[z] = true;
                if blocks(net, s, u, &with_z) {
                    c1.add(w);
                }
            }
        });
    } else {
        removal_enumeration(removal, &free, &base, |blocked, w| {
            if blocks(net, s, u, blocked) {
                c2.add(w);
            }
        });
    }

    let result = CutDecomposition { p_fz: p_fz.value(), p_fzbar: p_fzbar.value(), c1: c1.value(), c2: c2.value() };
    if removal[z] == 0.0 && result.p_fz > 0.0 {
        return Err(Error::Internal(format!("z-vital cut probability {} with z never removed", result.p_fz)));
    }
    Ok(result)
}
