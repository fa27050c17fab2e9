//! Ordered comparisons between dominated parameter maps, transmissibility
//! sweeps and their concordant/discordant classification, treatment
//! experiments, and random instance generators for property checks.

use rand::Rng;
use rayon::prelude::*;

use crate::engine::{self, Distancing, ExtentEstimate, Model, OutcomeRealization, Seeding};
use crate::error::{Error, Result};
use crate::netcore::{self, dominates, ContactNetwork, EpidemicParams, NodeId};
use crate::oracle::{self, ExactResult, DECISION_BUDGET};

/// Tolerance for exact orderings.
pub const EXACT_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Exact,
    MonteCarlo { replications: u64, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// The dominating side is larger.
    Ordered,
    Tied,
    /// The dominating side is smaller: beyond tolerance (exact) or with
    /// disjoint intervals (Monte Carlo).
    Violation,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    pub model: Model,
    pub extent_over: ExtentEstimate,
    pub extent_under: ExtentEstimate,
    pub per_node_over: Option<Vec<f64>>,
    pub per_node_under: Option<Vec<f64>>,
    pub verdict: Verdict,
    /// FNV-1a digest of the serialized network.
    pub network_digest: u64,
    /// FNV-1a digest of both serialized parameter maps.
    pub params_digest: u64,
}

fn fnv1a(chunks: &[&str]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for chunk in chunks {
        for b in chunk.bytes().chain(std::iter::once(0xff)) {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

fn exact_verdict(over: &ExactResult, under: &ExactResult) -> Verdict {
    let node_diffs: Vec<f64> = over.infect_prob.iter().zip(&under.infect_prob).map(|(o, u)| o - u).collect();
    let mean_diff = over.mean_extent - under.mean_extent;
    if mean_diff < -EXACT_TOLERANCE || node_diffs.iter().any(|&d| d < -EXACT_TOLERANCE) {
        Verdict::Violation
    } else if mean_diff > EXACT_TOLERANCE || node_diffs.iter().any(|&d| d > EXACT_TOLERANCE) {
        Verdict::Ordered
    } else {
        Verdict::Tied
    }
}

fn interval_verdict(over: &ExtentEstimate, under: &ExtentEstimate) -> Verdict {
    if over.mean == under.mean && over.half_width_95 == under.half_width_95 {
        Verdict::Tied
    } else if over.lower() > under.upper() {
        Verdict::Ordered
    } else if over.upper() < under.lower() {
        Verdict::Violation
    } else {
        Verdict::Inconclusive
    }
}

/// Compares mean extents (and, in exact mode, per-node infection
/// probabilities) of `over` against `under`.
///
/// Requires `over` to dominate `under` unless `allow_undominated` is set.
/// Both Monte Carlo runs share the seed.
pub fn compare(
    model: &Model,
    net: &ContactNetwork,
    over: &EpidemicParams,
    under: &EpidemicParams,
    mode: Mode,
    allow_undominated: bool,
) -> Result<ComparisonReport> {
    over.validate(net)?;
    under.validate(net)?;
    if !allow_undominated && !dominates(over, under)? {
        return Err(Error::NotDominated("params_over does not dominate params_under".into()));
    }
    let network_digest = fnv1a(&[&netcore::write_edge_list(net, &EpidemicParams::new(net))]);
    let params_digest = fnv1a(&[
        &netcore::write_edge_list(net, over),
        &netcore::write_params(net, over),
        &netcore::write_edge_list(net, under),
        &netcore::write_params(net, under),
    ]);
    let report = match mode {
        Mode::Exact => {
            let hi = oracle::exact_model(net, over, model, Seeding::Params)?;
            let lo = oracle::exact_model(net, under, model, Seeding::Params)?;
            ComparisonReport {
                model: *model,
                extent_over: ExtentEstimate::exact(hi.mean_extent),
                extent_under: ExtentEstimate::exact(lo.mean_extent),
                verdict: exact_verdict(&hi, &lo),
                per_node_over: Some(hi.infect_prob),
                per_node_under: Some(lo.infect_prob),
                network_digest,
                params_digest,
            }
        }
        Mode::MonteCarlo { replications, seed } => {
            let hi = engine::estimate_mean_extent(model, net, over, replications, seed)?;
            let lo = engine::estimate_mean_extent(model, net, under, replications, seed)?;
            ComparisonReport {
                model: *model,
                extent_over: hi,
                extent_under: lo,
                verdict: interval_verdict(&hi, &lo),
                per_node_over: None,
                per_node_under: None,
                network_digest,
                params_digest,
            }
        }
    };
    Ok(report)
}

/// Per-node check of lower versus higher removal probabilities for an SIR
/// epidemic seeded at `source` alone with every arc transmitting.
pub fn lemma1_check(
    net: &ContactNetwork,
    source: NodeId,
    removal_low: &[f64],
    removal_high: &[f64],
    mode: Mode,
) -> Result<ComparisonReport> {
    if source >= net.node_count() {
        return Err(Error::Invalid("source out of range".into()));
    }
    if removal_low.len() != net.node_count() || removal_high.len() != net.node_count() {
        return Err(Error::Shape("removal maps must cover every node".into()));
    }
    if removal_low.iter().zip(removal_high).any(|(lo, hi)| lo > hi) {
        return Err(Error::NotDominated("removal_low exceeds removal_high at some node".into()));
    }
    let base = EpidemicParams::new(net).with_single_seed(source);
    let low = EpidemicParams { removal: removal_low.to_vec(), ..base.clone() };
    let high = EpidemicParams { removal: removal_high.to_vec(), ..base };
    compare(&Model::Sir, net, &low, &high, mode, false)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepMode {
    /// Exact where the oracle budget allows, Monte Carlo otherwise.
    Auto,
    Exact,
    MonteCarlo,
}

/// Mean extent as a function of a uniform transmission probability.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepCurve {
    pub model: Model,
    pub seeding: Seeding,
    /// Removal and (under [`Seeding::Params`]) induction come from here; every
    /// arc's transmission is set to the grid value.
    pub base: EpidemicParams,
    pub points: Vec<(f64, ExtentEstimate)>,
}

impl SweepCurve {
    pub fn means(&self) -> Vec<f64> {
        self.points.iter().map(|(_, e)| e.mean).collect()
    }

    /// Grid point with the largest mean.
    pub fn peak(&self) -> (f64, ExtentEstimate) {
        *self
            .points
            .iter()
            .max_by(|a, b| a.1.mean.total_cmp(&b.1.mean))
            .expect("sweep curves are non-empty")
    }
}

pub struct SweepSpec<'a> {
    pub model: Model,
    pub seeding: Seeding,
    pub base: &'a EpidemicParams,
    pub tau_grid: &'a [f64],
    pub mode: SweepMode,
    pub replications: u64,
    pub seed: u64,
}

/// One estimate per grid value. Every Monte Carlo point uses the same seed.
pub fn sweep(net: &ContactNetwork, spec: &SweepSpec<'_>) -> Result<SweepCurve> {
    let grid = spec.tau_grid;
    if grid.is_empty() {
        return Err(Error::Invalid("empty transmission grid".into()));
    }
    if grid.iter().any(|t| !(0.0..=1.0).contains(t)) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Invalid("grid values must be strictly increasing within [0, 1]".into()));
    }
    spec.base.validate(net)?;
    let points = grid
        .par_iter()
        .map(|&tau| {
            let params = spec.base.clone().with_uniform_transmission(tau);
            let mc = || {
                engine::estimate_mean_extent_seeded(&spec.model, net, &params, spec.seeding, spec.replications, spec.seed)
            };
            let estimate = match spec.mode {
                SweepMode::MonteCarlo => mc()?,
                SweepMode::Exact => {
                    ExtentEstimate::exact(oracle::exact_model(net, &params, &spec.model, spec.seeding)?.mean_extent)
                }
                SweepMode::Auto => match oracle::exact_model(net, &params, &spec.model, spec.seeding) {
                    Ok(exact) => ExtentEstimate::exact(exact.mean_extent),
                    Err(Error::Budget { .. } | Error::TooManyNodes { .. }) => mc()?,
                    Err(e) => return Err(e),
                },
            };
            Ok((tau, estimate))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepCurve { model: spec.model, seeding: spec.seeding, base: spec.base.clone(), points })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Concordance {
    Concordant,
    Discordant,
}

/// Discordant iff some later point lies below an earlier one by more than
/// `tolerance` (both exact) or by more than their summed half-widths.
pub fn classify(curve: &SweepCurve, tolerance: f64) -> Result<Concordance> {
    if curve.points.len() < 2 {
        return Err(Error::Invalid("classification needs at least two points".into()));
    }
    for (i, (_, early)) in curve.points.iter().enumerate() {
        for (_, late) in &curve.points[i + 1..] {
            let margin = if early.exact && late.exact {
                tolerance
            } else {
                early.half_width_95 + late.half_width_95
            };
            if late.mean < early.mean - margin {
                return Ok(Concordance::Discordant);
            }
        }
    }
    Ok(Concordance::Concordant)
}

/// Parameters after treating `treated`: those nodes are never seeded, never
/// infected, and never transmit, so they also never count toward a
/// distancing threshold.
pub fn apply_treatment(net: &ContactNetwork, params: &EpidemicParams, treated: &[NodeId]) -> EpidemicParams {
    let mut out = params.clone();
    for &v in treated {
        out.induction[v] = 0.0;
        out.removal[v] = 1.0;
        for &arc in net.in_arcs(v) {
            out.transmission[arc] = 0.0;
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TreatmentOutcome {
    pub before: ExtentEstimate,
    pub after: ExtentEstimate,
}

pub fn treatment_experiment(
    net: &ContactNetwork,
    treated: &[NodeId],
    model: &Model,
    params: &EpidemicParams,
    mode: Mode,
) -> Result<TreatmentOutcome> {
    if let Some(&bad) = treated.iter().find(|&&v| v >= net.node_count()) {
        return Err(Error::Invalid(format!("treated node {bad} out of range")));
    }
    let treated_params = apply_treatment(net, params, treated);
    let run = |p: &EpidemicParams| -> Result<ExtentEstimate> {
        match mode {
            Mode::Exact => Ok(ExtentEstimate::exact(oracle::exact_model(net, p, model, Seeding::Params)?.mean_extent)),
            Mode::MonteCarlo { replications, seed } => engine::estimate_mean_extent(model, net, p, replications, seed),
        }
    };
    Ok(TreatmentOutcome { before: run(params)?, after: run(&treated_params)? })
}

/// Random digraph on nodes `0..n` (each ordered pair an arc with probability
/// `density`) with parameter maps where `over` dominates `under`.
///
/// Values of `under` are uniform on [0, 1], or exactly 0 or 1 with
/// probability 0.15 each. `over` moves each value in the favourable direction
/// by a uniform [0, 0.5) delta (zero with probability 0.2), clamped. While
/// either map has more free decisions than the exact oracle accepts, a random
/// free decision is pinned to the same value 0 or 1 in both maps.
pub fn random_dominated_pair(
    n: usize,
    density: f64,
    seed: u64,
) -> Result<(ContactNetwork, EpidemicParams, EpidemicParams)> {
    if n == 0 || !(0.0..=1.0).contains(&density) {
        return Err(Error::Invalid("need n >= 1 and density in [0, 1]".into()));
    }
    let mut rng = engine::rng_from_seed(seed);
    let mut net = ContactNetwork::new();
    for i in 0..n {
        net.add_node(&i.to_string());
    }
    for u in 0..n {
        for v in 0..n {
            if u != v && rng.gen::<f64>() < density {
                net.add_arc(u, v)?;
            }
        }
    }
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> f64 {
        match rng.gen::<f64>() {
            x if x < 0.15 => 0.0,
            x if x < 0.30 => 1.0,
            _ => rng.gen(),
        }
    };
    let mut under = EpidemicParams::new(&net);
    for x in under.induction.iter_mut().chain(under.removal.iter_mut()).chain(under.transmission.iter_mut()) {
        *x = draw(&mut rng);
    }
    let delta = |rng: &mut rand_chacha::ChaCha8Rng| -> f64 {
        if rng.gen::<f64>() < 0.2 {
            0.0
        } else {
            rng.gen::<f64>() * 0.5
        }
    };
    let mut over = under.clone();
    for x in over.induction.iter_mut().chain(over.transmission.iter_mut()) {
        *x = (*x + delta(&mut rng)).min(1.0);
    }
    for x in over.removal.iter_mut() {
        *x = (*x - delta(&mut rng)).max(0.0);
    }

    let fits = |p: &EpidemicParams| oracle::free_decision_count(p) <= DECISION_BUDGET;
    while !fits(&over) || !fits(&under) {
        let slots = n + n + net.arc_count();
        let k = rng.gen_range(0..slots);
        let pinned = if rng.gen::<bool>() { 1.0 } else { 0.0 };
        let (o, u) = match k {
            k if k < n => (&mut over.induction[k], &mut under.induction[k]),
            k if k < 2 * n => (&mut over.removal[k - n], &mut under.removal[k - n]),
            k => (&mut over.transmission[k - 2 * n], &mut under.transmission[k - 2 * n]),
        };
        *o = pinned;
        *u = pinned;
    }
    Ok((net, over, under))
}

/// One realization shared by SIR and the distancing model: returns the SIR
/// infected set (by reachability) and the distancing infected set.
pub fn coupled_run(
    net: &ContactNetwork,
    params: &EpidemicParams,
    distancing: Distancing,
    seed: u64,
) -> (Vec<bool>, Vec<bool>) {
    let realization = OutcomeRealization::draw(params, &mut engine::rng_from_seed(seed));
    let sir = realization.infected_set(net);
    let flee = engine::simulate_with(net, params, &Model::FleeSir(distancing), &mut realization.clone()).infected_set();
    (sir, flee)
}

/// Two cliques joined by one arc, with two parameter maps: `a` has the higher
/// arc-averaged transmission but the smaller mean extent.
pub fn bridge_counterexample() -> (ContactNetwork, EpidemicParams, EpidemicParams) {
    let text = "\
s x1\ns x2\nx1 x2
y1 y2\ny1 y3\ny2 y3
";
    let (mut net, _) = netcore::build_from_edge_list(text, false).expect("bundled bridge instance");
    let (x1, y1) = (net.require("x1").unwrap(), net.require("y1").unwrap());
    let (bridge, _) = net.add_arc(x1, y1).expect("bridge arc");
    let seed = net.require("s").unwrap();
    let mut a = EpidemicParams::new(&net).with_single_seed(seed).with_uniform_transmission(0.9);
    a.transmission[bridge] = 0.05;
    let mut b = EpidemicParams::new(&net).with_single_seed(seed).with_uniform_transmission(0.5);
    b.transmission[bridge] = 1.0;
    (net, a, b)
}

/// Arithmetic mean of arc transmission probabilities.
pub fn mean_transmission(params: &EpidemicParams) -> f64 {
    params.transmission.iter().sum::<f64>() / params.transmission.len() as f64
}
