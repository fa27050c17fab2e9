//! Extent-preserving instance transformations.
//!
//! [`tau_to_gamma`] moves every transmission probability onto a helper node
//! inserted mid-arc, leaving all arcs certain. [`sigma_to_alpha`] replaces
//! random induction with one synthetic seed `alpha` whose arcs carry the
//! induction probabilities. Original nodes keep their indices in the reduced
//! network; new nodes are appended.

use rayon::prelude::*;

use crate::engine::{self, ExtentEstimate, RandomSource};
use crate::error::{Error, Result};
use crate::netcore::{ContactNetwork, EpidemicParams, NodeId, NodeState};
use crate::oracle;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReductionKind {
    TauToGamma,
    SigmaToAlpha,
}

impl ReductionKind {
    pub fn name(self) -> &'static str {
        match self {
            ReductionKind::TauToGamma => "tau_to_gamma",
            ReductionKind::SigmaToAlpha => "sigma_to_alpha",
        }
    }
}

impl std::str::FromStr for ReductionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tau_to_gamma" | "tau-to-gamma" => Ok(ReductionKind::TauToGamma),
            "sigma_to_alpha" | "sigma-to-alpha" => Ok(ReductionKind::SigmaToAlpha),
            other => Err(Error::Invalid(format!("unknown reduction {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReductionResult {
    pub network: ContactNetwork,
    pub params: EpidemicParams,
    /// Number of original nodes; they occupy indices `0..original_nodes`.
    pub original_nodes: usize,
    pub helper_nodes: Vec<NodeId>,
    pub alpha: Option<NodeId>,
    /// Reduced mean extent minus original mean extent (helpers excluded).
    pub extent_offset: f64,
    /// Reduced time per original time step.
    pub time_dilation: usize,
}

fn copy_nodes(net: &ContactNetwork) -> ContactNetwork {
    let mut out = ContactNetwork::new();
    for name in net.names() {
        out.add_node(name);
    }
    out
}

fn fresh_name(net: &ContactNetwork, base: &str) -> String {
    let mut name = base.to_owned();
    while net.node(&name).is_some() {
        name.push('\'');
    }
    name
}

/// Replaces every arc `(v, w)` by `v -> h -> w` with certain transmission and
/// removal probability `1 - tau(v, w)` at the helper `h`, named `h:v→w`.
pub fn tau_to_gamma(net: &ContactNetwork, params: &EpidemicParams) -> Result<ReductionResult> {
    params.validate(net)?;
    let mut out = copy_nodes(net);
    let mut removal = params.removal.clone();
    let mut induction = params.induction.clone();
    let mut helper_nodes = Vec::with_capacity(net.arc_count());
    for (arc, &(v, w)) in net.arcs().iter().enumerate() {
        let name = fresh_name(&out, &format!("h:{}→{}", net.name(v), net.name(w)));
        let h = out.add_node(&name);
        out.add_arc(v, h)?;
        out.add_arc(h, w)?;
        helper_nodes.push(h);
        removal.push(1.0 - params.transmission[arc]);
        induction.push(0.0);
    }
    let transmission = vec![1.0; out.arc_count()];
    Ok(ReductionResult {
        network: out,
        params: EpidemicParams { induction, removal, transmission },
        original_nodes: net.node_count(),
        helper_nodes,
        alpha: None,
        extent_offset: 0.0,
        time_dilation: 2,
    })
}

/// Adds a node `alpha`, the only initial infectee, never removed, with an arc
/// to every original node `v` transmitting with the induction probability of `v`.
pub fn sigma_to_alpha(net: &ContactNetwork, params: &EpidemicParams) -> Result<ReductionResult> {
    params.validate(net)?;
    let mut out = copy_nodes(net);
    for &(u, v) in net.arcs() {
        out.add_arc(u, v)?;
    }
    let alpha = out.add_node(&fresh_name(net, "alpha"));
    let mut transmission = params.transmission.clone();
    for v in 0..net.node_count() {
        out.add_arc(alpha, v)?;
        transmission.push(params.induction[v]);
    }
    let mut induction = vec![0.0; out.node_count()];
    induction[alpha] = 1.0;
    let mut removal = params.removal.clone();
    removal.push(0.0);
    Ok(ReductionResult {
        network: out,
        params: EpidemicParams { induction, removal, transmission },
        original_nodes: net.node_count(),
        helper_nodes: Vec::new(),
        alpha: Some(alpha),
        extent_offset: 1.0,
        time_dilation: 1,
    })
}

pub fn reduce(kind: ReductionKind, net: &ContactNetwork, params: &EpidemicParams) -> Result<ReductionResult> {
    match kind {
        ReductionKind::TauToGamma => tau_to_gamma(net, params),
        ReductionKind::SigmaToAlpha => sigma_to_alpha(net, params),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VerifyMode {
    Exact,
    MonteCarlo { replications: u64, seed: u64 },
}

/// Both sides of a reduction's extent relation.
#[derive(Clone, Debug, PartialEq)]
pub struct ReductionVerdict {
    pub kind: ReductionKind,
    /// Mean extent of the input instance.
    pub original: ExtentEstimate,
    /// Mean extent of the reduced instance, helpers excluded, offset removed.
    pub reduced: ExtentEstimate,
    pub holds: bool,
}

/// Equality tolerance for exact verification.
pub const EXACT_TOLERANCE: f64 = 1e-12;

/// Mean count of ever-infected nodes among `0..counted` in the reduced instance.
fn mc_counted_extent(
    net: &ContactNetwork,
    params: &EpidemicParams,
    counted: usize,
    replications: u64,
    seed: u64,
) -> ExtentEstimate {
    let (sum, sum_sq) = (0..replications)
        .into_par_iter()
        .map(|r| {
            let mut source = RandomSource(engine::rng_from_seed(engine::sub_seed(seed, r)));
            let (state, _) = engine::run_dynamics(net, params, None, None, &mut source, None);
            let x = state[..counted].iter().filter(|&&s| s == NodeState::Removed).count() as u64;
            (x, (x as u128) * (x as u128))
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    ExtentEstimate::from_sums(sum, sum_sq, replications)
}

/// Computes the SIR mean extent on both sides of the reduction and checks
/// the relation: equality within [`EXACT_TOLERANCE`] in exact mode,
/// overlapping 95% intervals in Monte Carlo mode.
pub fn verify_reduction(
    kind: ReductionKind,
    net: &ContactNetwork,
    params: &EpidemicParams,
    mode: VerifyMode,
) -> Result<ReductionVerdict> {
    let reduced = reduce(kind, net, params)?;
    // Helpers are excluded from the count; alpha is not.
    let counted = match kind {
        ReductionKind::TauToGamma => reduced.original_nodes,
        ReductionKind::SigmaToAlpha => reduced.network.node_count(),
    };
    let shift = |mut e: ExtentEstimate| {
        e.mean -= reduced.extent_offset;
        e
    };
    let (original, reduced_side) = match mode {
        VerifyMode::Exact => {
            let lhs = oracle::exact_sir(net, params)?;
            let rhs = oracle::exact_sir(&reduced.network, &reduced.params)?;
            (ExtentEstimate::exact(lhs.mean_extent), shift(ExtentEstimate::exact(rhs.expected_count(0..counted))))
        }
        VerifyMode::MonteCarlo { replications, seed } => {
            if replications == 0 {
                return Err(Error::Invalid("replications must be >= 1".into()));
            }
            let lhs = mc_counted_extent(net, params, net.node_count(), replications, seed);
            let rhs = mc_counted_extent(&reduced.network, &reduced.params, counted, replications, engine::mix64(seed));
            (lhs, shift(rhs))
        }
    };
    let holds = match mode {
        VerifyMode::Exact => (original.mean - reduced_side.mean).abs() <= EXACT_TOLERANCE,
        VerifyMode::MonteCarlo { .. } => original.overlaps(&reduced_side),
    };
    Ok(ReductionVerdict { kind, original, reduced: reduced_side, holds })
}
