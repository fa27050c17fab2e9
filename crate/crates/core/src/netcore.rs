//! Directed contact networks, epidemic parameter maps, bundled datasets and
//! the plain-text edge-list / params formats.
//!
//! Edge-list format: UTF-8, one record per line, `#` starts a comment.
//! `u v [tau]` declares the arc `u -> v` (tau defaults to 1). A line holding a
//! single token `u` declares a node without arcs; it also pins node order.
//!
//! Params format: `v sigma gamma` per line, same comment rules.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

pub type NodeId = usize;
pub type ArcId = usize;

/// Directed graph with stable string identifiers mapped to dense indices.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ContactNetwork {
    names: Vec<String>,
    lookup: HashMap<String, NodeId>,
    arcs: Vec<(NodeId, NodeId)>,
    arc_lookup: HashMap<(NodeId, NodeId), ArcId>,
    out_adj: Vec<Vec<ArcId>>,
    in_adj: Vec<Vec<ArcId>>,
}

impl ContactNetwork {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a node, or returns the index of an existing node with this name.
    pub fn add_node(&mut self, name: &str) -> NodeId {
        if let Some(&id) = self.lookup.get(name) {
            return id;
        }
        let id = self.names.len();
        self.names.push(name.to_owned());
        self.lookup.insert(name.to_owned(), id);
        self.out_adj.push(Vec::new());
        self.in_adj.push(Vec::new());
        id
    }

    /// Adds the arc `from -> to`. Returns the arc id and whether it is new.
    pub fn add_arc(&mut self, from: NodeId, to: NodeId) -> Result<(ArcId, bool)> {
        let n = self.names.len();
        if from >= n || to >= n {
            return Err(Error::Invalid(format!("arc ({from}, {to}) out of range for {n} nodes")));
        }
        if from == to {
            return Err(Error::SelfLoop(self.names[from].clone()));
        }
        if let Some(&id) = self.arc_lookup.get(&(from, to)) {
            return Ok((id, false));
        }
        let id = self.arcs.len();
        self.arcs.push((from, to));
        self.arc_lookup.insert((from, to), id);
        self.out_adj[from].push(id);
        self.in_adj[to].push(id);
        Ok((id, true))
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn name(&self, node: NodeId) -> &str {
        &self.names[node]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn node(&self, name: &str) -> Option<NodeId> {
        self.lookup.get(name).copied()
    }

    pub fn require(&self, name: &str) -> Result<NodeId> {
        self.node(name).ok_or_else(|| Error::UnknownNode(name.to_owned()))
    }

    pub fn arcs(&self) -> &[(NodeId, NodeId)] {
        &self.arcs
    }

    pub fn arc(&self, id: ArcId) -> (NodeId, NodeId) {
        self.arcs[id]
    }

    pub fn arc_id(&self, from: NodeId, to: NodeId) -> Option<ArcId> {
        self.arc_lookup.get(&(from, to)).copied()
    }

    pub fn out_arcs(&self, node: NodeId) -> &[ArcId] {
        &self.out_adj[node]
    }

    pub fn in_arcs(&self, node: NodeId) -> &[ArcId] {
        &self.in_adj[node]
    }

    pub fn out_neighbors(&self, node: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.out_adj[node].iter().map(move |&a| self.arcs[a].1)
    }

    pub fn in_neighbors(&self, node: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.in_adj[node].iter().map(move |&a| self.arcs[a].0)
    }

    /// True when every arc has its reverse.
    pub fn is_symmetric(&self) -> bool {
        self.arcs.iter().all(|&(u, v)| self.arc_lookup.contains_key(&(v, u)))
    }

    /// Nodes reachable from `start` (including it) along arcs, skipping `blocked`.
    pub fn reachable_from(&self, start: NodeId, blocked: &[bool]) -> Vec<bool> {
        let mut seen = vec![false; self.node_count()];
        if blocked.get(start).copied().unwrap_or(false) {
            return seen;
        }
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(u) = stack.pop() {
            for v in self.out_neighbors(u) {
                if !seen[v] && !blocked.get(v).copied().unwrap_or(false) {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    }
}

/// Per-node induction and removal probabilities, per-arc transmission probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct EpidemicParams {
    /// Probability that a node is among the initial infectees.
    pub induction: Vec<f64>,
    /// Probability that an infected node is removed before it transmits.
    pub removal: Vec<f64>,
    /// Probability that an arc transmits from an infectious source.
    pub transmission: Vec<f64>,
}

impl EpidemicParams {
    /// Defaults used by the edge-list loader: no seeds, no removal, tau = 1.
    pub fn new(net: &ContactNetwork) -> Self {
        Self::uniform(net, 0.0, 0.0, 1.0)
    }

    pub fn uniform(net: &ContactNetwork, induction: f64, removal: f64, transmission: f64) -> Self {
        Self {
            induction: vec![induction; net.node_count()],
            removal: vec![removal; net.node_count()],
            transmission: vec![transmission; net.arc_count()],
        }
    }

    /// Seeds exactly `node` with certainty and nothing else.
    pub fn with_single_seed(mut self, node: NodeId) -> Self {
        self.induction.iter_mut().for_each(|s| *s = 0.0);
        self.induction[node] = 1.0;
        self
    }

    pub fn with_uniform_transmission(mut self, tau: f64) -> Self {
        self.transmission.iter_mut().for_each(|t| *t = tau);
        self
    }

    pub fn with_uniform_removal(mut self, gamma: f64) -> Self {
        self.removal.iter_mut().for_each(|g| *g = gamma);
        self
    }

    pub fn validate(&self, net: &ContactNetwork) -> Result<()> {
        if self.induction.len() != net.node_count() || self.removal.len() != net.node_count() {
            return Err(Error::Shape(format!(
                "{} nodes but {} induction / {} removal entries",
                net.node_count(),
                self.induction.len(),
                self.removal.len()
            )));
        }
        if self.transmission.len() != net.arc_count() {
            return Err(Error::Shape(format!(
                "{} arcs but {} transmission entries",
                net.arc_count(),
                self.transmission.len()
            )));
        }
        for (v, (&s, &g)) in self.induction.iter().zip(&self.removal).enumerate() {
            check_probability(s, || format!("induction of {}", net.name(v)))?;
            check_probability(g, || format!("removal of {}", net.name(v)))?;
        }
        for (a, &t) in self.transmission.iter().enumerate() {
            let (u, v) = net.arc(a);
            check_probability(t, || format!("transmission {} -> {}", net.name(u), net.name(v)))?;
        }
        Ok(())
    }

    fn same_shape(&self, other: &Self) -> bool {
        self.induction.len() == other.induction.len()
            && self.removal.len() == other.removal.len()
            && self.transmission.len() == other.transmission.len()
    }
}

fn check_probability(value: f64, what: impl FnOnce() -> String) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Probability { what: what(), value })
    }
}

/// Node state in a trajectory. `Distanced` only occurs under distancing dynamics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeState {
    Susceptible,
    Infected,
    Removed,
    Distanced,
}

impl NodeState {
    pub fn symbol(self) -> char {
        match self {
            NodeState::Susceptible => 'S',
            NodeState::Infected => 'I',
            NodeState::Removed => 'R',
            NodeState::Distanced => 'D',
        }
    }
}

/// True iff `over` has induction >= , removal <= and transmission >= `under`
/// everywhere.
pub fn dominates(over: &EpidemicParams, under: &EpidemicParams) -> Result<bool> {
    if !over.same_shape(under) {
        return Err(Error::Shape("parameter maps are defined on different networks".into()));
    }
    let induction = over.induction.iter().zip(&under.induction).all(|(o, u)| o >= u);
    let removal = over.removal.iter().zip(&under.removal).all(|(o, u)| o <= u);
    let transmission = over.transmission.iter().zip(&under.transmission).all(|(o, u)| o >= u);
    Ok(induction && removal && transmission)
}

fn records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let body = line.split('#').next().unwrap_or("");
        let fields: Vec<&str> = body.split_whitespace().collect();
        (!fields.is_empty()).then_some((i + 1, fields))
    })
}

fn parse_probability(token: &str, line: usize) -> Result<f64> {
    let value: f64 = token.parse().map_err(|_| Error::Parse {
        line,
        reason: format!("cannot parse {token:?} as a probability"),
    })?;
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::Parse { line, reason: format!("probability {value} outside [0, 1]") });
    }
    Ok(value)
}

/// Parses an edge-list document. Undirected input yields both arcs per line,
/// with equal tau. Returned params have induction 0, removal 0 and the
/// per-line tau (1 when absent).
pub fn build_from_edge_list(text: &str, directed: bool) -> Result<(ContactNetwork, EpidemicParams)> {
    let mut net = ContactNetwork::new();
    let mut tau: Vec<f64> = Vec::new();
    for (line, fields) in records(text) {
        match fields.as_slice() {
            [name] => {
                net.add_node(name);
            }
            [u, v] | [u, v, _] => {
                let t = match fields.get(2) {
                    Some(tok) => parse_probability(tok, line)?,
                    None => 1.0,
                };
                if u == v {
                    return Err(Error::SelfLoop(u.to_string()));
                }
                let (a, b) = (net.add_node(u), net.add_node(v));
                let mut insert = |from: NodeId, to: NodeId| -> Result<()> {
                    let (id, fresh) = net.add_arc(from, to)?;
                    if fresh {
                        tau.push(t);
                    } else if tau[id] != t {
                        return Err(Error::ConflictingArc {
                            from: net.name(from).to_owned(),
                            to: net.name(to).to_owned(),
                            first: tau[id],
                            second: t,
                        });
                    }
                    Ok(())
                };
                insert(a, b)?;
                if !directed {
                    insert(b, a)?;
                }
            }
            _ => {
                return Err(Error::Parse {
                    line,
                    reason: format!("expected `u v [tau]`, got {} fields", fields.len()),
                })
            }
        }
    }
    let mut params = EpidemicParams::new(&net);
    params.transmission = tau;
    Ok((net, params))
}

/// Serializes as a directed edge list: node declarations in index order, then
/// one `u v tau` line per arc in arc order.
pub fn write_edge_list(net: &ContactNetwork, params: &EpidemicParams) -> String {
    let mut out = String::new();
    for name in net.names() {
        writeln!(out, "{name}").unwrap();
    }
    for (a, &(u, v)) in net.arcs().iter().enumerate() {
        writeln!(out, "{} {} {}", net.name(u), net.name(v), params.transmission[a]).unwrap();
    }
    out
}

/// Applies `v sigma gamma` lines onto `params`. Nodes not mentioned keep their values.
pub fn apply_params_file(text: &str, net: &ContactNetwork, params: &mut EpidemicParams) -> Result<()> {
    for (line, fields) in records(text) {
        let [name, sigma, gamma] = fields.as_slice() else {
            return Err(Error::Parse {
                line,
                reason: format!("expected `v sigma gamma`, got {} fields", fields.len()),
            });
        };
        let v = net.node(name).ok_or_else(|| Error::Parse {
            line,
            reason: format!("unknown node {name:?}"),
        })?;
        params.induction[v] = parse_probability(sigma, line)?;
        params.removal[v] = parse_probability(gamma, line)?;
    }
    Ok(())
}

pub fn write_params(net: &ContactNetwork, params: &EpidemicParams) -> String {
    let mut out = String::new();
    for (v, name) in net.names().iter().enumerate() {
        writeln!(out, "{name} {} {}", params.induction[v], params.removal[v]).unwrap();
    }
    out
}

/// Complete digraph on `n` nodes named `0..n`.
pub fn make_complete(n: usize) -> Result<ContactNetwork> {
    if n == 0 {
        return Err(Error::Invalid("complete graph needs at least one node".into()));
    }
    let mut net = ContactNetwork::new();
    for i in 0..n {
        net.add_node(&i.to_string());
    }
    for u in 0..n {
        for v in 0..n {
            if u != v {
                net.add_arc(u, v)?;
            }
        }
    }
    Ok(net)
}

/// Every digraph on nodes `0..n` (`n <= 4`), or with `up_to_isomorphism` one
/// representative per isomorphism class: the one whose arc mask is smallest.
pub fn small_digraphs(n: usize, up_to_isomorphism: bool) -> Result<Vec<ContactNetwork>> {
    if n > 4 {
        return Err(Error::Invalid(format!("small_digraphs supports n <= 4, got {n}")));
    }
    let pairs: Vec<(usize, usize)> =
        (0..n).flat_map(|u| (0..n).filter(move |&v| v != u).map(move |v| (u, v))).collect();
    let index = |u: usize, v: usize| pairs.iter().position(|&p| p == (u, v)).expect("pair exists");
    // For each permutation, where each arc bit moves to.
    let relabelings: Vec<Vec<usize>> = permutations(n)
        .iter()
        .map(|perm| pairs.iter().map(|&(u, v)| index(perm[u], perm[v])).collect())
        .collect();
    let relabel = |mask: u32, moves: &[usize]| -> u32 {
        moves.iter().enumerate().filter(|&(bit, _)| mask >> bit & 1 == 1).fold(0, |acc, (_, &to)| acc | 1 << to)
    };
    let mut out = Vec::new();
    for mask in 0..1u32 << pairs.len() {
        if up_to_isomorphism && relabelings.iter().any(|moves| relabel(mask, moves) < mask) {
            continue;
        }
        let mut net = ContactNetwork::new();
        for i in 0..n {
            net.add_node(&i.to_string());
        }
        for (bit, &(u, v)) in pairs.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                net.add_arc(u, v)?;
            }
        }
        out.push(net);
    }
    Ok(out)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for k in 0..n {
        out = out
            .into_iter()
            .flat_map(|p: Vec<usize>| {
                (0..=k).map(move |i| {
                    let mut q = p.clone();
                    q.insert(i, k);
                    q
                })
            })
            .collect();
    }
    out
}

const DIAMOND: &str = "\
a b
a c
b d
b e
b f
c d
c e
c f
";

/// Six-node Diamond: a joined to b and c, each of b and c joined to d, e, f.
/// Every tie is bidirectional.
pub fn make_diamond() -> ContactNetwork {
    build_from_edge_list(DIAMOND, false).expect("bundled diamond edge list").0
}

const KARATE: &str = include_str!("../data/karate.edgelist");

/// Zachary's karate club: 34 members, 78 ties, loaded as 156 arcs.
pub fn load_karate() -> Result<ContactNetwork> {
    let (net, _) = build_from_edge_list(KARATE, false)?;
    if net.node_count() != 34 || net.arc_count() != 156 {
        return Err(Error::Invalid(format!(
            "bundled karate data is corrupt: {} nodes, {} arcs",
            net.node_count(),
            net.arc_count()
        )));
    }
    Ok(net)
}

/// Resolves a builtin network name: `diamond`, `karate`, `complete:<n>`.
pub fn builtin(name: &str) -> Result<ContactNetwork> {
    match name {
        "diamond" => Ok(make_diamond()),
        "karate" => load_karate(),
        other => match other.strip_prefix("complete:") {
            Some(n) => {
                let n = n.parse().map_err(|_| Error::Invalid(format!("bad node count in {other:?}")))?;
                make_complete(n)
            }
            None => Err(Error::Invalid(format!("unknown builtin network {other:?}"))),
        },
    }
}
