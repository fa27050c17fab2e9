//! Invariant suites behind `cascadelab verify`.

use std::fmt;

use anyhow::Result;
use cascadelab::engine::{self, Distancing, Model};
use cascadelab::monotonicity::{self, Mode, Verdict};
use cascadelab::netcore::{self, dominates, EpidemicParams};
use cascadelab::oracle;
use cascadelab::reductions::{self, ReductionKind, VerifyMode};
use clap::ValueEnum;
use rand::Rng;

const TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Theorem1,
    Lemma1,
    Reductions,
    PercolationEquivalence,
    FleesirCompleteGraph,
    All,
}

impl Suite {
    fn label(self) -> &'static str {
        match self {
            Suite::Theorem1 => "theorem1",
            Suite::Lemma1 => "lemma1",
            Suite::Reductions => "reductions",
            Suite::PercolationEquivalence => "percolation-equivalence",
            Suite::FleesirCompleteGraph => "fleesir-complete-graph",
            Suite::All => "all",
        }
    }

    fn default_samples(self) -> u64 {
        match self {
            Suite::Theorem1 => 100,
            Suite::Lemma1 => 50,
            Suite::Reductions => 20,
            Suite::PercolationEquivalence => 3,
            Suite::FleesirCompleteGraph => 10_000,
            Suite::All => 0,
        }
    }
}

/// Outcome of one check, printed as a single `key=value` line.
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub fields: Vec<(&'static str, String)>,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "check={} status={}", self.name, if self.passed { "pass" } else { "fail" })?;
        for (k, v) in &self.fields {
            write!(f, " {k}={v}")?;
        }
        Ok(())
    }
}

fn check(name: String, passed: bool, fields: Vec<(&'static str, String)>) -> Check {
    Check { name, passed, fields }
}

/// Runs a suite. `samples` overrides the suite's default instance count.
pub fn run(suite: Suite, samples: Option<u64>, seed: u64) -> Result<Vec<Check>> {
    if suite == Suite::All {
        let mut out = Vec::new();
        for s in [
            Suite::Theorem1,
            Suite::Lemma1,
            Suite::Reductions,
            Suite::PercolationEquivalence,
            Suite::FleesirCompleteGraph,
        ] {
            out.extend(run(s, samples, seed)?);
        }
        return Ok(out);
    }
    let samples = samples.unwrap_or(suite.default_samples());
    let label = suite.label();
    match suite {
        Suite::Theorem1 => dominance(label, samples, seed),
        Suite::Lemma1 => removal(label, samples, seed),
        Suite::Reductions => reduction_fidelity(label, samples, seed),
        Suite::PercolationEquivalence => percolation(label, samples, seed),
        Suite::FleesirCompleteGraph => complete_graph(label, samples, seed),
        Suite::All => unreachable!(),
    }
}

fn dominance(label: &str, samples: u64, seed: u64) -> Result<Vec<Check>> {
    let mut violations = 0;
    for i in 0..samples {
        let n = 2 + (i % 4) as usize;
        let (net, over, under) = monotonicity::random_dominated_pair(n, 0.5, engine::sub_seed(seed, i))?;
        let report = monotonicity::compare(&Model::Sir, &net, &over, &under, Mode::Exact, false)?;
        violations += usize::from(report.verdict == Verdict::Violation);
    }
    Ok(vec![check(
        format!("{label}.dominated-pairs"),
        violations == 0,
        vec![("instances", samples.to_string()), ("violations", violations.to_string())],
    )])
}

fn removal(label: &str, samples: u64, seed: u64) -> Result<Vec<Check>> {
    let mut violations = 0;
    for i in 0..samples {
        let instance_seed = engine::sub_seed(seed, i);
        let n = 3 + (i % 5) as usize;
        let (net, _, _) = monotonicity::random_dominated_pair(n, 0.45, instance_seed)?;
        let mut rng = engine::rng_from_seed(engine::mix64(instance_seed));
        let high: Vec<f64> = (0..n).map(|_| if rng.gen::<f64>() < 0.2 { 1.0 } else { rng.gen() }).collect();
        let low: Vec<f64> = high.iter().map(|&g| (g - rng.gen::<f64>() * 0.6).max(0.0)).collect();
        let report = monotonicity::lemma1_check(&net, 0, &low, &high, Mode::Exact)?;
        violations += usize::from(report.verdict == Verdict::Violation);
    }
    Ok(vec![check(
        format!("{label}.node-wise"),
        violations == 0,
        vec![("instances", samples.to_string()), ("violations", violations.to_string())],
    )])
}

fn reduction_fidelity(label: &str, samples: u64, seed: u64) -> Result<Vec<Check>> {
    let kinds = [ReductionKind::TauToGamma, ReductionKind::SigmaToAlpha];
    let mut out = Vec::new();
    for kind in kinds {
        let mut worst: f64 = 0.0;
        let mut failures = 0;
        for i in 0..samples {
            let n = 2 + (i % 3) as usize;
            let (net, _, params) = monotonicity::random_dominated_pair(n, 0.5, engine::sub_seed(seed, i))?;
            let verdict = reductions::verify_reduction(kind, &net, &params, VerifyMode::Exact)?;
            worst = worst.max((verdict.original.mean - verdict.reduced.mean).abs());
            failures += usize::from(!verdict.holds);
        }
        out.push(check(
            format!("{label}.{}", kind.name()),
            failures == 0 && worst <= TOLERANCE,
            vec![("instances", samples.to_string()), ("max_abs_error", format!("{worst:e}"))],
        ));
    }
    let mut broken = 0;
    for i in 0..samples {
        let (net, over, under) = monotonicity::random_dominated_pair(4, 0.5, engine::sub_seed(seed ^ 1, i))?;
        for kind in kinds {
            let hi = reductions::reduce(kind, &net, &over)?;
            let lo = reductions::reduce(kind, &net, &under)?;
            broken += usize::from(!dominates(&hi.params, &lo.params)?);
        }
    }
    out.push(check(
        format!("{label}.dominance-preserved"),
        broken == 0,
        vec![("instances", samples.to_string()), ("violations", broken.to_string())],
    ));
    Ok(out)
}

/// Every labeled digraph with up to 3 nodes and every isomorphism class on 4,
/// under all uniform grid parameters and `random_per_graph` mixed ones.
fn percolation(label: &str, random_per_graph: u64, seed: u64) -> Result<Vec<Check>> {
    let grid = [0.0, 0.5, 1.0];
    let mut graphs = Vec::new();
    for n in 1..=3 {
        graphs.extend(netcore::small_digraphs(n, false)?);
    }
    graphs.extend(netcore::small_digraphs(4, true)?);
    let mut rng = engine::rng_from_seed(seed);
    let mut worst: f64 = 0.0;
    let mut instances = 0;
    for net in &graphs {
        let mut cases = Vec::new();
        for s in grid {
            for g in grid {
                for t in grid {
                    cases.push(EpidemicParams::uniform(net, s, g, t));
                }
            }
        }
        for _ in 0..random_per_graph {
            let mut p = EpidemicParams::new(net);
            for x in p.induction.iter_mut().chain(&mut p.removal).chain(&mut p.transmission) {
                *x = grid[rng.gen_range(0..grid.len())];
            }
            cases.push(p);
        }
        for params in &cases {
            let statically = oracle::exact_sir(net, params)?;
            let dynamically = oracle::exact_sir_dynamic(net, params)?;
            for (a, b) in statically.extent_distribution.iter().zip(&dynamically.extent_distribution) {
                worst = worst.max((a - b).abs());
            }
            instances += 1;
        }
    }
    Ok(vec![check(
        format!("{label}.extent-distribution"),
        worst <= TOLERANCE,
        vec![
            ("graphs", graphs.len().to_string()),
            ("instances", instances.to_string()),
            ("max_abs_error", format!("{worst:e}")),
        ],
    )])
}

fn complete_graph(label: &str, replications: u64, seed: u64) -> Result<Vec<Check>> {
    let mut worst: f64 = 0.0;
    for n in 2..=6 {
        let net = netcore::make_complete(n)?;
        for tau in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let params = EpidemicParams::new(&net).with_single_seed(0).with_uniform_transmission(tau);
            let exact = oracle::exact_fleesir(&net, &params, Distancing::default())?;
            worst = worst.max((exact.mean_extent - (1.0 + tau * (n - 1) as f64)).abs());
        }
    }
    let mut out = vec![check(
        format!("{label}.exact"),
        worst <= TOLERANCE,
        vec![("sizes", "2..6".into()), ("max_abs_error", format!("{worst:e}"))],
    )];
    let k100 = netcore::make_complete(100)?;
    for tau in [0.1, 0.3, 0.5] {
        let params = EpidemicParams::new(&k100).with_single_seed(0).with_uniform_transmission(tau);
        let est = engine::estimate_mean_extent(&Model::fleesir(), &k100, &params, replications, seed)?;
        let expected = 1.0 + tau * 99.0;
        out.push(check(
            format!("{label}.mc-k100-tau{tau}"),
            est.contains(expected),
            vec![
                ("expected", expected.to_string()),
                ("mean", est.mean.to_string()),
                ("ci_half_width", est.half_width_95.to_string()),
                ("replications", replications.to_string()),
            ],
        ));
    }
    Ok(out)
}
