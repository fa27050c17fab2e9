//! `cascadelab` command-line front end.
//!
//! Exit codes: 0 on success, 1 when a verification check fails, 2 for usage
//! or configuration errors.

mod config;
mod verify;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use cascadelab::engine::{self, Distancing, Model, Seeding, Trigger};
use cascadelab::monotonicity::{self, SweepMode, SweepSpec};
use cascadelab::netcore::{self, ContactNetwork, EpidemicParams};
use cascadelab::reductions::{self, ReductionKind};
use clap::{Args, Parser, Subcommand, ValueEnum};

use config::ConfigFile;

#[derive(Parser)]
#[command(name = "cascadelab", version, about = "SIR and distancing epidemics on contact networks")]
struct Cli {
    /// File of `key = value` lines supplying defaults for long options.
    /// Options given on the command line take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mean extent over a grid of uniform transmission probabilities, as CSV.
    Sweep(SweepArgs),
    /// Run one epidemic and print its state partitions step by step.
    Simulate(SimulateArgs),
    /// Run an invariant suite; exits with 1 if any check fails.
    Verify(VerifyArgs),
    /// Transform an instance and write the reduced edge list and params files.
    Reduce(ReduceArgs),
    /// Write a bundled network as an edge list.
    Dataset(DatasetArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Sir,
    Fleesir,
}

#[derive(Clone, Copy, ValueEnum)]
enum TriggerArg {
    /// Count in-neighbours that have ever been infected.
    Ever,
    /// Count in-neighbours infected at the current step.
    Current,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    /// Exact when the oracle budget allows, Monte Carlo otherwise.
    Auto,
    Exact,
    Mc,
}

macro_rules! parse_enum {
    ($ty:ty) => {
        impl std::str::FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> std::result::Result<Self, String> {
                <$ty as ValueEnum>::from_str(s, true)
            }
        }
    };
}
parse_enum!(ModelArg);
parse_enum!(TriggerArg);
parse_enum!(ModeArg);

/// Options that pick the network, its parameters and the model.
#[derive(Args)]
struct InstanceArgs {
    /// `diamond`, `karate`, `complete:<n>`, or a path to an edge list.
    #[arg(long)]
    network: Option<String>,
    /// Read edge-list lines as one-way arcs instead of two-way ties.
    #[arg(long)]
    directed: bool,
    /// File of `node sigma gamma` lines.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Removal probability applied to every node, after the params file.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    /// Distancing trigger for the fleesir model.
    #[arg(long, value_enum)]
    trigger: Option<TriggerArg>,
    /// Infected in-neighbours needed to distance.
    #[arg(long)]
    threshold: Option<usize>,
    /// Start from this node alone.
    #[arg(long, conflicts_with = "single_seed_uniform")]
    seed_node: Option<String>,
    /// Start from one node chosen uniformly at random.
    #[arg(long)]
    single_seed_uniform: bool,
}

const INSTANCE_KEYS: &[&str] = &[
    "network",
    "directed",
    "params",
    "gamma",
    "model",
    "trigger",
    "threshold",
    "seed-node",
    "single-seed-uniform",
];

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Transmission grid `start:stop:step`, both ends included.
    #[arg(long)]
    tau_grid: Option<String>,
    /// Monte Carlo replications per grid point.
    #[arg(long)]
    reps: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Transmission probability applied to every arc.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(value_enum)]
    suite: verify::Suite,
    /// Number of random instances (suite-specific default).
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ReduceArgs {
    /// `tau_to_gamma` or `sigma_to_alpha`.
    kind: ReductionKind,
    #[arg(long)]
    network: Option<String>,
    #[arg(long)]
    directed: bool,
    #[arg(long)]
    params: Option<PathBuf>,
    /// Edge-list destination.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Params destination; defaults to the edge-list path with `.params` appended.
    #[arg(long)]
    params_output: Option<PathBuf>,
}

#[derive(Args)]
struct DatasetArgs {
    /// `diamond`, `karate` or `complete:<n>`.
    name: String,
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Everything a sweep or simulation needs, resolved and validated.
struct RunConfig {
    network_label: String,
    net: ContactNetwork,
    params: EpidemicParams,
    model: Model,
    seeding: Seeding,
}

fn is_builtin(spec: &str) -> bool {
    matches!(spec, "diamond" | "karate") || spec.starts_with("complete:")
}

fn load_network(spec: &str, directed: bool) -> Result<(ContactNetwork, EpidemicParams)> {
    if is_builtin(spec) {
        let net = netcore::builtin(spec)?;
        let params = EpidemicParams::new(&net);
        return Ok((net, params));
    }
    let text = std::fs::read_to_string(spec).with_context(|| format!("reading edge list {spec}"))?;
    netcore::build_from_edge_list(&text, directed).with_context(|| format!("parsing edge list {spec}"))
}

fn load_params(path: Option<&Path>, net: &ContactNetwork, params: &mut EpidemicParams) -> Result<()> {
    if let Some(path) = path {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading params {}", path.display()))?;
        netcore::apply_params_file(&text, net, params).with_context(|| format!("parsing params {}", path.display()))?;
    }
    Ok(())
}

impl RunConfig {
    fn resolve(args: InstanceArgs, cfg: &ConfigFile) -> Result<Self> {
        let network_label = cfg.pick_or(args.network, "network", "diamond".to_owned())?;
        let directed = cfg.switch(args.directed, "directed")?;
        let (net, mut params) = load_network(&network_label, directed)?;
        load_params(cfg.pick(args.params, "params")?.as_deref(), &net, &mut params)?;
        if let Some(gamma) = cfg.pick(args.gamma, "gamma")? {
            params = params.with_uniform_removal(gamma);
        }
        let model = match cfg.pick_or(args.model, "model", ModelArg::Sir)? {
            ModelArg::Sir => Model::Sir,
            ModelArg::Fleesir => {
                let trigger = match cfg.pick_or(args.trigger, "trigger", TriggerArg::Ever)? {
                    TriggerArg::Ever => Trigger::EverInfected,
                    TriggerArg::Current => Trigger::CurrentlyInfected,
                };
                let threshold = cfg.pick_or(args.threshold, "threshold", Distancing::default().threshold)?;
                Model::FleeSir(Distancing { threshold, trigger })
            }
        };
        let seed_node = cfg.pick(args.seed_node, "seed-node")?;
        let uniform = cfg.switch(args.single_seed_uniform, "single-seed-uniform")?;
        let seeding = match (seed_node, uniform) {
            (Some(_), true) => bail!("--seed-node and --single-seed-uniform are mutually exclusive"),
            (Some(name), false) => Seeding::Node(net.require(&name)?),
            (None, true) => Seeding::UniformSingle,
            (None, false) => Seeding::Params,
        };
        params.validate(&net)?;
        Ok(Self { network_label, net, params, model, seeding })
    }

    /// Parameters with the seeding folded into the induction map, for a
    /// single run. Uniform seeding picks its node from `seed`.
    fn single_run_params(&self, seed: u64) -> EpidemicParams {
        match self.seeding {
            Seeding::Params => self.params.clone(),
            Seeding::Node(v) => self.params.clone().with_single_seed(v),
            Seeding::UniformSingle => {
                let v = (engine::mix64(seed) % self.net.node_count() as u64) as usize;
                self.params.clone().with_single_seed(v)
            }
        }
    }
}

/// Parses `start:stop:step`; the stop value is included when it lies within
/// 1e-9 of a grid point.
fn parse_tau_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [start, stop, step] = parts.as_slice() else {
        bail!("tau grid {spec:?} is not start:stop:step");
    };
    let parse = |s: &str| s.trim().parse::<f64>().with_context(|| format!("bad number {s:?} in tau grid"));
    let (start, stop, step) = (parse(start)?, parse(stop)?, parse(step)?);
    if step.is_nan() || step <= 0.0 || !start.is_finite() || !stop.is_finite() || stop < start {
        bail!("tau grid {spec:?} needs start <= stop and step > 0");
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    let grid = (0..count)
        .map(|i| {
            let t = start + i as f64 * step;
            // Strip float noise such as 0.15000000000000002 so CSV values read cleanly.
            (t * 1e12).round() / 1e12
        })
        .collect();
    Ok(grid)
}

/// Writes `bytes` to `path` through a temporary file in the same directory,
/// or to standard output when no path is given.
fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    let Some(path) = path else {
        std::io::stdout().write_all(bytes)?;
        return Ok(());
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("cannot write to {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.persist(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn cmd_sweep(args: SweepArgs, cfg: &ConfigFile) -> Result<bool> {
    cfg.check_keys(&[INSTANCE_KEYS, &["tau-grid", "reps", "seed", "mode", "output"]].concat())?;
    let grid = parse_tau_grid(&cfg.pick_or(args.tau_grid, "tau-grid", "0:1:0.05".to_owned())?)?;
    let replications = cfg.pick_or(args.reps, "reps", 10_000)?;
    let seed = cfg.pick_or(args.seed, "seed", 0)?;
    let mode = match cfg.pick_or(args.mode, "mode", ModeArg::Auto)? {
        ModeArg::Auto => SweepMode::Auto,
        ModeArg::Exact => SweepMode::Exact,
        ModeArg::Mc => SweepMode::MonteCarlo,
    };
    let output = cfg.pick(args.output, "output")?;
    let run = RunConfig::resolve(args.instance, cfg)?;
    let spec = SweepSpec {
        model: run.model,
        seeding: run.seeding,
        base: &run.params,
        tau_grid: &grid,
        mode,
        replications,
        seed,
    };
    let curve = monotonicity::sweep(&run.net, &spec)?;

    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["tau", "mean_extent", "ci_half_width", "replications", "model", "network", "seed"])?;
    for (tau, est) in &curve.points {
        writer.write_record([
            tau.to_string(),
            est.mean.to_string(),
            est.half_width_95.to_string(),
            est.replications.to_string(),
            run.model.name().to_owned(),
            run.network_label.clone(),
            seed.to_string(),
        ])?;
    }
    emit(output.as_deref(), &writer.into_inner()?)?;
    Ok(true)
}

fn cmd_simulate(args: SimulateArgs, cfg: &ConfigFile) -> Result<bool> {
    cfg.check_keys(&[INSTANCE_KEYS, &["tau", "seed", "output"]].concat())?;
    let seed = cfg.pick_or(args.seed, "seed", 0)?;
    let tau = cfg.pick(args.tau, "tau")?;
    let output = cfg.pick(args.output, "output")?;
    let mut run = RunConfig::resolve(args.instance, cfg)?;
    if let Some(tau) = tau {
        run.params = run.params.with_uniform_transmission(tau);
        run.params.validate(&run.net)?;
    }
    let params = run.single_run_params(seed);
    let mut source = engine::RandomSource(engine::rng_from_seed(seed));
    let record = engine::simulate_with(&run.net, &params, &run.model, &mut source);
    let mut text = record.to_text(&run.net);
    text.push_str(&format!("extent={} final_time={}\n", record.extent(), record.final_time()));
    emit(output.as_deref(), text.as_bytes())?;
    Ok(true)
}

fn cmd_verify(args: VerifyArgs, cfg: &ConfigFile) -> Result<bool> {
    cfg.check_keys(&["samples", "seed"])?;
    let samples = cfg.pick(args.samples, "samples")?;
    let seed = cfg.pick_or(args.seed, "seed", 0)?;
    let checks = verify::run(args.suite, samples, seed)?;
    for check in &checks {
        println!("{check}");
    }
    Ok(checks.iter().all(|c| c.passed))
}

fn cmd_reduce(args: ReduceArgs, cfg: &ConfigFile) -> Result<bool> {
    cfg.check_keys(&["network", "directed", "params", "output", "params-output"])?;
    let Some(network) = cfg.pick(args.network, "network")? else {
        bail!("reduce needs --network");
    };
    let Some(output) = cfg.pick(args.output, "output")? else {
        bail!("reduce needs --output");
    };
    let params_output = cfg.pick(args.params_output, "params-output")?.unwrap_or_else(|| {
        let mut p = output.clone().into_os_string();
        p.push(".params");
        PathBuf::from(p)
    });
    let (net, mut params) = load_network(&network, cfg.switch(args.directed, "directed")?)?;
    load_params(cfg.pick(args.params, "params")?.as_deref(), &net, &mut params)?;
    let reduced = reductions::reduce(args.kind, &net, &params)?;
    emit(Some(&output), netcore::write_edge_list(&reduced.network, &reduced.params).as_bytes())?;
    emit(Some(&params_output), netcore::write_params(&reduced.network, &reduced.params).as_bytes())?;
    println!(
        "reduction={} nodes={} arcs={} helpers={} alpha={} extent_offset={} time_dilation={}",
        args.kind.name(),
        reduced.network.node_count(),
        reduced.network.arc_count(),
        reduced.helper_nodes.len(),
        reduced.alpha.map_or("none", |a| reduced.network.name(a)),
        reduced.extent_offset,
        reduced.time_dilation,
    );
    Ok(true)
}

fn cmd_dataset(args: DatasetArgs, cfg: &ConfigFile) -> Result<bool> {
    cfg.check_keys(&["output"])?;
    let net = netcore::builtin(&args.name)?;
    let output = cfg.pick(args.output, "output")?;
    emit(output.as_deref(), netcore::write_edge_list(&net, &EpidemicParams::new(&net)).as_bytes())?;
    Ok(true)
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("CASCADELAB_THREADS") else { return Ok(()) };
    let threads: usize = raw.trim().parse().ok().filter(|&n| n > 0).with_context(|| {
        format!("CASCADELAB_THREADS must be a positive integer, got {raw:?}")
    })?;
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    configure_threads()?;
    let cfg = ConfigFile::load(cli.config.as_deref())?;
    match cli.command {
        Command::Sweep(a) => cmd_sweep(a, &cfg),
        Command::Simulate(a) => cmd_simulate(a, &cfg),
        Command::Verify(a) => cmd_verify(a, &cfg),
        Command::Reduce(a) => cmd_reduce(a, &cfg),
        Command::Dataset(a) => cmd_dataset(a, &cfg),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
