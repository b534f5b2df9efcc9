//! Command-line front end: graph generation, single simulations, trace
//! analysis, experiment sweeps, and the invariant verification suite.
//!
//! Exit codes: 0 success, 1 usage error, 2 invariant violation (verify /
//! analyze), 3 runtime failure.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

use quantavg::analysis::{check_lemmas, instrument, instrumentation_csv, MonitorOptions};
use quantavg::dynamics::{simulate, state_sum, SimOptions, Trace, Verdict};
use quantavg::experiments::{self, ExperimentConfig, GraphFamily};
use quantavg::graph::Graph;
use quantavg::numeric::{parse_rational, GridConstants, Rational};
use quantavg::quantizer::{QuantizerKind, Variant};
use quantavg::weights::{self, validate_assumption1, WeightMatrix};
use quantavg::Result;

#[derive(Parser)]
#[command(name = "quantavg", version, about = "Exact simulator for distributed averaging under uniform quantization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random or structured graph and write it as an edge list.
    GenGraph(GenGraphArgs),
    /// Run one simulation: trace CSV plus verdict JSON.
    Simulate(SimulateArgs),
    /// Replay a stored trace through the invariant monitors.
    Analyze(AnalyzeArgs),
    /// Run an experiment config (batch of seeded runs, aggregated CSV).
    Experiment(ExperimentArgs),
    /// Run the full invariant suite on seeded instances; nonzero on violation.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct GenGraphArgs {
    /// Graph family: er | rgg | rgg-scaled | path | bipartite
    #[arg(long)]
    family: String,
    #[arg(long)]
    n: usize,
    /// Edge probability for `er` (rational, e.g. 3/10 or 0.3)
    #[arg(long)]
    p: Option<String>,
    /// Connection radius for `rgg` (rational)
    #[arg(long)]
    radius: Option<String>,
    /// Connectivity constant for `rgg-scaled` (radius = sqrt(c ln n / n))
    #[arg(long)]
    c_scale: Option<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output file (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct WeightArgs {
    /// Weight scheme: metropolis | modified | two-node | file
    #[arg(long, default_value = "modified")]
    weights: String,
    /// Scaling constant for `modified` (rational >= 2)
    #[arg(long = "C", default_value = "2")]
    c: String,
    /// Edge weight for `two-node` (rational in (0,1))
    #[arg(long)]
    w: Option<String>,
    /// Weight matrix file (triplet text) for `file`
    #[arg(long)]
    weights_file: Option<PathBuf>,
}

impl WeightArgs {
    fn build(&self, g: &Graph) -> Result<WeightMatrix> {
        match self.weights.as_str() {
            "metropolis" => Ok(weights::metropolis(g)),
            "modified" => weights::modified_metropolis(g, &parse_rational(&self.c)?),
            "two-node" => {
                let w = self.w.as_deref().ok_or_else(|| {
                    quantavg::Error::Parse("two-node weights require --w".into())
                })?;
                weights::two_node_cyclic(&parse_rational(w)?)
            }
            "file" => {
                let path = self.weights_file.as_ref().ok_or_else(|| {
                    quantavg::Error::Parse("file weights require --weights-file".into())
                })?;
                WeightMatrix::from_triplet_text(&std::fs::read_to_string(path)?)
            }
            other => Err(quantavg::Error::Parse(format!("unknown weight scheme `{other}`"))),
        }
    }
}

#[derive(Args)]
struct QuantizerArgs {
    /// Quantizer: trunc | ceil | round | prob
    #[arg(long, default_value = "trunc")]
    quantizer: String,
    /// Quantizer step epsilon (rational > 0)
    #[arg(long, default_value = "1")]
    step: String,
    /// RNG seed for the probabilistic quantizer
    #[arg(long, default_value_t = 0)]
    quantizer_seed: u64,
}

impl QuantizerArgs {
    fn build(&self) -> Result<QuantizerKind> {
        let step = parse_rational(&self.step)?;
        let variant = match self.quantizer.as_str() {
            "trunc" => Variant::Truncation,
            "ceil" => Variant::Ceiling,
            "round" => Variant::Rounding,
            "prob" => Variant::Probabilistic { seed: self.quantizer_seed },
            other => return Err(quantavg::Error::Parse(format!("unknown quantizer `{other}`"))),
        };
        QuantizerKind::new(variant, step)
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Graph file (edge list: `n m` header then `u v` lines)
    #[arg(long)]
    graph: PathBuf,
    #[command(flatten)]
    weights: WeightArgs,
    #[command(flatten)]
    quantizer: QuantizerArgs,
    /// Initial state, comma-separated rationals (e.g. 0,1,2 or 1/2,3/2)
    #[arg(long)]
    x0: String,
    #[arg(long, default_value_t = 1_000_000)]
    max_iters: usize,
    /// Run even when the weights fail the convergence conditions
    #[arg(long)]
    force: bool,
    /// Write the trace CSV here (skipped when omitted)
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// Write the verdict JSON here (stdout when omitted)
    #[arg(long)]
    verdict_out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Trace CSV produced by `simulate --trace-out`
    #[arg(long)]
    trace: PathBuf,
    /// Verdict JSON produced by `simulate`
    #[arg(long)]
    verdict: PathBuf,
    /// Graph file the trace was produced on
    #[arg(long)]
    graph: PathBuf,
    #[command(flatten)]
    weights: WeightArgs,
    /// Write the per-iteration instrumentation CSV here
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Config file (flat key = value lines)
    #[arg(long)]
    config: PathBuf,
    /// Scale up to n = 100, runs = 100
    #[arg(long)]
    full: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = 20)]
    runs: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests are success, anything else is usage.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                quantavg::Error::Parse(_) | quantavg::Error::ParameterOutOfRange(_) => 1,
                _ => 3,
            }
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::GenGraph(args) => gen_graph(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Experiment(args) => cmd_experiment(args),
        Command::Verify(args) => cmd_verify(args),
    }
}

fn gen_graph(args: GenGraphArgs) -> Result<i32> {
    let g = match args.family.as_str() {
        "er" => {
            let p = args.p.as_deref().ok_or_else(|| quantavg::Error::Parse("er requires --p".into()))?;
            Graph::erdos_renyi(args.n, &parse_rational(p)?, args.seed)?
        }
        "rgg" => {
            let r = args
                .radius
                .as_deref()
                .ok_or_else(|| quantavg::Error::Parse("rgg requires --radius".into()))?;
            Graph::random_geometric(args.n, &parse_rational(r)?, args.seed)?.0
        }
        "rgg-scaled" => {
            let c = args
                .c_scale
                .ok_or_else(|| quantavg::Error::Parse("rgg-scaled requires --c-scale".into()))?;
            Graph::random_geometric_c(args.n, c, args.seed)?.0
        }
        "path" => Graph::path(args.n)?,
        "bipartite" => Graph::complete_bipartite(args.n / 2, args.n - args.n / 2)?,
        other => return Err(quantavg::Error::Parse(format!("unknown graph family `{other}`"))),
    };
    let text = g.to_edge_list();
    match &args.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(0)
}

fn parse_x0(s: &str) -> Result<Vec<Rational>> {
    s.split(',').map(|t| parse_rational(t.trim())).collect()
}

fn cmd_simulate(args: SimulateArgs) -> Result<i32> {
    let g = Graph::from_edge_list(&std::fs::read_to_string(&args.graph)?)?;
    let w = args.weights.build(&g)?;
    if !args.force {
        let report = validate_assumption1(&w, &g);
        if !report.satisfied() {
            eprintln!("weights fail the convergence conditions:\n{}", report.summary());
            eprintln!("(re-run with --force to simulate anyway)");
            return Ok(1);
        }
    }
    let x0 = parse_x0(&args.x0)?;
    let q = args.quantizer.build()?;
    let opts = SimOptions { max_iters: args.max_iters, force: args.force, ..Default::default() };
    let trace = simulate(&w, &g, &q, &x0, &opts)?;
    if let Some(path) = &args.trace_out {
        std::fs::write(path, trace.to_csv())?;
    }
    let verdict = serde_json::to_string_pretty(&trace.verdict.to_json_value())?;
    match &args.verdict_out {
        Some(path) => std::fs::write(path, verdict)?,
        None => println!("{verdict}"),
    }
    Ok(0)
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<i32> {
    let g = Graph::from_edge_list(&std::fs::read_to_string(&args.graph)?)?;
    let w = args.weights.build(&g)?;
    let verdict = Verdict::from_json(&std::fs::read_to_string(&args.verdict)?)?;
    let trace = Trace::from_csv(&std::fs::read_to_string(&args.trace)?, verdict)?;
    let constants = GridConstants::compute(&w, &trace.states[0].x)?;
    let reports = instrument(&trace, &g, &constants)?;
    if let Some(path) = &args.out {
        std::fs::write(path, instrumentation_csv(&reports))?;
    }
    let report = check_lemmas(&trace, &g, &w, &constants, &MonitorOptions::default())?;
    if report.ok() {
        println!("all monitors passed over {} iterations", trace.iters);
        Ok(0)
    } else {
        for v in &report.violations {
            println!("violation at k={}: {}", v.k, v.what);
        }
        Ok(2)
    }
}

fn cmd_experiment(args: ExperimentArgs) -> Result<i32> {
    let mut cfg = experiments::parse_config(&std::fs::read_to_string(&args.config)?)?;
    if args.full {
        cfg.n = 100;
        cfg.runs = 100;
    }
    let result = experiments::run_experiment(&cfg)?;
    print!("{}", result.to_csv());
    Ok(0)
}

fn cmd_verify(args: VerifyArgs) -> Result<i32> {
    let mut violations = 0usize;
    for run in 0..args.runs {
        // Alternate graph families across the corpus.
        let family = if run % 2 == 0 {
            GraphFamily::ErdosRenyi { p: parse_rational("2/5")? }
        } else {
            GraphFamily::RandomGeometricScaled { c: 2.0 }
        };
        let mut cfg = ExperimentConfig::new(family, args.n);
        cfg.base_seed = args.seed;
        let seed = cfg.run_seed(run);
        let g = match &cfg.graph {
            GraphFamily::ErdosRenyi { p } => Graph::erdos_renyi(cfg.n, p, seed)?,
            GraphFamily::RandomGeometricScaled { c } => Graph::random_geometric_c(cfg.n, *c, seed)?.0,
            _ => unreachable!(),
        };
        let w = weights::modified_metropolis(&g, &parse_rational("2")?)?;
        let x0 = {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x517C_C1B7_2722_0A95);
            (0..cfg.n).map(|_| {
                let num: i64 = rng.gen_range(0..=10_000);
                parse_rational(&format!("{num}/100"))
            }).collect::<Result<Vec<_>>>()?
        };
        let trace = simulate(&w, &g, &QuantizerKind::truncation(), &x0, &SimOptions::default())?;
        if state_sum(trace.states.last().map(|s| &s.x).unwrap()) != state_sum(&x0) {
            println!("run {run}: conservation violated");
            violations += 1;
        }
        if !trace.verdict.is_decided() {
            println!("run {run}: undecided within budget");
            violations += 1;
        }
        let constants = GridConstants::compute(&w, &x0)?;
        let report = check_lemmas(&trace, &g, &w, &constants, &MonitorOptions::default())?;
        for v in &report.violations {
            println!("run {run}: violation at k={}: {}", v.k, v.what);
        }
        violations += report.violations.len();
    }
    if violations == 0 {
        println!("verify: {} runs, all monitors passed", args.runs);
        Ok(0)
    } else {
        println!("verify: {violations} violations");
        Ok(2)
    }
}
