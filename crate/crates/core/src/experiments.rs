//! Batch experiment harness: seeded run corpora, connectivity sweeps, and
//! the precision/speed sweep over the weight-scaling constant C.
//!
//! Runs are embarrassingly parallel (rayon over run indices); each run is
//! fully determined by the config plus its derived seed, so a sweep is
//! reproducible bit-for-bit. Aggregates are plain means over the retained
//! per-run records, never over anything discarded.

use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::analysis::d_infinity;
use crate::dynamics::{simulate, state_sum, SimOptions, Trace, Verdict};
use crate::error::Error;
use crate::graph::Graph;
use crate::numeric::{parse_rational, rat, rat_int, Rational};
use crate::quantizer::{QuantizerKind, Variant};
use crate::weights::{self, WeightMatrix};
use crate::Result;

/// Mixing constant for deriving independent sub-seeds from one base seed.
const SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;
/// Offset separating the initial-condition RNG stream from the graph stream.
const INIT_STREAM: u64 = 0x517C_C1B7_2722_0A95;

#[derive(Debug, Clone, PartialEq)]
pub enum GraphFamily {
    ErdosRenyi { p: Rational },
    /// Exact connection radius.
    RandomGeometric { radius: Rational },
    /// Radius derived from a connectivity constant: `R = sqrt(c ln n / n)`.
    RandomGeometricScaled { c: f64 },
    Path,
    /// Complete bipartite with sides `n/2` and `n - n/2`.
    CompleteBipartite,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightScheme {
    Metropolis,
    Modified { c: Rational },
    TwoNode { w: Rational },
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitRecipe {
    /// Numerators uniform on `[lo*denom, hi*denom]`, values `num/denom`.
    UniformRange { lo: i64, hi: i64, denom: i64 },
    /// Draw `n-1` values uniformly, then pick the last so the fractional
    /// part of the average equals `target` exactly.
    ForcedFractional { target: Rational, lo: i64, hi: i64, denom: i64 },
    /// Integer average plus a persistent 1/7 decimal component, so exact
    /// consensus is unreachable and the run must terminate in a cycle.
    EngineeredCycle,
    Explicit(Vec<Rational>),
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub graph: GraphFamily,
    pub n: usize,
    pub weights: WeightScheme,
    pub quantizer: QuantizerKind,
    pub init: InitRecipe,
    pub runs: usize,
    pub base_seed: u64,
    pub max_iters: usize,
    pub out_dir: Option<PathBuf>,
    /// Number of runs (by index order) whose full traces are written out.
    pub trace_sample: usize,
    pub force: bool,
}

impl ExperimentConfig {
    pub fn new(graph: GraphFamily, n: usize) -> Self {
        Self {
            graph,
            n,
            weights: WeightScheme::Modified { c: rat_int(2) },
            quantizer: QuantizerKind::truncation(),
            init: InitRecipe::UniformRange { lo: 0, hi: 100, denom: 100 },
            runs: 20,
            base_seed: 1,
            max_iters: 500_000,
            out_dir: None,
            trace_sample: 0,
            force: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::ParameterOutOfRange("runs must be >= 1".into()));
        }
        if self.n == 0 {
            return Err(Error::ParameterOutOfRange("n must be >= 1".into()));
        }
        if let InitRecipe::Explicit(x0) = &self.init {
            if x0.len() != self.n {
                return Err(Error::ParameterOutOfRange(
                    "explicit initial state length must equal n".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn run_seed(&self, run: usize) -> u64 {
        self.base_seed.wrapping_add((run as u64).wrapping_mul(SEED_STRIDE))
    }
}

/// Everything retained from one run; aggregates are recomputed from these.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    pub verdict: Option<Verdict>,
    pub t_conv: Option<usize>,
    pub d_inf_squared: Option<Rational>,
    pub d_inf: Option<f64>,
    /// `max_i |x_i - x_ave|` over the terminal regime.
    pub terminal_deviation: Option<Rational>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub label: String,
    pub records: Vec<RunRecord>,
    pub consensus: usize,
    pub cycle: usize,
    pub undecided: usize,
    pub failures: usize,
    pub mean_t_conv: Option<f64>,
    pub mean_d_inf: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub cells: Vec<CellResult>,
}

impl SweepResult {
    /// `sweep.csv` schema: one row per cell.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("parameter,runs,consensus,cycle,undecided,failures,mean_t_conv,mean_d_inf\n");
        for c in &self.cells {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                c.label,
                c.records.len(),
                c.consensus,
                c.cycle,
                c.undecided,
                c.failures,
                c.mean_t_conv.map(|v| v.to_string()).unwrap_or_default(),
                c.mean_d_inf.map(|v| v.to_string()).unwrap_or_default(),
            )
            .unwrap();
        }
        out
    }
}

/// Materialize the configured graph for one seeded run.
pub fn build_graph(cfg: &ExperimentConfig, seed: u64) -> Result<Graph> {
    match &cfg.graph {
        GraphFamily::ErdosRenyi { p } => Graph::erdos_renyi(cfg.n, p, seed),
        GraphFamily::RandomGeometric { radius } => {
            Graph::random_geometric(cfg.n, radius, seed).map(|(g, _)| g)
        }
        GraphFamily::RandomGeometricScaled { c } => {
            Graph::random_geometric_c(cfg.n, *c, seed).map(|(g, _)| g)
        }
        GraphFamily::Path => Graph::path(cfg.n),
        GraphFamily::CompleteBipartite => Graph::complete_bipartite(cfg.n / 2, cfg.n - cfg.n / 2),
        GraphFamily::File(path) => Graph::from_edge_list(&std::fs::read_to_string(path)?),
    }
}

/// Materialize the configured weight matrix on a graph.
pub fn build_weights(cfg: &ExperimentConfig, g: &Graph) -> Result<WeightMatrix> {
    match &cfg.weights {
        WeightScheme::Metropolis => Ok(weights::metropolis(g)),
        WeightScheme::Modified { c } => weights::modified_metropolis(g, c),
        WeightScheme::TwoNode { w } => weights::two_node_cyclic(w),
        WeightScheme::File(path) => WeightMatrix::from_triplet_text(&std::fs::read_to_string(path)?),
    }
}

/// Draw the initial state for one seeded run (deterministic in the seed).
pub fn draw_initial(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<Rational>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ INIT_STREAM);
    let n = cfg.n;
    match &cfg.init {
        InitRecipe::Explicit(x0) => Ok(x0.clone()),
        InitRecipe::UniformRange { lo, hi, denom } => {
            uniform_draw(&mut rng, n, *lo, *hi, *denom)
        }
        InitRecipe::ForcedFractional { target, lo, hi, denom } => {
            let mut x = uniform_draw(&mut rng, n.saturating_sub(1), *lo, *hi, *denom)?;
            // Pick the last value so x_ave = q + target for the smallest
            // integer q keeping it nonnegative.
            let partial: Rational = x.iter().sum();
            let n_rat = rat_int(n as i64);
            let q = (&partial / &n_rat - target).ceil();
            let last = &n_rat * (q + target) - partial;
            debug_assert!(!last.is_negative());
            x.push(last);
            Ok(x)
        }
        InitRecipe::EngineeredCycle => {
            // Integer parts plus r_i/7 decimals with sum divisible by 7; the
            // last integer part absorbs the remainder mod n so x_ave is an
            // exact integer. Modified Metropolis denominators never contain
            // 7 on low-degree graphs, so the 1/7 component can never cancel
            // and consensus (all values equal to the integer average) is
            // impossible.
            let mut ints: Vec<i64> = (0..n).map(|_| rng.gen_range(0..20i64)).collect();
            let mut sevenths: Vec<i64> = (0..n - 1).map(|_| rng.gen_range(1..7i64)).collect();
            let rem = sevenths.iter().sum::<i64>() % 7;
            sevenths.push((7 - rem) % 7);
            if sevenths.iter().all(|r| *r == 0) {
                sevenths[0] = 7; // keep at least one persistent decimal
            }
            let total: i64 =
                ints.iter().sum::<i64>() + sevenths.iter().sum::<i64>() / 7;
            let shortfall = (n as i64 - total % n as i64) % n as i64;
            ints[n - 1] += shortfall;
            Ok(ints
                .iter()
                .zip(&sevenths)
                .map(|(a, r)| rat_int(*a) + rat(*r, 7))
                .collect())
        }
    }
}

fn uniform_draw(rng: &mut ChaCha8Rng, count: usize, lo: i64, hi: i64, denom: i64) -> Result<Vec<Rational>> {
    if denom <= 0 || hi < lo {
        return Err(Error::ParameterOutOfRange("initial range is empty".into()));
    }
    Ok((0..count)
        .map(|_| rat(rng.gen_range(lo * denom..=hi * denom), denom))
        .collect())
}

fn effective_quantizer(cfg: &ExperimentConfig, seed: u64) -> QuantizerKind {
    let mut q = cfg.quantizer.clone();
    if let Variant::Probabilistic { .. } = q.variant {
        q.variant = Variant::Probabilistic { seed: seed ^ SEED_STRIDE };
    }
    q
}

/// `max_i |x_i - x_ave|` over the terminal regime (fixed point or one cycle
/// period); `None` when undecided.
pub fn terminal_deviation(trace: &Trace) -> Option<Rational> {
    let n = trace.n;
    let x_ave = state_sum(&trace.states.first()?.x) / rat_int(n as i64);
    let range = match &trace.verdict {
        Verdict::QuantizedConsensus { k0, .. } => *k0..k0 + 1,
        Verdict::Cycle { t_conv, period } => *t_conv..t_conv + period,
        Verdict::Undecided { .. } => return None,
    };
    range
        .flat_map(|k| trace.state(k))
        .flat_map(|s| s.x.iter().map(|xi| (xi - &x_ave).abs()))
        .max()
}

/// Run one seeded instance end to end; returns the record and the trace.
pub fn run_single(cfg: &ExperimentConfig, run: usize) -> (RunRecord, Option<Trace>) {
    let seed = cfg.run_seed(run);
    let mut record = RunRecord {
        run,
        seed,
        verdict: None,
        t_conv: None,
        d_inf_squared: None,
        d_inf: None,
        terminal_deviation: None,
        error: None,
    };
    let attempt = || -> Result<Trace> {
        let g = build_graph(cfg, seed)?;
        let w = build_weights(cfg, &g)?;
        let x0 = draw_initial(cfg, seed)?;
        let opts = SimOptions { max_iters: cfg.max_iters, force: cfg.force, ..Default::default() };
        simulate(&w, &g, &effective_quantizer(cfg, seed), &x0, &opts)
    };
    match attempt() {
        Ok(trace) => {
            record.verdict = Some(trace.verdict.clone());
            record.t_conv = trace.verdict.t_conv();
            if let Ok(d) = d_infinity(&trace) {
                record.d_inf = Some(d.value);
                record.d_inf_squared = Some(d.squared);
            }
            record.terminal_deviation = terminal_deviation(&trace);
            (record, Some(trace))
        }
        Err(e) => {
            record.error = Some(e.to_string());
            (record, None)
        }
    }
}

fn aggregate(label: &str, records: Vec<RunRecord>) -> CellResult {
    let mut consensus = 0;
    let mut cycle = 0;
    let mut undecided = 0;
    let mut failures = 0;
    let mut t_sum = 0f64;
    let mut t_count = 0usize;
    let mut d_sum = 0f64;
    let mut d_count = 0usize;
    for r in &records {
        match &r.verdict {
            Some(Verdict::QuantizedConsensus { .. }) => consensus += 1,
            Some(Verdict::Cycle { .. }) => cycle += 1,
            Some(Verdict::Undecided { .. }) => undecided += 1,
            None => failures += 1,
        }
        if let Some(t) = r.t_conv {
            t_sum += t as f64;
            t_count += 1;
        }
        if let Some(d) = r.d_inf {
            d_sum += d;
            d_count += 1;
        }
    }
    CellResult {
        label: label.to_string(),
        records,
        consensus,
        cycle,
        undecided,
        failures,
        mean_t_conv: (t_count > 0).then(|| t_sum / t_count as f64),
        mean_d_inf: (d_count > 0).then(|| d_sum / d_count as f64),
    }
}

fn record_json(r: &RunRecord) -> serde_json::Value {
    serde_json::json!({
        "run": r.run,
        "seed": r.seed,
        "verdict": r.verdict.as_ref().map(|v| v.to_json_value()),
        "t_conv": r.t_conv,
        "d_inf": r.d_inf,
        "d_inf_squared": r.d_inf_squared.as_ref().map(|q| format!("{}/{}", q.numer(), q.denom())),
        "terminal_deviation": r
            .terminal_deviation
            .as_ref()
            .map(|q| format!("{}/{}", q.numer(), q.denom())),
        "error": r.error,
    })
}

/// Execute one cell (all runs of one config), parallel over runs.
/// Per-run failures are recorded in the cell, not fatal.
pub fn run_cell(cfg: &ExperimentConfig, label: &str) -> Result<CellResult> {
    cfg.validate()?;
    let outputs: Vec<(RunRecord, Option<Trace>)> =
        (0..cfg.runs).into_par_iter().map(|run| run_single(cfg, run)).collect();
    if let Some(dir) = &cfg.out_dir {
        write_cell_artifacts(dir, label, cfg, &outputs)?;
    }
    Ok(aggregate(label, outputs.into_iter().map(|(r, _)| r).collect()))
}

fn write_cell_artifacts(
    dir: &Path,
    label: &str,
    cfg: &ExperimentConfig,
    outputs: &[(RunRecord, Option<Trace>)],
) -> Result<()> {
    let cell_dir = if label.is_empty() { dir.to_path_buf() } else { dir.join(label) };
    let runs_dir = cell_dir.join("runs");
    std::fs::create_dir_all(&runs_dir)?;
    for (r, trace) in outputs {
        let path = runs_dir.join(format!("{}.json", r.seed));
        std::fs::write(path, serde_json::to_string_pretty(&record_json(r))?.as_bytes())?;
        if r.run < cfg.trace_sample {
            if let Some(t) = trace {
                let traces_dir = cell_dir.join("traces");
                std::fs::create_dir_all(&traces_dir)?;
                std::fs::write(traces_dir.join(format!("{}.csv", r.seed)), t.to_csv())?;
            }
        }
    }
    Ok(())
}

/// Run a single-cell experiment, writing artifacts when an output directory
/// is configured.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<SweepResult> {
    let cell = run_cell(cfg, "")?;
    let result = SweepResult { cells: vec![cell] };
    if let Some(dir) = &cfg.out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("sweep.csv"), result.to_csv())?;
    }
    Ok(result)
}

/// Run a labelled multi-cell sweep (one config per cell).
pub fn run_sweep(cells: &[(String, ExperimentConfig)], out_dir: Option<&Path>) -> Result<SweepResult> {
    let mut out = Vec::with_capacity(cells.len());
    for (label, cfg) in cells {
        out.push(run_cell(cfg, label)?);
    }
    let result = SweepResult { cells: out };
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("sweep.csv"), result.to_csv())?;
    }
    Ok(result)
}

/// One cell of the precision/speed sweep over C.
#[derive(Debug, Clone)]
pub struct CSweepCell {
    pub c: Rational,
    /// Largest terminal deviation `max_i |x_i - x_ave|` across the cell.
    pub max_deviation: Rational,
    /// The guaranteed bound `2/C`.
    pub bound: Rational,
    pub mean_t_conv: Option<f64>,
    pub cell: CellResult,
}

/// Sweep the weight-scaling constant C on matched seeds: larger C tightens
/// the terminal neighborhood of the average (deviation <= 2/C) at the cost
/// of slower convergence. Errors if any cell's deviation exceeds its bound.
pub fn sweep_c(base: &ExperimentConfig, c_values: &[Rational]) -> Result<Vec<CSweepCell>> {
    let mut out = Vec::with_capacity(c_values.len());
    for c in c_values {
        if c < &rat_int(2) {
            return Err(Error::ParameterOutOfRange("C must be >= 2".into()));
        }
        let mut cfg = base.clone();
        cfg.weights = WeightScheme::Modified { c: c.clone() };
        let cell = run_cell(&cfg, &format!("C={c}"))?;
        let bound = rat_int(2) / c;
        let mut max_deviation = Rational::zero();
        for r in &cell.records {
            let dev = r.terminal_deviation.as_ref().ok_or_else(|| {
                Error::InternalInconsistency(format!(
                    "C={c} run {} did not reach a terminal regime",
                    r.run
                ))
            })?;
            if dev > &bound {
                return Err(Error::InternalInconsistency(format!(
                    "C={c} run {}: terminal deviation {dev} exceeds bound {bound}",
                    r.run
                )));
            }
            if dev > &max_deviation {
                max_deviation = dev.clone();
            }
        }
        out.push(CSweepCell {
            c: c.clone(),
            max_deviation,
            bound,
            mean_t_conv: cell.mean_t_conv,
            cell,
        });
    }
    Ok(out)
}

/// Parse the flat key-value config format (`key = value`, `#` comments).
///
/// Keys: `graph` (er|rgg|rgg-scaled|path|bipartite|file), `n`, `p`,
/// `radius`, `c_scale`, `graph_file`, `weights` (metropolis|modified|
/// two-node|file), `C`, `w`, `weights_file`, `quantizer` (trunc|ceil|round|
/// prob), `step`, `quantizer_seed`, `init` (uniform|forced|engineered-cycle|
/// explicit), `lo`, `hi`, `denom`, `target`, `x0` (comma-separated),
/// `runs`, `seed`, `max_iters`, `out_dir`, `trace_sample`, `force`.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut kv = std::collections::BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("config line {}: expected key = value", lineno + 1)))?;
        kv.insert(key.trim().to_string(), value.trim().to_string());
    }
    let get = |k: &str| kv.get(k).map(String::as_str);
    let req = |k: &str| get(k).ok_or_else(|| Error::Parse(format!("config: missing key `{k}`")));
    let parse_usize = |k: &str, v: &str| {
        v.parse::<usize>().map_err(|_| Error::Parse(format!("config: `{k}` must be an integer")))
    };

    let n = parse_usize("n", req("n")?)?;
    let graph = match req("graph")? {
        "er" => GraphFamily::ErdosRenyi { p: parse_rational(req("p")?)? },
        "rgg" => GraphFamily::RandomGeometric { radius: parse_rational(req("radius")?)? },
        "rgg-scaled" => GraphFamily::RandomGeometricScaled {
            c: req("c_scale")?
                .parse::<f64>()
                .map_err(|_| Error::Parse("config: `c_scale` must be a number".into()))?,
        },
        "path" => GraphFamily::Path,
        "bipartite" => GraphFamily::CompleteBipartite,
        "file" => GraphFamily::File(PathBuf::from(req("graph_file")?)),
        other => return Err(Error::Parse(format!("config: unknown graph family `{other}`"))),
    };
    let weights = match get("weights").unwrap_or("modified") {
        "metropolis" => WeightScheme::Metropolis,
        "modified" => WeightScheme::Modified {
            c: parse_rational(get("C").unwrap_or("2"))?,
        },
        "two-node" => WeightScheme::TwoNode { w: parse_rational(req("w")?)? },
        "file" => WeightScheme::File(PathBuf::from(req("weights_file")?)),
        other => return Err(Error::Parse(format!("config: unknown weight scheme `{other}`"))),
    };
    let step = parse_rational(get("step").unwrap_or("1"))?;
    let quantizer = match get("quantizer").unwrap_or("trunc") {
        "trunc" => QuantizerKind::new(Variant::Truncation, step)?,
        "ceil" => QuantizerKind::new(Variant::Ceiling, step)?,
        "round" => QuantizerKind::new(Variant::Rounding, step)?,
        "prob" => {
            let seed = get("quantizer_seed").unwrap_or("0").parse::<u64>().map_err(|_| {
                Error::Parse("config: `quantizer_seed` must be an integer".into())
            })?;
            QuantizerKind::new(Variant::Probabilistic { seed }, step)?
        }
        other => return Err(Error::Parse(format!("config: unknown quantizer `{other}`"))),
    };
    let parse_i64 = |k: &str, default: i64| -> Result<i64> {
        match get(k) {
            Some(v) => v.parse::<i64>().map_err(|_| Error::Parse(format!("config: `{k}` must be an integer"))),
            None => Ok(default),
        }
    };
    let init = match get("init").unwrap_or("uniform") {
        "uniform" => InitRecipe::UniformRange {
            lo: parse_i64("lo", 0)?,
            hi: parse_i64("hi", 100)?,
            denom: parse_i64("denom", 100)?,
        },
        "forced" => InitRecipe::ForcedFractional {
            target: parse_rational(get("target").unwrap_or("1/2"))?,
            lo: parse_i64("lo", 0)?,
            hi: parse_i64("hi", 100)?,
            denom: parse_i64("denom", 100)?,
        },
        "engineered-cycle" => InitRecipe::EngineeredCycle,
        "explicit" => InitRecipe::Explicit(
            req("x0")?
                .split(',')
                .map(|s| parse_rational(s.trim()))
                .collect::<Result<Vec<_>>>()?,
        ),
        other => return Err(Error::Parse(format!("config: unknown init recipe `{other}`"))),
    };
    let mut cfg = ExperimentConfig::new(graph, n);
    cfg.weights = weights;
    cfg.quantizer = quantizer;
    cfg.init = init;
    cfg.runs = match get("runs") {
        Some(v) => parse_usize("runs", v)?,
        None => cfg.runs,
    };
    cfg.base_seed = match get("seed") {
        Some(v) => v.parse::<u64>().map_err(|_| Error::Parse("config: `seed` must be an integer".into()))?,
        None => cfg.base_seed,
    };
    cfg.max_iters = match get("max_iters") {
        Some(v) => parse_usize("max_iters", v)?,
        None => cfg.max_iters,
    };
    cfg.out_dir = get("out_dir").map(PathBuf::from);
    cfg.trace_sample = match get("trace_sample") {
        Some(v) => parse_usize("trace_sample", v)?,
        None => cfg.trace_sample,
    };
    cfg.force = matches!(get("force"), Some("true") | Some("1"));
    cfg.validate()?;
    Ok(cfg)
}
