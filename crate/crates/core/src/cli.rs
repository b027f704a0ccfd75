//! The `jtprop` command line: compile, infer, stats, bench and selftest.
//!
//! Exit codes: 0 success, 1 internal error or failed check, 2 input error,
//! 3 impossible evidence.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::compile::{
    compile, load_tree, tree_stats, CompileOptions, JunctionTree, Layout, StatsReport, TreeDump, DUMP_FORMAT,
};
use crate::error::{Error, Result};
use crate::model::{BayesianNetwork, Evidence};
use crate::oracle::{enumerate_joint_capped, oracle_marginals};
use crate::parser::{load_document, parse_native_document, SourceFormat};
use crate::perfmodel::{self, estimate_tau, spearman, tree_cost, tree_cost_capped, TauFit, TimingSample};
use crate::potential::PotentialTable;
use crate::propagate::{Engine, Message, PropagationState, DEFAULT_PARALLEL_THRESHOLD};
use crate::synth::{self, avg_separator_size, FamilySpec, GenSpec, TreeProfile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_IMPOSSIBLE_EVIDENCE: i32 = 3;

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::ZeroMass => EXIT_IMPOSSIBLE_EVIDENCE,
        Error::InconsistentDivision { .. }
        | Error::InvalidMessage { .. }
        | Error::IndexOutOfRange { .. }
        | Error::AssignmentLength { .. }
        | Error::DuplicateScopeVariable(_)
        | Error::ScopeNotContained
        | Error::InsufficientSamples => EXIT_INTERNAL,
        _ => EXIT_INPUT,
    }
}

#[derive(Debug, Parser)]
#[command(name = "jtprop", version, about = "Junction-tree belief propagation with a data-parallel message engine")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compile a network into a junction-tree file.
    Compile(CompileArgs),
    /// Posterior marginals for a network or compiled tree.
    Infer(InferArgs),
    /// Tree statistics, separator-size histogram and cost predictions.
    Stats(StatsArgs),
    /// Time both engines on generated or supplied trees.
    Bench(BenchArgs),
    /// Check propagation against brute-force enumeration on random networks.
    Selftest(SelftestArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EngineKind {
    Sequential,
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct EngineArgs {
    #[arg(long, value_enum, default_value = "sequential")]
    pub engine: EngineKind,
    /// Worker threads for the parallel engine [default: number of CPUs]
    #[arg(long, env = "JTPROP_WORKERS", value_parser = clap::value_parser!(u64).range(1..))]
    pub workers: Option<u64>,
    /// Separators with fewer entries run on the calling thread.
    #[arg(long, default_value_t = DEFAULT_PARALLEL_THRESHOLD)]
    pub threshold: usize,
    #[arg(long, value_parser = parse_layout)]
    pub layout: Option<Layout>,
}

fn parse_layout(s: &str) -> std::result::Result<Layout, String> {
    s.parse().map_err(|_| format!("unknown layout `{s}` (expected flat or interleaved)"))
}

#[derive(Debug, Clone, Args)]
pub struct CompileArgs {
    pub input: PathBuf,
    #[arg(short, long)]
    pub out: PathBuf,
    #[arg(long, value_parser = parse_layout, default_value = "flat")]
    pub layout: Layout,
    /// Store mapping tables in the dump.
    #[arg(long)]
    pub with_mappings: bool,
    #[arg(long, value_enum, default_value = "text")]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, Args)]
pub struct InferArgs {
    /// A `.net`, `.bn.json` or compiled-tree file.
    pub input: PathBuf,
    /// Observation `VAR=STATE`; STATE is a label or an index.
    #[arg(short, long)]
    pub evidence: Vec<String>,
    /// Variables to report [default: all].
    #[arg(short, long)]
    pub query: Vec<String>,
    #[command(flatten)]
    pub engine: EngineArgs,
    #[arg(long, value_enum, default_value = "text")]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, Args)]
pub struct StatsArgs {
    pub input: PathBuf,
    /// Launch overheads, in operations, for the speedup predictions.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 1.0, 10.0, 100.0, 1000.0])]
    pub tau: Vec<f64>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Network or tree files to time instead of a generated family.
    pub inputs: Vec<PathBuf>,
    #[arg(long, default_value = "mixed")]
    pub profile: TreeProfile,
    #[arg(long, default_value_t = 5)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Approximate clique-table entries per generated tree.
    #[arg(long, default_value_t = 1 << 21)]
    pub budget: usize,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub repeats: u64,
    /// Messages timed per tree for the overhead fit.
    #[arg(long, default_value_t = 16)]
    pub tau_samples: usize,
    #[command(flatten)]
    pub engine: EngineArgs,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: OutputFormat,
    /// Verify engine equivalence, the cost-model bound and the speedup trend.
    #[arg(long)]
    pub check: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SelftestArgs {
    #[arg(long, default_value_t = 200)]
    pub networks: usize,
    #[arg(long, default_value_t = 3)]
    pub evidence_sets: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = "JTPROP_WORKERS", value_parser = clap::value_parser!(u64).range(1..))]
    pub workers: Option<u64>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: OutputFormat,
}

/// Settings shared by the commands after flag and environment resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub inputs: Vec<PathBuf>,
    pub engine: Engine,
    pub workers: usize,
    pub layout: Option<Layout>,
    pub threshold: usize,
    pub format: OutputFormat,
    pub seed: u64,
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

impl EngineArgs {
    fn workers(&self) -> usize {
        self.workers.map_or_else(default_workers, |w| w as usize)
    }

    fn resolve(&self) -> Engine {
        match self.engine {
            EngineKind::Sequential => Engine::Sequential,
            EngineKind::Parallel => Engine::Parallel { workers: self.workers(), threshold: self.threshold },
        }
    }

    fn config(&self, inputs: Vec<PathBuf>, format: OutputFormat, seed: u64) -> RunConfig {
        RunConfig {
            inputs,
            engine: self.resolve(),
            workers: self.workers(),
            layout: self.layout,
            threshold: self.threshold,
            format,
            seed,
        }
    }
}

/// A failure with its exit code; the message goes to stderr.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let message = match &e {
            Error::ZeroMass => format!("impossible evidence: {e}"),
            _ => e.to_string(),
        };
        Failure { code: exit_code(&e), message }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { code: EXIT_INTERNAL, message: e.to_string() }
    }
}

type CmdResult = std::result::Result<(), Failure>;

/// Entry point for the binary.
pub fn main() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Compile(a) => cmd_compile(a, out),
        Command::Infer(a) => cmd_infer(a, out),
        Command::Stats(a) => cmd_stats(a, out),
        Command::Bench(a) => cmd_bench(a, out, err),
        Command::Selftest(a) => cmd_selftest(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

/// A network with its compiled tree and state labels.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub network: BayesianNetwork,
    pub tree: JunctionTree,
    pub labels: Vec<Vec<String>>,
}

fn is_tree_dump(text: &str) -> Option<serde_json::Value> {
    let v: serde_json::Value = serde_json::from_str(text).ok()?;
    (v.get("format")?.as_str()? == DUMP_FORMAT).then_some(v)
}

/// Loads a compiled tree, or compiles a network file. `layout` overrides the
/// tree's mapping layout when given.
pub fn load_input(path: &Path, layout: Option<Layout>) -> Result<Loaded> {
    if SourceFormat::from_path(path) == Some(SourceFormat::NativeJson) {
        let text = String::from_utf8_lossy(&std::fs::read(path)?).into_owned();
        if let Some(dump) = is_tree_dump(&text) {
            let (network, mut tree) = load_tree(&text)?;
            let labels = parse_native_document(&dump["network"].to_string())?.state_labels;
            if let Some(l) = layout {
                tree.relayout(l);
            }
            return Ok(Loaded { network, tree, labels });
        }
    }
    let doc = load_document(path)?;
    let tree = compile(&doc.network, CompileOptions { layout: layout.unwrap_or_default() })?;
    Ok(Loaded { network: doc.network, tree, labels: doc.state_labels })
}

fn stats_row(r: &StatsReport) -> String {
    let mut s = format!("nodes={}", r.nodes);
    for (tag, t) in [("cpt", r.clique_tables), ("spt", r.separator_tables)] {
        match t {
            Some(t) => write!(s, " {tag}_max={} {tag}_min={} {tag}_avg={:.2}", t.max, t.min, t.avg).unwrap(),
            None => write!(s, " {tag}_max=- {tag}_min=- {tag}_avg=-").unwrap(),
        }
    }
    s
}

fn json_line(out: &mut dyn Write, value: &impl Serialize) -> CmdResult {
    let text =
        serde_json::to_string_pretty(value).map_err(|e| Failure { code: EXIT_INTERNAL, message: e.to_string() })?;
    writeln!(out, "{text}")?;
    Ok(())
}

pub fn cmd_compile(a: &CompileArgs, out: &mut dyn Write) -> CmdResult {
    let doc = load_document(&a.input)?;
    let tree = compile(&doc.network, CompileOptions { layout: a.layout })?;
    let dump = TreeDump::new(&doc.network, &tree, a.with_mappings);
    std::fs::write(&a.out, dump.to_json()).map_err(Error::from)?;
    let stats = tree_stats(&tree);
    match a.format {
        OutputFormat::Json => json_line(out, &stats)?,
        _ => writeln!(out, "{}", stats_row(&stats))?,
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginalReport {
    pub variable: String,
    pub states: Vec<String>,
    pub probabilities: Vec<f64>,
}

/// Posterior marginals for the named variables (all when `queries` is empty),
/// in query order.
pub fn infer(loaded: &Loaded, evidence: &[String], queries: &[String], engine: Engine) -> Result<Vec<MarginalReport>> {
    let net = &loaded.network;
    let mut ev = Evidence::new();
    for spec in evidence {
        ev.observe_named(net, &loaded.labels, spec)?;
    }
    let vars: Vec<usize> = if queries.is_empty() {
        (0..net.len()).collect()
    } else {
        queries.iter().map(|q| net.find(q).ok_or_else(|| Error::UnknownVariable(q.clone()))).collect::<Result<_>>()?
    };
    let mut state = PropagationState::initialize(&loaded.tree, net, engine)?;
    state.apply_evidence(&ev)?;
    state.belief_propagation()?;
    vars.iter()
        .map(|&v| {
            let m = state.query_marginal(v, true)?;
            Ok(MarginalReport {
                variable: net.variable(v).name.clone(),
                states: loaded.labels.get(v).cloned().unwrap_or_default(),
                probabilities: m.values().to_vec(),
            })
        })
        .collect()
}

pub fn cmd_infer(a: &InferArgs, out: &mut dyn Write) -> CmdResult {
    let cfg = a.engine.config(vec![a.input.clone()], a.format, 0);
    let loaded = load_input(&a.input, cfg.layout)?;
    let marginals = infer(&loaded, &a.evidence, &a.query, cfg.engine)?;
    match a.format {
        OutputFormat::Json => json_line(out, &serde_json::json!({ "marginals": marginals }))?,
        OutputFormat::Csv => {
            writeln!(out, "variable,state,probability")?;
            for m in &marginals {
                for (s, p) in m.states.iter().zip(&m.probabilities) {
                    writeln!(out, "{},{},{:?}", m.variable, s, p)?;
                }
            }
        }
        OutputFormat::Text => {
            for m in &marginals {
                writeln!(out, "{}: {:?}", m.variable, m.probabilities)?;
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct StatsOutput {
    stats: StatsReport,
    cost: perfmodel::CostReport,
}

pub fn cmd_stats(a: &StatsArgs, out: &mut dyn Write) -> CmdResult {
    let loaded = load_input(&a.input, None)?;
    let stats = tree_stats(&loaded.tree);
    let cost = perfmodel::cost_report(&loaded.tree, &a.tau);
    match a.format {
        OutputFormat::Json => json_line(out, &StatsOutput { stats, cost })?,
        OutputFormat::Csv => {
            writeln!(out, "nodes,cpt_max,cpt_min,cpt_avg,spt_max,spt_min,spt_avg")?;
            let cell = |t: Option<crate::compile::SizeSummary>| match t {
                Some(t) => format!("{},{},{:.2}", t.max, t.min, t.avg),
                None => ",,".to_string(),
            };
            writeln!(out, "{},{},{}", stats.nodes, cell(stats.clique_tables), cell(stats.separator_tables))?;
        }
        OutputFormat::Text => {
            writeln!(out, "{}", stats_row(&stats))?;
            writeln!(out, "separator histogram:")?;
            for b in &stats.separator_histogram {
                writeln!(out, "  [{}, {}) {}", b.lo, b.hi, b.count)?;
            }
            writeln!(out, "predicted speedup:")?;
            for e in &cost.tau_sweep {
                writeln!(
                    out,
                    "  tau={} sequential={} parallel={:.1} speedup={:.3}",
                    e.tau, e.sequential, e.parallel, e.speedup
                )?;
            }
        }
    }
    Ok(())
}

/// One tree to time, with its initial clique potentials.
#[derive(Debug, Clone)]
pub struct BenchCase {
    pub name: String,
    pub tree: JunctionTree,
    pub potentials: Vec<PotentialTable>,
}

impl BenchCase {
    pub fn from_loaded(name: String, loaded: &Loaded) -> Result<Self> {
        let state = PropagationState::initialize(&loaded.tree, &loaded.network, Engine::Sequential)?;
        Ok(BenchCase { name, tree: loaded.tree.clone(), potentials: state.clique_potentials().to_vec() })
    }
}

pub fn family_cases(spec: &FamilySpec) -> Vec<BenchCase> {
    synth::gen_tree_family(spec)
        .into_iter()
        .map(|t| BenchCase { name: t.name, tree: t.tree, potentials: t.potentials })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchConfig {
    pub repeats: usize,
    pub workers: usize,
    pub threshold: usize,
    pub layout: Option<Layout>,
    pub tau_samples: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            repeats: 10,
            workers: default_workers(),
            threshold: DEFAULT_PARALLEL_THRESHOLD,
            layout: None,
            tau_samples: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub tree: String,
    pub n_cliques: usize,
    pub avg_spt: f64,
    pub min_spt: usize,
    pub max_spt: usize,
    pub seq_ms: f64,
    pub par_ms: f64,
    pub speedup: f64,
    pub pred_speedup: f64,
    /// Predicted speedup with no launch overhead and unlimited lanes.
    pub pred_speedup_tau0: f64,
    pub tau_est: f64,
    pub overhead_frac: f64,
    /// Sequential and parallel potentials were bit-identical.
    pub identical: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub workers: usize,
    pub threshold: usize,
    pub repeats: usize,
    pub tau_fit: Option<TauFit>,
    pub rows: Vec<BenchRow>,
}

pub fn median(xs: &mut [f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn bits(state: &PropagationState<'_>) -> Vec<u64> {
    state
        .clique_potentials()
        .iter()
        .chain(state.separator_potentials())
        .flat_map(|p| p.values().iter().map(|x| x.to_bits()))
        .collect()
}

struct Timed {
    seq_ms: f64,
    par_ms: f64,
    identical: bool,
    samples: Vec<TimingSample>,
}

fn time_case(case: &BenchCase, tree: &JunctionTree, cfg: &BenchConfig) -> Result<Timed> {
    let engine = Engine::Parallel { workers: cfg.workers, threshold: cfg.threshold };
    let (mut seq, mut par) = (Vec::new(), Vec::new());
    let mut identical = true;
    for _ in 0..cfg.repeats.max(1) {
        let mut s = PropagationState::from_potentials(tree, case.potentials.clone(), Engine::Sequential)?;
        let t = Instant::now();
        s.belief_propagation()?;
        seq.push(ms_since(t));

        let mut p = PropagationState::from_potentials(tree, case.potentials.clone(), engine)?;
        let t = Instant::now();
        p.belief_propagation()?;
        par.push(ms_since(t));
        identical &= bits(&s) == bits(&p);
    }

    // per-message timings for the overhead fit, on a propagated state
    let mut samples = Vec::new();
    if cfg.tau_samples > 0 && !tree.separators.is_empty() {
        let mut p = PropagationState::from_potentials(tree, case.potentials.clone(), engine)?;
        p.belief_propagation()?;
        let step = tree.separators.len().div_ceil(cfg.tau_samples).max(1);
        for s in tree.separators.iter().step_by(step) {
            let msg = Message { source: s.cliques.0, target: s.cliques.1, separator: s.id };
            let mut times = Vec::with_capacity(cfg.repeats);
            for _ in 0..cfg.repeats.max(1) {
                let t = Instant::now();
                p.run_parallel_message(msg, cfg.workers)?;
                times.push(ms_since(t));
            }
            let cost = perfmodel::message_cost(tree, s.id, s.cliques.0);
            samples.push(TimingSample { work: cost.parallel_time_capped(cfg.workers), time: median(&mut times) });
        }
    }
    Ok(Timed { seq_ms: median(&mut seq), par_ms: median(&mut par), identical, samples })
}

/// Times both engines on every case. Overhead τ is fitted once over the
/// per-message samples of all cases and shared by every row.
pub fn run_bench(cases: &[BenchCase], cfg: &BenchConfig) -> Result<BenchReport> {
    let mut timed = Vec::with_capacity(cases.len());
    let mut trees = Vec::with_capacity(cases.len());
    for case in cases {
        let mut tree = case.tree.clone();
        if let Some(l) = cfg.layout {
            tree.relayout(l);
        }
        timed.push(time_case(case, &tree, cfg)?);
        trees.push(tree);
    }
    let samples: Vec<TimingSample> = timed.iter().flat_map(|t| t.samples.iter().copied()).collect();
    let fit = estimate_tau(&samples).ok();
    let rows = cases
        .iter()
        .zip(&trees)
        .zip(&timed)
        .map(|((case, tree), t)| {
            let ideal = tree_cost(tree, 0.0);
            let (pred, tau, frac) = match fit {
                Some(f) if f.throughput.is_finite() => {
                    let pred = tree_cost_capped(tree, f.tau * f.throughput, cfg.workers).speedup;
                    (pred, f.tau, perfmodel::overhead_fraction_capped(tree, f.tau, f.throughput, cfg.workers).fraction)
                }
                Some(f) => (f64::NAN, f.tau, if f.tau > 0.0 && ideal.messages > 0 { 1.0 } else { 0.0 }),
                None => (f64::NAN, f64::NAN, f64::NAN),
            };
            BenchRow {
                tree: case.name.clone(),
                n_cliques: tree.len(),
                avg_spt: avg_separator_size(tree),
                min_spt: ideal.min_separator,
                max_spt: ideal.max_separator,
                seq_ms: t.seq_ms,
                par_ms: t.par_ms,
                speedup: t.seq_ms / t.par_ms,
                pred_speedup: pred,
                pred_speedup_tau0: ideal.speedup,
                tau_est: tau,
                overhead_frac: frac,
                identical: t.identical,
            }
        })
        .collect();
    Ok(BenchReport { workers: cfg.workers, threshold: cfg.threshold, repeats: cfg.repeats, tau_fit: fit, rows })
}

pub const BENCH_CSV_HEADER: &str = "tree,n_cliques,avg_spt,seq_ms,par_ms,speedup,pred_speedup,tau_est,overhead_frac";

pub fn bench_csv(report: &BenchReport) -> String {
    let mut s = format!("{BENCH_CSV_HEADER}\n");
    for r in &report.rows {
        writeln!(
            s,
            "{},{},{:.1},{:.4},{:.4},{:.4},{:.4},{:.6},{:.4}",
            r.tree, r.n_cliques, r.avg_spt, r.seq_ms, r.par_ms, r.speedup, r.pred_speedup, r.tau_est, r.overhead_frac
        )
        .unwrap();
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Correctness and trend checks over a bench report. `family` says the rows
/// come from a generated family, whose separator sizes must increase.
pub fn bench_checks(report: &BenchReport, family: bool) -> Vec<Check> {
    let rows = &report.rows;
    let mut checks = vec![
        Check {
            name: "engines bit-identical".into(),
            passed: rows.iter().all(|r| r.identical),
            detail: format!("{}/{} trees", rows.iter().filter(|r| r.identical).count(), rows.len()),
        },
        Check {
            name: "tau=0 speedup within separator bounds".into(),
            passed: rows.iter().all(|r| {
                r.n_cliques < 2 || (r.min_spt as f64 <= r.pred_speedup_tau0 && r.pred_speedup_tau0 <= r.max_spt as f64)
            }),
            detail: String::new(),
        },
    ];
    if family {
        checks.push(Check {
            name: "separator sizes increase".into(),
            passed: rows.windows(2).all(|w| w[0].avg_spt < w[1].avg_spt),
            detail: rows.iter().map(|r| format!("{:.0}", r.avg_spt)).collect::<Vec<_>>().join(" "),
        });
    }
    let x: Vec<f64> = rows.iter().map(|r| r.avg_spt).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.speedup).collect();
    let rho = spearman(&x, &y);
    checks.push(Check {
        name: "speedup rank-correlates with separator size".into(),
        passed: rho.is_some_and(|r| r > 0.0),
        detail: format!("rho={}", rho.map_or("n/a".to_string(), |r| format!("{r:.3}"))),
    });
    checks
}

pub fn cmd_bench(a: &BenchArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let cfg = a.engine.config(a.inputs.clone(), a.format, a.seed);
    let family = a.inputs.is_empty();
    let cases = if family {
        family_cases(&FamilySpec {
            profile: a.profile,
            count: a.count,
            seed: a.seed,
            budget: a.budget,
            ..Default::default()
        })
    } else {
        a.inputs
            .iter()
            .map(|p| {
                let name = p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned());
                BenchCase::from_loaded(name, &load_input(p, None)?)
            })
            .collect::<Result<_>>()?
    };
    let bc = BenchConfig {
        repeats: a.repeats as usize,
        workers: cfg.workers,
        threshold: cfg.threshold,
        layout: cfg.layout,
        tau_samples: a.tau_samples,
    };
    let report = run_bench(&cases, &bc)?;
    match a.format {
        OutputFormat::Csv => write!(out, "{}", bench_csv(&report))?,
        OutputFormat::Json => json_line(out, &report)?,
        OutputFormat::Text => {
            writeln!(out, "workers={} threshold={} repeats={}", report.workers, report.threshold, report.repeats)?;
            for r in &report.rows {
                writeln!(
                    out,
                    "{}: cliques={} avg_spt={:.1} seq={:.3}ms par={:.3}ms speedup={:.3} predicted={:.3}",
                    r.tree, r.n_cliques, r.avg_spt, r.seq_ms, r.par_ms, r.speedup, r.pred_speedup
                )?;
            }
        }
    }
    if a.check {
        let checks = bench_checks(&report, family);
        for c in &checks {
            writeln!(err, "{} {} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
        }
        if checks.iter().any(|c| !c.passed) {
            return Err(Failure { code: EXIT_INTERNAL, message: "bench check failed".into() });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelftestConfig {
    pub networks: usize,
    pub evidence_sets: usize,
    pub seed: u64,
    pub workers: usize,
    pub max_variables: usize,
    pub tolerance: f64,
}

impl Default for SelftestConfig {
    fn default() -> Self {
        SelftestConfig { networks: 200, evidence_sets: 3, seed: 0, workers: 2, max_variables: 12, tolerance: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelftestReport {
    pub networks: usize,
    pub cases: usize,
    pub marginals_checked: usize,
    pub max_abs_error: f64,
    pub engine_mismatches: usize,
    pub failures: Vec<String>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Random networks (up to `max_variables` variables, cardinalities 2 to 4,
/// at most 3 parents) with random evidence, propagated and compared with
/// enumeration. The parallel engine must reproduce the sequential
/// potentials bit for bit.
pub fn run_selftest(cfg: &SelftestConfig) -> SelftestReport {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = SelftestReport {
        networks: 0,
        cases: 0,
        marginals_checked: 0,
        max_abs_error: 0.0,
        engine_mismatches: 0,
        failures: Vec::new(),
    };
    for i in 0..cfg.networks {
        let spec = GenSpec {
            seed: rng.gen(),
            variables: rng.gen_range(1..=cfg.max_variables.max(1)),
            max_parents: 3,
            card_min: 2,
            card_max: 4,
            ..Default::default()
        };
        let net = synth::gen_network(&spec);
        let evidence: Vec<Evidence> = (0..cfg.evidence_sets)
            .map(|_| {
                let mut e = Evidence::new();
                let k = rng.gen_range(0..=net.len().min(3));
                for v in rand::seq::index::sample(&mut rng, net.len(), k) {
                    let s = rng.gen_range(0..net.cardinality(v));
                    e.observe(&net, v, s).expect("fresh variable");
                }
                e
            })
            .collect();
        report.networks += 1;
        if let Err(e) = selftest_network(&net, &evidence, cfg, &mut report) {
            report.failures.push(format!("network {i} (seed {}): {e}", spec.seed));
        }
    }
    report
}

fn selftest_network(
    net: &BayesianNetwork,
    evidence: &[Evidence],
    cfg: &SelftestConfig,
    report: &mut SelftestReport,
) -> Result<()> {
    let joint = enumerate_joint_capped(net, 1 << 24)?;
    for layout in [Layout::Flat, Layout::Interleaved] {
        let tree = compile(net, CompileOptions { layout })?;
        for ev in evidence {
            let expected = oracle_marginals(&joint, ev)?;
            let mut seq = PropagationState::initialize(&tree, net, Engine::Sequential)?;
            seq.apply_evidence(ev)?;
            seq.belief_propagation()?;
            let mut par = PropagationState::initialize(&tree, net, Engine::parallel_always(cfg.workers))?;
            par.apply_evidence(ev)?;
            par.belief_propagation()?;
            report.cases += 1;
            if bits(&seq) != bits(&par) {
                report.engine_mismatches += 1;
                report.failures.push(format!("engines disagree under {layout:?} layout"));
            }
            for (v, want) in expected.iter().enumerate() {
                let got = seq.query_marginal(v, true)?;
                let err = got.values().iter().zip(want.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                report.max_abs_error = report.max_abs_error.max(err);
                report.marginals_checked += 1;
                if err.is_nan() || err > cfg.tolerance {
                    return Err(Error::SchemaViolation {
                        path: format!("marginal of {}", net.variable(v).name),
                        message: format!("differs from enumeration by {err:e}"),
                    });
                }
            }
        }
    }
    Ok(())
}

pub fn cmd_selftest(a: &SelftestArgs, out: &mut dyn Write) -> CmdResult {
    let cfg = SelftestConfig {
        networks: a.networks,
        evidence_sets: a.evidence_sets,
        seed: a.seed,
        workers: a.workers.map_or_else(default_workers, |w| w as usize),
        ..Default::default()
    };
    let report = run_selftest(&cfg);
    match a.format {
        OutputFormat::Json => json_line(out, &report)?,
        _ => {
            writeln!(
                out,
                "networks={} cases={} marginals={} max_abs_error={:e} engine_mismatches={}",
                report.networks, report.cases, report.marginals_checked, report.max_abs_error, report.engine_mismatches
            )?;
            for f in &report.failures {
                writeln!(out, "FAIL {f}")?;
            }
            writeln!(out, "{}", if report.passed() { "PASS" } else { "FAIL" })?;
        }
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure { code: EXIT_INTERNAL, message: format!("{} selftest failures", report.failures.len()) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures;
    use crate::parser::serialize_native;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(std::iter::once("jtprop").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    fn write_net(dir: &Path, name: &str, net: &BayesianNetwork) -> String {
        let p = dir.join(name);
        std::fs::write(&p, serialize_native(net)).unwrap();
        p.to_str().unwrap().to_string()
    }

    #[test]
    fn infer_single_variable() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_net(dir.path(), "a.bn.json", &fixtures::single([0.3, 0.7]));
        let (code, out, _) = run_args(&["infer", &p]);
        assert_eq!(code, 0);
        assert_eq!(out, "A: [0.3, 0.7]\n");
    }

    #[test]
    fn compile_then_stats_and_infer() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_net(dir.path(), "diamond.bn.json", &fixtures::diamond());
        let jt = dir.path().join("diamond.jt.json");
        let jt = jt.to_str().unwrap();
        let (code, out, _) = run_args(&["compile", &p, "-o", jt, "--layout", "interleaved"]);
        assert_eq!(code, 0);
        assert!(out.starts_with("nodes=2 "), "{out}");
        assert!(std::fs::read_to_string(jt).unwrap().contains("\"layout\": \"interleaved\""));

        let (code, out, _) = run_args(&["stats", jt]);
        assert_eq!(code, 0);
        assert!(out.contains("[4, 8) 1"), "{out}");

        let (_, seq, _) = run_args(&["infer", jt, "--evidence", "D=1"]);
        let (_, par, _) = run_args(&["infer", &p, "--evidence", "D=1", "--engine", "parallel", "--workers", "8"]);
        assert_eq!(seq, par);
        assert_eq!(seq.lines().count(), 4);
    }

    #[test]
    fn exit_codes() {
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("bad.bn.json");
        std::fs::write(&bad, "{ not json").unwrap();
        let (code, _, err) = run_args(&["infer", bad.to_str().unwrap()]);
        assert_eq!(code, 2);
        assert!(err.contains("syntax error"), "{err}");

        let vars = vec![fixtures::var(0, "A", 2)];
        let net =
            BayesianNetwork::new(vars.clone(), vec![crate::model::make_cpt(&vars, 0, vec![], vec![1.0, 0.0]).unwrap()])
                .unwrap();
        let p = write_net(dir.path(), "det.bn.json", &net);
        let (code, _, err) = run_args(&["infer", &p, "--evidence", "A=1"]);
        assert_eq!(code, 3);
        assert!(err.contains("impossible evidence"));

        let (code, _, err) = run_args(&["infer", &p, "--query", "Z"]);
        assert_eq!(code, 2);
        assert!(err.contains("unknown variable"));

        assert_eq!(run_args(&["frobnicate"]).0, 2);
        assert_eq!(run_args(&["infer", &p, "--engine", "parallel", "--workers", "0"]).0, 2);
    }

    #[test]
    fn bench_csv_rows() {
        let (code, out, err) = run_args(&[
            "bench",
            "--profile",
            "large-skewed",
            "--count",
            "5",
            "--budget",
            "65536",
            "--repeats",
            "1",
            "--workers",
            "2",
            "--check",
        ]);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], BENCH_CSV_HEADER);
        assert_eq!(lines.len(), 6);
        let avgs: Vec<f64> = lines[1..].iter().map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
        assert!(avgs.windows(2).all(|w| w[0] < w[1]));
        assert!(err.contains("PASS engines bit-identical"), "{err}");
        assert!(err.contains("PASS tau=0 speedup within separator bounds"));
        // the trend check depends on the machine, so only the exit code contract is asserted
        assert!(code == 0 || code == 1);
    }

    #[test]
    fn small_selftest() {
        let r = run_selftest(&SelftestConfig { networks: 10, ..Default::default() });
        assert!(r.passed(), "{:?}", r.failures);
        assert_eq!(r.cases, 60);
        let (code, out, _) = run_args(&["selftest", "--networks", "3"]);
        assert_eq!(code, 0);
        assert!(out.ends_with("PASS\n"));
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
