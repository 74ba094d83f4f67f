use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pbh::decoder::{serve, Decoder, DecoderConfig};
use pbh::harness::{
    self, bench, gen_lab, override_decoder, plan_strip, read_decoder_config, read_domain, read_manifest, read_problem,
    read_records, run_task, write_plan_file, write_records, write_text, HarnessError, HeuristicSpec, LabDir, RunConfig,
    DECODER_CMD_ENV,
};
use pbh::heuristics::{Metric, ReferenceChoice};
use pbh::imaging::write_pgm;
use pbh::lab::{CorruptionConfig, GroundTruthSpec, LabError, LabManifest};
use pbh::pddl::{self, ParsedDomain};
use pbh::search::{Algorithm, Status};
use pbh::strips::PlanningTask;

const EXIT_USAGE: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_SEARCH: u8 = 3;
const EXIT_NO_PLAN: u8 = 4;

#[derive(Parser)]
#[command(name = "pbh", version, about = "STRIPS planning with plausibility-based heuristics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a lab and write its instance set.
    Gen(GenArgs),
    /// Solve one problem with one configuration.
    Solve(SolveArgs),
    /// Run a cross product of configurations over a lab's instances.
    Bench(BenchArgs),
    /// Render a plan's decoded state trace as a PGM strip.
    Viz(VizArgs),
    /// Summarize plausibility values of expanded states from bench records.
    Stats(StatsArgs),
    /// Serve a decoder config over stdin/stdout using the external protocol.
    ServeDecoder(ServeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Tile,
    Hanoi,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Astar,
    Gbfs,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Astar => Algorithm::Astar,
            AlgorithmArg::Gbfs => Algorithm::Gbfs,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Chi2,
    Kl,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Chi2 => Metric::Chi2,
            MetricArg::Kl => Metric::Kl,
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    /// Tile grid side.
    #[arg(long, default_value_t = 3)]
    n: usize,
    /// Tile patch side in pixels.
    #[arg(long, default_value_t = 6)]
    patch: usize,
    #[arg(long, default_value_t = 4)]
    pegs: usize,
    #[arg(long, default_value_t = 4)]
    disks: usize,
    #[arg(long, default_value_t = 2)]
    disk_height: usize,
    #[arg(long, default_value_t = 2)]
    unit_width: usize,
    #[arg(long, default_value_t = 255)]
    maxval: u32,
    #[arg(long, default_value_t = 20)]
    count: usize,
    /// Exact oracle depth; shorthand for equal --min-depth and --max-depth.
    #[arg(long, conflicts_with_all = ["min_depth", "max_depth"])]
    depth: Option<u64>,
    #[arg(long)]
    min_depth: Option<u64>,
    #[arg(long)]
    max_depth: Option<u64>,
    /// Instance seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Corruption seed (defaults to --seed).
    #[arg(long)]
    lab_seed: Option<u64>,
    #[arg(long, default_value_t = 0.0)]
    spurious_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    weaken_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    duplicate_rate: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ProblemArgs {
    /// Lab directory written by `gen`; pick the problem with --instance.
    #[arg(long, requires = "instance", conflicts_with_all = ["domain", "problem"])]
    lab: Option<PathBuf>,
    #[arg(long)]
    instance: Option<String>,
    #[arg(long, requires = "problem")]
    domain: Option<PathBuf>,
    #[arg(long, requires = "domain")]
    problem: Option<PathBuf>,
    /// Lab manifest; enables validity verdicts.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Decoder configuration (TOML).
    #[arg(long)]
    decoder: Option<PathBuf>,
}

#[derive(Args)]
struct SearchArgs {
    /// Histogram bins.
    #[arg(long, default_value_t = 10)]
    bins: usize,
    /// Multiplier before flooring the divergence (default: 1 for chi2, 1000 for kl).
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    kl_alpha: f64,
    /// Reference state: goal, init, or an explicit 0/1 string.
    #[arg(long, default_value = "goal")]
    reference: String,
    /// Baselines compute and record this metric on expanded nodes without using it.
    #[arg(long, value_enum)]
    record_plausibility: Option<MetricArg>,
    #[arg(long)]
    max_expansions: Option<u64>,
    /// Per-run wall-clock limit in seconds.
    #[arg(long, default_value_t = harness::DEFAULT_RUN_TIMEOUT_SECS)]
    timeout: f64,
    /// Override whether closed nodes may be reopened.
    #[arg(long)]
    reopen: Option<bool>,
    /// Directory for h-value sidecar files of very long runs.
    #[arg(long)]
    sidecar_dir: Option<PathBuf>,
}

impl SearchArgs {
    fn config(&self, algorithm: Algorithm, heuristic: HeuristicSpec) -> RunConfig {
        let mut c = RunConfig::new(algorithm, heuristic);
        c.n_bins = self.bins;
        c.scale = self.scale;
        c.kl_alpha = self.kl_alpha;
        c.reference = match self.reference.as_str() {
            "goal" => ReferenceChoice::Goal,
            "init" => ReferenceChoice::Init,
            bits => ReferenceChoice::Bits(bits.to_string()),
        };
        c.record = self.record_plausibility.map(Metric::from).filter(|_| heuristic.metric().is_none());
        c.max_expansions = self.max_expansions;
        c.timeout_secs = Some(self.timeout);
        c.reopen_closed = self.reopen;
        c.sidecar_dir = self.sidecar_dir.clone();
        c
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, value_enum, default_value = "astar")]
    algorithm: AlgorithmArg,
    #[arg(long, default_value = "blind")]
    heuristic: HeuristicSpec,
    #[command(flatten)]
    search: SearchArgs,
    /// Where to write the plan (one action per line).
    #[arg(long)]
    plan_out: Option<PathBuf>,
    /// Where to write the JSON stats record (default: stdout).
    #[arg(long)]
    stats_out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    lab: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "astar,gbfs")]
    algorithms: Vec<AlgorithmArg>,
    #[arg(long, value_delimiter = ',', default_value = "blind,chi2,kl")]
    heuristics: Vec<HeuristicSpec>,
    #[command(flatten)]
    search: SearchArgs,
    /// CSV report path (default: stdout only).
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSONL per-run records.
    #[arg(long)]
    records: Option<PathBuf>,
    /// Worker threads (0 = one per core, 1 = sequential).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args)]
struct VizArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Plan file, one action name per line.
    #[arg(long)]
    plan: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Pixels between frames.
    #[arg(long, default_value_t = 2)]
    gap: usize,
    #[arg(long)]
    gap_value: Option<u32>,
}

#[derive(Args)]
struct StatsArgs {
    /// JSONL records from `bench --records`; repeatable.
    #[arg(long, required = true)]
    records: Vec<PathBuf>,
    #[arg(long, default_value_t = 1)]
    bin_width: u64,
    /// JSON output path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    /// Decoder configuration (TOML) for a built-in decoder.
    #[arg(long)]
    config: PathBuf,
}

fn exit_code(e: &HarnessError) -> u8 {
    match e {
        HarnessError::Usage(_) | HarnessError::Lab(LabError::Spec(_)) => EXIT_USAGE,
        HarnessError::Io { .. }
        | HarnessError::Parse { .. }
        | HarnessError::Format { .. }
        | HarnessError::Link(_)
        | HarnessError::PlanRead(_) => EXIT_PARSE,
        _ => EXIT_SEARCH,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Viz(a) => cmd_viz(a),
        Command::Stats(a) => cmd_stats(a),
        Command::ServeDecoder(a) => cmd_serve(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn cmd_gen(a: GenArgs) -> Result<u8, HarnessError> {
    let (min, max) = match (a.depth, a.min_depth, a.max_depth) {
        (Some(d), _, _) => (d, d),
        (None, Some(lo), Some(hi)) => (lo, hi),
        (None, Some(lo), None) => (lo, lo),
        (None, None, Some(hi)) => (0, hi),
        (None, None, None) => return Err(HarnessError::Usage("give --depth or --min-depth/--max-depth".into())),
    };
    let spec = match a.kind {
        Kind::Tile => GroundTruthSpec::Tile {
            grid: a.n,
            patch: a.patch,
            maxval: a.maxval,
        },
        Kind::Hanoi => GroundTruthSpec::Hanoi {
            pegs: a.pegs,
            disks: a.disks,
            disk_height: a.disk_height,
            unit_width: a.unit_width,
            maxval: a.maxval,
        },
    };
    let corruption = CorruptionConfig {
        seed: a.lab_seed.unwrap_or(a.seed),
        spurious_action_rate: a.spurious_rate,
        weaken_pre_rate: a.weaken_rate,
        duplicate_effect_rate: a.duplicate_rate,
    };
    let (_, instances) = gen_lab(&a.out, &spec, &corruption, a.count, min, max, a.seed)?;
    let mut out = io::stdout().lock();
    for inst in instances {
        let _ = writeln!(out, "{} {}", inst.name, inst.oracle_distance);
    }
    Ok(0)
}

/// Domain, task, optional manifest and decoder for `solve`/`viz`.
struct Loaded {
    task: PlanningTask,
    name: String,
    manifest: Option<LabManifest>,
    decoder: Option<DecoderConfig>,
}

fn load(p: &ProblemArgs) -> Result<Loaded, HarnessError> {
    let (domain, task, name, mut manifest, mut decoder): (ParsedDomain, _, _, _, _) = match (&p.lab, &p.domain, &p.problem) {
        (Some(dir), _, _) => {
            let lab = LabDir::load(dir)?;
            let name = p.instance.clone().expect("clap requires --instance with --lab");
            let task = lab.task(lab.entry(&name)?)?;
            (lab.domain, task, name, lab.manifest, lab.decoder)
        }
        (None, Some(d), Some(pr)) => {
            let domain = read_domain(d)?;
            let problem = read_problem(pr)?;
            let task = pddl::link(&domain, &problem)?;
            (domain, task, problem.name, None, None)
        }
        _ => return Err(HarnessError::Usage("give --lab/--instance or --domain/--problem".into())),
    };
    if let Some(m) = &p.manifest {
        manifest = Some(read_manifest(m)?);
    }
    if let Some(d) = &p.decoder {
        decoder = Some(read_decoder_config(d)?);
    }
    let env = std::env::var(DECODER_CMD_ENV).ok();
    let decoder = override_decoder(decoder, domain.predicates.len(), env.as_deref());
    Ok(Loaded {
        task,
        name,
        manifest,
        decoder,
    })
}

fn cmd_solve(a: SolveArgs) -> Result<u8, HarnessError> {
    let l = load(&a.problem)?;
    let config = a.search.config(a.algorithm.into(), a.heuristic);
    let (record, plan) = run_task(&l.name, &l.task, l.manifest.as_ref(), l.decoder.as_ref(), &config)?;
    if let (Some(path), Some(plan)) = (&a.plan_out, &plan) {
        write_plan_file(path, &l.task, plan)?;
    }
    let json = serde_json::to_string_pretty(&record).expect("record serializes");
    match &a.stats_out {
        Some(path) => write_text(path, json + "\n")?,
        None => println!("{json}"),
    }
    Ok(match record.status {
        Status::Solved => 0,
        Status::Error => {
            eprintln!("error: {}", record.error.as_deref().unwrap_or("search failed"));
            EXIT_SEARCH
        }
        Status::Exhausted | Status::LimitReached => EXIT_NO_PLAN,
    })
}

fn cmd_bench(a: BenchArgs) -> Result<u8, HarnessError> {
    let mut lab = LabDir::load(&a.lab)?;
    let env = std::env::var(DECODER_CMD_ENV).ok();
    lab.decoder = override_decoder(lab.decoder.take(), lab.domain.predicates.len(), env.as_deref());
    let mut configs = Vec::new();
    for &alg in &a.algorithms {
        for &h in &a.heuristics {
            configs.push(a.search.config(alg.into(), h));
        }
    }
    let (report, records) = if a.jobs == 1 {
        bench(&lab, &configs, false)?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(a.jobs)
            .build()
            .map_err(|e| HarnessError::Usage(format!("thread pool: {e}")))?;
        pool.install(|| bench(&lab, &configs, true))?
    };
    let csv = report.to_csv();
    if let Some(path) = &a.out {
        write_text(path, &csv)?;
    }
    if let Some(path) = &a.records {
        write_records(path, &records)?;
    }
    print!("{csv}");
    for r in records.iter().filter(|r| r.status == Status::Error) {
        eprintln!(
            "warning: {} {}/{}: {}",
            r.instance,
            r.algorithm,
            r.heuristic,
            r.error.as_deref().unwrap_or("error")
        );
    }
    Ok(0)
}

fn cmd_viz(a: VizArgs) -> Result<u8, HarnessError> {
    let l = load(&a.problem)?;
    let config = l
        .decoder
        .ok_or_else(|| HarnessError::Usage("viz needs a decoder (--decoder or a lab directory)".into()))?;
    let decoder = Decoder::new(config)?;
    let plan = pddl::read_plan(&l.task, &harness::read_text(&a.plan)?)?;
    let gap_value = a.gap_value.unwrap_or(decoder_maxval(&decoder));
    let strip = plan_strip(&l.task, &plan, &decoder, a.gap, gap_value)?;
    write_text(&a.out, write_pgm(&strip)?)?;
    println!("{} frames, {}x{}", plan.len() + 1, strip.width(), strip.height());
    Ok(0)
}

fn decoder_maxval(d: &Decoder) -> u32 {
    use pbh::decoder::DecoderKind;
    match d.config().kind {
        DecoderKind::TileCompositor { maxval, .. } | DecoderKind::HanoiRenderer { maxval, .. } => maxval,
        DecoderKind::External { .. } => 255,
    }
}

fn cmd_stats(a: StatsArgs) -> Result<u8, HarnessError> {
    let mut records = Vec::new();
    for path in &a.records {
        records.extend(read_records(path)?);
    }
    let report = harness::stats(&records, a.bin_width)?;
    for c in &report.comparisons {
        eprintln!(
            "{} iqr {:.3} vs {} iqr {:.3}: baseline spread >= pbh: {} ({}/{} instances)",
            c.baseline,
            c.baseline_iqr,
            c.pbh,
            c.pbh_iqr,
            c.baseline_spread_ge_pbh,
            c.instances_baseline_ge_pbh,
            c.instances_compared
        );
    }
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    match &a.out {
        Some(path) => write_text(path, json + "\n")?,
        None => println!("{json}"),
    }
    Ok(0)
}

fn cmd_serve(a: ServeArgs) -> Result<u8, HarnessError> {
    let decoder = Decoder::new(read_decoder_config(&a.config)?)?;
    let stdin = io::stdin().lock();
    let stdout = io::stdout().lock();
    serve(&decoder, stdin, stdout).map_err(|source| HarnessError::Io {
        path: Path::new("<stdio>").to_path_buf(),
        source,
    })?;
    Ok(0)
}
