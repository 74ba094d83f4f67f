//! Lab directories, single runs, benchmark sweeps, plan strips and
//! plausibility statistics. The `pbh` binary is a thin layer over this.

use std::fmt;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decoder::{DecodeError, Decoder, DecoderConfig, DecoderKind, DEFAULT_TIMEOUT_SECS};
use crate::heuristics::{Baseline, ContextError, Heuristic, Metric, PlausibilityContext, PlausibilitySettings, ReferenceChoice};
use crate::imaging::{hstack, Image, ImageError};
use crate::lab::{gen_instances, synth, validate_plan, Configuration, CorruptionConfig, GroundTruthSpec, Instance, Lab, LabError, LabManifest, Verdict};
use crate::pddl::{self, LinkError, ParseError, ParsedDomain, ParsedProblem, PlanReadError};
use crate::search::{search, Algorithm, SearchConfig, SearchStats, Status};
use crate::strips::{Plan, PlanFailure, PlanningTask};

pub const DOMAIN_FILE: &str = "domain.pddl";
pub const MANIFEST_FILE: &str = "manifest.toml";
pub const DECODER_FILE: &str = "decoder.toml";
pub const INSTANCES_FILE: &str = "instances.toml";

/// Per-instance wall-clock budget, seconds.
pub const DEFAULT_RUN_TIMEOUT_SECS: f64 = 1800.0;

/// Replaces the decoder with an external process, split on whitespace.
pub const DECODER_CMD_ENV: &str = "PBH_DECODER_CMD";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}: {source}", path.display())]
    Parse {
        path: PathBuf,
        #[source]
        source: ParseError,
    },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    PlanRead(#[from] PlanReadError),
    #[error(transparent)]
    Lab(#[from] LabError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Context(#[from] ContextError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("plan is not executable: {0:?}")]
    InfeasiblePlan(PlanFailure),
    #[error("{0}")]
    Usage(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_text(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(io_err(path))
}

pub fn write_text(path: &Path, text: impl AsRef<[u8]>) -> Result<(), HarnessError> {
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_domain(path: &Path) -> Result<ParsedDomain, HarnessError> {
    pddl::parse_domain(&read_text(path)?).map_err(|source| HarnessError::Parse {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_problem(path: &Path) -> Result<ParsedProblem, HarnessError> {
    pddl::parse_problem(&read_text(path)?).map_err(|source| HarnessError::Parse {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_manifest(path: &Path) -> Result<LabManifest, HarnessError> {
    LabManifest::from_toml(&read_text(path)?).map_err(|e| HarnessError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn read_decoder_config(path: &Path) -> Result<DecoderConfig, HarnessError> {
    let config: DecoderConfig = toml::from_str(&read_text(path)?).map_err(|e| HarnessError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    config.validate()?;
    Ok(config)
}

pub fn decoder_config_toml(config: &DecoderConfig) -> String {
    toml::to_string(config).expect("decoder config serializes")
}

/// Applies the `PBH_DECODER_CMD` override (passed in as `command`).
pub fn override_decoder(config: Option<DecoderConfig>, n_props: usize, command: Option<&str>) -> Option<DecoderConfig> {
    let Some(command) = command.map(str::trim).filter(|c| !c.is_empty()) else {
        return config;
    };
    let (timeout_secs, cache_capacity) = match &config {
        Some(DecoderConfig {
            kind: DecoderKind::External { timeout_secs, .. },
            cache_capacity,
        }) => (*timeout_secs, *cache_capacity),
        Some(c) => (DEFAULT_TIMEOUT_SECS, c.cache_capacity),
        None => (DEFAULT_TIMEOUT_SECS, crate::decoder::DEFAULT_CACHE_CAPACITY),
    };
    Some(DecoderConfig {
        kind: DecoderKind::External {
            command: command.split_whitespace().map(String::from).collect(),
            n_props,
            timeout_secs,
        },
        cache_capacity,
    })
}

/// One line of `instances.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceEntry {
    pub name: String,
    pub file: String,
    pub init: Configuration,
    pub oracle_distance: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct InstanceIndex {
    instance: Vec<InstanceEntry>,
}

/// Writes a lab directory: domain, manifest, decoder config, one problem
/// file per instance and the instance index.
pub fn write_lab(dir: &Path, lab: &Lab, instances: &[Instance]) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_text(&dir.join(DOMAIN_FILE), lab.domain_text())?;
    write_text(&dir.join(MANIFEST_FILE), lab.manifest.to_toml())?;
    write_text(&dir.join(DECODER_FILE), decoder_config_toml(lab.decoder_config()))?;
    let mut index = InstanceIndex { instance: Vec::new() };
    for inst in instances {
        let file = format!("{}.pddl", inst.name);
        write_text(&dir.join(&file), lab.problem(&inst.name, &inst.init).to_string())?;
        index.instance.push(InstanceEntry {
            name: inst.name.clone(),
            file,
            init: inst.init.clone(),
            oracle_distance: inst.oracle_distance,
        });
    }
    let text = toml::to_string(&index).expect("instance index serializes");
    write_text(&dir.join(INSTANCES_FILE), text)
}

/// Synthesizes a lab, draws instances and writes everything under `dir`.
pub fn gen_lab(
    dir: &Path,
    spec: &GroundTruthSpec,
    corruption: &CorruptionConfig,
    count: usize,
    min_depth: u64,
    max_depth: u64,
    seed: u64,
) -> Result<(Lab, Vec<Instance>), HarnessError> {
    let lab = synth(spec, corruption)?;
    let instances = gen_instances(&lab.manifest, count, min_depth, max_depth, seed)?;
    write_lab(dir, &lab, &instances)?;
    Ok((lab, instances))
}

/// A lab directory read back from disk.
#[derive(Debug, Clone)]
pub struct LabDir {
    pub dir: PathBuf,
    pub domain: ParsedDomain,
    pub manifest: Option<LabManifest>,
    pub decoder: Option<DecoderConfig>,
    pub instances: Vec<InstanceEntry>,
}

impl LabDir {
    pub fn load(dir: &Path) -> Result<Self, HarnessError> {
        let domain = read_domain(&dir.join(DOMAIN_FILE))?;
        let optional = |name: &str| Some(dir.join(name)).filter(|p| p.exists());
        let manifest = optional(MANIFEST_FILE).map(|p| read_manifest(&p)).transpose()?;
        let decoder = optional(DECODER_FILE).map(|p| read_decoder_config(&p)).transpose()?;
        let index_path = dir.join(INSTANCES_FILE);
        let index: InstanceIndex = toml::from_str(&read_text(&index_path)?).map_err(|e| HarnessError::Format {
            path: index_path.clone(),
            message: e.to_string(),
        })?;
        Ok(LabDir {
            dir: dir.to_path_buf(),
            domain,
            manifest,
            decoder,
            instances: index.instance,
        })
    }

    pub fn entry(&self, name: &str) -> Result<&InstanceEntry, HarnessError> {
        self.instances
            .iter()
            .find(|e| e.name == name)
            .ok_or_else(|| HarnessError::Usage(format!("no instance named {name} in {}", self.dir.display())))
    }

    pub fn task(&self, entry: &InstanceEntry) -> Result<PlanningTask, HarnessError> {
        let problem = read_problem(&self.dir.join(&entry.file))?;
        Ok(pddl::link(&self.domain, &problem)?)
    }
}

/// Heuristic names accepted on the command line and written to reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeuristicSpec {
    Blind,
    Goalcount,
    Hmax,
    Hadd,
    Zero,
    Chi2,
    Kl,
}

impl HeuristicSpec {
    pub const ALL: [HeuristicSpec; 7] = [
        HeuristicSpec::Blind,
        HeuristicSpec::Goalcount,
        HeuristicSpec::Hmax,
        HeuristicSpec::Hadd,
        HeuristicSpec::Zero,
        HeuristicSpec::Chi2,
        HeuristicSpec::Kl,
    ];

    pub fn metric(self) -> Option<Metric> {
        match self {
            HeuristicSpec::Chi2 => Some(Metric::Chi2),
            HeuristicSpec::Kl => Some(Metric::Kl),
            _ => None,
        }
    }

    pub fn baseline(self) -> Option<Baseline> {
        match self {
            HeuristicSpec::Blind => Some(Baseline::Blind),
            HeuristicSpec::Goalcount => Some(Baseline::Goalcount),
            HeuristicSpec::Hmax => Some(Baseline::Hmax),
            HeuristicSpec::Hadd => Some(Baseline::Hadd),
            HeuristicSpec::Zero => Some(Baseline::Zero),
            HeuristicSpec::Chi2 | HeuristicSpec::Kl => None,
        }
    }
}

impl fmt::Display for HeuristicSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HeuristicSpec::Blind => "blind",
            HeuristicSpec::Goalcount => "goalcount",
            HeuristicSpec::Hmax => "hmax",
            HeuristicSpec::Hadd => "hadd",
            HeuristicSpec::Zero => "zero",
            HeuristicSpec::Chi2 => "chi2",
            HeuristicSpec::Kl => "kl",
        })
    }
}

impl FromStr for HeuristicSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        HeuristicSpec::ALL
            .into_iter()
            .find(|h| h.to_string() == s)
            .ok_or_else(|| format!("unknown heuristic {s:?} (expected blind, goalcount, hmax, hadd, zero, chi2 or kl)"))
    }
}

/// Everything that defines one (algorithm, heuristic) configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub heuristic: HeuristicSpec,
    pub n_bins: usize,
    pub kl_alpha: f64,
    /// `None` uses the metric's default scale.
    pub scale: Option<f64>,
    pub reference: ReferenceChoice,
    /// Metric to evaluate and record on expanded nodes without guiding search.
    pub record: Option<Metric>,
    pub max_expansions: Option<u64>,
    pub timeout_secs: Option<f64>,
    /// `None` keeps the algorithm's default.
    pub reopen_closed: Option<bool>,
    /// Directory for h-value sidecar files of very long runs.
    pub sidecar_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(algorithm: Algorithm, heuristic: HeuristicSpec) -> Self {
        RunConfig {
            algorithm,
            heuristic,
            n_bins: 10,
            kl_alpha: 1.0,
            scale: None,
            reference: ReferenceChoice::Goal,
            record: None,
            max_expansions: None,
            timeout_secs: Some(DEFAULT_RUN_TIMEOUT_SECS),
            reopen_closed: None,
            sidecar_dir: None,
        }
    }

    pub fn label(&self) -> String {
        format!("{}/{}", self.algorithm, self.heuristic)
    }

    fn settings(&self, metric: Metric) -> PlausibilitySettings {
        let mut s = PlausibilitySettings::new(metric);
        s.n_bins = self.n_bins;
        s.kl_alpha = self.kl_alpha;
        if let Some(scale) = self.scale {
            s.scale = scale;
        }
        s.reference = self.reference.clone();
        s
    }

    fn needs_decoder(&self) -> bool {
        self.heuristic.metric().is_some() || self.record.is_some()
    }
}

/// The structured record of one search run (one JSONL line in bench output).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance: String,
    pub algorithm: Algorithm,
    pub heuristic: HeuristicSpec,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recorded_metric: Option<Metric>,
    pub plan_length: Option<usize>,
    pub plan: Option<Vec<String>>,
    pub verdict: Option<Verdict>,
    pub error: Option<String>,
    pub stats: SearchStats,
}

impl RunRecord {
    pub fn found(&self) -> bool {
        self.status == Status::Solved
    }

    pub fn valid(&self) -> bool {
        self.found() && self.verdict.as_ref().is_some_and(|v| v.valid)
    }

    pub fn c_optimal(&self) -> bool {
        self.found() && self.verdict.as_ref().is_some_and(|v| v.c_optimal)
    }

    fn failed(instance: &str, config: &RunConfig, error: String) -> Self {
        RunRecord {
            instance: instance.to_string(),
            algorithm: config.algorithm,
            heuristic: config.heuristic,
            status: Status::Error,
            recorded_metric: config.record,
            plan_length: None,
            plan: None,
            verdict: None,
            error: Some(error),
            stats: SearchStats::default(),
        }
    }

    /// The plan as action indices into `task`.
    pub fn plan_in(&self, task: &PlanningTask) -> Option<Result<Plan, PlanReadError>> {
        self.plan.as_ref().map(|names| {
            let text: String = names.iter().map(|n| format!("({n})\n")).collect();
            pddl::read_plan(task, &text)
        })
    }
}

/// Runs one configuration on one task. The plan is judged against the
/// manifest when one is given.
pub fn run_task(
    instance: &str,
    task: &PlanningTask,
    manifest: Option<&LabManifest>,
    decoder: Option<&DecoderConfig>,
    config: &RunConfig,
) -> Result<(RunRecord, Option<Plan>), HarnessError> {
    let decoder = match (config.needs_decoder(), decoder) {
        (false, _) => None,
        (true, Some(d)) => Some(Arc::new(Decoder::new(d.clone())?)),
        (true, None) => {
            return Err(HarnessError::Usage(format!(
                "{} needs a decoder configuration",
                config.record.map_or(config.heuristic.to_string(), |m| format!("recording {m}"))
            )))
        }
    };
    let mut heuristic: Box<dyn Heuristic> = match (config.heuristic.baseline(), config.heuristic.metric()) {
        (Some(b), _) => Box::new(b),
        (None, Some(m)) => Box::new(PlausibilityContext::new(
            decoder.clone().expect("decoder present"),
            task,
            config.settings(m),
        )?),
        (None, None) => unreachable!("every heuristic is a baseline or a metric"),
    };
    let mut recorder = match config.record {
        Some(m) => Some(PlausibilityContext::new(
            decoder.clone().expect("decoder present"),
            task,
            config.settings(m),
        )?),
        None => None,
    };

    let mut search_config = SearchConfig::new(config.algorithm);
    search_config.max_expansions = config.max_expansions;
    search_config.max_seconds = config.timeout_secs;
    if let Some(r) = config.reopen_closed {
        search_config.reopen_closed = r;
    }
    search_config.h_values_sidecar = config
        .sidecar_dir
        .as_ref()
        .map(|d| d.join(format!("{instance}-{}-{}.hvals", config.algorithm, config.heuristic)));

    let outcome = search(
        task,
        &search_config,
        heuristic.as_mut(),
        recorder.as_mut().map(|r| r as &mut dyn Heuristic),
    );
    let verdict = match (&outcome.plan, manifest) {
        (Some(plan), Some(m)) => Some(validate_plan(m, task, plan)?),
        _ => None,
    };
    let record = RunRecord {
        instance: instance.to_string(),
        algorithm: config.algorithm,
        heuristic: config.heuristic,
        status: outcome.status,
        recorded_metric: config.record,
        plan_length: outcome.plan.as_ref().map(Plan::len),
        plan: outcome
            .plan
            .as_ref()
            .map(|p| p.steps.iter().map(|&i| task.actions[i].name.clone()).collect()),
        verdict,
        error: outcome.error,
        stats: outcome.stats,
    };
    Ok((record, outcome.plan))
}

/// One aggregate line of the benchmark table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub algorithm: Algorithm,
    pub heuristic: HeuristicSpec,
    pub found: usize,
    pub valid: usize,
    pub c_optimal: usize,
    /// Over found plans; `None` when nothing was found.
    pub mean_length: Option<f64>,
    pub mean_expanded: f64,
    pub mean_wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub n_instances: usize,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub const HEADER: &'static str =
        "algorithm,heuristic,found,valid,c_optimal,mean_length,mean_expanded,mean_wall_seconds";

    /// Aggregates records grouped by configuration, in `configs` order.
    pub fn from_records(configs: &[RunConfig], records: &[RunRecord], n_instances: usize) -> Self {
        let rows = configs
            .iter()
            .map(|c| {
                let mine: Vec<&RunRecord> = records
                    .iter()
                    .filter(|r| r.algorithm == c.algorithm && r.heuristic == c.heuristic)
                    .collect();
                let n = mine.len().max(1) as f64;
                let lengths: Vec<usize> = mine.iter().filter(|r| r.found()).filter_map(|r| r.plan_length).collect();
                let row = BenchRow {
                    algorithm: c.algorithm,
                    heuristic: c.heuristic,
                    found: mine.iter().filter(|r| r.found()).count(),
                    valid: mine.iter().filter(|r| r.valid()).count(),
                    c_optimal: mine.iter().filter(|r| r.c_optimal()).count(),
                    mean_length: (!lengths.is_empty())
                        .then(|| lengths.iter().sum::<usize>() as f64 / lengths.len() as f64),
                    mean_expanded: mine.iter().map(|r| r.stats.expanded as f64).sum::<f64>() / n,
                    mean_wall_seconds: mine.iter().map(|r| r.stats.wall_seconds).sum::<f64>() / n,
                };
                assert!(
                    row.found >= row.valid && row.valid >= row.c_optimal && row.found <= n_instances,
                    "bench row violates found >= valid >= c_optimal: {row:?}"
                );
                row
            })
            .collect();
        BenchReport { n_instances, rows }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::HEADER);
        out.push('\n');
        for r in &self.rows {
            let length = r.mean_length.map_or("nan".to_string(), |l| format!("{l:.3}"));
            out.push_str(&format!(
                "{},{},{},{},{},{},{:.3},{:.6}\n",
                r.algorithm, r.heuristic, r.found, r.valid, r.c_optimal, length, r.mean_expanded, r.mean_wall_seconds
            ));
        }
        out
    }
}

/// Drops the `mean_wall_seconds` column, the only one that varies between
/// identical runs.
pub fn csv_without_timing(csv: &str) -> String {
    csv.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Every configuration on every instance of `lab`. Per-run failures become
/// records with status `error`; the sweep continues.
pub fn bench(lab: &LabDir, configs: &[RunConfig], parallel: bool) -> Result<(BenchReport, Vec<RunRecord>), HarnessError> {
    let tasks: Vec<(String, PlanningTask)> = lab
        .instances
        .iter()
        .map(|e| Ok((e.name.clone(), lab.task(e)?)))
        .collect::<Result<_, HarnessError>>()?;
    let jobs: Vec<(&RunConfig, &(String, PlanningTask))> =
        configs.iter().flat_map(|c| tasks.iter().map(move |t| (c, t))).collect();
    let run = |(config, (name, task)): &(&RunConfig, &(String, PlanningTask))| {
        run_task(name, task, lab.manifest.as_ref(), lab.decoder.as_ref(), config)
            .map(|(record, _)| record)
            .unwrap_or_else(|e| RunRecord::failed(name, config, e.to_string()))
    };
    let records: Vec<RunRecord> = if parallel {
        jobs.par_iter().map(run).collect()
    } else {
        jobs.iter().map(run).collect()
    };
    Ok((BenchReport::from_records(configs, &records, tasks.len()), records))
}

pub fn write_records(path: &Path, records: &[RunRecord]) -> Result<(), HarnessError> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r).expect("record serializes");
        out.push(b'\n');
    }
    write_text(path, out)
}

pub fn read_records(path: &Path) -> Result<Vec<RunRecord>, HarnessError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut records = Vec::new();
    for (i, line) in io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line).map_err(|e| HarnessError::Format {
            path: path.to_path_buf(),
            message: format!("line {}: {e}", i + 1),
        })?);
    }
    Ok(records)
}

/// Decodes the state trace of `plan` and lays the frames out left to right.
pub fn plan_strip(task: &PlanningTask, plan: &Plan, decoder: &Decoder, gap: usize, gap_value: u32) -> Result<Image, HarnessError> {
    let check = task.check_plan(plan).map_err(LabError::from)?;
    if let Some(f) = check.failure {
        return Err(HarnessError::InfeasiblePlan(f));
    }
    let frames: Vec<Image> = decoder
        .decode_trace(&check.trace)?
        .into_iter()
        .map(|f| (*f).clone())
        .collect();
    Ok(hstack(&frames, gap, gap_value)?)
}

/// Writes a run's plan, one action name per line.
pub fn write_plan_file(path: &Path, task: &PlanningTask, plan: &Plan) -> Result<(), HarnessError> {
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(pddl::write_plan(task, plan).as_bytes()).map_err(io_err(path))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueSource {
    /// The guiding heuristic's own values (PBH runs).
    Guiding,
    /// Plausibility computed on the side (baseline runs).
    Recorded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub max: u64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
}

impl Summary {
    pub fn of(values: &[u64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_unstable();
        let (q1, q3) = (quantile(&sorted, 0.25), quantile(&sorted, 0.75));
        Some(Summary {
            count: sorted.len(),
            mean: sorted.iter().map(|&v| v as f64).sum::<f64>() / sorted.len() as f64,
            max: *sorted.last().expect("nonempty"),
            q1,
            q3,
            iqr: q3 - q1,
        })
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[u64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    let frac = pos - lo as f64;
    sorted[lo] as f64 + (sorted[hi] as f64 - sorted[lo] as f64) * frac
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinCount {
    pub lo: u64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpread {
    pub instance: String,
    pub iqr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub label: String,
    pub algorithm: Algorithm,
    pub heuristic: HeuristicSpec,
    pub metric: Metric,
    pub source: ValueSource,
    pub values: Vec<u64>,
    pub bins: Vec<BinCount>,
    pub summary: Summary,
    pub per_instance: Vec<InstanceSpread>,
}

/// Baseline series vs PBH series on the same metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadComparison {
    pub baseline: String,
    pub pbh: String,
    pub baseline_iqr: f64,
    pub pbh_iqr: f64,
    pub baseline_spread_ge_pbh: bool,
    pub instances_compared: usize,
    pub instances_baseline_ge_pbh: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub bin_width: u64,
    pub series: Vec<Series>,
    pub comparisons: Vec<SpreadComparison>,
}

fn values_of(record: &RunRecord) -> Result<Vec<u64>, HarnessError> {
    let raw = if record.heuristic.metric().is_some() {
        match &record.stats.h_values_sidecar {
            Some(path) => read_text(path)?
                .lines()
                .map(|l| {
                    l.trim().parse::<u64>().map_err(|e| HarnessError::Format {
                        path: path.clone(),
                        message: e.to_string(),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?,
            None => record.stats.expanded_h_values.clone(),
        }
    } else {
        record.stats.recorded_values.clone()
    };
    Ok(raw.into_iter().filter(|&v| v != u64::MAX).collect())
}

/// Groups plausibility values of expanded states by configuration.
pub fn stats(records: &[RunRecord], bin_width: u64) -> Result<StatsReport, HarnessError> {
    if bin_width == 0 {
        return Err(HarnessError::Usage("bin width must be positive".into()));
    }
    let mut keys: Vec<(Algorithm, HeuristicSpec, Metric, ValueSource)> = Vec::new();
    for r in records {
        let key = match (r.heuristic.metric(), r.recorded_metric) {
            (Some(m), _) => (r.algorithm, r.heuristic, m, ValueSource::Guiding),
            (None, Some(m)) => (r.algorithm, r.heuristic, m, ValueSource::Recorded),
            (None, None) => continue,
        };
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    if keys.is_empty() {
        return Err(HarnessError::Usage(
            "no records carry plausibility values (run PBH or record a metric)".into(),
        ));
    }
    let mut series = Vec::new();
    for (algorithm, heuristic, metric, source) in keys {
        let mut values = Vec::new();
        let mut per_instance = Vec::new();
        for r in records {
            let matches = r.algorithm == algorithm
                && r.heuristic == heuristic
                && match source {
                    ValueSource::Guiding => true,
                    ValueSource::Recorded => r.recorded_metric == Some(metric),
                };
            if !matches {
                continue;
            }
            let v = values_of(r)?;
            if let Some(s) = Summary::of(&v) {
                per_instance.push(InstanceSpread {
                    instance: r.instance.clone(),
                    iqr: s.iqr,
                });
            }
            values.extend(v);
        }
        let Some(summary) = Summary::of(&values) else {
            continue;
        };
        let mut bins: Vec<BinCount> = Vec::new();
        let mut sorted = values.clone();
        sorted.sort_unstable();
        for v in sorted {
            let lo = v / bin_width * bin_width;
            match bins.last_mut() {
                Some(b) if b.lo == lo => b.count += 1,
                _ => bins.push(BinCount { lo, count: 1 }),
            }
        }
        let label = match source {
            ValueSource::Guiding => format!("{algorithm}/{heuristic}"),
            ValueSource::Recorded => format!("{algorithm}/{heuristic}+{metric}"),
        };
        series.push(Series {
            label,
            algorithm,
            heuristic,
            metric,
            source,
            values,
            bins,
            summary,
            per_instance,
        });
    }
    let mut comparisons = Vec::new();
    for b in series.iter().filter(|s| s.source == ValueSource::Recorded) {
        for p in series
            .iter()
            .filter(|s| s.source == ValueSource::Guiding && s.metric == b.metric)
        {
            let mut compared = 0;
            let mut wider = 0;
            for bi in &b.per_instance {
                if let Some(pi) = p.per_instance.iter().find(|pi| pi.instance == bi.instance) {
                    compared += 1;
                    if bi.iqr >= pi.iqr {
                        wider += 1;
                    }
                }
            }
            comparisons.push(SpreadComparison {
                baseline: b.label.clone(),
                pbh: p.label.clone(),
                baseline_iqr: b.summary.iqr,
                pbh_iqr: p.summary.iqr,
                baseline_spread_ge_pbh: b.summary.iqr >= p.summary.iqr,
                instances_compared: compared,
                instances_baseline_ge_pbh: wider,
            });
        }
    }
    Ok(StatsReport {
        bin_width,
        series,
        comparisons,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles() {
        assert_eq!(quantile(&[5], 0.25), 5.0);
        assert_eq!(quantile(&[1, 2, 3, 4], 0.25), 1.75);
        assert_eq!(quantile(&[1, 2, 3, 4], 0.75), 3.25);
        let s = Summary::of(&[0, 0, 0, 0]).unwrap();
        assert_eq!((s.iqr, s.max, s.mean), (0.0, 0, 0.0));
    }

    #[test]
    fn heuristic_names_round_trip() {
        for h in HeuristicSpec::ALL {
            assert_eq!(h.to_string().parse::<HeuristicSpec>(), Ok(h));
        }
        assert!("h_ff".parse::<HeuristicSpec>().is_err());
    }

    #[test]
    fn timing_column_is_dropped() {
        let csv = "a,b,c\n1,2,3.5\n";
        assert_eq!(csv_without_timing(csv), "a,b\n1,2");
    }

    #[test]
    fn decoder_override() {
        let builtin = DecoderConfig::new(DecoderKind::TileCompositor {
            grid: 2,
            patch: 2,
            maxval: 255,
        });
        assert_eq!(override_decoder(Some(builtin.clone()), 16, None), Some(builtin.clone()));
        assert_eq!(override_decoder(Some(builtin.clone()), 16, Some("  ")), Some(builtin.clone()));
        let ext = override_decoder(Some(builtin), 16, Some("python3 server.py --mode x")).unwrap();
        assert_eq!(
            ext.kind,
            DecoderKind::External {
                command: vec!["python3".into(), "server.py".into(), "--mode".into(), "x".into()],
                n_props: 16,
                timeout_secs: DEFAULT_TIMEOUT_SECS,
            }
        );
    }

    fn record(h: HeuristicSpec, rec: Option<Metric>, inst: &str, hv: Vec<u64>, recorded: Vec<u64>) -> RunRecord {
        RunRecord {
            instance: inst.into(),
            algorithm: Algorithm::Astar,
            heuristic: h,
            status: Status::Solved,
            recorded_metric: rec,
            plan_length: Some(0),
            plan: Some(vec![]),
            verdict: None,
            error: None,
            stats: SearchStats {
                expanded_h_values: hv,
                recorded_values: recorded,
                ..SearchStats::default()
            },
        }
    }

    #[test]
    fn stats_single_bin_at_zero() {
        let r = record(HeuristicSpec::Chi2, None, "p01", vec![0, 0, 0], vec![]);
        let s = stats(&[r], 1).unwrap();
        assert_eq!(s.series.len(), 1);
        assert_eq!(s.series[0].bins, vec![BinCount { lo: 0, count: 3 }]);
        assert!(s.comparisons.is_empty());
    }

    #[test]
    fn stats_flags_wider_baseline() {
        let records = vec![
            record(HeuristicSpec::Blind, Some(Metric::Chi2), "p01", vec![1, 1], vec![0, 40, 80, 120]),
            record(HeuristicSpec::Chi2, None, "p01", vec![0, 0, 0, 36], vec![]),
        ];
        let s = stats(&records, 10).unwrap();
        assert_eq!(s.series.len(), 2);
        assert_eq!(s.series[0].label, "astar/blind+chi2");
        assert_eq!(s.series[0].bins.len(), 4);
        let c = &s.comparisons[0];
        assert_eq!(c.baseline_iqr, 60.0);
        assert_eq!(c.pbh_iqr, 9.0);
        assert!(c.baseline_spread_ge_pbh);
        assert_eq!((c.instances_compared, c.instances_baseline_ge_pbh), (1, 1));
        assert!(stats(&records[..0], 1).is_err());
    }
}
