//! The experiment grid: datasets x strategies x Type 1 probabilities x
//! repetitions, with a fixed seeding policy and table-shaped reports.
//!
//! For a dataset and repetition `r`, one module order is drawn and shared by
//! every strategy and every Type 1 probability, so all comparisons are paired.
//! Each run's overlooking stream is seeded from
//! `(master seed, dataset, strategy, n, r)`.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::dataset::{generate_synthetic, load_dataset, Dataset, LoadOptions, SyntheticSpec};
use crate::error::{Error, Result};
use crate::metrics::{aggregate, diff, AggregateMetrics, MetricDiff, RunMetrics};
use crate::overlook::{OverlookConfig, DEFAULT_TYPE2_PROB};
use crate::seed::{derive_seed, name_key, rng_from_seed};
use crate::simulator::{run_with_bootstrap, ColdStart, ModelConfig};
use crate::strategy::StrategyKind;

pub const DEFAULT_TYPE1_PROBS: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];
pub const DEFAULT_REPETITIONS: usize = 40;
pub const DEFAULT_MASTER_SEED: u64 = 20240917;

const TAG_DATA: u64 = 1;
const TAG_ORDER: u64 = 2;
const TAG_STREAM: u64 = 3;

/// A column of the experiment: the overlooking-free reference or a strategy
/// run under overlooking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arm {
    Reference,
    Strategy(StrategyKind),
}

impl Arm {
    pub const ALL: [Arm; 4] = [
        Arm::Reference,
        Arm::Strategy(StrategyKind::Ordinary),
        Arm::Strategy(StrategyKind::Fixed),
        Arm::Strategy(StrategyKind::Proposed),
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Arm::Reference => "reference",
            Arm::Strategy(k) => k.as_str(),
        }
    }

    fn seed_code(self) -> u64 {
        match self {
            Arm::Reference => 0,
            Arm::Strategy(StrategyKind::Ordinary) => 1,
            Arm::Strategy(StrategyKind::Fixed) => 2,
            Arm::Strategy(StrategyKind::Proposed) => 3,
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Arm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("reference") {
            Ok(Arm::Reference)
        } else {
            s.parse().map(Arm::Strategy)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Csv(PathBuf),
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(Error::InvalidParameter {
                name: "format",
                reason: format!("unknown report format `{other}`"),
            }),
        }
    }
}

impl ReportFormat {
    fn as_str(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Markdown => "markdown",
        }
    }

    fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Markdown => "md",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Empty means the desk-scale synthetic default.
    pub datasets: Vec<DatasetSource>,
    pub label_column: String,
    pub bootstrap: Option<PathBuf>,
    pub type1_probs: Vec<f64>,
    pub type2_prob: f64,
    pub repetitions: usize,
    pub arms: Vec<Arm>,
    pub master_seed: u64,
    pub model: ModelConfig,
    pub output_dir: PathBuf,
    pub formats: Vec<ReportFormat>,
    pub dump_traces: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            datasets: Vec::new(),
            label_column: "bug".to_string(),
            bootstrap: None,
            type1_probs: DEFAULT_TYPE1_PROBS.to_vec(),
            type2_prob: DEFAULT_TYPE2_PROB,
            repetitions: DEFAULT_REPETITIONS,
            arms: Arm::ALL.to_vec(),
            master_seed: DEFAULT_MASTER_SEED,
            model: ModelConfig::default(),
            output_dir: PathBuf::from("report"),
            formats: vec![ReportFormat::Markdown, ReportFormat::Csv],
            dump_traces: false,
        }
    }
}

fn parse_list<T: FromStr<Err = Error>>(value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(T::from_str)
        .collect()
}

fn parse_probs(value: &str, name: &'static str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>().map_err(|e| Error::InvalidParameter {
                name,
                reason: format!("`{s}`: {e}"),
            })
        })
        .collect()
}

fn parse_scalar<T: FromStr>(value: &str, name: &'static str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .trim()
        .parse::<T>()
        .map_err(|e| Error::InvalidParameter {
            name,
            reason: format!("`{value}`: {e}"),
        })
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl ExperimentConfig {
    /// Parses the flat `key = value` config format. Blank lines and lines
    /// starting with `#` are ignored; `dataset` and `synthetic` may repeat.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config {
                    line: i + 1,
                    message: format!("expected `key = value`, got `{line}`"),
                });
            };
            config.set(key.trim(), value.trim()).map_err(|e| match e {
                Error::Config { .. } => e,
                other => Error::Config {
                    line: i + 1,
                    message: other.to_string(),
                },
            })?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "dataset" => self.datasets.push(DatasetSource::Csv(PathBuf::from(value))),
            "synthetic" => self
                .datasets
                .push(DatasetSource::Synthetic(SyntheticSpec::parse(value)?)),
            "label_column" => self.label_column = value.to_string(),
            "bootstrap" => self.bootstrap = Some(PathBuf::from(value)),
            "seed" => self.master_seed = parse_scalar(value, "seed")?,
            "reps" => self.repetitions = parse_scalar(value, "reps")?,
            "strategies" => self.arms = parse_list(value)?,
            "type1" => self.type1_probs = parse_probs(value, "type1")?,
            "type2" => self.type2_prob = parse_scalar(value, "type2")?,
            "out" => self.output_dir = PathBuf::from(value),
            "format" => self.formats = parse_list(value)?,
            "trace" => self.dump_traces = parse_scalar(value, "trace")?,
            "lambda" => self.model.train.lambda = parse_scalar(value, "lambda")?,
            "step_size" => self.model.train.step_size = parse_scalar(value, "step_size")?,
            "max_iter" => self.model.train.max_iter = parse_scalar(value, "max_iter")?,
            "tolerance" => self.model.train.tolerance = parse_scalar(value, "tolerance")?,
            "threshold" => self.model.threshold = parse_scalar(value, "threshold")?,
            "cfs_every_k_steps" => {
                self.model.cfs_every_k_steps = parse_scalar(value, "cfs_every_k_steps")?
            }
            "cold_start" => self.model.cold_start = value.parse::<ColdStart>()?,
            "quit_threshold" => self.model.quit_threshold = parse_scalar(value, "quit_threshold")?,
            other => {
                return Err(Error::InvalidParameter {
                    name: "key",
                    reason: format!("unknown config key `{other}`"),
                })
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::InvalidParameter {
                name: "reps",
                reason: "must be at least 1".into(),
            });
        }
        if self.arms.is_empty() {
            return Err(Error::InvalidParameter {
                name: "strategies",
                reason: "strategy list is empty".into(),
            });
        }
        if self.formats.is_empty() {
            return Err(Error::InvalidParameter {
                name: "format",
                reason: "format list is empty".into(),
            });
        }
        let runs_under_overlooking = self.arms.iter().any(|a| matches!(a, Arm::Strategy(_)));
        if runs_under_overlooking && self.type1_probs.is_empty() {
            return Err(Error::InvalidParameter {
                name: "type1",
                reason: "probability list is empty".into(),
            });
        }
        for &n in &self.type1_probs {
            OverlookConfig::new(n, self.type2_prob)?;
        }
        if !(0.0..=1.0).contains(&self.type2_prob) {
            return Err(Error::InvalidProbability {
                name: "type2_prob",
                value: self.type2_prob,
            });
        }
        self.model.validate()
    }

    /// Datasets with their report names, substituting the synthetic default
    /// when none are configured.
    pub fn resolved_datasets(&self) -> Vec<(String, DatasetSource)> {
        if self.datasets.is_empty() {
            return vec![(
                "synthetic-1".to_string(),
                DatasetSource::Synthetic(SyntheticSpec::default()),
            )];
        }
        self.datasets
            .iter()
            .enumerate()
            .map(|(i, src)| {
                let name = match src {
                    DatasetSource::Csv(p) => p
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_else(|| format!("dataset-{}", i + 1)),
                    DatasetSource::Synthetic(_) => format!("synthetic-{}", i + 1),
                };
                (name, src.clone())
            })
            .collect()
    }

    /// The configuration in the format accepted by [`ExperimentConfig::parse`].
    pub fn to_config_text(&self) -> String {
        let mut out = String::new();
        for src in &self.datasets {
            match src {
                DatasetSource::Csv(p) => {
                    let _ = writeln!(out, "dataset = {}", p.display());
                }
                DatasetSource::Synthetic(s) => {
                    let _ = writeln!(out, "synthetic = {}", s.to_arg());
                }
            }
        }
        let m = &self.model;
        let _ = writeln!(out, "label_column = {}", self.label_column);
        if let Some(b) = &self.bootstrap {
            let _ = writeln!(out, "bootstrap = {}", b.display());
        }
        let _ = writeln!(out, "seed = {}", self.master_seed);
        let _ = writeln!(out, "reps = {}", self.repetitions);
        let _ = writeln!(out, "strategies = {}", join(&self.arms));
        let _ = writeln!(out, "type1 = {}", join(&self.type1_probs));
        let _ = writeln!(out, "type2 = {}", self.type2_prob);
        let _ = writeln!(out, "out = {}", self.output_dir.display());
        let formats: Vec<&str> = self.formats.iter().map(|f| f.as_str()).collect();
        let _ = writeln!(out, "format = {}", formats.join(","));
        let _ = writeln!(out, "trace = {}", self.dump_traces);
        let _ = writeln!(out, "lambda = {}", m.train.lambda);
        let _ = writeln!(out, "step_size = {}", m.train.step_size);
        let _ = writeln!(out, "max_iter = {}", m.train.max_iter);
        let _ = writeln!(out, "tolerance = {}", m.train.tolerance);
        let _ = writeln!(out, "threshold = {}", m.threshold);
        let _ = writeln!(out, "cfs_every_k_steps = {}", m.cfs_every_k_steps);
        let _ = writeln!(out, "cold_start = {}", m.cold_start.as_str());
        let _ = writeln!(out, "quit_threshold = {}", m.quit_threshold);
        out
    }
}

/// Seed of the module order for `(dataset, repetition)`.
pub fn order_seed(master: u64, dataset: &str, repetition: usize) -> u64 {
    derive_seed(master, &[name_key(dataset), TAG_ORDER, repetition as u64])
}

/// Seed of a run's overlooking stream.
pub fn stream_seed(master: u64, dataset: &str, arm: Arm, type1: f64, repetition: usize) -> u64 {
    derive_seed(
        master,
        &[
            name_key(dataset),
            TAG_STREAM,
            arm.seed_code(),
            type1.to_bits(),
            repetition as u64,
        ],
    )
}

pub fn synthetic_seed(master: u64, dataset: &str) -> u64 {
    derive_seed(master, &[name_key(dataset), TAG_DATA])
}

/// A seeded uniformly random module order.
pub fn module_order(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(seed));
    order
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellOutcome {
    Done(AggregateMetrics),
    Failed(String),
}

impl CellOutcome {
    pub fn metrics(&self) -> Option<&AggregateMetrics> {
        match self {
            CellOutcome::Done(m) => Some(m),
            CellOutcome::Failed(_) => None,
        }
    }
}

/// Cell coordinates within one dataset. The reference ignores `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellKey {
    pub arm: Arm,
    /// Index into `type1_probs`; `None` for the reference.
    pub type1_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetReport {
    pub name: String,
    /// Set when the dataset could not be loaded or validated.
    pub load_error: Option<String>,
    pub n_modules: usize,
    pub cells: BTreeMap<CellKey, CellOutcome>,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub datasets: Vec<DatasetReport>,
    /// `(file name, CSV)` for each run when traces were requested.
    pub traces: Vec<(String, String)>,
}

/// Which pair of arms a difference table compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Comparison {
    pub base: Arm,
    pub other: Arm,
    pub file_stem: &'static str,
    pub title: &'static str,
}

pub const COMPARISONS: [Comparison; 3] = [
    Comparison {
        base: Arm::Reference,
        other: Arm::Strategy(StrategyKind::Ordinary),
        file_stem: "table2_ordinary_vs_reference",
        title: "Ordinary minus reference",
    },
    Comparison {
        base: Arm::Strategy(StrategyKind::Ordinary),
        other: Arm::Strategy(StrategyKind::Fixed),
        file_stem: "table3_fixed_vs_ordinary",
        title: "Fixed prediction minus ordinary",
    },
    Comparison {
        base: Arm::Strategy(StrategyKind::Ordinary),
        other: Arm::Strategy(StrategyKind::Proposed),
        file_stem: "table4_proposed_vs_ordinary",
        title: "Proposed (adaptive quit) minus ordinary",
    },
];

pub const TABLE1_STEM: &str = "table1_reference";

impl DatasetReport {
    pub fn cell(&self, arm: Arm, type1_index: Option<usize>) -> Option<&CellOutcome> {
        let key = CellKey {
            arm,
            type1_index: if arm == Arm::Reference {
                None
            } else {
                type1_index
            },
        };
        self.cells.get(&key)
    }

    pub fn reference(&self) -> Option<&AggregateMetrics> {
        self.cell(Arm::Reference, None)
            .and_then(CellOutcome::metrics)
    }

    pub fn strategy(&self, kind: StrategyKind, type1_index: usize) -> Option<&AggregateMetrics> {
        self.cell(Arm::Strategy(kind), Some(type1_index))
            .and_then(CellOutcome::metrics)
    }

    /// `other - base` at Type 1 probability index `i`, or the reason it is missing.
    pub fn difference(
        &self,
        cmp: &Comparison,
        i: usize,
    ) -> std::result::Result<MetricDiff, String> {
        let get = |arm: Arm| match self.cell(arm, Some(i)) {
            Some(CellOutcome::Done(m)) => Ok(m),
            Some(CellOutcome::Failed(reason)) => Err(format!("{arm}: {reason}")),
            None => Err(self
                .load_error
                .clone()
                .unwrap_or_else(|| format!("{arm} not run"))),
        };
        Ok(diff(get(cmp.base)?, get(cmp.other)?))
    }
}

impl ExperimentReport {
    pub fn failed_cells(&self) -> Vec<String> {
        let mut out = Vec::new();
        for d in &self.datasets {
            if let Some(e) = &d.load_error {
                out.push(format!("{}: {}", d.name, e));
            }
            for (key, cell) in &d.cells {
                if let CellOutcome::Failed(reason) = cell {
                    let n = key
                        .type1_index
                        .map(|i| format!(" n={}", self.config.type1_probs[i]))
                        .unwrap_or_default();
                    out.push(format!("{} {}{}: {}", d.name, key.arm, n, reason));
                }
            }
        }
        out
    }

    pub fn has_failures(&self) -> bool {
        !self.failed_cells().is_empty()
    }

    pub fn comparisons(&self) -> Vec<Comparison> {
        COMPARISONS
            .iter()
            .filter(|c| self.config.arms.contains(&c.base) && self.config.arms.contains(&c.other))
            .copied()
            .collect()
    }
}

/// `(file name, CSV)` of one dumped run.
type TraceFile = (String, String);

struct Job {
    dataset: usize,
    key: CellKey,
    repetition: usize,
}

fn load_source(name: &str, source: &DatasetSource, config: &ExperimentConfig) -> Result<Dataset> {
    let ds = match source {
        DatasetSource::Csv(path) => {
            let mut ds = load_dataset(
                path,
                &LoadOptions::with_label_column(config.label_column.clone()),
            )?;
            ds.name = name.to_string();
            ds
        }
        DatasetSource::Synthetic(spec) => {
            generate_synthetic(name, spec, synthetic_seed(config.master_seed, name))?
        }
    };
    ds.validate_for_experiment()?;
    Ok(ds)
}

/// Runs the full grid. Load failures and run failures are recorded per cell;
/// only an invalid configuration is an error.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let bootstrap = match &config.bootstrap {
        Some(p) => Some(load_dataset(
            p,
            &LoadOptions::with_label_column(config.label_column.clone()),
        )?),
        None => None,
    };

    let sources = config.resolved_datasets();
    let loaded: Vec<(String, Result<Dataset>)> = sources
        .iter()
        .map(|(name, src)| (name.clone(), load_source(name, src, config)))
        .collect();

    let mut keys = Vec::new();
    for &arm in &config.arms {
        match arm {
            Arm::Reference => keys.push(CellKey {
                arm,
                type1_index: None,
            }),
            Arm::Strategy(_) => keys.extend((0..config.type1_probs.len()).map(|i| CellKey {
                arm,
                type1_index: Some(i),
            })),
        }
    }

    let mut jobs = Vec::new();
    for (d, (_, ds)) in loaded.iter().enumerate() {
        if ds.is_err() {
            continue;
        }
        for repetition in 0..config.repetitions {
            for &key in &keys {
                jobs.push(Job {
                    dataset: d,
                    key,
                    repetition,
                });
            }
        }
    }

    let results: Vec<(Result<RunMetrics>, Option<TraceFile>)> = jobs
        .par_iter()
        .map(|job| {
            let (name, ds) = &loaded[job.dataset];
            let ds = ds.as_ref().expect("jobs only reference loaded datasets");
            let order = module_order(
                ds.len(),
                order_seed(config.master_seed, name, job.repetition),
            );
            let (kind, overlook, type1) = match (job.key.arm, job.key.type1_index) {
                (Arm::Strategy(kind), Some(i)) => {
                    let n = config.type1_probs[i];
                    (kind, OverlookConfig::new(n, config.type2_prob), n)
                }
                _ => (StrategyKind::Ordinary, Ok(OverlookConfig::none()), 0.0),
            };
            let seed = stream_seed(config.master_seed, name, job.key.arm, type1, job.repetition);
            let run = overlook.and_then(|o| {
                run_with_bootstrap(
                    ds,
                    &order,
                    kind,
                    &o,
                    &config.model,
                    seed,
                    bootstrap.as_ref(),
                )
            });
            match run {
                Ok(trace) => {
                    let dump = config.dump_traces.then(|| {
                        (
                            trace_file_name(name, job.key.arm, type1, job.repetition),
                            trace.to_csv(),
                        )
                    });
                    (RunMetrics::from_trace(&trace), dump)
                }
                Err(e) => (Err(e), None),
            }
        })
        .collect();

    let mut per_cell: BTreeMap<(usize, CellKey), Vec<std::result::Result<RunMetrics, String>>> =
        BTreeMap::new();
    let mut traces = Vec::new();
    for (job, (metrics, dump)) in jobs.iter().zip(results) {
        per_cell
            .entry((job.dataset, job.key))
            .or_default()
            .push(metrics.map_err(|e| format!("repetition {}: {e}", job.repetition)));
        traces.extend(dump);
    }

    let datasets = loaded
        .iter()
        .enumerate()
        .map(|(d, (name, ds))| {
            let mut cells = BTreeMap::new();
            for &key in &keys {
                let Some(runs) = per_cell.remove(&(d, key)) else {
                    continue;
                };
                let outcome = match runs.into_iter().collect::<std::result::Result<Vec<_>, _>>() {
                    Ok(runs) => match aggregate(&runs) {
                        Ok(agg) => CellOutcome::Done(agg),
                        Err(e) => CellOutcome::Failed(e.to_string()),
                    },
                    Err(reason) => CellOutcome::Failed(reason),
                };
                cells.insert(key, outcome);
            }
            DatasetReport {
                name: name.clone(),
                load_error: ds.as_ref().err().map(|e| e.to_string()),
                n_modules: ds.as_ref().map_or(0, |d| d.len()),
                cells,
            }
        })
        .collect();

    Ok(ExperimentReport {
        config: config.clone(),
        datasets,
        traces,
    })
}

fn trace_file_name(dataset: &str, arm: Arm, type1: f64, repetition: usize) -> String {
    let safe: String = dataset
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    match arm {
        Arm::Reference => format!("{safe}_reference_r{repetition:03}.csv"),
        Arm::Strategy(_) => format!("{safe}_{arm}_n{type1}_r{repetition:03}.csv"),
    }
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

/// Percentage with one decimal, never rendering a negative zero.
pub fn format_percent(value: f64) -> String {
    let s = format!("{:.1}%", value * 100.0);
    if s == "-0.0%" {
        "0.0%".to_string()
    } else {
        s
    }
}

pub fn format_auc(value: f64) -> String {
    let s = format!("{:.2}", value);
    if s == "-0.00" {
        "0.00".to_string()
    } else {
        s
    }
}

fn format_probability_label(p: f64) -> String {
    let pct = p * 100.0;
    if (pct - pct.round()).abs() < 1e-9 {
        format!("{:.0}%", pct)
    } else {
        format!("{:.1}%", pct)
    }
}

const METRIC_HEADERS: [&str; 4] = ["AUC", "Precision", "Recall", "F1 score"];

fn md_row(cells: &[String]) -> String {
    format!("| {} |\n", cells.join(" | "))
}

fn md_separator(n: usize) -> String {
    format!("|{}\n", "---|".repeat(n))
}

pub fn render_table1_markdown(report: &ExperimentReport) -> String {
    let mut out = String::from("## Reference models (no overlooking)\n\n");
    let mut header = vec!["Dataset".to_string()];
    header.extend(METRIC_HEADERS.iter().map(|s| s.to_string()));
    out.push_str(&md_row(&header));
    out.push_str(&md_separator(header.len()));
    for d in &report.datasets {
        let mut row = vec![d.name.clone()];
        match d.cell(Arm::Reference, None) {
            Some(CellOutcome::Done(m)) => {
                row.push(m.auc.map_or("n/a".into(), |a| format_auc(a.mean)));
                row.push(format_percent(m.precision.mean));
                row.push(format_percent(m.recall.mean));
                row.push(format_percent(m.f1.mean));
            }
            Some(CellOutcome::Failed(reason)) => {
                row.push(format!("failed: {reason}"));
                row.extend(std::iter::repeat_n(String::new(), 3));
            }
            None => {
                let reason = d.load_error.clone().unwrap_or_else(|| "not run".into());
                row.push(format!("failed: {reason}"));
                row.extend(std::iter::repeat_n(String::new(), 3));
            }
        }
        out.push_str(&md_row(&row));
    }
    out
}

pub fn render_difference_markdown(report: &ExperimentReport, cmp: &Comparison) -> String {
    let mut out = format!("## {}\n\n", cmp.title);
    let mut header = vec!["Type 1 overlooking".to_string()];
    for d in &report.datasets {
        header.extend(METRIC_HEADERS.iter().map(|m| format!("{} {}", d.name, m)));
    }
    out.push_str(&md_row(&header));
    out.push_str(&md_separator(header.len()));
    for (i, &n) in report.config.type1_probs.iter().enumerate() {
        let mut row = vec![format_probability_label(n)];
        for d in &report.datasets {
            match d.difference(cmp, i) {
                Ok(diff) => {
                    row.push(diff.auc.map_or("n/a".into(), format_auc));
                    row.push(format_percent(diff.precision));
                    row.push(format_percent(diff.recall));
                    row.push(format_percent(diff.f1));
                }
                Err(reason) => {
                    row.push(format!("failed: {reason}"));
                    row.extend(std::iter::repeat_n(String::new(), 3));
                }
            }
        }
        out.push_str(&md_row(&row));
    }
    out
}

/// One row of the long-form CSV reports.
#[derive(Debug, Clone, PartialEq)]
pub struct LongRow {
    pub dataset: String,
    pub strategy: String,
    pub type1: Option<f64>,
    pub metric: String,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

pub const LONG_CSV_HEADER: [&str; 6] = ["dataset", "strategy", "n", "metric", "mean", "std"];

pub fn table1_rows(report: &ExperimentReport) -> Vec<LongRow> {
    let mut rows = Vec::new();
    for d in &report.datasets {
        let row = |metric: &str, mean: Option<f64>, std: Option<f64>| LongRow {
            dataset: d.name.clone(),
            strategy: Arm::Reference.to_string(),
            type1: None,
            metric: metric.to_string(),
            mean,
            std,
        };
        match d.reference() {
            Some(m) => {
                rows.push(row("auc", m.auc.map(|a| a.mean), m.auc.map(|a| a.std)));
                rows.push(row(
                    "precision",
                    Some(m.precision.mean),
                    Some(m.precision.std),
                ));
                rows.push(row("recall", Some(m.recall.mean), Some(m.recall.std)));
                rows.push(row("f1", Some(m.f1.mean), Some(m.f1.std)));
            }
            None => rows.push(row("failed", None, None)),
        }
    }
    rows
}

pub fn difference_rows(report: &ExperimentReport, cmp: &Comparison) -> Vec<LongRow> {
    let strategy = format!("{}-minus-{}", cmp.other, cmp.base);
    let mut rows = Vec::new();
    for d in &report.datasets {
        for (i, &n) in report.config.type1_probs.iter().enumerate() {
            let row = |metric: &str, mean: Option<f64>| LongRow {
                dataset: d.name.clone(),
                strategy: strategy.clone(),
                type1: Some(n),
                metric: metric.to_string(),
                mean,
                std: None,
            };
            match d.difference(cmp, i) {
                Ok(diff) => {
                    rows.push(row("auc", diff.auc));
                    rows.push(row("precision", Some(diff.precision)));
                    rows.push(row("recall", Some(diff.recall)));
                    rows.push(row("f1", Some(diff.f1)));
                }
                Err(_) => rows.push(row("failed", None)),
            }
        }
    }
    rows
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn render_long_csv(rows: &[LongRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(LONG_CSV_HEADER).expect("in-memory write");
    for r in rows {
        w.write_record([
            r.dataset.as_str(),
            r.strategy.as_str(),
            &opt(r.type1),
            r.metric.as_str(),
            &opt(r.mean),
            &opt(r.std),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV of UTF-8 fields")
}

/// Parses a long-form CSV report.
pub fn parse_long_csv(text: &str) -> Result<Vec<LongRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let header = records
        .next()
        .ok_or(Error::MissingHeader)?
        .map_err(|e| Error::Csv {
            row: 1,
            message: e.to_string(),
        })?;
    if header.iter().ne(LONG_CSV_HEADER) {
        return Err(Error::MissingHeader);
    }
    let mut rows = Vec::new();
    for (i, rec) in records.enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Csv {
            row,
            message: e.to_string(),
        })?;
        let num = |j: usize| -> Result<Option<f64>> {
            let cell = &rec[j];
            if cell.is_empty() {
                return Ok(None);
            }
            cell.parse::<f64>()
                .map(Some)
                .map_err(|_| Error::NonNumericCell {
                    row,
                    column: LONG_CSV_HEADER[j].to_string(),
                    value: cell.to_string(),
                })
        };
        rows.push(LongRow {
            dataset: rec[0].to_string(),
            strategy: rec[1].to_string(),
            type1: num(2)?,
            metric: rec[3].to_string(),
            mean: num(4)?,
            std: num(5)?,
        });
    }
    Ok(rows)
}

pub fn render_provenance(report: &ExperimentReport) -> String {
    let mut out = format!(
        "{} {}\n\n",
        env!("CARGO_PKG_NAME"),
        env!("CARGO_PKG_VERSION")
    );
    out.push_str("[config]\n");
    out.push_str(&report.config.to_config_text());
    out.push_str("\n[datasets]\n");
    for d in &report.datasets {
        match &d.load_error {
            None => {
                let _ = writeln!(out, "{}: {} modules", d.name, d.n_modules);
            }
            Some(e) => {
                let _ = writeln!(out, "{}: failed to load: {}", d.name, e);
            }
        }
    }
    out.push_str("\n[undefined auc]\n");
    for d in &report.datasets {
        for (key, cell) in &d.cells {
            if let CellOutcome::Done(m) = cell {
                if m.auc_undefined > 0 {
                    let _ = writeln!(out, "{} {}: {} run(s)", d.name, key.arm, m.auc_undefined);
                }
            }
        }
    }
    out.push_str("\n[failed cells]\n");
    let failed = report.failed_cells();
    if failed.is_empty() {
        out.push_str("none\n");
    }
    for f in failed {
        out.push_str(&f);
        out.push('\n');
    }
    out
}

/// `(file name, contents)` for every report file.
pub fn render_report(
    report: &ExperimentReport,
    formats: &[ReportFormat],
) -> Result<Vec<(String, String)>> {
    if report.config.arms.is_empty() {
        return Err(Error::InvalidParameter {
            name: "strategies",
            reason: "strategy list is empty".into(),
        });
    }
    let mut files = Vec::new();
    for &format in formats {
        let ext = format.extension();
        if report.config.arms.contains(&Arm::Reference) {
            let body = match format {
                ReportFormat::Markdown => render_table1_markdown(report),
                ReportFormat::Csv => render_long_csv(&table1_rows(report)),
            };
            files.push((format!("{TABLE1_STEM}.{ext}"), body));
        }
        for cmp in report.comparisons() {
            let body = match format {
                ReportFormat::Markdown => render_difference_markdown(report, &cmp),
                ReportFormat::Csv => render_long_csv(&difference_rows(report, &cmp)),
            };
            files.push((format!("{}.{ext}", cmp.file_stem), body));
        }
    }
    files.push(("provenance.txt".to_string(), render_provenance(report)));
    Ok(files)
}

/// Writes the report files (and traces, if collected) under `dir`.
pub fn write_report(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| Error::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let mut written = Vec::new();
    for (name, body) in render_report(report, &report.config.formats)? {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(io(&path))?;
        written.push(path);
    }
    if !report.traces.is_empty() {
        let tdir = dir.join("traces");
        std::fs::create_dir_all(&tdir).map_err(io(&tdir))?;
        for (name, body) in &report.traces {
            let path = tdir.join(name);
            std::fs::write(&path, body).map_err(io(&path))?;
            written.push(path);
        }
    }
    Ok(written)
}
