//! Experiment orchestration: key=value configuration, training runs with on-disk
//! artifacts, cartesian sweeps, teleport grid search and plot-ready CSV export.
//!
//! A run directory `<out>/<config-hash>-<timestamp>/` holds:
//!
//! | file             | contents                                                   |
//! |------------------|------------------------------------------------------------|
//! | `spec.txt`       | canonical key=value snapshot of the run configuration      |
//! | `history.csv`    | `epoch,loss,<model>_<metric>@<k>...`                       |
//! | `report.json`    | final [`MetricsReport`]s, one per model x cutoff           |
//! | `report.csv`     | the same reports flattened, fairness bins as columns       |
//! | `checkpoint.txt` | trained layer-0 embeddings                                 |
//! | `run.json`       | the [`RunRecord`]                                          |
//! | `INCOMPLETE`     | present until every other file has been written            |

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{compute_stats, holdout_split, load_path, DatasetStats, Format, InteractionDataset};
use crate::diffusion::{grid_search_alpha, DiffusionConfig, DiffusionStart};
use crate::error::{Error, Result};
use crate::eval::{evaluate, MetricsReport, DEFAULT_BINS, DEFAULT_CUTOFF};
use crate::graph::{InteractionGraph, NormScheme};
use crate::model::save_checkpoint;
use crate::train::{train, History, TrainConfig};

/// Ordered `key=value` settings. Keys are normalized to snake_case.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Settings(BTreeMap<String, String>);

impl Settings {
    /// Parses `key=value` lines; blank lines and `#` comments are ignored.
    pub fn parse(text: &str, origin: &Path) -> Result<Settings> {
        let mut settings = Settings::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: origin.into(),
                line: n + 1,
                message: "expected key=value".into(),
            })?;
            settings.set(k.trim(), v.trim());
        }
        Ok(settings)
    }

    pub fn load(path: &Path) -> Result<Settings> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.0.insert(key.replace('-', "_"), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    /// Later settings win.
    pub fn merged(mut self, overrides: &Settings) -> Settings {
        for (k, v) in &overrides.0 {
            self.0.insert(k.clone(), v.clone());
        }
        self
    }

    pub fn to_text(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

const KNOWN_KEYS: &[&str] = &[
    "dataset", "format", "test_fraction", "epochs", "lr", "lambda", "batch_size", "layers",
    "scheme", "dim", "seed", "diffusion_alpha", "diffusion_steps", "diffusion_mode",
    "diffusion_start", "diffusion_self_loops", "cutoff", "bins", "eval_every", "out", "jobs",
];

/// A fully resolved experiment: fixed settings plus the sweep axes.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub dataset: PathBuf,
    pub format: Format,
    /// Used only when the dataset has no test interactions of its own.
    pub test_fraction: f64,
    /// Template for every run; `layers`, `scheme` and `diffusion.alpha` come from the axes.
    pub base: TrainConfig,
    /// Present when any diffusion flag was given; alpha is taken from `alphas`.
    pub diffusion: Option<DiffusionConfig>,
    pub cutoffs: Vec<usize>,
    pub bins: usize,
    pub out: PathBuf,
    pub layers: Vec<usize>,
    pub schemes: Vec<NormScheme>,
    pub alphas: Vec<f64>,
    pub jobs: usize,
}

fn parse_value<T: FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse {raw:?}")))
}

fn parse_list<T: FromStr>(key: &str, raw: &str) -> Result<Vec<T>> {
    raw.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| parse_value(key, t))
        .collect()
}

impl ExperimentSpec {
    pub fn from_settings(s: &Settings) -> Result<ExperimentSpec> {
        if let Some(unknown) = s.0.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            return Err(Error::InvalidConfig(format!("unknown setting {unknown:?}")));
        }
        let get = |k: &str| s.get(k);
        let dataset = get("dataset")
            .map(PathBuf::from)
            .ok_or_else(|| Error::InvalidConfig("dataset is required".into()))?;
        let format = get("format").map_or(Ok(Format::AdjacencyList), str::parse)?;
        let alphas: Vec<f64> = get("diffusion_alpha").map_or(Ok(Vec::new()), |v| parse_list("diffusion_alpha", v))?;
        let diffusion_requested = ["diffusion_alpha", "diffusion_steps", "diffusion_mode", "diffusion_start", "diffusion_self_loops"]
            .iter()
            .any(|k| get(k).is_some());
        let alphas = if diffusion_requested && alphas.is_empty() { vec![DiffusionConfig::default().alpha] } else { alphas };
        let diffusion = if diffusion_requested {
            let mut d = DiffusionConfig::default();
            if let Some(v) = get("diffusion_steps") {
                d.steps = parse_value("diffusion_steps", v)?;
            }
            if let Some(v) = get("diffusion_mode") {
                d.apply_during_training = match v {
                    "train" => true,
                    "post-hoc" => false,
                    other => return Err(Error::InvalidConfig(format!("diffusion_mode: {other:?} (train or post-hoc)"))),
                };
            }
            if let Some(v) = get("diffusion_start") {
                d.start = v.parse::<DiffusionStart>()?;
            }
            if let Some(v) = get("diffusion_self_loops") {
                d.self_loops = parse_value("diffusion_self_loops", v)?;
            }
            Some(d)
        } else {
            None
        };
        let defaults = if diffusion.is_some() {
            TrainConfig::with_diffusion(DiffusionConfig::default())
        } else {
            TrainConfig::default()
        };
        let base = TrainConfig {
            epochs: get("epochs").map_or(Ok(defaults.epochs), |v| parse_value("epochs", v))?,
            lr: get("lr").map_or(Ok(defaults.lr), |v| parse_value("lr", v))?,
            lambda: get("lambda").map_or(Ok(defaults.lambda), |v| parse_value("lambda", v))?,
            batch_size: get("batch_size").map_or(Ok(defaults.batch_size), |v| parse_value("batch_size", v))?,
            dim: get("dim").map_or(Ok(defaults.dim), |v| parse_value("dim", v))?,
            seed: get("seed").map_or(Ok(defaults.seed), |v| parse_value("seed", v))?,
            eval_every: get("eval_every").map_or(Ok(defaults.eval_every), |v| parse_value("eval_every", v))?,
            diffusion: None,
            ..defaults
        };
        let spec = ExperimentSpec {
            dataset,
            format,
            test_fraction: get("test_fraction").map_or(Ok(0.2), |v| parse_value("test_fraction", v))?,
            base,
            diffusion,
            cutoffs: get("cutoff").map_or(Ok(vec![DEFAULT_CUTOFF]), |v| parse_list("cutoff", v))?,
            bins: get("bins").map_or(Ok(DEFAULT_BINS), |v| parse_value("bins", v))?,
            out: get("out").map_or_else(|| PathBuf::from("runs"), PathBuf::from),
            layers: get("layers").map_or(Ok(vec![3]), |v| parse_list("layers", v))?,
            schemes: get("scheme").map_or(Ok(vec![NormScheme::LIGHTGCN]), |v| parse_list("scheme", v))?,
            alphas,
            jobs: get("jobs").map_or(Ok(1), |v| parse_value("jobs", v))?,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if self.layers.is_empty() || self.schemes.is_empty() {
            return Err(Error::InvalidConfig("sweep axes must be nonempty".into()));
        }
        if self.cutoffs.is_empty() || self.cutoffs.contains(&0) {
            return Err(Error::InvalidConfig("cutoffs must be a nonempty list of positive integers".into()));
        }
        if self.bins < 2 {
            return Err(Error::InvalidConfig("bins must be >= 2".into()));
        }
        self.base.validate()?;
        for &alpha in &self.alphas {
            DiffusionConfig::with_alpha(alpha).validate()?;
        }
        Ok(())
    }

    /// Cartesian product layers x schemes x alphas (no alpha axis means plain LightGCN).
    pub fn runs(&self) -> Vec<RunSpec> {
        let alphas: Vec<Option<f64>> = if self.alphas.is_empty() {
            vec![None]
        } else {
            self.alphas.iter().copied().map(Some).collect()
        };
        let mut runs = Vec::new();
        for &layers in &self.layers {
            for &scheme in &self.schemes {
                for &alpha in &alphas {
                    let diffusion = alpha.map(|a| DiffusionConfig { alpha: a, ..self.diffusion.unwrap_or_default() });
                    runs.push(RunSpec {
                        dataset: self.dataset.clone(),
                        format: self.format,
                        test_fraction: self.test_fraction,
                        train: TrainConfig { layers, scheme, diffusion, ..self.base.clone() },
                        cutoffs: self.cutoffs.clone(),
                        bins: self.bins,
                    });
                }
            }
        }
        runs
    }

    /// The single run described when every axis has one value.
    pub fn single_run(&self) -> Result<RunSpec> {
        let mut runs = self.runs();
        if runs.len() != 1 {
            return Err(Error::InvalidConfig(format!(
                "configuration describes {} runs; use the sweep command",
                runs.len()
            )));
        }
        Ok(runs.remove(0))
    }
}

/// One concrete training run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub dataset: PathBuf,
    pub format: Format,
    pub test_fraction: f64,
    pub train: TrainConfig,
    pub cutoffs: Vec<usize>,
    pub bins: usize,
}

impl RunSpec {
    /// Canonical settings covering every field that affects results.
    pub fn canonical(&self) -> Settings {
        let t = &self.train;
        let mut s = Settings::default();
        s.set("dataset", self.dataset.display().to_string());
        s.set("format", self.format.to_string());
        s.set("test_fraction", self.test_fraction.to_string());
        s.set("epochs", t.epochs.to_string());
        s.set("lr", t.lr.to_string());
        s.set("lambda", t.lambda.to_string());
        s.set("batch_size", t.batch_size.to_string());
        s.set("layers", t.layers.to_string());
        s.set("scheme", t.scheme.short_name());
        s.set("dim", t.dim.to_string());
        s.set("seed", t.seed.to_string());
        s.set("eval_every", t.eval_every.to_string());
        s.set("cutoff", join(&self.cutoffs));
        s.set("bins", self.bins.to_string());
        if let Some(d) = &t.diffusion {
            s.set("diffusion_alpha", d.alpha.to_string());
            s.set("diffusion_steps", d.steps.to_string());
            s.set("diffusion_mode", if d.apply_during_training { "train" } else { "post-hoc" });
            s.set("diffusion_start", d.start.to_string());
            s.set("diffusion_self_loops", d.self_loops.to_string());
        }
        s
    }

    /// First 16 hex digits of the SHA-256 of the canonical settings.
    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().to_text().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn model_name(&self) -> &'static str {
        if self.train.diffusion.is_some() {
            "APPNP"
        } else {
            "LightGCN"
        }
    }

    /// e.g. `LightGCN-L1-R K=3` or `APPNP(alpha=0.1) LightGCN K=3`.
    pub fn label(&self) -> String {
        let t = &self.train;
        match &t.diffusion {
            Some(d) => format!("APPNP(alpha={}) {} K={}", d.alpha, t.scheme, t.layers),
            None => format!("{} K={}", t.scheme, t.layers),
        }
    }
}

fn join<T: ToString>(values: &[T]) -> String {
    values.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub label: String,
    pub config_hash: String,
    pub spec: BTreeMap<String, String>,
    pub status: RunStatus,
    pub error: Option<String>,
    pub duration_secs: f64,
    pub run_dir: PathBuf,
    pub history: PathBuf,
    pub reports: Vec<MetricsReport>,
}

impl RunRecord {
    pub fn load(run_dir: &Path) -> Result<RunRecord> {
        let path = run_dir.join("run.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse { path, line: e.line(), message: e.to_string() })
    }

    /// Report for `model` (or the first model) at `cutoff`.
    pub fn report(&self, cutoff: usize) -> Option<&MetricsReport> {
        self.reports.iter().find(|r| r.cutoff == cutoff)
    }
}

/// Loads the dataset and, when it carries no test split, applies the holdout split.
pub fn load_dataset(path: &Path, format: Format, test_fraction: f64, seed: u64) -> Result<InteractionDataset> {
    let ds = load_path(path, format)?;
    if !ds.test.is_empty() {
        return Ok(ds);
    }
    let mut split = holdout_split(&ds.train, test_fraction, seed)?;
    split.num_users = ds.num_users;
    split.num_items = ds.num_items;
    split.user_ids = ds.user_ids;
    split.item_ids = ds.item_ids;
    split.duplicates_dropped += ds.duplicates_dropped;
    Ok(split)
}

/// Statistics report; also written as `stats.txt` / `stats.csv` under `out` when given.
pub fn cmd_stats(dataset: &Path, format: Format, out: Option<&Path>) -> Result<(DatasetStats, String)> {
    let ds = load_path(dataset, format)?;
    let stats = compute_stats(&ds);
    let name = dataset.file_stem().map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned());
    let csv = format!("{}\n{}\n", DatasetStats::CSV_HEADER, stats.to_csv_row(&name));
    let text = format!("{}{}", stats.to_key_value(), csv);
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write(&dir.join("stats.txt"), &stats.to_key_value())?;
        write(&dir.join("stats.csv"), &csv)?;
    }
    Ok((stats, text))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn ensure_writable(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let probe = dir.join(".write-probe");
    fs::write(&probe, b"").map_err(|e| Error::io(&probe, e))?;
    fs::remove_file(&probe).map_err(|e| Error::io(&probe, e))
}

fn fresh_run_dir(out: &Path, hash: &str) -> Result<PathBuf> {
    let millis = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis());
    for attempt in 0.. {
        let name = if attempt == 0 { format!("{hash}-{millis}") } else { format!("{hash}-{millis}-{attempt}") };
        let dir = out.join(name);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(Error::io(&dir, e)),
        }
    }
    unreachable!()
}

fn metric_columns(prefix: &str, reports: &[MetricsReport]) -> Vec<(String, f64)> {
    let mut cols = Vec::new();
    for r in reports {
        cols.push((format!("{prefix}_recall@{}", r.cutoff), r.recall));
        cols.push((format!("{prefix}_ndcg@{}", r.cutoff), r.ndcg));
    }
    cols
}

/// Trains one configuration and writes its run directory under `out`.
pub fn cmd_train(run: &RunSpec, out: &Path) -> Result<RunRecord> {
    ensure_writable(out)?;
    let ds = load_dataset(&run.dataset, run.format, run.test_fraction, run.train.seed)?;
    let hash = run.config_hash();
    let dir = fresh_run_dir(out, &hash)?;
    write(&dir.join("INCOMPLETE"), "")?;
    write(&dir.join("spec.txt"), &run.canonical().to_text())?;
    let started = Instant::now();
    let mut record = RunRecord {
        label: run.label(),
        config_hash: hash,
        spec: run.canonical().0,
        status: RunStatus::Failed,
        error: None,
        duration_secs: 0.0,
        run_dir: dir.clone(),
        history: dir.join("history.csv"),
        reports: Vec::new(),
    };
    let result = execute(run, &ds, &dir);
    record.duration_secs = started.elapsed().as_secs_f64();
    match result {
        Ok(reports) => {
            record.status = RunStatus::Complete;
            record.reports = reports;
            save_record(&record)?;
            fs::remove_file(dir.join("INCOMPLETE")).map_err(|e| Error::io(&dir, e))?;
            Ok(record)
        }
        Err(e) => {
            record.error = Some(e.to_string());
            save_record(&record)?;
            Err(e)
        }
    }
}

fn save_record(record: &RunRecord) -> Result<()> {
    let json = serde_json::to_string_pretty(record).expect("record serializes");
    write(&record.run_dir.join("run.json"), &json)
}

fn execute(run: &RunSpec, ds: &InteractionDataset, dir: &Path) -> Result<Vec<MetricsReport>> {
    let graph = InteractionGraph::build(ds);
    let diffusion = run.train.diffusion.is_some();
    let mut hook = |_epoch: usize, state: &crate::model::EmbeddingState| -> Result<Vec<(String, f64)>> {
        let main = evaluate(state, &graph, ds, &run.cutoffs, run.bins)?;
        if !diffusion {
            return Ok(metric_columns("lgcn", &main));
        }
        let mut plain = state.clone();
        plain.clear_output();
        let lgcn = evaluate(&plain, &graph, ds, &run.cutoffs, run.bins)?;
        let mut cols = metric_columns("appnp", &main);
        cols.extend(metric_columns("lgcn", &lgcn));
        Ok(cols)
    };
    let outcome = train(ds, &run.train, Some(&mut hook))?;
    outcome.history.save_csv(&dir.join("history.csv"))?;

    let mut reports = evaluate(&outcome.state, &graph, ds, &run.cutoffs, run.bins)?;
    for r in &mut reports {
        r.model = run.model_name().into();
    }
    if diffusion {
        let mut plain = outcome.state.clone();
        plain.clear_output();
        let mut lgcn = evaluate(&plain, &graph, ds, &run.cutoffs, run.bins)?;
        for r in &mut lgcn {
            r.model = "LightGCN".into();
        }
        reports.extend(lgcn);
    }
    write(&dir.join("report.json"), &serde_json::to_string_pretty(&reports).expect("reports serialize"))?;
    write(&dir.join("report.csv"), &reports_to_csv(&reports))?;
    save_checkpoint(&dir.join("checkpoint.txt"), outcome.state.layer0())?;
    Ok(reports)
}

/// One row per model x cutoff; fairness bins flattened into `bin<k>_*` columns.
pub fn reports_to_csv(reports: &[MetricsReport]) -> String {
    let max_bins = reports.iter().filter_map(|r| r.fairness.as_ref()).map(|f| f.bins.len()).max().unwrap_or(0);
    let mut out = String::from("model,cutoff,users,recall,precision,ndcg,ild,fairness_gap,fairness_std");
    for b in 0..max_bins {
        out.push_str(&format!(",bin{b}_min,bin{b}_max,bin{b}_users,bin{b}_ndcg"));
    }
    out.push('\n');
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}",
            r.model, r.cutoff, r.users, r.recall, r.precision, r.ndcg, r.ild
        ));
        match &r.fairness {
            Some(f) => {
                out.push_str(&format!(",{},{}", f.gap, f.std));
                for b in 0..max_bins {
                    match f.bins.get(b) {
                        Some(bin) => out.push_str(&format!(
                            ",{},{},{},{}",
                            bin.min_interactions, bin.max_interactions, bin.users, bin.mean_metric
                        )),
                        None => out.push_str(",,,,"),
                    }
                }
            }
            None => out.push_str(&",".repeat(2 + 4 * max_bins)),
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub records: Vec<RunRecord>,
    /// `(label, error)` for runs that failed; the sweep carries on past them.
    pub failures: Vec<(String, String)>,
    pub table: PathBuf,
}

/// Runs every configuration of the cartesian product and writes `comparison.csv` (and
/// `failures.csv` when needed) into a fresh `sweep-<hash>-<timestamp>` directory.
pub fn cmd_sweep(spec: &ExperimentSpec) -> Result<SweepOutcome> {
    ensure_writable(&spec.out)?;
    let runs = spec.runs();
    let results: Vec<Mutex<Option<Result<RunRecord>>>> = runs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let worker = || loop {
        let k = next.fetch_add(1, Ordering::SeqCst);
        let Some(run) = runs.get(k) else { break };
        log::info!("sweep run {}/{}: {}", k + 1, runs.len(), run.label());
        *results[k].lock().expect("unpoisoned") = Some(cmd_train(run, &spec.out));
    };
    let jobs = spec.jobs.clamp(1, runs.len().max(1));
    if jobs == 1 {
        worker();
    } else {
        std::thread::scope(|scope| {
            for _ in 0..jobs {
                scope.spawn(worker);
            }
        });
    }

    let cutoff = spec.cutoffs[0];
    let mut table = format!(
        "label,layers,scheme,alpha,config_hash,recall@{cutoff},ndcg@{cutoff},ild@{cutoff},fairness_gap\n"
    );
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (run, slot) in runs.iter().zip(results) {
        match slot.into_inner().expect("unpoisoned").expect("every run executed") {
            Ok(record) => {
                let r = record.report(cutoff).expect("report per cutoff");
                table.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    record.label,
                    run.train.layers,
                    run.train.scheme,
                    run.train.diffusion.map_or(String::new(), |d| d.alpha.to_string()),
                    record.config_hash,
                    r.recall,
                    r.ndcg,
                    r.ild,
                    r.fairness.as_ref().map_or(String::new(), |f| f.gap.to_string()),
                ));
                records.push(record);
            }
            Err(e) => {
                log::error!("{} failed: {e}", run.label());
                failures.push((run.label(), e.to_string()));
            }
        }
    }
    let dir = fresh_run_dir(&spec.out, &format!("sweep-{}", sweep_hash(&runs)))?;
    let table_path = dir.join("comparison.csv");
    write(&table_path, &table)?;
    if !failures.is_empty() {
        let mut csv = String::from("label,error\n");
        for (label, err) in &failures {
            csv.push_str(&format!("{label},\"{}\"\n", err.replace('"', "'")));
        }
        write(&dir.join("failures.csv"), &csv)?;
    }
    Ok(SweepOutcome { records, failures, table: table_path })
}

fn sweep_hash(runs: &[RunSpec]) -> String {
    let mut h = Sha256::new();
    for r in runs {
        h.update(r.config_hash().as_bytes());
    }
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Trains one diffusion run per candidate alpha and picks the best NDCG at the first
/// cutoff (ties toward smaller alpha). Writes `alpha_search.csv` under `spec.out`.
pub fn cmd_alpha_search(spec: &ExperimentSpec) -> Result<(f64, Vec<(f64, f64)>)> {
    let candidates = if spec.alphas.is_empty() { vec![0.05, 0.1, 0.2] } else { spec.alphas.clone() };
    let spec = ExperimentSpec {
        diffusion: Some(spec.diffusion.unwrap_or_default()),
        alphas: vec![0.0],
        ..spec.clone()
    };
    let template = spec.single_run()?;
    let cutoff = spec.cutoffs[0];
    let (best, table) = grid_search_alpha(&candidates, |alpha| {
        let mut run = template.clone();
        if let Some(d) = &mut run.train.diffusion {
            d.alpha = alpha;
        }
        let record = cmd_train(&run, &spec.out)?;
        Ok(record.report(cutoff).map_or(f64::NAN, |r| r.ndcg))
    })?;
    let mut csv = format!("alpha,ndcg@{cutoff}\n");
    for (a, s) in &table {
        csv.push_str(&format!("{a},{s}\n"));
    }
    write(&spec.out.join("alpha_search.csv"), &csv)?;
    Ok((best, table))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// Per-epoch recall of each run's own model.
    Curves,
    /// Per-bin NDCG of every model in every run.
    FairnessBars,
    /// Intra-list distance per model and cutoff.
    DiversityBars,
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "curves" => Ok(PlotKind::Curves),
            "fairness-bars" => Ok(PlotKind::FairnessBars),
            "diversity-bars" => Ok(PlotKind::DiversityBars),
            other => Err(Error::InvalidConfig(format!(
                "unknown plot kind {other:?} (curves, fairness-bars, diversity-bars)"
            ))),
        }
    }
}

impl fmt::Display for PlotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlotKind::Curves => "curves",
            PlotKind::FairnessBars => "fairness-bars",
            PlotKind::DiversityBars => "diversity-bars",
        })
    }
}

/// Long-format `series,x,y` rows for one figure kind, written to `<out>/<kind>.csv`.
/// `metric` selects the curve column (default `recall@<first cutoff>`).
pub fn cmd_plotdata(run_dirs: &[PathBuf], kind: PlotKind, metric: Option<&str>, out: &Path) -> Result<PathBuf> {
    if run_dirs.is_empty() {
        return Err(Error::InvalidConfig("plotdata needs at least one run directory".into()));
    }
    let mut csv = String::from("series,x,y\n");
    for dir in run_dirs {
        let record = RunRecord::load(dir)?;
        match kind {
            PlotKind::Curves => {
                let path = dir.join("history.csv");
                let text = fs::read_to_string(&path)
                    .map_err(|_| Error::Run(format!("run {:?} has no history ({})", record.label, path.display())))?;
                let history = History::from_csv(&text)?;
                let prefix = if record.spec.contains_key("diffusion_alpha") { "appnp" } else { "lgcn" };
                let default_metric = record.reports.first().map_or(format!("recall@{DEFAULT_CUTOFF}"), |r| format!("recall@{}", r.cutoff));
                let column = format!("{prefix}_{}", metric.unwrap_or(&default_metric));
                let series = history.metric_series(&column).ok_or_else(|| {
                    Error::Run(format!("run {:?} has no {column} column in its history", record.label))
                })?;
                for (epoch, y) in series {
                    csv.push_str(&format!("{},{epoch},{y}\n", record.label));
                }
            }
            PlotKind::FairnessBars => {
                for r in &record.reports {
                    if let Some(f) = &r.fairness {
                        for (b, bin) in f.bins.iter().enumerate() {
                            csv.push_str(&format!("{} | {}@{},{b},{}\n", record.label, r.model, r.cutoff, bin.mean_metric));
                        }
                    }
                }
            }
            PlotKind::DiversityBars => {
                for r in &record.reports {
                    csv.push_str(&format!("{} | {},{},{}\n", record.label, r.model, r.cutoff, r.ild));
                }
            }
        }
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let path = out.join(format!("{kind}.csv"));
    write(&path, &csv)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings(pairs: &[(&str, &str)]) -> Settings {
        let mut s = Settings::default();
        for (k, v) in pairs {
            s.set(k, *v);
        }
        s
    }

    #[test]
    fn parse_config_text() {
        let s = Settings::parse("# comment\ndataset = data/x\nbatch-size=64\n\n", Path::new("cfg")).unwrap();
        assert_eq!(s.get("batch_size"), Some("64"));
        assert!(Settings::parse("oops\n", Path::new("cfg")).is_err());
    }

    #[test]
    fn flags_override_file() {
        let file = settings(&[("dataset", "a"), ("epochs", "5")]);
        let flags = settings(&[("epochs", "7")]);
        let spec = ExperimentSpec::from_settings(&file.merged(&flags)).unwrap();
        assert_eq!(spec.base.epochs, 7);
    }

    #[test]
    fn defaults_follow_the_training_protocol() {
        let spec = ExperimentSpec::from_settings(&settings(&[("dataset", "a")])).unwrap();
        assert_eq!((spec.base.epochs, spec.base.lr, spec.base.lambda), (1000, 0.001, 1e-4));
        assert_eq!(spec.cutoffs, vec![20]);
        let spec = ExperimentSpec::from_settings(&settings(&[("dataset", "a"), ("diffusion_steps", "10")])).unwrap();
        assert_eq!(spec.base.epochs, 600);
        assert_eq!(spec.alphas, vec![0.1]);
    }

    #[test]
    fn rejects_unknown_and_missing_keys() {
        assert!(ExperimentSpec::from_settings(&settings(&[("epochs", "1")])).is_err());
        assert!(ExperimentSpec::from_settings(&settings(&[("dataset", "a"), ("epoch", "1")])).is_err());
        assert!(ExperimentSpec::from_settings(&settings(&[("dataset", "a"), ("scheme", "l3")])).is_err());
    }

    #[test]
    fn sweep_product_counts() {
        let spec = ExperimentSpec::from_settings(&settings(&[("dataset", "a"), ("layers", "1,2")])).unwrap();
        assert_eq!(spec.runs().len(), 2);
        assert!(spec.single_run().is_err());
        let spec = ExperimentSpec::from_settings(&settings(&[
            ("dataset", "a"),
            ("layers", "1,2,3,4"),
            ("scheme", "sym,l1-r"),
            ("diffusion_alpha", "0.05,0.1,0.2"),
        ]))
        .unwrap();
        assert_eq!(spec.runs().len(), 24);
    }

    #[test]
    fn config_hash_tracks_semantic_fields() {
        let base = settings(&[("dataset", "a"), ("out", "x")]);
        let run = |extra: &[(&str, &str)]| {
            ExperimentSpec::from_settings(&base.clone().merged(&settings(extra))).unwrap().single_run().unwrap()
        };
        let h = run(&[]).config_hash();
        assert_eq!(h, run(&[]).config_hash());
        assert_eq!(h, run(&[("out", "elsewhere"), ("jobs", "4")]).config_hash());
        for changed in [("lr", "0.01"), ("seed", "1"), ("scheme", "l"), ("cutoff", "10"), ("diffusion_alpha", "0.1")] {
            assert_ne!(h, run(&[changed]).config_hash(), "{changed:?}");
        }
        assert_eq!(h.len(), 16);
    }

    #[test]
    fn labels() {
        let spec = ExperimentSpec::from_settings(&settings(&[("dataset", "a"), ("scheme", "l1-r"), ("layers", "2")])).unwrap();
        assert_eq!(spec.single_run().unwrap().label(), "LightGCN-L1-R K=2");
    }
}
