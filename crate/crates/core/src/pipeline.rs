//! On-disk workflow behind the command-line front end.
//!
//! Layout under the configured output directory:
//!
//! ```text
//! data/k{K}_{split}.jsonl
//! runs/k{K}_{regime}_n{N}_s{seed}/{log.csv, ssl_log.csv, best.json, final.json, manifest.json}
//! results/fig2{a,b,c,d}.csv, results/*_per_seed.csv, results/manifest.json
//! results/bench_labeling.csv
//! ```
//!
//! A run directory is complete once its `manifest.json` exists; sweeps skip
//! complete cells and retrain the rest. Every artifact carries the digest of
//! the configuration that produced it and foreign digests are refused.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::dataset::{write_atomic, DatasetFile, Split};
use crate::error::{Error, Result};
use crate::eval::{convergence_epoch, evaluate, mean_std, EvalReport};
use crate::gnn::{GnnModel, ModelCheckpoint};
use crate::rate::{bench_csv, label_timing_benchmark, BenchRow};
use crate::seed::{self, tag};
use crate::train::{log_csv, train, Example, RegimeKind};

pub const RUN_FORMAT: &str = "linksched-run/1";
pub const RESULTS_FORMAT: &str = "linksched-results/1";

pub fn dataset_path(cfg: &ExperimentConfig, k: usize, split: Split) -> PathBuf {
    cfg.out_dir.join("data").join(format!("k{k}_{split}.jsonl"))
}

pub fn results_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.out_dir.join("results")
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Data(e.to_string()))?;
    write_text(path, &(text + "\n"))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// Datasets

/// Writes unlabeled datasets. An existing file from the same configuration
/// is kept (it may already carry labels) unless `force` is set; a file from
/// another configuration is refused unless `force` is set.
pub fn cmd_generate(cfg: &ExperimentConfig, ks: &[usize], splits: &[Split], force: bool) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for &k in ks {
        for &split in splits {
            let path = dataset_path(cfg, k, split);
            if path.exists() && !force {
                let existing = DatasetFile::read(&path)?;
                if existing.header.data_digest != cfg.data_digest() {
                    return Err(Error::Data(format!(
                        "{} was produced by configuration {}, current is {}; use --force to overwrite",
                        path.display(),
                        existing.header.data_digest,
                        cfg.data_digest()
                    )));
                }
                log::info!("{} exists, keeping it", path.display());
                continue;
            }
            let file = DatasetFile::generate(cfg, split, k)?;
            file.write(&path)?;
            log::info!("wrote {} ({} samples)", path.display(), file.records.len());
            written.push(path);
        }
    }
    Ok(written)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelSummary {
    pub added: usize,
    pub total: usize,
}

/// Labels every unlabeled record, rewriting the file after each chunk so an
/// interrupted pass resumes where it stopped.
pub fn cmd_label(path: &Path, cap: usize, chunk: usize) -> Result<LabelSummary> {
    let mut file = DatasetFile::read(path)?;
    let total = file.records.len();
    let chunk = chunk.max(1);
    let mut added = 0;
    let mut start = 0;
    while start < total {
        let end = (start + chunk).min(total);
        let n = file.label_range(start..end, cap)?;
        if n > 0 {
            file.write(path)?;
            log::info!("{}: labeled {}..{} ({n} new)", path.display(), start, end);
        }
        added += n;
        start = end;
    }
    Ok(LabelSummary { added, total })
}

/// Reads a dataset produced by `cfg`, optionally requiring full labels.
pub fn load_dataset(cfg: &ExperimentConfig, k: usize, split: Split, labeled: bool) -> Result<DatasetFile> {
    let path = dataset_path(cfg, k, split);
    let file = DatasetFile::read(&path)?;
    check_dataset(cfg, &path, &file, k, split, labeled)?;
    Ok(file)
}

fn check_dataset(
    cfg: &ExperimentConfig,
    path: &Path,
    file: &DatasetFile,
    k: usize,
    split: Split,
    labeled: bool,
) -> Result<()> {
    let h = &file.header;
    if h.data_digest != cfg.data_digest() {
        return Err(Error::Data(format!(
            "{} was produced by configuration {}, current is {}",
            path.display(),
            h.data_digest,
            cfg.data_digest()
        )));
    }
    if h.k != k || h.split != split {
        return Err(Error::Data(format!(
            "{} holds k={} {}, expected k={k} {split}",
            path.display(),
            h.k,
            h.split
        )));
    }
    if labeled && !file.is_fully_labeled() {
        return Err(Error::Data(format!(
            "{} has {} of {} samples labeled; run `label` first",
            path.display(),
            file.n_labeled(),
            file.records.len()
        )));
    }
    Ok(())
}

/// Fixed order in which training samples enter nested subsets.
pub fn subset_order(cfg: &ExperimentConfig, k: usize, n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed::rng_at(cfg.seed, &[tag::SUBSET, k as u64]));
    idx
}

/// Training examples in subset order; the first `n` form the size-`n` subset.
pub fn ordered_train_set(cfg: &ExperimentConfig, file: &DatasetFile) -> Result<Vec<Example>> {
    let all = file.examples()?;
    let mut slots: Vec<Option<Example>> = all.into_iter().map(Some).collect();
    subset_order(cfg, file.header.k, slots.len())
        .into_iter()
        .map(|i| slots[i].take().ok_or_else(|| Error::State("subset order repeats an index".into())))
        .collect()
}

// ---------------------------------------------------------------------------
// Training runs

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RunSpec {
    pub k: usize,
    pub regime: RegimeKind,
    pub n_train: usize,
    pub seed: u64,
}

impl RunSpec {
    pub fn dir(&self, cfg: &ExperimentConfig) -> PathBuf {
        cfg.out_dir.join("runs").join(format!(
            "k{}_{}_n{}_s{}",
            self.k, self.regime, self.n_train, self.seed
        ))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub format: String,
    pub run_digest: String,
    pub data_digest: String,
    pub k: usize,
    pub regime: RegimeKind,
    pub n_train: usize,
    pub seed: u64,
    pub epochs: usize,
    pub ssl_epochs: usize,
    pub best_epoch: Option<usize>,
    pub best_metric: f64,
    pub best_mean_of_ratios: f64,
    pub best_all_on_ratio: f64,
    pub convergence_threshold: f64,
    pub convergence_epoch: Option<usize>,
    pub wallclock_s: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub spec: RunSpec,
    pub manifest: RunManifest,
    /// Test metric after each main-phase epoch.
    pub metrics: Vec<f64>,
}

fn parse_log_metrics(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .skip(1)
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.rsplit(',')
                .next()
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| Error::Data(format!("{}: bad log line {l:?}", path.display())))
        })
        .collect()
}

/// Loads a finished run if one exists for this configuration.
pub fn load_run(cfg: &ExperimentConfig, spec: RunSpec) -> Result<Option<RunResult>> {
    let dir = spec.dir(cfg);
    let path = dir.join("manifest.json");
    if !path.exists() {
        return Ok(None);
    }
    let manifest: RunManifest = read_json(&path)?;
    if manifest.run_digest != cfg.run_digest() {
        return Err(Error::Data(format!(
            "{} was produced by configuration {}, current is {}",
            dir.display(),
            manifest.run_digest,
            cfg.run_digest()
        )));
    }
    let metrics = parse_log_metrics(&dir.join("log.csv"))?;
    Ok(Some(RunResult { spec, manifest, metrics }))
}

/// Trains one run on the first `spec.n_train` entries of `train_set`
/// (already in subset order) unless a finished run is on disk.
pub fn train_run(
    cfg: &ExperimentConfig,
    spec: RunSpec,
    train_set: &[Example],
    test_set: &[Example],
) -> Result<RunResult> {
    if let Some(done) = load_run(cfg, spec)? {
        log::debug!("{} already complete", spec.dir(cfg).display());
        return Ok(done);
    }
    if spec.n_train > train_set.len() {
        return Err(Error::Data(format!(
            "run needs {} training samples, dataset has {}",
            spec.n_train,
            train_set.len()
        )));
    }
    let dir = spec.dir(cfg);
    log::info!("training {}", dir.display());
    let start = Instant::now();
    let regime = cfg.regime(spec.regime);
    let out = train(&train_set[..spec.n_train], test_set, &regime, &cfg.system, spec.seed)?;
    let wallclock_s = start.elapsed().as_secs_f64();
    let best_report = evaluate(&out.best_model, test_set, &cfg.system)?;

    let digest = cfg.run_digest();
    write_text(&dir.join("log.csv"), &log_csv(&out.log))?;
    if spec.regime.has_ssl() {
        let mut ssl = String::from("epoch,contrastive_loss\n");
        for (i, l) in out.ssl_losses.iter().enumerate() {
            ssl.push_str(&format!("{},{l}\n", i + 1));
        }
        write_text(&dir.join("ssl_log.csv"), &ssl)?;
    }
    let mut best = ModelCheckpoint::from_model(&out.best_model, &digest);
    best.epoch = Some(out.best_epoch.unwrap_or(0));
    best.save(&dir.join("best.json"))?;
    let mut last = ModelCheckpoint::from_model(&out.final_model, &digest);
    last.epoch = Some(out.log.len());
    last.save(&dir.join("final.json"))?;

    let metrics = out.metrics();
    let manifest = RunManifest {
        format: RUN_FORMAT.to_string(),
        run_digest: digest,
        data_digest: cfg.data_digest(),
        k: spec.k,
        regime: spec.regime,
        n_train: spec.n_train,
        seed: spec.seed,
        epochs: regime.epochs,
        ssl_epochs: if spec.regime.has_ssl() { regime.ssl_epochs } else { 0 },
        best_epoch: out.best_epoch,
        best_metric: out.best_metric,
        best_mean_of_ratios: best_report.mean_of_ratios,
        best_all_on_ratio: best_report.all_on_ratio,
        convergence_threshold: cfg.study.convergence_threshold,
        convergence_epoch: convergence_epoch(&metrics, cfg.study.convergence_threshold),
        wallclock_s,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    log::info!(
        "{}: best {:.4} at epoch {:?} in {:.1}s",
        dir.display(),
        manifest.best_metric,
        manifest.best_epoch,
        wallclock_s
    );
    Ok(RunResult { spec, manifest, metrics })
}

/// Loads the datasets for `k` and trains one run.
pub fn cmd_train(cfg: &ExperimentConfig, spec: RunSpec) -> Result<RunResult> {
    let train_file = load_dataset(cfg, spec.k, Split::Train, spec.regime.needs_labels())?;
    let test_file = load_dataset(cfg, spec.k, Split::Test, true)?;
    let train_set = ordered_train_set(cfg, &train_file)?;
    train_run(cfg, spec, &train_set, &test_file.examples()?)
}

/// Loads a checkpoint written under the same configuration.
pub fn load_model(cfg: &ExperimentConfig, path: &Path) -> Result<GnnModel> {
    let ckpt = ModelCheckpoint::load(path)?;
    if ckpt.config_digest != cfg.run_digest() {
        return Err(Error::Data(format!(
            "{} was produced by configuration {}, current is {}",
            path.display(),
            ckpt.config_digest,
            cfg.run_digest()
        )));
    }
    ckpt.to_model()
}

/// Evaluates a checkpoint on the labeled test set of every `k`.
pub fn cmd_eval(cfg: &ExperimentConfig, checkpoint: &Path, ks: &[usize]) -> Result<Vec<EvalReport>> {
    let model = load_model(cfg, checkpoint)?;
    ks.iter()
        .map(|&k| {
            let test = load_dataset(cfg, k, Split::Test, true)?.examples()?;
            evaluate(&model, &test, &cfg.system)
        })
        .collect()
}

pub fn eval_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from("k_test,ratio_of_sums,mean_of_ratios,all_on_ratio\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.k_test, r.ratio_of_sums, r.mean_of_ratios, r.all_on_ratio
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// Sweeps

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Study {
    Fig2a,
    Fig2b,
    Fig2c,
    Fig2d,
}

impl Study {
    pub const ALL: [Study; 4] = [Study::Fig2a, Study::Fig2b, Study::Fig2c, Study::Fig2d];

    pub fn as_str(self) -> &'static str {
        match self {
            Study::Fig2a => "fig2a",
            Study::Fig2b => "fig2b",
            Study::Fig2c => "fig2c",
            Study::Fig2d => "fig2d",
        }
    }
}

impl fmt::Display for Study {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Study {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Study::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown study {s:?}")))
    }
}

const BASE_REGIMES: [RegimeKind; 2] = [RegimeKind::Supervised, RegimeKind::Unsupervised];

fn base_regime(r: RegimeKind) -> RegimeKind {
    match r {
        RegimeKind::SslThenSupervised => RegimeKind::Supervised,
        RegimeKind::SslThenUnsupervised => RegimeKind::Unsupervised,
        other => other,
    }
}

fn study_specs(cfg: &ExperimentConfig, study: Study) -> Vec<RunSpec> {
    let n = cfg.data.n_train;
    let mut specs = Vec::new();
    let mut push = |k: usize, regime: RegimeKind, n_train: usize| {
        for &seed in &cfg.training.seeds {
            specs.push(RunSpec { k, regime, n_train, seed });
        }
    };
    match study {
        Study::Fig2a => {
            for &k in &cfg.k_list {
                for r in BASE_REGIMES {
                    push(k, r, n);
                }
            }
        }
        Study::Fig2b => {
            for &k in &cfg.k_list {
                for r in RegimeKind::ALL {
                    push(k, r, n);
                }
            }
        }
        Study::Fig2c => {
            for &k in &cfg.study.sample_complexity_k {
                for &size in &cfg.study.sample_sizes {
                    for r in BASE_REGIMES {
                        push(k, r, size);
                    }
                }
            }
        }
        Study::Fig2d => {
            for &k in &cfg.study.generalization_k_train {
                for r in BASE_REGIMES {
                    push(k, r, n);
                }
            }
        }
    }
    specs
}

/// `(k, split)` pairs a study reads, with whether full labels are needed.
fn study_inputs(cfg: &ExperimentConfig, studies: &[Study]) -> BTreeMap<(usize, Split), bool> {
    let mut need: BTreeMap<(usize, Split), bool> = BTreeMap::new();
    for &study in studies {
        for spec in study_specs(cfg, study) {
            let e = need.entry((spec.k, Split::Train)).or_insert(false);
            *e |= spec.regime.needs_labels();
            need.insert((spec.k, Split::Test), true);
        }
        if study == Study::Fig2d {
            for &k in &cfg.k_list {
                need.insert((k, Split::Test), true);
            }
        }
    }
    need
}

/// Every missing or unusable input, reported together before any work.
pub fn check_sweep_inputs(cfg: &ExperimentConfig, studies: &[Study]) -> Result<()> {
    let mut problems = Vec::new();
    for ((k, split), labeled) in study_inputs(cfg, studies) {
        let path = dataset_path(cfg, k, split);
        if !path.exists() {
            problems.push(format!("missing {}", path.display()));
            continue;
        }
        match DatasetFile::read(&path).and_then(|f| check_dataset(cfg, &path, &f, k, split, labeled)) {
            Ok(()) => {}
            Err(e) => problems.push(e.to_string()),
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::Data(format!("sweep inputs not ready:\n  {}", problems.join("\n  "))))
    }
}

struct SweepData {
    train: BTreeMap<usize, Vec<Example>>,
    test: BTreeMap<usize, Vec<Example>>,
}

fn load_sweep_data(cfg: &ExperimentConfig, studies: &[Study]) -> Result<SweepData> {
    let mut data = SweepData {
        train: BTreeMap::new(),
        test: BTreeMap::new(),
    };
    for ((k, split), labeled) in study_inputs(cfg, studies) {
        let file = load_dataset(cfg, k, split, labeled)?;
        match split {
            Split::Train => data.train.insert(k, ordered_train_set(cfg, &file)?),
            Split::Test => data.test.insert(k, file.examples()?),
        };
    }
    Ok(data)
}

fn fmt_opt(x: Option<usize>) -> String {
    x.map_or_else(|| "none".to_string(), |v| v.to_string())
}

/// Rows grouped by a key, in first-seen order of `runs`.
fn group<'a, K: PartialEq + Copy>(runs: &'a [RunResult], key: impl Fn(&RunResult) -> K) -> Vec<(K, Vec<&'a RunResult>)> {
    let mut out: Vec<(K, Vec<&RunResult>)> = Vec::new();
    for r in runs {
        let k = key(r);
        match out.iter_mut().find(|(g, _)| *g == k) {
            Some((_, v)) => v.push(r),
            None => out.push((k, vec![r])),
        }
    }
    out
}

fn per_seed_csv(runs: &[RunResult]) -> String {
    let mut out = String::from("k,n_train,regime,seed,best_epoch,ratio_of_sums,mean_of_ratios,all_on_ratio\n");
    for r in runs {
        let m = &r.manifest;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            m.k,
            m.n_train,
            m.regime,
            m.seed,
            fmt_opt(m.best_epoch),
            m.best_metric,
            m.best_mean_of_ratios,
            m.best_all_on_ratio
        ));
    }
    out
}

fn fig2a_csv(runs: &[RunResult]) -> String {
    let mut out = String::from("k,regime,mean,std\n");
    for ((k, regime), rs) in group(runs, |r| (r.spec.k, r.spec.regime)) {
        let vals: Vec<f64> = rs.iter().map(|r| r.manifest.best_metric).collect();
        let (mean, std) = mean_std(&vals);
        out.push_str(&format!("{k},{regime},{mean},{std}\n"));
    }
    out
}

fn fig2b_csv(runs: &[RunResult], threshold: f64) -> (String, String) {
    let mut out = String::from("k,regime,ssl_flag,convergence_epoch\n");
    let mut per_seed = String::from("k,regime,ssl_flag,seed,convergence_epoch\n");
    for ((k, regime), rs) in group(runs, |r| (r.spec.k, r.spec.regime)) {
        let ssl = u8::from(regime.has_ssl());
        let base = base_regime(regime);
        let epochs: Vec<Option<usize>> = rs.iter().map(|r| convergence_epoch(&r.metrics, threshold)).collect();
        for (r, e) in rs.iter().zip(&epochs) {
            per_seed.push_str(&format!("{k},{base},{ssl},{},{}\n", r.spec.seed, fmt_opt(*e)));
        }
        let hit: Vec<f64> = epochs.iter().flatten().map(|&e| e as f64).collect();
        let excluded = epochs.len() - hit.len();
        if excluded > 0 {
            log::warn!("fig2b k={k} {regime}: {excluded} of {} seeds never exceeded {threshold}", epochs.len());
        }
        let cell = if hit.is_empty() {
            "none".to_string()
        } else {
            mean_std(&hit).0.to_string()
        };
        out.push_str(&format!("{k},{base},{ssl},{cell}\n"));
    }
    (out, per_seed)
}

fn fig2c_csv(runs: &[RunResult]) -> String {
    let mut out = String::from("k,n_train,regime,mean,std\n");
    for ((k, n, regime), rs) in group(runs, |r| (r.spec.k, r.spec.n_train, r.spec.regime)) {
        let vals: Vec<f64> = rs.iter().map(|r| r.manifest.best_metric).collect();
        let (mean, std) = mean_std(&vals);
        out.push_str(&format!("{k},{n},{regime},{mean},{std}\n"));
    }
    out
}

struct GenCell {
    k_train: usize,
    k_test: usize,
    regime: RegimeKind,
    seed: u64,
    report: EvalReport,
}

fn fig2d_cells(cfg: &ExperimentConfig, runs: &[RunResult], data: &SweepData) -> Result<Vec<GenCell>> {
    let mut cells = Vec::new();
    for r in runs {
        let model = load_model(cfg, &r.spec.dir(cfg).join("best.json"))?;
        for &k_test in &cfg.k_list {
            let report = evaluate(&model, &data.test[&k_test], &cfg.system)?;
            cells.push(GenCell {
                k_train: r.spec.k,
                k_test,
                regime: r.spec.regime,
                seed: r.spec.seed,
                report,
            });
        }
    }
    Ok(cells)
}

fn fig2d_csv(cells: &[GenCell]) -> (String, String) {
    let mut out = String::from("k_train,k_test,regime,mean,std\n");
    let mut per_seed = String::from("k_train,k_test,regime,seed,ratio_of_sums,mean_of_ratios,all_on_ratio\n");
    let mut keys: Vec<(usize, RegimeKind, usize)> = Vec::new();
    for c in cells {
        per_seed.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            c.k_train, c.k_test, c.regime, c.seed, c.report.ratio_of_sums, c.report.mean_of_ratios, c.report.all_on_ratio
        ));
        let key = (c.k_train, c.regime, c.k_test);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    for (k_train, regime, k_test) in keys {
        let vals: Vec<f64> = cells
            .iter()
            .filter(|c| (c.k_train, c.regime, c.k_test) == (k_train, regime, k_test))
            .map(|c| c.report.ratio_of_sums)
            .collect();
        let (mean, std) = mean_std(&vals);
        out.push_str(&format!("{k_train},{k_test},{regime},{mean},{std}\n"));
    }
    (out, per_seed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultsManifest {
    pub format: String,
    pub run_digest: String,
    pub data_digest: String,
    pub studies: Vec<String>,
    pub files: Vec<String>,
    pub seeds: Vec<u64>,
}

/// Runs every cell the requested studies need (skipping finished ones) and
/// writes their CSVs. Returns the paths written.
pub fn cmd_sweep(cfg: &ExperimentConfig, studies: &[Study]) -> Result<Vec<PathBuf>> {
    check_sweep_inputs(cfg, studies)?;
    let data = load_sweep_data(cfg, studies)?;

    let mut specs: Vec<RunSpec> = studies.iter().flat_map(|&s| study_specs(cfg, s)).collect();
    specs.sort();
    specs.dedup();
    log::info!("sweep over {} runs", specs.len());
    let results: Vec<RunResult> = specs
        .par_iter()
        .map(|&spec| train_run(cfg, spec, &data.train[&spec.k], &data.test[&spec.k]))
        .collect::<Result<_>>()?;
    let find = |spec: &RunSpec| results.iter().find(|r| r.spec == *spec).cloned().expect("every spec ran");

    let dir = results_dir(cfg);
    let mut files = Vec::new();
    let mut emit = |name: String, text: String| -> Result<()> {
        let path = dir.join(&name);
        write_text(&path, &text)?;
        files.push(path);
        Ok(())
    };
    for &study in studies {
        let runs: Vec<RunResult> = study_specs(cfg, study).iter().map(find).collect();
        match study {
            Study::Fig2a => {
                emit("fig2a.csv".into(), fig2a_csv(&runs))?;
                emit("fig2a_per_seed.csv".into(), per_seed_csv(&runs))?;
            }
            Study::Fig2b => {
                let (agg, per_seed) = fig2b_csv(&runs, cfg.study.convergence_threshold);
                emit("fig2b.csv".into(), agg)?;
                emit("fig2b_per_seed.csv".into(), per_seed)?;
            }
            Study::Fig2c => {
                emit("fig2c.csv".into(), fig2c_csv(&runs))?;
                emit("fig2c_per_seed.csv".into(), per_seed_csv(&runs))?;
            }
            Study::Fig2d => {
                let cells = fig2d_cells(cfg, &runs, &data)?;
                let (agg, per_seed) = fig2d_csv(&cells);
                emit("fig2d.csv".into(), agg)?;
                emit("fig2d_per_seed.csv".into(), per_seed)?;
            }
        }
    }
    let manifest = ResultsManifest {
        format: RESULTS_FORMAT.to_string(),
        run_digest: cfg.run_digest(),
        data_digest: cfg.data_digest(),
        studies: studies.iter().map(|s| s.to_string()).collect(),
        files: files
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect(),
        seeds: cfg.training.seeds.clone(),
    };
    let mpath = dir.join("manifest.json");
    write_json(&mpath, &manifest)?;
    files.push(mpath);
    Ok(files)
}

// ---------------------------------------------------------------------------
// Benchmark and validation

pub fn cmd_bench(cfg: &ExperimentConfig) -> Result<(Vec<BenchRow>, PathBuf)> {
    let rows = label_timing_benchmark(
        &cfg.bench.k_values,
        cfg.bench.n_samples,
        &cfg.system,
        &cfg.geometry,
        &cfg.path_loss,
        cfg.seed,
        cfg.data.k_max_exhaustive,
    )?;
    let path = results_dir(cfg).join("bench_labeling.csv");
    write_text(&path, &bench_csv(&rows))?;
    Ok((rows, path))
}

#[derive(Clone, Debug, PartialEq)]
pub enum Validated {
    Dataset { k: usize, n: usize, labeled: usize },
    Checkpoint { dims: Vec<usize>, params: usize },
}

/// Checks a dataset (optionally re-deriving every label) or a checkpoint.
pub fn cmd_validate(path: &Path, full: bool) -> Result<Validated> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let first = text.lines().next().unwrap_or_default();
    if first.contains(crate::dataset::DATASET_FORMAT) {
        let file = DatasetFile::parse(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        if full {
            file.validate(true)?;
        }
        return Ok(Validated::Dataset {
            k: file.header.k,
            n: file.records.len(),
            labeled: file.n_labeled(),
        });
    }
    let ckpt: ModelCheckpoint =
        serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let model = ckpt.to_model()?;
    Ok(Validated::Checkpoint {
        dims: model.dims.clone(),
        params: model.n_params(),
    })
}
