use std::fs;
use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{CellSpec, DatasetSource, ExperimentConfig, SplitSource};
use crate::container;
use crate::data::{
    align_all, generate_synthetic, load_dataset, split_dataset, AlignedSegment, AlignmentDiagnostics, Folds,
    SegmentKey, SplitManifest, ALIGNED_KIND, DATASET_KIND,
};
use crate::error::{Error, Result};
use crate::eval::{
    compare, evaluate, expected_random_mae, loss_curves_svg, mean_abs_error, random_baseline, results_table, scatter_svg, EvalReport,
    ResultsTable, SignificanceResult, TestKind, RESULTS_KIND,
};
use crate::models::{build_model, MultiTaskOutput};
use crate::training::{train, TrainingHistory, HISTORY_KIND};

pub const PREDICTIONS_KIND: &str = "mmsa-predictions";
pub const SIGNIFICANCE_KIND: &str = "mmsa-significance";
pub const CELLS_KIND: &str = "mmsa-cells";

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "MMSA_WORKERS";

/// Worker threads for grid cells: `MMSA_WORKERS` if set to a positive
/// integer, otherwise the available parallelism.
pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub key: String,
    pub gold: f64,
    pub output: MultiTaskOutput,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellStatus {
    pub model_id: String,
    pub cell: CellSpec,
    pub seed: u64,
    pub train_seed: u64,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineRecord {
    pub seed: u64,
    pub random_mae: f64,
    pub zero_mae: f64,
    /// Expected random MAE against these test labels.
    pub expected_random_mae: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alignment: Option<AlignmentDiagnostics>,
}

/// Read a segments or aligned-segments container, aligning raw segments.
pub fn load_segments(path: &Path) -> Result<(Vec<AlignedSegment>, Option<AlignmentDiagnostics>)> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut first = String::new();
    std::io::BufReader::new(file)
        .read_line(&mut first)
        .map_err(|e| Error::io(path, e))?;
    let header: container::Header = serde_json::from_str(first.trim())
        .map_err(|e| Error::Contract(format!("{}: bad container header: {e}", path.display())))?;
    match header.format.as_str() {
        DATASET_KIND => {
            let (aligned, diag) = align_all(&load_dataset(path)?)?;
            Ok((aligned, Some(diag)))
        }
        ALIGNED_KIND => Ok((container::read_file(path, ALIGNED_KIND)?, None)),
        other => Err(Error::Contract(format!(
            "{}: expected `{DATASET_KIND}` or `{ALIGNED_KIND}`, found `{other}`",
            path.display()
        ))),
    }
}

/// Load or generate the dataset and split it into folds.
pub fn prepare_data(config: &ExperimentConfig) -> Result<(Folds<AlignedSegment>, DataSummary)> {
    let (segments, alignment) = match &config.dataset {
        DatasetSource::Path(p) => load_segments(p)?,
        DatasetSource::Synthetic { config, seed } => {
            let (a, d) = align_all(&generate_synthetic(config, *seed)?)?;
            (a, Some(d))
        }
    };
    let manifest = match &config.split {
        SplitSource::Manifest(p) => SplitManifest::load(p)?,
        SplitSource::BundledMosi => SplitManifest::bundled_mosi(),
        SplitSource::Sizes { train, validation } => {
            let keys: Vec<String> = segments.iter().map(SegmentKey::key).collect();
            SplitManifest::from_sizes(&keys, *train, *validation)?
        }
    };
    let folds = split_dataset(segments, &manifest)?;
    let (train, validation, test) = folds.sizes();
    if train == 0 || validation == 0 || test == 0 {
        return Err(Error::Config(format!(
            "every fold needs at least one segment (train {train}, validation {validation}, test {test})"
        )));
    }
    Ok((
        folds,
        DataSummary {
            train,
            validation,
            test,
            alignment,
        },
    ))
}

pub fn model_id(cell: &CellSpec, seed: u64) -> String {
    format!("{}_seed{seed}", cell.slug())
}

fn cell_dir(root: &Path, cell: &CellSpec, seed: u64) -> PathBuf {
    root.join("cells").join(model_id(cell, seed))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_text(path, &s)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

struct CellJob {
    index: usize,
    cell: CellSpec,
    seed: u64,
}

struct CellResult {
    status: CellStatus,
    report: Option<EvalReport>,
    predictions: Vec<f64>,
}

fn run_cell(config: &ExperimentConfig, job: &CellJob, folds: &Folds<AlignedSegment>, dir: &Path) -> Result<(EvalReport, Vec<f64>)> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let train_seed = ExperimentConfig::cell_seed(job.seed, job.index);
    let spec = config.model_spec(&job.cell);
    let mut network = build_model(&spec, train_seed)?;
    let train_config = crate::training::TrainConfig {
        seed: train_seed,
        ..config.train.clone()
    };
    let history = train(&mut network, &folds.train, &folds.validation, &train_config)?;
    let outputs = network.predict_all(&folds.test)?;
    let labels: Vec<_> = folds.test.iter().map(|s| s.labels).collect();
    let id = model_id(&job.cell, job.seed);
    let report = evaluate(&id, &spec, job.seed, &outputs, &labels)?;

    let records: Vec<PredictionRecord> = folds
        .test
        .iter()
        .zip(&outputs)
        .map(|(s, o)| PredictionRecord {
            key: s.key.clone(),
            gold: s.labels.score,
            output: o.clone(),
        })
        .collect();
    container::write_file(&dir.join("history.jsonl"), HISTORY_KIND, &history.epochs)?;
    write_json(&dir.join("training.json"), &TrainingSummary::from(&history))?;
    container::write_file(&dir.join("predictions.jsonl"), PREDICTIONS_KIND, &records)?;
    network.save(&dir.join("model.ckpt"))?;
    if config.plots {
        write_cell_plots(dir, &id, &history, &records)?;
    }
    write_json(&dir.join("report.json"), &report)?;
    Ok((report, outputs.iter().map(|o| o.score).collect()))
}

/// Best-epoch summary stored next to the per-epoch stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub epochs: usize,
    pub best_epoch: usize,
    pub best_validation_mae: f64,
    pub stopped_early: bool,
}

impl From<&TrainingHistory> for TrainingSummary {
    fn from(h: &TrainingHistory) -> Self {
        TrainingSummary {
            epochs: h.epochs.len(),
            best_epoch: h.best_epoch,
            best_validation_mae: h.best_validation_mae,
            stopped_early: h.stopped_early,
        }
    }
}

fn write_cell_plots(dir: &Path, id: &str, history: &TrainingHistory, records: &[PredictionRecord]) -> Result<()> {
    let preds: Vec<f64> = records.iter().map(|r| r.output.score).collect();
    let golds: Vec<f64> = records.iter().map(|r| r.gold).collect();
    write_text(&dir.join("scatter.svg"), &scatter_svg(&format!("{id}: test predictions"), &preds, &golds))?;
    write_text(&dir.join("loss.svg"), &loss_curves_svg(&format!("{id}: losses"), history))
}

/// Everything a finished run wrote, in memory.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub data: DataSummary,
    pub reports: Vec<EvalReport>,
    pub statuses: Vec<CellStatus>,
    pub significance: Vec<SignificanceResult>,
    pub table: ResultsTable,
}

impl RunSummary {
    pub fn failed(&self) -> usize {
        self.statuses.iter().filter(|s| !s.ok).count()
    }
}

fn pairwise(
    results: &[(String, Vec<f64>)],
    test: TestKind,
) -> Result<Vec<SignificanceResult>> {
    let mut out = Vec::new();
    for i in 0..results.len() {
        for j in i + 1..results.len() {
            out.push(compare(&results[i].0, &results[i].1, &results[j].0, &results[j].1, test)?);
        }
    }
    Ok(out)
}

/// Train and evaluate every (seed, cell) pair on `workers` threads and write
/// the results directory. Per-cell failures are recorded and do not stop
/// the run.
pub fn run_experiment(config: &ExperimentConfig, workers: usize, log: &(dyn Fn(&str) + Sync)) -> Result<RunSummary> {
    config.validate()?;
    let (folds, data) = prepare_data(config)?;
    let root = &config.output_dir;
    fs::create_dir_all(root.join("cells")).map_err(|e| Error::io(root, e))?;
    write_text(&root.join("config.json"), &config.to_pretty_json())?;
    write_json(&root.join("data.json"), &data)?;
    log(&format!(
        "data: {} train / {} validation / {} test segments",
        data.train, data.validation, data.test
    ));

    let jobs: Vec<CellJob> = config
        .seeds
        .iter()
        .flat_map(|&seed| {
            config
                .cells
                .iter()
                .enumerate()
                .map(move |(index, &cell)| CellJob { index, cell, seed })
        })
        .collect();
    let total = jobs.len();
    let finished = AtomicUsize::new(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let results: Vec<CellResult> = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let dir = cell_dir(root, &job.cell, job.seed);
                for stale in ["report.json", "error.txt"] {
                    let _ = fs::remove_file(dir.join(stale));
                }
                let id = model_id(&job.cell, job.seed);
                let outcome = run_cell(config, job, &folds, &dir);
                let status = CellStatus {
                    model_id: id.clone(),
                    cell: job.cell,
                    seed: job.seed,
                    train_seed: ExperimentConfig::cell_seed(job.seed, job.index),
                    ok: outcome.is_ok(),
                    error: outcome.as_ref().err().map(|e| e.to_string()),
                };
                let k = finished.fetch_add(1, Ordering::Relaxed) + 1;
                match outcome {
                    Ok((report, predictions)) => {
                        let cc = report.cc.map_or("undefined".to_string(), |c| format!("{c:.3}"));
                        log(&format!("[{k}/{total}] {id}: CC {cc}, MAE {:.3}", report.mae));
                        CellResult {
                            status,
                            report: Some(report),
                            predictions,
                        }
                    }
                    Err(e) => {
                        log(&format!("[{k}/{total}] {id}: FAILED: {e}"));
                        let _ = fs::create_dir_all(&dir);
                        let _ = fs::write(dir.join("error.txt"), format!("{e}\n"));
                        CellResult {
                            status,
                            report: None,
                            predictions: Vec::new(),
                        }
                    }
                }
            })
            .collect()
    });

    let mut reports = Vec::new();
    let mut statuses = Vec::new();
    let mut significance = Vec::new();
    for &seed in &config.seeds {
        let mut per_seed = Vec::new();
        for r in results.iter().filter(|r| r.status.seed == seed) {
            if let Some(rep) = &r.report {
                per_seed.push((rep.model_id.clone(), r.predictions.clone()));
            }
        }
        significance.extend(pairwise(&per_seed, config.significance)?);
    }
    for r in results {
        statuses.push(r.status);
        reports.extend(r.report);
    }

    let golds: Vec<f64> = folds.test.iter().map(|s| s.labels.score).collect();
    let zero_mae = mean_abs_error(&vec![0.0; golds.len()], &golds)?;
    let baselines = config
        .seeds
        .iter()
        .map(|&seed| {
            Ok(BaselineRecord {
                seed,
                random_mae: mean_abs_error(&random_baseline(golds.len(), seed)?, &golds)?,
                zero_mae,
                expected_random_mae: expected_random_mae(&golds)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let expected: Vec<_> = config.cells.iter().map(|c| config.model_spec(c)).collect();
    let table = results_table(&reports, &significance, &expected)?;
    container::write_file(&root.join("results.jsonl"), RESULTS_KIND, &reports)?;
    container::write_file(&root.join("significance.jsonl"), SIGNIFICANCE_KIND, &significance)?;
    container::write_file(&root.join("cells.jsonl"), CELLS_KIND, &statuses)?;
    write_json(&root.join("baseline.json"), &baselines)?;
    write_tables(root, &table)?;
    Ok(RunSummary {
        data,
        reports,
        statuses,
        significance,
        table,
    })
}

fn write_tables(root: &Path, table: &ResultsTable) -> Result<()> {
    write_text(&root.join("table.txt"), &table.render_text())?;
    container::write_file(&root.join("table.jsonl"), crate::eval::TABLE_KIND, &table.cells)
}

/// Outcome of regenerating a report from a results directory.
#[derive(Clone, Debug)]
pub struct ReportOutcome {
    pub table: ResultsTable,
    /// Model ids whose cell outputs are absent.
    pub missing: Vec<String>,
}

fn read_predictions(dir: &Path) -> Result<Vec<PredictionRecord>> {
    container::read_file(&dir.join("predictions.jsonl"), PREDICTIONS_KIND)
}

/// Rebuild tables, significance tests and plots from stored per-cell outputs.
pub fn report(root: &Path) -> Result<ReportOutcome> {
    let config = ExperimentConfig::load(&root.join("config.json"))?;
    let mut reports = Vec::new();
    let mut missing = Vec::new();
    let mut significance = Vec::new();
    for &seed in &config.seeds {
        let mut per_seed = Vec::new();
        for cell in &config.cells {
            let dir = cell_dir(root, cell, seed);
            let id = model_id(cell, seed);
            let loaded = (|| -> Result<(EvalReport, Vec<PredictionRecord>)> {
                Ok((read_json(&dir.join("report.json"))?, read_predictions(&dir)?))
            })();
            match loaded {
                Ok((rep, preds)) => {
                    if config.plots {
                        let epochs: Vec<crate::training::EpochRecord> =
                            container::read_file(&dir.join("history.jsonl"), HISTORY_KIND)?;
                        let summary: TrainingSummary = read_json(&dir.join("training.json"))?;
                        let history = TrainingHistory {
                            epochs,
                            best_epoch: summary.best_epoch,
                            best_validation_mae: summary.best_validation_mae,
                            stopped_early: summary.stopped_early,
                        };
                        write_cell_plots(&dir, &id, &history, &preds)?;
                    }
                    per_seed.push((id, preds.iter().map(|p| p.output.score).collect::<Vec<f64>>()));
                    reports.push(rep);
                }
                Err(_) => missing.push(id),
            }
        }
        significance.extend(pairwise(&per_seed, config.significance)?);
    }
    let expected: Vec<_> = config.cells.iter().map(|c| config.model_spec(c)).collect();
    let table = results_table(&reports, &significance, &expected)?;
    write_tables(root, &table)?;
    Ok(ReportOutcome { table, missing })
}

/// Significance test between two stored cells of a results directory.
pub fn compare_cells(root: &Path, a: &CellSpec, b: &CellSpec, seed: u64, test: TestKind) -> Result<SignificanceResult> {
    let load = |c: &CellSpec| -> Result<(String, Vec<f64>)> {
        let dir = cell_dir(root, c, seed);
        let preds = read_predictions(&dir)
            .map_err(|e| Error::Contract(format!("cell {} (seed {seed}) has no predictions: {e}", c.label())))?;
        Ok((model_id(c, seed), preds.iter().map(|p| p.output.score).collect()))
    };
    let (ia, pa) = load(a)?;
    let (ib, pb) = load(b)?;
    compare(&ia, &pa, &ib, &pb, test)
}
