//! The subcommands. Each writes its artifacts under `--out` and returns the
//! report it wrote.
//!
//! Reports hold only quantities fixed by the configuration, seed and data, so
//! reruns produce byte-identical files; wall-clock times go to a separate
//! `timing_<command>.json`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{Array2, Axis};
use serde::Serialize;
use ttclass_core::data::{self, Dataset};
use ttclass_core::{ArrConfig, Classifier, FeatureBasis, KernelModel, MandyConfig, TTModel};

use crate::args::{ClassSet, ClassifyArgs, DataArgs, EvalArgs, Method, SensitivityArgs, TrainArgs};
use crate::error::{CliError, Result};
use crate::metrics::{matrix_csv, Metrics};
use crate::model_file::{Model, ModelMeta, SavedModel};
use crate::pgm;

pub const MODEL_FILE: &str = "model.ttcm";
pub const MAX_GRAM_ENV: &str = "TTCLASS_MAX_GRAM";
/// Scores below this in absolute value count as no evidence for any label.
pub const NO_EVIDENCE: f64 = 1e-12;

const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

fn resolve(dir: &Path, explicit: &Option<PathBuf>, stem: &str) -> PathBuf {
    if let Some(p) = explicit {
        return p.clone();
    }
    let gz = dir.join(format!("{stem}.gz"));
    if gz.exists() {
        gz
    } else {
        dir.join(stem)
    }
}

impl DataArgs {
    pub fn train_paths(&self) -> (PathBuf, PathBuf) {
        (
            resolve(&self.data_dir, &self.train_images, TRAIN_IMAGES),
            resolve(&self.data_dir, &self.train_labels, TRAIN_LABELS),
        )
    }

    pub fn test_paths(&self) -> (PathBuf, PathBuf) {
        (
            resolve(&self.data_dir, &self.test_images, TEST_IMAGES),
            resolve(&self.data_dir, &self.test_labels, TEST_LABELS),
        )
    }
}

fn class_names(set: ClassSet) -> Vec<String> {
    match set {
        ClassSet::Digits => data::digit_class_names(),
        ClassSet::Fashion => data::fashion_class_names(),
    }
}

fn load(paths: (PathBuf, PathBuf), set: ClassSet) -> Result<Dataset<f64>> {
    for p in [&paths.0, &paths.1] {
        if !p.exists() {
            return Err(CliError::io(p, std::io::Error::new(std::io::ErrorKind::NotFound, "file not found")));
        }
    }
    Ok(data::load_idx::<f64>(&paths.0, &paths.1)?.with_class_names(class_names(set))?)
}

fn subsample(ds: Dataset<f64>, count: Option<usize>, seed: u64, what: &str) -> Result<Dataset<f64>> {
    match count {
        None => Ok(ds),
        Some(0) => Err(CliError::Validation(format!("{what} count must be positive"))),
        Some(c) if c > ds.len() => Err(CliError::Validation(format!(
            "{what} count {c} exceeds the {} available samples",
            ds.len()
        ))),
        Some(c) => Ok(ds.subsample(c, seed)?),
    }
}

fn max_gram() -> Result<usize> {
    match std::env::var(MAX_GRAM_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .ok()
            .filter(|&n: &usize| n > 0)
            .ok_or_else(|| CliError::Validation(format!("{MAX_GRAM_ENV} must be a positive integer, got {v:?}"))),
        Err(_) => Ok(MandyConfig::default().max_samples),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_text(path, &s)
}

#[derive(Serialize)]
struct Timing {
    command: &'static str,
    seconds: f64,
}

fn write_timing(out: &Path, command: &'static str, start: Instant) -> Result<()> {
    write_json(&out.join(format!("timing_{command}.json")), &Timing { command, seconds: start.elapsed().as_secs_f64() })
}

/// Everything a training run depends on, with defaults filled in.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    pub method: Method,
    pub alpha: f64,
    pub rank: usize,
    pub sweeps: usize,
    pub svd_threshold: f64,
    pub ridge: f64,
    pub tol: Option<f64>,
    pub reduce: bool,
    pub train_count: Option<usize>,
    pub seed: u64,
    pub block_size: usize,
    pub max_gram: usize,
    pub classes: ClassSet,
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
}

impl RunConfig {
    pub fn from_args(args: &TrainArgs) -> Result<Self> {
        if !args.alpha.is_finite() || args.alpha <= 0.0 {
            return Err(CliError::Validation(format!("--alpha must be positive, got {}", args.alpha)));
        }
        if !args.ridge.is_finite() || args.ridge < 0.0 {
            return Err(CliError::Validation(format!("--ridge must be non-negative, got {}", args.ridge)));
        }
        if args.block_size == 0 {
            return Err(CliError::Validation("--block-size must be positive".into()));
        }
        let (train_images, train_labels) = args.data.train_paths();
        let config = RunConfig {
            command: "train",
            method: args.method,
            alpha: args.alpha,
            rank: args.rank,
            sweeps: args.sweeps,
            svd_threshold: args.svd_threshold,
            ridge: args.ridge,
            tol: args.tol,
            reduce: args.reduce,
            train_count: args.train_count,
            seed: args.seed,
            block_size: args.block_size,
            max_gram: max_gram()?,
            classes: args.data.classes,
            train_images,
            train_labels,
        };
        if config.method == Method::Arr {
            config.arr().validate().map_err(|e| CliError::Validation(e.to_string()))?;
        }
        Ok(config)
    }

    pub fn arr(&self) -> ArrConfig {
        ArrConfig {
            rank: self.rank,
            sweeps: self.sweeps,
            svd_threshold: self.svd_threshold,
            seed: self.seed,
            tol: self.tol,
            ridge: self.ridge,
        }
    }

    pub fn mandy(&self) -> MandyConfig {
        MandyConfig { ridge: self.ridge, max_samples: self.max_gram, block_size: self.block_size }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TrainReport {
    pub config: RunConfig,
    pub samples: usize,
    pub image_shape: (usize, usize),
    pub training_accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gram_size: Option<usize>,
    /// Per label: residual before fitting, then after each half sweep.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residuals: Option<Vec<Vec<f64>>>,
    pub model_file: String,
}

pub fn train(args: &TrainArgs) -> Result<TrainReport> {
    let start = Instant::now();
    let config = RunConfig::from_args(args)?;
    let mut ds = load((config.train_images.clone(), config.train_labels.clone()), config.classes)?;
    if config.reduce {
        ds = ds.reduce_pool2()?;
    }
    let ds = subsample(ds, config.train_count, config.seed, "training")?;
    let basis = FeatureBasis::trig(config.alpha, ds.dim())?;
    log::info!("training {:?} on {} samples of dimension {}", config.method, ds.len(), ds.dim());

    let (model, meta_extra) = match config.method {
        Method::Mandy => {
            let m = KernelModel::fit(ds.x.view(), ds.y.view(), &basis, &config.mandy())?;
            (Model::Kernel(m), (Some(config.mandy()), None, None))
        }
        Method::Arr => {
            let m = TTModel::fit(ds.x.view(), ds.y.view(), &basis, &config.arr())?;
            let residuals = m.residuals.clone();
            (Model::Tensor(m), (None, Some(config.arr()), Some(residuals)))
        }
    };
    let predicted = model.classify_batch(ds.x.view())?;
    let metrics = Metrics::compute(&ds.labels, &predicted, &ds.class_names);

    let meta = ModelMeta {
        basis,
        image_shape: ds.image_shape,
        reduced: config.reduce,
        class_names: ds.class_names.clone(),
        mandy: meta_extra.0,
        arr: meta_extra.1,
        residuals: meta_extra.2.clone(),
    };
    ensure_dir(&args.out)?;
    let saved = SavedModel { meta, model };
    saved.save(&args.out.join(MODEL_FILE))?;
    let report = TrainReport {
        samples: ds.len(),
        image_shape: ds.image_shape,
        training_accuracy: metrics.accuracy,
        gram_size: (config.method == Method::Mandy).then_some(ds.len()),
        residuals: meta_extra.2,
        model_file: MODEL_FILE.to_string(),
        config,
    };
    write_json(&args.out.join("train_report.json"), &report)?;
    write_timing(&args.out, "train", start)?;
    Ok(report)
}

/// Brings raw images (`h·w × m`, values in `[0, 1]`) to the model's input shape.
pub fn prepare_images(meta: &ModelMeta, ds: Dataset<f64>) -> Result<Dataset<f64>> {
    let (h, w) = meta.image_shape;
    if ds.image_shape == (h, w) {
        return Ok(ds);
    }
    if meta.reduced && ds.image_shape == (2 * h, 2 * w) {
        return Ok(ds.reduce_pool2()?);
    }
    Err(CliError::Validation(format!(
        "images of shape {:?} do not fit a model for {:?}{}",
        ds.image_shape,
        meta.image_shape,
        if meta.reduced { " (pooled)" } else { "" }
    )))
}

#[derive(Clone, Debug, Serialize)]
pub struct Misclassified {
    pub index: usize,
    pub label: usize,
    pub predicted: usize,
    pub scores: Vec<f64>,
    pub no_evidence: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct EvalReport {
    pub command: &'static str,
    pub model: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
    pub test_count: Option<usize>,
    pub seed: u64,
    pub image_shape: (usize, usize),
    pub no_evidence_threshold: f64,
    pub no_evidence_count: usize,
    pub metrics: Metrics,
    pub misclassified: Vec<Misclassified>,
}

fn no_evidence(scores: ndarray::ArrayView1<f64>) -> bool {
    scores.iter().all(|v| v.abs() < NO_EVIDENCE)
}

fn run_evaluation(args: &EvalArgs, command: &'static str) -> Result<(EvalReport, SavedModel)> {
    let saved = SavedModel::load(&args.model)?;
    let (test_images, test_labels) = args.data.test_paths();
    let ds = load((test_images.clone(), test_labels.clone()), args.data.classes)?;
    let ds = subsample(prepare_images(&saved.meta, ds)?, args.test_count, args.seed, "test")?;
    if ds.is_empty() {
        return Err(CliError::Validation("the test set is empty".into()));
    }
    if ds.num_classes() != saved.model.num_labels() {
        return Err(CliError::Validation(format!(
            "test set has {} classes, model has {} labels",
            ds.num_classes(),
            saved.model.num_labels()
        )));
    }
    let scores = saved.model.decision_values_batch(ds.x.view())?;
    let predicted: Vec<usize> = scores.columns().into_iter().map(ttclass_core::argmax).collect();
    let metrics = Metrics::compute(&ds.labels, &predicted, &saved.meta.class_names);
    let misclassified = (0..ds.len())
        .filter(|&j| predicted[j] != ds.labels[j])
        .map(|j| Misclassified {
            index: j,
            label: ds.labels[j],
            predicted: predicted[j],
            scores: scores.column(j).to_vec(),
            no_evidence: no_evidence(scores.column(j)),
        })
        .collect();
    let no_evidence_count = scores.columns().into_iter().filter(|c| no_evidence(c.view())).count();
    let report = EvalReport {
        command,
        model: args.model.clone(),
        test_images,
        test_labels,
        test_count: args.test_count,
        seed: args.seed,
        image_shape: ds.image_shape,
        no_evidence_threshold: NO_EVIDENCE,
        no_evidence_count,
        metrics,
        misclassified,
    };
    Ok((report, saved))
}

pub fn evaluate(args: &EvalArgs) -> Result<EvalReport> {
    let start = Instant::now();
    let (report, saved) = run_evaluation(args, "evaluate")?;
    ensure_dir(&args.out)?;
    write_json(&args.out.join("evaluate_report.json"), &report)?;
    write_text(&args.out.join("confusion.csv"), &report.metrics.confusion_csv(&saved.meta.class_names))?;
    write_timing(&args.out, "evaluate", start)?;
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct MisclassificationHistogram {
    pub class: usize,
    pub name: String,
    pub misclassified: usize,
    /// Counts of wrong predictions per predicted label (own label is 0).
    pub predicted_as: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConfusionReport {
    pub command: &'static str,
    pub model: PathBuf,
    pub test_count: Option<usize>,
    pub seed: u64,
    pub accuracy: f64,
    pub confusion: Vec<Vec<usize>>,
    pub histograms: Vec<MisclassificationHistogram>,
}

pub fn confusion(args: &EvalArgs) -> Result<ConfusionReport> {
    let start = Instant::now();
    let (eval, saved) = run_evaluation(args, "confusion")?;
    let names = &saved.meta.class_names;
    let mis = eval.metrics.misclassification_counts();
    let histograms = mis
        .iter()
        .enumerate()
        .map(|(c, row)| MisclassificationHistogram {
            class: c,
            name: names[c].clone(),
            misclassified: row.iter().sum(),
            predicted_as: row.clone(),
        })
        .collect();
    let report = ConfusionReport {
        command: "confusion",
        model: args.model.clone(),
        test_count: args.test_count,
        seed: args.seed,
        accuracy: eval.metrics.accuracy,
        confusion: eval.metrics.confusion.clone(),
        histograms,
    };
    ensure_dir(&args.out)?;
    write_json(&args.out.join("confusion_report.json"), &report)?;
    write_text(&args.out.join("confusion.csv"), &eval.metrics.confusion_csv(names))?;
    write_text(&args.out.join("misclassification.csv"), &matrix_csv(&mis, names))?;
    write_timing(&args.out, "confusion", start)?;
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct Prediction {
    pub source: String,
    pub predicted: usize,
    pub name: String,
    pub scores: Vec<f64>,
    pub no_evidence: bool,
}

pub fn classify(args: &ClassifyArgs) -> Result<Vec<Prediction>> {
    let start = Instant::now();
    let saved = SavedModel::load(&args.model)?;
    let mut sources = Vec::new();
    let mut columns: Vec<Dataset<f64>> = Vec::new();
    let names = saved.meta.class_names.clone();
    for path in &args.images {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        let img = pgm::parse_pgm(&bytes)?;
        let idx = data::IdxImages { rows: img.height, cols: img.width, pixels: img.pixels };
        let ds = Dataset::from_bytes(&idx, &[0], names.clone())?;
        columns.push(prepare_images(&saved.meta, ds)?);
        sources.push(path.display().to_string());
    }
    if let Some(path) = &args.idx {
        let idx = data::load_idx_images(path)?;
        let total = idx.count();
        let count = args.count.unwrap_or(total.saturating_sub(args.first));
        if args.first + count > total || count == 0 {
            return Err(CliError::Validation(format!(
                "cannot take {count} images from index {} of {total}",
                args.first
            )));
        }
        let d = idx.rows * idx.cols;
        let sub = data::IdxImages {
            rows: idx.rows,
            cols: idx.cols,
            pixels: idx.pixels[args.first * d..(args.first + count) * d].to_vec(),
        };
        let ds = Dataset::from_bytes(&sub, &vec![0; count], names.clone())?;
        columns.push(prepare_images(&saved.meta, ds)?);
        sources.extend((args.first..args.first + count).map(|j| format!("{}#{j}", path.display())));
    }
    if sources.is_empty() {
        return Err(CliError::Validation("nothing to classify: pass --image or --idx".into()));
    }
    let views: Vec<_> = columns.iter().map(|d| d.x.view()).collect();
    let x = ndarray::concatenate(Axis(1), &views).map_err(|e| CliError::Validation(e.to_string()))?;
    let scores = saved.model.decision_values_batch(x.view())?;
    let predictions: Vec<Prediction> = scores
        .columns()
        .into_iter()
        .zip(sources)
        .map(|(s, source)| {
            let predicted = ttclass_core::argmax(s);
            Prediction { source, predicted, name: names[predicted].clone(), scores: s.to_vec(), no_evidence: no_evidence(s) }
        })
        .collect();
    ensure_dir(&args.out)?;
    write_json(&args.out.join("classify.json"), &predictions)?;
    write_timing(&args.out, "classify", start)?;
    Ok(predictions)
}

#[derive(Clone, Debug, Serialize)]
pub struct SensitivityMap {
    pub label: usize,
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub csv: String,
    pub pgm: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SensitivityReport {
    pub command: &'static str,
    pub model: PathBuf,
    pub baseline: f64,
    pub image_shape: (usize, usize),
    /// CSV files hold raw decision values; PGM files are scaled per label so
    /// the smallest value is black and the largest white.
    pub pgm_normalization: &'static str,
    pub maps: Vec<SensitivityMap>,
}

/// Images `baseline·1` with pixel `p` set to 1, one per column.
pub fn perturbed_images(d: usize, baseline: f64) -> Array2<f64> {
    let mut x = Array2::from_elem((d, d), baseline);
    for p in 0..d {
        x[[p, p]] = 1.0;
    }
    x
}

/// `maps[ℓ][p]` is label `ℓ`'s decision value for the image perturbed at pixel `p`.
pub fn sensitivity_maps<C: Classifier<f64>>(model: &C, d: usize, baseline: f64) -> Result<Array2<f64>> {
    Ok(model.decision_values_batch(perturbed_images(d, baseline).view())?)
}

pub fn sensitivity(args: &SensitivityArgs) -> Result<SensitivityReport> {
    let start = Instant::now();
    if !args.baseline.is_finite() {
        return Err(CliError::Validation("--baseline must be finite".into()));
    }
    if !(0.0..=1.0).contains(&args.baseline) {
        log::warn!("baseline {} lies outside [0, 1]", args.baseline);
    }
    let saved = SavedModel::load(&args.model)?;
    let (h, w) = saved.meta.image_shape;
    let maps = sensitivity_maps(&saved.model, h * w, args.baseline)?;
    ensure_dir(&args.out)?;
    let mut entries = Vec::new();
    for (label, row) in maps.rows().into_iter().enumerate() {
        let values = row.to_vec();
        let mut csv = String::new();
        for r in 0..h {
            let line: Vec<String> = values[r * w..(r + 1) * w].iter().map(|v| v.to_string()).collect();
            csv.push_str(&line.join(","));
            csv.push('\n');
        }
        let csv_name = format!("sensitivity_{label}.csv");
        let pgm_name = format!("sensitivity_{label}.pgm");
        write_text(&args.out.join(&csv_name), &csv)?;
        let img = pgm::min_max_gray(&values, w, h);
        let pgm_path = args.out.join(&pgm_name);
        fs::write(&pgm_path, pgm::encode_pgm(&img)).map_err(|e| CliError::io(&pgm_path, e))?;
        entries.push(SensitivityMap {
            label,
            name: saved.meta.class_names[label].clone(),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            csv: csv_name,
            pgm: pgm_name,
        });
    }
    let report = SensitivityReport {
        command: "sensitivity",
        model: args.model.clone(),
        baseline: args.baseline,
        image_shape: (h, w),
        pgm_normalization: "per-label min-max",
        maps: entries,
    };
    write_json(&args.out.join("sensitivity_report.json"), &report)?;
    write_timing(&args.out, "sensitivity", start)?;
    Ok(report)
}
