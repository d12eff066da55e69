//! Baseline vs. quantum-feature runs, repeated trials and parameter sweeps.
//!
//! Seeds are derived from the master seed by purpose:
//!
//! | purpose | derivation |
//! |---|---|
//! | circles points | `Dataset, 0` |
//! | MNIST subsample | `Subsample, 0` |
//! | train/test split | `Split, 0` |
//! | validation split for selection | `Split, 1` |
//! | episodes of trial `t` | stream `Episodes, t, 0` |
//! | measurements of trial `t` | `Measurement, 2t` (train), `2t + 1` (test) |
//! | coordinate order | `Training, 0` (baseline), `Training, t + 1` (trial `t`) |
//!
//! Sweep points reuse the master seed, so the data, the split and the baseline
//! are the same at every point.

use std::fmt;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use aqks::classifier::{accuracy, fit_with_report, LabeledDataset, SvmParams};
use aqks::data::{
    filter_digits, load_mnist_files, make_circles, split, stratified_subsample, RawDataset,
    SplitSpec,
};
use aqks::encoding::sample_episodes;
use aqks::features::{transform_dataset, write_feature_cache, FeatureMatrix};
use aqks::rng::{derive_seed, derive_stream, Domain};

use crate::config::{DatasetSpec, ExperimentConfig};
use crate::results::write_csv_file;

/// Train and test parts of a prepared dataset.
#[derive(Debug, Clone)]
pub struct SplitData {
    pub train: RawDataset,
    pub test: RawDataset,
}

/// Accuracy of one fitted model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodResult {
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub seconds: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub aqks: MethodResult,
    /// Wall-clock time spent computing features for both parts.
    pub transform_seconds: f64,
}

/// All trials of one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    pub axis: String,
    pub value: String,
    pub baseline: MethodResult,
    pub trials: Vec<TrialRecord>,
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl TrialSummary {
    pub fn aqks_test(&self) -> Vec<f64> {
        self.trials.iter().map(|t| t.aqks.test_accuracy).collect()
    }

    pub fn aqks_train(&self) -> Vec<f64> {
        self.trials.iter().map(|t| t.aqks.train_accuracy).collect()
    }

    /// `(μ_c, σ_c)` of the test accuracy across trials.
    pub fn test_stats(&self) -> (f64, f64) {
        mean_std(&self.aqks_test())
    }

    pub fn train_stats(&self) -> (f64, f64) {
        mean_std(&self.aqks_train())
    }
}

/// Runs `f` on a pool with `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .context("building worker pool")?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

/// Generates or loads the dataset named by the configuration.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<RawDataset> {
    match &cfg.dataset {
        DatasetSpec::Circles {
            n_per_class,
            factor,
            noise_std,
        } => Ok(make_circles(
            *n_per_class,
            *factor,
            *noise_std,
            derive_seed(cfg.master_seed, Domain::Dataset, 0),
        )?),
        DatasetSpec::Mnist {
            files,
            digits,
            subsample,
            scale_pixels,
        } => {
            let all = load_mnist_files(files).context("loading MNIST")?;
            let mut ds = filter_digits(&all, *digits)?;
            if let Some(n) = subsample {
                ds = stratified_subsample(&ds, *n, derive_seed(cfg.master_seed, Domain::Subsample, 0))?;
            }
            if *scale_pixels {
                ds.x = ds.x.map(|v| v / 255.0);
            }
            Ok(ds)
        }
    }
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<SplitData> {
    let ds = load_dataset(cfg)?;
    let spec = SplitSpec {
        train_fraction: cfg.train_fraction,
        seed: derive_seed(cfg.master_seed, Domain::Split, 0),
        stratified: true,
    };
    let (train, test) = split(&ds, &spec)?;
    Ok(SplitData { train, test })
}

fn fit_and_score(
    train: &LabeledDataset,
    test: &LabeledDataset,
    params: &SvmParams,
) -> Result<MethodResult> {
    let start = Instant::now();
    let (model, report) = fit_with_report(train, params)?;
    Ok(MethodResult {
        train_accuracy: accuracy(&model, train)?,
        test_accuracy: accuracy(&model, test)?,
        seconds: start.elapsed().as_secs_f64(),
        converged: report.converged,
    })
}

fn svm_params(cfg: &ExperimentConfig, index: u64) -> SvmParams {
    SvmParams {
        seed: derive_seed(cfg.master_seed, Domain::Training, index),
        ..cfg.svm
    }
}

/// Baseline on raw features; depends only on the data, the split and the
/// classifier settings.
pub fn run_baseline(cfg: &ExperimentConfig, data: &SplitData) -> Result<MethodResult> {
    fit_and_score(&data.train.to_labeled()?, &data.test.to_labeled()?, &svm_params(cfg, 0))
}

/// Features of both parts for trial `t`.
pub fn trial_features(
    cfg: &ExperimentConfig,
    data: &SplitData,
    t: usize,
) -> Result<(FeatureMatrix, FeatureMatrix)> {
    let transform = cfg.transform()?;
    let mut rng = derive_stream(cfg.master_seed, Domain::Episodes, t as u64, 0);
    let episodes = sample_episodes(
        cfg.episodes,
        cfg.qubits,
        data.train.dim(),
        &cfg.distribution()?,
        &mut rng,
    )?;
    let seed = |k: u64| derive_seed(cfg.master_seed, Domain::Measurement, 2 * t as u64 + k);
    let train = transform_dataset(&data.train.x, &episodes, &transform, seed(0))?;
    let test = transform_dataset(&data.test.x, &episodes, &transform, seed(1))?;
    Ok((train, test))
}

fn labeled(features: &FeatureMatrix, labels: &RawDataset) -> Result<LabeledDataset> {
    let raw = RawDataset::new(features.to_matrix(), labels.y.clone(), "")?;
    Ok(raw.to_labeled()?)
}

fn write_cache(path: &Path, fm: &FeatureMatrix, seed: u64) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    write_feature_cache(&mut w, fm, seed)?;
    std::io::Write::flush(&mut w)?;
    Ok(())
}

fn run_trial(cfg: &ExperimentConfig, data: &SplitData, t: usize) -> Result<TrialRecord> {
    let start = Instant::now();
    let (train_f, test_f) = trial_features(cfg, data, t)?;
    let transform_seconds = start.elapsed().as_secs_f64();
    if let Some(dir) = &cfg.out_dir {
        let features = dir.join("features");
        fs::create_dir_all(&features)?;
        write_cache(&features.join(format!("trial{t:03}_train.aqf")), &train_f, cfg.master_seed)?;
        write_cache(&features.join(format!("trial{t:03}_test.aqf")), &test_f, cfg.master_seed)?;
    }
    let aqks = fit_and_score(
        &labeled(&train_f, &data.train)?,
        &labeled(&test_f, &data.test)?,
        &svm_params(cfg, t as u64 + 1),
    )?;
    Ok(TrialRecord {
        trial: t,
        aqks,
        transform_seconds,
    })
}

/// Baseline once, then every trial, on an already prepared split. With an
/// output directory, writes `manifest.txt`, `results.csv` and feature caches;
/// on failure the completed trials are still written.
pub fn run_on_split(
    cfg: &ExperimentConfig,
    data: &SplitData,
    axis: &str,
    value: &str,
) -> Result<TrialSummary> {
    cfg.validate()?;
    with_threads(cfg.threads, || {
        if let Some(dir) = &cfg.out_dir {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            fs::write(dir.join("manifest.txt"), cfg.manifest())?;
        }
        let mut summary = TrialSummary {
            axis: axis.to_string(),
            value: value.to_string(),
            baseline: run_baseline(cfg, data).context("baseline")?,
            trials: Vec::with_capacity(cfg.trials),
        };
        let mut failure = None;
        for t in 0..cfg.trials {
            match run_trial(cfg, data, t) {
                Ok(record) => summary.trials.push(record),
                Err(e) => {
                    failure = Some(e.context(format!("trial {t}")));
                    break;
                }
            }
        }
        if let Some(dir) = &cfg.out_dir {
            write_csv_file(&dir.join("results.csv"), std::slice::from_ref(&summary))?;
        }
        match failure {
            Some(e) => Err(e),
            None => Ok(summary),
        }
    })?
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<TrialSummary> {
    cfg.validate()?;
    let data = with_threads(cfg.threads, || prepare(cfg))??;
    run_on_split(cfg, &data, "none", "-")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    SigmaD,
    Episodes,
    Qubits,
    Topology,
    AnnealTime,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::SigmaD => "sigma_d",
            SweepAxis::Episodes => "episodes",
            SweepAxis::Qubits => "qubits",
            SweepAxis::Topology => "topology",
            SweepAxis::AnnealTime => "anneal_time",
        }
    }

    /// Copy of `cfg` with this axis set to `value`.
    pub fn apply(self, cfg: &ExperimentConfig, value: &str) -> Result<ExperimentConfig> {
        let mut out = cfg.clone();
        let bad = |e: &dyn fmt::Display| anyhow::anyhow!("invalid value for `{}`: {e}", self.name());
        match self {
            SweepAxis::SigmaD => out.sigma_d = value.parse().map_err(|e| bad(&e))?,
            SweepAxis::Episodes => out.episodes = value.parse().map_err(|e| bad(&e))?,
            SweepAxis::Qubits => out.qubits = value.parse().map_err(|e| bad(&e))?,
            SweepAxis::Topology => out.topology = value.parse().map_err(|e| bad(&e))?,
            SweepAxis::AnnealTime => out.anneal_time = value.parse().map_err(|e| bad(&e))?,
        }
        out.validate()?;
        Ok(out)
    }
}

impl FromStr for SweepAxis {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "sigma_d" => SweepAxis::SigmaD,
            "episodes" => SweepAxis::Episodes,
            "qubits" => SweepAxis::Qubits,
            "topology" => SweepAxis::Topology,
            "anneal_time" => SweepAxis::AnnealTime,
            other => bail!(
                "invalid value for `axis`: expected one of sigma_d, episodes, qubits, topology, anneal_time; got `{other}`"
            ),
        })
    }
}

/// Result of one sweep value; failures are kept as messages so the sweep
/// can continue.
#[derive(Debug)]
pub struct SweepPoint {
    pub value: String,
    pub outcome: Result<TrialSummary>,
}

/// One experiment per value on a shared dataset and split. Writes
/// `sweep.csv` (successful points) and `manifest.txt` when an output
/// directory is configured.
pub fn run_sweep(cfg: &ExperimentConfig, axis: SweepAxis, values: &[String]) -> Result<Vec<SweepPoint>> {
    cfg.validate()?;
    with_threads(cfg.threads, || {
        let data = prepare(cfg)?;
        let mut points = Vec::with_capacity(values.len());
        for value in values {
            let outcome = axis.apply(cfg, value).and_then(|point_cfg| {
                let point_cfg = ExperimentConfig {
                    out_dir: None,
                    threads: None,
                    ..point_cfg
                };
                run_on_split(&point_cfg, &data, axis.name(), value)
            });
            points.push(SweepPoint {
                value: value.clone(),
                outcome,
            });
        }
        if let Some(dir) = &cfg.out_dir {
            fs::create_dir_all(dir)?;
            let mut manifest = cfg.manifest();
            manifest.push_str(&format!("sweep_axis = {}\nsweep_values = {}\n", axis.name(), values.join(",")));
            fs::write(dir.join("manifest.txt"), manifest)?;
            let ok: Vec<TrialSummary> = points
                .iter()
                .filter_map(|p| p.outcome.as_ref().ok().cloned())
                .collect();
            write_csv_file(&dir.join("sweep.csv"), &ok)?;
        }
        Ok(points)
    })?
}

/// Validation accuracy of each candidate `σ_d`, measured by splitting the
/// training part again; the test part is never touched.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub best: f64,
    pub scores: Vec<(f64, f64)>,
}

pub fn select_sigma_d(cfg: &ExperimentConfig, data: &SplitData, grid: &[f64], trials: usize) -> Result<Selection> {
    if grid.is_empty() {
        bail!("invalid configuration `sigma_grid`: empty");
    }
    let spec = SplitSpec {
        train_fraction: cfg.train_fraction,
        seed: derive_seed(cfg.master_seed, Domain::Split, 1),
        stratified: true,
    };
    let (fit_part, val_part) = split(&data.train, &spec)?;
    let inner = SplitData {
        train: fit_part,
        test: val_part,
    };
    let mut scores = Vec::with_capacity(grid.len());
    for &sigma in grid {
        let point = ExperimentConfig {
            sigma_d: sigma,
            trials,
            out_dir: None,
            ..cfg.clone()
        };
        let summary = run_on_split(&point, &inner, "sigma_d", &sigma.to_string())?;
        scores.push((sigma, summary.test_stats().0));
    }
    let best = scores
        .iter()
        .copied()
        .fold((f64::NAN, f64::NEG_INFINITY), |acc, (s, a)| if a > acc.1 { (s, a) } else { acc })
        .0;
    Ok(Selection { best, scores })
}
