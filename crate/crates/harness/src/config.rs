//! Experiment configuration: a TOML file with one section per stage, merged
//! with command-line overrides. Unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use aqks::classifier::SvmParams;
use aqks::encoding::{DistributionConfig, OffsetDistribution, TopologyKind};
use aqks::features::TransformConfig;
use aqks::sim::{Schedule, TransverseSign};
use serde::Deserialize;

pub const DEFAULT_SIGMA_GRID: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 4.0];
pub const DESK_MNIST_SUBSAMPLE: usize = 3000;
pub const DESK_MNIST_EPISODES: usize = 2000;
pub const FULL_MNIST_EPISODES: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Circles,
    Mnist,
}

impl FromStr for DatasetKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "circles" => Ok(DatasetKind::Circles),
            "mnist" => Ok(DatasetKind::Mnist),
            other => bail!("invalid value for `dataset`: expected `circles` or `mnist`, got `{other}`"),
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetKind::Circles => "circles",
            DatasetKind::Mnist => "mnist",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BMode {
    Zero,
    UniformTwoPi,
}

impl BMode {
    pub fn offset(self) -> OffsetDistribution {
        match self {
            BMode::Zero => OffsetDistribution::Zero,
            BMode::UniformTwoPi => OffsetDistribution::uniform_two_pi(),
        }
    }
}

impl FromStr for BMode {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(BMode::Zero),
            "uniform2pi" => Ok(BMode::UniformTwoPi),
            other => bail!("invalid value for `b_mode`: expected `zero` or `uniform2pi`, got `{other}`"),
        }
    }
}

impl fmt::Display for BMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BMode::Zero => "zero",
            BMode::UniformTwoPi => "uniform2pi",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSpec {
    Circles {
        n_per_class: usize,
        factor: f64,
        noise_std: f64,
    },
    Mnist {
        /// Image/label file pairs, stacked in order.
        files: Vec<(PathBuf, PathBuf)>,
        digits: (i32, i32),
        /// Stratified subsample size; `None` keeps every filtered image.
        subsample: Option<usize>,
        scale_pixels: bool,
    },
}

impl DatasetSpec {
    pub fn kind(&self) -> DatasetKind {
        match self {
            DatasetSpec::Circles { .. } => DatasetKind::Circles,
            DatasetSpec::Mnist { .. } => DatasetKind::Mnist,
        }
    }
}

/// Fully resolved settings of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub train_fraction: f64,
    pub qubits: usize,
    pub episodes: usize,
    pub sigma_d: f64,
    pub b_mode: BMode,
    pub topology: TopologyKind,
    pub anneal_time: f64,
    pub tau: f64,
    pub transverse_sign: TransverseSign,
    pub svm: SvmParams,
    pub trials: usize,
    pub master_seed: u64,
    pub out_dir: Option<PathBuf>,
    /// Worker threads; `None` lets the pool decide.
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    /// Documented defaults for a dataset kind at desk scale.
    pub fn defaults(kind: DatasetKind) -> Self {
        let (dataset, episodes, sigma_d, b_mode) = match kind {
            DatasetKind::Circles => (
                DatasetSpec::Circles {
                    n_per_class: 1000,
                    factor: 0.8,
                    noise_std: 0.04,
                },
                1000,
                1.0,
                BMode::UniformTwoPi,
            ),
            DatasetKind::Mnist => (
                DatasetSpec::Mnist {
                    files: Vec::new(),
                    digits: (3, 5),
                    subsample: Some(DESK_MNIST_SUBSAMPLE),
                    scale_pixels: false,
                },
                DESK_MNIST_EPISODES,
                0.01,
                BMode::Zero,
            ),
        };
        Self {
            dataset,
            train_fraction: 0.75,
            qubits: 2,
            episodes,
            sigma_d,
            b_mode,
            topology: TopologyKind::Linear,
            anneal_time: 5.0,
            tau: 1.0,
            transverse_sign: TransverseSign::Negative,
            svm: SvmParams::default(),
            trials: 10,
            master_seed: 0,
            out_dir: None,
            threads: None,
        }
    }

    pub fn schedule(&self) -> aqks::Result<Schedule> {
        Schedule::new(self.anneal_time, self.tau)
    }

    pub fn distribution(&self) -> aqks::Result<DistributionConfig> {
        DistributionConfig::new(self.sigma_d, self.b_mode.offset())
    }

    pub fn transform(&self) -> aqks::Result<TransformConfig> {
        let mut cfg = TransformConfig::new(self.qubits, self.episodes, self.schedule()?, self.topology)?;
        cfg.transverse_sign = self.transverse_sign;
        Ok(cfg)
    }

    /// Checks every component against its own invariants.
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            bail!("invalid configuration `trials`: must be at least 1");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            bail!(
                "invalid configuration `train_fraction`: must lie in (0, 1), got {}",
                self.train_fraction
            );
        }
        if !(self.svm.c.is_finite() && self.svm.c > 0.0) {
            bail!("invalid configuration `c`: must be positive, got {}", self.svm.c);
        }
        if !(self.svm.tol > 0.0) {
            bail!("invalid configuration `tol`: must be positive, got {}", self.svm.tol);
        }
        if self.svm.max_epochs == 0 {
            bail!("invalid configuration `max_epochs`: must be at least 1");
        }
        if self.threads == Some(0) {
            bail!("invalid configuration `threads`: must be at least 1");
        }
        self.distribution()?;
        self.transform()?;
        match &self.dataset {
            DatasetSpec::Circles {
                n_per_class,
                factor,
                noise_std,
            } => {
                if *n_per_class < 2 {
                    bail!("invalid configuration `n_per_class`: need at least 2 points per class");
                }
                if !(*factor > 0.0 && *factor < 1.0) {
                    bail!("invalid configuration `factor`: must lie in (0, 1), got {factor}");
                }
                if !(noise_std.is_finite() && *noise_std >= 0.0) {
                    bail!("invalid configuration `noise_std`: must be >= 0, got {noise_std}");
                }
            }
            DatasetSpec::Mnist {
                files,
                digits,
                subsample,
                ..
            } => {
                if files.is_empty() {
                    bail!("invalid configuration `mnist_images`: at least one image/label pair is required");
                }
                if digits.0 == digits.1 {
                    bail!("invalid configuration `digits`: the two digits must differ");
                }
                if *subsample == Some(0) {
                    bail!("invalid configuration `subsample`: must be at least 1");
                }
            }
        }
        Ok(())
    }

    /// `key = value` lines describing the resolved configuration.
    pub fn manifest(&self) -> String {
        let mut lines = Vec::new();
        let mut put = |k: &str, v: String| lines.push(format!("{k} = {v}"));
        put("dataset", self.dataset.kind().to_string());
        match &self.dataset {
            DatasetSpec::Circles {
                n_per_class,
                factor,
                noise_std,
            } => {
                put("n_per_class", n_per_class.to_string());
                put("factor", factor.to_string());
                put("noise_std", noise_std.to_string());
            }
            DatasetSpec::Mnist {
                files,
                digits,
                subsample,
                scale_pixels,
            } => {
                for (i, l) in files {
                    put("mnist_images", i.display().to_string());
                    put("mnist_labels", l.display().to_string());
                }
                put("digits", format!("{},{}", digits.0, digits.1));
                put("subsample", subsample.map_or("all".into(), |n| n.to_string()));
                put("scale_pixels", scale_pixels.to_string());
            }
        }
        put("train_fraction", self.train_fraction.to_string());
        put("qubits", self.qubits.to_string());
        put("episodes", self.episodes.to_string());
        put("sigma_d", self.sigma_d.to_string());
        put("b_mode", self.b_mode.to_string());
        put("topology", self.topology.to_string());
        put("anneal_time", self.anneal_time.to_string());
        put("tau", self.tau.to_string());
        put("transverse_sign", self.transverse_sign.to_string());
        put("c", self.svm.c.to_string());
        put("tol", self.svm.tol.to_string());
        put("max_epochs", self.svm.max_epochs.to_string());
        put("trials", self.trials.to_string());
        put("seed", self.master_seed.to_string());
        lines.join("\n") + "\n"
    }
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub kind: Option<String>,
    pub n_per_class: Option<usize>,
    pub factor: Option<f64>,
    pub noise_std: Option<f64>,
    pub mnist_images: Option<Vec<PathBuf>>,
    pub mnist_labels: Option<Vec<PathBuf>>,
    pub digits: Option<[i32; 2]>,
    pub subsample: Option<usize>,
    pub full: Option<bool>,
    pub scale_pixels: Option<bool>,
    pub train_fraction: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncodingSection {
    pub qubits: Option<usize>,
    pub episodes: Option<usize>,
    pub sigma_d: Option<f64>,
    pub b_mode: Option<String>,
    pub topology: Option<String>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnealSection {
    pub anneal_time: Option<f64>,
    pub tau: Option<f64>,
    pub transverse_sign: Option<String>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvmSection {
    pub c: Option<f64>,
    pub tol: Option<f64>,
    pub max_epochs: Option<usize>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

/// Contents of a configuration file. Every key is optional.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub dataset: DatasetSection,
    #[serde(default)]
    pub encoding: EncodingSection,
    #[serde(default)]
    pub anneal: AnnealSection,
    #[serde(default)]
    pub svm: SvmSection,
    #[serde(default)]
    pub run: RunSection,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let message = e.message().trim().to_string();
            match e.span().and_then(|span| key_at(text, span.start)) {
                Some(key) => anyhow::anyhow!("invalid config key `{key}`: {message}"),
                None => anyhow::anyhow!("invalid config: {message}"),
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }
}

/// Dotted name of the `key = value` line containing byte `offset`.
fn key_at(text: &str, offset: usize) -> Option<String> {
    let mut section = None;
    let mut start = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim();
        if trimmed.starts_with('[') {
            section = Some(trimmed.trim_matches(|c| c == '[' || c == ']').trim().to_string());
        }
        if offset < start + line.len() {
            let key = trimmed.split_once('=')?.0.trim();
            return Some(match section {
                Some(s) if !trimmed.starts_with('[') => format!("{s}.{key}"),
                _ => key.to_string(),
            });
        }
        start += line.len();
    }
    None
}

/// Command-line values; each one, when present, beats the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub dataset: Option<DatasetKind>,
    pub mnist_images: Vec<PathBuf>,
    pub mnist_labels: Vec<PathBuf>,
    pub qubits: Option<usize>,
    pub episodes: Option<usize>,
    pub sigma_d: Option<f64>,
    pub b_mode: Option<BMode>,
    pub topology: Option<TopologyKind>,
    pub anneal_time: Option<f64>,
    pub tau: Option<f64>,
    pub transverse_sign: Option<TransverseSign>,
    pub c: Option<f64>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub subsample: Option<usize>,
    pub full: bool,
    pub scale_pixels: bool,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

fn parse_field<T: FromStr>(field: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow::anyhow!("invalid value for `{field}`: {e}"))
}

/// Merges defaults, file and overrides, then validates the result.
pub fn resolve(file: &ConfigFile, cli: &Overrides) -> Result<ExperimentConfig> {
    let kind = match (cli.dataset, &file.dataset.kind) {
        (Some(k), _) => k,
        (None, Some(s)) => s.parse()?,
        (None, None) => DatasetKind::Circles,
    };
    let mut cfg = ExperimentConfig::defaults(kind);
    let d = &file.dataset;
    let full = cli.full || d.full.unwrap_or(false);

    match &mut cfg.dataset {
        DatasetSpec::Circles {
            n_per_class,
            factor,
            noise_std,
        } => {
            if let Some(v) = d.n_per_class {
                *n_per_class = v;
            }
            if let Some(v) = d.factor {
                *factor = v;
            }
            if let Some(v) = d.noise_std {
                *noise_std = v;
            }
        }
        DatasetSpec::Mnist {
            files,
            digits,
            subsample,
            scale_pixels,
        } => {
            let (images, labels) = if cli.mnist_images.is_empty() && cli.mnist_labels.is_empty() {
                (
                    d.mnist_images.clone().unwrap_or_default(),
                    d.mnist_labels.clone().unwrap_or_default(),
                )
            } else {
                (cli.mnist_images.clone(), cli.mnist_labels.clone())
            };
            if images.len() != labels.len() {
                bail!(
                    "invalid configuration `mnist_labels`: {} image files but {} label files",
                    images.len(),
                    labels.len()
                );
            }
            *files = images.into_iter().zip(labels).collect();
            if let Some([a, b]) = d.digits {
                *digits = (a, b);
            }
            if full {
                *subsample = None;
            }
            if let Some(v) = cli.subsample.or(d.subsample) {
                *subsample = Some(v);
            }
            *scale_pixels = cli.scale_pixels || d.scale_pixels.unwrap_or(false);
        }
    }
    if full && kind == DatasetKind::Mnist {
        cfg.episodes = FULL_MNIST_EPISODES;
    }
    if let Some(v) = d.train_fraction {
        cfg.train_fraction = v;
    }

    let e = &file.encoding;
    let a = &file.anneal;
    let s = &file.svm;
    let r = &file.run;
    cfg.qubits = cli.qubits.or(e.qubits).unwrap_or(cfg.qubits);
    cfg.episodes = cli.episodes.or(e.episodes).unwrap_or(cfg.episodes);
    cfg.sigma_d = cli.sigma_d.or(e.sigma_d).unwrap_or(cfg.sigma_d);
    if let Some(v) = cli.b_mode {
        cfg.b_mode = v;
    } else if let Some(v) = &e.b_mode {
        cfg.b_mode = v.parse()?;
    }
    if let Some(v) = cli.topology {
        cfg.topology = v;
    } else if let Some(v) = &e.topology {
        cfg.topology = parse_field("topology", v)?;
    }
    cfg.anneal_time = cli.anneal_time.or(a.anneal_time).unwrap_or(cfg.anneal_time);
    cfg.tau = cli.tau.or(a.tau).unwrap_or(cfg.tau);
    if let Some(v) = cli.transverse_sign {
        cfg.transverse_sign = v;
    } else if let Some(v) = &a.transverse_sign {
        cfg.transverse_sign = parse_field("transverse_sign", v)?;
    }
    cfg.svm.c = cli.c.or(s.c).unwrap_or(cfg.svm.c);
    cfg.svm.tol = s.tol.unwrap_or(cfg.svm.tol);
    cfg.svm.max_epochs = s.max_epochs.unwrap_or(cfg.svm.max_epochs);
    cfg.trials = cli.trials.or(r.trials).unwrap_or(cfg.trials);
    cfg.master_seed = cli.seed.or(r.seed).unwrap_or(cfg.master_seed);
    cfg.out_dir = cli.out.clone().or_else(|| r.out.clone());
    cfg.threads = cli.threads.or(r.threads);

    cfg.validate()?;
    Ok(cfg)
}
