use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use aqks::encoding::sample_episodes;
use aqks::features::{exact_probability_features, transform_dataset};
use aqks::kernel::{build_s_matrix, gram_matrix, min_eigenvalue, write_gram_csv, GramInput};
use aqks::rng::{derive_seed, derive_stream, Domain};
use aqks_harness::config::{
    resolve, ConfigFile, ExperimentConfig, Overrides, DEFAULT_SIGMA_GRID,
};
use aqks_harness::experiment::{
    prepare, run_baseline, run_experiment, run_sweep, with_threads, SweepAxis, TrialSummary,
};
use aqks_harness::plot::{emit_svg_plot, PlotKind, PlotSource};
use aqks_harness::results::{parse_csv, summaries_from_rows};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "aqks",
    version,
    about = "Quantum annealing feature experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Linear SVM on raw features only.
    Baseline(RunArgs),
    /// Baseline plus quantum-feature trials.
    Aqks(RunArgs),
    /// One experiment per value of a parameter.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// sigma_d, episodes, qubits, topology or anneal_time.
        #[arg(long)]
        axis: String,
        /// Comma-separated values; sigma_d defaults to 0.1,0.5,1,2,4.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
    },
    /// Render an SVG from a results CSV or from the configured dataset.
    Plot {
        #[command(flatten)]
        run: RunArgs,
        /// accuracy_vs_axis or scatter2d.
        #[arg(long)]
        kind: String,
        /// Results CSV for accuracy_vs_axis.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Kernel matrix of the first training samples.
    Gram {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        /// exact or estimate.
        #[arg(long, default_value = "exact")]
        mode: String,
    },
}

#[derive(Args, Clone)]
struct RunArgs {
    /// TOML file with [dataset], [encoding], [anneal], [svm] and [run] sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// circles or mnist.
    #[arg(long)]
    dataset: Option<String>,
    /// IDX image file; repeat together with --mnist-labels to stack files.
    #[arg(long)]
    mnist_images: Vec<PathBuf>,
    #[arg(long)]
    mnist_labels: Vec<PathBuf>,
    #[arg(long)]
    qubits: Option<usize>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    sigma_d: Option<f64>,
    /// zero or uniform2pi.
    #[arg(long)]
    b_mode: Option<String>,
    /// linear, square or complete.
    #[arg(long)]
    topology: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    anneal_time: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    tau: Option<f64>,
    /// negative or positive.
    #[arg(long)]
    transverse_sign: Option<String>,
    /// SVM regularization constant.
    #[arg(long, allow_negative_numbers = true)]
    c: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// MNIST stratified subsample size.
    #[arg(long)]
    subsample: Option<usize>,
    /// Full-scale MNIST: every 3/5 image and 20,000 episodes.
    #[arg(long)]
    full: bool,
    /// Divide pixels by 255.
    #[arg(long)]
    scale_pixels: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "AQKS_THREADS")]
    threads: Option<usize>,
}

impl RunArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let file = match &self.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        let overrides = Overrides {
            dataset: self.dataset.as_deref().map(str::parse).transpose()?,
            mnist_images: self.mnist_images.clone(),
            mnist_labels: self.mnist_labels.clone(),
            qubits: self.qubits,
            episodes: self.episodes,
            sigma_d: self.sigma_d,
            b_mode: self.b_mode.as_deref().map(str::parse).transpose()?,
            topology: parse_opt("topology", &self.topology)?,
            anneal_time: self.anneal_time,
            tau: self.tau,
            transverse_sign: parse_opt("transverse_sign", &self.transverse_sign)?,
            c: self.c,
            trials: self.trials,
            seed: self.seed,
            subsample: self.subsample,
            full: self.full,
            scale_pixels: self.scale_pixels,
            out: self.out.clone(),
            threads: self.threads,
        };
        resolve(&file, &overrides)
    }
}

fn parse_opt<T: std::str::FromStr>(field: &str, v: &Option<String>) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    v.as_deref()
        .map(|s| s.parse().map_err(|e| anyhow::anyhow!("invalid value for `{field}`: {e}")))
        .transpose()
}

fn print_summary(s: &TrialSummary) {
    let (mu, sigma) = s.test_stats();
    let (mu_train, _) = s.train_stats();
    println!(
        "{}={}: baseline test {:.4} (train {:.4}); aqks test mu_c {:.4} sigma_c {:.4} (train {:.4}) over {} trials",
        s.axis,
        s.value,
        s.baseline.test_accuracy,
        s.baseline.train_accuracy,
        mu,
        sigma,
        mu_train,
        s.trials.len()
    );
}

fn baseline(args: &RunArgs) -> Result<()> {
    let cfg = args.resolve()?;
    let result = with_threads(cfg.threads, || -> Result<_> { run_baseline(&cfg, &prepare(&cfg)?) })??;
    println!(
        "baseline train {:.6} test {:.6} ({:.3}s{})",
        result.train_accuracy,
        result.test_accuracy,
        result.seconds,
        if result.converged { "" } else { ", not converged" }
    );
    if let Some(dir) = &cfg.out_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("manifest.txt"), cfg.manifest())?;
        fs::write(
            dir.join("baseline.txt"),
            format!(
                "train_accuracy = {:.6}\ntest_accuracy = {:.6}\nconverged = {}\n",
                result.train_accuracy, result.test_accuracy, result.converged
            ),
        )?;
    }
    Ok(())
}

fn aqks_run(args: &RunArgs) -> Result<()> {
    let cfg = args.resolve()?;
    let summary = run_experiment(&cfg)?;
    for t in &summary.trials {
        eprintln!(
            "trial {}: train {:.4} test {:.4} ({:.1}s features, {:.1}s fit)",
            t.trial, t.aqks.train_accuracy, t.aqks.test_accuracy, t.transform_seconds, t.aqks.seconds
        );
    }
    print_summary(&summary);
    Ok(())
}

fn sweep(args: &RunArgs, axis: &str, values: &[String]) -> Result<()> {
    let cfg = args.resolve()?;
    let axis: SweepAxis = axis.parse()?;
    let values: Vec<String> = if values.is_empty() {
        match axis {
            SweepAxis::SigmaD => DEFAULT_SIGMA_GRID.iter().map(|v| v.to_string()).collect(),
            _ => bail!("--values is required for axis {}", axis.name()),
        }
    } else {
        values.to_vec()
    };
    let mut failed = 0;
    for point in run_sweep(&cfg, axis, &values)? {
        match point.outcome {
            Ok(s) => print_summary(&s),
            Err(e) => {
                failed += 1;
                eprintln!("{}={}: failed: {e:#}", axis.name(), point.value);
            }
        }
    }
    if failed > 0 {
        bail!("{failed} of {} sweep points failed", values.len());
    }
    Ok(())
}

fn plot(args: &RunArgs, kind: &str, input: Option<&Path>, output: &Path) -> Result<()> {
    let kind: PlotKind = kind.parse()?;
    match kind {
        PlotKind::AccuracyVsAxis => {
            let input = input.context("accuracy_vs_axis needs --input results.csv")?;
            let text = fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
            let summaries = summaries_from_rows(&parse_csv(&text)?)?;
            emit_svg_plot(PlotSource::Summaries(&summaries), kind, output)
        }
        PlotKind::Scatter2d => {
            let cfg = args.resolve()?;
            let ds = aqks_harness::experiment::load_dataset(&cfg)?;
            emit_svg_plot(PlotSource::Dataset(&ds), kind, output)
        }
    }
}

fn gram(args: &RunArgs, samples: usize, mode: &str) -> Result<()> {
    let cfg = args.resolve()?;
    let data = with_threads(cfg.threads, || prepare(&cfg))??;
    let n = samples.min(data.train.len());
    if n == 0 {
        bail!("invalid value for `samples`: must be at least 1");
    }
    let x = data.train.x.select_rows(&(0..n).collect::<Vec<_>>());
    let transform = cfg.transform()?;
    let episodes = sample_episodes(
        cfg.episodes,
        cfg.qubits,
        x.cols(),
        &cfg.distribution()?,
        &mut derive_stream(cfg.master_seed, Domain::Episodes, 0, 0),
    )?;
    let g = with_threads(cfg.threads, || -> Result<_> {
        match mode {
            "exact" => {
                let probs = x
                    .iter_rows()
                    .map(|r| exact_probability_features(r, &episodes, &transform))
                    .collect::<aqks::Result<Vec<_>>>()?;
                let s = build_s_matrix(cfg.qubits)?;
                Ok(gram_matrix(GramInput::Exact { probabilities: &probs, s: &s })?)
            }
            "estimate" => {
                let seed = derive_seed(cfg.master_seed, Domain::Measurement, 0);
                let fm = transform_dataset(&x, &episodes, &transform, seed)?;
                let feats: Vec<_> = (0..n).map(|i| fm.sample(i)).collect();
                Ok(gram_matrix(GramInput::Estimate(&feats))?)
            }
            other => bail!("invalid value for `mode`: expected exact or estimate, got `{other}`"),
        }
    })??;
    match &cfg.out_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join("manifest.txt"), cfg.manifest())?;
            let mut out = fs::File::create(dir.join("gram.csv"))?;
            write_gram_csv(&mut out, &g)?;
        }
        None => write_gram_csv(std::io::stdout().lock(), &g)?,
    }
    eprintln!("{n}x{n} {mode} kernel, minimum eigenvalue {:e}", min_eigenvalue(&g).unwrap_or(f64::NAN));
    Ok(())
}

fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Baseline(args) => baseline(args),
        Command::Aqks(args) => aqks_run(args),
        Command::Sweep { run, axis, values } => sweep(run, axis, values),
        Command::Plot {
            run,
            kind,
            input,
            output,
        } => plot(run, kind, input.as_deref(), output),
        Command::Gram { run, samples, mode } => gram(run, *samples, mode),
    }
}
