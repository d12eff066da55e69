//! Linear soft-margin SVM trained by dual coordinate descent.
//!
//! Columns are standardized with training statistics, then the solver
//! minimizes `½(‖w‖² + b²) + C Σ max(0, 1 − yᵢ(w·xᵢ + b))`. The bias is
//! handled as an extra constant feature, which keeps every dual coordinate
//! box-constrained (`0 ≤ αᵢ ≤ C`) and lets each update be solved exactly.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;

use crate::error::{AqksError, Result};
use crate::matrix::Matrix;
use crate::rng::seeded;

/// Smallest standard deviation used when scaling a column.
pub const STD_FLOOR: f64 = 1e-12;

/// Feature matrix with labels in `{-1, +1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    x: Matrix,
    y: Vec<i8>,
}

impl LabeledDataset {
    pub fn new(x: Matrix, y: Vec<i8>) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(AqksError::shape("labels", x.rows(), y.len()));
        }
        if let Some(bad) = y.iter().find(|l| l.abs() != 1) {
            return Err(AqksError::Data(format!("label {bad} is not -1 or +1")));
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &[i8] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    /// Same samples with every label negated.
    pub fn flipped(&self) -> Self {
        Self {
            x: self.x.clone(),
            y: self.y.iter().map(|l| -l).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmParams {
    pub c: f64,
    /// Stop once the largest projected-gradient magnitude of an epoch is below this.
    pub tol: f64,
    pub max_epochs: usize,
    /// Seed of the coordinate visiting order.
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            tol: 1e-4,
            max_epochs: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    pub column_means: Vec<f64>,
    pub column_stds: Vec<f64>,
}

/// Convergence trace of a fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub epochs: usize,
    pub converged: bool,
    /// Dual objective `½‖w̃‖² − Σαᵢ` after each epoch.
    pub dual_objective: Vec<f64>,
    pub final_violation: f64,
}

struct Standardizer {
    means: Vec<f64>,
    stds: Vec<f64>,
    constant: Vec<bool>,
}

impl Standardizer {
    fn fit(x: &Matrix) -> Self {
        let (n, d) = (x.rows() as f64, x.cols());
        let mut means = vec![0.0; d];
        for row in x.iter_rows() {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut vars = vec![0.0; d];
        for row in x.iter_rows() {
            for ((s, v), m) in vars.iter_mut().zip(row).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        let raw: Vec<f64> = vars.iter().map(|s| (s / n).sqrt()).collect();
        Self {
            constant: raw.iter().map(|&s| s <= STD_FLOOR).collect(),
            stds: raw.iter().map(|&s| s.max(STD_FLOOR)).collect(),
            means,
        }
    }

    fn apply(&self, x: &Matrix) -> Vec<f64> {
        let mut out = Vec::with_capacity(x.rows() * x.cols());
        for row in x.iter_rows() {
            out.extend(row.iter().enumerate().map(|(j, v)| {
                if self.constant[j] {
                    0.0
                } else {
                    (v - self.means[j]) / self.stds[j]
                }
            }));
        }
        out
    }
}

fn check_finite(x: &Matrix) -> Result<()> {
    if let Some(pos) = x.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(AqksError::Data(format!(
            "non-finite feature at row {}, column {}",
            pos / x.cols().max(1),
            pos % x.cols().max(1)
        )));
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn fit(data: &LabeledDataset, params: &SvmParams) -> Result<LinearSvmModel> {
    fit_with_report(data, params).map(|(m, _)| m)
}

pub fn fit_with_report(
    data: &LabeledDataset,
    params: &SvmParams,
) -> Result<(LinearSvmModel, FitReport)> {
    if !(params.c.is_finite() && params.c > 0.0) {
        return Err(AqksError::config("c", format!("must be positive, got {}", params.c)));
    }
    if !(params.tol > 0.0) {
        return Err(AqksError::config("tol", "must be positive"));
    }
    let n = data.len();
    if n < 2 {
        return Err(AqksError::Training(format!("need at least 2 samples, got {n}")));
    }
    if !(data.y.contains(&1) && data.y.contains(&-1)) {
        return Err(AqksError::Training("training labels contain a single class".into()));
    }
    check_finite(&data.x)?;

    let d = data.dim();
    let scaler = Standardizer::fit(&data.x);
    let xs = scaler.apply(&data.x);
    let row = |i: usize| &xs[i * d..(i + 1) * d];
    let y: Vec<f64> = data.y.iter().map(|&l| f64::from(l)).collect();
    let diag: Vec<f64> = (0..n).map(|i| dot(row(i), row(i)) + 1.0).collect();

    let c = params.c;
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = seeded(params.seed);
    let mut report = FitReport {
        epochs: 0,
        converged: false,
        dual_objective: Vec::new(),
        final_violation: f64::INFINITY,
    };

    for _ in 0..params.max_epochs {
        order.shuffle(&mut rng);
        let mut violation: f64 = 0.0;
        for &i in &order {
            let xi = row(i);
            let g = y[i] * (dot(&w, xi) + b) - 1.0;
            let pg = if alpha[i] == 0.0 {
                g.min(0.0)
            } else if alpha[i] == c {
                g.max(0.0)
            } else {
                g
            };
            violation = violation.max(pg.abs());
            if pg != 0.0 {
                let old = alpha[i];
                alpha[i] = (old - g / diag[i]).clamp(0.0, c);
                let step = (alpha[i] - old) * y[i];
                if step != 0.0 {
                    for (wj, xj) in w.iter_mut().zip(xi) {
                        *wj += step * xj;
                    }
                    b += step;
                }
            }
        }
        report.epochs += 1;
        report.final_violation = violation;
        report
            .dual_objective
            .push(0.5 * (dot(&w, &w) + b * b) - alpha.iter().sum::<f64>());
        if violation < params.tol {
            report.converged = true;
            break;
        }
    }

    for (wj, &constant) in w.iter_mut().zip(&scaler.constant) {
        if constant {
            *wj = 0.0;
        }
    }
    let model = LinearSvmModel {
        weights: w,
        bias: b,
        c,
        column_means: scaler.means,
        column_stds: scaler.stds,
    };
    Ok((model, report))
}

impl LinearSvmModel {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// `w·standardize(x) + b`.
    pub fn decision_function(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(AqksError::shape("model input", self.dim(), x.len()));
        }
        let mut acc = self.bias;
        for j in 0..x.len() {
            if self.weights[j] != 0.0 {
                acc += self.weights[j] * (x[j] - self.column_means[j]) / self.column_stds[j];
            }
        }
        Ok(acc)
    }

    /// `½(‖w‖² + b²) + C Σ hinge` on already-standardized rows.
    pub fn objective_standardized(&self, xs: &Matrix, y: &[i8]) -> f64 {
        let reg = 0.5 * (dot(&self.weights, &self.weights) + self.bias * self.bias);
        let loss: f64 = xs
            .iter_rows()
            .zip(y)
            .map(|(r, &l)| (1.0 - f64::from(l) * (dot(&self.weights, r) + self.bias)).max(0.0))
            .sum();
        reg + self.c * loss
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:.16e}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        writeln!(w, "aqks-linear-svm {MODEL_FORMAT_VERSION}")?;
        writeln!(w, "dimension {}", self.dim())?;
        writeln!(w, "c {:.16e}", self.c)?;
        writeln!(w, "bias {:.16e}", self.bias)?;
        writeln!(w, "weights {}", join(&self.weights))?;
        writeln!(w, "means {}", join(&self.column_means))?;
        writeln!(w, "stds {}", join(&self.column_stds))?;
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let mut next = |key: &str| -> Result<String> {
            let line = lines
                .next()
                .ok_or_else(|| AqksError::parse(key, "missing line"))??;
            let rest = line
                .strip_prefix(key)
                .and_then(|s| s.strip_prefix(' ').or(if s.is_empty() { Some(s) } else { None }))
                .ok_or_else(|| AqksError::parse(key, format!("expected `{key}`, got `{line}`")))?;
            Ok(rest.to_string())
        };
        let version = next("aqks-linear-svm")?;
        if version.trim() != MODEL_FORMAT_VERSION.to_string() {
            return Err(AqksError::parse("aqks-linear-svm", format!("unsupported version {version}")));
        }
        let scalar = |key: &str, s: String| -> Result<f64> {
            s.trim().parse().map_err(|e| AqksError::parse(key, format!("{e}")))
        };
        let dim: usize = next("dimension")?
            .trim()
            .parse()
            .map_err(|e| AqksError::parse("dimension", format!("{e}")))?;
        let c = scalar("c", next("c")?)?;
        let bias = scalar("bias", next("bias")?)?;
        let vector = |key: &str, s: String| -> Result<Vec<f64>> {
            let v = s
                .split_whitespace()
                .map(|t| t.parse().map_err(|e| AqksError::parse(key, format!("{e}"))))
                .collect::<Result<Vec<f64>>>()?;
            if v.len() != dim {
                return Err(AqksError::parse(key, format!("expected {dim} values, got {}", v.len())));
            }
            Ok(v)
        };
        let weights = vector("weights", next("weights")?)?;
        let column_means = vector("means", next("means")?)?;
        let column_stds = vector("stds", next("stds")?)?;
        Ok(Self {
            weights,
            bias,
            c,
            column_means,
            column_stds,
        })
    }
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Labels `sign(decision)`, with a zero decision mapped to `+1`.
pub fn predict(model: &LinearSvmModel, x: &Matrix) -> Result<Vec<i8>> {
    x.iter_rows()
        .map(|r| model.decision_function(r).map(|v| if v >= 0.0 { 1 } else { -1 }))
        .collect()
}

/// Fraction of correctly labelled samples.
pub fn accuracy(model: &LinearSvmModel, data: &LabeledDataset) -> Result<f64> {
    if data.is_empty() {
        return Err(AqksError::Domain("accuracy of an empty dataset".into()));
    }
    let predicted = predict(model, &data.x)?;
    let correct = predicted.iter().zip(&data.y).filter(|(p, y)| p == y).count();
    Ok(correct as f64 / data.len() as f64)
}
