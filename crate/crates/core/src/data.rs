//! Datasets: concentric circles, MNIST IDX files, digit filtering, splits.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::classifier::LabeledDataset;
use crate::error::{AqksError, Result};
use crate::matrix::Matrix;
use crate::rng::{derive_stream, Domain};

/// Samples with integer labels and a note on where they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub x: Matrix,
    pub y: Vec<i32>,
    pub provenance: String,
}

impl RawDataset {
    pub fn new(x: Matrix, y: Vec<i32>, provenance: impl Into<String>) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(AqksError::shape("dataset labels", x.rows(), y.len()));
        }
        Ok(Self {
            x,
            y,
            provenance: provenance.into(),
        })
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

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            x: self.x.select_rows(indices),
            y: indices.iter().map(|&i| self.y[i]).collect(),
            provenance: self.provenance.clone(),
        }
    }

    /// Count of samples per label.
    pub fn label_counts(&self) -> BTreeMap<i32, usize> {
        let mut counts = BTreeMap::new();
        for &l in &self.y {
            *counts.entry(l).or_insert(0) += 1;
        }
        counts
    }

    /// Converts to a classifier dataset; labels must already be ±1.
    pub fn to_labeled(&self) -> Result<LabeledDataset> {
        let y = self
            .y
            .iter()
            .map(|&l| match l {
                -1 => Ok(-1i8),
                1 => Ok(1i8),
                other => Err(AqksError::Data(format!(
                    "label {other} is not -1 or +1; filter and remap first"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        LabeledDataset::new(self.x.clone(), y)
    }

    /// Writes `x1,…,xp,label` rows with a header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = (1..=self.dim()).map(|j| format!("x{j}")).collect();
        writeln!(w, "{},label", header.join(","))?;
        for (row, label) in self.x.iter_rows().zip(&self.y) {
            let values: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(w, "{},{label}", values.join(","))?;
        }
        Ok(())
    }
}

/// Two noisy concentric circles: label −1 on radius `factor`, label +1 on
/// the unit circle. Angles are uniform and each coordinate receives
/// independent Gaussian noise of standard deviation `noise_std`.
pub fn make_circles(n_per_class: usize, factor: f64, noise_std: f64, seed: u64) -> Result<RawDataset> {
    if n_per_class == 0 {
        return Err(AqksError::config("n_per_class", "must be at least 1"));
    }
    if !(factor > 0.0 && factor < 1.0) {
        return Err(AqksError::config("factor", format!("must lie in (0, 1), got {factor}")));
    }
    if !(noise_std.is_finite() && noise_std >= 0.0) {
        return Err(AqksError::config("noise_std", format!("must be >= 0, got {noise_std}")));
    }
    let mut rng = derive_stream(seed, Domain::Dataset, 0, 0);
    let noise = Normal::new(0.0, noise_std).map_err(|e| AqksError::config("noise_std", e.to_string()))?;
    let mut rows = Vec::with_capacity(2 * n_per_class);
    let mut y = Vec::with_capacity(2 * n_per_class);
    for (radius, label) in [(factor, -1), (1.0, 1)] {
        for _ in 0..n_per_class {
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            let (s, c) = theta.sin_cos();
            let (dx, dy) = if noise_std > 0.0 {
                (noise.sample(&mut rng), noise.sample(&mut rng))
            } else {
                (0.0, 0.0)
            };
            rows.push([radius * c + dx, radius * s + dy]);
            y.push(label);
        }
    }
    RawDataset::new(
        Matrix::from_rows(&rows)?,
        y,
        format!("circles(n_per_class={n_per_class}, factor={factor}, noise_std={noise_std}, seed={seed})"),
    )
}

pub const IDX_IMAGES_MAGIC: u32 = 2051;
pub const IDX_LABELS_MAGIC: u32 = 2049;

fn read_u32(bytes: &[u8], offset: usize, field: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| AqksError::parse(field, "file ends inside the header"))
}

/// Parses an IDX3 image file into `(count, rows·cols, pixels)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let magic = read_u32(bytes, 0, "images magic")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(AqksError::parse(
            "images magic",
            format!("expected {IDX_IMAGES_MAGIC}, found {magic}"),
        ));
    }
    let count = read_u32(bytes, 4, "images count")? as usize;
    let rows = read_u32(bytes, 8, "images rows")? as usize;
    let cols = read_u32(bytes, 12, "images cols")? as usize;
    let pixels = rows * cols;
    let payload = &bytes[16..];
    if payload.len() < count * pixels {
        return Err(AqksError::parse(
            "images payload",
            format!("expected {} bytes, found {}", count * pixels, payload.len()),
        ));
    }
    Ok((count, pixels, payload[..count * pixels].to_vec()))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = read_u32(bytes, 0, "labels magic")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(AqksError::parse(
            "labels magic",
            format!("expected {IDX_LABELS_MAGIC}, found {magic}"),
        ));
    }
    let count = read_u32(bytes, 4, "labels count")? as usize;
    let payload = &bytes[8..];
    if payload.len() < count {
        return Err(AqksError::parse(
            "labels payload",
            format!("expected {count} bytes, found {}", payload.len()),
        ));
    }
    Ok(payload[..count].to_vec())
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut buf)?;
    Ok(buf)
}

/// Loads an IDX image/label pair. Pixels keep their raw 0–255 values.
pub fn load_mnist_idx(images_path: &Path, labels_path: &Path) -> Result<RawDataset> {
    let (count, pixels, raw) = parse_idx_images(&read_file(images_path)?)?;
    let labels = parse_idx_labels(&read_file(labels_path)?)?;
    if labels.len() != count {
        return Err(AqksError::parse(
            "label count",
            format!("{} images but {} labels", count, labels.len()),
        ));
    }
    let x = Matrix::new(count, pixels, raw.into_iter().map(f64::from).collect())?;
    RawDataset::new(
        x,
        labels.into_iter().map(i32::from).collect(),
        format!("mnist({}, {})", images_path.display(), labels_path.display()),
    )
}

/// Loads several image/label pairs and stacks them in order.
pub fn load_mnist_files<P: AsRef<Path>>(pairs: &[(P, P)]) -> Result<RawDataset> {
    let parts = pairs
        .iter()
        .map(|(i, l)| load_mnist_idx(i.as_ref(), l.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    concat(parts)
}

fn concat(parts: Vec<RawDataset>) -> Result<RawDataset> {
    let dim = parts.first().map_or(0, |p| p.dim());
    let mut data = Vec::new();
    let mut y = Vec::new();
    let mut provenance = Vec::new();
    for p in parts {
        if p.dim() != dim {
            return Err(AqksError::shape("stacked dataset columns", dim, p.dim()));
        }
        data.extend_from_slice(p.x.as_slice());
        y.extend(p.y);
        provenance.push(p.provenance);
    }
    RawDataset::new(Matrix::new(y.len(), dim, data)?, y, provenance.join(" + "))
}

/// Serializes images in IDX3 layout (used for fixtures).
pub fn write_idx_images<W: Write>(mut w: W, rows: usize, cols: usize, images: &[u8]) -> Result<()> {
    let count = images.len() / (rows * cols);
    w.write_all(&IDX_IMAGES_MAGIC.to_be_bytes())?;
    for v in [count, rows, cols] {
        w.write_all(&(v as u32).to_be_bytes())?;
    }
    w.write_all(images)?;
    Ok(())
}

pub fn write_idx_labels<W: Write>(mut w: W, labels: &[u8]) -> Result<()> {
    w.write_all(&IDX_LABELS_MAGIC.to_be_bytes())?;
    w.write_all(&(labels.len() as u32).to_be_bytes())?;
    w.write_all(labels)?;
    Ok(())
}

/// Keeps two digits, mapping the first to −1 and the second to +1.
pub fn filter_digits(ds: &RawDataset, keep: (i32, i32)) -> Result<RawDataset> {
    let (neg, pos) = keep;
    if neg == pos {
        return Err(AqksError::config("digits", format!("digits must differ, got ({neg}, {pos})")));
    }
    let mut indices = Vec::new();
    let mut y = Vec::new();
    for (i, &l) in ds.y.iter().enumerate() {
        if l == neg || l == pos {
            indices.push(i);
            y.push(if l == neg { -1 } else { 1 });
        }
    }
    for digit in [neg, pos] {
        if !ds.y.contains(&digit) {
            return Err(AqksError::Data(format!("digit {digit} does not occur in the dataset")));
        }
    }
    RawDataset::new(
        ds.x.select_rows(&indices),
        y,
        format!("{} filtered to ({neg} -> -1, {pos} -> +1)", ds.provenance),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.75,
            seed: 0,
            stratified: true,
        }
    }
}

fn groups(labels: &[i32], stratified: bool) -> Vec<Vec<usize>> {
    if !stratified {
        return vec![(0..labels.len()).collect()];
    }
    let mut by_label: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_label.entry(l).or_default().push(i);
    }
    by_label.into_values().collect()
}

/// Train/test index sets, each sorted ascending.
///
/// Each group (a label class when stratified) is shuffled once by the seed and
/// `round(f·n)` of it goes to training: from the front of the shuffled order
/// when `f ≤ ½`, from the back otherwise. Fractions `f` and `1 − f` with the
/// same seed therefore produce swapped partitions.
pub fn split_indices(labels: &[i32], spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    let f = spec.train_fraction;
    if !(f > 0.0 && f < 1.0) {
        return Err(AqksError::config("train_fraction", format!("must lie in (0, 1), got {f}")));
    }
    let mut rng = derive_stream(spec.seed, Domain::Split, 0, 0);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for mut group in groups(labels, spec.stratified) {
        group.shuffle(&mut rng);
        let n = group.len();
        let k = (f * n as f64).round() as usize;
        let (t, rest) = if f <= 0.5 {
            let (a, b) = group.split_at(k);
            (a, b)
        } else {
            let (b, a) = group.split_at(n - k);
            (a, b)
        };
        train.extend_from_slice(t);
        test.extend_from_slice(rest);
    }
    if train.is_empty() || test.is_empty() {
        return Err(AqksError::config(
            "train_fraction",
            format!("fraction {f} of {} samples leaves an empty part", labels.len()),
        ));
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split(ds: &RawDataset, spec: &SplitSpec) -> Result<(RawDataset, RawDataset)> {
    let (train, test) = split_indices(&ds.y, spec)?;
    Ok((ds.select(&train), ds.select(&test)))
}

/// Exactly `n` rows drawn without replacement, class proportions kept by
/// largest-remainder rounding.
pub fn stratified_subsample(ds: &RawDataset, n: usize, seed: u64) -> Result<RawDataset> {
    if n == 0 || n > ds.len() {
        return Err(AqksError::config(
            "subsample",
            format!("must lie in 1..={}, got {n}", ds.len()),
        ));
    }
    let groups = groups(&ds.y, true);
    let total = ds.len() as f64;
    let exact: Vec<f64> = groups.iter().map(|g| g.len() as f64 * n as f64 / total).collect();
    let mut quota: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let short = n - quota.iter().sum::<usize>();
    for &g in order.iter().take(short) {
        quota[g] += 1;
    }
    let mut rng = derive_stream(seed, Domain::Subsample, 0, 0);
    let mut picked = Vec::with_capacity(n);
    for (mut group, k) in groups.into_iter().zip(quota) {
        group.shuffle(&mut rng);
        picked.extend_from_slice(&group[..k]);
    }
    picked.sort_unstable();
    Ok(ds.select(&picked))
}
