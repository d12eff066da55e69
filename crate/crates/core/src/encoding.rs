//! Random affine encoding of classical samples into Ising coefficients.
//!
//! An episode draws a `q × p` matrix `A` with i.i.d. `N(0, σ_d²)` entries and
//! an offset `b`; a sample `x` becomes local fields `j = A x + b` and
//! couplings `h_lm = j_l j_m` on the edges of the chosen topology.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::error::{AqksError, Result};
use crate::sim::{Couplings, MAX_QUBITS};

/// Distribution of the offset vector `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OffsetDistribution {
    Zero,
    /// Uniform over `[lo, hi)`.
    Uniform { lo: f64, hi: f64 },
}

impl OffsetDistribution {
    /// Uniform over `[0, 2π)`.
    pub fn uniform_two_pi() -> Self {
        OffsetDistribution::Uniform {
            lo: 0.0,
            hi: std::f64::consts::TAU,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistributionConfig {
    /// Standard deviation of the zero-mean Gaussian entries of `A`.
    pub sigma_d: f64,
    pub offset: OffsetDistribution,
}

impl DistributionConfig {
    pub fn new(sigma_d: f64, offset: OffsetDistribution) -> Result<Self> {
        let cfg = Self { sigma_d, offset };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_d.is_finite() && self.sigma_d > 0.0) {
            return Err(AqksError::config(
                "sigma_d",
                format!("must be a positive real, got {}", self.sigma_d),
            ));
        }
        if let OffsetDistribution::Uniform { lo, hi } = self.offset {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(AqksError::config(
                    "b_mode",
                    format!("uniform bounds need lo < hi, got [{lo}, {hi})"),
                ));
            }
        }
        Ok(())
    }
}

/// One episode's encoding pair `(A, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeParams {
    weights: DMatrix<f64>,
    offset: Vec<f64>,
    index: usize,
}

impl EpisodeParams {
    pub fn new(weights: DMatrix<f64>, offset: Vec<f64>, index: usize) -> Result<Self> {
        if weights.nrows() != offset.len() {
            return Err(AqksError::shape("episode offset", weights.nrows(), offset.len()));
        }
        if weights.nrows() == 0 || weights.nrows() > MAX_QUBITS {
            return Err(AqksError::Size(format!(
                "episode has {} rows, supported range is 1..={MAX_QUBITS}",
                weights.nrows()
            )));
        }
        Ok(Self {
            weights,
            offset,
            index,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.weights.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    pub fn index(&self) -> usize {
        self.index
    }
}

/// Draws `episodes` independent `(A, b)` pairs. `A` is filled row by row,
/// then `b`, episode after episode.
pub fn sample_episodes<R: Rng + ?Sized>(
    episodes: usize,
    num_qubits: usize,
    input_dim: usize,
    dist: &DistributionConfig,
    rng: &mut R,
) -> Result<Vec<EpisodeParams>> {
    dist.validate()?;
    if episodes == 0 {
        return Err(AqksError::config("episodes", "need at least one episode"));
    }
    if num_qubits == 0 || num_qubits > MAX_QUBITS {
        return Err(AqksError::Size(format!(
            "{num_qubits} qubits requested, supported range is 1..={MAX_QUBITS}"
        )));
    }
    if input_dim == 0 {
        return Err(AqksError::config("input_dim", "must be positive"));
    }
    let normal = Normal::new(0.0, dist.sigma_d)
        .map_err(|e| AqksError::config("sigma_d", e.to_string()))?;
    let uniform = match dist.offset {
        OffsetDistribution::Zero => None,
        OffsetDistribution::Uniform { lo, hi } => Some(
            Uniform::new(lo, hi).map_err(|e| AqksError::config("b_mode", e.to_string()))?,
        ),
    };
    (0..episodes)
        .map(|e| {
            let mut weights = DMatrix::zeros(num_qubits, input_dim);
            for r in 0..num_qubits {
                for c in 0..input_dim {
                    weights[(r, c)] = normal.sample(rng);
                }
            }
            let offset = match &uniform {
                None => vec![0.0; num_qubits],
                Some(u) => (0..num_qubits).map(|_| u.sample(rng)).collect(),
            };
            EpisodeParams::new(weights, offset, e)
        })
        .collect()
}

/// Local fields `j = A x + b`.
pub fn encode(x: &[f64], episode: &EpisodeParams) -> Result<Vec<f64>> {
    let a = &episode.weights;
    if x.len() != a.ncols() {
        return Err(AqksError::shape("encode", a.ncols(), x.len()));
    }
    Ok((0..a.nrows())
        .map(|r| {
            let row: f64 = x.iter().enumerate().map(|(c, xc)| a[(r, c)] * xc).sum();
            row + episode.offset[r]
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TopologyKind {
    /// Open chain `0-1-…-(q-1)`.
    Linear,
    /// Four qubits on a nearest-neighbour ring.
    Square,
    /// Every pair coupled.
    Complete,
}

impl std::str::FromStr for TopologyKind {
    type Err = AqksError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(TopologyKind::Linear),
            "square" => Ok(TopologyKind::Square),
            "complete" => Ok(TopologyKind::Complete),
            other => Err(AqksError::config(
                "topology",
                format!("expected one of linear, square, complete; got `{other}`"),
            )),
        }
    }
}

impl std::fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TopologyKind::Linear => "linear",
            TopologyKind::Square => "square",
            TopologyKind::Complete => "complete",
        })
    }
}

/// A coupling graph over `num_qubits` qubits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Topology {
    kind: TopologyKind,
    num_qubits: usize,
}

impl Topology {
    pub fn new(kind: TopologyKind, num_qubits: usize) -> Result<Self> {
        if num_qubits == 0 || num_qubits > MAX_QUBITS {
            return Err(AqksError::Size(format!(
                "{num_qubits} qubits requested, supported range is 1..={MAX_QUBITS}"
            )));
        }
        if kind == TopologyKind::Square && num_qubits != 4 {
            return Err(AqksError::config(
                "topology",
                format!("square topology is only defined for 4 qubits, got {num_qubits}"),
            ));
        }
        Ok(Self { kind, num_qubits })
    }

    pub fn kind(&self) -> TopologyKind {
        self.kind
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    /// Edges in a fixed order, each as `(l, m)` with `l < m`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let q = self.num_qubits;
        match self.kind {
            TopologyKind::Linear => (1..q).map(|m| (m - 1, m)).collect(),
            TopologyKind::Square => vec![(0, 1), (1, 2), (2, 3), (0, 3)],
            TopologyKind::Complete => (0..q)
                .flat_map(|l| (l + 1..q).map(move |m| (l, m)))
                .collect(),
        }
    }
}

pub fn topology_edges(kind: TopologyKind, num_qubits: usize) -> Result<Vec<(usize, usize)>> {
    Ok(Topology::new(kind, num_qubits)?.edges())
}

/// Couplings `h_lm = j_l j_m` on every edge of `topology`.
pub fn couplings_from_j(j: &[f64], topology: &Topology) -> Result<Couplings> {
    if j.len() != topology.num_qubits() {
        return Err(AqksError::shape("couplings_from_j", topology.num_qubits(), j.len()));
    }
    Ok(topology
        .edges()
        .into_iter()
        .map(|(l, m)| ((l, m), j[l] * j[m]))
        .collect())
}
