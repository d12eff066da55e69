//! Quantum randomized features: encode, anneal, measure, stack.
//!
//! For every episode the sample is encoded into local fields, the Ising model
//! is annealed from the uniform superposition and all qubits are measured in
//! the z basis. Episode `e` occupies feature positions `[e·q, (e+1)·q)`.

use std::io::{Read, Write};

use rand::Rng;
use rayon::prelude::*;

use crate::encoding::{couplings_from_j, encode, EpisodeParams, Topology, TopologyKind};
use crate::error::{AqksError, Result};
use crate::matrix::Matrix;
use crate::rng::{derive_stream, Domain};
use crate::sim::{
    evolve, outcome_probabilities, sample_index, HamiltonianTerms, Schedule, StateVector,
    TransverseSign,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformConfig {
    pub num_qubits: usize,
    pub episodes: usize,
    pub schedule: Schedule,
    pub topology: TopologyKind,
    pub transverse_sign: TransverseSign,
    /// Measurements per episode; each feature then counts ones over the shots.
    pub shots_per_episode: u8,
}

impl TransformConfig {
    pub fn new(
        num_qubits: usize,
        episodes: usize,
        schedule: Schedule,
        topology: TopologyKind,
    ) -> Result<Self> {
        let cfg = Self {
            num_qubits,
            episodes,
            schedule,
            topology,
            transverse_sign: TransverseSign::default(),
            shots_per_episode: 1,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        Topology::new(self.topology, self.num_qubits)?;
        if self.episodes == 0 {
            return Err(AqksError::config("episodes", "need at least one episode"));
        }
        if self.shots_per_episode == 0 {
            return Err(AqksError::config("shots_per_episode", "must be at least 1"));
        }
        Ok(())
    }

    pub fn feature_dim(&self) -> usize {
        self.num_qubits * self.episodes
    }

    fn check_episodes(&self, episodes: &[EpisodeParams], input_dim: usize) -> Result<()> {
        self.validate()?;
        if episodes.len() != self.episodes {
            return Err(AqksError::shape("episode list", self.episodes, episodes.len()));
        }
        for ep in episodes {
            if ep.num_qubits() != self.num_qubits {
                return Err(AqksError::shape("episode rows", self.num_qubits, ep.num_qubits()));
            }
            if ep.input_dim() != input_dim {
                return Err(AqksError::shape("episode columns", input_dim, ep.input_dim()));
            }
        }
        Ok(())
    }
}

/// Stacked measurement outcomes of one sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantumFeatures {
    /// Per position, the number of shots that returned 1 (a bit when shots = 1).
    pub bits: Vec<u8>,
    pub num_qubits: usize,
    pub episodes: usize,
    pub shots: u8,
    pub sample_index: usize,
}

impl QuantumFeatures {
    /// The `1/E` normalization carried as metadata rather than applied.
    pub fn scale(&self) -> f64 {
        1.0 / self.episodes as f64
    }

    pub fn episode_block(&self, e: usize) -> &[u8] {
        &self.bits[e * self.num_qubits..(e + 1) * self.num_qubits]
    }
}

/// Final annealed state for one sample and episode.
pub fn episode_state(x: &[f64], episode: &EpisodeParams, cfg: &TransformConfig) -> Result<StateVector> {
    let topology = Topology::new(cfg.topology, cfg.num_qubits)?;
    let j = encode(x, episode)?;
    let couplings = couplings_from_j(&j, &topology)?;
    let terms = HamiltonianTerms::new(j, couplings, cfg.transverse_sign.weight())?;
    evolve(&terms, &cfg.schedule, &StateVector::initial(cfg.num_qubits)?)
}

fn measure_into<R: Rng + ?Sized>(probs: &[f64], shots: u8, block: &mut [u8], rng: &mut R) {
    for _ in 0..shots {
        let z = sample_index(probs, rng);
        for (u, slot) in block.iter_mut().enumerate() {
            *slot += ((z >> u) & 1) as u8;
        }
    }
}

fn transform_with<F, R>(
    x: &[f64],
    episodes: &[EpisodeParams],
    cfg: &TransformConfig,
    sample_index: usize,
    mut stream: F,
) -> Result<QuantumFeatures>
where
    F: FnMut(usize) -> R,
    R: FnMut(&[f64], &mut [u8]),
{
    cfg.check_episodes(episodes, x.len())?;
    let q = cfg.num_qubits;
    let mut bits = vec![0u8; cfg.feature_dim()];
    for (e, ep) in episodes.iter().enumerate() {
        let probs = outcome_probabilities(&episode_state(x, ep, cfg)?);
        let mut draw = stream(ep.index());
        draw(&probs, &mut bits[e * q..(e + 1) * q]);
    }
    Ok(QuantumFeatures {
        bits,
        num_qubits: q,
        episodes: cfg.episodes,
        shots: cfg.shots_per_episode,
        sample_index,
    })
}

/// Features of a single sample, drawing every measurement from `rng` in
/// episode order.
pub fn transform_sample<R: Rng + ?Sized>(
    x: &[f64],
    episodes: &[EpisodeParams],
    cfg: &TransformConfig,
    rng: &mut R,
) -> Result<QuantumFeatures> {
    let shots = cfg.shots_per_episode;
    let rng = std::cell::RefCell::new(rng);
    transform_with(x, episodes, cfg, 0, |_| {
        |probs: &[f64], block: &mut [u8]| measure_into(probs, shots, block, &mut **rng.borrow_mut())
    })
}

/// Exact outcome distribution of every episode, no sampling.
pub fn exact_probability_features(
    x: &[f64],
    episodes: &[EpisodeParams],
    cfg: &TransformConfig,
) -> Result<Vec<Vec<f64>>> {
    cfg.check_episodes(episodes, x.len())?;
    episodes
        .iter()
        .map(|ep| Ok(outcome_probabilities(&episode_state(x, ep, cfg)?)))
        .collect()
}

/// Feature rows for a whole dataset, one byte per position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub num_qubits: usize,
    pub episodes: usize,
    pub shots: u8,
    pub data: Vec<u8>,
}

impl FeatureMatrix {
    pub fn cols(&self) -> usize {
        self.num_qubits * self.episodes
    }

    pub fn row(&self, i: usize) -> &[u8] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn sample(&self, i: usize) -> QuantumFeatures {
        QuantumFeatures {
            bits: self.row(i).to_vec(),
            num_qubits: self.num_qubits,
            episodes: self.episodes,
            shots: self.shots,
            sample_index: i,
        }
    }

    pub fn to_matrix(&self) -> Matrix {
        let data = self.data.iter().map(|&b| f64::from(b)).collect();
        Matrix::new(self.rows, self.cols(), data).expect("consistent feature buffer")
    }
}

/// Features for every row of `x`. The measurement stream of sample `i` under
/// the episode with index `e` is derived from `(master_seed, i, e)`, so the
/// output does not depend on how work is spread over threads, and reordering
/// the episode list reorders the feature blocks with it.
pub fn transform_dataset(
    x: &Matrix,
    episodes: &[EpisodeParams],
    cfg: &TransformConfig,
    master_seed: u64,
) -> Result<FeatureMatrix> {
    cfg.validate()?;
    let cols = cfg.feature_dim();
    if x.rows() > 0 {
        cfg.check_episodes(episodes, x.cols())?;
    }
    let shots = cfg.shots_per_episode;
    let rows: Vec<Vec<u8>> = (0..x.rows())
        .into_par_iter()
        .map(|i| {
            transform_with(x.row(i), episodes, cfg, i, |e| {
                let mut rng = derive_stream(master_seed, Domain::Measurement, i as u64, e as u64);
                move |probs: &[f64], block: &mut [u8]| measure_into(probs, shots, block, &mut rng)
            })
            .map(|f| f.bits)
        })
        .collect::<Result<_>>()?;
    let mut data = Vec::with_capacity(x.rows() * cols);
    for r in rows {
        data.extend_from_slice(&r);
    }
    Ok(FeatureMatrix {
        rows: x.rows(),
        num_qubits: cfg.num_qubits,
        episodes: cfg.episodes,
        shots,
        data,
    })
}

pub const CACHE_MAGIC: &[u8; 4] = b"AQKS";
pub const CACHE_VERSION: u32 = 1;

/// Writes a single-shot feature matrix in the cache layout:
///
/// | offset | size | field |
/// |---|---|---|
/// | 0 | 4 | magic `AQKS` |
/// | 4 | 4 | version, u32 LE |
/// | 8 | 8 | rows `n`, u64 LE |
/// | 16 | 4 | qubits `q`, u32 LE |
/// | 20 | 4 | episodes `E`, u32 LE |
/// | 24 | 8 | master seed, u64 LE |
/// | 32 | … | rows |
///
/// Each row packs its `q·E` bits into `ceil(q·E / 8)` bytes, feature `k` at
/// bit `k % 8` (least significant first) of byte `k / 8`; padding bits are 0.
pub fn write_feature_cache<W: Write>(mut w: W, fm: &FeatureMatrix, master_seed: u64) -> Result<()> {
    if fm.shots != 1 {
        return Err(AqksError::config(
            "shots_per_episode",
            "the feature cache stores single-shot bits only",
        ));
    }
    w.write_all(CACHE_MAGIC)?;
    w.write_all(&CACHE_VERSION.to_le_bytes())?;
    w.write_all(&(fm.rows as u64).to_le_bytes())?;
    w.write_all(&(fm.num_qubits as u32).to_le_bytes())?;
    w.write_all(&(fm.episodes as u32).to_le_bytes())?;
    w.write_all(&master_seed.to_le_bytes())?;
    let row_bytes = fm.cols().div_ceil(8);
    let mut packed = vec![0u8; row_bytes];
    for i in 0..fm.rows {
        packed.fill(0);
        for (k, &b) in fm.row(i).iter().enumerate() {
            packed[k / 8] |= (b & 1) << (k % 8);
        }
        w.write_all(&packed)?;
    }
    Ok(())
}

/// Reads a cache written by [`write_feature_cache`]; returns the matrix and
/// the master seed recorded in the header.
pub fn read_feature_cache<R: Read>(mut r: R) -> Result<(FeatureMatrix, u64)> {
    let mut header = [0u8; 32];
    r.read_exact(&mut header)
        .map_err(|e| AqksError::parse("cache header", e.to_string()))?;
    if &header[..4] != CACHE_MAGIC {
        return Err(AqksError::parse("cache magic", "expected `AQKS`"));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != CACHE_VERSION {
        return Err(AqksError::parse(
            "cache version",
            format!("unsupported version {version}"),
        ));
    }
    let rows = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
    let num_qubits = u32::from_le_bytes(header[16..20].try_into().unwrap()) as usize;
    let episodes = u32::from_le_bytes(header[20..24].try_into().unwrap()) as usize;
    let seed = u64::from_le_bytes(header[24..32].try_into().unwrap());
    let cols = num_qubits * episodes;
    let row_bytes = cols.div_ceil(8);
    let mut packed = vec![0u8; row_bytes];
    let mut data = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        r.read_exact(&mut packed)
            .map_err(|_| AqksError::parse("cache rows", format!("truncated at row {i} of {rows}")))?;
        data.extend((0..cols).map(|k| (packed[k / 8] >> (k % 8)) & 1));
    }
    Ok((
        FeatureMatrix {
            rows,
            num_qubits,
            episodes,
            shots: 1,
            data,
        },
        seed,
    ))
}
