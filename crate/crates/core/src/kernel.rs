//! The kernel implied by the quantum feature map.
//!
//! The sampled kernel is `(1/E)⟨u_m, u_n⟩`. Its expectation over measurement
//! randomness is `(1/E) Σ_e p_mᵉᵀ S p_nᵉ`, where `S[z][z'] = popcount(z & z')`
//! counts the qubits that read 1 in both outcomes. These routines exist to
//! validate the feature map; the classifier works on explicit features.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{AqksError, Result};
use crate::features::QuantumFeatures;
use crate::sim::MAX_QUBITS;

/// Shared set-bit counts between every pair of outcomes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SMatrix {
    num_qubits: usize,
    entries: Vec<u32>,
}

impl SMatrix {
    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.num_qubits
    }

    pub fn get(&self, z: usize, w: usize) -> u32 {
        self.entries[z * self.dim() + w]
    }

    /// Quadratic form `aᵀ S b`.
    pub fn bilinear(&self, a: &[f64], b: &[f64]) -> f64 {
        let dim = self.dim();
        a.iter()
            .enumerate()
            .filter(|(_, &az)| az != 0.0)
            .map(|(z, &az)| {
                let row = &self.entries[z * dim..(z + 1) * dim];
                az * row
                    .iter()
                    .zip(b)
                    .map(|(&s, &bw)| f64::from(s) * bw)
                    .sum::<f64>()
            })
            .sum()
    }
}

pub fn build_s_matrix(num_qubits: usize) -> Result<SMatrix> {
    if num_qubits == 0 || num_qubits > MAX_QUBITS {
        return Err(AqksError::Size(format!(
            "{num_qubits} qubits requested, supported range is 1..={MAX_QUBITS}"
        )));
    }
    let dim = 1usize << num_qubits;
    let entries = (0..dim * dim)
        .map(|k| ((k / dim) & (k % dim)).count_ones())
        .collect();
    Ok(SMatrix {
        num_qubits,
        entries,
    })
}

/// `(1/E)⟨u_m, u_n⟩` from sampled features (shot counts are averaged first).
///
/// For two distinct samples this is an unbiased estimate of [`kernel_exact`].
/// A sample paired with itself reuses one measurement record, so the
/// estimate tends to `(1/E) Σ_e Σ_u P(bit u = 1)` instead.
pub fn kernel_estimate(u_m: &QuantumFeatures, u_n: &QuantumFeatures) -> Result<f64> {
    if u_m.num_qubits != u_n.num_qubits {
        return Err(AqksError::shape("kernel qubits", u_m.num_qubits, u_n.num_qubits));
    }
    if u_m.episodes != u_n.episodes || u_m.bits.len() != u_n.bits.len() {
        return Err(AqksError::shape("kernel episodes", u_m.episodes, u_n.episodes));
    }
    let dot: u64 = u_m
        .bits
        .iter()
        .zip(&u_n.bits)
        .map(|(&a, &b)| u64::from(a) * u64::from(b))
        .sum();
    let shots = f64::from(u_m.shots) * f64::from(u_n.shots);
    Ok(dot as f64 / (u_m.episodes as f64 * shots))
}

/// `(1/E) Σ_e p_mᵉᵀ S p_nᵉ`, the expectation of [`kernel_estimate`].
pub fn kernel_exact(p_m: &[Vec<f64>], p_n: &[Vec<f64>], s: &SMatrix) -> Result<f64> {
    if p_m.len() != p_n.len() {
        return Err(AqksError::shape("kernel episodes", p_m.len(), p_n.len()));
    }
    if p_m.is_empty() {
        return Err(AqksError::shape("kernel episodes", 1, 0));
    }
    let mut total = 0.0;
    for (a, b) in p_m.iter().zip(p_n) {
        if a.len() != s.dim() {
            return Err(AqksError::shape("kernel outcomes", s.dim(), a.len()));
        }
        if b.len() != s.dim() {
            return Err(AqksError::shape("kernel outcomes", s.dim(), b.len()));
        }
        total += s.bilinear(a, b);
    }
    Ok(total / p_m.len() as f64)
}

/// Inputs for Gram matrix assembly.
#[derive(Debug, Clone, Copy)]
pub enum GramInput<'a> {
    /// Sampled features, one per sample.
    Estimate(&'a [QuantumFeatures]),
    /// Per sample, the list of per-episode outcome distributions.
    Exact {
        probabilities: &'a [Vec<Vec<f64>>],
        s: &'a SMatrix,
    },
}

impl GramInput<'_> {
    fn len(&self) -> usize {
        match self {
            GramInput::Estimate(f) => f.len(),
            GramInput::Exact { probabilities, .. } => probabilities.len(),
        }
    }

    fn entry(&self, m: usize, n: usize) -> Result<f64> {
        match self {
            GramInput::Estimate(f) => kernel_estimate(&f[m], &f[n]),
            GramInput::Exact { probabilities, s } => {
                kernel_exact(&probabilities[m], &probabilities[n], s)
            }
        }
    }
}

/// Symmetric `n × n` kernel matrix; the upper triangle is computed and mirrored.
pub fn gram_matrix(input: GramInput<'_>) -> Result<DMatrix<f64>> {
    let n = input.len();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|m| (m..n).map(|k| input.entry(m, k)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let mut g = DMatrix::zeros(n, n);
    for (m, row) in upper.into_iter().enumerate() {
        for (offset, v) in row.into_iter().enumerate() {
            g[(m, m + offset)] = v;
            g[(m + offset, m)] = v;
        }
    }
    Ok(g)
}

pub fn min_eigenvalue(g: &DMatrix<f64>) -> Option<f64> {
    if g.is_empty() {
        return None;
    }
    SymmetricEigen::new(g.clone()).eigenvalues.iter().copied().reduce(f64::min)
}

/// Full matrix, row-major, 17 significant digits per value.
pub fn write_gram_csv<W: Write>(mut w: W, g: &DMatrix<f64>) -> Result<()> {
    for r in 0..g.nrows() {
        let line: Vec<String> = (0..g.ncols()).map(|c| format!("{:.16e}", g[(r, c)])).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}
