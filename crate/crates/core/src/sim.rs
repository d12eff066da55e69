//! Dense state-vector simulation of a scheduled transverse-field Ising model.
//!
//! Basis convention: bit `u` of a basis index is the z-outcome of qubit `u`
//! (qubit 0 is the least significant bit), and `σ^z` has eigenvalue `+1` on
//! bit value 0. The time-dependent Hamiltonian is
//!
//! ```text
//! H(t) = a(t) · w · Σ_v σ^x_v  +  Σ_<l,m> h_lm σ^z_l σ^z_m  +  Σ_u j_u σ^z_u
//! ```
//!
//! where `w` is [`HamiltonianTerms::transverse_weight`] (`-1` for the usual
//! annealing driver, whose ground state is the uniform superposition) and
//! `a(t) = 1 - t/T`. Evolution uses a first-order product of step
//! propagators with the Hamiltonian frozen at the left end of each step.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{AqksError, Result};

/// Largest register the dense simulator accepts.
pub const MAX_QUBITS: usize = 12;

/// Tolerance on `‖ψ‖² - 1` accepted when constructing a state.
pub const NORM_TOLERANCE: f64 = 1e-10;

/// Elementwise tolerance on `H - H†` accepted by [`step_unitary`].
pub const HERMITICITY_TOLERANCE: f64 = 1e-12;

fn check_qubits(q: usize) -> Result<()> {
    if q == 0 || q > MAX_QUBITS {
        return Err(AqksError::Size(format!(
            "{q} qubits requested, supported range is 1..={MAX_QUBITS}"
        )));
    }
    Ok(())
}

/// Normalized amplitudes over the `2^q` computational basis states.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
    num_qubits: usize,
}

impl StateVector {
    /// The uniform superposition, ground state of `-Σ σ^x`.
    pub fn initial(num_qubits: usize) -> Result<Self> {
        check_qubits(num_qubits)?;
        let dim = 1usize << num_qubits;
        let amp = Complex64::new((dim as f64).sqrt().recip(), 0.0);
        Ok(Self {
            amplitudes: vec![amp; dim],
            num_qubits,
        })
    }

    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let dim = amplitudes.len();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(AqksError::Size(format!(
                "state length {dim} is not 2^q for q >= 1"
            )));
        }
        let num_qubits = dim.trailing_zeros() as usize;
        check_qubits(num_qubits)?;
        let norm_sqr: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sqr - 1.0).abs() > NORM_TOLERANCE {
            return Err(AqksError::Numerical(format!(
                "state has squared norm {norm_sqr}, expected 1"
            )));
        }
        Ok(Self {
            amplitudes,
            num_qubits,
        })
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(num_qubits: usize, index: usize) -> Result<Self> {
        check_qubits(num_qubits)?;
        let dim = 1usize << num_qubits;
        if index >= dim {
            return Err(AqksError::Size(format!(
                "basis index {index} out of range for {num_qubits} qubits"
            )));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(Self {
            amplitudes,
            num_qubits,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// Orientation of the transverse driver term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TransverseSign {
    /// `-a(t) Σ σ^x`: the uniform superposition is the initial ground state.
    #[default]
    Negative,
    /// `+a(t) Σ σ^x`, the sign written in the encoded-Hamiltonian formula.
    Positive,
}

impl TransverseSign {
    pub fn weight(self) -> f64 {
        match self {
            TransverseSign::Negative => -1.0,
            TransverseSign::Positive => 1.0,
        }
    }
}

impl std::str::FromStr for TransverseSign {
    type Err = AqksError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "negative" | "-" => Ok(TransverseSign::Negative),
            "positive" | "+" => Ok(TransverseSign::Positive),
            other => Err(AqksError::config(
                "transverse_sign",
                format!("expected `negative` or `positive`, got `{other}`"),
            )),
        }
    }
}

impl std::fmt::Display for TransverseSign {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TransverseSign::Negative => "negative",
            TransverseSign::Positive => "positive",
        })
    }
}

/// ZZ couplings keyed by an ordered pair `(l, m)` with `l < m`.
pub type Couplings = BTreeMap<(usize, usize), f64>;

/// Coefficients of the problem and driver parts of the Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianTerms {
    local_fields: Vec<f64>,
    couplings: Couplings,
    transverse_weight: f64,
}

impl HamiltonianTerms {
    /// Builds validated terms. Coupling keys may be given in either order but
    /// each unordered pair must appear once.
    pub fn new<I>(local_fields: Vec<f64>, couplings: I, transverse_weight: f64) -> Result<Self>
    where
        I: IntoIterator<Item = ((usize, usize), f64)>,
    {
        let q = local_fields.len();
        check_qubits(q)?;
        let mut map = Couplings::new();
        for ((l, m), value) in couplings {
            if l == m || l >= q || m >= q {
                return Err(AqksError::config(
                    "couplings",
                    format!("pair ({l}, {m}) is not two distinct qubits below {q}"),
                ));
            }
            let key = (l.min(m), l.max(m));
            if map.insert(key, value).is_some() {
                return Err(AqksError::config(
                    "couplings",
                    format!("pair ({}, {}) given twice", key.0, key.1),
                ));
            }
        }
        if !transverse_weight.is_finite()
            || local_fields.iter().any(|j| !j.is_finite())
            || map.values().any(|h| !h.is_finite())
        {
            return Err(AqksError::config("terms", "non-finite coefficient"));
        }
        Ok(Self {
            local_fields,
            couplings: map,
            transverse_weight,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.local_fields.len()
    }

    pub fn local_fields(&self) -> &[f64] {
        &self.local_fields
    }

    pub fn couplings(&self) -> &Couplings {
        &self.couplings
    }

    pub fn transverse_weight(&self) -> f64 {
        self.transverse_weight
    }

    /// Diagonal of the z-part of the Hamiltonian in the computational basis.
    fn problem_diagonal(&self) -> Vec<f64> {
        let q = self.num_qubits();
        let spin = |z: usize, u: usize| if (z >> u) & 1 == 0 { 1.0 } else { -1.0 };
        (0..1usize << q)
            .map(|z| {
                let fields: f64 = self
                    .local_fields
                    .iter()
                    .enumerate()
                    .map(|(u, j)| j * spin(z, u))
                    .sum();
                let zz: f64 = self
                    .couplings
                    .iter()
                    .map(|(&(l, m), h)| h * spin(z, l) * spin(z, m))
                    .sum();
                fields + zz
            })
            .collect()
    }
}

/// Total annealing time `T` split into `k = T/τ` equal steps of length `τ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    total_time: f64,
    step_duration: f64,
    steps: usize,
}

impl Schedule {
    pub fn new(total_time: f64, step_duration: f64) -> Result<Self> {
        if !(total_time.is_finite() && total_time > 0.0) {
            return Err(AqksError::config("anneal_time", "must be positive and finite"));
        }
        if !(step_duration.is_finite() && step_duration > 0.0) {
            return Err(AqksError::config("tau", "must be positive and finite"));
        }
        let ratio = total_time / step_duration;
        let steps = ratio.round();
        if steps < 1.0 || (ratio - steps).abs() > 1e-9 * steps.max(1.0) {
            return Err(AqksError::config(
                "tau",
                format!("anneal time {total_time} is not a positive integer multiple of {step_duration}"),
            ));
        }
        Ok(Self {
            total_time,
            step_duration,
            steps: steps as usize,
        })
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    pub fn step_duration(&self) -> f64 {
        self.step_duration
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Start time of each step, where the Hamiltonian is sampled.
    pub fn sample_times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.steps).map(move |s| s as f64 * self.step_duration)
    }
}

/// Linear driver schedule `a(t) = 1 - t/T` on `[0, T]`.
pub fn schedule_a(t: f64, total_time: f64) -> Result<f64> {
    if !(total_time > 0.0) || !total_time.is_finite() {
        return Err(AqksError::Domain(format!(
            "total time {total_time} must be positive"
        )));
    }
    if !(0.0..=total_time).contains(&t) {
        return Err(AqksError::Domain(format!(
            "time {t} outside [0, {total_time}]"
        )));
    }
    Ok(1.0 - t / total_time)
}

fn real_hamiltonian(diagonal: &[f64], q: usize, transverse: f64) -> DMatrix<f64> {
    let dim = diagonal.len();
    let mut h = DMatrix::from_diagonal(&DVector::from_column_slice(diagonal));
    if transverse != 0.0 {
        for z in 0..dim {
            for v in 0..q {
                h[(z, z ^ (1 << v))] += transverse;
            }
        }
    }
    h
}

/// Dense Hamiltonian for the given driver amplitude `a`.
pub fn build_hamiltonian(terms: &HamiltonianTerms, a_value: f64) -> DMatrix<Complex64> {
    let h = real_hamiltonian(
        &terms.problem_diagonal(),
        terms.num_qubits(),
        a_value * terms.transverse_weight,
    );
    h.map(|v| Complex64::new(v, 0.0))
}

/// `exp(-i H τ)` through the spectral decomposition of a Hermitian `H`.
pub fn step_unitary(h: &DMatrix<Complex64>, tau: f64) -> Result<DMatrix<Complex64>> {
    let n = h.nrows();
    if n != h.ncols() {
        return Err(AqksError::shape("step_unitary", n, h.ncols()));
    }
    for i in 0..n {
        for j in i..n {
            let d = (h[(i, j)] - h[(j, i)].conj()).norm();
            if d > HERMITICITY_TOLERANCE || !d.is_finite() {
                return Err(AqksError::Numerical(format!(
                    "matrix is not Hermitian at ({i}, {j}): |H - H†| = {d:e}"
                )));
            }
        }
    }
    let eig = SymmetricEigen::new(h.clone());
    let phases: Vec<Complex64> = eig
        .eigenvalues
        .iter()
        .map(|&lambda| Complex64::from_polar(1.0, -lambda * tau))
        .collect();
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (k, phase) in phases.iter().enumerate() {
        for r in 0..n {
            scaled[(r, k)] *= phase;
        }
    }
    Ok(scaled * v.adjoint())
}

/// One step propagator `V diag(e^{-iλτ}) Vᵀ` for a real symmetric Hamiltonian.
struct RealStep {
    eigenvectors: DMatrix<f64>,
    phases: Vec<Complex64>,
}

impl RealStep {
    fn new(h: DMatrix<f64>, tau: f64) -> Self {
        let eig = SymmetricEigen::new(h);
        let phases = eig
            .eigenvalues
            .iter()
            .map(|&lambda| Complex64::from_polar(1.0, -lambda * tau))
            .collect();
        Self {
            eigenvectors: eig.eigenvectors,
            phases,
        }
    }

    fn apply(&self, psi: &mut [Complex64], scratch: &mut [Complex64]) {
        let v = &self.eigenvectors;
        let dim = psi.len();
        for k in 0..dim {
            let col = v.column(k);
            let mut acc = Complex64::new(0.0, 0.0);
            for (r, amp) in psi.iter().enumerate() {
                acc += amp * col[r];
            }
            scratch[k] = acc * self.phases[k];
        }
        for (r, out) in psi.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, c) in scratch.iter().enumerate() {
                acc += c * v[(r, k)];
            }
            *out = acc;
        }
    }

    fn to_unitary(&self) -> DMatrix<Complex64> {
        let dim = self.phases.len();
        DMatrix::from_fn(dim, dim, |r, c| {
            (0..dim)
                .map(|k| {
                    self.phases[k] * (self.eigenvectors[(r, k)] * self.eigenvectors[(c, k)])
                })
                .sum()
        })
    }
}

fn real_steps<'a>(
    terms: &'a HamiltonianTerms,
    schedule: &'a Schedule,
) -> impl Iterator<Item = Result<RealStep>> + 'a {
    let diagonal = terms.problem_diagonal();
    let q = terms.num_qubits();
    schedule.sample_times().map(move |t| {
        let a = schedule_a(t, schedule.total_time())?;
        let h = real_hamiltonian(&diagonal, q, a * terms.transverse_weight());
        Ok(RealStep::new(h, schedule.step_duration()))
    })
}

/// The `k` step propagators applied by [`evolve`], in time order.
pub fn step_unitaries(
    terms: &HamiltonianTerms,
    schedule: &Schedule,
) -> Result<Vec<DMatrix<Complex64>>> {
    real_steps(terms, schedule)
        .map(|step| step.map(|s| s.to_unitary()))
        .collect()
}

/// Trotterized evolution of `initial` under the scheduled Hamiltonian.
pub fn evolve(
    terms: &HamiltonianTerms,
    schedule: &Schedule,
    initial: &StateVector,
) -> Result<StateVector> {
    if terms.num_qubits() != initial.num_qubits() {
        return Err(AqksError::shape(
            "evolve",
            terms.num_qubits(),
            initial.num_qubits(),
        ));
    }
    let mut psi = initial.amplitudes.clone();
    let mut scratch = vec![Complex64::new(0.0, 0.0); psi.len()];
    for step in real_steps(terms, schedule) {
        step?.apply(&mut psi, &mut scratch);
    }
    Ok(StateVector {
        amplitudes: psi,
        num_qubits: initial.num_qubits,
    })
}

/// Born probabilities `|ψ_z|²` of each basis outcome.
pub fn outcome_probabilities(state: &StateVector) -> Vec<f64> {
    state.amplitudes.iter().map(|a| a.norm_sqr()).collect()
}

/// Draws a basis index from a discrete distribution.
pub fn sample_index<R: Rng + ?Sized>(probabilities: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut cumulative = 0.0;
    for (z, p) in probabilities.iter().enumerate() {
        cumulative += p;
        if u < cumulative {
            return z;
        }
    }
    // u landed in the rounding gap above the final partial sum
    probabilities
        .iter()
        .rposition(|&p| p > 0.0)
        .unwrap_or(probabilities.len() - 1)
}

/// Bits of basis index `z`, qubit 0 first.
pub fn index_to_bits(z: usize, num_qubits: usize) -> Vec<u8> {
    (0..num_qubits).map(|u| ((z >> u) & 1) as u8).collect()
}

/// Projective z-basis measurement of every qubit.
pub fn measure<R: Rng + ?Sized>(state: &StateVector, rng: &mut R) -> Vec<u8> {
    let z = sample_index(&outcome_probabilities(state), rng);
    index_to_bits(z, state.num_qubits)
}
