//! Simulator checks against independent constructions: Kronecker-product
//! Hamiltonians, a Taylor-series matrix exponential and an RK4 integrator of
//! the continuous-time Schrödinger equation.

use aqks::rng::seeded;
use aqks::sim::{
    build_hamiltonian, evolve, measure, outcome_probabilities, step_unitaries, step_unitary,
    HamiltonianTerms, Schedule, StateVector,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

type CMat = DMatrix<Complex64>;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    DMatrix::from_fn(ar * br, ac * bc, |r, col| {
        a[(r / br, col / bc)] * b[(r % br, col % bc)]
    })
}

/// Operator acting as `single` on qubit `u` of `q`, qubit 0 being the least
/// significant index bit.
fn on_qubit(single: &CMat, u: usize, q: usize) -> CMat {
    let id = CMat::identity(2, 2);
    let mut out = CMat::identity(1, 1);
    for k in (0..q).rev() {
        out = kron(&out, if k == u { single } else { &id });
    }
    out
}

fn pauli_x() -> CMat {
    DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)])
}

fn pauli_z() -> CMat {
    DMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)])
}

fn kron_hamiltonian(terms: &HamiltonianTerms, a: f64) -> CMat {
    let q = terms.num_qubits();
    let dim = 1 << q;
    let mut h = CMat::zeros(dim, dim);
    for u in 0..q {
        h += on_qubit(&pauli_x(), u, q) * c(a * terms.transverse_weight());
        h += on_qubit(&pauli_z(), u, q) * c(terms.local_fields()[u]);
    }
    for (&(l, m), &v) in terms.couplings() {
        h += on_qubit(&pauli_z(), l, q) * on_qubit(&pauli_z(), m, q) * c(v);
    }
    h
}

/// `exp(-iHτ)` by scaling and squaring a truncated Taylor series.
fn expm_taylor(h: &CMat, tau: f64) -> CMat {
    let n = h.nrows();
    let mut m = h * Complex64::new(0.0, -tau);
    let norm: f64 = m.iter().map(|z| z.norm()).sum();
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    m *= c(scale);
    let mut result = CMat::identity(n, n);
    let mut term = CMat::identity(n, n);
    for k in 1..=30 {
        term = &term * &m * c(1.0 / k as f64);
        result += &term;
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn random_terms(q: usize, seed: u64, weight: f64) -> HamiltonianTerms {
    let mut rng = seeded(seed);
    let fields: Vec<f64> = (0..q).map(|_| rng.random_range(-2.0..2.0)).collect();
    let mut couplings = Vec::new();
    for l in 0..q {
        for m in l + 1..q {
            couplings.push(((l, m), rng.random_range(-2.0..2.0)));
        }
    }
    HamiltonianTerms::new(fields, couplings, weight).unwrap()
}

fn tv_distance(p: &[f64], r: &[f64]) -> f64 {
    0.5 * p.iter().zip(r).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Classic RK4 on `dψ/dt = -i H(t) ψ` with `H(t)` continuous in `t`.
fn rk4_reference(terms: &HamiltonianTerms, total: f64, dt: f64) -> Vec<f64> {
    let q = terms.num_qubits();
    let h0 = kron_hamiltonian(terms, 0.0);
    let hx = kron_hamiltonian(terms, 1.0) - &h0;
    let dim = 1 << q;
    let mut psi = nalgebra::DVector::from_element(dim, c(1.0 / (dim as f64).sqrt()));
    let rhs = |t: f64, v: &nalgebra::DVector<Complex64>| {
        let a = 1.0 - t / total;
        (&h0 * v + &hx * v * c(a)) * Complex64::new(0.0, -1.0)
    };
    let steps = (total / dt).round() as usize;
    for s in 0..steps {
        let t = s as f64 * dt;
        let k1 = rhs(t, &psi);
        let k2 = rhs(t + dt / 2.0, &(&psi + &k1 * c(dt / 2.0)));
        let k3 = rhs(t + dt / 2.0, &(&psi + &k2 * c(dt / 2.0)));
        let k4 = rhs(t + dt, &(&psi + &k3 * c(dt)));
        psi += (k1 + k2 * c(2.0) + k3 * c(2.0) + k4) * c(dt / 6.0);
    }
    psi.iter().map(|a| a.norm_sqr()).collect()
}

fn trotter_distribution(terms: &HamiltonianTerms, total: f64, tau: f64) -> Vec<f64> {
    let schedule = Schedule::new(total, tau).unwrap();
    let init = StateVector::initial(terms.num_qubits()).unwrap();
    outcome_probabilities(&evolve(terms, &schedule, &init).unwrap())
}

#[test]
fn hamiltonian_matches_kronecker_construction() {
    for q in 1..=4 {
        for (seed, weight) in [(1, -1.0), (2, 1.0), (3, -0.3)] {
            let terms = random_terms(q, seed * 10 + q as u64, weight);
            for a in [0.0, 0.37, 1.0] {
                let got = build_hamiltonian(&terms, a);
                let want = kron_hamiltonian(&terms, a);
                assert!(max_abs_diff(&got, &want) < 1e-14, "q={q} a={a}");
            }
        }
    }
}

#[test]
fn two_qubit_example_hamiltonian() {
    let terms = HamiltonianTerms::new(vec![0.3, -0.5], [((0, 1), -0.15)], -1.0).unwrap();
    let h = build_hamiltonian(&terms, 1.0);
    assert!(max_abs_diff(&h, &kron_hamiltonian(&terms, 1.0)) < 1e-15);
    // Diagonal: j0 s0 + j1 s1 + h s0 s1 over z = 00, 01, 10, 11.
    let diag = [0.3 - 0.5 - 0.15, -0.3 - 0.5 + 0.15, 0.3 + 0.5 + 0.15, -0.3 + 0.5 - 0.15];
    for (z, d) in diag.iter().enumerate() {
        assert!((h[(z, z)].re - d).abs() < 1e-15);
    }
}

#[test]
fn step_unitary_matches_taylor_exponential() {
    for q in 1..=3 {
        for seed in 0..5 {
            let terms = random_terms(q, 100 + seed, -1.0);
            let h = build_hamiltonian(&terms, 0.6);
            for tau in [1e-3, 0.1, 1.0, 2.5] {
                let got = step_unitary(&h, tau).unwrap();
                let want = expm_taylor(&h, tau);
                assert!(max_abs_diff(&got, &want) < 1e-9, "q={q} tau={tau}");
            }
        }
    }
}

#[test]
fn step_unitary_handles_complex_hermitian_input() {
    let mut rng = seeded(7);
    for n in [2, 4, 8] {
        let raw = CMat::from_fn(n, n, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let h = (&raw + raw.adjoint()) * c(0.5);
        let got = step_unitary(&h, 0.7).unwrap();
        assert!(max_abs_diff(&got, &expm_taylor(&h, 0.7)) < 1e-9);
    }
}

#[test]
fn evolve_matches_product_of_exponentials() {
    for q in 1..=3 {
        let terms = random_terms(q, 40 + q as u64, -1.0);
        let schedule = Schedule::new(5.0, 1.0).unwrap();
        let init = StateVector::initial(q).unwrap();
        let got = evolve(&terms, &schedule, &init).unwrap();

        let dim = 1 << q;
        let mut psi = nalgebra::DVector::from_element(dim, c(1.0 / (dim as f64).sqrt()));
        for s in 0..5 {
            let a = 1.0 - s as f64 / 5.0;
            psi = expm_taylor(&kron_hamiltonian(&terms, a), 1.0) * psi;
        }
        for (g, w) in got.amplitudes().iter().zip(psi.iter()) {
            assert!((g - w).norm() < 1e-9);
        }
    }
}

#[test]
fn evolution_unitaries_are_unitary() {
    for q in 1..=4 {
        let terms = random_terms(q, 200 + q as u64, -1.0);
        let schedule = Schedule::new(5.0, 0.5).unwrap();
        for u in step_unitaries(&terms, &schedule).unwrap() {
            let dim = u.nrows();
            let err = max_abs_diff(&(u.adjoint() * &u), &CMat::identity(dim, dim));
            assert!(err <= 1e-10, "q={q} err={err:e}");
        }
    }
}

#[test]
fn fine_steps_converge_to_continuous_evolution() {
    for q in 1..=2 {
        let terms = random_terms(q, 300 + q as u64, -1.0);
        let reference = rk4_reference(&terms, 5.0, 1e-4);
        let fine = trotter_distribution(&terms, 5.0, 1e-3);
        let tv = tv_distance(&fine, &reference);
        assert!(tv < 1e-3, "q={q} tv={tv:e}");
    }
}

#[test]
fn trotter_error_is_first_order_in_tau() {
    for q in 1..=2 {
        let terms = random_terms(q, 400 + q as u64, -1.0);
        let reference = rk4_reference(&terms, 5.0, 1e-4);
        // Coarse steps can land near the reference by cancellation, so the
        // halving law is checked where the leading error term dominates.
        let errors: Vec<f64> = [0.125, 0.0625, 0.03125, 0.015625]
            .iter()
            .map(|&tau| tv_distance(&trotter_distribution(&terms, 5.0, tau), &reference))
            .collect();
        for pair in errors.windows(2) {
            let ratio = pair[0] / pair[1];
            assert!((1.6..2.5).contains(&ratio), "q={q} errors {errors:?}");
        }
    }
}

#[test]
fn measurement_frequencies_follow_born_rule() {
    let terms = random_terms(2, 500, -1.0);
    let schedule = Schedule::new(5.0, 1.0).unwrap();
    let state = evolve(&terms, &schedule, &StateVector::initial(2).unwrap()).unwrap();
    let probs = outcome_probabilities(&state);
    let shots = 10_000;
    let mut counts = [0usize; 4];
    let mut rng = seeded(501);
    for _ in 0..shots {
        let bits = measure(&state, &mut rng);
        counts[usize::from(bits[0]) | usize::from(bits[1]) << 1] += 1;
    }
    let mut chi2 = 0.0;
    for z in 0..4 {
        let expected = shots as f64 * probs[z];
        let sd = (expected * (1.0 - probs[z])).sqrt();
        assert!((counts[z] as f64 - expected).abs() <= 4.0 * sd, "z={z} {counts:?} {probs:?}");
        chi2 += (counts[z] as f64 - expected).powi(2) / expected;
    }
    // 0.999 quantile of chi-square with 3 degrees of freedom.
    assert!(chi2 < 16.266, "chi2={chi2}");
}

#[test]
fn four_qubit_chi_square() {
    let terms = random_terms(4, 600, -1.0);
    let schedule = Schedule::new(5.0, 1.0).unwrap();
    let state = evolve(&terms, &schedule, &StateVector::initial(4).unwrap()).unwrap();
    let probs = outcome_probabilities(&state);
    let shots = 10_000;
    let mut counts = [0usize; 16];
    let mut rng = seeded(601);
    for _ in 0..shots {
        let bits = measure(&state, &mut rng);
        let z: usize = bits.iter().enumerate().map(|(u, &b)| usize::from(b) << u).sum();
        counts[z] += 1;
    }
    let chi2: f64 = (0..16)
        .filter(|&z| probs[z] > 0.0)
        .map(|z| {
            let e = shots as f64 * probs[z];
            (counts[z] as f64 - e).powi(2) / e
        })
        .sum();
    // 0.999 quantile of chi-square with 15 degrees of freedom.
    assert!(chi2 < 37.697, "chi2={chi2}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn evolution_conserves_norm(
        q in 1usize..=4,
        seed in any::<u64>(),
        steps in 1usize..=20,
        tau in prop::sample::select(vec![0.1, 0.5, 1.0, 2.0]),
        positive in any::<bool>(),
    ) {
        let terms = random_terms(q, seed, if positive { 1.0 } else { -1.0 });
        let schedule = Schedule::new(steps as f64 * tau, tau).unwrap();
        let state = evolve(&terms, &schedule, &StateVector::initial(q).unwrap()).unwrap();
        prop_assert!((state.norm() - 1.0).abs() <= 1e-9);
        // Renormalization must not hide a non-unitary propagator.
        let mut psi = nalgebra::DVector::from_element(1 << q, c(1.0 / ((1 << q) as f64).sqrt()));
        for u in step_unitaries(&terms, &schedule).unwrap() {
            psi = u * psi;
        }
        prop_assert!((psi.norm() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn probabilities_are_a_distribution(q in 1usize..=4, seed in any::<u64>()) {
        let terms = random_terms(q, seed, -1.0);
        let schedule = Schedule::new(5.0, 1.0).unwrap();
        let p = outcome_probabilities(
            &evolve(&terms, &schedule, &StateVector::initial(q).unwrap()).unwrap(),
        );
        prop_assert!(p.iter().all(|&v| v >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
