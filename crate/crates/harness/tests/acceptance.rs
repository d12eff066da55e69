//! End-to-end acceptance checks. Each test prints one PASS/FAIL line to the
//! real stdout, so the summary shows up even when output is captured.

use std::collections::BTreeSet;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;

use aqks::classifier::{fit, LabeledDataset, SvmParams};
use aqks::data::{load_mnist_files, make_circles, RawDataset};
use aqks::encoding::{sample_episodes, DistributionConfig, OffsetDistribution, TopologyKind};
use aqks::features::{exact_probability_features, transform_dataset, TransformConfig};
use aqks::kernel::{build_s_matrix, gram_matrix, kernel_estimate, kernel_exact, min_eigenvalue, GramInput};
use aqks::matrix::Matrix;
use aqks::rng::seeded;
use aqks::sim::{
    evolve, outcome_probabilities, step_unitaries, HamiltonianTerms, Schedule, StateVector, TransverseSign,
};
use aqks_harness::config::{DatasetKind, DatasetSpec, ExperimentConfig, DEFAULT_SIGMA_GRID};
use aqks_harness::experiment::{prepare, run_on_split, select_sigma_d};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::seq::index::sample;
use rand::Rng;

fn report(name: &str, pass: bool, detail: &str) {
    let line = format!("\n{} {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    assert!(pass, "{name}: {detail}");
}

fn default_circles() -> RawDataset {
    let cfg = ExperimentConfig::defaults(DatasetKind::Circles);
    match cfg.dataset {
        DatasetSpec::Circles {
            n_per_class,
            factor,
            noise_std,
        } => make_circles(n_per_class, factor, noise_std, 0).unwrap(),
        DatasetSpec::Mnist { .. } => unreachable!(),
    }
}

fn circles_transform(q: usize, episodes: usize) -> (TransformConfig, DistributionConfig) {
    let cfg = TransformConfig::new(q, episodes, Schedule::new(5.0, 1.0).unwrap(), TopologyKind::Linear).unwrap();
    let dist = DistributionConfig::new(1.0, OffsetDistribution::uniform_two_pi()).unwrap();
    (cfg, dist)
}

#[test]
fn circles_separation() {
    let mut cfg = ExperimentConfig::defaults(DatasetKind::Circles);
    cfg.trials = 5;
    cfg.episodes = 1000;
    cfg.qubits = 2;
    let data = prepare(&cfg).unwrap();
    let selection = select_sigma_d(&cfg, &data, &DEFAULT_SIGMA_GRID, 1).unwrap();
    cfg.sigma_d = selection.best;
    let summary = run_on_split(&cfg, &data, "none", "-").unwrap();
    let baseline = summary.baseline.test_accuracy;
    let (mu, sd) = summary.test_stats();
    let pass = (0.40..=0.60).contains(&baseline) && mu >= 0.95;
    let scores: Vec<String> = selection.scores.iter().map(|(s, a)| format!("{s}:{a:.3}")).collect();
    report(
        "circles_separation",
        pass,
        &format!(
            "baseline {baseline:.4} (need 0.40..0.60), quantum features {mu:.4} ± {sd:.4} at sigma_d {} (need >= 0.95); validation [{}]",
            selection.best,
            scores.join(" ")
        ),
    );
}

fn mnist_dir() -> PathBuf {
    match std::env::var_os("AQKS_MNIST_DIR") {
        Some(d) => PathBuf::from(d),
        None => Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"),
    }
}

fn mnist_files(dir: &Path) -> Vec<(PathBuf, PathBuf)> {
    ["train", "t10k"]
        .iter()
        .map(|p| {
            (
                dir.join(format!("{p}-images-idx3-ubyte")),
                dir.join(format!("{p}-labels-idx1-ubyte")),
            )
        })
        .collect()
}

#[test]
fn mnist_desk_scale_improvement() {
    let dir = mnist_dir();
    let files = mnist_files(&dir);
    if let Some((missing, _)) = files.iter().find(|(i, l)| !i.exists() || !l.exists()) {
        report(
            "mnist_desk_scale_improvement",
            false,
            &format!("MNIST files not found ({}); set AQKS_MNIST_DIR", missing.display()),
        );
    }
    let all = load_mnist_files(&files).unwrap();
    let counts = all.label_counts();
    assert_eq!((counts[&3], counts[&5]), (7141, 6313));

    let mut cfg = ExperimentConfig::defaults(DatasetKind::Mnist);
    cfg.dataset = DatasetSpec::Mnist {
        files,
        digits: (3, 5),
        subsample: Some(3000),
        scale_pixels: false,
    };
    cfg.qubits = 2;
    cfg.sigma_d = 0.01;
    cfg.b_mode = aqks_harness::config::BMode::Zero;
    cfg.episodes = 2000;
    cfg.trials = 5;
    let data = prepare(&cfg).unwrap();
    let summary = run_on_split(&cfg, &data, "none", "-").unwrap();
    let baseline = summary.baseline.test_accuracy;
    let (mu, sd) = summary.test_stats();
    let pass = (0.93..=0.97).contains(&baseline) && mu - baseline >= 0.003;
    report(
        "mnist_desk_scale_improvement",
        pass,
        &format!(
            "baseline {baseline:.4} (need 0.93..0.97), quantum features {mu:.4} ± {sd:.4}, gain {:+.4} (need >= +0.003)",
            mu - baseline
        ),
    );
}

#[test]
fn kernel_estimate_converges_to_exact() {
    let episodes = 10_000;
    let tol = 5.0 / (episodes as f64).sqrt();
    let circles = default_circles();
    let (cfg, dist) = circles_transform(2, episodes);
    let s = build_s_matrix(2).unwrap();
    let mut worst: f64 = 0.0;
    for seed in 0..3u64 {
        let mut rng = seeded(1000 + seed);
        let eps = sample_episodes(episodes, 2, 2, &dist, &mut rng).unwrap();
        let mut pairs = BTreeSet::new();
        while pairs.len() < 5 {
            let idx = sample(&mut rng, circles.len(), 2);
            pairs.insert((idx.index(0), idx.index(1)));
        }
        for (m, n) in pairs {
            let x = Matrix::from_rows(&[circles.x.row(m).to_vec(), circles.x.row(n).to_vec()]).unwrap();
            let fm = transform_dataset(&x, &eps, &cfg, seed).unwrap();
            let est = kernel_estimate(&fm.sample(0), &fm.sample(1)).unwrap();
            let pm = exact_probability_features(x.row(0), &eps, &cfg).unwrap();
            let pn = exact_probability_features(x.row(1), &eps, &cfg).unwrap();
            let exact = kernel_exact(&pm, &pn, &s).unwrap();
            worst = worst.max((est - exact).abs());
        }
    }
    report(
        "kernel_estimate_converges_to_exact",
        worst <= tol,
        &format!("max |estimate - exact| {worst:.5} over 3 seeds x 5 pairs (need <= {tol})"),
    );
}

/// Cyclic Jacobi eigenvalues of a real symmetric matrix.
fn jacobi_eigenvalues(mut a: DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].powi(2))
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let (c, s) = (1.0 / (t * t + 1.0).sqrt(), t / (t * t + 1.0).sqrt());
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[(i, i)]).collect()
}

#[test]
fn exact_gram_is_positive_semidefinite() {
    let circles = default_circles();
    let mut rng = seeded(44);
    let idx = sample(&mut rng, circles.len(), 20).into_vec();
    let (cfg, dist) = circles_transform(2, 3);
    let eps = sample_episodes(3, 2, 2, &dist, &mut rng).unwrap();
    let probs: Vec<Vec<Vec<f64>>> = idx
        .iter()
        .map(|&i| exact_probability_features(circles.x.row(i), &eps, &cfg).unwrap())
        .collect();
    let s = build_s_matrix(2).unwrap();
    let g = gram_matrix(GramInput::Exact {
        probabilities: &probs,
        s: &s,
    })
    .unwrap();
    let lib = min_eigenvalue(&g).unwrap();
    let oracle = jacobi_eigenvalues(g.clone()).into_iter().fold(f64::INFINITY, f64::min);
    let pass = lib >= -1e-8 && oracle >= -1e-8 && (lib - oracle).abs() <= 1e-9;
    report(
        "exact_gram_is_positive_semidefinite",
        pass,
        &format!("min eigenvalue {lib:.3e} (Jacobi {oracle:.3e}), need >= -1e-8"),
    );
}

type CMat = DMatrix<Complex64>;

fn cx(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Operator acting as `single` on qubit `u` of `q`; qubit 0 is the low bit.
fn on_qubit(single: &CMat, u: usize, q: usize) -> CMat {
    let mut out = CMat::identity(1, 1);
    for k in (0..q).rev() {
        let f = if k == u { single.clone() } else { CMat::identity(2, 2) };
        out = out.kronecker(&f);
    }
    out
}

fn kron_hamiltonian(terms: &HamiltonianTerms, a: f64) -> CMat {
    let q = terms.num_qubits();
    let x = DMatrix::from_row_slice(2, 2, &[cx(0.0), cx(1.0), cx(1.0), cx(0.0)]);
    let z = DMatrix::from_row_slice(2, 2, &[cx(1.0), cx(0.0), cx(0.0), cx(-1.0)]);
    let mut h = CMat::zeros(1 << q, 1 << q);
    for u in 0..q {
        h += on_qubit(&x, u, q) * cx(a * terms.transverse_weight());
        h += on_qubit(&z, u, q) * cx(terms.local_fields()[u]);
    }
    for (&(l, m), &v) in terms.couplings() {
        h += on_qubit(&z, l, q) * on_qubit(&z, m, q) * cx(v);
    }
    h
}

/// RK4 on the continuous Schrödinger equation.
fn rk4_distribution(terms: &HamiltonianTerms, total: f64, dt: f64) -> Vec<f64> {
    let dim = 1 << terms.num_qubits();
    let h0 = kron_hamiltonian(terms, 0.0);
    let hx = kron_hamiltonian(terms, 1.0) - &h0;
    let mut psi = DVector::from_element(dim, cx(1.0 / (dim as f64).sqrt()));
    let rhs = |t: f64, v: &DVector<Complex64>| (&h0 * v + &hx * v * cx(1.0 - t / total)) * Complex64::new(0.0, -1.0);
    for k in 0..(total / dt).round() as usize {
        let t = k as f64 * dt;
        let k1 = rhs(t, &psi);
        let k2 = rhs(t + dt / 2.0, &(&psi + &k1 * cx(dt / 2.0)));
        let k3 = rhs(t + dt / 2.0, &(&psi + &k2 * cx(dt / 2.0)));
        let k4 = rhs(t + dt, &(&psi + &k3 * cx(dt)));
        psi += (k1 + k2 * cx(2.0) + k3 * cx(2.0) + k4) * cx(dt / 6.0);
    }
    psi.iter().map(|a| a.norm_sqr()).collect()
}

fn random_terms<R: Rng>(q: usize, rng: &mut R) -> HamiltonianTerms {
    let fields: Vec<f64> = (0..q).map(|_| rng.random_range(-3.0..3.0)).collect();
    let mut couplings = Vec::new();
    for l in 0..q {
        for m in l + 1..q {
            couplings.push(((l, m), rng.random_range(-3.0..3.0)));
        }
    }
    let sign = if rng.random_bool(0.5) { TransverseSign::Negative } else { TransverseSign::Positive };
    HamiltonianTerms::new(fields, couplings, sign.weight()).unwrap()
}

#[test]
fn simulator_norm_conservation() {
    let mut rng = seeded(51);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let q = rng.random_range(1..=6);
        let terms = random_terms(q, &mut rng);
        let total = rng.random_range(0.5..10.0);
        let tau = total / rng.random_range(1..=40) as f64;
        let schedule = Schedule::new(total, tau).unwrap();
        let out = evolve(&terms, &schedule, &StateVector::initial(q).unwrap()).unwrap();
        let norm = out.amplitudes().iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        worst = worst.max((norm - 1.0).abs());
    }
    report(
        "simulator_norm_conservation",
        worst <= 1e-9,
        &format!("max |‖ψ‖ - 1| {worst:.3e} over 100 evolutions (need <= 1e-9)"),
    );
}

#[test]
fn simulator_step_unitarity() {
    let mut rng = seeded(52);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for _ in 0..60 {
        let q = rng.random_range(1..=6);
        let terms = random_terms(q, &mut rng);
        let tau = rng.random_range(0.05..2.0);
        let schedule = Schedule::new(tau * rng.random_range(1..=10) as f64, tau).unwrap();
        for u in step_unitaries(&terms, &schedule).unwrap() {
            let dev = &u.adjoint() * &u - CMat::identity(u.nrows(), u.ncols());
            worst = worst.max(dev.iter().map(|z| z.norm()).fold(0.0, f64::max));
            count += 1;
        }
    }
    report(
        "simulator_step_unitarity",
        worst <= 1e-10,
        &format!("max |U†U - I| {worst:.3e} over {count} step unitaries (need <= 1e-10)"),
    );
}

fn tv(p: &[f64], r: &[f64]) -> f64 {
    0.5 * p.iter().zip(r).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

#[test]
fn simulator_trotter_accuracy() {
    let circles = default_circles();
    let mut rng = seeded(53);
    let mut per_q = Vec::new();
    let mut reference_gap: f64 = 0.0;
    let coarse = Schedule::new(5.0, 1.0).unwrap();
    let fine = Schedule::new(5.0, 1e-3).unwrap();
    for q in [1usize, 2] {
        let mut worst: f64 = 0.0;
        let (cfg, dist) = circles_transform(q, 10);
        let eps = sample_episodes(10, q, 2, &dist, &mut rng).unwrap();
        for &i in sample(&mut rng, circles.len(), 5).into_vec().iter() {
            for ep in &eps {
                let j = aqks::encoding::encode(circles.x.row(i), ep).unwrap();
                let topology = aqks::encoding::Topology::new(cfg.topology, q).unwrap();
                let couplings = aqks::encoding::couplings_from_j(&j, &topology).unwrap();
                let terms = HamiltonianTerms::new(j, couplings, cfg.transverse_sign.weight()).unwrap();
                let init = StateVector::initial(q).unwrap();
                let p = outcome_probabilities(&evolve(&terms, &coarse, &init).unwrap());
                let r = outcome_probabilities(&evolve(&terms, &fine, &init).unwrap());
                worst = worst.max(tv(&p, &r));
                reference_gap = reference_gap.max(tv(&r, &rk4_distribution(&terms, 5.0, 1e-3)));
            }
        }
        per_q.push(worst);
    }
    let worst = per_q.iter().copied().fold(0.0, f64::max);
    assert!(reference_gap <= 1e-3, "fine-step reference off continuous evolution by {reference_gap}");
    report(
        "simulator_trotter_accuracy",
        worst <= 5e-3,
        &format!(
            "max TV(tau=1, tau=1e-3) q=1 {:.4}, q=2 {:.4} over 50 encodings each at T=5 (need <= 5e-3); reference vs RK4 {reference_gap:.1e}",
            per_q[0],
            per_q[1]
        ),
    );
}

fn standardize(x: &Matrix) -> Matrix {
    let (n, d) = (x.rows(), x.cols());
    let mut out = x.clone();
    for j in 0..d {
        let col: Vec<f64> = (0..n).map(|i| x.get(i, j)).collect();
        let mean = col.iter().sum::<f64>() / n as f64;
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        for (i, v) in col.iter().enumerate() {
            out.row_mut(i)[j] = if sd > 1e-12 { (v - mean) / sd } else { 0.0 };
        }
    }
    out
}

/// Primal optimum of `½(‖w‖² + b²) + C Σ hinge` from accelerated projected
/// gradient on the dual, with its duality gap.
fn reference_objective(xs: &Matrix, y: &[i8], c: f64) -> (f64, f64) {
    let n = xs.rows();
    let aug = DMatrix::from_fn(n, xs.cols() + 1, |i, j| {
        let v = if j < xs.cols() { xs.get(i, j) } else { 1.0 };
        v * f64::from(y[i])
    });
    let q = &aug * aug.transpose();
    let step = 1.0 / SymmetricEigen::new(q.clone()).eigenvalues.max();
    let mut alpha = DVector::<f64>::zeros(n);
    let mut momentum = alpha.clone();
    let mut t = 1.0f64;
    for _ in 0..200_000 {
        let grad = &q * &momentum - DVector::from_element(n, 1.0);
        let next = (&momentum - grad * step).map(|a| a.clamp(0.0, c));
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        momentum = &next + (&next - &alpha) * ((t - 1.0) / t_next);
        alpha = next;
        t = t_next;
    }
    let w = aug.transpose() * &alpha;
    let dual = alpha.sum() - 0.5 * w.norm_squared();
    let hinge: f64 = (0..n).map(|i| (1.0 - aug.row(i).dot(&w.transpose())).max(0.0)).sum();
    let primal = 0.5 * w.norm_squared() + c * hinge;
    (primal, primal - dual)
}

fn separable(seed: u64, n: usize, d: usize) -> LabeledDataset {
    let mut rng = seeded(seed);
    let mut normal: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let len = normal.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-3);
    normal.iter_mut().for_each(|v| *v /= len);
    let offset = rng.random_range(-0.5..0.5);
    let (mut rows, mut y) = (Vec::new(), Vec::new());
    while rows.len() < n {
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
        let s: f64 = x.iter().zip(&normal).map(|(a, b)| a * b).sum::<f64>() + offset;
        let label = if s > 0.0 { 1 } else { -1 };
        if s.abs() < 0.3 || (rows.len() + 1 == n && !y.contains(&-label)) {
            continue;
        }
        rows.push(x);
        y.push(label);
    }
    LabeledDataset::new(Matrix::from_rows(&rows).unwrap(), y).unwrap()
}

#[test]
fn svm_solver_validity() {
    let mut worst: f64 = 0.0;
    let mut worst_default_tol: f64 = 0.0;
    let mut flip_exact = true;
    let mut instances = 0;
    for seed in 0..10u64 {
        for c in [0.1, 1.0, 10.0] {
            let data = separable(seed, 20, 2 + seed as usize % 4);
            let xs = standardize(data.x());
            let (reference, gap) = reference_objective(&xs, data.y(), c);
            assert!(gap < 1e-9, "reference duality gap {gap}");
            let loose = fit(&data, &SvmParams { c, ..SvmParams::default() }).unwrap();
            worst_default_tol = worst_default_tol.max((loose.objective_standardized(&xs, data.y()) - reference).abs());
            // The stopping rule bounds the KKT violation, not the objective gap.
            let params = SvmParams {
                c,
                tol: 1e-6,
                ..SvmParams::default()
            };
            let model = fit(&data, &params).unwrap();
            worst = worst.max((model.objective_standardized(&xs, data.y()) - reference).abs());
            let flipped = fit(&data.flipped(), &params).unwrap();
            flip_exact &= flipped.bias == -model.bias
                && model.weights.iter().zip(&flipped.weights).all(|(a, b)| *b == -*a);
            instances += 1;
        }
    }
    report(
        "svm_solver_validity",
        worst <= 1e-4 && flip_exact,
        &format!(
            "max objective gap {worst:.2e} at tol 1e-6 over {instances} instances (need <= 1e-4; {worst_default_tol:.2e} at the default tol 1e-4); label flip exact: {flip_exact}"
        ),
    );
}

fn run_cli(out: &Path, threads: &str) {
    let o = Command::new(env!("CARGO_BIN_EXE_aqks"))
        .args(["aqks", "--dataset", "circles", "--episodes", "50", "--trials", "2", "--seed", "7"])
        .args(["--threads", threads, "--out"])
        .arg(out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

fn rows_without_timing(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string())
        .collect()
}

#[test]
fn runs_are_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("one"), dir.path().join("four"));
    run_cli(&a, "1");
    run_cli(&b, "4");
    let mut mismatches = Vec::new();
    let mut caches = 0;
    for t in 0..2 {
        for part in ["train", "test"] {
            let name = format!("features/trial{t:03}_{part}.aqf");
            caches += 1;
            if std::fs::read(a.join(&name)).unwrap() != std::fs::read(b.join(&name)).unwrap() {
                mismatches.push(name);
            }
        }
    }
    let rows_a = rows_without_timing(&a.join("results.csv"));
    if rows_a != rows_without_timing(&b.join("results.csv")) {
        mismatches.push("results.csv".into());
    }
    report(
        "runs_are_reproducible_across_thread_counts",
        mismatches.is_empty(),
        &format!(
            "{caches} feature caches and {} result rows compared between --threads 1 and 4; mismatches: {mismatches:?}",
            rows_a.len() - 1
        ),
    );
}
