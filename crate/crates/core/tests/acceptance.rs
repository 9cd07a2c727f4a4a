//! Acceptance criteria, one test each. Every test prints a single
//! `PASS`/`FAIL` line before asserting.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use secest::cli::{run_experiment1, run_experiment2, Exp2Result, Scenario};
use secest::detect::{error_trace, effective_attack_oracle, Detector, DetectorConfig, Threshold};
use secest::kalman::{dare_residual, delta_matrix, run_filter, solve_default, worst_subset, Mode};
use secest::model::{make_random_stable_system, simulate_stationary, AttackSpec, AttackStrategy, SystemModel};
use secest::noiseless::{
    ambiguity_example, ambiguity_observation, decode, detect_corruption, encode, min_symbol_distance,
};
use secest::obsv::{is_observable, sparse_observability_index, subsets_of, SensorBlocks, SensorSubset};
use secest::pbsat::{solve, PBConstraint, PBFormula, SolveResult};
use secest::search::{smt_search_with, Engine};

fn verdict(id: u32, pass: bool, detail: String) -> bool {
    println!("{} criterion {id:>2}: {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

fn random_subset(rng: &mut ChaCha8Rng, p: usize) -> SensorSubset {
    let size = rng.gen_range(1..=p);
    SensorSubset::new(sample(rng, p, size).into_iter().map(|i| i + 1).collect(), p).unwrap()
}

#[test]
fn c01_riccati_fixed_point() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    let mut pairs = 0;
    let mut seed = 0;
    while pairs < 50 {
        seed += 1;
        let n = rng.gen_range(1..=20);
        let p = rng.gen_range(1..=6);
        let rho = rng.gen_range(0.3..0.99);
        let m = make_random_stable_system(n, p, rho, seed).unwrap();
        let s = random_subset(&mut rng, p);
        if !is_observable(&m, &s).unwrap() {
            continue;
        }
        let f = solve_default(&m, &s, Mode::Prediction).unwrap();
        worst = worst.max(dare_residual(&m, &s, &f.p_star));
        pairs += 1;
    }
    let scalar = SystemModel::new(DMatrix::identity(1, 1), DMatrix::identity(1, 1), 1.0, 1.0).unwrap();
    let f = solve_default(&scalar, &SensorSubset::full(1), Mode::Prediction).unwrap();
    let scalar_err = (f.p_star[(0, 0)] - (1.0 + 5f64.sqrt()) / 2.0).abs();
    let elapsed = start.elapsed();
    let ok = verdict(
        1,
        worst <= 1e-9 && scalar_err <= 1e-10 && elapsed < Duration::from_secs(10),
        format!("max DARE residual {worst:.2e} over 50 pairs, scalar error {scalar_err:.1e}, {elapsed:.1?}"),
    );
    assert!(ok);
}

#[test]
fn c02_attack_free_error_matches_steady_covariance() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (window, t1) = (100_000, 200);
    let mut worst = [0.0f64; 2];
    let mut done = 0;
    let mut seed = 0;
    while done < 20 {
        seed += 1;
        let m = make_random_stable_system(3, 4, 0.8, 1000 + seed).unwrap();
        let s = random_subset(&mut rng, 4);
        if !is_observable(&m, &s).unwrap() {
            continue;
        }
        let traj = simulate_stationary(&m, &AttackSpec::none(), t1 + window, seed).unwrap();
        for (slot, mode) in [Mode::Prediction, Mode::Filtering].into_iter().enumerate() {
            let f = solve_default(&m, &s, mode).unwrap();
            let run = run_filter(&f, &traj, 0, t1 + window - 1).unwrap();
            let tr = error_trace(&traj, &run, t1, window).unwrap();
            let rel = (tr / f.reference_covariance().trace() - 1.0).abs();
            worst[slot] = worst[slot].max(rel);
        }
        done += 1;
    }
    let elapsed = start.elapsed();
    let ok = verdict(
        2,
        worst[0] <= 0.05 && worst[1] <= 0.05 && elapsed < Duration::from_secs(120),
        format!(
            "worst relative trace error: prediction {:.2}%, filtering {:.2}% (20 subsets, N = 1e5), {elapsed:.1?}",
            100.0 * worst[0],
            100.0 * worst[1]
        ),
    );
    assert!(ok);
}

#[test]
fn c03_residue_expectation_converges() {
    let windows = [1_000usize, 10_000, 100_000];
    let s = SensorSubset::full(3);
    let mut means = [[0.0f64; 3]; 2];
    for seed in 0..20u64 {
        let m = make_random_stable_system(3, 3, 0.8, 3000 + seed).unwrap();
        let n = m.n();
        let longest = DetectorConfig::new(1.0, Threshold::Fixed(1.0), windows[2], 10 * n, Mode::Prediction);
        let traj = simulate_stationary(&m, &AttackSpec::none(), longest.required_horizon(n), seed).unwrap();
        for (slot, mode) in [Mode::Prediction, Mode::Filtering].into_iter().enumerate() {
            for (w, &window) in windows.iter().enumerate() {
                let cfg = DetectorConfig::new(1.0, Threshold::Fixed(1.0), window, 10 * n, mode);
                let det = Detector::new(&m, &traj, cfg).unwrap();
                let r = det.attack_detect(&s).unwrap().report;
                let dev = (&r.sample_matrix - &r.expected_matrix).amax();
                means[slot][w] += dev / 20.0;
            }
        }
    }
    let decreasing = means.iter().all(|m| m[0] > m[1] && m[1] > m[2]);
    let ok = verdict(
        3,
        decreasing,
        format!(
            "mean max |sample − expected| for N = 1e3/1e4/1e5: prediction {:.3}/{:.3}/{:.4}, filtering {:.3}/{:.3}/{:.4}",
            means[0][0], means[0][1], means[0][2], means[1][0], means[1][1], means[1][2]
        ),
    );
    assert!(ok);
}

/// Monte-Carlo `E(z ṽᵀ Lᵀ O_sᵀ)` where each sample runs the plant for `n`
/// steps from `x = 0`, so the output window is exactly the noise term `z`.
fn delta_monte_carlo(m: &SystemModel, s: &SensorSubset, gain: &DMatrix<f64>, samples: usize, seed: u64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = m.n();
    let q = s.len();
    let blocks = SensorBlocks::new(m);
    let ol = blocks.stacked_obs(s) * gain; // n|s| × |s|
    let (sw, sv) = (m.sigma_w2.sqrt(), m.sigma_v2.sqrt());
    let rows: Vec<usize> = s.iter().map(|i| i - 1).collect();
    let dim = n * q;
    let mut sum = DMatrix::zeros(dim, dim);
    let mut sq = DMatrix::zeros(dim, dim);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = DVector::zeros(dim);
    let mut v0 = DVector::zeros(q);
    for _ in 0..samples {
        let mut x = DVector::<f64>::zeros(n);
        for j in 0..n {
            for (b, &r) in rows.iter().enumerate() {
                let v: f64 = sv * rng.sample::<f64, _>(StandardNormal);
                if j == 0 {
                    v0[b] = v;
                }
                z[b * n + j] = m.c.row(r).dot(&x.transpose()) + v;
            }
            let w = DVector::from_fn(n, |_, _| sw * rng.sample::<f64, _>(StandardNormal));
            x = &m.a * x + w;
        }
        let right = &ol * &v0; // (ṽᵀ Lᵀ O_sᵀ)ᵀ
        let outer = &z * right.transpose();
        sq += outer.component_mul(&outer);
        sum += outer;
    }
    let k = samples as f64;
    let mean = sum / k;
    let var = sq / k - mean.component_mul(&mean);
    let se = var.map(|v| (v.max(0.0) / k).sqrt());
    (mean, se)
}

#[test]
fn c04_delta_matches_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst_z: f64 = 0.0;
    for model in 0..10u64 {
        let n = rng.gen_range(1..=5);
        let p = rng.gen_range(1..=3);
        let m = make_random_stable_system(n, p, 0.8, 4000 + model).unwrap();
        let s = SensorSubset::full(p);
        let f = solve_default(&m, &s, Mode::Filtering).unwrap();
        let delta = delta_matrix(&m, &s, &f).unwrap();
        let (mc, se) = delta_monte_carlo(&m, &s, &f.gain, 1_000_000, model);
        for i in 0..delta.nrows() {
            for j in 0..delta.ncols() {
                let diff = (delta[(i, j)] - mc[(i, j)]).abs();
                let z = if se[(i, j)] > 0.0 { diff / se[(i, j)] } else if diff < 1e-12 { 0.0 } else { f64::INFINITY };
                worst_z = worst_z.max(z);
            }
        }
    }
    let ok = verdict(4, worst_z <= 3.0, format!("largest |closed form − Monte Carlo| is {worst_z:.2} standard errors (10 models, 1e6 samples)"));
    assert!(ok);
}

#[test]
fn c05_experiment1_single_passing_subset() {
    let start = Instant::now();
    let r = run_experiment1(&Scenario::experiment1()).unwrap();
    let elapsed = start.elapsed();
    let ok = verdict(
        5,
        r.exact_complement_rate >= 0.9 && elapsed < Duration::from_secs(300),
        format!(
            "exactly the attack-free complement passes in {:.0}% of {} seeds, {elapsed:.1?}",
            100.0 * r.exact_complement_rate,
            r.seeds.len()
        ),
    );
    assert!(ok);
}

fn mixed_attack(rng: &mut ChaCha8Rng, p: usize, seed: u64) -> AttackSpec {
    if seed.is_multiple_of(2) {
        return AttackSpec::none();
    }
    let j = rng.gen_range(1..=p);
    let strategy = match (seed / 2) % 4 {
        0 => AttackStrategy::Constant { bias: vec![rng.gen_range(2.0..5.0)] },
        1 => AttackStrategy::SeededRandom { amplitude: rng.gen_range(2.0..4.0) },
        2 => AttackStrategy::NoiseLinear { gain: rng.gen_range(3.0..6.0) },
        _ => AttackStrategy::ZeroOutput,
    };
    AttackSpec::new(vec![j], strategy)
}

/// The automatic threshold sits one to two orders of magnitude below the
/// attack-free sampling spread at this window, so the agreement check uses a
/// fixed η at the noise floor; the automatic variant is reported alongside.
const CALIBRATED_ETA: f64 = 1.0;
const EFFECTIVE_EPS: f64 = 0.25;

#[test]
fn c06_detector_agrees_with_effective_attack_oracle() {
    let k = 1;
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let (mut agree, mut agree_auto, mut effective) = (0, 0, 0);
    for seed in 0..50u64 {
        let m = make_random_stable_system(4, 5, 0.8, 6000 + seed).unwrap();
        let attack = mixed_attack(&mut rng, 5, seed);
        let cfg = DetectorConfig::new(EFFECTIVE_EPS, Threshold::Fixed(CALIBRATED_ETA), 20_000, 40, Mode::Prediction);
        let traj = simulate_stationary(&m, &attack, cfg.required_horizon(4), seed).unwrap();
        let s = SensorSubset::full(5);
        let det = Detector::new(&m, &traj, cfg.clone()).unwrap();
        let d = det.attack_detect(&s).unwrap();
        let f = det.filter(&s).unwrap();
        let oracle = effective_attack_oracle(&traj, &d.estimates, &f.p_star, EFFECTIVE_EPS, cfg.t1, det.window()).unwrap();
        let auto_cfg = DetectorConfig { threshold: Threshold::Auto { k }, ..cfg };
        let auto = Detector::new(&m, &traj, auto_cfg).unwrap().attack_detect(&s).unwrap().flag;
        effective += oracle as usize;
        agree += (d.flag == oracle) as usize;
        agree_auto += (auto == oracle) as usize;
    }
    let ok = verdict(
        6,
        agree >= 45,
        format!("detector matches oracle on {agree}/50 scenarios ({effective} effective attacks, η = {CALIBRATED_ETA}, ε = {EFFECTIVE_EPS}); automatic η: {agree_auto}/50"),
    );
    assert!(ok);
}

#[test]
fn c07_search_meets_worst_subset_bound() {
    let (epsilon, k, p) = (EFFECTIVE_EPS, 1, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let (mut within, mut found) = (0, 0);
    for seed in 0..50u64 {
        let m = make_random_stable_system(4, p, 0.8, 7000 + seed).unwrap();
        let j = rng.gen_range(1..=p);
        let attack = AttackSpec::new(vec![j], AttackStrategy::SeededRandom { amplitude: 3.0 });
        let cfg = DetectorConfig::new(epsilon, Threshold::Fixed(CALIBRATED_ETA), 20_000, 40, Mode::Prediction);
        let traj = simulate_stationary(&m, &attack, cfg.required_horizon(4), seed).unwrap();
        let det = Detector::new(&m, &traj, cfg.clone()).unwrap();
        let out = smt_search_with(&mut Engine::new(&det), k).unwrap();
        let Some(est) = &out.estimates else { continue };
        found += 1;
        let bound = worst_subset(&m, k).unwrap().1 + epsilon;
        if error_trace(&traj, est, cfg.t1, det.window()).unwrap() <= bound {
            within += 1;
        }
    }
    let ok = verdict(7, within >= 45, format!("error trace within tr(P*_worst) + ε on {within}/50 seeds ({found} searches returned a subset)"));
    assert!(ok);
}

fn brute_force(f: &PBFormula) -> Option<Vec<bool>> {
    let p = f.num_vars;
    let mut best: Option<(usize, Vec<usize>)> = None;
    for mask in 0u32..(1 << p) {
        let values: Vec<bool> = (0..p).map(|i| mask >> i & 1 == 1).collect();
        let sat = f.constraints.iter().all(|c| {
            let count = c.vars.iter().filter(|&&v| values[v]).count();
            match c.sense {
                secest::pbsat::Sense::AtMost => count <= c.bound,
                secest::pbsat::Sense::AtLeast => count >= c.bound,
            }
        });
        if !sat {
            continue;
        }
        let ones: Vec<usize> = (0..p).filter(|&i| values[i]).collect();
        let better = match &best {
            None => true,
            Some((n, b)) => ones.len() < *n || (ones.len() == *n && ones < *b),
        };
        if better {
            best = Some((ones.len(), ones));
        }
    }
    best.map(|(_, ones)| (0..p).map(|i| ones.contains(&i)).collect())
}

#[test]
fn c08_sat_solver_matches_brute_force() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut agree = 0;
    let mut sat_count = 0;
    for _ in 0..200 {
        let p = rng.gen_range(1..=12);
        let mut f = PBFormula::new(p);
        for _ in 0..rng.gen_range(1..=8) {
            let size = rng.gen_range(1..=p);
            let vars: Vec<usize> = sample(&mut rng, p, size).into_iter().collect();
            let bound = rng.gen_range(0..=size);
            let c = if rng.gen_bool(0.5) {
                PBConstraint::at_most(vars, bound)
            } else {
                PBConstraint::at_least(vars, bound)
            };
            f.push(c.unwrap()).unwrap();
        }
        let got = match solve(&f).unwrap() {
            SolveResult::Sat(a) => Some(a.values),
            SolveResult::Unsat => None,
        };
        let want = brute_force(&f);
        sat_count += want.is_some() as usize;
        agree += (got == want) as usize;
    }
    let elapsed = start.elapsed();
    let ok = verdict(
        8,
        agree == 200 && elapsed < Duration::from_secs(10),
        format!("{agree}/200 formulas agree with enumeration ({sat_count} satisfiable), {elapsed:.1?}"),
    );
    assert!(ok);
}

/// Criterion 9's sweep, shared with criterion 10.
fn sweep() -> &'static (Exp2Result, Duration) {
    static SWEEP: OnceLock<(Exp2Result, Duration)> = OnceLock::new();
    SWEEP.get_or_init(|| {
        let mut s = Scenario::experiment2();
        s.repetitions = 50;
        let start = Instant::now();
        let r = run_experiment2(&s, true).expect("sweep runs");
        (r, start.elapsed())
    })
}

#[test]
fn c09_smt_versus_exhaustive() {
    let (r, elapsed) = sweep();
    let runs = r.runs.len();
    let not_more = r.runs.iter().filter(|x| x.smt.theory_checks <= x.exhaustive.theory_checks).count();
    let slow: Vec<String> = r
        .timing
        .iter()
        .filter(|t| t.p >= 9 && t.mean_time_smt > t.mean_time_exhaustive)
        .map(|t| t.p.to_string())
        .collect();
    for (row, t) in r.rows.iter().zip(&r.timing) {
        println!(
            "    p={:>2} k={} checks exh {:>6.1} smt {:>6.1} (smt ≤ exh in {:>2}/{}), time exh {:.4}s smt {:.4}s",
            row.p, row.k, row.mean_checks_exhaustive, row.mean_checks_smt, row.smt_not_more_checks, row.reps,
            t.mean_time_exhaustive, t.mean_time_smt
        );
    }
    let ok = verdict(
        9,
        not_more == runs && slow.is_empty() && *elapsed < Duration::from_secs(1800),
        format!(
            "SMT used no more checks than enumeration on {not_more}/{runs} runs; mean SMT time above enumeration for p ≥ 9 at p = [{}]; {elapsed:.1?}",
            slow.join(", ")
        ),
    );
    assert!(ok);
}

#[test]
fn c10_certificates_are_sound() {
    let (r, _) = sweep();
    let mismatches: usize = r.runs.iter().map(|x| x.audit_mismatches.unwrap_or(usize::MAX)).sum();
    let certs: usize = r.runs.iter().map(|x| x.smt.certificates).sum();
    let final_bad = r
        .runs
        .iter()
        .filter(|x| x.smt.found && x.audit_final_passes != Some(true))
        .count();
    let ok = verdict(
        10,
        mismatches == 0 && final_bad == 0,
        format!(
            "{certs} certificates over {} runs, {mismatches} not re-confirmed failing; {final_bad} returned subsets fail a fresh check",
            r.runs.len()
        ),
    );
    assert!(ok);
}

#[test]
fn c11_noiseless_coding_guarantees() {
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    let mut failures = Vec::new();
    let mut systems = 0;
    let mut seed = 0;
    while systems < 20 {
        seed += 1;
        let n = rng.gen_range(2..=3);
        let p = rng.gen_range(4..=8);
        let mut m = make_random_stable_system(n, p, 0.9, 11_000 + seed).unwrap();
        m.sigma_w2 = 0.0;
        m.sigma_v2 = 0.0;
        let theta = sparse_observability_index(&m).unwrap();
        if theta < 2 {
            continue;
        }
        let theta = theta as usize;
        let k = (theta / 2).min(2);
        systems += 1;
        let x0 = DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
        let clean = encode(&m, &x0).unwrap();
        for s in subsets_of(&SensorSubset::full(p), k) {
            let other = encode(&m, &DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0))).unwrap();
            let mut y = clean.clone();
            for d in s.iter() {
                y.replace(d, other.symbols[d - 1].clone()).unwrap();
            }
            match decode(&m, &y, k) {
                Ok(r) if r.unique && (DVector::from_column_slice(&r.state) - &x0).norm() <= 1e-9 => {}
                other => failures.push(format!("decode {s} on system {seed}: {other:?}")),
            }
        }
        for size in 1..=theta {
            for s in subsets_of(&SensorSubset::full(p), size).take(20) {
                let mut y = clean.clone();
                for d in s.iter() {
                    let bumped: Vec<f64> = y.symbols[d - 1].iter().map(|v| v + rng.gen_range(0.5..1.5)).collect();
                    y.replace(d, bumped).unwrap();
                }
                if !detect_corruption(&m, &y).unwrap() {
                    failures.push(format!("missed corruption {s} on system {seed}"));
                }
            }
        }
        let dmin = min_symbol_distance(&m).unwrap();
        if dmin != theta + 1 {
            failures.push(format!("distance {dmin} vs θ+1 = {}", theta + 1));
        }
        for _ in 0..500 {
            let a = encode(&m, &DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0))).unwrap();
            let b = encode(&m, &DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0))).unwrap();
            let differing = a
                .symbols
                .iter()
                .zip(&b.symbols)
                .filter(|(u, v)| u.iter().zip(v.iter()).any(|(x, y)| (x - y).abs() > 1e-12))
                .count();
            if differing < dmin {
                failures.push(format!("sampled pair differs in {differing} < {dmin} symbols"));
            }
        }
    }
    let amb = ambiguity_example().unwrap();
    let (y, _) = ambiguity_observation(&amb, &DVector::from_column_slice(&[0.3, -0.7])).unwrap();
    let ambiguous = !decode(&amb, &y, 2).unwrap().unique;
    let ok = verdict(
        11,
        failures.is_empty() && ambiguous,
        format!("20 systems: {} failures; two-explanation construction ambiguous: {ambiguous}", failures.len()),
    );
    for f in failures.iter().take(5) {
        println!("    {f}");
    }
    assert!(ok);
}

#[test]
fn c12_cli_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("sweep.json");
    std::fs::write(
        &scenario,
        r#"{"model": {"random": {"n": 6, "p": 6, "spectral_radius": 0.8, "sigma_w2": 0.01}},
            "attack": {"strategy": {"kind": "noise_linear", "gain": 2.0}},
            "detector": {"eta": 2.0, "window": 300}, "k": 2, "repetitions": 2,
            "sweep": {"p_values": [3, 4, 5, 6]}}"#,
    )
    .unwrap();
    let bin = env!("CARGO_BIN_EXE_secest");
    let commands: [(&str, Vec<&str>); 7] = [
        ("simulate", vec![]),
        ("detect", vec![]),
        ("search", vec![]),
        ("exp1", vec!["--reps", "2"]),
        ("exp2", vec!["--scenario", scenario.to_str().unwrap()]),
        ("decode-noiseless", vec![]),
        ("obsv", vec![]),
    ];
    let mut mismatched = Vec::new();
    for (cmd, extra) in &commands {
        for format in ["csv", "json"] {
            let mut outputs = Vec::new();
            for run in 0..2 {
                let out = dir.path().join(format!("{cmd}-{format}-{run}"));
                std::fs::create_dir(&out).unwrap();
                let status = std::process::Command::new(bin)
                    .arg(cmd)
                    .args(["--seed", "7", "--format", format, "--out", out.to_str().unwrap()])
                    .args(extra)
                    .status()
                    .unwrap();
                assert!(status.success(), "{cmd} --format {format} failed");
                let file = out.join(format!("{}.{format}", cmd.replace('-', "_")));
                outputs.push(std::fs::read(file).unwrap());
            }
            if outputs[0] != outputs[1] || outputs[0].is_empty() {
                mismatched.push(format!("{cmd}/{format}"));
            }
        }
    }
    let ok = verdict(
        12,
        mismatched.is_empty(),
        format!("7 subcommands × 2 formats repeated with seed 7; differing: [{}]", mismatched.join(", ")),
    );
    assert!(ok);
}
