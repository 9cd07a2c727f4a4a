//! Scenario files, the two desk-scale experiments and the command-line front end.
//!
//! Every artifact is deterministic given the scenario and seed. Wall-clock
//! timings are the one exception, so they are written to a separate
//! `*_timing` artifact (or stderr) and never mixed into the main output.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::{Detector, DetectorConfig, ResidueReport, Threshold, DEFAULT_WINDOW};
use crate::error::{Error, Result};
use crate::kalman::Mode;
use crate::model::{make_random_stable_system, matrix_rows, simulate_stationary, AttackSpec, AttackStrategy, SystemModel, Trajectory};
use crate::noiseless::{decode, detect_corruption, encode, min_symbol_distance, DecodeResult};
use crate::obsv::{sparse_observability_index, subsets_of, SensorBlocks, SensorSubset};
use crate::search::{exhaustive_search_with, smt_search_with, Engine, Method, SearchOutcome};
use crate::SCHEMA_VERSION;

pub const EXIT_PARSE: i32 = 2;
pub const EXIT_ANALYSIS: i32 = 3;
pub const EXIT_IO: i32 = 4;

pub const THREADS_ENV: &str = "SECEST_THREADS";

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => EXIT_IO,
        Error::Parse(_) | Error::Config(_) => EXIT_PARSE,
        _ => EXIT_ANALYSIS,
    }
}

// ---------------------------------------------------------------------------
// Scenario

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSource {
    Random {
        n: usize,
        p: usize,
        spectral_radius: f64,
        /// Defaults to the repetition seed.
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default = "one")]
        sigma_w2: f64,
        #[serde(default = "one")]
        sigma_v2: f64,
    },
    Explicit {
        #[serde(with = "matrix_rows")]
        a: DMatrix<f64>,
        #[serde(with = "matrix_rows")]
        c: DMatrix<f64>,
        #[serde(default, with = "matrix_rows::option")]
        b: Option<DMatrix<f64>>,
        sigma_w2: f64,
        sigma_v2: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

impl ModelSource {
    pub fn p(&self) -> usize {
        match self {
            ModelSource::Random { p, .. } => *p,
            ModelSource::Explicit { c, .. } => c.nrows(),
        }
    }

    pub fn n(&self) -> usize {
        match self {
            ModelSource::Random { n, .. } => *n,
            ModelSource::Explicit { a, .. } => a.nrows(),
        }
    }

    pub fn build(&self, rep_seed: u64) -> Result<SystemModel> {
        match self {
            ModelSource::Random { n, p, spectral_radius, seed, sigma_w2, sigma_v2 } => {
                let mut m = make_random_stable_system(*n, *p, *spectral_radius, seed.unwrap_or(rep_seed))?;
                m.sigma_w2 = *sigma_w2;
                m.sigma_v2 = *sigma_v2;
                m.validate()?;
                Ok(m)
            }
            ModelSource::Explicit { a, c, b, sigma_w2, sigma_v2 } => {
                let m = SystemModel::new(a.clone(), c.clone(), *sigma_w2, *sigma_v2)?;
                match b {
                    Some(b) => m.with_input(b.clone()),
                    None => Ok(m),
                }
            }
        }
    }
}

/// Attacked sensors are either listed or drawn at random per repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackPlan {
    #[serde(default)]
    pub sensors: Option<Vec<usize>>,
    /// Number of randomly placed attacked sensors; defaults to `k`.
    #[serde(default)]
    pub count: Option<usize>,
    pub strategy: AttackStrategy,
}

impl Default for AttackPlan {
    fn default() -> Self {
        Self {
            sensors: None,
            count: None,
            strategy: AttackStrategy::None,
        }
    }
}

impl AttackPlan {
    pub fn realize(&self, p: usize, k: usize, rep_seed: u64) -> AttackSpec {
        if self.strategy == AttackStrategy::None {
            return AttackSpec::none();
        }
        let sensors = match &self.sensors {
            Some(s) => s.clone(),
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(rep_seed);
                rng.set_stream(2);
                sample(&mut rng, p, self.count.unwrap_or(k).min(p))
                    .into_iter()
                    .map(|i| i + 1)
                    .collect()
            }
        };
        AttackSpec::new(sensors, self.strategy.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EtaSetting {
    Value(f64),
    Keyword(EtaKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaKeyword {
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSettings {
    #[serde(default = "one")]
    pub epsilon: f64,
    #[serde(default = "auto")]
    pub eta: EtaSetting,
    #[serde(default = "default_window")]
    pub window: usize,
    /// Defaults to `10 n`.
    #[serde(default)]
    pub t1: Option<usize>,
    #[serde(default)]
    pub mode: Mode,
}

fn auto() -> EtaSetting {
    EtaSetting::Keyword(EtaKeyword::Auto)
}

fn default_window() -> usize {
    DEFAULT_WINDOW
}

impl Default for DetectorSettings {
    fn default() -> Self {
        Self {
            epsilon: 1.0,
            eta: auto(),
            window: DEFAULT_WINDOW,
            t1: None,
            mode: Mode::Prediction,
        }
    }
}

impl DetectorSettings {
    pub fn config(&self, n: usize, k: usize) -> DetectorConfig {
        let threshold = match self.eta {
            EtaSetting::Value(eta) => Threshold::Fixed(eta),
            EtaSetting::Keyword(EtaKeyword::Auto) => Threshold::Auto { k },
        };
        DetectorConfig::new(self.epsilon, threshold, self.window, self.t1.unwrap_or(10 * n), self.mode)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchChoice {
    Exhaustive,
    Smt,
    #[default]
    Both,
}

impl SearchChoice {
    pub fn methods(self) -> &'static [Method] {
        match self {
            SearchChoice::Exhaustive => &[Method::Exhaustive],
            SearchChoice::Smt => &[Method::Smt],
            SearchChoice::Both => &[Method::Exhaustive, Method::Smt],
        }
    }
}

/// Sensor-count sweep for the search-time comparison; `k = ⌊p/3⌋` per point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub p_values: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiselessSettings {
    /// Initial state; drawn uniformly from `[-1, 1]^n` when absent.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    /// Corrupted symbols; defaults to `k` random sensors.
    #[serde(default)]
    pub corrupted: Option<Vec<usize>>,
    /// State whose symbols overwrite the corrupted ones; random when absent.
    #[serde(default)]
    pub other: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    #[default]
    Json,
}

impl Format {
    fn ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub model: ModelSource,
    #[serde(default)]
    pub attack: AttackPlan,
    #[serde(default)]
    pub detector: DetectorSettings,
    #[serde(default)]
    pub search: SearchChoice,
    pub k: usize,
    #[serde(default = "one_usize")]
    pub repetitions: usize,
    #[serde(default)]
    pub seed: u64,
    /// Defaults to the shortest horizon covering the detection window.
    #[serde(default)]
    pub horizon: Option<usize>,
    /// Subset examined by `detect`; defaults to all sensors.
    #[serde(default)]
    pub subset: Option<Vec<usize>>,
    #[serde(default)]
    pub sweep: Option<Sweep>,
    #[serde(default)]
    pub noiseless: Option<NoiselessSettings>,
    #[serde(default)]
    pub outputs: Outputs,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let (n, p) = (self.model.n(), self.model.p());
        if let ModelSource::Explicit { a, c, .. } = &self.model {
            if !a.is_square() || c.ncols() != a.nrows() {
                return Err(Error::Config(format!(
                    "A is {}x{} and C is {}x{}",
                    a.nrows(),
                    a.ncols(),
                    c.nrows(),
                    c.ncols()
                )));
            }
        }
        if n == 0 || p == 0 {
            return Err(Error::Config("model needs n ≥ 1 and p ≥ 1".into()));
        }
        if self.sweep.is_none() && self.k >= p {
            return Err(Error::Config(format!("k = {} must be below p = {p}", self.k)));
        }
        if self.detector.window < n {
            return Err(Error::Config(format!("window {} shorter than n = {n}", self.detector.window)));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be positive".into()));
        }
        if let Some(sweep) = &self.sweep {
            if !matches!(self.model, ModelSource::Random { .. }) {
                return Err(Error::Config("a sweep needs a random model".into()));
            }
            if let Some(&bad) = sweep.p_values.iter().find(|&&p| p < 3) {
                return Err(Error::Config(format!("sweep point p = {bad} leaves no attacked sensor")));
            }
        }
        Ok(())
    }

    fn rep_seed(&self, rep: usize) -> u64 {
        self.seed.wrapping_add(rep as u64)
    }

    /// Model, attack and trajectory for one repetition.
    pub fn instantiate(&self, rep_seed: u64) -> Result<Instance> {
        let model = self.model.build(rep_seed)?;
        let cfg = self.detector.config(model.n(), self.k);
        let attack = self.attack.realize(model.p(), self.k, rep_seed);
        attack.validate(model.p())?;
        let horizon = self.horizon.unwrap_or_else(|| cfg.required_horizon(model.n()));
        let traj = simulate_stationary(&model, &attack, horizon, rep_seed)?;
        Ok(Instance {
            seed: rep_seed,
            k: self.k,
            model,
            attack,
            traj,
            cfg,
        })
    }

    /// Small random plant used when no scenario file is given.
    pub fn demo() -> Self {
        Self {
            model: ModelSource::Random {
                n: 4,
                p: 5,
                spectral_radius: 0.8,
                seed: None,
                sigma_w2: 1.0,
                sigma_v2: 1.0,
            },
            attack: AttackPlan {
                sensors: None,
                count: None,
                strategy: AttackStrategy::SeededRandom { amplitude: 3.0 },
            },
            detector: DetectorSettings {
                eta: EtaSetting::Value(1.0),
                window: 8_000,
                ..DetectorSettings::default()
            },
            search: SearchChoice::Both,
            k: 1,
            repetitions: 1,
            seed: 0,
            horizon: None,
            subset: None,
            sweep: None,
            noiseless: None,
            outputs: Outputs::default(),
        }
    }

    /// Subset-table setting: `n = 20`, `p = 5`, two randomly placed sensors
    /// under i.i.d. corruption, unit noise, window `2·10⁴`, `η = 4`.
    pub fn experiment1() -> Self {
        Self {
            model: ModelSource::Random {
                n: 20,
                p: 5,
                spectral_radius: 0.8,
                seed: None,
                sigma_w2: 1.0,
                sigma_v2: 1.0,
            },
            attack: AttackPlan {
                sensors: None,
                count: None,
                strategy: AttackStrategy::SeededRandom { amplitude: 3.0 },
            },
            detector: DetectorSettings {
                eta: EtaSetting::Value(4.0),
                window: 20_000,
                ..DetectorSettings::default()
            },
            k: 2,
            repetitions: 50,
            ..Self::demo()
        }
    }

    /// Search-time sweep: `n = 50`, `p ∈ 3..=12`, `k = ⌊p/3⌋`, sensors scaled
    /// by noise-linear attacks, window 500, `η = 2`.
    pub fn experiment2() -> Self {
        Self {
            model: ModelSource::Random {
                n: 50,
                p: 12,
                spectral_radius: 0.8,
                seed: None,
                sigma_w2: 0.01,
                sigma_v2: 1.0,
            },
            attack: AttackPlan {
                sensors: None,
                count: None,
                strategy: AttackStrategy::NoiseLinear { gain: 2.0 },
            },
            detector: DetectorSettings {
                eta: EtaSetting::Value(2.0),
                window: 500,
                ..DetectorSettings::default()
            },
            k: 4,
            repetitions: 10,
            sweep: Some(Sweep {
                p_values: (3..=12).collect(),
            }),
            ..Self::demo()
        }
    }
}

pub struct Instance {
    pub seed: u64,
    pub k: usize,
    pub model: SystemModel,
    pub attack: AttackSpec,
    pub traj: Trajectory,
    pub cfg: DetectorConfig,
}

impl Instance {
    pub fn detector(&self) -> Result<Detector<'_>> {
        Detector::new(&self.model, &self.traj, self.cfg.clone())
    }
}

fn subset_label(s: &SensorSubset) -> String {
    s.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ")
}

fn list_label(v: &[usize]) -> String {
    v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ")
}

/// Runs `f` over repetitions on a pool capped by `SECEST_THREADS`, keeping
/// results in repetition order.
pub fn par_reps<T, F>(reps: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(cap) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        builder = builder.num_threads(cap.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| (0..reps).into_par_iter().map(f).collect())
}

// ---------------------------------------------------------------------------
// Experiment 1

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp1Row {
    pub schema_version: u32,
    pub seed: u64,
    pub subset: String,
    pub max_deviation: f64,
    pub eta: f64,
    pub passed: bool,
    /// No attacked sensor in the subset.
    pub attack_free: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp1Seed {
    pub seed: u64,
    pub attacked: Vec<usize>,
    pub passing: Vec<String>,
    /// Exactly one subset passes and it is the attack-free complement.
    pub exact_complement: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp1Result {
    pub schema_version: u32,
    pub seeds: Vec<Exp1Seed>,
    pub exact_complement_rate: f64,
    pub all_pass_rate: f64,
    pub rows: Vec<Exp1Row>,
}

/// Residue test on every `(p−k)`-subset, one seed per repetition.
pub fn run_experiment1(scenario: &Scenario) -> Result<Exp1Result> {
    let per_seed = par_reps(scenario.repetitions, |rep| {
        let inst = scenario.instantiate(scenario.rep_seed(rep))?;
        let det = inst.detector()?;
        let p = inst.model.p();
        let mut rows = Vec::new();
        for s in subsets_of(&SensorSubset::full(p), p - inst.k) {
            let report = det.attack_detect(&s)?.report;
            rows.push(Exp1Row {
                schema_version: SCHEMA_VERSION,
                seed: inst.seed,
                subset: subset_label(&s),
                max_deviation: report.max_deviation,
                eta: report.eta,
                passed: report.passed,
                attack_free: inst.attack.attacked.iter().all(|&a| !s.contains(a)) || inst.attack.is_attack_free(),
            });
        }
        let passing: Vec<String> = rows.iter().filter(|r| r.passed).map(|r| r.subset.clone()).collect();
        let exact_complement = {
            let hits: Vec<&Exp1Row> = rows.iter().filter(|r| r.passed).collect();
            hits.len() == 1 && hits[0].attack_free && !inst.attack.is_attack_free()
        };
        let seed = Exp1Seed {
            seed: inst.seed,
            attacked: inst.attack.attacked.clone(),
            passing,
            exact_complement,
        };
        Ok((seed, rows))
    })?;
    let reps = per_seed.len() as f64;
    let exact = per_seed.iter().filter(|(s, _)| s.exact_complement).count() as f64;
    let all_pass = per_seed.iter().filter(|(_, r)| r.iter().all(|x| x.passed)).count() as f64;
    let (seeds, rows): (Vec<_>, Vec<_>) = per_seed.into_iter().unzip();
    Ok(Exp1Result {
        schema_version: SCHEMA_VERSION,
        seeds,
        exact_complement_rate: exact / reps,
        all_pass_rate: all_pass / reps,
        rows: rows.into_iter().flatten().collect(),
    })
}

// ---------------------------------------------------------------------------
// Experiment 2

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRun {
    pub found: bool,
    pub subset: Option<String>,
    pub theory_checks: usize,
    pub certificates: usize,
    /// Passing subset has no attacked sensor.
    pub attack_free: bool,
    #[serde(skip)]
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp2Run {
    pub p: usize,
    pub k: usize,
    pub seed: u64,
    pub attacked: Vec<usize>,
    pub exhaustive: MethodRun,
    pub smt: MethodRun,
    /// Certificate subsets the SMT run claims failing but a fresh detector
    /// passes; `None` when auditing is off.
    pub audit_mismatches: Option<usize>,
    /// Fresh detector verdict on the SMT result (`true` = passes).
    pub audit_final_passes: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp2Row {
    pub schema_version: u32,
    pub p: usize,
    pub k: usize,
    pub reps: usize,
    pub mean_checks_exhaustive: f64,
    pub mean_checks_smt: f64,
    pub max_checks_exhaustive: usize,
    pub max_checks_smt: usize,
    /// Runs where SMT used no more checks than enumeration.
    pub smt_not_more_checks: usize,
    pub found_rate_exhaustive: f64,
    pub found_rate_smt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp2TimingRow {
    pub schema_version: u32,
    pub p: usize,
    pub k: usize,
    pub reps: usize,
    pub mean_time_exhaustive: f64,
    pub sd_time_exhaustive: f64,
    pub mean_time_smt: f64,
    pub sd_time_smt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp2Result {
    pub schema_version: u32,
    pub rows: Vec<Exp2Row>,
    #[serde(skip)]
    pub timing: Vec<Exp2TimingRow>,
    pub runs: Vec<Exp2Run>,
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

fn method_run(o: &SearchOutcome, attacked: &[usize]) -> MethodRun {
    MethodRun {
        found: o.found,
        subset: o.subset.as_ref().map(subset_label),
        theory_checks: o.theory_checks,
        certificates: o.certificates.len(),
        attack_free: o
            .subset
            .as_ref()
            .is_some_and(|s| attacked.iter().all(|&a| !s.contains(a))),
        wall_time: o.wall_time,
    }
}

/// Both searches on one shared filter bank; preparation time is excluded so
/// the timings compare search logic alone.
pub fn run_exp2_instance(inst: &Instance, audit: bool) -> Result<Exp2Run> {
    let det = inst.detector()?;
    let mut engine = Engine::with_bank(&det);
    let ex = exhaustive_search_with(&mut engine, inst.k)?;
    let smt = smt_search_with(&mut engine, inst.k)?;
    let (audit_mismatches, audit_final_passes) = if audit {
        let fresh = inst.detector()?;
        let mut bad = 0;
        for e in smt.trace.iter().filter(|e| e.certificate.is_some()) {
            if !fresh.attack_detect(&e.subset)?.flag {
                bad += 1;
            }
        }
        let fin = match &smt.subset {
            Some(s) => Some(!fresh.attack_detect(s)?.flag),
            None => None,
        };
        (Some(bad), fin)
    } else {
        (None, None)
    };
    Ok(Exp2Run {
        p: inst.model.p(),
        k: inst.k,
        seed: inst.seed,
        attacked: inst.attack.attacked.clone(),
        exhaustive: method_run(&ex, &inst.attack.attacked),
        smt: method_run(&smt, &inst.attack.attacked),
        audit_mismatches,
        audit_final_passes,
    })
}

/// The sweep point's scenario: `p` sensors, `k = ⌊p/3⌋`.
pub fn sweep_point(scenario: &Scenario, p: usize) -> Scenario {
    let mut s = scenario.clone();
    if let ModelSource::Random { p: mp, .. } = &mut s.model {
        *mp = p;
    }
    s.k = p / 3;
    s.sweep = None;
    s
}

pub fn run_experiment2(scenario: &Scenario, audit: bool) -> Result<Exp2Result> {
    let p_values = match &scenario.sweep {
        Some(sw) => sw.p_values.clone(),
        None => vec![scenario.model.p()],
    };
    let mut rows = Vec::new();
    let mut timing = Vec::new();
    let mut runs = Vec::new();
    for p in p_values {
        let point = sweep_point(scenario, p);
        point.validate()?;
        let batch = par_reps(point.repetitions, |rep| {
            let inst = point.instantiate(point.rep_seed(rep))?;
            run_exp2_instance(&inst, audit)
        })?;
        let reps = batch.len();
        let ex_checks: Vec<f64> = batch.iter().map(|r| r.exhaustive.theory_checks as f64).collect();
        let smt_checks: Vec<f64> = batch.iter().map(|r| r.smt.theory_checks as f64).collect();
        let ex_t: Vec<f64> = batch.iter().map(|r| r.exhaustive.wall_time).collect();
        let smt_t: Vec<f64> = batch.iter().map(|r| r.smt.wall_time).collect();
        rows.push(Exp2Row {
            schema_version: SCHEMA_VERSION,
            p,
            k: point.k,
            reps,
            mean_checks_exhaustive: mean_sd(&ex_checks).0,
            mean_checks_smt: mean_sd(&smt_checks).0,
            max_checks_exhaustive: batch.iter().map(|r| r.exhaustive.theory_checks).max().unwrap_or(0),
            max_checks_smt: batch.iter().map(|r| r.smt.theory_checks).max().unwrap_or(0),
            smt_not_more_checks: batch
                .iter()
                .filter(|r| r.smt.theory_checks <= r.exhaustive.theory_checks)
                .count(),
            found_rate_exhaustive: batch.iter().filter(|r| r.exhaustive.found).count() as f64 / reps as f64,
            found_rate_smt: batch.iter().filter(|r| r.smt.found).count() as f64 / reps as f64,
        });
        let (me, se) = mean_sd(&ex_t);
        let (ms, ss) = mean_sd(&smt_t);
        timing.push(Exp2TimingRow {
            schema_version: SCHEMA_VERSION,
            p,
            k: point.k,
            reps,
            mean_time_exhaustive: me,
            sd_time_exhaustive: se,
            mean_time_smt: ms,
            sd_time_smt: ss,
        });
        runs.extend(batch);
    }
    Ok(Exp2Result {
        schema_version: SCHEMA_VERSION,
        rows,
        timing,
        runs,
    })
}

// ---------------------------------------------------------------------------
// One-shot pipeline

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub schema_version: u32,
    pub seed: u64,
    pub attacked: Vec<usize>,
    pub outcomes: Vec<SearchOutcome>,
    /// Residue report of each method's returned subset.
    pub reports: Vec<Option<ResidueReport>>,
}

/// Simulate, run every configured search and collect the reports.
pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioResult> {
    let inst = scenario.instantiate(scenario.seed)?;
    let det = inst.detector()?;
    let mut engine = Engine::new(&det);
    let mut outcomes = Vec::new();
    let mut reports = Vec::new();
    for &m in scenario.search.methods() {
        let o = match m {
            Method::Exhaustive => exhaustive_search_with(&mut engine, inst.k)?,
            Method::Smt => smt_search_with(&mut engine, inst.k)?,
        };
        let report = match &o.subset {
            Some(s) => {
                let prep = engine.prepare(s)?;
                Some(det.report(s, &prep.filter, &prep.run)?)
            }
            None => None,
        };
        outcomes.push(o);
        reports.push(report);
    }
    Ok(ScenarioResult {
        schema_version: SCHEMA_VERSION,
        seed: inst.seed,
        attacked: inst.attack.attacked.clone(),
        outcomes,
        reports,
    })
}

// ---------------------------------------------------------------------------
// Noiseless decoding and observability summaries

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiselessReport {
    pub schema_version: u32,
    pub seed: u64,
    pub theta: i64,
    pub min_distance: usize,
    pub k: usize,
    pub x0: Vec<f64>,
    pub corrupted: Vec<usize>,
    pub detected: bool,
    pub decoded: DecodeResult,
    pub state_error: f64,
}

pub fn run_noiseless(scenario: &Scenario) -> Result<NoiselessReport> {
    let model = scenario.model.build(scenario.seed)?;
    let (n, p) = (model.n(), model.p());
    let settings = scenario.noiseless.clone().unwrap_or_default();
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    rng.set_stream(3);
    let x0 = match settings.x0 {
        Some(x) if x.len() == n => DVector::from_vec(x),
        Some(x) => return Err(Error::Config(format!("x0 has length {}, expected {n}", x.len()))),
        None => DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0)),
    };
    let mut corrupted = match settings.corrupted {
        Some(c) => c,
        None => sample(&mut rng, p, scenario.k.min(p)).into_iter().map(|i| i + 1).collect(),
    };
    corrupted.sort_unstable();
    let mut obs = encode(&model, &x0)?;
    let other = match settings.other {
        Some(x) if x.len() == n => DVector::from_vec(x),
        Some(x) => return Err(Error::Config(format!("other state has length {}, expected {n}", x.len()))),
        None => DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0)),
    };
    let other = encode(&model, &other)?;
    for &d in &corrupted {
        if d == 0 || d > p {
            return Err(Error::Config(format!("corrupted sensor {d} outside 1..={p}")));
        }
        obs.replace(d, other.symbols[d - 1].clone())?;
    }
    let theta = sparse_observability_index(&model)?;
    let min_distance = min_symbol_distance(&model)?;
    let detected = detect_corruption(&model, &obs)?;
    let decoded = decode(&model, &obs, scenario.k)?;
    let state_error = (DVector::from_column_slice(&decoded.state) - &x0).norm();
    Ok(NoiselessReport {
        schema_version: SCHEMA_VERSION,
        seed: scenario.seed,
        theta,
        min_distance,
        k: scenario.k,
        x0: x0.iter().copied().collect(),
        corrupted,
        detected,
        decoded,
        state_error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObsvRow {
    pub schema_version: u32,
    pub removed: usize,
    pub subsets: usize,
    pub observable: usize,
    /// Smallest Gramian eigenvalue over the subsets of this size.
    pub min_gram_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObsvReport {
    pub schema_version: u32,
    pub n: usize,
    pub p: usize,
    pub spectral_radius: f64,
    pub theta: i64,
    pub rows: Vec<ObsvRow>,
}

/// Observability of every subset after removing `0..=θ+1` sensors.
pub fn run_obsv(scenario: &Scenario) -> Result<ObsvReport> {
    let model = scenario.model.build(scenario.seed)?;
    let theta = sparse_observability_index(&model)?;
    let blocks = SensorBlocks::new(&model);
    let p = model.p();
    let full = SensorSubset::full(p);
    let last = ((theta + 1).max(0) as usize).min(p - 1);
    let rows = (0..=last)
        .map(|removed| {
            let (mut subsets, mut observable, mut lam) = (0, 0, f64::INFINITY);
            for s in subsets_of(&full, p - removed) {
                subsets += 1;
                if blocks.is_observable(&s) {
                    observable += 1;
                }
                lam = lam.min(crate::obsv::min_eigenvalue(&blocks.subset_gram(&s)).max(0.0));
            }
            ObsvRow {
                schema_version: SCHEMA_VERSION,
                removed,
                subsets,
                observable,
                min_gram_eigenvalue: lam,
            }
        })
        .collect();
    Ok(ObsvReport {
        schema_version: SCHEMA_VERSION,
        n: model.n(),
        p,
        spectral_radius: model.spectral_radius(),
        theta,
        rows,
    })
}

// ---------------------------------------------------------------------------
// Command line

#[derive(Debug, Parser)]
#[command(name = "secest", version, about = "Secure state estimation under sparse sensor attacks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the attacked plant and dump states, outputs and attack signals.
    Simulate(CommonArgs),
    /// Residue test on one subset (scenario `subset`, default: all sensors).
    Detect(CommonArgs),
    /// Search for an attack-free subset with the configured method(s).
    Search(CommonArgs),
    /// Residue test on every (p−k)-subset over seeded repetitions.
    Exp1(CommonArgs),
    /// Exhaustive vs certificate-guided search across a sensor-count sweep.
    Exp2(CommonArgs),
    /// Encode, corrupt and decode a noiseless observation.
    DecodeNoiseless(CommonArgs),
    /// Sparse observability summary of the model.
    Obsv(CommonArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Scenario JSON; each subcommand has a built-in default.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Existing directory for artifacts; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub reps: Option<usize>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Detect(_) => "detect",
            Command::Search(_) => "search",
            Command::Exp1(_) => "exp1",
            Command::Exp2(_) => "exp2",
            Command::DecodeNoiseless(_) => "decode-noiseless",
            Command::Obsv(_) => "obsv",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Simulate(a)
            | Command::Detect(a)
            | Command::Search(a)
            | Command::Exp1(a)
            | Command::Exp2(a)
            | Command::DecodeNoiseless(a)
            | Command::Obsv(a) => a,
        }
    }

    fn default_scenario(&self) -> Scenario {
        match self {
            Command::Exp1(_) => Scenario::experiment1(),
            Command::Exp2(_) => Scenario::experiment2(),
            Command::DecodeNoiseless(_) => Scenario {
                model: ModelSource::Random {
                    n: 3,
                    p: 6,
                    spectral_radius: 0.9,
                    seed: None,
                    sigma_w2: 0.0,
                    sigma_v2: 0.0,
                },
                k: 2,
                ..Scenario::demo()
            },
            _ => Scenario::demo(),
        }
    }
}

/// A rendered artifact: file stem plus contents.
pub struct Artifact {
    pub stem: String,
    pub body: String,
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Parse(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Parse(e.to_string()))?;
    }
    csv_finish(w)
}

fn csv_finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

fn render(format: Format, json: impl FnOnce() -> Result<String>, csv: impl FnOnce() -> Result<String>) -> Result<String> {
    match format {
        Format::Json => json(),
        Format::Csv => csv(),
    }
}

fn simulate_artifact(inst: &Instance, format: Format) -> Result<String> {
    #[derive(Serialize)]
    struct Dump<'a> {
        schema_version: u32,
        seed: u64,
        n: usize,
        p: usize,
        horizon: usize,
        attacked: &'a [usize],
        /// Row `t` holds time `t`.
        states: Vec<Vec<f64>>,
        outputs: Vec<Vec<f64>>,
        attack: Vec<Vec<f64>>,
    }
    let t = &inst.traj;
    let cols = |m: &DMatrix<f64>| matrix_rows::to_rows(&m.transpose());
    render(
        format,
        || {
            to_json(&Dump {
                schema_version: SCHEMA_VERSION,
                seed: inst.seed,
                n: t.n(),
                p: t.p(),
                horizon: t.horizon(),
                attacked: &inst.attack.attacked,
                states: cols(&t.states),
                outputs: cols(&t.outputs),
                attack: cols(&t.attack),
            })
        },
        || {
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut header = vec!["schema_version".to_string(), "t".to_string()];
            header.extend((1..=t.n()).map(|i| format!("x{i}")));
            header.extend((1..=t.p()).map(|i| format!("y{i}")));
            header.extend((1..=t.p()).map(|i| format!("a{i}")));
            w.write_record(&header).map_err(csv_err)?;
            for k in 0..t.horizon() {
                let mut rec = vec![SCHEMA_VERSION.to_string(), k.to_string()];
                rec.extend(t.states.column(k).iter().map(f64::to_string));
                rec.extend(t.outputs.column(k).iter().map(f64::to_string));
                rec.extend(t.attack.column(k).iter().map(f64::to_string));
                w.write_record(&rec).map_err(csv_err)?;
            }
            csv_finish(w)
        },
    )
}

fn detect_artifact(scenario: &Scenario, format: Format) -> Result<String> {
    let inst = scenario.instantiate(scenario.seed)?;
    let p = inst.model.p();
    let s = match &scenario.subset {
        Some(v) => SensorSubset::new(v.clone(), p)?,
        None => SensorSubset::full(p),
    };
    let det = inst.detector()?;
    let filter = det.filter(&s)?;
    let run = det.estimates(&filter)?;
    let report = det.report(&s, &filter, &run)?;
    render(
        format,
        || to_json(&report),
        || {
            #[derive(Serialize)]
            struct Row {
                schema_version: u32,
                subset: String,
                mode: Mode,
                window: usize,
                eta: f64,
                max_deviation: f64,
                passed: bool,
                per_sensor_mu: String,
            }
            to_csv(&[Row {
                schema_version: SCHEMA_VERSION,
                subset: subset_label(&report.subset),
                mode: report.mode,
                window: report.window,
                eta: report.eta,
                max_deviation: report.max_deviation,
                passed: report.passed,
                per_sensor_mu: report
                    .per_sensor_mu
                    .iter()
                    .map(f64::to_string)
                    .collect::<Vec<_>>()
                    .join(" "),
            }])
        },
    )
}

#[derive(Serialize)]
struct TimingRow {
    schema_version: u32,
    method: Method,
    wall_time: f64,
}

fn search_artifacts(scenario: &Scenario, format: Format) -> Result<(String, String)> {
    let result = run_scenario(scenario)?;
    let timing: Vec<TimingRow> = result
        .outcomes
        .iter()
        .map(|o| TimingRow {
            schema_version: SCHEMA_VERSION,
            method: o.method,
            wall_time: o.wall_time,
        })
        .collect();
    let main = render(
        format,
        || {
            let mut v = serde_json::to_value(&result).map_err(|e| Error::Parse(e.to_string()))?;
            if let Some(outs) = v.get_mut("outcomes").and_then(|o| o.as_array_mut()) {
                for o in outs {
                    if let Some(o) = o.as_object_mut() {
                        o.remove("wall_time");
                    }
                }
            }
            to_json(&v)
        },
        || {
            #[derive(Serialize)]
            struct Row {
                schema_version: u32,
                seed: u64,
                method: Method,
                k: usize,
                found: bool,
                subset: String,
                theory_checks: usize,
                certificates: usize,
                max_deviation: Option<f64>,
            }
            let rows: Vec<Row> = result
                .outcomes
                .iter()
                .zip(&result.reports)
                .map(|(o, r)| Row {
                    schema_version: SCHEMA_VERSION,
                    seed: result.seed,
                    method: o.method,
                    k: o.k,
                    found: o.found,
                    subset: o.subset.as_ref().map(subset_label).unwrap_or_default(),
                    theory_checks: o.theory_checks,
                    certificates: o.certificates.len(),
                    max_deviation: r.as_ref().map(|r| r.max_deviation),
                })
                .collect();
            to_csv(&rows)
        },
    )?;
    let timing = render(format, || to_json(&timing), || to_csv(&timing))?;
    Ok((main, timing))
}

fn exp2_artifacts(scenario: &Scenario, format: Format) -> Result<(String, String)> {
    let r = run_experiment2(scenario, false)?;
    let main = render(format, || to_json(&r), || to_csv(&r.rows))?;
    let timing = render(format, || to_json(&r.timing), || to_csv(&r.timing))?;
    Ok((main, timing))
}

fn noiseless_artifact(scenario: &Scenario, format: Format) -> Result<String> {
    let r = run_noiseless(scenario)?;
    render(
        format,
        || to_json(&r),
        || {
            #[derive(Serialize)]
            struct Row {
                schema_version: u32,
                seed: u64,
                theta: i64,
                min_distance: usize,
                k: usize,
                corrupted: String,
                detected: bool,
                decoded_corrupted: String,
                unique: bool,
                explanations: usize,
                state_error: f64,
            }
            to_csv(&[Row {
                schema_version: SCHEMA_VERSION,
                seed: r.seed,
                theta: r.theta,
                min_distance: r.min_distance,
                k: r.k,
                corrupted: list_label(&r.corrupted),
                detected: r.detected,
                decoded_corrupted: list_label(&r.decoded.corrupted),
                unique: r.decoded.unique,
                explanations: r.decoded.explanations.len(),
                state_error: r.state_error,
            }])
        },
    )
}

/// Resolves the scenario for `cmd`, applying command-line overrides.
pub fn resolve_scenario(cmd: &Command) -> Result<Scenario> {
    let args = cmd.args();
    let mut scenario = match &args.scenario {
        Some(path) => Scenario::load(path)?,
        None => cmd.default_scenario(),
    };
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    if let Some(reps) = args.reps {
        scenario.repetitions = reps;
    }
    if let Some(fmt) = args.format {
        scenario.outputs.format = Some(fmt);
    }
    if let Some(out) = &args.out {
        scenario.outputs.dir = Some(out.clone());
    }
    scenario.validate()?;
    Ok(scenario)
}

/// Produces the main artifact and, for timed commands, a timing artifact.
pub fn execute(cmd: &Command, scenario: &Scenario) -> Result<Vec<Artifact>> {
    let format = scenario.outputs.format.unwrap_or_default();
    let name = cmd.name().replace('-', "_");
    let main = |body| Artifact { stem: name.clone(), body };
    let timed = |(body, timing): (String, String)| {
        vec![
            Artifact { stem: name.clone(), body },
            Artifact {
                stem: format!("{name}_timing"),
                body: timing,
            },
        ]
    };
    Ok(match cmd {
        Command::Simulate(_) => vec![main(simulate_artifact(&scenario.instantiate(scenario.seed)?, format)?)],
        Command::Detect(_) => vec![main(detect_artifact(scenario, format)?)],
        Command::Search(_) => timed(search_artifacts(scenario, format)?),
        Command::Exp1(_) => {
            let r = run_experiment1(scenario)?;
            vec![main(render(format, || to_json(&r), || to_csv(&r.rows))?)]
        }
        Command::Exp2(_) => timed(exp2_artifacts(scenario, format)?),
        Command::DecodeNoiseless(_) => vec![main(noiseless_artifact(scenario, format)?)],
        Command::Obsv(_) => {
            let r = run_obsv(scenario)?;
            vec![main(render(format, || to_json(&r), || to_csv(&r.rows))?)]
        }
    })
}

/// Writes artifacts into `dir` (which must exist) or, without a directory,
/// the main artifact to stdout and any timing artifact to stderr.
pub fn emit(artifacts: &[Artifact], scenario: &Scenario) -> Result<()> {
    let format = scenario.outputs.format.unwrap_or_default();
    match &scenario.outputs.dir {
        Some(dir) => {
            if !dir.is_dir() {
                return Err(Error::Io(std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!("output directory {} does not exist", dir.display()),
                )));
            }
            for a in artifacts {
                fs::write(dir.join(format!("{}.{}", a.stem, format.ext())), &a.body)?;
            }
        }
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            let mut err = std::io::stderr().lock();
            for (i, a) in artifacts.iter().enumerate() {
                if i == 0 {
                    out.write_all(a.body.as_bytes())?;
                } else {
                    err.write_all(a.body.as_bytes())?;
                }
            }
        }
    }
    Ok(())
}

/// Entry point for the binary; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = resolve_scenario(&cli.command).and_then(|scenario| {
        let artifacts = execute(&cli.command, &scenario)?;
        emit(&artifacts, &scenario)
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("secest {}: {e}", cli.command.name());
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_defaults_and_overrides() {
        let s = Scenario::from_json(r#"{"model": {"random": {"n": 2, "p": 3, "spectral_radius": 0.5}}, "k": 1}"#).unwrap();
        assert_eq!(s.repetitions, 1);
        assert_eq!(s.detector.eta, EtaSetting::Keyword(EtaKeyword::Auto));
        assert_eq!(s.search, SearchChoice::Both);
        let cfg = s.detector.config(2, 1);
        assert_eq!(cfg.t1, 20);
        assert_eq!(cfg.threshold, Threshold::Auto { k: 1 });
        let s = Scenario::from_json(
            r#"{"model": {"explicit": {"a": [[1.0]], "c": [[1.0],[1.0],[1.0]], "sigma_w2": 1, "sigma_v2": 1}},
                "k": 1, "detector": {"eta": 0.5, "window": 100, "mode": "filtering"}}"#,
        )
        .unwrap();
        assert_eq!(s.detector.config(1, 1).threshold, Threshold::Fixed(0.5));
        assert_eq!(s.detector.mode, Mode::Filtering);
    }

    #[test]
    fn scenario_invariants() {
        let bad_k = r#"{"model": {"random": {"n": 2, "p": 3, "spectral_radius": 0.5}}, "k": 3}"#;
        assert!(matches!(Scenario::from_json(bad_k), Err(Error::Config(_))));
        let short = r#"{"model": {"random": {"n": 4, "p": 3, "spectral_radius": 0.5}}, "k": 1, "detector": {"window": 2}}"#;
        assert!(matches!(Scenario::from_json(short), Err(Error::Config(_))));
        let unknown = "{\"model\": {\"random\": {\"n\": 2, \"p\": 3, \"spectral_radius\": 0.5}},\n \"k\": 1, \"kk\": 2}";
        match Scenario::from_json(unknown) {
            Err(Error::Parse(m)) => assert!(m.contains("kk") && m.contains("line 2"), "{m}"),
            other => panic!("{other:?}"),
        }
        match Scenario::from_json("{\"k\": 1}") {
            Err(Error::Parse(m)) => assert!(m.contains("model"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn exit_codes_are_distinct() {
        let codes = [
            exit_code(&Error::Parse("x".into())),
            exit_code(&Error::Analysis("x".into())),
            exit_code(&Error::Io(std::io::Error::other("x"))),
        ];
        assert!(codes.iter().all(|&c| c != 0));
        assert!(codes[0] != codes[1] && codes[1] != codes[2] && codes[0] != codes[2]);
    }

    #[test]
    fn random_placement_is_seeded() {
        let plan = AttackPlan {
            strategy: AttackStrategy::ZeroOutput,
            ..AttackPlan::default()
        };
        let a = plan.realize(10, 3, 7);
        assert_eq!(a.attacked.len(), 3);
        assert_eq!(a, plan.realize(10, 3, 7));
        assert!(a.attacked.iter().all(|&i| (1..=10).contains(&i)));
        assert!(AttackPlan::default().realize(10, 3, 7).is_attack_free());
    }

    #[test]
    fn experiment1_on_demo_plant() {
        let mut s = Scenario::demo();
        s.repetitions = 2;
        let r = run_experiment1(&s).unwrap();
        assert_eq!(r.rows.len(), 2 * 5);
        assert!(r.rows.iter().all(|x| x.schema_version == SCHEMA_VERSION));
        let mut zero = s.clone();
        zero.detector.eta = EtaSetting::Value(0.0);
        let r0 = run_experiment1(&zero).unwrap();
        assert!(r0.rows.iter().all(|x| !x.passed));
    }

    #[test]
    fn scalar_example_scenario_finds_two_sensors() {
        let s = Scenario::from_json(
            r#"{"model": {"explicit": {"a": [[1.0]], "c": [[1.0],[1.0],[1.0]], "sigma_w2": 1, "sigma_v2": 1}},
                "k": 1, "attack": {"sensors": [3], "strategy": {"kind": "constant", "bias": [5.0]}},
                "detector": {"window": 20000}}"#,
        )
        .unwrap();
        let r = run_scenario(&s).unwrap();
        for o in &r.outcomes {
            assert!(o.found);
            assert_eq!(o.subset.as_ref().unwrap().indices(), &[1, 2]);
        }
    }

    #[test]
    fn noiseless_and_obsv_reports() {
        let cmd = Command::DecodeNoiseless(CommonArgs::default());
        let s = resolve_scenario(&cmd).unwrap();
        let r = run_noiseless(&s).unwrap();
        assert!(r.detected);
        assert!(r.decoded.unique);
        assert!(r.state_error < 1e-9);
        let o = run_obsv(&Scenario::demo()).unwrap();
        assert_eq!(o.rows[0].removed, 0);
        assert_eq!(o.rows[0].observable, 1);
    }
}
