//! Block-residue detector for effective sensor attacks.
//!
//! For a subset `s` the detector runs the steady-state filter, forms block
//! residues `r_s(t) = ȳ_s(t) − O_s x̂_s(t)` over the window
//! `G = {t1, …, t1+N−1}`, and compares their sample second moment against the
//! attack-free expectation with a one-sided elementwise threshold `η`.
//!
//! The sample matrix is never accumulated from outer products. Writing `X` for
//! the estimates on `G` and `H_i` for the Hankel matrix `H_i[t, j] = y_i(t1+t+j)`,
//! each `n × n` block `(i, k)` of the sample matrix is
//!
//! ```text
//! Syy_ik − O_i (X H_k / N) − (X H_i / N)ᵀ O_kᵀ + O_i (X Xᵀ / N) O_kᵀ
//! ```
//!
//! where `Syy` (shared by every subset of one trajectory) is built from lagged
//! sliding sums of sensor products.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kalman::{run_filter, solve_default, FilterRun, Mode, SteadyStateFilter};
use crate::model::{matrix_rows, SystemModel, Trajectory};
use crate::obsv::{SensorBlocks, SensorSubset};

pub const DEFAULT_WINDOW: usize = 20_000;

/// How the elementwise threshold is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Threshold {
    Fixed(f64),
    /// Largest admissible value `λ_min,s\k · ε / (3 n (|s| − k))` for each subset.
    Auto { k: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub epsilon: f64,
    pub threshold: Threshold,
    /// Requested window length; rounded up to a multiple of `n`.
    pub window: usize,
    pub t1: usize,
    #[serde(default)]
    pub mode: Mode,
}

impl DetectorConfig {
    pub fn new(epsilon: f64, threshold: Threshold, window: usize, t1: usize, mode: Mode) -> Self {
        Self {
            epsilon,
            threshold,
            window,
            t1,
            mode,
        }
    }

    /// Window length actually used: the next multiple of `n`.
    pub fn effective_window(&self, n: usize) -> usize {
        self.window.max(1).div_ceil(n) * n
    }

    /// Horizon needed so every window of length `n` starting in `G` is observed.
    pub fn required_horizon(&self, n: usize) -> usize {
        self.t1 + self.effective_window(n) + n - 1
    }

    pub fn eta_for(&self, blocks: &SensorBlocks, s: &SensorSubset) -> Result<f64> {
        match self.threshold {
            Threshold::Fixed(eta) => Ok(eta),
            Threshold::Auto { k } => eta_from_blocks(blocks, s, k, self.epsilon),
        }
    }
}

/// `η = λ_min,s\k · ε / (3 n (|s| − k))`.
pub fn eta_auto(model: &SystemModel, s: &SensorSubset, k: usize, epsilon: f64) -> Result<f64> {
    eta_from_blocks(&SensorBlocks::new(model), s, k, epsilon)
}

fn eta_from_blocks(blocks: &SensorBlocks, s: &SensorSubset, k: usize, epsilon: f64) -> Result<f64> {
    let lam = blocks.lambda_min_s_minus_k(s, k)?;
    if lam <= 0.0 {
        return Err(Error::Analysis(format!(
            "λ_min over ({})-subsets of {s} is zero; the system is not sparse observable enough for k = {k}",
            s.len() - k
        )));
    }
    Ok(lam * epsilon / (3.0 * blocks.n() as f64 * (s.len() - k) as f64))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidueReport {
    pub schema_version: u32,
    pub subset: SensorSubset,
    pub mode: Mode,
    pub t1: usize,
    pub window: usize,
    pub eta: f64,
    #[serde(with = "matrix_rows")]
    pub sample_matrix: DMatrix<f64>,
    #[serde(with = "matrix_rows")]
    pub expected_matrix: DMatrix<f64>,
    pub max_deviation: f64,
    pub passed: bool,
    /// Normalized per-sensor statistics used to order certificate search.
    pub per_sensor_mu: Vec<f64>,
}

impl ResidueReport {
    /// Detector output: `true` means an attack was flagged.
    pub fn flag(&self) -> bool {
        !self.passed
    }
}

/// One-sided elementwise test `sample − expected ⪯ η 1 1ᵀ`. Returns the verdict
/// and the largest entry of `sample − expected`.
pub fn residue_test(sample: &DMatrix<f64>, expected: &DMatrix<f64>, eta: f64) -> (bool, f64) {
    let max_dev = sample
        .iter()
        .zip(expected.iter())
        .map(|(a, b)| a - b)
        .fold(f64::NEG_INFINITY, f64::max);
    (max_dev <= eta, max_dev)
}

/// Full result of one detector call.
#[derive(Debug, Clone)]
pub struct Detection {
    pub flag: bool,
    pub estimates: FilterRun,
    pub report: ResidueReport,
}

/// Lightweight result: the same flag, without the full matrices.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub flag: bool,
    pub eta: f64,
}

/// Sample moments of the output windows over `G`, shared by all subsets.
#[derive(Debug)]
pub struct OutputMoments {
    n: usize,
    window: usize,
    syy: DMatrix<f64>,
    hankel: Vec<DMatrix<f64>>,
    /// `H_i O_i`: row `t` is `O_iᵀ ȳ_i(t1 + t)`.
    projected: Vec<DMatrix<f64>>,
}

impl OutputMoments {
    pub fn new(traj: &Trajectory, blocks: &SensorBlocks, t1: usize, window: usize) -> Self {
        let (n, p) = (traj.n(), traj.p());
        let big_n = window as f64;
        let y = &traj.outputs;
        let mut syy = DMatrix::zeros(n * p, n * p);
        for i in 0..p {
            for k in i..p {
                for d in -(n as isize - 1)..=(n as isize - 1) {
                    let j_lo = (-d).max(0) as usize;
                    let j_hi = (n as isize - 1 - d).min(n as isize - 1) as usize;
                    let q = |tau: usize| y[(i, tau)] * y[(k, (tau as isize + d) as usize)];
                    let mut sum: f64 = (t1 + j_lo..t1 + j_lo + window).map(q).sum();
                    for j in j_lo..=j_hi {
                        if j > j_lo {
                            sum += q(t1 + j + window - 1) - q(t1 + j - 1);
                        }
                        let l = (j as isize + d) as usize;
                        let v = sum / big_n;
                        syy[(i * n + j, k * n + l)] = v;
                        syy[(k * n + l, i * n + j)] = v;
                    }
                }
            }
        }
        let hankel: Vec<DMatrix<f64>> = (0..p)
            .map(|i| DMatrix::from_fn(window, n, |t, j| y[(i, t1 + t + j)]))
            .collect();
        let projected = hankel.iter().enumerate().map(|(i, h)| h * blocks.obs(i + 1)).collect();
        Self {
            n,
            window,
            syy,
            hankel,
            projected,
        }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    fn syy_block(&self, i: usize, k: usize) -> DMatrix<f64> {
        let n = self.n;
        self.syy.view(((i - 1) * n, (k - 1) * n), (n, n)).into_owned()
    }
}

/// Per-subset quantities reused across the blocks of one residue matrix.
struct SubsetTerms<'a> {
    s: &'a SensorSubset,
    filter: &'a SteadyStateFilter,
    sxx: DMatrix<f64>,
    sxy: Vec<OnceLock<DMatrix<f64>>>,
    o_sxx: Vec<OnceLock<DMatrix<f64>>>,
    o_p: Vec<OnceLock<DMatrix<f64>>>,
    estimates_t: &'a DMatrix<f64>,
}

/// Detector bound to one model, trajectory and configuration.
#[derive(Debug)]
pub struct Detector<'a> {
    model: &'a SystemModel,
    traj: &'a Trajectory,
    cfg: DetectorConfig,
    window: usize,
    blocks: SensorBlocks,
    moments: OutputMoments,
    noise_cross: Vec<OnceLock<DMatrix<f64>>>,
    stable: bool,
}

impl<'a> Detector<'a> {
    pub fn new(model: &'a SystemModel, traj: &'a Trajectory, cfg: DetectorConfig) -> Result<Self> {
        model.validate()?;
        let n = model.n();
        if traj.n() != n || traj.p() != model.p() {
            return Err(Error::Dimension("trajectory does not match model".into()));
        }
        if !(cfg.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        let window = cfg.effective_window(n);
        let need = cfg.required_horizon(n);
        if traj.horizon() < need {
            return Err(Error::Range(format!(
                "horizon {} too short: window needs {need} samples (t1 = {}, N = {window}, n = {n})",
                traj.horizon(),
                cfg.t1
            )));
        }
        let blocks = SensorBlocks::new(model);
        let moments = OutputMoments::new(traj, &blocks, cfg.t1, window);
        let p = model.p();
        Ok(Self {
            model,
            traj,
            window,
            blocks,
            moments,
            noise_cross: (0..p * p).map(|_| OnceLock::new()).collect(),
            stable: model.spectral_radius() < 1.0,
            cfg,
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.cfg
    }

    pub fn model(&self) -> &SystemModel {
        self.model
    }

    pub fn trajectory(&self) -> &Trajectory {
        self.traj
    }

    pub fn blocks(&self) -> &SensorBlocks {
        &self.blocks
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn eta(&self, s: &SensorSubset) -> Result<f64> {
        self.cfg.eta_for(&self.blocks, s)
    }

    /// Steady-state filter for `s` in the configured mode.
    /// Steady-state filter for `s` in the configured mode. An unobservable
    /// subset is rejected only when `A` is not Schur stable; otherwise the pair
    /// is detectable and the filter is well defined.
    pub fn filter(&self, s: &SensorSubset) -> Result<SteadyStateFilter> {
        self.check_subset(s)?;
        if !self.stable && !self.blocks.is_observable(s) {
            return Err(Error::Analysis(format!("subset {s} is not observable")));
        }
        solve_default(self.model, s, self.cfg.mode)
    }

    /// Estimates on `G`.
    pub fn estimates(&self, filter: &SteadyStateFilter) -> Result<FilterRun> {
        run_filter(filter, self.traj, self.cfg.t1, self.cfg.t1 + self.window - 1)
    }

    fn check_subset(&self, s: &SensorSubset) -> Result<()> {
        if s.max_index() > self.model.p() {
            return Err(Error::IndexOutOfRange {
                index: s.max_index(),
                p: self.model.p(),
            });
        }
        Ok(())
    }

    /// `σ_w² J_i J_kᵀ + δ_ik σ_v² I`, via the diagonal recursion over `O_i O_kᵀ`.
    pub fn noise_block(&self, i: usize, k: usize) -> &DMatrix<f64> {
        let p = self.model.p();
        self.noise_cross[(i - 1) * p + (k - 1)].get_or_init(|| {
            let n = self.blocks.n();
            let g = self.blocks.obs(i) * self.blocks.obs(k).transpose();
            let mut w = DMatrix::zeros(n, n);
            for r in 1..n {
                for c in 1..n {
                    w[(r, c)] = w[(r - 1, c - 1)] + g[(r - 1, c - 1)];
                }
            }
            w *= self.model.sigma_w2;
            if i == k {
                for d in 0..n {
                    w[(d, d)] += self.model.sigma_v2;
                }
            }
            w
        })
    }

    fn terms<'b>(&self, s: &'b SensorSubset, filter: &'b SteadyStateFilter, run: &'b FilterRun) -> SubsetTerms<'b> {
        let inv_n = 1.0 / self.window as f64;
        let sxx = &run.estimates * run.estimates.transpose() * inv_n;
        let cells = || (0..s.len()).map(|_| OnceLock::new()).collect::<Vec<_>>();
        SubsetTerms {
            s,
            filter,
            sxx,
            sxy: cells(),
            o_sxx: cells(),
            o_p: cells(),
            estimates_t: &run.estimates,
        }
    }

    /// Sample and expected `n × n` block for positions `(b1, b2)` of `s`.
    fn block_pair(&self, t: &SubsetTerms<'_>, b1: usize, b2: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let (i, k) = (t.s.indices()[b1], t.s.indices()[b2]);
        let inv_n = 1.0 / self.window as f64;
        let sxy = |b: usize| {
            t.sxy[b].get_or_init(|| t.estimates_t * &self.moments.hankel[t.s.indices()[b] - 1] * inv_n)
        };
        let o1 = self.blocks.obs(i);
        let o2 = self.blocks.obs(k);
        let o1_sxx = t.o_sxx[b1].get_or_init(|| o1 * &t.sxx);
        let o1_p = t.o_p[b1].get_or_init(|| o1 * t.filter.reference_covariance());

        let mut sample = self.moments.syy_block(i, k);
        sample -= o1 * sxy(b2);
        sample -= sxy(b1).transpose() * o2.transpose();
        sample += o1_sxx * o2.transpose();

        let mut expected = o1_p * o2.transpose() + self.noise_block(i, k);
        if t.filter.mode == Mode::Filtering {
            // Δ block: row 0 is σ_v² L[:, b1]ᵀ O_kᵀ; Δᵀ block: column 0 is σ_v² O_i L[:, b2]
            let sv = self.model.sigma_v2;
            let row = t.filter.gain.column(b1).transpose() * o2.transpose() * sv;
            let col = o1 * t.filter.gain.column(b2) * sv;
            for c in 0..self.blocks.n() {
                expected[(0, c)] -= row[c];
            }
            for r in 0..self.blocks.n() {
                expected[(r, 0)] -= col[r];
            }
        }
        (sample, expected)
    }

    /// Trace of the deviation block `(b, b)`, without forming the block:
    /// every term reduces to an inner product with `O_iᵀ O_i` or with the
    /// precomputed `H_i O_i`.
    fn diag_trace(&self, t: &SubsetTerms<'_>, b: usize) -> f64 {
        let i = t.s.indices()[b];
        let g = self.blocks.gram(i);
        let z = &self.moments.projected[i - 1];
        let x = t.estimates_t;
        let mut cross = 0.0;
        for (col, xt) in x.column_iter().enumerate() {
            cross += xt.dot(&z.row(col).transpose());
        }
        cross /= self.window as f64;
        let n = self.blocks.n();
        let syy = (0..n).map(|d| self.moments.syy[((i - 1) * n + d, (i - 1) * n + d)]).sum::<f64>();
        let sample = syy - 2.0 * cross + t.sxx.dot(g);
        let mut expected = t.filter.reference_covariance().dot(g) + self.noise_block(i, i).trace();
        if t.filter.mode == Mode::Filtering {
            let first = self.blocks.obs(i).row(0) * t.filter.gain.column(b);
            expected -= 2.0 * self.model.sigma_v2 * first[0];
        }
        sample - expected
    }

    fn mu(&self, t: &SubsetTerms<'_>, b: usize, eta: f64) -> f64 {
        let n = self.blocks.n() as f64;
        let raw = (self.diag_trace(t, b) - eta * n).abs();
        raw / self.blocks.gram_lambda_max(t.s.indices()[b])
    }

    /// Full detector call with the complete residue report.
    pub fn attack_detect(&self, s: &SensorSubset) -> Result<Detection> {
        let filter = self.filter(s)?;
        let run = self.estimates(&filter)?;
        let report = self.report(s, &filter, &run)?;
        Ok(Detection {
            flag: report.flag(),
            estimates: run,
            report,
        })
    }

    /// Residue report for a given filter and its estimates on `G`.
    pub fn report(&self, s: &SensorSubset, filter: &SteadyStateFilter, run: &FilterRun) -> Result<ResidueReport> {
        let eta = self.eta(s)?;
        let n = self.blocks.n();
        let m = n * s.len();
        let t = self.terms(s, filter, run);
        let mut sample = DMatrix::zeros(m, m);
        let mut expected = DMatrix::zeros(m, m);
        let mut max_dev = f64::NEG_INFINITY;
        let mut mu = vec![0.0; s.len()];
        for b1 in 0..s.len() {
            for b2 in 0..s.len() {
                let (sb, eb) = self.block_pair(&t, b1, b2);
                let dev = &sb - &eb;
                max_dev = max_dev.max(dev.max());
                if b1 == b2 {
                    mu[b1] = self.mu(&t, b1, eta);
                }
                sample.view_mut((b1 * n, b2 * n), (n, n)).copy_from(&sb);
                expected.view_mut((b1 * n, b2 * n), (n, n)).copy_from(&eb);
            }
        }
        Ok(ResidueReport {
            schema_version: crate::SCHEMA_VERSION,
            subset: s.clone(),
            mode: filter.mode,
            t1: self.cfg.t1,
            window: self.window,
            eta,
            sample_matrix: sample,
            expected_matrix: expected,
            max_deviation: max_dev,
            passed: max_dev <= eta,
            per_sensor_mu: mu,
        })
    }

    /// Same verdict as [`Detector::report`], stopping at the first block that
    /// violates the threshold. Diagonal blocks are checked first.
    pub fn verdict(&self, s: &SensorSubset, filter: &SteadyStateFilter, run: &FilterRun) -> Result<Verdict> {
        Ok(self.screen(s, filter, run, &[], false)?.0)
    }

    /// Early-exit verdict with diagonal blocks visited in descending order of
    /// `priority` (indexed by sensor − 1; missing entries count as 0, ties by
    /// index). With `with_mu`, a flagged subset also gets its per-sensor
    /// statistics.
    pub fn screen(
        &self,
        s: &SensorSubset,
        filter: &SteadyStateFilter,
        run: &FilterRun,
        priority: &[f64],
        with_mu: bool,
    ) -> Result<(Verdict, Option<Vec<f64>>)> {
        let eta = self.eta(s)?;
        let t = self.terms(s, filter, run);
        let len = s.len();
        let score = |b: usize| priority.get(s.indices()[b] - 1).copied().unwrap_or(0.0);
        let mut diag: Vec<usize> = (0..len).collect();
        diag.sort_by(|&x, &y| score(y).total_cmp(&score(x)));

        let mut flag = false;
        for &b in &diag {
            let (sb, eb) = self.block_pair(&t, b, b);
            if (sb - eb).max() > eta {
                flag = true;
                break;
            }
        }
        if !flag {
            'off: for b1 in 0..len {
                for b2 in (0..len).filter(|&b2| b2 != b1) {
                    let (sb, eb) = self.block_pair(&t, b1, b2);
                    if (sb - eb).max() > eta {
                        flag = true;
                        break 'off;
                    }
                }
            }
        }
        let mu = (flag && with_mu).then(|| (0..len).map(|b| self.mu(&t, b, eta)).collect());
        Ok((Verdict { flag, eta }, mu))
    }

    /// Normalized per-sensor statistics `μ_i / λ_max(O_iᵀ O_i)` for `s`.
    pub fn per_sensor_mu(&self, s: &SensorSubset, filter: &SteadyStateFilter, run: &FilterRun) -> Result<Vec<f64>> {
        let eta = self.eta(s)?;
        let t = self.terms(s, filter, run);
        Ok((0..s.len()).map(|b| self.mu(&t, b, eta)).collect())
    }
}

/// One-shot detector call.
pub fn attack_detect(model: &SystemModel, traj: &Trajectory, s: &SensorSubset, cfg: &DetectorConfig) -> Result<Detection> {
    Detector::new(model, traj, cfg.clone())?.attack_detect(s)
}

/// Simulation-only check of whether the estimation error over `G` exceeds the
/// attack-free level: `tr(E_N(e eᵀ)) > tr(P_ref) + ε`.
pub fn effective_attack_oracle(
    traj: &Trajectory,
    estimates: &FilterRun,
    p_ref: &DMatrix<f64>,
    epsilon: f64,
    t1: usize,
    window: usize,
) -> Result<bool> {
    Ok(error_trace(traj, estimates, t1, window)? > p_ref.trace() + epsilon)
}

/// `tr(E_{N,t1}(e eᵀ))` with `e(t) = x(t) − x̂(t)`.
pub fn error_trace(traj: &Trajectory, estimates: &FilterRun, t1: usize, window: usize) -> Result<f64> {
    if window == 0 || t1 < estimates.t_start || t1 + window - 1 > estimates.t_end() {
        return Err(Error::Range(format!(
            "window [{t1}, {}] not covered by estimates [{}, {}]",
            t1 + window - 1,
            estimates.t_start,
            estimates.t_end()
        )));
    }
    let mut acc = 0.0;
    for t in t1..t1 + window {
        let e = traj.states.column(t) - estimates.estimates.column(t - estimates.t_start);
        acc += e.norm_squared();
    }
    Ok(acc / window as f64)
}
