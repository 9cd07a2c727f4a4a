//! Steady-state Kalman filters over sensor subsets.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{SystemModel, Trajectory};
use crate::obsv::{subsets_of, SensorBlocks, SensorSubset};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Estimate at `t` uses outputs up to `t − 1`.
    #[default]
    Prediction,
    /// Estimate at `t` uses outputs up to and including `t`.
    Filtering,
}

#[derive(Debug, Clone)]
pub struct SteadyStateFilter {
    pub subset: SensorSubset,
    pub mode: Mode,
    /// `K_s` in prediction mode, `L_s` in filtering mode.
    pub gain: DMatrix<f64>,
    pub p_star: DMatrix<f64>,
    pub f_star: Option<DMatrix<f64>>,
    pub iterations: usize,
    a: DMatrix<f64>,
    c_s: DMatrix<f64>,
    transition: DMatrix<f64>,
}

impl SteadyStateFilter {
    /// Error covariance the filter attains without attacks: `P*_s` or `F*_s`.
    pub fn reference_covariance(&self) -> &DMatrix<f64> {
        self.f_star.as_ref().unwrap_or(&self.p_star)
    }

    pub fn c_s(&self) -> &DMatrix<f64> {
        &self.c_s
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }
}

/// Rows of `C` selected by `s`.
pub fn select_rows(c: &DMatrix<f64>, s: &SensorSubset) -> DMatrix<f64> {
    DMatrix::from_fn(s.len(), c.ncols(), |r, col| c[(s.indices()[r] - 1, col)])
}

/// One step of the covariance recursion.
pub fn riccati_step(a: &DMatrix<f64>, c_s: &DMatrix<f64>, sigma_w2: f64, sigma_v2: f64, p: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let pct = p * c_s.transpose();
    let mut s = c_s * &pct;
    for d in 0..s.nrows() {
        s[(d, d)] += sigma_v2;
    }
    let apct = a * &pct;
    let chol = s.cholesky().expect("innovation covariance is positive definite");
    let correction = &apct * chol.solve(&apct.transpose());
    let mut next = a * p * a.transpose() - correction;
    for d in 0..n {
        next[(d, d)] += sigma_w2;
    }
    next
}

/// Frobenius norm of `DARE(P) − P`.
pub fn dare_residual(model: &SystemModel, s: &SensorSubset, p: &DMatrix<f64>) -> f64 {
    let c_s = select_rows(&model.c, s);
    (riccati_step(&model.a, &c_s, model.sigma_w2, model.sigma_v2, p) - p).norm()
}

/// Iterates the Riccati recursion from `σ_w² I` until the Frobenius change of
/// successive iterates is at most `tol · max(1, ‖P‖_F)`.
pub fn solve_steady_state(
    model: &SystemModel,
    s: &SensorSubset,
    mode: Mode,
    tol: f64,
    max_iter: usize,
) -> Result<SteadyStateFilter> {
    model.validate()?;
    if s.max_index() > model.p() {
        return Err(Error::IndexOutOfRange {
            index: s.max_index(),
            p: model.p(),
        });
    }
    if model.sigma_v2 <= 0.0 {
        return Err(Error::Config("steady-state filter needs sigma_v2 > 0".into()));
    }
    let n = model.n();
    let c_s = select_rows(&model.c, s);
    let mut p = DMatrix::identity(n, n) * model.sigma_w2;
    let mut change = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut next = riccati_step(&model.a, &c_s, model.sigma_w2, model.sigma_v2, &p);
        next = (&next + next.transpose()) * 0.5;
        change = (&next - &p).norm();
        let scale = next.norm().max(1.0);
        p = next;
        if !change.is_finite() || !scale.is_finite() {
            return Err(Error::Convergence {
                iterations,
                residual: change,
            });
        }
        if change <= tol * scale {
            break;
        }
    }
    if !(change <= tol * p.norm().max(1.0)) {
        return Err(Error::Convergence {
            iterations,
            residual: change,
        });
    }

    let mut innov = &c_s * &p * c_s.transpose();
    for d in 0..innov.nrows() {
        innov[(d, d)] += model.sigma_v2;
    }
    let inv = innov
        .cholesky()
        .ok_or_else(|| Error::Analysis("innovation covariance not positive definite".into()))?
        .inverse();
    let filtering_gain = &p * c_s.transpose() * &inv;
    let (gain, f_star, transition) = match mode {
        Mode::Prediction => {
            let k = &model.a * &filtering_gain;
            let phi = &model.a - &k * &c_s;
            (k, None, phi)
        }
        Mode::Filtering => {
            let f = &p - &filtering_gain * &c_s * &p;
            let f = (&f + f.transpose()) * 0.5;
            let psi = (DMatrix::identity(n, n) - &filtering_gain * &c_s) * &model.a;
            (filtering_gain, Some(f), psi)
        }
    };
    Ok(SteadyStateFilter {
        subset: s.clone(),
        mode,
        gain,
        p_star: p,
        f_star,
        iterations,
        a: model.a.clone(),
        c_s,
        transition,
    })
}

pub fn solve_default(model: &SystemModel, s: &SensorSubset, mode: Mode) -> Result<SteadyStateFilter> {
    solve_steady_state(model, s, mode, DEFAULT_TOL, DEFAULT_MAX_ITER)
}

/// Estimates over `[t_start, t_end]`; column `k` holds `x̂(t_start + k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterRun {
    pub subset: SensorSubset,
    pub mode: Mode,
    pub t_start: usize,
    pub estimates: DMatrix<f64>,
}

impl FilterRun {
    pub fn len(&self) -> usize {
        self.estimates.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.estimates.ncols() == 0
    }

    pub fn t_end(&self) -> usize {
        self.t_start + self.len() - 1
    }

    pub fn at(&self, t: usize) -> DVector<f64> {
        self.estimates.column(t - self.t_start).into_owned()
    }
}

/// Runs the steady-state recursion from `x̂(0) = 0`.
pub fn run_filter(filter: &SteadyStateFilter, traj: &Trajectory, t_start: usize, t_end: usize) -> Result<FilterRun> {
    let n = filter.n();
    if traj.n() != n {
        return Err(Error::Dimension(format!(
            "trajectory state dimension {} differs from filter {n}",
            traj.n()
        )));
    }
    if filter.subset.max_index() > traj.p() {
        return Err(Error::Dimension(format!(
            "filter uses sensor {} but trajectory has {}",
            filter.subset.max_index(),
            traj.p()
        )));
    }
    if t_start > t_end || t_end >= traj.horizon() {
        return Err(Error::Range(format!(
            "estimate range [{t_start}, {t_end}] invalid for horizon {}",
            traj.horizon()
        )));
    }
    let rows: Vec<usize> = filter.subset.iter().map(|i| i - 1).collect();
    let mut ys = DVector::zeros(rows.len());
    let gather = |t: usize, ys: &mut DVector<f64>| {
        for (k, &r) in rows.iter().enumerate() {
            ys[k] = traj.outputs[(r, t)];
        }
    };

    let mut est = DMatrix::zeros(n, t_end - t_start + 1);
    let mut x = DVector::zeros(n);
    let mut next = DVector::zeros(n);
    if filter.mode == Mode::Filtering {
        gather(0, &mut ys);
        x.gemv(1.0, &filter.gain, &ys, 0.0);
    }
    for t in 0..=t_end {
        if t >= t_start {
            est.set_column(t - t_start, &x);
        }
        if t == t_end {
            break;
        }
        // prediction feeds y(t), filtering feeds y(t+1)
        let feed = if filter.mode == Mode::Prediction { t } else { t + 1 };
        gather(feed, &mut ys);
        next.gemv(1.0, &filter.transition, &x, 0.0);
        next.gemv(1.0, &filter.gain, &ys, 1.0);
        std::mem::swap(&mut x, &mut next);
    }
    Ok(FilterRun {
        subset: filter.subset.clone(),
        mode: filter.mode,
        t_start,
        estimates: est,
    })
}

/// `Δ_s = σ_v² E₁ L_sᵀ O_sᵀ`: row 0 of block `b` is `σ_v² L[:, b]ᵀ O_sᵀ`.
pub fn delta_matrix(model: &SystemModel, s: &SensorSubset, filter: &SteadyStateFilter) -> Result<DMatrix<f64>> {
    if filter.mode != Mode::Filtering {
        return Err(Error::Mode("delta matrix needs a filtering-mode filter".into()));
    }
    let blocks = SensorBlocks::new(model);
    Ok(delta_from_blocks(&blocks, model.sigma_v2, s, filter))
}

pub(crate) fn delta_from_blocks(
    blocks: &SensorBlocks,
    sigma_v2: f64,
    s: &SensorSubset,
    filter: &SteadyStateFilter,
) -> DMatrix<f64> {
    let n = blocks.n();
    let o_s = blocks.stacked_obs(s);
    let lo = (&o_s * &filter.gain).transpose(); // |s| × n|s|, row b = L[:, b]ᵀ O_sᵀ
    let mut delta = DMatrix::zeros(n * s.len(), n * s.len());
    for b in 0..s.len() {
        delta.row_mut(b * n).copy_from(&(lo.row(b) * sigma_v2));
    }
    delta
}

/// The `(p − k)`-subset with the largest `tr(P*_s)`, first in lexicographic order on ties.
pub fn worst_subset(model: &SystemModel, k: usize) -> Result<(SensorSubset, f64)> {
    let p = model.p();
    if k >= p {
        return Err(Error::Argument(format!("k = {k} must be below p = {p}")));
    }
    let blocks = SensorBlocks::new(model);
    let full = SensorSubset::full(p);
    let mut best: Option<(SensorSubset, f64)> = None;
    for s in subsets_of(&full, p - k) {
        if !blocks.is_observable(&s) {
            return Err(Error::Analysis(format!("subset {s} is not observable")));
        }
        let tr = solve_default(model, &s, Mode::Prediction)?.p_star.trace();
        if best.as_ref().is_none_or(|(_, b)| tr > *b) {
            best = Some((s, tr));
        }
    }
    Ok(best.expect("at least one subset"))
}
