//! Observability and noise-structure matrices over sensor subsets.
//!
//! Every sensor uses an observation window of length `n`, so `O_i` is `n × n`
//! with row `j` equal to `C_i A^j`, and a subset stacks its sensors' blocks in
//! ascending index order.

use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{SystemModel, Trajectory};

/// Relative singular-value threshold used for rank decisions.
pub const RANK_TOL: f64 = 1e-8;

/// Default cap on `p` for exhaustive subset enumeration.
pub const DEFAULT_ENUMERATION_CAP: usize = 20;

/// A nonempty, sorted set of distinct 1-based sensor indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct SensorSubset(Vec<usize>);

impl SensorSubset {
    pub fn new(mut indices: Vec<usize>, p: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if indices.is_empty() {
            return Err(Error::Argument("sensor subset must be nonempty".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i == 0 || i > p) {
            return Err(Error::IndexOutOfRange { index: bad, p });
        }
        Ok(Self(indices))
    }

    pub fn full(p: usize) -> Self {
        Self((1..=p).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn max_index(&self) -> usize {
        *self.0.last().expect("nonempty")
    }

    /// Position of sensor `i` inside the subset.
    pub fn position(&self, i: usize) -> Option<usize> {
        self.0.binary_search(&i).ok()
    }

    pub fn without(&self, i: usize) -> Option<Self> {
        let rest: Vec<usize> = self.0.iter().copied().filter(|&j| j != i).collect();
        (!rest.is_empty()).then_some(Self(rest))
    }

    /// Sensors of `{1..p}` not in this subset.
    pub fn complement(&self, p: usize) -> Vec<usize> {
        (1..=p).filter(|&i| !self.contains(i)).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    fn check(&self, p: usize) -> Result<()> {
        match self.0.last() {
            Some(&max) if max > p => Err(Error::IndexOutOfRange { index: max, p }),
            _ => Ok(()),
        }
    }
}

impl TryFrom<Vec<usize>> for SensorSubset {
    type Error = String;

    fn try_from(v: Vec<usize>) -> std::result::Result<Self, String> {
        let p = v.iter().copied().max().unwrap_or(0);
        Self::new(v, p).map_err(|e| e.to_string())
    }
}

impl From<SensorSubset> for Vec<usize> {
    fn from(s: SensorSubset) -> Self {
        s.0
    }
}

impl fmt::Display for SensorSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

/// Lexicographic iterator over all `size`-subsets of `items` (which must be sorted).
pub struct Combinations<'a> {
    items: &'a [usize],
    idx: Vec<usize>,
    done: bool,
}

impl<'a> Combinations<'a> {
    pub fn new(items: &'a [usize], size: usize) -> Self {
        Self {
            items,
            idx: (0..size).collect(),
            done: size > items.len(),
        }
    }
}

impl Iterator for Combinations<'_> {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.iter().map(|&i| self.items[i]).collect();
        let (k, m) = (self.idx.len(), self.items.len());
        match (0..k).rev().find(|&i| self.idx[i] != i + m - k) {
            Some(i) => {
                self.idx[i] += 1;
                for j in i + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
            }
            None => self.done = true,
        }
        Some(out)
    }
}

/// All `size`-subsets of `s` in lexicographic order.
pub fn subsets_of(s: &SensorSubset, size: usize) -> impl Iterator<Item = SensorSubset> + '_ {
    Combinations::new(s.indices(), size)
        .filter(|c| !c.is_empty())
        .map(SensorSubset)
}

pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

/// Per-sensor observability blocks and the stack for one subset.
#[derive(Debug, Clone)]
pub struct ObservabilityBundle {
    pub blocks: Vec<DMatrix<f64>>,
    pub stacked: DMatrix<f64>,
}

/// `J_s` and `M_s = σ_w² J_s J_sᵀ + σ_v² I`.
#[derive(Debug, Clone)]
pub struct NoiseStructure {
    pub j: DMatrix<f64>,
    pub m: DMatrix<f64>,
}

/// Precomputed per-sensor matrices for a model.
#[derive(Debug, Clone)]
pub struct SensorBlocks {
    n: usize,
    sigma_w2: f64,
    sigma_v2: f64,
    obs: Vec<DMatrix<f64>>,
    gram: Vec<DMatrix<f64>>,
    gram_max: Vec<f64>,
    j: Vec<DMatrix<f64>>,
}

impl SensorBlocks {
    pub fn new(model: &SystemModel) -> Self {
        let (n, p) = (model.n(), model.p());
        let mut obs = Vec::with_capacity(p);
        let mut gram = Vec::with_capacity(p);
        let mut js = Vec::with_capacity(p);
        for i in 0..p {
            let mut o = DMatrix::zeros(n, n);
            let mut row = model.c.row(i).into_owned();
            for r in 0..n {
                o.set_row(r, &row);
                row = &row * &model.a;
            }
            let mut j = DMatrix::zeros(n, n * n);
            for r in 1..n {
                for c in 0..r {
                    // block (r, c) = C_i A^(r-1-c) = row r-1-c of O_i
                    let src = o.row(r - 1 - c).into_owned();
                    j.view_mut((r, c * n), (1, n)).copy_from(&src);
                }
            }
            gram.push(o.transpose() * &o);
            obs.push(o);
            js.push(j);
        }
        Self {
            n,
            sigma_w2: model.sigma_w2,
            sigma_v2: model.sigma_v2,
            gram_max: gram.iter().map(max_eigenvalue).collect(),
            obs,
            gram,
            j: js,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.obs.len()
    }

    /// `O_i` for 1-based sensor `i`.
    pub fn obs(&self, i: usize) -> &DMatrix<f64> {
        &self.obs[i - 1]
    }

    /// `O_iᵀ O_i`.
    pub fn gram(&self, i: usize) -> &DMatrix<f64> {
        &self.gram[i - 1]
    }

    /// `λ_max(O_iᵀ O_i)`.
    pub fn gram_lambda_max(&self, i: usize) -> f64 {
        self.gram_max[i - 1]
    }

    pub fn j(&self, i: usize) -> &DMatrix<f64> {
        &self.j[i - 1]
    }

    pub fn stacked_obs(&self, s: &SensorSubset) -> DMatrix<f64> {
        let n = self.n;
        let mut out = DMatrix::zeros(n * s.len(), n);
        for (b, i) in s.iter().enumerate() {
            out.view_mut((b * n, 0), (n, n)).copy_from(self.obs(i));
        }
        out
    }

    pub fn subset_gram(&self, s: &SensorSubset) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.n, self.n);
        for i in s.iter() {
            g += self.gram(i);
        }
        g
    }

    pub fn noise_structure(&self, s: &SensorSubset) -> NoiseStructure {
        let n = self.n;
        let mut j = DMatrix::zeros(n * s.len(), n * n);
        for (b, i) in s.iter().enumerate() {
            j.view_mut((b * n, 0), (n, n * n)).copy_from(self.j(i));
        }
        let mut m = &j * j.transpose() * self.sigma_w2;
        for d in 0..m.nrows() {
            m[(d, d)] += self.sigma_v2;
        }
        NoiseStructure { j, m }
    }

    /// `M_i` for a single sensor.
    pub fn noise_block(&self, i: usize) -> DMatrix<f64> {
        let j = self.j(i);
        let mut m = j * j.transpose() * self.sigma_w2;
        for d in 0..self.n {
            m[(d, d)] += self.sigma_v2;
        }
        m
    }

    pub fn is_observable(&self, s: &SensorSubset) -> bool {
        numerical_rank(&self.stacked_obs(s)) == self.n
    }

    pub fn lambda_min_s_minus_k(&self, s: &SensorSubset, k: usize) -> Result<f64> {
        if s.len() <= k {
            return Err(Error::Argument(format!(
                "subset of size {} must exceed k = {k}",
                s.len()
            )));
        }
        let lam = subsets_of(s, s.len() - k)
            .map(|s1| min_eigenvalue(&self.subset_gram(&s1)))
            .fold(f64::INFINITY, f64::min);
        Ok(lam.max(0.0))
    }
}

pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let sv = m.singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let tol = RANK_TOL * smax.max(1.0);
    sv.iter().filter(|&&s| s > tol).count()
}

pub fn min_eigenvalue(sym: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(sym.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn max_eigenvalue(sym: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(sym.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn observability_matrix(model: &SystemModel, s: &SensorSubset) -> Result<ObservabilityBundle> {
    s.check(model.p())?;
    let blocks = SensorBlocks::new(model);
    Ok(ObservabilityBundle {
        blocks: s.iter().map(|i| blocks.obs(i).clone()).collect(),
        stacked: blocks.stacked_obs(s),
    })
}

pub fn is_observable(model: &SystemModel, s: &SensorSubset) -> Result<bool> {
    s.check(model.p())?;
    Ok(SensorBlocks::new(model).is_observable(s))
}

/// Largest θ such that every `(p − θ)`-subset is observable, or −1 when the
/// full sensor set is not. Refuses `p` above `cap`.
pub fn sparse_observability_index_capped(model: &SystemModel, cap: usize) -> Result<i64> {
    let p = model.p();
    if p > cap {
        return Err(Error::Argument(format!(
            "sparse observability enumeration capped at p = {cap}, got {p}"
        )));
    }
    let blocks = SensorBlocks::new(model);
    let full = SensorSubset::full(p);
    if !blocks.is_observable(&full) {
        return Ok(-1);
    }
    let mut theta = 0i64;
    for removed in 1..p {
        let all_ok = subsets_of(&full, p - removed).all(|s| blocks.is_observable(&s));
        if !all_ok {
            break;
        }
        theta = removed as i64;
    }
    Ok(theta)
}

pub fn sparse_observability_index(model: &SystemModel) -> Result<i64> {
    sparse_observability_index_capped(model, DEFAULT_ENUMERATION_CAP)
}

pub fn lambda_min_s_minus_k(model: &SystemModel, s: &SensorSubset, k: usize) -> Result<f64> {
    s.check(model.p())?;
    SensorBlocks::new(model).lambda_min_s_minus_k(s, k)
}

pub fn noise_structure(model: &SystemModel, s: &SensorSubset) -> Result<NoiseStructure> {
    s.check(model.p())?;
    Ok(SensorBlocks::new(model).noise_structure(s))
}

/// Stacked output windows `[y_i(t), …, y_i(t+n−1)]` for `i ∈ s`.
pub fn block_outputs(traj: &Trajectory, s: &SensorSubset, t: usize) -> Result<DVector<f64>> {
    let n = traj.n();
    s.check(traj.p())?;
    if t + n > traj.horizon() {
        return Err(Error::Range(format!(
            "window [{t}, {}] exceeds horizon {}",
            t + n - 1,
            traj.horizon()
        )));
    }
    let mut out = DVector::zeros(n * s.len());
    for (b, i) in s.iter().enumerate() {
        for j in 0..n {
            out[b * n + j] = traj.outputs[(i - 1, t + j)];
        }
    }
    Ok(out)
}
