//! Noiseless systems viewed as a code over sensor symbols.
//!
//! Sensor `d` contributes the symbol `Y_d = O_d x(0) ∈ R^n`. With a θ-sparse
//! observable plant two distinct initial states disagree in at least θ+1
//! symbols, so up to θ corruptions are detectable and up to ⌊θ/2⌋ correctable.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SystemModel;
use crate::obsv::{sparse_observability_index, subsets_of, SensorBlocks, SensorSubset};

const CONSISTENCY_TOL: f64 = 1e-8;
const STATE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolObservation {
    pub symbols: Vec<Vec<f64>>,
}

impl SymbolObservation {
    pub fn p(&self) -> usize {
        self.symbols.len()
    }

    /// Overwrites symbol `d` (1-based).
    pub fn replace(&mut self, d: usize, symbol: Vec<f64>) -> Result<()> {
        let p = self.p();
        let slot = d
            .checked_sub(1)
            .and_then(|i| self.symbols.get_mut(i))
            .ok_or(Error::IndexOutOfRange { index: d, p })?;
        if slot.len() != symbol.len() {
            return Err(Error::Dimension(format!(
                "symbol of length {} replaces one of length {}",
                symbol.len(),
                slot.len()
            )));
        }
        *slot = symbol;
        Ok(())
    }

    fn stacked(&self, s: &SensorSubset) -> DVector<f64> {
        DVector::from_iterator(
            self.symbols.iter().map(Vec::len).next().unwrap_or(0) * s.len(),
            s.iter().flat_map(|i| self.symbols[i - 1].iter().copied()),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeResult {
    pub schema_version: u32,
    pub state: Vec<f64>,
    pub corrupted: Vec<usize>,
    pub unique: bool,
    /// Every consistent `(p − k)`-subset, with the state it explains.
    pub explanations: Vec<Explanation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub subset: SensorSubset,
    pub state: Vec<f64>,
    pub observable: bool,
}

pub fn encode(model: &SystemModel, x0: &DVector<f64>) -> Result<SymbolObservation> {
    model.validate()?;
    if x0.len() != model.n() {
        return Err(Error::Dimension(format!(
            "initial state has length {}, expected {}",
            x0.len(),
            model.n()
        )));
    }
    let blocks = SensorBlocks::new(model);
    Ok(SymbolObservation {
        symbols: (1..=model.p())
            .map(|d| (blocks.obs(d) * x0).iter().copied().collect())
            .collect(),
    })
}

struct Fit {
    state: DVector<f64>,
    consistent: bool,
    observable: bool,
}

fn fit(blocks: &SensorBlocks, obs: &SymbolObservation, s: &SensorSubset) -> Fit {
    let o: DMatrix<f64> = blocks.stacked_obs(s);
    let y = obs.stacked(s);
    let svd = o.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = 1e-12 * smax.max(1.0);
    let rank = svd.singular_values.iter().filter(|&&v| v > eps).count();
    let state = svd
        .solve(&y, eps)
        .unwrap_or_else(|_| DVector::zeros(blocks.n()));
    let residual = (&o * &state - &y).norm();
    Fit {
        consistent: residual <= CONSISTENCY_TOL * (1.0 + y.norm()),
        observable: rank == blocks.n(),
        state,
    }
}

fn check_obs(model: &SystemModel, obs: &SymbolObservation) -> Result<()> {
    model.validate()?;
    if obs.p() != model.p() {
        return Err(Error::Dimension(format!(
            "{} symbols for {} sensors",
            obs.p(),
            model.p()
        )));
    }
    if let Some(bad) = obs.symbols.iter().find(|y| y.len() != model.n()) {
        return Err(Error::Dimension(format!(
            "symbol of length {}, expected {}",
            bad.len(),
            model.n()
        )));
    }
    Ok(())
}

/// True iff no single initial state explains every symbol.
pub fn detect_corruption(model: &SystemModel, obs: &SymbolObservation) -> Result<bool> {
    check_obs(model, obs)?;
    let blocks = SensorBlocks::new(model);
    let full = SensorSubset::full(model.p());
    if !blocks.is_observable(&full) {
        return Err(Error::Analysis("full sensor set is not observable".into()));
    }
    Ok(!fit(&blocks, obs, &full).consistent)
}

pub fn decode(model: &SystemModel, obs: &SymbolObservation, k: usize) -> Result<DecodeResult> {
    decode_with(model, obs, k, true)
}

/// Scans `(p − k)`-subsets lexicographically. With `complete` the scan runs to
/// the end so that `unique` reflects every consistent explanation; otherwise
/// it stops at the first hit and `unique` only speaks for that subset.
pub fn decode_with(model: &SystemModel, obs: &SymbolObservation, k: usize, complete: bool) -> Result<DecodeResult> {
    check_obs(model, obs)?;
    let p = model.p();
    if k >= p {
        return Err(Error::Argument(format!("k = {k} must be below p = {p}")));
    }
    let blocks = SensorBlocks::new(model);
    let full = SensorSubset::full(p);
    let mut explanations = Vec::new();
    for s in subsets_of(&full, p - k) {
        let f = fit(&blocks, obs, &s);
        if f.consistent {
            explanations.push(Explanation {
                subset: s,
                state: f.state.iter().copied().collect(),
                observable: f.observable,
            });
            if !complete {
                break;
            }
        }
    }
    let first = explanations
        .first()
        .ok_or_else(|| Error::Decode(format!("no {}-subset of symbols is consistent", p - k)))?;
    let x = DVector::from_column_slice(&first.state);
    let unique = explanations.iter().all(|e| {
        e.observable && (DVector::from_column_slice(&e.state) - &x).norm() <= STATE_TOL * (1.0 + x.norm())
    });
    Ok(DecodeResult {
        schema_version: crate::SCHEMA_VERSION,
        state: first.state.clone(),
        corrupted: first.subset.complement(p),
        unique,
        explanations,
    })
}

/// θ + 1, read off the sparse observability index; no minimal pair is
/// constructed.
pub fn min_symbol_distance(model: &SystemModel) -> Result<usize> {
    let theta = sparse_observability_index(model)?;
    if theta < 0 {
        return Err(Error::Analysis("full sensor set is not observable".into()));
    }
    Ok(theta as usize + 1)
}

/// Two-dimensional plant with `A = 0.9 I` and five pairwise independent
/// sensors: no sensor alone is observable, every pair is, so θ = 3.
pub fn ambiguity_example() -> Result<SystemModel> {
    let a = DMatrix::from_diagonal_element(2, 2, 0.9);
    let c = DMatrix::from_row_slice(5, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, -1.0, 1.0, 2.0]);
    SystemModel::new(a, c, 0.0, 0.0)
}

/// Symbols that agree with `x1` on sensors 1–3 and with `x2 = x1 + e_2` on
/// sensors 4–5. Both states share symbol 1, so with `k = 2` either
/// explanation is admissible.
pub fn ambiguity_observation(model: &SystemModel, x1: &DVector<f64>) -> Result<(SymbolObservation, DVector<f64>)> {
    let mut x2 = x1.clone();
    x2[1] += 1.0;
    let y1 = encode(model, x1)?;
    let y2 = encode(model, &x2)?;
    let mut y = y1;
    for d in 4..=5 {
        y.replace(d, y2.symbols[d - 1].clone())?;
    }
    Ok((y, x2))
}
