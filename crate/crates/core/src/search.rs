//! Searches for an attack-free sensor subset: plain enumeration of all
//! `(p−k)`-subsets, and a certificate-guided loop over a cardinality SAT
//! solver that prunes every hypothesis the detector rejects.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::detect::{Detector, DetectorConfig};
use crate::error::{Error, Result};
use crate::kalman::{FilterRun, SteadyStateFilter};
use crate::model::{SystemModel, Trajectory};
use crate::obsv::{subsets_of, SensorSubset};
use crate::pbsat::{solve, PBConstraint, PBFormula, SolveResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exhaustive,
    Smt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Subset proposed by the search itself.
    Hypothesis,
    /// Shrunken subset probed while building certificates.
    Certificate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub phase: Phase,
    pub subset: SensorSubset,
    pub flag: bool,
    /// Whether the verdict was reused from an earlier call in the same search.
    pub cached: bool,
    /// Certificate emitted from this check, if any (0-based variables).
    pub certificate: Option<PBConstraint>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub schema_version: u32,
    pub method: Method,
    pub k: usize,
    pub found: bool,
    pub subset: Option<SensorSubset>,
    /// Estimates on `G` for the returned subset; not serialized.
    #[serde(skip)]
    pub estimates: Option<FilterRun>,
    pub theory_checks: usize,
    pub certificates: Vec<PBConstraint>,
    /// Seconds, excluding filter preparation when the engine is configured so.
    pub wall_time: f64,
    pub trace: Vec<TraceEntry>,
}

/// Filter and its estimates on `G` for one subset.
#[derive(Debug)]
pub struct Prepared {
    pub filter: SteadyStateFilter,
    pub run: FilterRun,
}

/// Detector plus a per-subset bank of prepared filters.
#[derive(Debug)]
pub struct Engine<'d> {
    detector: &'d Detector<'d>,
    bank: HashMap<SensorSubset, Arc<Prepared>>,
    exclude_preparation: bool,
}

impl<'d> Engine<'d> {
    /// Filters are built on demand and their cost counts toward `wall_time`.
    pub fn new(detector: &'d Detector<'d>) -> Self {
        Self {
            detector,
            bank: HashMap::new(),
            exclude_preparation: false,
        }
    }

    /// Filter preparation is excluded from `wall_time`, so timings measure the
    /// search logic and residue tests only.
    pub fn with_bank(detector: &'d Detector<'d>) -> Self {
        Self {
            exclude_preparation: true,
            ..Self::new(detector)
        }
    }

    pub fn detector(&self) -> &Detector<'d> {
        self.detector
    }

    /// Builds (or returns the cached) filter and estimates for `s`.
    pub fn prepare(&mut self, s: &SensorSubset) -> Result<Arc<Prepared>> {
        if let Some(p) = self.bank.get(s) {
            return Ok(p.clone());
        }
        let filter = self.detector.filter(s)?;
        let run = self.detector.estimates(&filter)?;
        let p = Arc::new(Prepared { filter, run });
        self.bank.insert(s.clone(), p.clone());
        Ok(p)
    }

    /// Prepares every `(p−k)`-subset up front.
    pub fn prepare_all(&mut self, k: usize) -> Result<()> {
        let p = self.detector.model().p();
        for s in subsets_of(&SensorSubset::full(p), p - k) {
            self.prepare(&s)?;
        }
        Ok(())
    }

    pub fn bank_len(&self) -> usize {
        self.bank.len()
    }
}

/// Per-search bookkeeping: verdict memo, counters and the preparation clock.
struct Session<'e, 'd> {
    engine: &'e mut Engine<'d>,
    verdicts: HashMap<SensorSubset, bool>,
    checks: usize,
    trace: Vec<TraceEntry>,
    prep: Duration,
    /// Latest normalized residue statistic per sensor; orders block checks.
    suspicion: Vec<f64>,
}

impl<'e, 'd> Session<'e, 'd> {
    fn new(engine: &'e mut Engine<'d>) -> Self {
        Self {
            engine,
            verdicts: HashMap::new(),
            checks: 0,
            trace: Vec::new(),
            prep: Duration::ZERO,
            suspicion: Vec::new(),
        }
    }

    fn prepared(&mut self, s: &SensorSubset) -> Result<Arc<Prepared>> {
        let start = Instant::now();
        let p = self.engine.prepare(s);
        self.prep += start.elapsed();
        p
    }

    fn check(&mut self, s: &SensorSubset, phase: Phase) -> Result<bool> {
        Ok(self.check_with_mu(s, phase, false)?.0)
    }

    /// Detector verdict for `s`; with `want_mu`, a failing subset also returns
    /// its per-sensor statistics.
    fn check_with_mu(&mut self, s: &SensorSubset, phase: Phase, want_mu: bool) -> Result<(bool, Option<Vec<f64>>)> {
        let (flag, cached, mut mu) = match self.verdicts.get(s) {
            Some(&flag) => (flag, true, None),
            None => {
                let prep = self.prepared(s)?;
                let (v, mu) = self.engine.detector.screen(s, &prep.filter, &prep.run, &self.suspicion, want_mu)?;
                self.checks += 1;
                self.verdicts.insert(s.clone(), v.flag);
                (v.flag, false, mu)
            }
        };
        if flag && want_mu && mu.is_none() {
            let prep = self.prepared(s)?;
            mu = Some(self.engine.detector.per_sensor_mu(s, &prep.filter, &prep.run)?);
        }
        if let Some(mu) = &mu {
            let p = self.engine.detector.model().p();
            self.suspicion.resize(p, 0.0);
            for (b, i) in s.iter().enumerate() {
                self.suspicion[i - 1] = mu[b];
            }
        }
        self.trace.push(TraceEntry {
            phase,
            subset: s.clone(),
            flag,
            cached,
            certificate: None,
        });
        Ok((flag, mu))
    }

    fn certify(&mut self, s: &SensorSubset) -> Result<PBConstraint> {
        let c = certificate_over(s);
        if let Some(last) = self.trace.iter_mut().rev().find(|e| &e.subset == s) {
            last.certificate = Some(c.clone());
        }
        Ok(c)
    }

    fn finish(self, method: Method, k: usize, found: Option<SensorSubset>, certificates: Vec<PBConstraint>, start: Instant) -> Result<SearchOutcome> {
        let mut elapsed = start.elapsed();
        if self.engine.exclude_preparation {
            elapsed = elapsed.saturating_sub(self.prep);
        }
        let estimates = match &found {
            Some(s) => Some(self.engine.prepare(s)?.run.clone()),
            None => None,
        };
        Ok(SearchOutcome {
            schema_version: crate::SCHEMA_VERSION,
            method,
            k,
            found: found.is_some(),
            subset: found,
            estimates,
            theory_checks: self.checks,
            certificates,
            wall_time: elapsed.as_secs_f64(),
            trace: self.trace,
        })
    }
}

/// `Σ_{i∈s} b_i ≥ 1` with `b_i` stored at variable `i − 1`.
pub fn certificate_over(s: &SensorSubset) -> PBConstraint {
    PBConstraint::at_least(s.iter().map(|i| i - 1).collect(), 1).expect("subsets are nonempty")
}

fn check_k(p: usize, k: usize) -> Result<()> {
    if k >= p {
        return Err(Error::Argument(format!("k = {k} must be smaller than p = {p}")));
    }
    Ok(())
}

/// First passing `(p−k)`-subset in lexicographic order.
pub fn exhaustive_search_with(engine: &mut Engine<'_>, k: usize) -> Result<SearchOutcome> {
    let p = engine.detector.model().p();
    check_k(p, k)?;
    let start = Instant::now();
    let mut session = Session::new(engine);
    for s in subsets_of(&SensorSubset::full(p), p - k) {
        if !session.check(&s, Phase::Hypothesis)? {
            return session.finish(Method::Exhaustive, k, Some(s), Vec::new(), start);
        }
    }
    session.finish(Method::Exhaustive, k, None, Vec::new(), start)
}

/// Certificate-guided search starting from `Σ b_i ≤ k`.
pub fn smt_search_with(engine: &mut Engine<'_>, k: usize) -> Result<SearchOutcome> {
    let p = engine.detector.model().p();
    check_k(p, k)?;
    let start = Instant::now();
    let mut session = Session::new(engine);
    let mut phi = PBFormula::new(p);
    phi.push(PBConstraint::at_most((0..p).collect(), k)?)?;
    let mut certificates = Vec::new();
    loop {
        let b = match solve(&phi)? {
            SolveResult::Sat(b) => b,
            SolveResult::Unsat => return session.finish(Method::Smt, k, None, certificates, start),
        };
        let s = SensorSubset::new((1..=p).filter(|&i| !b.values[i - 1]).collect(), p)?;
        let (flag, mu) = session.check_with_mu(&s, Phase::Hypothesis, true)?;
        if !flag {
            return session.finish(Method::Smt, k, Some(s), certificates, start);
        }
        for c in certificates_for(&mut session, &s, &mu.expect("flagged subsets carry statistics"), k)? {
            phi.push(c.clone())?;
            certificates.push(c);
        }
    }
}

/// Certificates for a rejected subset `s`: the trivial one over `s`, then one
/// per still-failing shrunken subset, removing sensors in ascending order of
/// their normalized residue statistic.
///
/// Up to `|s| − k + 1` sensors are removed (`p − 2k + 1` for a hypothesis of
/// size `p − k`); subsets with `|s| ≤ p − 2k + 1` get only the trivial
/// certificate. The loop also stops at the first subset on which the detector
/// is undefined: unobservable with unstable dynamics, or no admissible
/// automatic threshold.
fn certificates_for(session: &mut Session<'_, '_>, s: &SensorSubset, mu: &[f64], k: usize) -> Result<Vec<PBConstraint>> {
    let p = session.engine.detector.model().p();
    let mut out = vec![session.certify(s)?];
    if s.len() + 2 * k <= p + 1 {
        return Ok(out);
    }
    let seed_len = s.len() + 1 - k;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| mu[a].total_cmp(&mu[b]));

    let mut current = s.clone();
    for &pos in order.iter().take(seed_len) {
        let next = match current.without(s.indices()[pos]) {
            Some(next) => next,
            None => break,
        };
        if session.engine.detector.eta(&next).is_err() {
            break;
        }
        match session.prepared(&next) {
            Ok(_) => {}
            Err(Error::Analysis(_)) => break,
            Err(e) => return Err(e),
        }
        if !session.check(&next, Phase::Certificate)? {
            break;
        }
        out.push(session.certify(&next)?);
        current = next;
    }
    Ok(out)
}

/// Certificates for `s` (already rejected by the detector) under `cfg`.
pub fn generate_certificate(model: &SystemModel, traj: &Trajectory, s: &SensorSubset, cfg: &DetectorConfig, k: usize) -> Result<Vec<PBConstraint>> {
    let detector = Detector::new(model, traj, cfg.clone())?;
    let mut engine = Engine::new(&detector);
    let mut session = Session::new(&mut engine);
    let prep = session.prepared(s)?;
    let mu = detector.per_sensor_mu(s, &prep.filter, &prep.run)?;
    certificates_for(&mut session, s, &mu, k)
}

pub fn exhaustive_search(model: &SystemModel, traj: &Trajectory, k: usize, cfg: &DetectorConfig) -> Result<SearchOutcome> {
    let detector = Detector::new(model, traj, cfg.clone())?;
    exhaustive_search_with(&mut Engine::new(&detector), k)
}

pub fn smt_search(model: &SystemModel, traj: &Trajectory, k: usize, cfg: &DetectorConfig) -> Result<SearchOutcome> {
    let detector = Detector::new(model, traj, cfg.clone())?;
    smt_search_with(&mut Engine::new(&detector), k)
}
