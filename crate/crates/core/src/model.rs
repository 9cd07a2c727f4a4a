//! Plant, adversary and the attacked-trajectory simulator.
//!
//! The plant is `x(t+1) = A x(t) + B u(t) + w(t)`, `y(t) = C x(t) + v(t) + a(t)`
//! with `w ~ N(0, σ_w² I)` and `v ~ N(0, σ_v² I)`. Inputs are known to the
//! estimator and are therefore taken as zero in simulation; `B` is only carried
//! along for scenario round-trips.
//!
//! Randomness comes from ChaCha8 seeded with a `u64`; normals are drawn with
//! `rand_distr::StandardNormal` (ziggurat). Noise uses stream 0 of the seed and
//! randomized attacks use stream 1, so an attacked and an attack-free run with
//! the same seed share their noise realizations exactly.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Serde adapter writing a `DMatrix` as row-major nested arrays.
pub mod matrix_rows {
    use nalgebra::DMatrix;
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
        (0..m.nrows())
            .map(|i| m.row(i).iter().copied().collect())
            .collect()
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, String> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err("ragged matrix rows".into());
        }
        Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
    }

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        from_rows(&rows).map_err(D::Error::custom)
    }

    pub mod option {
        use nalgebra::DMatrix;
        use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

        pub fn serialize<S: Serializer>(m: &Option<DMatrix<f64>>, s: S) -> Result<S::Ok, S::Error> {
            m.as_ref().map(super::to_rows).serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<DMatrix<f64>>, D::Error> {
            let rows = Option::<Vec<Vec<f64>>>::deserialize(d)?;
            rows.map(|r| super::from_rows(&r).map_err(D::Error::custom))
                .transpose()
        }
    }
}

/// A linear plant observed by `p` scalar sensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemModel {
    #[serde(with = "matrix_rows")]
    pub a: DMatrix<f64>,
    #[serde(with = "matrix_rows")]
    pub c: DMatrix<f64>,
    #[serde(default, with = "matrix_rows::option", skip_serializing_if = "Option::is_none")]
    pub b: Option<DMatrix<f64>>,
    pub sigma_w2: f64,
    pub sigma_v2: f64,
}

impl SystemModel {
    pub fn new(a: DMatrix<f64>, c: DMatrix<f64>, sigma_w2: f64, sigma_v2: f64) -> Result<Self> {
        let model = Self {
            a,
            c,
            b: None,
            sigma_w2,
            sigma_v2,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn with_input(mut self, b: DMatrix<f64>) -> Result<Self> {
        self.b = Some(b);
        self.validate()?;
        Ok(self)
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Sensor count.
    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.a.nrows();
        if n == 0 || self.a.ncols() != n {
            return Err(Error::Dimension(format!(
                "A must be square and non-empty, got {}x{}",
                self.a.nrows(),
                self.a.ncols()
            )));
        }
        if self.c.nrows() == 0 || self.c.ncols() != n {
            return Err(Error::Dimension(format!(
                "C must be p x {n} with p >= 1, got {}x{}",
                self.c.nrows(),
                self.c.ncols()
            )));
        }
        if let Some(b) = &self.b {
            if b.nrows() != n {
                return Err(Error::Dimension(format!("B must have {n} rows, got {}", b.nrows())));
            }
        }
        if !(self.sigma_w2 >= 0.0 && self.sigma_v2 >= 0.0) {
            return Err(Error::Config("noise variances must be non-negative".into()));
        }
        Ok(())
    }

    pub fn spectral_radius(&self) -> f64 {
        spectral_radius(&self.a)
    }
}

pub(crate) fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Random plant with i.i.d. standard-normal `A` rescaled to the requested
/// spectral radius and i.i.d. standard-normal `C`. Both noise variances are 1.
pub fn make_random_stable_system(n: usize, p: usize, spectral_radius: f64, seed: u64) -> Result<SystemModel> {
    if n == 0 || p == 0 {
        return Err(Error::Config("n and p must be positive".into()));
    }
    if !(spectral_radius > 0.0 && spectral_radius < 1.0) {
        return Err(Error::Config(format!(
            "spectral radius must lie in (0, 1), got {spectral_radius}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let c = DMatrix::from_fn(p, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let rho = self::spectral_radius(&a);
    if rho > 0.0 {
        a *= spectral_radius / rho;
    }
    SystemModel::new(a, c, 1.0, 1.0)
}

/// How attacked sensors corrupt their outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttackStrategy {
    None,
    /// Attacked sensors report exactly zero.
    ZeroOutput,
    /// `a_j(t) = gain · v_j(t)`.
    NoiseLinear { gain: f64 },
    /// Constant bias, one entry per attacked sensor in ascending index order.
    Constant { bias: Vec<f64> },
    /// i.i.d. `N(0, amplitude²)` corruption.
    SeededRandom { amplitude: f64 },
}

/// Static adversary: a fixed attacked set and a strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    /// 1-based sensor indices.
    pub attacked: Vec<usize>,
    pub strategy: AttackStrategy,
}

impl AttackSpec {
    pub fn none() -> Self {
        Self {
            attacked: Vec::new(),
            strategy: AttackStrategy::None,
        }
    }

    pub fn new(mut attacked: Vec<usize>, strategy: AttackStrategy) -> Self {
        attacked.sort_unstable();
        attacked.dedup();
        Self { attacked, strategy }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.attacked.len() > p {
            return Err(Error::Config(format!(
                "{} attacked sensors exceed sensor count {p}",
                self.attacked.len()
            )));
        }
        let mut seen = vec![false; p + 1];
        for &j in &self.attacked {
            if j == 0 || j > p {
                return Err(Error::IndexOutOfRange { index: j, p });
            }
            if std::mem::replace(&mut seen[j], true) {
                return Err(Error::Config(format!("sensor {j} listed twice in attacked set")));
            }
        }
        if let AttackStrategy::Constant { bias } = &self.strategy {
            if bias.len() != self.attacked.len() {
                return Err(Error::Config(format!(
                    "constant attack needs {} biases, got {}",
                    self.attacked.len(),
                    bias.len()
                )));
            }
        }
        Ok(())
    }

    pub fn is_attack_free(&self) -> bool {
        self.attacked.is_empty() || self.strategy == AttackStrategy::None
    }
}

/// Simulated run of the attacked plant. Column `t` of every matrix holds time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: DMatrix<f64>,
    pub clean_outputs: DMatrix<f64>,
    pub outputs: DMatrix<f64>,
    pub attack: DMatrix<f64>,
    pub process_noise: DMatrix<f64>,
    pub sensor_noise: DMatrix<f64>,
    pub seed: u64,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.outputs.ncols()
    }

    pub fn n(&self) -> usize {
        self.states.nrows()
    }

    pub fn p(&self) -> usize {
        self.outputs.nrows()
    }

    /// Output of sensor `i` (1-based) at time `t`.
    pub fn output(&self, i: usize, t: usize) -> f64 {
        self.outputs[(i - 1, t)]
    }

    pub fn state(&self, t: usize) -> DVector<f64> {
        self.states.column(t).into_owned()
    }
}

/// Burn-in length discarded before `t = 0` by [`simulate_stationary`].
pub fn default_burn_in(n: usize) -> usize {
    10 * n
}

/// Simulates `horizon` steps from `x0`.
pub fn simulate(
    model: &SystemModel,
    attack: &AttackSpec,
    horizon: usize,
    x0: &DVector<f64>,
    seed: u64,
) -> Result<Trajectory> {
    if x0.len() != model.n() {
        return Err(Error::Dimension(format!(
            "x0 has length {}, expected {}",
            x0.len(),
            model.n()
        )));
    }
    run(model, attack, horizon, x0.clone(), 0, seed)
}

/// Simulates from `x = 0` after discarding [`default_burn_in`] noise-driven
/// steps, so the kept window starts close to the stationary regime.
pub fn simulate_stationary(model: &SystemModel, attack: &AttackSpec, horizon: usize, seed: u64) -> Result<Trajectory> {
    let n = model.n();
    run(model, attack, horizon, DVector::zeros(n), default_burn_in(n), seed)
}

fn run(
    model: &SystemModel,
    attack: &AttackSpec,
    horizon: usize,
    x0: DVector<f64>,
    burn_in: usize,
    seed: u64,
) -> Result<Trajectory> {
    model.validate()?;
    attack.validate(model.p())?;
    if horizon == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    let (n, p) = (model.n(), model.p());
    let sw = model.sigma_w2.sqrt();
    let sv = model.sigma_v2.sqrt();

    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut attack_rng = ChaCha8Rng::seed_from_u64(seed);
    attack_rng.set_stream(1);

    let mut x = x0;
    let mut w = DVector::zeros(n);
    let mut next = DVector::zeros(n);
    for _ in 0..burn_in {
        w.iter_mut().for_each(|e| *e = sw * noise_rng.sample::<f64, _>(StandardNormal));
        next.gemv(1.0, &model.a, &x, 0.0);
        x.copy_from(&next);
        x += &w;
    }

    let mut states = DMatrix::zeros(n, horizon);
    let mut clean = DMatrix::zeros(p, horizon);
    let mut outputs = DMatrix::zeros(p, horizon);
    let mut attacks = DMatrix::zeros(p, horizon);
    let mut wmat = DMatrix::zeros(n, horizon);
    let mut vmat = DMatrix::zeros(p, horizon);
    let mut cx = DVector::zeros(p);

    for t in 0..horizon {
        for e in wmat.column_mut(t).iter_mut() {
            *e = sw * noise_rng.sample::<f64, _>(StandardNormal);
        }
        for e in vmat.column_mut(t).iter_mut() {
            *e = sv * noise_rng.sample::<f64, _>(StandardNormal);
        }
        cx.gemv(1.0, &model.c, &x, 0.0);
        states.set_column(t, &x);
        clean.set_column(t, &cx);
        for (slot, &j) in attack.attacked.iter().enumerate() {
            let r = j - 1;
            let value = match &attack.strategy {
                AttackStrategy::None => 0.0,
                AttackStrategy::ZeroOutput => -(cx[r] + vmat[(r, t)]),
                AttackStrategy::NoiseLinear { gain } => gain * vmat[(r, t)],
                AttackStrategy::Constant { bias } => bias[slot],
                AttackStrategy::SeededRandom { amplitude } => {
                    amplitude * attack_rng.sample::<f64, _>(StandardNormal)
                }
            };
            attacks[(r, t)] = value;
        }
        for r in 0..p {
            outputs[(r, t)] = cx[r] + vmat[(r, t)] + attacks[(r, t)];
        }
        next.gemv(1.0, &model.a, &x, 0.0);
        x.copy_from(&next);
        x += &wmat.column(t);
    }

    Ok(Trajectory {
        states,
        clean_outputs: clean,
        outputs,
        attack: attacks,
        process_noise: wmat,
        sensor_noise: vmat,
        seed,
    })
}
