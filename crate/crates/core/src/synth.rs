//! Ground-truth stochastic systems for verification.
//!
//! Two families are provided: ARX systems `y(k) = Ξ Z(k) + D ũ(k) + v(k)` and
//! minimal state-space systems driven by unstructured disturbances. Both
//! simulate from a zero initial condition and return the realized disturbance
//! sequence next to the generated dataset.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::hankel::{numerical_rank, vstack};
use crate::linalg::spectral_radius;

const MAX_GENERATION_ROUNDS: usize = 100;
const MINIMALITY_RANK_TOL: f64 = 1e-9;

/// Derives an independent stream seed from a root seed and a stream label.
///
/// FNV-1a over the label, mixed with the root seed through SplitMix64.
pub fn derive_seed(root: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix64(root ^ h)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// RNG for the named stream under `root`.
pub fn stream_rng(root: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, label))
}

/// I.i.d. uniform inputs on `[−1, 1]`, one row per step.
pub fn uniform_inputs(len: usize, channels: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(len, channels, |_, _| rng.random_range(-1.0..=1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum NoiseFamily {
    Gaussian,
    /// Uniform on `[−√3, √3]·scale`.
    Uniform,
    /// `+a` with probability `weight`, `−b` otherwise, with `a·weight = b·(1−weight)`.
    /// Kurtosis `(1 − 3w + 3w²) / (w(1−w))`.
    TwoPoint {
        weight: f64,
    },
}

/// Zero-mean i.i.d. noise with a per-component standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    #[serde(flatten)]
    pub family: NoiseFamily,
    pub scale: Vec<f64>,
}

impl NoiseSpec {
    pub fn gaussian(scale: Vec<f64>) -> Self {
        NoiseSpec {
            family: NoiseFamily::Gaussian,
            scale,
        }
    }

    pub fn zero(dim: usize) -> Self {
        NoiseSpec::gaussian(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.scale.len()
    }

    fn validate(&self) -> Result<()> {
        if self.scale.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::Domain("noise scales must be finite and >= 0".into()));
        }
        if let NoiseFamily::TwoPoint { weight } = self.family {
            if !(weight > 0.0 && weight < 1.0) {
                return Err(Error::Domain(format!(
                    "two-point weight {weight} not in (0, 1)"
                )));
            }
        }
        Ok(())
    }

    /// Standardized (zero mean, unit variance) draw.
    fn standard_draw(&self, rng: &mut impl Rng) -> f64 {
        match self.family {
            NoiseFamily::Gaussian => StandardNormal.sample(rng),
            NoiseFamily::Uniform => rng.random_range(-1.0..1.0) * 3f64.sqrt(),
            NoiseFamily::TwoPoint { weight } => {
                if rng.random::<f64>() < weight {
                    ((1.0 - weight) / weight).sqrt()
                } else {
                    -(weight / (1.0 - weight)).sqrt()
                }
            }
        }
    }

    /// `len` draws, one row per step.
    pub fn sample(&self, len: usize, rng: &mut impl Rng) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(len, self.dim());
        for k in 0..len {
            for (c, s) in self.scale.iter().enumerate() {
                out[(k, c)] = s * self.standard_draw(rng);
            }
        }
        out
    }

    /// Kurtosis of each standardized component.
    pub fn kurtosis(&self) -> f64 {
        match self.family {
            NoiseFamily::Gaussian => 3.0,
            NoiseFamily::Uniform => 1.8,
            NoiseFamily::TwoPoint { weight: w } => (1.0 - 3.0 * w + 3.0 * w * w) / (w * (1.0 - w)),
        }
    }
}

/// Matrices serialized as `{"rows", "cols", "data"}` with row-major data.
mod row_major {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Repr {
        rows: usize,
        cols: usize,
        data: Vec<f64>,
    }

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let data = (0..m.nrows())
            .flat_map(|r| (0..m.ncols()).map(move |c| (r, c)))
            .map(|idx| m[idx])
            .collect();
        Repr {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let r = Repr::deserialize(d)?;
        if r.data.len() != r.rows * r.cols {
            return Err(serde::de::Error::custom(format!(
                "matrix data has {} entries, expected {}x{}",
                r.data.len(),
                r.rows,
                r.cols
            )));
        }
        Ok(DMatrix::from_row_slice(r.rows, r.cols, &r.data))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArxDims {
    pub n_u: usize,
    pub n_ws: usize,
    pub n_y: usize,
}

impl ArxDims {
    pub fn n_ut(&self) -> usize {
        self.n_u + self.n_ws
    }
}

/// `y(k) = Ξ Z(k) + D ũ(k) + v(k)` with `Z(k) = [ũ(k−ℓ); …; ũ(k−1); y(k−ℓ); …; y(k−1)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArxTruth {
    #[serde(with = "row_major")]
    pub xi: DMatrix<f64>,
    #[serde(with = "row_major")]
    pub d: DMatrix<f64>,
    pub lag: usize,
    pub dims: ArxDims,
    pub noise: NoiseSpec,
    #[serde(default)]
    pub seed: u64,
}

impl ArxTruth {
    pub fn new(
        xi: DMatrix<f64>,
        d: DMatrix<f64>,
        lag: usize,
        dims: ArxDims,
        noise: NoiseSpec,
    ) -> Result<Self> {
        let t = ArxTruth {
            xi,
            d,
            lag,
            dims,
            noise,
            seed: 0,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn n_z(&self) -> usize {
        self.lag * (self.dims.n_ut() + self.dims.n_y)
    }

    fn validate(&self) -> Result<()> {
        let (n_y, n_ut) = (self.dims.n_y, self.dims.n_ut());
        if self.lag == 0 {
            return Err(Error::Dimension("ARX lag must be positive".into()));
        }
        if self.xi.shape() != (n_y, self.n_z()) || self.d.shape() != (n_y, n_ut) {
            return Err(Error::Dimension(format!(
                "ARX matrices {:?}/{:?} inconsistent with n_y={n_y}, n_z={}, n_ũ={n_ut}",
                self.xi.shape(),
                self.d.shape(),
                self.n_z()
            )));
        }
        if self.noise.dim() != n_y {
            return Err(Error::Dimension("noise dimension must equal n_y".into()));
        }
        self.noise.validate()
    }

    /// Companion matrix of the autonomous output recursion.
    pub fn companion(&self) -> DMatrix<f64> {
        let (n_y, lag) = (self.dims.n_y, self.lag);
        let n = n_y * lag;
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n - n_y {
            a[(i, i + n_y)] = 1.0;
        }
        let y_cols = self.xi.columns(lag * self.dims.n_ut(), n);
        a.rows_mut(n - n_y, n_y).copy_from(&y_cols);
        a
    }

    pub fn spectral_radius(&self) -> f64 {
        spectral_radius(&self.companion())
    }

    /// Noise-free output response from `z0` plus the contribution of `v`.
    /// `inputs` and `noise` have one row per step.
    pub fn rollout(
        &self,
        z0: &DVector<f64>,
        inputs: &DMatrix<f64>,
        noise: &DMatrix<f64>,
    ) -> DMatrix<f64> {
        arx_rollout(&self.xi, &self.d, self.lag, z0, inputs, noise)
    }

    /// Lifted map over `horizon` steps: `y = O z0 + Tu ũ + Tv v` on stacked vectors.
    ///
    /// Built from the companion state-space form `x(k+1) = A x + B ũ + G v`,
    /// `y = Ξ x + D ũ + v` with state `x = Z(k)`.
    pub fn lifted(&self, horizon: usize) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let (n_ut, n_y, lag) = (self.dims.n_ut(), self.dims.n_y, self.lag);
        let n_z = self.n_z();
        let nu_blk = lag * n_ut;
        let mut a = DMatrix::zeros(n_z, n_z);
        let mut b = DMatrix::zeros(n_z, n_ut);
        let mut g = DMatrix::zeros(n_z, n_y);
        // input history shift
        for i in 0..nu_blk - n_ut {
            a[(i, i + n_ut)] = 1.0;
        }
        for c in 0..n_ut {
            b[(nu_blk - n_ut + c, c)] = 1.0;
        }
        // output history shift; the newest block receives y(k)
        for i in 0..lag * n_y - n_y {
            a[(nu_blk + i, nu_blk + i + n_y)] = 1.0;
        }
        let last = nu_blk + lag * n_y - n_y;
        a.rows_mut(last, n_y).copy_from(&self.xi);
        b.rows_mut(last, n_y).copy_from(&self.d);
        for c in 0..n_y {
            g[(last + c, c)] = 1.0;
        }

        let mut obs = DMatrix::zeros(horizon * n_y, n_z);
        let mut tu = DMatrix::zeros(horizon * n_y, horizon * n_ut);
        let mut tv = DMatrix::zeros(horizon * n_y, horizon * n_y);
        // markov[j] = Ξ A^{j−1} (for j ≥ 1)
        let mut xi_pow = self.xi.clone();
        let mut markov_u = vec![self.d.clone()];
        let mut markov_v = vec![DMatrix::identity(n_y, n_y)];
        for k in 0..horizon {
            obs.rows_mut(k * n_y, n_y).copy_from(&xi_pow);
            if k + 1 < horizon {
                markov_u.push(&xi_pow * &b);
                markov_v.push(&xi_pow * &g);
            }
            xi_pow = &xi_pow * &a;
        }
        for k in 0..horizon {
            for j in 0..=k {
                tu.view_mut((k * n_y, j * n_ut), (n_y, n_ut))
                    .copy_from(&markov_u[k - j]);
                tv.view_mut((k * n_y, j * n_y), (n_y, n_y))
                    .copy_from(&markov_v[k - j]);
            }
        }
        (obs, tu, tv)
    }
}

/// ARX recursion from the initial regressor `z0`; one row per step in and out.
pub fn arx_rollout(
    xi: &DMatrix<f64>,
    d: &DMatrix<f64>,
    lag: usize,
    z0: &DVector<f64>,
    inputs: &DMatrix<f64>,
    noise: &DMatrix<f64>,
) -> DMatrix<f64> {
    let (n_y, n_ut) = (d.nrows(), d.ncols());
    let steps = inputs.nrows();
    let mut z = z0.clone();
    let mut y = DMatrix::zeros(steps, n_y);
    let nu_blk = lag * n_ut;
    for k in 0..steps {
        let uk = inputs.row(k).transpose();
        let yk = xi * &z + d * &uk + noise.row(k).transpose();
        y.set_row(k, &yk.transpose());
        // shift histories and append the newest sample
        for i in 0..nu_blk - n_ut {
            z[i] = z[i + n_ut];
        }
        for c in 0..n_ut {
            z[nu_blk - n_ut + c] = uk[c];
        }
        for i in nu_blk..z.len() - n_y {
            z[i] = z[i + n_y];
        }
        let base = z.len() - n_y;
        for c in 0..n_y {
            z[base + c] = yk[c];
        }
    }
    y
}

/// Samples a Schur-stable ARX system with spectral radius at most `1 − margin`.
pub fn random_arx(
    dims: ArxDims,
    lag: usize,
    margin: f64,
    noise: NoiseSpec,
    seed: u64,
) -> Result<ArxTruth> {
    if !(margin > 0.0 && margin < 1.0) {
        return Err(Error::Domain(format!(
            "stability margin {margin} not in (0, 1)"
        )));
    }
    if lag == 0 || dims.n_y == 0 {
        return Err(Error::Dimension("need lag >= 1 and n_y >= 1".into()));
    }
    let target = 1.0 - margin;
    let mut rng = stream_rng(seed, "random_arx");
    let n_ut = dims.n_ut();
    let n_z = lag * (n_ut + dims.n_y);
    for _ in 0..MAX_GENERATION_ROUNDS {
        let mut xi = DMatrix::from_fn(dims.n_y, n_z, |_, _| rng.random_range(-1.0..1.0));
        let d = DMatrix::from_fn(dims.n_y, n_ut, |_, _| rng.random_range(-1.0..1.0));
        let mut truth = ArxTruth {
            xi: xi.clone(),
            d: d.clone(),
            lag,
            dims,
            noise: noise.clone(),
            seed,
        };
        truth.validate()?;
        let rho = truth.spectral_radius();
        if !rho.is_finite() {
            continue;
        }
        if rho > target {
            // scaling the block multiplying y(k−ℓ+j) by s^{ℓ−j} scales every root by s
            let s = target / rho * (1.0 - 1e-9);
            for j in 0..lag {
                let col0 = lag * n_ut + j * dims.n_y;
                let f = s.powi((lag - j) as i32);
                xi.columns_mut(col0, dims.n_y).scale_mut(f);
            }
            truth.xi = xi;
        }
        if truth.spectral_radius() <= target {
            return Ok(truth);
        }
    }
    Err(Error::Generation(format!(
        "no stable ARX system within {MAX_GENERATION_ROUNDS} rounds"
    )))
}

/// Minimal state-space truth driven by inputs `ũ = [u; w_s]` and unstructured noise `W^u`:
/// `x⁺ = A x + B ũ + E w`, `y = C x + D ũ + F w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpaceTruth {
    #[serde(with = "row_major")]
    pub a: DMatrix<f64>,
    #[serde(with = "row_major")]
    pub b: DMatrix<f64>,
    #[serde(with = "row_major")]
    pub c: DMatrix<f64>,
    #[serde(with = "row_major")]
    pub d: DMatrix<f64>,
    #[serde(with = "row_major")]
    pub e: DMatrix<f64>,
    #[serde(with = "row_major")]
    pub f: DMatrix<f64>,
    pub n_u: usize,
    pub n_ws: usize,
    pub noise: NoiseSpec,
    #[serde(default)]
    pub seed: u64,
}

impl StateSpaceTruth {
    /// Validates shapes, minimality and `ρ(A) ≤ 1 − margin`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        e: DMatrix<f64>,
        f: DMatrix<f64>,
        n_u: usize,
        noise: NoiseSpec,
        margin: f64,
    ) -> Result<Self> {
        let n_ws = b.ncols().checked_sub(n_u).ok_or_else(|| {
            Error::Dimension(format!("n_u = {n_u} exceeds input count {}", b.ncols()))
        })?;
        let t = StateSpaceTruth {
            a,
            b,
            c,
            d,
            e,
            f,
            n_u,
            n_ws,
            noise,
            seed: 0,
        };
        t.validate_shapes()?;
        let rho = spectral_radius(&t.a);
        if rho > 1.0 - margin {
            return Err(Error::Domain(format!(
                "spectral radius {rho} exceeds 1 − margin = {}",
                1.0 - margin
            )));
        }
        let n = t.n();
        let ctrb = controllability_matrix(&t.a, &t.b);
        if numerical_rank(&ctrb, MINIMALITY_RANK_TOL) < n {
            return Err(Error::Domain("(A, B) is not controllable".into()));
        }
        lag_of(&t)?;
        Ok(t)
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_y(&self) -> usize {
        self.c.nrows()
    }

    pub fn n_ut(&self) -> usize {
        self.b.ncols()
    }

    fn validate_shapes(&self) -> Result<()> {
        let n = self.a.nrows();
        let n_w = self.e.ncols();
        let ok = self.a.ncols() == n
            && self.b.nrows() == n
            && self.c.ncols() == n
            && self.d.shape() == (self.c.nrows(), self.b.ncols())
            && self.e.nrows() == n
            && self.f.shape() == (self.c.nrows(), n_w)
            && self.noise.dim() == n_w;
        if !ok {
            return Err(Error::Dimension(
                "inconsistent state-space matrix shapes".into(),
            ));
        }
        self.noise.validate()
    }
}

fn controllability_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut blocks = Vec::with_capacity(n);
    let mut cur = b.clone();
    for _ in 0..n {
        blocks.push(cur.clone());
        cur = a * &cur;
    }
    let refs: Vec<&DMatrix<f64>> = blocks.iter().collect();
    crate::hankel::hstack(&refs)
}

/// Smallest `ℓ` with `rank [C; CA; …; CA^{ℓ−1}] = n`.
pub fn lag_of(ss: &StateSpaceTruth) -> Result<usize> {
    let n = ss.n();
    let mut blocks: Vec<DMatrix<f64>> = Vec::new();
    let mut cur = ss.c.clone();
    let mut rank = 0;
    for l in 1..=n.max(1) {
        blocks.push(cur.clone());
        let refs: Vec<&DMatrix<f64>> = blocks.iter().collect();
        rank = numerical_rank(&vstack(&refs), MINIMALITY_RANK_TOL);
        if rank == n {
            return Ok(l);
        }
        cur = &cur * &ss.a;
    }
    Err(Error::Unobservable { rank, n })
}

/// Either kind of truth system, tagged by `kind` in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TruthSystem {
    Arx(ArxTruth),
    StateSpace(StateSpaceTruth),
}

impl TruthSystem {
    pub fn n_u(&self) -> usize {
        match self {
            TruthSystem::Arx(t) => t.dims.n_u,
            TruthSystem::StateSpace(t) => t.n_u,
        }
    }

    pub fn n_ws(&self) -> usize {
        match self {
            TruthSystem::Arx(t) => t.dims.n_ws,
            TruthSystem::StateSpace(t) => t.n_ws,
        }
    }

    pub fn n_y(&self) -> usize {
        match self {
            TruthSystem::Arx(t) => t.dims.n_y,
            TruthSystem::StateSpace(t) => t.n_y(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let sys: TruthSystem = serde_json::from_str(text)?;
        match &sys {
            TruthSystem::Arx(t) => t.validate()?,
            TruthSystem::StateSpace(t) => t.validate_shapes()?,
        }
        Ok(sys)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        TruthSystem::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Simulates with the given inputs (one row per step) from a zero initial condition.
    pub fn simulate(
        &self,
        inputs: &DMatrix<f64>,
        seed: u64,
        sample_period: f64,
    ) -> Result<Simulation> {
        match self {
            TruthSystem::Arx(t) => simulate_arx(t, inputs, seed, sample_period),
            TruthSystem::StateSpace(t) => simulate_state_space(t, inputs, seed, sample_period),
        }
    }
}

/// Simulated dataset and the realized disturbance sequence (one row per step).
#[derive(Debug, Clone)]
pub struct Simulation {
    pub dataset: Dataset,
    pub noise: DMatrix<f64>,
}

fn split_inputs(inputs: &DMatrix<f64>, n_u: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let u = inputs.columns(0, n_u).into_owned();
    let ws = inputs.columns(n_u, inputs.ncols() - n_u).into_owned();
    (u, ws)
}

pub fn simulate_arx(
    truth: &ArxTruth,
    inputs: &DMatrix<f64>,
    seed: u64,
    sample_period: f64,
) -> Result<Simulation> {
    if inputs.ncols() != truth.dims.n_ut() {
        return Err(Error::Dimension(format!(
            "inputs have {} channels, system expects {}",
            inputs.ncols(),
            truth.dims.n_ut()
        )));
    }
    let mut rng = stream_rng(seed, "noise");
    let noise = truth.noise.sample(inputs.nrows(), &mut rng);
    let y = truth.rollout(&DVector::zeros(truth.n_z()), inputs, &noise);
    let (u, ws) = split_inputs(inputs, truth.dims.n_u);
    Ok(Simulation {
        dataset: Dataset::from_channels(u, ws, y, sample_period)?,
        noise,
    })
}

pub fn simulate_state_space(
    truth: &StateSpaceTruth,
    inputs: &DMatrix<f64>,
    seed: u64,
    sample_period: f64,
) -> Result<Simulation> {
    if inputs.ncols() != truth.n_ut() {
        return Err(Error::Dimension(format!(
            "inputs have {} channels, system expects {}",
            inputs.ncols(),
            truth.n_ut()
        )));
    }
    let mut rng = stream_rng(seed, "noise");
    let steps = inputs.nrows();
    let noise = truth.noise.sample(steps, &mut rng);
    let mut x = DVector::zeros(truth.n());
    let mut y = DMatrix::zeros(steps, truth.n_y());
    for k in 0..steps {
        let uk = inputs.row(k).transpose();
        let wk = noise.row(k).transpose();
        let yk = &truth.c * &x + &truth.d * &uk + &truth.f * &wk;
        y.set_row(k, &yk.transpose());
        x = &truth.a * &x + &truth.b * &uk + &truth.e * &wk;
    }
    let (u, ws) = split_inputs(inputs, truth.n_u);
    Ok(Simulation {
        dataset: Dataset::from_channels(u, ws, y, sample_period)?,
        noise,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::stack_rows;
    use crate::residual::ResidualModel;
    use nalgebra::dmatrix;

    fn scalar_dims() -> ArxDims {
        ArxDims {
            n_u: 1,
            n_ws: 0,
            n_y: 1,
        }
    }

    #[test]
    fn scalar_random_arx_is_stable() {
        for seed in 0..20 {
            let t = random_arx(scalar_dims(), 1, 0.1, NoiseSpec::zero(1), seed).unwrap();
            // columns: [u(k−1), y(k−1)]
            assert!(t.xi[(0, 1)].abs() <= 0.9 + 1e-12);
        }
        let t = random_arx(scalar_dims(), 1, 0.99, NoiseSpec::zero(1), 4).unwrap();
        assert!(t.xi[(0, 1)].abs() <= 0.01 + 1e-12);
    }

    #[test]
    fn generation_is_deterministic() {
        let dims = ArxDims {
            n_u: 2,
            n_ws: 1,
            n_y: 2,
        };
        let a = random_arx(dims, 2, 0.2, NoiseSpec::gaussian(vec![0.1, 0.2]), 99).unwrap();
        let b = random_arx(dims, 2, 0.2, NoiseSpec::gaussian(vec![0.1, 0.2]), 99).unwrap();
        assert_eq!(a, b);
        assert!(a.spectral_radius() <= 0.8);
        assert!(random_arx(dims, 2, 1.0, NoiseSpec::zero(2), 1).is_err());
    }

    #[test]
    fn zero_input_zero_noise_gives_zero_output() {
        let t = random_arx(scalar_dims(), 2, 0.2, NoiseSpec::zero(1), 1).unwrap();
        let sim = simulate_arx(&t, &DMatrix::zeros(50, 1), 3, 1.0).unwrap();
        assert!(sim.dataset.y().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn impulse_response_is_geometric() {
        let t = ArxTruth::new(
            dmatrix![0.0, 0.5],
            dmatrix![1.0],
            1,
            scalar_dims(),
            NoiseSpec::zero(1),
        )
        .unwrap();
        let mut u = DMatrix::zeros(6, 1);
        u[(0, 0)] = 1.0;
        let sim = simulate_arx(&t, &u, 0, 1.0).unwrap();
        assert_eq!(
            sim.dataset.y().as_slice(),
            &[1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125]
        );
    }

    #[test]
    fn rollout_matches_lifted_operator() {
        let dims = ArxDims {
            n_u: 1,
            n_ws: 1,
            n_y: 2,
        };
        let t = random_arx(dims, 2, 0.1, NoiseSpec::gaussian(vec![0.3, 0.1]), 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let horizon = 12;
        let z0 = DVector::from_fn(t.n_z(), |_, _| rng.random_range(-1.0..1.0));
        let u = uniform_inputs(horizon, 2, &mut rng);
        let v = t.noise.sample(horizon, &mut rng);
        let y = t.rollout(&z0, &u, &v);
        let (obs, tu, tv) = t.lifted(horizon);
        let lifted = obs * &z0 + tu * stack_rows(&u) + tv * stack_rows(&v);
        let diff = (stack_rows(&y) - lifted).amax();
        assert!(
            diff <= 1e-12 * stack_rows(&y).amax().max(1.0),
            "diff {diff}"
        );
    }

    #[test]
    fn two_point_noise_moments() {
        let spec = NoiseSpec {
            family: NoiseFamily::TwoPoint { weight: 0.1 },
            scale: vec![2.0],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = spec.sample(200_000, &mut rng);
        let c = crate::pce::central_moments(s.iter().copied(), 4);
        let mean = s.mean();
        assert!(mean.abs() < 0.02);
        assert!((c[2] - 4.0).abs() < 0.08);
        let kurt = c[4] / (c[2] * c[2]);
        assert!((kurt - spec.kurtosis()).abs() < 0.05 * spec.kurtosis());
    }

    #[test]
    fn seed_streams_are_distinct_and_stable() {
        assert_eq!(derive_seed(1, "noise"), derive_seed(1, "noise"));
        assert_ne!(derive_seed(1, "noise"), derive_seed(1, "inputs"));
        assert_ne!(derive_seed(1, "noise"), derive_seed(2, "noise"));
    }

    #[test]
    fn noisy_simulation_residuals_recover_true_noise() {
        let sigma = 0.5;
        let t = ArxTruth::new(
            dmatrix![0.2, 0.6],
            dmatrix![1.0],
            1,
            scalar_dims(),
            NoiseSpec::gaussian(vec![sigma]),
        )
        .unwrap();
        let len = 8001;
        let mut rng = stream_rng(12, "inputs");
        let sim = simulate_arx(&t, &uniform_inputs(len, 1, &mut rng), 12, 1.0).unwrap();
        let ds = &sim.dataset;
        let rm = ResidualModel::estimate(&ds.u_tilde(), ds.y(), 1).unwrap();
        let truth = sim.noise.rows(1, len - 1);
        let err = (&rm.residuals - truth).norm() / ((len - 1) as f64).sqrt();
        assert!(err <= 0.1 * sigma, "per-sample error {err}");
    }

    fn rotation_system() -> StateSpaceTruth {
        let (s, c) = (0.6f64.sin() * 0.9, 0.6f64.cos() * 0.9);
        StateSpaceTruth::new(
            dmatrix![c, -s; s, c],
            dmatrix![1.0; 0.5],
            dmatrix![1.0, 0.0],
            dmatrix![0.0],
            dmatrix![0.3; 0.1],
            dmatrix![0.2],
            1,
            NoiseSpec::gaussian(vec![1.0]),
            0.05,
        )
        .unwrap()
    }

    #[test]
    fn lag_examples() {
        let scalar = StateSpaceTruth::new(
            dmatrix![0.5],
            dmatrix![1.0],
            dmatrix![2.0],
            dmatrix![0.0],
            dmatrix![1.0],
            dmatrix![0.0],
            1,
            NoiseSpec::zero(1),
            0.1,
        )
        .unwrap();
        assert_eq!(lag_of(&scalar).unwrap(), 1);

        let rot = rotation_system();
        // oracle: [C] alone has rank 1, [C; CA] rank 2
        let stacked = vstack(&[&rot.c, &(&rot.c * &rot.a)]);
        assert_eq!(numerical_rank(&rot.c, 1e-9), 1);
        assert_eq!(numerical_rank(&stacked, 1e-9), 2);
        assert_eq!(lag_of(&rot).unwrap(), 2);

        let diag = StateSpaceTruth::new(
            dmatrix![0.5, 0.0; 0.0, -0.3],
            dmatrix![1.0; 1.0],
            dmatrix![1.0, 0.0; 0.0, 1.0],
            DMatrix::zeros(2, 1),
            DMatrix::zeros(2, 1),
            DMatrix::zeros(2, 1),
            1,
            NoiseSpec::zero(1),
            0.1,
        )
        .unwrap();
        assert_eq!(lag_of(&diag).unwrap(), 1);
    }

    #[test]
    fn unobservable_pair_rejected() {
        let err = StateSpaceTruth::new(
            dmatrix![0.5, 0.0; 0.0, 0.3],
            dmatrix![1.0; 1.0],
            dmatrix![1.0, 0.0],
            dmatrix![0.0],
            DMatrix::zeros(2, 1),
            DMatrix::zeros(1, 1),
            1,
            NoiseSpec::zero(1),
            0.1,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Unobservable { rank: 1, n: 2 }));
    }

    #[test]
    fn state_space_residual_mean_vanishes() {
        let ss = rotation_system();
        let lag = lag_of(&ss).unwrap();
        let sys = TruthSystem::StateSpace(ss);
        for (len, seed) in [(2000usize, 1u64), (8000, 2)] {
            let mut rng = stream_rng(seed, "inputs");
            let sim = sys
                .simulate(&uniform_inputs(len, 1, &mut rng), seed, 1.0)
                .unwrap();
            let ds = &sim.dataset;
            let rm = ResidualModel::estimate(&ds.u_tilde(), ds.y(), lag + 1).unwrap();
            let sd = rm.emp_cov[(0, 0)].sqrt();
            let t = rm.residuals.nrows() as f64;
            assert!(rm.emp_mean[0].abs() <= 3.0 * sd / t.sqrt());
        }
    }

    #[test]
    fn json_round_trip() {
        let dims = ArxDims {
            n_u: 1,
            n_ws: 1,
            n_y: 2,
        };
        let t = random_arx(dims, 2, 0.3, NoiseSpec::gaussian(vec![0.1, 0.2]), 8).unwrap();
        let sys = TruthSystem::Arx(t);
        let text = sys.to_json().unwrap();
        assert!(text.contains("\"kind\": \"arx\""));
        assert_eq!(TruthSystem::from_json(&text).unwrap(), sys);

        let ss = TruthSystem::StateSpace(rotation_system());
        assert_eq!(TruthSystem::from_json(&ss.to_json().unwrap()).unwrap(), ss);
    }

    #[test]
    fn row_major_layout_in_json() {
        let t = ArxTruth::new(
            dmatrix![0.1, 0.2],
            dmatrix![3.0],
            1,
            scalar_dims(),
            NoiseSpec::zero(1),
        )
        .unwrap();
        let v: serde_json::Value = serde_json::to_value(TruthSystem::Arx(t)).unwrap();
        assert_eq!(v["xi"]["data"], serde_json::json!([0.1, 0.2]));
        assert_eq!(v["xi"]["cols"], 2);
        assert_eq!(v["noise"]["family"], "gaussian");
    }
}
