//! Hankel-based output predictors over a data window.
//!
//! The causal predictor maps `[z0; Ũ; V̂]` to the future outputs through
//! `H_yf · [H_p; H_ũf; H_v̂f]†`. Because the residuals complete the data to
//! an exact trajectory of the estimated ARX model, this map equals the lifted
//! ARX rollout and is block lower triangular. The subspace predictor drops the
//! residual rows and is in general acausal on noisy data.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{min_data_len, ExperimentWindow};
use crate::error::{Error, Result};
use crate::hankel::{
    build_hankel, excitation_rank, numerical_rank, pinv, vstack, DEFAULT_RANK_TOL,
};
use crate::pce::{PceBasis, PcePrediction, MAX_MOMENT_ORDER};
use crate::residual::ResidualModel;

/// Default relative tolerance of [`check_behavior_membership`].
pub const MEMBERSHIP_TOL: f64 = 1e-8;
/// Relative singular-value cutoff for the membership least-squares solve.
const MEMBERSHIP_SVD_TOL: f64 = 1e-10;

/// How much excitation to demand before building the predictors.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExcitationCheck {
    /// Persistent excitation of `(ũ, v̂)` of order `N + n_z`, then full row rank of the stack.
    #[default]
    Strict,
    /// Full row rank of `[H_p; H_ũf; H_v̂f]` only.
    Stack,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictorOptions {
    pub excitation: ExcitationCheck,
    pub rank_tol: f64,
}

impl Default for PredictorOptions {
    fn default() -> Self {
        PredictorOptions {
            excitation: ExcitationCheck::Strict,
            rank_tol: DEFAULT_RANK_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictorDims {
    pub lag: usize,
    pub horizon: usize,
    pub n_ut: usize,
    pub n_y: usize,
}

impl PredictorDims {
    pub fn n_z(&self) -> usize {
        self.lag * (self.n_ut + self.n_y)
    }

    /// Column partition `[n_z | N·n_ũ | N·n_y]`.
    pub fn widths(&self) -> [usize; 3] {
        [
            self.n_z(),
            self.horizon * self.n_ut,
            self.horizon * self.n_y,
        ]
    }
}

/// Depth-`(ℓ+N)` Hankel blocks of a window.
#[derive(Debug, Clone)]
pub struct WindowHankels {
    pub h_p: DMatrix<f64>,
    pub h_uf: DMatrix<f64>,
    pub h_yf: DMatrix<f64>,
    /// `H_N(v̂)`, `N·n_y` rows.
    pub h_vf: DMatrix<f64>,
    pub dims: PredictorDims,
}

impl WindowHankels {
    pub fn new(window: &ExperimentWindow, rm: &ResidualModel) -> Result<Self> {
        let idx = window.index;
        let (lag, horizon) = (idx.lag, idx.horizon);
        if rm.dims.lag != lag || rm.dims.data_len != idx.data_len {
            return Err(Error::Dimension(format!(
                "residual model (lag {}, T {}) does not belong to the window (lag {lag}, T {})",
                rm.dims.lag, rm.dims.data_len, idx.data_len
            )));
        }
        if rm.n_y() != window.n_y() || rm.dims.n_ut != window.n_ut() {
            return Err(Error::Dimension(
                "residual model channels differ from the window".into(),
            ));
        }
        if horizon > idx.data_len {
            return Err(Error::Dimension(format!(
                "horizon N = {horizon} exceeds data length T = {}",
                idx.data_len
            )));
        }
        let hu = build_hankel(&window.past_inputs, lag + horizon)?;
        let hy = build_hankel(&window.past_outputs, lag + horizon)?;
        let hv = build_hankel(&rm.residuals, horizon)?;
        let h_p = vstack(&[&hu.block_rows(0, lag), &hy.block_rows(0, lag)]);
        Ok(WindowHankels {
            h_p,
            h_uf: hu.block_rows(lag, horizon),
            h_yf: hy.block_rows(lag, horizon),
            h_vf: hv.data,
            dims: PredictorDims {
                lag,
                horizon,
                n_ut: window.n_ut(),
                n_y: window.n_y(),
            },
        })
    }

    pub fn ncols(&self) -> usize {
        self.h_p.ncols()
    }
}

/// Causal predictor `Ŷ = map · [z0; Ũ; V̂]`.
#[derive(Debug, Clone)]
pub struct PredictorOperator {
    pub map: DMatrix<f64>,
    pub dims: PredictorDims,
    /// Prediction time of the source window.
    pub window_t: usize,
}

impl PredictorOperator {
    pub fn z_block(&self) -> DMatrix<f64> {
        self.map.columns(0, self.dims.n_z()).into_owned()
    }

    pub fn u_block(&self) -> DMatrix<f64> {
        let [nz, nu, _] = self.dims.widths();
        self.map.columns(nz, nu).into_owned()
    }

    pub fn v_block(&self) -> DMatrix<f64> {
        let [nz, nu, nv] = self.dims.widths();
        self.map.columns(nz + nu, nv).into_owned()
    }

    /// Largest entry of any block mapping step-`j` inputs or residuals to a step-`k < j`
    /// output, relative to the largest entry of the map.
    pub fn causality_violation(&self) -> f64 {
        anticausal_ratio(&self.map, &self.dims, true)
    }
}

/// Subspace predictor `Ŷ = map · [z0; Ũ]`.
#[derive(Debug, Clone)]
pub struct SubspacePredictor {
    pub map: DMatrix<f64>,
    pub dims: PredictorDims,
}

impl SubspacePredictor {
    /// Same measure as [`PredictorOperator::causality_violation`], restricted to the input block.
    pub fn causality_violation(&self) -> f64 {
        anticausal_ratio(&self.map, &self.dims, false)
    }
}

fn anticausal_ratio(map: &DMatrix<f64>, dims: &PredictorDims, with_v: bool) -> f64 {
    let scale = map.amax();
    if scale == 0.0 {
        return 0.0;
    }
    let [nz, nu, _] = dims.widths();
    let mut worst: f64 = 0.0;
    for k in 0..dims.horizon {
        let rows = map.rows(k * dims.n_y, dims.n_y);
        for j in k + 1..dims.horizon {
            worst = worst.max(rows.columns(nz + j * dims.n_ut, dims.n_ut).amax());
            if with_v {
                worst = worst.max(rows.columns(nz + nu + j * dims.n_y, dims.n_y).amax());
            }
        }
    }
    worst / scale
}

/// Orthonormal basis of the retained residual directions (`n_y × n_ξ`).
fn residual_directions(rm: &ResidualModel) -> DMatrix<f64> {
    let mut w = rm.sqrt_cov.clone();
    for mut c in w.column_iter_mut() {
        let n = c.norm();
        if n > 0.0 {
            c /= n;
        }
    }
    w
}

fn block_diag(block: &DMatrix<f64>, count: usize) -> DMatrix<f64> {
    let (r, c) = block.shape();
    let mut out = DMatrix::zeros(r * count, c * count);
    for k in 0..count {
        out.view_mut((k * r, k * c), (r, c)).copy_from(block);
    }
    out
}

/// Builds the causal and subspace predictors of a window.
///
/// Residual directions that the whitening discarded (zero variance) are left
/// out of the stack, so noise-free data yields a map whose residual block is
/// zero.
pub fn build_predictors(
    window: &ExperimentWindow,
    rm: &ResidualModel,
    opts: &PredictorOptions,
) -> Result<(PredictorOperator, SubspacePredictor)> {
    let hk = WindowHankels::new(window, rm)?;
    let dims = hk.dims;
    let (lag, horizon) = (dims.lag, dims.horizon);
    let n_xi = rm.n_xi();
    let n_z = dims.n_z();
    let data_len = rm.dims.data_len;

    let w = residual_directions(rm);
    let reduced = &rm.residuals * &w;

    if opts.excitation == ExcitationCheck::Strict {
        let order = horizon + n_z;
        let sig_dim = dims.n_ut + n_xi;
        let needed = min_data_len(horizon, n_z, sig_dim);
        if data_len < needed {
            return Err(Error::Dimension(format!(
                "excitation of order N + n_z = {order} on {sig_dim} channels needs T >= {needed}, got T = {data_len}"
            )));
        }
        let ut = window.past_inputs.rows(lag, data_len).into_owned();
        let mut signal = DMatrix::zeros(data_len, sig_dim);
        signal.columns_mut(0, dims.n_ut).copy_from(&ut);
        signal.columns_mut(dims.n_ut, n_xi).copy_from(&reduced);
        let rank = excitation_rank(&signal, order, opts.rank_tol)?;
        if rank < order * sig_dim {
            return Err(Error::Excitation {
                what: format!("Hankel of (ũ, v̂) of order {order}"),
                rank,
                required: order * sig_dim,
            });
        }
    }

    let h_rf = build_hankel(&reduced, horizon)?.data;
    let stack = vstack(&[&hk.h_p, &hk.h_uf, &h_rf]);
    if stack.ncols() < stack.nrows() {
        return Err(Error::Dimension(format!(
            "stacked Hankel has {} rows but only T − N + 1 = {} columns; increase T",
            stack.nrows(),
            stack.ncols()
        )));
    }
    let rank = numerical_rank(&stack, opts.rank_tol);
    if rank < stack.nrows() {
        return Err(Error::Excitation {
            what: "stacked Hankel [H_p; H_uf; H_vf]".into(),
            rank,
            required: stack.nrows(),
        });
    }
    let reduced_map = &hk.h_yf * pinv(&stack, crate::hankel::default_svd_tol(&stack));
    let n_pu = n_z + horizon * dims.n_ut;
    let v_map = reduced_map.columns(n_pu, horizon * n_xi) * block_diag(&w.transpose(), horizon);
    let mut map = DMatrix::zeros(horizon * dims.n_y, n_pu + horizon * dims.n_y);
    map.columns_mut(0, n_pu)
        .copy_from(&reduced_map.columns(0, n_pu));
    map.columns_mut(n_pu, horizon * dims.n_y).copy_from(&v_map);

    let sp_stack = vstack(&[&hk.h_p, &hk.h_uf]);
    let sp_map = &hk.h_yf * pinv(&sp_stack, crate::hankel::default_svd_tol(&sp_stack));

    Ok((
        PredictorOperator {
            map,
            dims,
            window_t: window.index.t,
        },
        SubspacePredictor { map: sp_map, dims },
    ))
}

fn check_len(what: &str, v: &DVector<f64>, expected: usize) -> Result<()> {
    if v.len() != expected {
        return Err(Error::Dimension(format!(
            "{what} has length {}, expected {expected}",
            v.len()
        )));
    }
    Ok(())
}

/// PCE of the future outputs for deterministic `z0` and future inputs `u_f`.
///
/// Basis: the constant followed by `ξ_i(k)` at column `1 + k·n_ξ + i`.
pub fn predict_causal(
    op: &PredictorOperator,
    z0: &DVector<f64>,
    u_f: &DVector<f64>,
    rm: &ResidualModel,
) -> Result<PcePrediction> {
    let mut input = DMatrix::zeros(z0.len() + u_f.len(), 1);
    input.view_mut((0, 0), (z0.len(), 1)).copy_from(z0);
    input.view_mut((z0.len(), 0), (u_f.len(), 1)).copy_from(u_f);
    predict_causal_uncertain(op, &input, &PceBasis::constant(), rm)
}

/// PCE of the future outputs when `[z0; u_f]` is itself a PCE over `input_basis`.
///
/// `input_coeffs` has `n_z + N·n_ũ` rows and one column per term of
/// `input_basis`; the output basis appends the residual terms.
pub fn predict_causal_uncertain(
    op: &PredictorOperator,
    input_coeffs: &DMatrix<f64>,
    input_basis: &PceBasis,
    rm: &ResidualModel,
) -> Result<PcePrediction> {
    let dims = op.dims;
    let [nz, nu, _] = dims.widths();
    if input_coeffs.nrows() != nz + nu {
        return Err(Error::Dimension(format!(
            "input PCE has {} rows, expected n_z + N·n_ũ = {}",
            input_coeffs.nrows(),
            nz + nu
        )));
    }
    if input_coeffs.ncols() != input_basis.len() {
        return Err(Error::Dimension(
            "input PCE width differs from its basis".into(),
        ));
    }
    if rm.n_y() != dims.n_y {
        return Err(Error::Dimension(
            "residual model output count differs".into(),
        ));
    }
    let n_xi = rm.n_xi();
    let horizon = dims.horizon;
    let v_block = op.v_block();
    let pu = op.map.columns(0, nz + nu);

    let l_in = input_basis.len();
    let mut coeffs = DMatrix::zeros(horizon * dims.n_y, l_in + horizon * n_xi);
    coeffs.columns_mut(0, l_in).copy_from(&(pu * input_coeffs));
    let mean_v = DVector::from_fn(horizon * dims.n_y, |r, _| rm.emp_mean[r % dims.n_y]);
    let shifted = coeffs.column(0) + &v_block * mean_v;
    coeffs.set_column(0, &shifted);
    if n_xi > 0 {
        let stoch = &v_block * block_diag(&rm.sqrt_cov, horizon);
        coeffs.columns_mut(l_in, horizon * n_xi).copy_from(&stoch);
    }
    let basis = PceBasis::joint(input_basis, rm, horizon, MAX_MOMENT_ORDER);
    Ok(PcePrediction {
        coeffs,
        basis: Arc::new(basis),
        n_y: dims.n_y,
    })
}

/// Deterministic subspace prediction `map · [z0; u_f]`.
pub fn predict_subspace(
    sp: &SubspacePredictor,
    z0: &DVector<f64>,
    u_f: &DVector<f64>,
) -> Result<DVector<f64>> {
    let [nz, nu, _] = sp.dims.widths();
    check_len("z0", z0, nz)?;
    check_len("future input", u_f, nu)?;
    Ok(sp.map.columns(0, nz) * z0 + sp.map.columns(nz, nu) * u_f)
}

/// Whether `(z0, u_f, v_f, y_f)` is a trajectory of the data:
/// some `G` solves `[H_p; H_ũf; H_v̂f; H_yf] G = [z0; u_f; v_f; y_f]` up to
/// `tol · ‖rhs‖`.
pub fn check_behavior_membership(
    window: &ExperimentWindow,
    rm: &ResidualModel,
    z0: &DVector<f64>,
    u_f: &DVector<f64>,
    v_f: &DVector<f64>,
    y_f: &DVector<f64>,
    tol: f64,
) -> bool {
    match WindowHankels::new(window, rm) {
        Ok(hk) => hk.contains(z0, u_f, v_f, y_f, tol),
        Err(_) => false,
    }
}

impl WindowHankels {
    /// See [`check_behavior_membership`].
    pub fn contains(
        &self,
        z0: &DVector<f64>,
        u_f: &DVector<f64>,
        v_f: &DVector<f64>,
        y_f: &DVector<f64>,
        tol: f64,
    ) -> bool {
        let parts = [
            (&self.h_p, z0),
            (&self.h_uf, u_f),
            (&self.h_vf, v_f),
            (&self.h_yf, y_f),
        ];
        if parts.iter().any(|(h, v)| h.nrows() != v.len()) {
            return false;
        }
        let a = vstack(&[&self.h_p, &self.h_uf, &self.h_vf, &self.h_yf]);
        let rhs =
            DVector::from_iterator(a.nrows(), parts.iter().flat_map(|(_, v)| v.iter().copied()));
        let g = pinv(&a, MEMBERSHIP_SVD_TOL) * &rhs;
        (a * g - &rhs).norm() <= tol * rhs.norm()
    }
}
