//! Residual-disturbance estimation from raw input/output data.
//!
//! The regressor `S = [H₁(z); H₁(ũ)]` collects, for every step `k` of the data
//! window, the past `ℓ` inputs and outputs together with the current input.
//! The least-squares residual `v̂ = y(I − S†S)` is then read as a realization
//! of the disturbance process and its empirical distribution is whitened so
//! that it can serve as the germ of an affine PCE.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hankel::{default_svd_tol, numerical_rank, pinv};

/// Relative cutoff on covariance eigenvalues (fraction of the trace).
pub const COV_EIG_RTOL: f64 = 1e-12;
/// Residual standard deviations below this fraction of the output scale count as zero.
pub const RESIDUAL_SCALE_FLOOR: f64 = 1e-9;
/// Rank threshold for the regressor full-row-rank test.
pub const REGRESSOR_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegressorDims {
    pub lag: usize,
    pub n_ut: usize,
    pub n_y: usize,
    pub n_z: usize,
    pub data_len: usize,
}

/// Stacked regressor `S` (`n_z + n_ũ` rows, `T` columns) and its `Z` block.
#[derive(Debug, Clone)]
pub struct RegressorBundle {
    pub s: DMatrix<f64>,
    pub dims: RegressorDims,
}

impl RegressorBundle {
    /// The `Z(k)` columns, `n_z × T`.
    pub fn z_seq(&self) -> DMatrix<f64> {
        self.s.rows(0, self.dims.n_z).into_owned()
    }
}

/// Assembles `S` from `ũ` and `y` over `[−ℓ, T−1]` (one row per step, `T + ℓ` rows).
pub fn build_regressor(
    u_tilde: &DMatrix<f64>,
    y: &DMatrix<f64>,
    lag: usize,
) -> Result<RegressorBundle> {
    if u_tilde.nrows() != y.nrows() {
        return Err(Error::Dimension(format!(
            "input sequence has {} steps, output sequence {}",
            u_tilde.nrows(),
            y.nrows()
        )));
    }
    if lag == 0 {
        return Err(Error::Dimension("lag must be positive".into()));
    }
    if y.nrows() <= lag {
        return Err(Error::Dimension(format!(
            "need more than lag = {lag} steps, got {}",
            y.nrows()
        )));
    }
    let (n_ut, n_y) = (u_tilde.ncols(), y.ncols());
    let data_len = y.nrows() - lag;
    let n_z = lag * (n_ut + n_y);
    let mut s = DMatrix::zeros(n_z + n_ut, data_len);
    for k in 0..data_len {
        let mut col = s.column_mut(k);
        let mut r = 0;
        for i in 0..lag {
            for c in 0..n_ut {
                col[r] = u_tilde[(k + i, c)];
                r += 1;
            }
        }
        for i in 0..lag {
            for c in 0..n_y {
                col[r] = y[(k + i, c)];
                r += 1;
            }
        }
        for c in 0..n_ut {
            col[r] = u_tilde[(k + lag, c)];
            r += 1;
        }
    }
    Ok(RegressorBundle {
        s,
        dims: RegressorDims {
            lag,
            n_ut,
            n_y,
            n_z,
            data_len,
        },
    })
}

/// `H₁(y)` over `[0, T−1]`: the outputs after the first `lag` steps, `n_y × T`.
pub fn output_block(y: &DMatrix<f64>, lag: usize) -> DMatrix<f64> {
    y.rows(lag, y.nrows() - lag).transpose()
}

/// Estimated residual sequence, the induced ARX coefficients and the
/// whitened empirical residual distribution.
#[derive(Debug, Clone)]
pub struct ResidualModel {
    /// `v̂(k)`, one row per step (`T × n_y`).
    pub residuals: DMatrix<f64>,
    /// `[Ξ̂ D̂]`, `n_y × (n_z + n_ũ)`.
    pub arx: DMatrix<f64>,
    pub emp_mean: DVector<f64>,
    pub emp_cov: DMatrix<f64>,
    /// `n_y × n_ξ` factor with `sqrt_cov · sqrt_covᵀ = emp_cov`.
    pub sqrt_cov: DMatrix<f64>,
    /// `ξ(k)`, one row per step (`T × n_ξ`); zero mean, identity covariance.
    pub whitened: DMatrix<f64>,
    pub dims: RegressorDims,
}

impl ResidualModel {
    /// Builds the regressor and estimates the residuals in one go.
    pub fn estimate(u_tilde: &DMatrix<f64>, y: &DMatrix<f64>, lag: usize) -> Result<Self> {
        let rb = build_regressor(u_tilde, y, lag)?;
        estimate_residuals(&rb, &output_block(y, lag))
    }

    pub fn n_y(&self) -> usize {
        self.dims.n_y
    }

    /// Number of retained whitened components.
    pub fn n_xi(&self) -> usize {
        self.sqrt_cov.ncols()
    }

    /// True when the residuals vanish numerically (noise-free data).
    pub fn is_degenerate(&self) -> bool {
        self.n_xi() == 0
    }

    /// `Ξ̂`, the coefficients of `Z(k)`.
    pub fn xi_hat(&self) -> DMatrix<f64> {
        self.arx.columns(0, self.dims.n_z).into_owned()
    }

    /// `D̂`, the feed-through of `ũ(k)`.
    pub fn d_hat(&self) -> DMatrix<f64> {
        self.arx.columns(self.dims.n_z, self.dims.n_ut).into_owned()
    }

    /// Raw moments `E[ξ_i^p]` of whitened component `i` for `p = 0..=max_order`.
    pub fn whitened_moments(&self, component: usize, max_order: usize) -> Vec<f64> {
        raw_moments(self.whitened.column(component).iter().copied(), max_order)
    }
}

pub(crate) fn raw_moments(samples: impl Iterator<Item = f64>, max_order: usize) -> Vec<f64> {
    let mut acc = vec![0.0; max_order + 1];
    let mut n = 0usize;
    for x in samples {
        let mut p = 1.0;
        for a in acc.iter_mut() {
            *a += p;
            p *= x;
        }
        n += 1;
    }
    if n > 0 {
        acc.iter_mut().for_each(|a| *a /= n as f64);
    }
    acc
}

/// Least-squares residuals `H₁(v̂) = H₁(y)(I − S†S)` and `[Ξ̂ D̂] = H₁(y)S†`.
///
/// `y_block` is `H₁(y)` (`n_y × T`).
pub fn estimate_residuals(rb: &RegressorBundle, y_block: &DMatrix<f64>) -> Result<ResidualModel> {
    let s = &rb.s;
    let p = s.nrows();
    let t_len = s.ncols();
    if y_block.ncols() != t_len || y_block.nrows() != rb.dims.n_y {
        return Err(Error::Dimension(format!(
            "output block is {}x{}, expected {}x{t_len}",
            y_block.nrows(),
            y_block.ncols(),
            rb.dims.n_y
        )));
    }
    if t_len < p {
        return Err(Error::Degenerate(format!(
            "regressor has {p} rows but only T = {t_len} columns; increase T or reduce the lag"
        )));
    }
    let rank = numerical_rank(s, REGRESSOR_RANK_TOL);
    if rank < p {
        return Err(Error::Degenerate(format!(
            "regressor S has rank {rank} < {p} rows; increase T, reduce the lag, or use a more exciting input"
        )));
    }
    let s_pinv = pinv(s, default_svd_tol(s));
    let arx = y_block * &s_pinv;
    // y(I − S†S) = y − [Ξ̂ D̂]S, without forming the T×T projector
    let v_block = y_block - &arx * s;
    let residuals = v_block.transpose();

    let scale = y_block.amax();
    let (emp_mean, emp_cov) = empirical_moments(&residuals);
    let (sqrt_cov, whitener) = whitening_factor(&emp_cov, RESIDUAL_SCALE_FLOOR * scale);
    let centered = DMatrix::from_fn(t_len, rb.dims.n_y, |k, c| residuals[(k, c)] - emp_mean[c]);
    let whitened = &centered * whitener.transpose();

    Ok(ResidualModel {
        residuals,
        arx,
        emp_mean,
        emp_cov,
        sqrt_cov,
        whitened,
        dims: rb.dims,
    })
}

/// Mean and population covariance (`1/n`) of row samples.
pub fn empirical_moments(samples: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = samples.nrows().max(1) as f64;
    let mean = samples.row_sum().transpose() / n;
    let centered = DMatrix::from_fn(samples.nrows(), samples.ncols(), |k, c| {
        samples[(k, c)] - mean[c]
    });
    let mut cov = centered.transpose() * &centered / n;
    cov = (&cov + cov.transpose()) * 0.5;
    (mean, cov)
}

/// Rectangular square root of a PSD matrix and the matching whitening map.
///
/// Returns `(F, W)` with `F Fᵀ = Σ` on the retained eigenspace and `W = Λ^{-1/2}Uᵀ`.
/// Eigenvalues at or below `max(COV_EIG_RTOL · trace, abs_std_floor²)` are dropped.
pub fn whitening_factor(cov: &DMatrix<f64>, abs_std_floor: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = cov.nrows();
    if n == 0 {
        return (DMatrix::zeros(0, 0), DMatrix::zeros(0, 0));
    }
    let eig = cov.clone().symmetric_eigen();
    let trace = cov.trace().max(0.0);
    let cutoff = (COV_EIG_RTOL * trace).max(abs_std_floor * abs_std_floor);
    let mut order: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > cutoff).collect();
    // largest variance first
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let r = order.len();
    let mut factor = DMatrix::zeros(n, r);
    let mut whitener = DMatrix::zeros(r, n);
    for (j, &i) in order.iter().enumerate() {
        let lam = eig.eigenvalues[i];
        let vec = eig.eigenvectors.column(i);
        factor.set_column(j, &(vec * lam.sqrt()));
        whitener.set_row(j, &(vec.transpose() / lam.sqrt()));
    }
    (factor, whitener)
}
