//! Block-Hankel matrices, persistent excitation and the truncated pseudoinverse.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default relative threshold for the persistent-excitation rank test.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Block-Hankel matrix of a vector signal.
///
/// Entry `(i·d + r, j)` is component `r` of sample `i + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockHankel {
    pub data: DMatrix<f64>,
    pub depth: usize,
    pub signal_dim: usize,
}

impl BlockHankel {
    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }

    pub fn nrows(&self) -> usize {
        self.data.nrows()
    }

    /// Recovers the signal (steps × d) from the first block row and the last column.
    pub fn reconstruct_signal(&self) -> DMatrix<f64> {
        let d = self.signal_dim;
        let cols = self.ncols();
        let len = cols + self.depth - 1;
        DMatrix::from_fn(len, d, |k, r| {
            if k < cols {
                self.data[(r, k)]
            } else {
                let i = k - (cols - 1);
                self.data[(i * d + r, cols - 1)]
            }
        })
    }

    /// Rows of block rows `[start, start + count)`.
    pub fn block_rows(&self, start: usize, count: usize) -> DMatrix<f64> {
        self.data
            .rows(start * self.signal_dim, count * self.signal_dim)
            .into_owned()
    }
}

/// Builds the depth-`depth` block-Hankel matrix of `signal` (one row per sample).
pub fn build_hankel(signal: &DMatrix<f64>, depth: usize) -> Result<BlockHankel> {
    let len = signal.nrows();
    let d = signal.ncols();
    if depth == 0 {
        return Err(Error::Dimension("Hankel depth must be positive".into()));
    }
    if depth > len {
        return Err(Error::Dimension(format!(
            "Hankel depth {depth} exceeds signal length {len}"
        )));
    }
    let cols = len - depth + 1;
    let data = DMatrix::from_fn(depth * d, cols, |row, j| {
        signal[(row / d.max(1) + j, row % d.max(1))]
    });
    Ok(BlockHankel {
        data,
        depth,
        signal_dim: d,
    })
}

/// Splits a depth-`(lag + horizon)` Hankel into its first `lag` block rows and the rest.
pub fn partition_past_future(
    h: &BlockHankel,
    lag: usize,
    horizon: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if lag == 0 {
        return Err(Error::Dimension("past partition needs lag >= 1".into()));
    }
    if h.depth != lag + horizon {
        return Err(Error::Dimension(format!(
            "Hankel depth {} does not equal lag + horizon = {}",
            h.depth,
            lag + horizon
        )));
    }
    Ok((h.block_rows(0, lag), h.block_rows(lag, horizon)))
}

/// Singular values of `m` in no particular order.
pub fn singular_values(m: &DMatrix<f64>) -> DVector<f64> {
    crate::linalg::singular_values(m)
}

/// Number of singular values at or above `rel_tol · σ_max`.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let sv = singular_values(m);
    let max = sv.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s >= rel_tol * max).count()
}

/// Whether the depth-`order` Hankel of `signal` has full row rank `order · d`.
pub fn is_persistently_exciting(
    signal: &DMatrix<f64>,
    order: usize,
    rank_tol: f64,
) -> Result<bool> {
    Ok(excitation_rank(signal, order, rank_tol)? == order * signal.ncols())
}

/// Numerical rank of the depth-`order` Hankel of `signal`.
pub fn excitation_rank(signal: &DMatrix<f64>, order: usize, rank_tol: f64) -> Result<usize> {
    let h = build_hankel(signal, order)?;
    if h.ncols() < h.nrows() {
        // cannot reach full row rank; skip the SVD
        return Ok(numerical_rank(&h.data, rank_tol).min(h.ncols()));
    }
    Ok(numerical_rank(&h.data, rank_tol))
}

/// `max(rows, cols) · ε`.
pub fn default_svd_tol(m: &DMatrix<f64>) -> f64 {
    m.nrows().max(m.ncols()) as f64 * f64::EPSILON
}

/// Moore–Penrose pseudoinverse; singular values below `svd_tol · σ_max` are treated as zero.
pub fn pinv(m: &DMatrix<f64>, svd_tol: f64) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    if m.is_empty() {
        return DMatrix::zeros(cols, rows);
    }
    let (u, sv, v) = crate::linalg::thin_svd(m);
    let max = sv.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return DMatrix::zeros(cols, rows);
    }
    let cutoff = svd_tol * max;
    let mut out = DMatrix::zeros(cols, rows);
    for (k, &s) in sv.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            // out += v_k u_kᵀ / s
            out.ger(1.0 / s, &v.column(k), &u.column(k), 1.0);
        }
    }
    out
}

/// Stacks matrices vertically. All inputs must share the column count.
pub fn vstack(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        debug_assert_eq!(b.ncols(), cols);
        out.rows_mut(r, b.nrows()).copy_from(*b);
        r += b.nrows();
    }
    out
}

/// Concatenates matrices horizontally. All inputs must share the row count.
pub fn hstack(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        debug_assert_eq!(b.nrows(), rows);
        out.columns_mut(c, b.ncols()).copy_from(*b);
        c += b.ncols();
    }
    out
}
