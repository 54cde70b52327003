//! Multichannel time-series datasets and rolling experiment windows.
//!
//! A [`Dataset`] holds control inputs `u`, structured (measured) disturbances
//! `w_s` and outputs `y` on a uniform time grid. Matrices are stored with one
//! row per time step and one column per channel. The stacked input
//! `ũ = [u; w_s]` is what every estimator consumes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TIMESTAMP_COLUMN: &str = "timestamp";

const SPACING_RTOL: f64 = 1e-6;

/// Column names mapped onto the three channel groups.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub u: Vec<String>,
    #[serde(default)]
    pub w_s: Vec<String>,
    pub y: Vec<String>,
}

impl Schema {
    pub fn new<S: AsRef<str>>(u: &[S], w_s: &[S], y: &[S]) -> Self {
        let own = |v: &[S]| v.iter().map(|s| s.as_ref().to_string()).collect();
        Schema {
            u: own(u),
            w_s: own(w_s),
            y: own(y),
        }
    }

    /// Infers a schema from a header using the `u*`, `ws*` and `y*` name prefixes.
    pub fn infer(header: &[String]) -> Self {
        let mut schema = Schema::default();
        for name in header.iter().filter(|n| n.as_str() != TIMESTAMP_COLUMN) {
            if name.starts_with("ws") {
                schema.w_s.push(name.clone());
            } else if name.starts_with('u') {
                schema.u.push(name.clone());
            } else if name.starts_with('y') {
                schema.y.push(name.clone());
            }
        }
        schema
    }
}

/// Aligned inputs, structured disturbances and outputs on a uniform grid.
///
/// Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    timestamps: Vec<f64>,
    u: DMatrix<f64>,
    w_s: DMatrix<f64>,
    y: DMatrix<f64>,
    sample_period: f64,
    schema: Schema,
}

impl Dataset {
    pub fn new(
        timestamps: Vec<f64>,
        u: DMatrix<f64>,
        w_s: DMatrix<f64>,
        y: DMatrix<f64>,
        sample_period: f64,
        schema: Schema,
    ) -> Result<Self> {
        let len = timestamps.len();
        if len == 0 {
            return Err(Error::Validation(
                "dataset must contain at least one step".into(),
            ));
        }
        for (name, m) in [("u", &u), ("w_s", &w_s), ("y", &y)] {
            if m.nrows() != len {
                return Err(Error::Validation(format!(
                    "channel group {name} has {} steps, timestamps have {len}",
                    m.nrows()
                )));
            }
        }
        if u.ncols() != schema.u.len()
            || w_s.ncols() != schema.w_s.len()
            || y.ncols() != schema.y.len()
        {
            return Err(Error::Validation(
                "channel counts do not match schema names".into(),
            ));
        }
        if !(sample_period.is_finite() && sample_period > 0.0) {
            return Err(Error::Validation(format!(
                "sample period must be positive, got {sample_period}"
            )));
        }
        for (i, w) in timestamps.windows(2).enumerate() {
            let dt = w[1] - w[0];
            if !dt.is_finite() || (dt - sample_period).abs() > SPACING_RTOL * sample_period {
                return Err(Error::Validation(format!(
                    "non-uniform timestamps between rows {} and {}: spacing {dt}, expected {sample_period}",
                    i + 1,
                    i + 2
                )));
            }
        }
        for (name, m) in [("u", &u), ("w_s", &w_s), ("y", &y)] {
            if let Some(idx) = m.iter().position(|v| !v.is_finite()) {
                // column-major storage
                let row = idx % len;
                return Err(Error::Validation(format!(
                    "non-finite value in channel group {name} at row {}",
                    row + 1
                )));
            }
        }
        Ok(Dataset {
            timestamps,
            u,
            w_s,
            y,
            sample_period,
            schema,
        })
    }

    /// Builds a dataset on the grid `0, period, 2·period, ...` with generated channel names.
    pub fn from_channels(
        u: DMatrix<f64>,
        w_s: DMatrix<f64>,
        y: DMatrix<f64>,
        sample_period: f64,
    ) -> Result<Self> {
        let len = y.nrows();
        let names = |prefix: &str, n: usize| -> Vec<String> {
            (1..=n).map(|i| format!("{prefix}{i}")).collect()
        };
        let schema = Schema {
            u: names("u", u.ncols()),
            w_s: names("ws", w_s.ncols()),
            y: names("y", y.ncols()),
        };
        let timestamps = (0..len).map(|k| k as f64 * sample_period).collect();
        Dataset::new(timestamps, u, w_s, y, sample_period, schema)
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn w_s(&self) -> &DMatrix<f64> {
        &self.w_s
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_u(&self) -> usize {
        self.u.ncols()
    }

    pub fn n_ws(&self) -> usize {
        self.w_s.ncols()
    }

    /// Dimension of the stacked input `ũ = [u; w_s]`.
    pub fn n_ut(&self) -> usize {
        self.n_u() + self.n_ws()
    }

    pub fn n_y(&self) -> usize {
        self.y.ncols()
    }

    /// Stacked input `ũ`, one row per step, `u` columns first.
    pub fn u_tilde(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.len(), self.n_ut());
        out.columns_mut(0, self.n_u()).copy_from(&self.u);
        out.columns_mut(self.n_u(), self.n_ws())
            .copy_from(&self.w_s);
        out
    }

    /// Keeps only the named structured-disturbance channels, in the given order.
    pub fn select_ws<S: AsRef<str>>(&self, names: &[S]) -> Result<Dataset> {
        let mut cols = Vec::with_capacity(names.len());
        for name in names {
            let name = name.as_ref();
            let idx = self
                .schema
                .w_s
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::Schema {
                    column: name.to_string(),
                })?;
            cols.push(idx);
        }
        let w_s = self.w_s.select_columns(cols.iter());
        let schema = Schema {
            w_s: cols.iter().map(|&i| self.schema.w_s[i].clone()).collect(),
            ..self.schema.clone()
        };
        Ok(Dataset {
            w_s,
            schema,
            ..self.clone()
        })
    }

    /// Writes the dataset as CSV. Values use shortest round-trip formatting, so
    /// reloading reproduces every value bit-exactly.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut header = vec![TIMESTAMP_COLUMN.to_string()];
        header.extend(self.schema.u.iter().cloned());
        header.extend(self.schema.w_s.iter().cloned());
        header.extend(self.schema.y.iter().cloned());
        let write_err = |e| Error::io(path, e);
        writeln!(w, "{}", header.join(",")).map_err(write_err)?;
        for k in 0..self.len() {
            let mut line = format!("{}", self.timestamps[k]);
            for m in [&self.u, &self.w_s, &self.y] {
                for c in 0..m.ncols() {
                    line.push(',');
                    line.push_str(&format!("{}", m[(k, c)]));
                }
            }
            writeln!(w, "{line}").map_err(write_err)?;
        }
        w.flush().map_err(write_err)
    }
}

/// Reads the CSV header only.
pub fn read_header(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = reader.headers().map_err(|e| csv_err(path, e))?;
    Ok(header.iter().map(|s| s.trim().to_string()).collect())
}

/// Loads a CSV file whose first column is `timestamp` (epoch seconds).
///
/// Rows in the error messages are 1-based data rows, not counting the header.
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.first().map(String::as_str) != Some(TIMESTAMP_COLUMN) {
        return Err(Error::Schema {
            column: TIMESTAMP_COLUMN.into(),
        });
    }
    let lookup = |names: &[String]| -> Result<Vec<usize>> {
        names
            .iter()
            .map(|n| {
                header
                    .iter()
                    .position(|h| h == n)
                    .ok_or_else(|| Error::Schema { column: n.clone() })
            })
            .collect()
    };
    let groups = [lookup(&schema.u)?, lookup(&schema.w_s)?, lookup(&schema.y)?];

    let mut timestamps = Vec::new();
    let mut values: [Vec<f64>; 3] = Default::default();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        let cell = |col: usize| -> Result<f64> {
            let raw = record.get(col).unwrap_or("");
            let v: f64 = raw.parse().map_err(|_| Error::Parse {
                row,
                column: header[col].clone(),
                message: format!("`{raw}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: header[col].clone(),
                    message: format!("non-finite value `{raw}`"),
                });
            }
            Ok(v)
        };
        timestamps.push(cell(0)?);
        for (g, cols) in groups.iter().enumerate() {
            for &c in cols {
                values[g].push(cell(c)?);
            }
        }
    }
    let len = timestamps.len();
    let [u, w_s, y] = values;
    let to_matrix = |data: Vec<f64>, ncols: usize| DMatrix::from_row_iterator(len, ncols, data);
    let sample_period = if len >= 2 {
        timestamps[1] - timestamps[0]
    } else {
        1.0
    };
    Dataset::new(
        timestamps,
        to_matrix(u, schema.u.len()),
        to_matrix(w_s, schema.w_s.len()),
        to_matrix(y, schema.y.len()),
        sample_period,
        schema.clone(),
    )
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Validation(format!("{}: {other:?}", path.display())),
    }
}

/// Index bookkeeping of a window: prediction time `t`, data length `T`, lag and horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowIndex {
    pub t: usize,
    #[serde(rename = "T")]
    pub data_len: usize,
    pub lag: usize,
    pub horizon: usize,
}

/// The data available at prediction time `t`.
///
/// `past_*` cover steps `[t−T−ℓ, t−1]` (so `T+ℓ` rows), the future covers
/// `[t, t+N−1]`. `z0` stacks the last `ℓ` inputs, then the last `ℓ` outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentWindow {
    pub past_inputs: DMatrix<f64>,
    pub past_outputs: DMatrix<f64>,
    pub z0: DVector<f64>,
    pub future_inputs: DMatrix<f64>,
    pub future_truth: Option<DMatrix<f64>>,
    pub index: WindowIndex,
}

impl ExperimentWindow {
    /// Window for pure prediction: past data from `ds`, future inputs supplied by the caller.
    pub fn for_prediction(
        ds: &Dataset,
        t: usize,
        data_len: usize,
        lag: usize,
        future_inputs: DMatrix<f64>,
    ) -> Result<Self> {
        let horizon = future_inputs.nrows();
        if future_inputs.ncols() != ds.n_ut() {
            return Err(Error::Dimension(format!(
                "future inputs have {} channels, dataset has {}",
                future_inputs.ncols(),
                ds.n_ut()
            )));
        }
        check_past_range(ds, t, data_len, lag, horizon)?;
        Ok(Self::assemble(ds, t, data_len, lag, future_inputs, None))
    }

    fn assemble(
        ds: &Dataset,
        t: usize,
        data_len: usize,
        lag: usize,
        future_inputs: DMatrix<f64>,
        future_truth: Option<DMatrix<f64>>,
    ) -> Self {
        let start = t - data_len - lag;
        let ut = ds.u_tilde();
        let past_inputs = ut.rows(start, data_len + lag).into_owned();
        let past_outputs = ds.y().rows(start, data_len + lag).into_owned();
        let z0 = stack_initial_condition(&past_inputs, &past_outputs, lag);
        let horizon = future_inputs.nrows();
        ExperimentWindow {
            past_inputs,
            past_outputs,
            z0,
            future_inputs,
            future_truth,
            index: WindowIndex {
                t,
                data_len,
                lag,
                horizon,
            },
        }
    }

    pub fn n_ut(&self) -> usize {
        self.past_inputs.ncols()
    }

    pub fn n_y(&self) -> usize {
        self.past_outputs.ncols()
    }

    /// `n_z = ℓ(n_ũ + n_y)`.
    pub fn n_z(&self) -> usize {
        self.index.lag * (self.n_ut() + self.n_y())
    }

    /// Minimum `T` for which the excitation condition of order `N + n_z` on
    /// `(ũ, v̂)` can hold at all: the Hankel must have at least as many
    /// columns as rows.
    pub fn min_data_len(&self) -> usize {
        min_data_len(self.index.horizon, self.n_z(), self.n_ut() + self.n_y())
    }

    /// Future inputs stacked step by step into an `N·n_ũ` vector.
    pub fn future_inputs_vec(&self) -> DVector<f64> {
        stack_rows(&self.future_inputs)
    }

    /// Future truth stacked step by step into an `N·n_y` vector.
    pub fn future_truth_vec(&self) -> Option<DVector<f64>> {
        self.future_truth.as_ref().map(stack_rows)
    }
}

/// `(N + n_z)(n_ũ + n_y) + N + n_z − 1`.
pub fn min_data_len(horizon: usize, n_z: usize, signal_dim: usize) -> usize {
    (horizon + n_z) * signal_dim + horizon + n_z - 1
}

/// Slices the window at prediction time `t` out of `ds`.
pub fn make_window(
    ds: &Dataset,
    t: usize,
    data_len: usize,
    lag: usize,
    horizon: usize,
) -> Result<ExperimentWindow> {
    check_past_range(ds, t, data_len, lag, horizon)?;
    if t + horizon > ds.len() {
        return Err(Error::Bounds(format!(
            "future [{t}, {}] exceeds dataset length {}",
            t + horizon - 1,
            ds.len()
        )));
    }
    let future_inputs = ds.u_tilde().rows(t, horizon).into_owned();
    let future_truth = ds.y().rows(t, horizon).into_owned();
    Ok(ExperimentWindow::assemble(
        ds,
        t,
        data_len,
        lag,
        future_inputs,
        Some(future_truth),
    ))
}

fn check_past_range(
    ds: &Dataset,
    t: usize,
    data_len: usize,
    lag: usize,
    horizon: usize,
) -> Result<()> {
    if data_len == 0 || lag == 0 || horizon == 0 {
        return Err(Error::Bounds(format!(
            "T, lag and N must be positive (T={data_len}, lag={lag}, N={horizon})"
        )));
    }
    if t < data_len + lag {
        return Err(Error::Bounds(format!(
            "window start t−T−ℓ = {t}−{data_len}−{lag} is negative"
        )));
    }
    if t > ds.len() {
        return Err(Error::Bounds(format!(
            "prediction time {t} beyond dataset length {}",
            ds.len()
        )));
    }
    Ok(())
}

/// `[ũ(t−ℓ); …; ũ(t−1); y(t−ℓ); …; y(t−1)]` from the tail of the past data.
pub fn stack_initial_condition(
    past_inputs: &DMatrix<f64>,
    past_outputs: &DMatrix<f64>,
    lag: usize,
) -> DVector<f64> {
    let len = past_inputs.nrows();
    let tail_u = past_inputs.rows(len - lag, lag).into_owned();
    let tail_y = past_outputs.rows(len - lag, lag).into_owned();
    let mut z = stack_rows(&tail_u).as_slice().to_vec();
    z.extend_from_slice(stack_rows(&tail_y).as_slice());
    DVector::from_vec(z)
}

/// Concatenates the rows of a (steps × channels) matrix into one vector.
pub fn stack_rows(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(
        m.nrows() * m.ncols(),
        (0..m.nrows()).flat_map(|r| (0..m.ncols()).map(move |c| m[(r, c)])),
    )
}

/// Inverse of [`stack_rows`].
pub fn unstack_rows(v: &DVector<f64>, ncols: usize) -> DMatrix<f64> {
    let nrows = v.len().checked_div(ncols).unwrap_or(0);
    DMatrix::from_row_slice(nrows, ncols, v.as_slice())
}
