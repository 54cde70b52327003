//! Rolling-horizon experiments and their reports.
//!
//! Every `stride` steps a window of `T + ℓ` past samples is cut from the
//! dataset, residuals are estimated on it, both predictors are built and the
//! next `N` outputs are predicted with confidence radii per bound family. The
//! summary aggregates RMSE, coverage and mean radius over all scenarios.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{check_gamma, radius, BoundFamily, BoundSpec};
use crate::data::{make_window, unstack_rows, Dataset};
use crate::error::{Error, Result};
use crate::hankel::DEFAULT_RANK_TOL;
use crate::predictor::{
    build_predictors, predict_causal, predict_subspace, ExcitationCheck, PredictorOptions,
};
use crate::residual::ResidualModel;

fn default_data_len() -> usize {
    2880
}
fn default_horizon() -> usize {
    96
}
fn default_lag() -> usize {
    4
}
fn default_stride() -> usize {
    24
}
fn default_gamma() -> f64 {
    0.9
}
fn default_bounds() -> Vec<BoundFamily> {
    BoundFamily::ALL.to_vec()
}
fn default_rank_tol() -> f64 {
    DEFAULT_RANK_TOL
}
fn default_parallel() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(rename = "T", default = "default_data_len")]
    pub data_len: usize,
    #[serde(rename = "N", default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_lag")]
    pub lag: usize,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_bounds")]
    pub bounds: Vec<BoundFamily>,
    /// Structured-disturbance channels to keep; `None` keeps all of them,
    /// an empty list drops them.
    #[serde(default)]
    pub ws_channels: Option<Vec<String>>,
    #[serde(default = "default_rank_tol")]
    pub rank_tol: f64,
    #[serde(default)]
    pub excitation: ExcitationCheck,
    /// Limits the number of scenarios (earliest first).
    #[serde(default)]
    pub max_scenarios: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_parallel")]
    pub parallel: bool,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data_len: default_data_len(),
            horizon: default_horizon(),
            lag: default_lag(),
            stride: default_stride(),
            gamma: default_gamma(),
            bounds: default_bounds(),
            ws_channels: None,
            rank_tol: default_rank_tol(),
            excitation: ExcitationCheck::default(),
            max_scenarios: None,
            seed: 0,
            parallel: true,
            out: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("T", self.data_len),
            ("N", self.horizon),
            ("lag", self.lag),
            ("stride", self.stride),
        ] {
            if v == 0 {
                return Err(Error::Validation(format!("{name} must be at least 1")));
            }
        }
        check_gamma(self.gamma)?;
        if !(self.rank_tol > 0.0 && self.rank_tol < 1.0) {
            return Err(Error::Validation(format!(
                "rank_tol {} not in (0, 1)",
                self.rank_tol
            )));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Bound families in canonical order without duplicates.
    pub fn families(&self) -> Vec<BoundFamily> {
        let mut f = self.bounds.clone();
        f.sort();
        f.dedup();
        f
    }

    /// Prediction times `T + ℓ, T + ℓ + stride, …` whose horizon fits in `len` steps.
    pub fn scenario_times(&self, len: usize) -> Vec<usize> {
        let first = self.data_len + self.lag;
        let mut ts: Vec<usize> = (first..)
            .step_by(self.stride)
            .take_while(|t| t + self.horizon <= len)
            .collect();
        if let Some(m) = self.max_scenarios {
            ts.truncate(m);
        }
        ts
    }
}

/// Predictions of one scenario, every matrix `N × n_y`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub t: usize,
    pub mean: DMatrix<f64>,
    pub truth: DMatrix<f64>,
    pub subspace: DMatrix<f64>,
    pub variance: DMatrix<f64>,
    pub fourth_moment: DMatrix<f64>,
    pub radii: BTreeMap<BoundFamily, DMatrix<f64>>,
}

impl ScenarioResult {
    /// `Σ_k ‖ŷ⁰(k|t) − y(t+k)‖²`.
    pub fn squared_error(&self) -> f64 {
        (&self.mean - &self.truth).norm_squared()
    }

    pub fn subspace_squared_error(&self) -> f64 {
        (&self.subspace - &self.truth).norm_squared()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedScenario {
    pub t: usize,
    pub kind: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioOutcome {
    Done(Box<ScenarioResult>),
    Skipped(SkippedScenario),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub family: BoundFamily,
    pub rmse: Option<f64>,
    pub coverage: Option<f64>,
    pub mean_radius: Option<f64>,
}

/// The deterministic subspace predictor: radius 0, no coverage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceRow {
    pub rmse: Option<f64>,
    pub mean_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub scenarios: usize,
    pub skipped: Vec<SkippedScenario>,
    pub gamma: f64,
    pub subspace: SubspaceRow,
    pub bounds: Vec<BoundRow>,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub outcomes: Vec<ScenarioOutcome>,
    pub summary: SummaryReport,
    pub output_names: Vec<String>,
}

impl ExperimentOutput {
    pub fn results(&self) -> impl Iterator<Item = &ScenarioResult> {
        self.outcomes.iter().filter_map(|o| match o {
            ScenarioOutcome::Done(r) => Some(r.as_ref()),
            ScenarioOutcome::Skipped(_) => None,
        })
    }
}

/// Runs every scenario of `config` on `ds`.
pub fn run(config: &ExperimentConfig, ds: &Dataset) -> Result<ExperimentOutput> {
    config.validate()?;
    let ds = match &config.ws_channels {
        Some(names) => ds.select_ws(names)?,
        None => ds.clone(),
    };
    let ts = config.scenario_times(ds.len());
    if ts.is_empty() {
        return Err(Error::Bounds(format!(
            "dataset of {} steps holds no window with T = {}, lag = {}, N = {}",
            ds.len(),
            config.data_len,
            config.lag,
            config.horizon
        )));
    }
    let families = config.families();
    let opts = PredictorOptions {
        excitation: config.excitation,
        rank_tol: config.rank_tol,
    };
    let one = |t: usize| match run_scenario(config, &ds, t, &families, &opts) {
        Ok(r) => ScenarioOutcome::Done(Box::new(r)),
        Err(e) => ScenarioOutcome::Skipped(SkippedScenario {
            t,
            kind: e.kind().to_string(),
            reason: e.to_string(),
        }),
    };
    let outcomes: Vec<ScenarioOutcome> = if config.parallel {
        ts.par_iter().map(|&t| one(t)).collect()
    } else {
        ts.iter().map(|&t| one(t)).collect()
    };
    let summary = summarize(config, &outcomes);
    Ok(ExperimentOutput {
        outcomes,
        summary,
        output_names: ds.schema().y.clone(),
    })
}

/// Prediction and radii for the scenario at time `t`.
pub fn run_scenario(
    config: &ExperimentConfig,
    ds: &Dataset,
    t: usize,
    families: &[BoundFamily],
    opts: &PredictorOptions,
) -> Result<ScenarioResult> {
    let window = make_window(ds, t, config.data_len, config.lag, config.horizon)?;
    let rm = ResidualModel::estimate(&window.past_inputs, &window.past_outputs, config.lag)?;
    let (op, sp) = build_predictors(&window, &rm, opts)?;
    let uf = window.future_inputs_vec();
    let pred = predict_causal(&op, &window.z0, &uf, &rm)?;
    let n_y = ds.n_y();
    let mu2 = pred.variances()?;
    let mu4 = pred.fourth_moments()?;
    let mut radii = BTreeMap::new();
    for &family in families {
        let spec = BoundSpec::new(family, config.gamma)?;
        let r = mu2
            .iter()
            .zip(mu4.iter())
            .map(|(&m2, &m4)| radius(&spec, m2, m4))
            .collect::<Result<Vec<_>>>()?;
        radii.insert(family, unstack_rows(&DVector::from_vec(r), n_y));
    }
    let subspace = predict_subspace(&sp, &window.z0, &uf)?;
    Ok(ScenarioResult {
        t,
        mean: unstack_rows(&pred.mean(), n_y),
        truth: window
            .future_truth
            .clone()
            .expect("experiment windows carry the truth"),
        subspace: unstack_rows(&subspace, n_y),
        variance: unstack_rows(&mu2, n_y),
        fourth_moment: unstack_rows(&mu4, n_y),
        radii,
    })
}

/// `√(Σ errors / count)`, or `None` without samples.
pub fn rmse_bar(squared_errors: &[f64], count: usize) -> Option<f64> {
    (count > 0).then(|| (squared_errors.iter().sum::<f64>() / count as f64).sqrt())
}

/// Fraction of entries with `|truth − mean| ≤ radius`.
pub fn coverage<'a>(
    triples: impl IntoIterator<Item = (&'a DMatrix<f64>, &'a DMatrix<f64>, &'a DMatrix<f64>)>,
) -> Option<f64> {
    let (mut hit, mut n) = (0usize, 0usize);
    for (truth, mean, rad) in triples {
        for ((y, m), r) in truth.iter().zip(mean.iter()).zip(rad.iter()) {
            n += 1;
            if (y - m).abs() <= *r {
                hit += 1;
            }
        }
    }
    (n > 0).then(|| hit as f64 / n as f64)
}

fn summarize(config: &ExperimentConfig, outcomes: &[ScenarioOutcome]) -> SummaryReport {
    let done: Vec<&ScenarioResult> = outcomes
        .iter()
        .filter_map(|o| match o {
            ScenarioOutcome::Done(r) => Some(r.as_ref()),
            ScenarioOutcome::Skipped(_) => None,
        })
        .collect();
    let skipped = outcomes
        .iter()
        .filter_map(|o| match o {
            ScenarioOutcome::Skipped(s) => Some(s.clone()),
            ScenarioOutcome::Done(_) => None,
        })
        .collect();
    // RMSE-bar averages over N·N_s predictions of the full output vector
    let count = done.len() * config.horizon;
    let errs: Vec<f64> = done.iter().map(|r| r.squared_error()).collect();
    let sp_errs: Vec<f64> = done.iter().map(|r| r.subspace_squared_error()).collect();
    let rmse = rmse_bar(&errs, count);
    let bounds = config
        .families()
        .into_iter()
        .map(|family| {
            let cov = coverage(done.iter().map(|r| (&r.truth, &r.mean, &r.radii[&family])));
            let entries: usize = done.iter().map(|r| r.radii[&family].len()).sum();
            let mean_radius = (entries > 0)
                .then(|| done.iter().map(|r| r.radii[&family].sum()).sum::<f64>() / entries as f64);
            BoundRow {
                family,
                rmse,
                coverage: cov,
                mean_radius,
            }
        })
        .collect();
    SummaryReport {
        scenarios: done.len(),
        skipped,
        gamma: config.gamma,
        subspace: SubspaceRow {
            rmse: rmse_bar(&sp_errs, count),
            mean_radius: 0.0,
        },
        bounds,
        config: config.clone(),
    }
}

/// Writes `summary.json`, `scenarios.csv` and `config.json` into `outdir`.
pub fn emit_reports(output: &ExperimentOutput, outdir: impl AsRef<Path>) -> Result<()> {
    let outdir = outdir.as_ref();
    fs::create_dir_all(outdir).map_err(|e| Error::io(outdir, e))?;
    let write_json = |name: &str, text: String| -> Result<()> {
        let p = outdir.join(name);
        fs::write(&p, text + "\n").map_err(|e| Error::io(&p, e))
    };
    write_json(
        "summary.json",
        serde_json::to_string_pretty(&output.summary)?,
    )?;
    write_json(
        "config.json",
        serde_json::to_string_pretty(&output.summary.config)?,
    )?;

    let path = outdir.join("scenarios.csv");
    let csv_err = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(&path, io),
        other => Error::Validation(format!("{}: {other:?}", path.display())),
    };
    let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
    let families = output.summary.config.families();
    let mut header: Vec<String> = ["t", "k", "output", "truth", "mean", "subspace"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(families.iter().map(|f| format!("radius_{f}")));
    w.write_record(&header).map_err(csv_err)?;
    for r in output.results() {
        for k in 0..r.mean.nrows() {
            for (i, name) in output.output_names.iter().enumerate() {
                let mut rec = vec![
                    r.t.to_string(),
                    k.to_string(),
                    name.clone(),
                    r.truth[(k, i)].to_string(),
                    r.mean[(k, i)].to_string(),
                    r.subspace[(k, i)].to_string(),
                ];
                rec.extend(families.iter().map(|f| r.radii[f][(k, i)].to_string()));
                w.write_record(&rec).map_err(csv_err)?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{random_arx, simulate_arx, stream_rng, uniform_inputs, ArxDims, NoiseSpec};
    use nalgebra::dmatrix;

    fn scenario(t: usize, truth: DMatrix<f64>, mean: DMatrix<f64>, r: f64) -> ScenarioResult {
        let shape = truth.shape();
        let mut radii = BTreeMap::new();
        radii.insert(
            BoundFamily::Cheb4,
            DMatrix::from_element(shape.0, shape.1, r),
        );
        ScenarioResult {
            t,
            subspace: mean.clone(),
            variance: DMatrix::zeros(shape.0, shape.1),
            fourth_moment: DMatrix::zeros(shape.0, shape.1),
            mean,
            truth,
            radii,
        }
    }

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            data_len: 200,
            horizon: 5,
            lag: 1,
            stride: 15,
            ..Default::default()
        }
    }

    fn synthetic(n_ws: usize, seed: u64) -> Dataset {
        let dims = ArxDims {
            n_u: 1,
            n_ws,
            n_y: 2,
        };
        let truth = random_arx(dims, 1, 0.2, NoiseSpec::gaussian(vec![0.2, 0.1]), seed).unwrap();
        let mut rng = stream_rng(seed, "inputs");
        simulate_arx(
            &truth,
            &uniform_inputs(320, dims.n_ut(), &mut rng),
            seed,
            900.0,
        )
        .unwrap()
        .dataset
    }

    #[test]
    fn rmse_example() {
        let a = scenario(0, dmatrix![0.0], dmatrix![0.0], 1.0);
        let b = scenario(1, dmatrix![2.0], dmatrix![0.0], 1.0);
        let errs = [a.squared_error(), b.squared_error()];
        assert!((rmse_bar(&errs, 2).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(rmse_bar(&[], 0), None);
    }

    #[test]
    fn coverage_example() {
        let a = scenario(0, dmatrix![0.0], dmatrix![0.0], 1.0);
        let b = scenario(1, dmatrix![5.0], dmatrix![0.0], 1.0);
        let c = coverage(
            [&a, &b]
                .iter()
                .map(|r| (&r.truth, &r.mean, &r.radii[&BoundFamily::Cheb4])),
        );
        assert_eq!(c, Some(0.5));
    }

    #[test]
    fn scenario_times_follow_stride() {
        let cfg = small_config();
        assert_eq!(cfg.scenario_times(230), vec![201, 216]);
        assert!(cfg.scenario_times(205).is_empty());
        let capped = ExperimentConfig {
            max_scenarios: Some(1),
            ..cfg
        };
        assert_eq!(capped.scenario_times(230), vec![201]);
    }

    #[test]
    fn config_defaults_and_json() {
        let cfg: ExperimentConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(
            (cfg.data_len, cfg.horizon, cfg.lag, cfg.stride),
            (2880, 96, 4, 24)
        );
        let cfg: ExperimentConfig =
            serde_json::from_str(r#"{"T": 10, "N": 2, "bounds": ["gauss"], "ws_channels": []}"#)
                .unwrap();
        assert_eq!(cfg.bounds, vec![BoundFamily::Gauss]);
        assert_eq!(cfg.ws_channels, Some(vec![]));
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"horizon": 3}"#).is_err());
        let bad = ExperimentConfig {
            gamma: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn run_produces_consistent_summary() {
        let ds = synthetic(1, 5);
        let out = run(&small_config(), &ds).unwrap();
        let s = &out.summary;
        assert_eq!(
            s.scenarios + s.skipped.len(),
            small_config().scenario_times(ds.len()).len()
        );
        assert!(s.scenarios > 0, "{:?}", s.skipped);
        for row in &s.bounds {
            let c = row.coverage.unwrap();
            assert!((0.0..=1.0).contains(&c));
            assert!(row.mean_radius.unwrap() >= 0.0);
        }
        let cov: Vec<f64> = s.bounds.iter().map(|b| b.coverage.unwrap()).collect();
        assert!(cov[0] >= cov[1] && cov[1] >= cov[2]);
    }

    #[test]
    fn parallel_equals_serial_and_reruns_are_identical() {
        let ds = synthetic(1, 6);
        let par = run(&small_config(), &ds).unwrap();
        let ser = run(
            &ExperimentConfig {
                parallel: false,
                ..small_config()
            },
            &ds,
        )
        .unwrap();
        assert_eq!(par.outcomes, ser.outcomes);

        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        emit_reports(&par, d1.path()).unwrap();
        emit_reports(&run(&small_config(), &ds).unwrap(), d2.path()).unwrap();
        for f in ["summary.json", "scenarios.csv", "config.json"] {
            assert_eq!(
                fs::read(d1.path().join(f)).unwrap(),
                fs::read(d2.path().join(f)).unwrap(),
                "{f}"
            );
        }
    }

    #[test]
    fn csv_shape_for_single_family() {
        let out = ExperimentOutput {
            outcomes: vec![ScenarioOutcome::Done(Box::new(scenario(
                7,
                dmatrix![1.0; 2.0],
                dmatrix![1.5; 2.5],
                0.25,
            )))],
            summary: summarize(
                &ExperimentConfig {
                    horizon: 2,
                    bounds: vec![BoundFamily::Cheb4],
                    ..Default::default()
                },
                &[],
            ),
            output_names: vec!["y1".into()],
        };
        let dir = tempfile::tempdir().unwrap();
        emit_reports(&out, dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join("scenarios.csv")).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,k,output,truth,mean,subspace,radius_cheb4");
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[2], "7,1,y1,2,2.5,2.5,0.25");
    }

    #[test]
    fn empty_summary_has_null_metrics() {
        let cfg = ExperimentConfig::default();
        let s = summarize(&cfg, &[]);
        assert_eq!(s.scenarios, 0);
        let v = serde_json::to_value(&s).unwrap();
        assert!(v["bounds"][0]["coverage"].is_null());
        assert!(v["bounds"][0]["rmse"].is_null());
        assert!(v["subspace"].get("coverage").is_none());
        assert_eq!(v["subspace"]["mean_radius"], 0.0);
    }

    #[test]
    fn summary_recomputes_from_csv() {
        let ds = synthetic(1, 8);
        let cfg = small_config();
        let out = run(&cfg, &ds).unwrap();
        let dir = tempfile::tempdir().unwrap();
        emit_reports(&out, dir.path()).unwrap();
        let mut rdr = csv::Reader::from_path(dir.path().join("scenarios.csv")).unwrap();
        let (mut sq, mut sq_sp, mut rows) = (0.0, 0.0, 0usize);
        let mut hits = [0usize; 3];
        let mut rad = [0.0f64; 3];
        for rec in rdr.records() {
            let rec = rec.unwrap();
            let f = |i: usize| rec[i].parse::<f64>().unwrap();
            let (y, m, s) = (f(3), f(4), f(5));
            sq += (y - m).powi(2);
            sq_sp += (y - s).powi(2);
            for j in 0..3 {
                rad[j] += f(6 + j);
                if (y - m).abs() <= f(6 + j) {
                    hits[j] += 1;
                }
            }
            rows += 1;
        }
        let s = &out.summary;
        let count = (s.scenarios * cfg.horizon) as f64;
        assert!((s.bounds[0].rmse.unwrap() - (sq / count).sqrt()).abs() <= 1e-9);
        assert!((s.subspace.rmse.unwrap() - (sq_sp / count).sqrt()).abs() <= 1e-9);
        for j in 0..3 {
            assert!((s.bounds[j].coverage.unwrap() - hits[j] as f64 / rows as f64).abs() <= 1e-9);
            assert!((s.bounds[j].mean_radius.unwrap() - rad[j] / rows as f64).abs() <= 1e-9);
        }
    }

    #[test]
    fn dropping_structured_channels_still_runs() {
        let ds = synthetic(2, 9);
        let cfg = ExperimentConfig {
            ws_channels: Some(vec![]),
            ..small_config()
        };
        let out = run(&cfg, &ds).unwrap();
        assert!(out.summary.scenarios > 0);
        let unknown = ExperimentConfig {
            ws_channels: Some(vec!["nope".into()]),
            ..small_config()
        };
        assert_eq!(run(&unknown, &ds).unwrap_err().kind(), "schema");
    }

    #[test]
    fn infeasible_windows_are_skipped() {
        let ds = synthetic(0, 10);
        let cfg = ExperimentConfig {
            data_len: 30,
            horizon: 20,
            lag: 1,
            stride: 100,
            ..Default::default()
        };
        let out = run(&cfg, &ds).unwrap();
        assert_eq!(out.summary.scenarios, 0);
        assert!(!out.summary.skipped.is_empty());
        assert_eq!(out.summary.skipped[0].kind, "dimension");
        assert!(out.summary.bounds[0].coverage.is_none());
    }
}
