//! Acceptance property suite.
//!
//! Each check builds its own seeded synthetic scenario and returns a
//! [`CriterionOutcome`] with the measured quantities, so the same suite backs
//! the `check` subcommand and the `acceptance` test target.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bounds::{normal_quantile, radius, BoundFamily, BoundSpec};
use crate::data::{
    load_csv, make_window, read_header, stack_rows, Dataset, ExperimentWindow, Schema,
};
use crate::error::Result;
use crate::experiment::{emit_reports, run, ExperimentConfig, ExperimentOutput};
use crate::pce::{central_moments, moment2n, moment4, PceBasis};
use crate::predictor::{
    build_predictors, predict_causal, predict_subspace, ExcitationCheck, PredictorOperator,
    PredictorOptions, SubspacePredictor, WindowHankels, MEMBERSHIP_TOL,
};
use crate::residual::ResidualModel;
use crate::synth::{
    random_arx, simulate_arx, stream_rng, uniform_inputs, ArxDims, ArxTruth, NoiseSpec, Simulation,
};
use crate::wasserstein::wasserstein2_1d;

/// Environment variable naming a real dataset for criterion 9.
pub const DATASET_ENV: &str = "STOCHPRED_DATASET";

const ROOT_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// The criterion's precondition (e.g. a supplied dataset) is absent.
    Skip,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        })
    }
}

#[derive(Debug, Clone)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {} [{}] {}: {} ({:.2}s)",
            self.id,
            self.status,
            self.name,
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

fn outcome(
    id: u8,
    name: &'static str,
    start: Instant,
    res: Result<(bool, String)>,
) -> CriterionOutcome {
    let (status, detail) = match res {
        Ok((ok, d)) => (if ok { Status::Pass } else { Status::Fail }, d),
        Err(e) => (Status::Fail, format!("error: {e}")),
    };
    CriterionOutcome {
        id,
        name,
        status,
        detail,
        elapsed: start.elapsed(),
    }
}

/// Dataset path for criterion 9 from the environment, if set.
pub fn dataset_from_env() -> Option<PathBuf> {
    std::env::var_os(DATASET_ENV).map(PathBuf::from)
}

/// Runs criteria 1–9 in order.
pub fn run_all(dataset: Option<&Path>) -> Vec<CriterionOutcome> {
    vec![
        noise_free_exactness(),
        consistency_trend(),
        distributional_consistency(),
        moment_engine(),
        bound_constants(),
        coverage_validity(),
        causality(),
        behavior_membership(),
        dataset_pipeline(dataset),
    ]
}

/// Seeded system, simulated dataset and the window at `t = len − N`.
struct Scenario {
    truth: ArxTruth,
    window: ExperimentWindow,
}

fn scenario(
    dims: ArxDims,
    lag: usize,
    sigma: f64,
    data_len: usize,
    horizon: usize,
    seed: u64,
) -> Result<Scenario> {
    let truth = random_arx(
        dims,
        lag,
        0.2,
        NoiseSpec::gaussian(vec![sigma; dims.n_y]),
        seed,
    )?;
    let len = data_len + lag + horizon + 100;
    let mut rng = stream_rng(seed, "inputs");
    let sim = simulate_arx(
        &truth,
        &uniform_inputs(len, dims.n_ut(), &mut rng),
        seed,
        1.0,
    )?;
    let window = make_window(&sim.dataset, len - horizon, data_len, lag, horizon)?;
    Ok(Scenario { truth, window })
}

fn fit(
    window: &ExperimentWindow,
    opts: &PredictorOptions,
) -> Result<(ResidualModel, PredictorOperator, SubspacePredictor)> {
    let rm = ResidualModel::estimate(&window.past_inputs, &window.past_outputs, window.index.lag)?;
    let (op, sp) = build_predictors(window, &rm, opts)?;
    Ok((rm, op, sp))
}

fn rel(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// Criterion 1: noise-free data is reproduced exactly.
pub fn noise_free_exactness() -> CriterionOutcome {
    let start = Instant::now();
    let res = (|| {
        let dims = ArxDims {
            n_u: 1,
            n_ws: 1,
            n_y: 2,
        };
        let sc = scenario(dims, 2, 0.0, 400, 10, stream_seed("c1"))?;
        let w = &sc.window;
        let (rm, op, sp) = fit(w, &PredictorOptions::default())?;
        let v_ratio = rm.residuals.amax() / w.past_outputs.amax();
        let truth_arx = crate::hankel::hstack(&[&sc.truth.xi, &sc.truth.d]);
        let arx_err = (&rm.arx - &truth_arx).amax();
        let future = w.future_truth_vec().expect("window has truth");
        let uf = w.future_inputs_vec();
        let causal = rel(&predict_causal(&op, &w.z0, &uf, &rm)?.mean(), &future);
        let subspace = rel(&predict_subspace(&sp, &w.z0, &uf)?, &future);
        let secs = start.elapsed().as_secs_f64();
        let ok =
            v_ratio <= 1e-8 && arx_err <= 1e-6 && causal <= 1e-6 && subspace <= 1e-6 && secs < 5.0;
        Ok((
            ok,
            format!(
                "|v|/|y| = {v_ratio:.2e} (<= 1e-8), coeff err = {arx_err:.2e} (<= 1e-6), causal rel = {causal:.2e}, subspace rel = {subspace:.2e} (<= 1e-6), {secs:.2}s (< 5s)"
            ),
        ))
    })();
    outcome(1, "noise-free exactness", start, res)
}

fn stream_seed(label: &str) -> u64 {
    crate::synth::derive_seed(ROOT_SEED, label)
}

const CONSISTENCY_SIGMA: f64 = 0.5;
const CONSISTENCY_LENGTHS: [usize; 3] = [500, 2000, 8000];

/// Scalar ARX with Gaussian noise, simulated long enough for every length in the trend.
fn consistency_system(extra: usize) -> Result<(ArxTruth, Simulation)> {
    let dims = ArxDims {
        n_u: 1,
        n_ws: 0,
        n_y: 1,
    };
    let seed = stream_seed("consistency");
    let truth = random_arx(
        dims,
        1,
        0.2,
        NoiseSpec::gaussian(vec![CONSISTENCY_SIGMA]),
        seed,
    )?;
    let len = CONSISTENCY_LENGTHS[2] + 1 + extra;
    let mut rng = stream_rng(seed, "inputs");
    let sim = simulate_arx(&truth, &uniform_inputs(len, 1, &mut rng), seed, 1.0)?;
    Ok((truth, sim))
}

fn prefix(ds: &Dataset, len: usize) -> Result<Dataset> {
    Dataset::from_channels(
        ds.u().rows(0, len).into_owned(),
        ds.w_s().rows(0, len).into_owned(),
        ds.y().rows(0, len).into_owned(),
        ds.sample_period(),
    )
}

fn non_increasing(xs: &[f64], slack: f64) -> bool {
    xs.windows(2).all(|p| p[1] <= p[0] * (1.0 + slack))
}

/// Criterion 2: residual estimation error shrinks with `T`.
pub fn consistency_trend() -> CriterionOutcome {
    let start = Instant::now();
    let res = (|| {
        let (_, sim) = consistency_system(0)?;
        let (mut errs, mut w2s) = (Vec::new(), Vec::new());
        for &t_len in &CONSISTENCY_LENGTHS {
            let ds = prefix(&sim.dataset, t_len + 1)?;
            let rm = ResidualModel::estimate(&ds.u_tilde(), ds.y(), 1)?;
            let v = sim.noise.rows(1, t_len).into_owned();
            errs.push((&rm.residuals - &v).norm() / (t_len as f64).sqrt());
            w2s.push(wasserstein2_1d(rm.residuals.as_slice(), v.as_slice()));
        }
        let secs = start.elapsed().as_secs_f64();
        let last = w2s[2];
        let ok = non_increasing(&errs, 0.1)
            && non_increasing(&w2s, 0.1)
            && last <= 0.1 * CONSISTENCY_SIGMA
            && secs < 60.0;
        Ok((
            ok,
            format!(
                "T = {CONSISTENCY_LENGTHS:?}: err = {} W2 = {} (non-increasing within 10%, final W2 <= {:.3}), {secs:.2}s (< 60s)",
                fmt_list(&errs),
                fmt_list(&w2s),
                0.1 * CONSISTENCY_SIGMA
            ),
        ))
    })();
    outcome(2, "consistency trend", start, res)
}

fn fmt_list(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.4}")).collect();
    format!("[{}]", parts.join(", "))
}

const DIST_HORIZON: usize = 5;
const DIST_SAMPLES: usize = 2000;

/// Per-step W2 between PCE samples and true rollouts for a window with `T = t_len`.
///
/// Both sample sets share their uniform draws: the PCE germ uses the empirical
/// quantile of the whitened residuals, the truth the Gaussian quantile.
fn predictive_w2(truth: &ArxTruth, sim: &Simulation, t_len: usize) -> Result<Vec<f64>> {
    let w = make_window(&sim.dataset, t_len + 1, t_len, 1, DIST_HORIZON)?;
    let (rm, op, _) = fit(&w, &PredictorOptions::default())?;
    let pred = predict_causal(&op, &w.z0, &w.future_inputs_vec(), &rm)?;
    let mut sorted: Vec<f64> = rm.whitened.column(0).iter().copied().collect();
    sorted.sort_by(f64::total_cmp);
    let mut rng = stream_rng(ROOT_SEED, "c3-draws");
    let sigma = CONSISTENCY_SIGMA;
    let mut pce_samples = DMatrix::zeros(DIST_SAMPLES, DIST_HORIZON);
    let mut true_samples = DMatrix::zeros(DIST_SAMPLES, DIST_HORIZON);
    for s in 0..DIST_SAMPLES {
        let u: Vec<f64> = (0..DIST_HORIZON).map(|_| rng.random::<f64>()).collect();
        let xi = DVector::from_iterator(
            DIST_HORIZON,
            u.iter()
                .map(|&p| sorted[((p * sorted.len() as f64) as usize).min(sorted.len() - 1)]),
        );
        let noise = DMatrix::from_iterator(
            DIST_HORIZON,
            1,
            u.iter().map(|&p| {
                sigma * normal_quantile(p.clamp(1e-12, 1.0 - 1e-12)).expect("p in (0, 1)")
            }),
        );
        pce_samples.set_row(s, &pred.evaluate(&xi).transpose());
        let y = truth.rollout(&w.z0, &w.future_inputs, &noise);
        true_samples.set_row(s, &stack_rows(&y).transpose());
    }
    (0..DIST_HORIZON)
        .map(|k| {
            Ok(wasserstein2_1d(
                pce_samples.column(k).as_slice(),
                true_samples.column(k).as_slice(),
            ))
        })
        .collect()
}

/// Criterion 3: the predicted distribution approaches the true one as `T` grows.
pub fn distributional_consistency() -> CriterionOutcome {
    let start = Instant::now();
    let res = (|| {
        let (truth, sim) = consistency_system(DIST_HORIZON)?;
        let small = predictive_w2(&truth, &sim, CONSISTENCY_LENGTHS[0])?;
        let large = predictive_w2(&truth, &sim, CONSISTENCY_LENGTHS[2])?;
        let secs = start.elapsed().as_secs_f64();
        let limit = 0.15 * CONSISTENCY_SIGMA;
        let decreases = small.iter().zip(&large).all(|(s, l)| l < s);
        let ok = decreases && large.iter().all(|w| *w <= limit) && secs < 120.0;
        Ok((
            ok,
            format!(
                "per-step W2 at T=500 {} -> T=8000 {} (decrease per step, <= {limit:.3}), {secs:.2}s (< 120s)",
                fmt_list(&small),
                fmt_list(&large)
            ),
        ))
    })();
    outcome(3, "distributional prediction consistency", start, res)
}

/// Criterion 4: exact moments of affine PCEs.
pub fn moment_engine() -> CriterionOutcome {
    let start = Instant::now();
    let res = (|| {
        let gauss2 = PceBasis::gaussian(2, 8);
        let m4 = moment4(&[0.0, 1.0, 1.0], &gauss2)?;
        let gauss1 = PceBasis::gaussian(1, 8);
        let m6 = moment2n(&[0.0, 1.0], &gauss1, 3)?;

        // empirical uniform basis: 3 independent standardized uniform germs
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed("c4"));
        let germs: Vec<Vec<f64>> = (0..3)
            .map(|_| {
                let xs: Vec<f64> = (0..4000).map(|_| rng.random_range(-1.0..1.0)).collect();
                let c = central_moments(xs.iter().copied(), 2);
                let mean = xs.iter().sum::<f64>() / xs.len() as f64;
                xs.iter().map(|x| (x - mean) / c[2].sqrt()).collect()
            })
            .collect();
        let basis = PceBasis::from_tables(
            germs
                .iter()
                .map(|g| central_moments(g.iter().copied(), 8))
                .collect(),
        );
        let coeffs = [0.3, 1.0, -0.7, 0.4];
        let exact = moment4(&coeffs, &basis)?;
        let draws = 1_000_000;
        let mc: Vec<f64> = (0..draws)
            .map(|_| {
                coeffs[0]
                    + germs
                        .iter()
                        .zip(&coeffs[1..])
                        .map(|(g, c)| c * g[rng.random_range(0..g.len())])
                        .sum::<f64>()
            })
            .collect();
        let mc4 = central_moments(mc.iter().copied(), 4)[4];
        let mc_rel = (exact - mc4).abs() / mc4;
        let ok = (m4 - 12.0).abs() <= 1e-12 && mc_rel <= 0.02 && (m6 - 15.0).abs() <= 1e-9;
        Ok((
            ok,
            format!(
                "Gaussian pair mu4 = {m4} (12 +- 1e-12), uniform basis mu4 = {exact:.5} vs Monte Carlo {mc4:.5} (rel {mc_rel:.4} <= 0.02), mu6 = {m6} (15 +- 1e-9)"
            ),
        ))
    })();
    outcome(4, "moment engine", start, res)
}

/// Criterion 5: bound constants at γ = 0.9.
pub fn bound_constants() -> CriterionOutcome {
    let start = Instant::now();
    let res = (|| {
        let r = |f: BoundFamily, mu2: f64, mu4: f64| radius(&BoundSpec::new(f, 0.9)?, mu2, mu4);
        let c2 = r(BoundFamily::Cheb2, 1.0, 1.0)?;
        let c4 = r(BoundFamily::Cheb4, 1.0, 1.0)?;
        let g = r(BoundFamily::Gauss, 1.0, 1.0)?;
        let c4g = r(BoundFamily::Cheb4, 1.0, 3.0)?;
        let near = |x: f64, v: f64| (x - v).abs() < 5e-5;
        let ok = near(c2, 3.1623)
            && near(c4, 1.7783)
            && near(g, 1.6449)
            && near(c4g, 2.3403)
            && c2 > c4g
            && c4g > g;
        Ok((
            ok,
            format!("cheb2 = {c2:.4}, cheb4 = {c4:.4}, gauss = {g:.4}; Gaussian moments: {c2:.4} > {c4g:.4} > {g:.4}"),
        ))
    })();
    outcome(5, "bound constants", start, res)
}

/// Criterion 6: empirical coverage ordering on a Gaussian-residual system.
pub fn coverage_validity() -> CriterionOutcome {
    let start = Instant::now();
    let res = (|| {
        let dims = ArxDims {
            n_u: 1,
            n_ws: 0,
            n_y: 1,
        };
        let seed = stream_seed("c6");
        let truth = random_arx(dims, 2, 0.2, NoiseSpec::gaussian(vec![0.3]), seed)?;
        let cfg = ExperimentConfig {
            data_len: 1500,
            horizon: 20,
            lag: 2,
            stride: 20,
            gamma: 0.9,
            max_scenarios: Some(50),
            seed,
            ..Default::default()
        };
        let len = cfg.data_len + cfg.lag + 50 * cfg.stride;
        let mut rng = stream_rng(seed, "inputs");
        let sim = simulate_arx(&truth, &uniform_inputs(len, 1, &mut rng), seed, 1.0)?;
        let out = run(&cfg, &sim.dataset)?;
        let cov = |f: BoundFamily| {
            out.summary
                .bounds
                .iter()
                .find(|b| b.family == f)
                .and_then(|b| b.coverage)
                .unwrap_or(f64::NAN)
        };
        let (c2, c4, g) = (
            cov(BoundFamily::Cheb2),
            cov(BoundFamily::Cheb4),
            cov(BoundFamily::Gauss),
        );
        let secs = start.elapsed().as_secs_f64();
        let ok = out.summary.scenarios == 50
            && c2 >= c4
            && c4 >= g
            && (0.85..=0.95).contains(&g)
            && c2 >= 0.97
            && secs < 120.0;
        Ok((
            ok,
            format!(
                "N_s = {}, coverage cheb2 = {c2:.4} (>= 0.97) >= cheb4 = {c4:.4} >= gauss = {g:.4} (in [0.85, 0.95]), {secs:.2}s (< 120s)",
                out.summary.scenarios
            ),
        ))
    })();
    outcome(6, "coverage validity", start, res)
}

fn noisy_scenario(seed: u64) -> Result<Scenario> {
    scenario(
        ArxDims {
            n_u: 1,
            n_ws: 1,
            n_y: 2,
        },
        2,
        0.3,
        300,
        6,
        seed,
    )
}

/// Criterion 7: future inputs never affect earlier causal outputs.
pub fn causality() -> CriterionOutcome {
    let start = Instant::now();
    let res = (|| {
        let sc = noisy_scenario(stream_seed("c7"))?;
        let w = &sc.window;
        let (rm, op, sp) = fit(w, &PredictorOptions::default())?;
        let (n_ut, n_y, horizon) = (w.n_ut(), w.n_y(), w.index.horizon);
        let uf = w.future_inputs_vec();
        let base = predict_causal(&op, &w.z0, &uf, &rm)?;
        let mut worst: f64 = 0.0;
        for j in 0..horizon {
            for c in 0..n_ut {
                let mut pert = uf.clone();
                pert[j * n_ut + c] += 1.0;
                let p = predict_causal(&op, &w.z0, &pert, &rm)?;
                let earlier = (&p.coeffs - &base.coeffs).rows(0, j * n_y).amax();
                worst = worst.max(earlier);
            }
        }
        let sp_base = predict_subspace(&sp, &w.z0, &uf)?;
        let mut last = uf.clone();
        last[(horizon - 1) * n_ut] += 1.0;
        let sp_pert = predict_subspace(&sp, &w.z0, &last)?;
        let sp_change = (sp_pert.rows(0, n_y) - sp_base.rows(0, n_y)).amax();
        let ok = worst <= 1e-10 && sp_change > 1e-6;
        Ok((
            ok,
            format!(
                "max change of earlier causal outputs = {worst:.2e} (<= 1e-10); subspace step-0 change from last input = {sp_change:.2e} (> 1e-6)"
            ),
        ))
    })();
    outcome(7, "causality", start, res)
}

/// Criterion 8: causal predictions are trajectories of the data; perturbed ones are not.
pub fn behavior_membership() -> CriterionOutcome {
    let start = Instant::now();
    let res = (|| {
        let (mut pass, mut rejected) = (0, 0);
        let windows = 20;
        for i in 0..windows {
            let sc = noisy_scenario(stream_seed(&format!("c8-{i}")))?;
            let w = &sc.window;
            let (rm, op, _) = fit(w, &PredictorOptions::default())?;
            let hk = WindowHankels::new(w, &rm)?;
            let uf = w.future_inputs_vec();
            let pred = predict_causal(&op, &w.z0, &uf, &rm)?;
            // a residual realization drawn from the germ distribution
            let mut rng = stream_rng(ROOT_SEED, &format!("c8-germ-{i}"));
            let xi = DVector::from_fn(pred.coeffs.ncols() - 1, |_, _| {
                rm.whitened[(rng.random_range(0..rm.whitened.nrows()), 0)]
            });
            let n_xi = rm.n_xi();
            let mut v = DVector::zeros(w.index.horizon * w.n_y());
            for k in 0..w.index.horizon {
                let g = xi.rows(k * n_xi, n_xi);
                v.rows_mut(k * w.n_y(), w.n_y())
                    .copy_from(&(&rm.emp_mean + &rm.sqrt_cov * g));
            }
            let y = pred.evaluate(&xi);
            if hk.contains(&w.z0, &uf, &v, &y, MEMBERSHIP_TOL) {
                pass += 1;
            }
            let mut bad = y.clone();
            bad[i % y.len()] += 1.0;
            if !hk.contains(&w.z0, &uf, &v, &bad, MEMBERSHIP_TOL) {
                rejected += 1;
            }
        }
        Ok((
            pass == windows && rejected == windows,
            format!("{pass}/{windows} predictions accepted, {rejected}/{windows} perturbed predictions rejected at tol 1e-8"),
        ))
    })();
    outcome(8, "behavior membership", start, res)
}

/// Case-study configuration: `T = 2880`, `N = 96`, stride 24, γ = 0.9.
///
/// The stacked-rank excitation check is used because the order-`N + n_z`
/// test cannot be met with `T = 2880` at this channel count.
pub fn case_study_config() -> ExperimentConfig {
    ExperimentConfig {
        excitation: ExcitationCheck::Stack,
        ..ExperimentConfig::default()
    }
}

/// Checks that an experiment output is complete and self-consistent with its CSV.
pub fn check_pipeline(out: &ExperimentOutput, dir: &Path) -> Result<(bool, String)> {
    emit_reports(out, dir)?;
    let s = &out.summary;
    let mut rdr = csv::Reader::from_path(dir.join("scenarios.csv")).map_err(|e| {
        crate::error::Error::Validation(format!("{}: {e}", dir.join("scenarios.csv").display()))
    })?;
    let nf = s.bounds.len();
    let (mut sq, mut rows) = (0.0, 0usize);
    let mut hits = vec![0usize; nf];
    let mut rad = vec![0.0; nf];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| crate::error::Error::Validation(e.to_string()))?;
        let f = |i: usize| rec[i].parse::<f64>().unwrap_or(f64::NAN);
        let (y, m) = (f(3), f(4));
        sq += (y - m).powi(2);
        for j in 0..nf {
            rad[j] += f(6 + j);
            hits[j] += usize::from((y - m).abs() <= f(6 + j));
        }
        rows += 1;
    }
    let count = (s.scenarios * s.config.horizon) as f64;
    let mut consistent = rows > 0;
    for (j, b) in s.bounds.iter().enumerate() {
        let close = |a: Option<f64>, b: f64| a.is_some_and(|a| (a - b).abs() <= 1e-9);
        consistent &= close(b.rmse, (sq / count).sqrt())
            && close(b.coverage, hits[j] as f64 / rows as f64)
            && close(b.mean_radius, rad[j] / rows as f64);
    }
    let table: Vec<String> = std::iter::once(format!(
        "subspace rmse {:.4}",
        s.subspace.rmse.unwrap_or(f64::NAN)
    ))
    .chain(s.bounds.iter().map(|b| {
        format!(
            "{} rmse {:.4} coverage {:.4} radius {:.4}",
            b.family,
            b.rmse.unwrap_or(f64::NAN),
            b.coverage.unwrap_or(f64::NAN),
            b.mean_radius.unwrap_or(f64::NAN)
        )
    }))
    .collect();
    Ok((
        s.skipped.is_empty() && consistent,
        format!(
            "{} scenarios, {} skipped, reports self-consistent: {consistent}; {}",
            s.scenarios,
            s.skipped.len(),
            table.join("; ")
        ),
    ))
}

/// Synthetic stand-in with the case-study schema (12 inputs, 6 structured
/// disturbances, 4 outputs, 15-minute grid), at reduced window sizes.
pub fn stand_in_run(dir: &Path) -> Result<(bool, String)> {
    let dims = ArxDims {
        n_u: 12,
        n_ws: 6,
        n_y: 4,
    };
    let seed = stream_seed("c9-stand-in");
    let truth = random_arx(dims, 2, 0.3, NoiseSpec::gaussian(vec![0.1; 4]), seed)?;
    let cfg = ExperimentConfig {
        data_len: 600,
        horizon: 12,
        lag: 2,
        stride: 24,
        max_scenarios: Some(4),
        ..case_study_config()
    };
    let len = cfg.data_len + cfg.lag + 3 * cfg.stride + cfg.horizon;
    let mut rng = stream_rng(seed, "inputs");
    let sim = simulate_arx(
        &truth,
        &uniform_inputs(len, dims.n_ut(), &mut rng),
        seed,
        900.0,
    )?;
    let full = run(&cfg, &sim.dataset)?;
    let (ok_full, d_full) = check_pipeline(&full, &dir.join("all_ws"))?;
    let none = ExperimentConfig {
        ws_channels: Some(vec![]),
        ..cfg
    };
    let (ok_none, d_none) = check_pipeline(&run(&none, &sim.dataset)?, &dir.join("no_ws"))?;
    Ok((
        ok_full && ok_none,
        format!("all w_s: {d_full} | w_s empty: {d_none}"),
    ))
}

/// Criterion 9: the case-study pipeline on a user-supplied dataset.
///
/// Without a dataset the criterion is reported as skipped; the synthetic
/// stand-in run is still executed and must succeed.
pub fn dataset_pipeline(path: Option<&Path>) -> CriterionOutcome {
    let start = Instant::now();
    let name = "dataset pipeline";
    let tmp = match tempfile::tempdir() {
        Ok(t) => t,
        Err(e) => {
            return outcome(
                9,
                name,
                start,
                Err(crate::error::Error::io(std::env::temp_dir(), e)),
            )
        }
    };
    let stand_in = stand_in_run(tmp.path());
    let Some(path) = path else {
        return match stand_in {
            Ok((true, d)) => CriterionOutcome {
                id: 9,
                name,
                status: Status::Skip,
                detail: format!("no dataset supplied (set {DATASET_ENV}); synthetic same-schema stand-in ran: {d}"),
                elapsed: start.elapsed(),
            },
            other => outcome(9, name, start, other.map(|(_, d)| (false, format!("stand-in failed: {d}")))),
        };
    };
    let res = (|| {
        let header = read_header(path)?;
        let ds = load_csv(path, &Schema::infer(&header))?;
        let mut details = Vec::new();
        let mut ok = true;
        for (label, ws) in [("all w_s", None), ("w_s empty", Some(vec![]))] {
            let cfg = ExperimentConfig {
                ws_channels: ws,
                ..case_study_config()
            };
            let out = run(&cfg, &ds)?;
            let (good, d) = check_pipeline(&out, &tmp.path().join(label.replace(' ', "_")))?;
            ok &= good;
            details.push(format!("{label}: {d}"));
        }
        Ok((ok, details.join(" | ")))
    })();
    outcome(9, name, start, res)
}
