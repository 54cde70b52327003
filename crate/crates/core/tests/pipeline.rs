use nalgebra::dmatrix;
use stochpred::data::{load_csv, make_window, read_header, Schema};
use stochpred::experiment::{run, ExperimentConfig};
use stochpred::predictor::{build_predictors, predict_causal, PredictorOptions};
use stochpred::residual::ResidualModel;
use stochpred::synth::{
    lag_of, stream_rng, uniform_inputs, NoiseSpec, StateSpaceTruth, TruthSystem,
};

fn state_space() -> TruthSystem {
    let (s, c) = (0.5f64.sin() * 0.85, 0.5f64.cos() * 0.85);
    TruthSystem::StateSpace(
        StateSpaceTruth::new(
            dmatrix![c, -s; s, c],
            dmatrix![1.0, 0.3; 0.2, -0.5],
            dmatrix![1.0, 0.0],
            dmatrix![0.1, 0.0],
            dmatrix![0.4; 0.2],
            dmatrix![0.3],
            1,
            NoiseSpec::gaussian(vec![0.5]),
            0.05,
        )
        .unwrap(),
    )
}

#[test]
fn csv_round_trip_feeds_the_runner() {
    let sys = state_space();
    let mut rng = stream_rng(3, "inputs");
    let sim = sys
        .simulate(&uniform_inputs(900, 2, &mut rng), 3, 900.0)
        .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.csv");
    sim.dataset.write_csv(&path).unwrap();
    let ds = load_csv(&path, &Schema::infer(&read_header(&path).unwrap())).unwrap();
    assert_eq!(ds, sim.dataset);

    let cfg = ExperimentConfig {
        data_len: 600,
        horizon: 12,
        lag: 3,
        stride: 30,
        ..Default::default()
    };
    let out = run(&cfg, &ds).unwrap();
    assert!(out.summary.skipped.is_empty(), "{:?}", out.summary.skipped);
    assert_eq!(out.summary.scenarios, cfg.scenario_times(ds.len()).len());
    let cov: Vec<f64> = out
        .summary
        .bounds
        .iter()
        .map(|b| b.coverage.unwrap())
        .collect();
    assert!(cov[0] >= cov[1] && cov[1] >= cov[2]);
}

#[test]
fn state_space_data_gives_causal_predictor_at_observability_lag() {
    let sys = state_space();
    let TruthSystem::StateSpace(ss) = &sys else {
        unreachable!()
    };
    let lag = lag_of(ss).unwrap();
    assert_eq!(lag, 2);
    let mut rng = stream_rng(5, "inputs");
    let sim = sys
        .simulate(&uniform_inputs(700, 2, &mut rng), 5, 1.0)
        .unwrap();
    let w = make_window(&sim.dataset, 650, 600, lag, 10).unwrap();
    let rm = ResidualModel::estimate(&w.past_inputs, &w.past_outputs, lag).unwrap();
    let (op, sp) = build_predictors(&w, &rm, &PredictorOptions::default()).unwrap();
    assert!(op.causality_violation() <= 1e-8);
    assert!(sp.causality_violation() > op.causality_violation());
    let pred = predict_causal(&op, &w.z0, &w.future_inputs_vec(), &rm).unwrap();
    assert!(pred.is_causal(1e-8 * pred.coeffs.amax()));
    let var = pred.variances().unwrap();
    // uncertainty grows from the one-step-ahead prediction on
    assert!(var[9] >= var[0]);
}
