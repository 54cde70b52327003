//! Seeded fixtures shared by the benchmarks.

use stochpred::data::{make_window, Dataset, ExperimentWindow};
use stochpred::synth::{random_arx, simulate_arx, stream_rng, uniform_inputs, ArxDims, NoiseSpec};

/// Noisy ARX dataset long enough for one window of `data_len + lag` past steps and `horizon` future steps.
pub fn dataset(dims: ArxDims, lag: usize, data_len: usize, horizon: usize, seed: u64) -> Dataset {
    let truth = random_arx(
        dims,
        lag,
        0.2,
        NoiseSpec::gaussian(vec![0.2; dims.n_y]),
        seed,
    )
    .expect("stable system");
    let len = data_len + lag + horizon;
    let mut rng = stream_rng(seed, "inputs");
    simulate_arx(
        &truth,
        &uniform_inputs(len, dims.n_ut(), &mut rng),
        seed,
        900.0,
    )
    .expect("consistent dimensions")
    .dataset
}

/// The last window of [`dataset`].
pub fn window(
    dims: ArxDims,
    lag: usize,
    data_len: usize,
    horizon: usize,
    seed: u64,
) -> ExperimentWindow {
    let ds = dataset(dims, lag, data_len, horizon, seed);
    make_window(&ds, data_len + lag, data_len, lag, horizon).expect("window fits")
}
