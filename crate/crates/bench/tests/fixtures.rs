use stochpred::synth::ArxDims;
use stochpred_bench::window;

#[test]
fn window_has_requested_shape() {
    let dims = ArxDims {
        n_u: 2,
        n_ws: 1,
        n_y: 2,
    };
    let w = window(dims, 2, 300, 10, 1);
    assert_eq!(w.past_inputs.shape(), (302, 3));
    assert_eq!(w.future_inputs.shape(), (10, 3));
    assert_eq!(w.z0.len(), 10);
}
