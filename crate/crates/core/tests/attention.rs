use pa_modelkit::neuralcore::{
    channel_attention, conv2d_valid_forward, spatial_attention, AttentionParams, ConvLayer, Tensor3,
};
use pa_modelkit::seed;
use proptest::prelude::*;

fn tensor(dims: (usize, usize, usize), values: &[f64]) -> Tensor3 {
    Tensor3::from_vec(dims, values[..dims.0 * dims.1 * dims.2].to_vec()).unwrap()
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config(300))]

    #[test]
    fn attention_weights_are_distributions(
        h in 1usize..5,
        w in 1usize..5,
        s in 1usize..10,
        values in prop::collection::vec(-3.0f64..3.0, 200),
        param_seed in any::<u64>(),
    ) {
        let r = tensor((h, w, s), &values);
        let p = AttentionParams::glorot(s, h * w, &mut seed::rng(param_seed));
        let (wa, ra) = channel_attention(&r, &p).unwrap();
        let (ws, rs) = spatial_attention(&ra, &p).unwrap();
        prop_assert_eq!(wa.len(), s);
        prop_assert_eq!(ws.len(), h * w);
        for wts in [&wa, &ws] {
            prop_assert!(wts.iter().all(|v| *v >= 0.0));
            prop_assert!((wts.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        prop_assert_eq!(ra.dims(), r.dims());
        prop_assert_eq!(rs.dims(), r.dims());
    }

    #[test]
    fn valid_conv_output_dims(
        h in 3usize..8,
        w in 3usize..8,
        c in 1usize..4,
        s in 1usize..7,
        kh in 1usize..4,
        kw in 1usize..4,
    ) {
        let layer = ConvLayer::glorot(s, c, kh, kw, &mut seed::rng(1));
        let x = Tensor3::zeros((h, w, c));
        let y = conv2d_valid_forward(&x, &layer).unwrap();
        prop_assert_eq!(y.dims(), (h - kh + 1, w - kw + 1, s));
        // zero input leaves tanh(bias) = 0 with Glorot init
        prop_assert!(y.values().iter().all(|v| *v == 0.0));
    }
}

#[test]
fn examples_from_the_conv_contract() {
    let three = ConvLayer::zeros(3, 1, 3, 3);
    assert_eq!(
        conv2d_valid_forward(&Tensor3::zeros((5, 4, 1)), &three).unwrap().dims(),
        (3, 2, 3)
    );
    let nine = ConvLayer::zeros(9, 3, 3, 3);
    assert_eq!(
        conv2d_valid_forward(&Tensor3::zeros((5, 3, 3)), &nine).unwrap().dims(),
        (3, 1, 9)
    );
    assert!(conv2d_valid_forward(&Tensor3::zeros((5, 3, 2)), &nine).is_err());
    let mut b = ConvLayer::zeros(2, 1, 3, 3);
    b.biases = vec![0.3, -1.2];
    let y = conv2d_valid_forward(&Tensor3::zeros((4, 4, 1)), &b).unwrap();
    for pos in y.values().chunks(2) {
        assert_eq!(pos, [0.3f64.tanh(), (-1.2f64).tanh()]);
    }
}
