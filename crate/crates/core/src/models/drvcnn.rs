//! Convolutional attention network: a 3x3 valid convolution (the
//! pre-designed filter), channel then spatial attention, two tanh FC layers
//! of widths 5K and 3K and a linear output of 2K I/Q values.

use crate::features::{FeatureConfig, FeatureTensor};
use crate::neuralcore::{
    batch_loss_and_gradients, Activation, AttentionParams, ConvLayer, DenseLayer, Network, ParamGrads, ParamSpec,
    Parameterized, Samples, Tensor3,
};
use crate::{seed, Error, Exec, Result};

const KERNEL: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct DrvcnnModel {
    pub conv: ConvLayer,
    pub attention: AttentionParams,
    pub fc1: DenseLayer,
    pub fc2: DenseLayer,
    pub out: DenseLayer,
    pub frozen_conv: bool,
    pub feature: FeatureConfig,
}

/// Builds the network for `K` carriers and memory depth `M` with the default
/// five feature rows, initialized from `seed`.
pub fn build_drvcnn(carriers: usize, memory_depth: usize, seed: u64) -> Result<DrvcnnModel> {
    DrvcnnModel::new(&FeatureConfig::new(carriers, memory_depth), seed)
}

impl DrvcnnModel {
    pub fn new(feature: &FeatureConfig, seed: u64) -> Result<Self> {
        feature.validate()?;
        let (rows, lags, k) = (feature.rows(), feature.lags(), feature.carriers);
        if lags < KERNEL || rows < KERNEL {
            return Err(Error::Config(format!(
                "feature map {rows}x{lags} too small for a {KERNEL}x{KERNEL} valid convolution (need M >= 2)"
            )));
        }
        let mut rng = seed::rng(seed);
        let s = 3 * k;
        let conv = ConvLayer::glorot(s, k, KERNEL, KERNEL, &mut rng);
        let (h, w, _) = conv.output_dims((rows, lags, k))?;
        let attention = AttentionParams::glorot(s, h * w, &mut rng);
        let fc1 = DenseLayer::glorot(h * w * s, 5 * k, Activation::Tanh, &mut rng);
        let fc2 = DenseLayer::glorot(5 * k, 3 * k, Activation::Tanh, &mut rng);
        let out = DenseLayer::glorot(3 * k, 2 * k, Activation::Linear, &mut rng);
        Ok(Self {
            conv,
            attention,
            fc1,
            fc2,
            out,
            frozen_conv: false,
            feature: feature.clone(),
        })
    }

    pub fn carriers(&self) -> usize {
        self.feature.carriers
    }

    pub fn memory_depth(&self) -> usize {
        self.feature.memory_depth
    }

    pub fn input_dims(&self) -> (usize, usize, usize) {
        (self.feature.rows(), self.feature.lags(), self.feature.carriers)
    }

    /// Dimensions of the convolution output (and of both attention maps).
    pub fn map_dims(&self) -> (usize, usize, usize) {
        let (h, w, _) = self.input_dims();
        (h - KERNEL + 1, w - KERNEL + 1, self.conv.out_channels)
    }

    fn tensor(&self, x: &[f64]) -> Tensor3 {
        Tensor3::from_vec(self.input_dims(), x.to_vec()).expect("input length checked by caller")
    }

    fn head_forward(&self, r_s: &[f64]) -> [Vec<f64>; 3] {
        let h1 = self.fc1.forward(r_s);
        let h2 = self.fc2.forward(&h1);
        let y = self.out.forward(&h2);
        [h1, h2, y]
    }
}

impl Parameterized for DrvcnnModel {
    fn param_specs(&self) -> Vec<ParamSpec> {
        let c = &self.conv;
        let mut specs = vec![
            ParamSpec::new("conv.kernels", vec![c.out_channels, c.kh, c.kw, c.in_channels]),
            ParamSpec::new("conv.biases", vec![c.out_channels]),
        ];
        let names = [
            "attn.channel.fc1",
            "attn.channel.fc2",
            "attn.spatial.fc1",
            "attn.spatial.fc2",
        ];
        for (name, l) in names.iter().zip(self.attention.layers()) {
            specs.push(ParamSpec::new(format!("{name}.w"), vec![l.out_dim, l.in_dim]));
            specs.push(ParamSpec::new(format!("{name}.b"), vec![l.out_dim]));
        }
        for (name, l) in [
            ("head.fc1", &self.fc1),
            ("head.fc2", &self.fc2),
            ("head.out", &self.out),
        ] {
            specs.push(ParamSpec::new(format!("{name}.w"), vec![l.out_dim, l.in_dim]));
            specs.push(ParamSpec::new(format!("{name}.b"), vec![l.out_dim]));
        }
        specs
    }

    fn param_blocks(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = vec![&self.conv.kernels, &self.conv.biases];
        for l in self.attention.layers() {
            v.push(&l.weights);
            v.push(&l.biases);
        }
        for l in [&self.fc1, &self.fc2, &self.out] {
            v.push(&l.weights);
            v.push(&l.biases);
        }
        v
    }

    fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = vec![&mut self.conv.kernels, &mut self.conv.biases];
        for l in self.attention.layers_mut() {
            v.push(&mut l.weights);
            v.push(&mut l.biases);
        }
        for l in [&mut self.fc1, &mut self.fc2, &mut self.out] {
            v.push(&mut l.weights);
            v.push(&mut l.biases);
        }
        v
    }
}

impl Network for DrvcnnModel {
    fn input_len(&self) -> usize {
        self.feature.tensor_len()
    }

    fn output_len(&self) -> usize {
        2 * self.feature.carriers
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        let r = self.conv.forward(&self.tensor(x));
        let (r_s, _) = self.attention.forward(&r);
        let [_, _, y] = self.head_forward(r_s.values());
        y
    }

    fn accumulate(&self, x: &[f64], target: &[f64], g_scale: f64, grads: &mut ParamGrads) -> f64 {
        let xt = self.tensor(x);
        let r = self.conv.forward(&xt);
        let (r_s, cache) = self.attention.forward(&r);
        let [h1, h2, y] = self.head_forward(r_s.values());

        let mut sse = 0.0;
        let g_y: Vec<f64> = y
            .iter()
            .zip(target)
            .map(|(y, t)| {
                let d = y - t;
                sse += d * d;
                2.0 * d * g_scale
            })
            .collect();

        let (conv_g, rest) = grads.blocks.split_at_mut(2);
        let (attn_g, head_g) = rest.split_at_mut(8);
        let [gw1, gb1, gw2, gb2, gwo, gbo] = head_g else {
            panic!("gradient blocks do not match the model");
        };
        let g_h2 = self.out.backward(&h2, &y, &g_y, gwo, gbo);
        let g_h1 = self.fc2.backward(&h1, &h2, &g_h2, gw2, gb2);
        let g_rs = self.fc1.backward(r_s.values(), &h1, &g_h1, gw1, gb1);
        let g_r = self.attention.backward(&r, &cache, &g_rs, attn_g);
        if !self.frozen_conv {
            let [gk, gb] = conv_g else { unreachable!() };
            self.conv.backward_params(&xt, &r, &g_r, gk, gb);
        }
        sse
    }

    fn trainable_blocks(&self) -> Vec<bool> {
        let mut t = vec![true; 16];
        if self.frozen_conv {
            t[0] = false;
            t[1] = false;
        }
        t
    }
}

/// Checked forward pass on one feature tensor; returns
/// `(I_1, Q_1, ..., I_K, Q_K)`.
pub fn model_forward(x: &FeatureTensor, model: &DrvcnnModel) -> Result<Vec<f64>> {
    if x.values.dims() != model.input_dims() {
        return Err(Error::Shape(format!(
            "model expects input {:?}, got {:?}",
            model.input_dims(),
            x.values.dims()
        )));
    }
    Ok(model.forward(x.values.values()))
}

/// Batch-mean MSE and its gradient for a batch of `(tensor, target)` pairs.
/// With `frozen_conv` the convolution blocks stay exactly zero.
pub fn model_gradients(
    model: &DrvcnnModel,
    batch: &[(FeatureTensor, Vec<f64>)],
    frozen_conv: bool,
) -> Result<(f64, ParamGrads)> {
    if batch.is_empty() {
        return Err(Error::Argument("empty batch".into()));
    }
    let mut inputs = Vec::with_capacity(batch.len() * model.input_len());
    let mut targets = Vec::with_capacity(batch.len() * model.output_len());
    for (x, t) in batch {
        if x.values.dims() != model.input_dims() || t.len() != model.output_len() {
            return Err(Error::Shape("batch item does not match the model".into()));
        }
        inputs.extend_from_slice(x.values.values());
        targets.extend_from_slice(t);
    }
    let samples = Samples {
        inputs: &inputs,
        targets: &targets,
        in_len: model.input_len(),
        out_len: model.output_len(),
    };
    let idx: Vec<usize> = (0..batch.len()).collect();
    let run = |m: &DrvcnnModel| batch_loss_and_gradients(m, samples, &idx, Exec::Sequential);
    if model.frozen_conv == frozen_conv {
        Ok(run(model))
    } else {
        let mut m = model.clone();
        m.frozen_conv = frozen_conv;
        Ok(run(&m))
    }
}

/// Replaces the convolution with a previously trained filter and freezes it.
pub fn load_predesigned_filter(model: &DrvcnnModel, filter: &ConvLayer) -> Result<DrvcnnModel> {
    let c = &model.conv;
    if (filter.out_channels, filter.in_channels, filter.kh, filter.kw) != (c.out_channels, c.in_channels, c.kh, c.kw)
        || filter.kernels.len() != c.kernels.len()
        || filter.biases.len() != c.biases.len()
    {
        return Err(Error::Config(format!(
            "filter shape {}x{}x{}x{} does not match model {}x{}x{}x{}",
            filter.out_channels, filter.kh, filter.kw, filter.in_channels, c.out_channels, c.kh, c.kw, c.in_channels
        )));
    }
    let mut m = model.clone();
    m.conv = filter.clone();
    m.frozen_conv = true;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuralcore::count_parameters;

    #[test]
    fn single_carrier_layout() {
        let m = build_drvcnn(1, 3, 0).unwrap();
        assert_eq!(m.map_dims(), (3, 2, 3));
        assert_eq!(m.attention.channel_fc1.out_dim, 1);
        assert_eq!(m.attention.spatial_fc1.out_dim, 2);
        assert_eq!(count_parameters(&m), 193);
        assert_eq!(m.output_len(), 2);
    }

    #[test]
    fn multi_carrier_layouts() {
        let m = build_drvcnn(2, 3, 0).unwrap();
        assert_eq!(m.conv.out_channels, 6);
        assert_eq!((m.fc1.out_dim, m.fc2.out_dim, m.out.out_dim), (10, 6, 4));
        assert_eq!(count_parameters(&m), 642);

        let m = build_drvcnn(3, 2, 0).unwrap();
        assert_eq!(m.conv.out_channels, 9);
        assert_eq!(m.map_dims(), (3, 1, 9));
        assert_eq!(m.attention.spatial_fc1.out_dim, 1);
        assert_eq!((m.fc1.out_dim, m.fc2.out_dim, m.out.out_dim), (15, 9, 6));
        assert_eq!(count_parameters(&m), 952);
    }

    #[test]
    fn too_short_memory() {
        assert!(matches!(build_drvcnn(1, 1, 0), Err(Error::Config(_))));
        assert!(build_drvcnn(1, 2, 0).is_ok());
    }

    #[test]
    fn zero_model_outputs_zero() {
        let mut m = build_drvcnn(2, 3, 5).unwrap();
        m.param_blocks_mut().into_iter().for_each(|b| b.fill(0.0));
        let x: Vec<f64> = (0..m.input_len()).map(|i| (i as f64).sin()).collect();
        assert_eq!(m.forward(&x), vec![0.0; 4]);
    }

    #[test]
    fn shape_checked_forward() {
        let m = build_drvcnn(1, 3, 0).unwrap();
        let bad = FeatureTensor {
            values: Tensor3::zeros((5, 3, 1)),
            time_index: 0,
        };
        assert!(matches!(model_forward(&bad, &m), Err(Error::Shape(_))));
    }

    #[test]
    fn predesigned_filter_round_trip() {
        let a = build_drvcnn(1, 3, 1).unwrap();
        let b = build_drvcnn(1, 3, 2).unwrap();
        let same = load_predesigned_filter(&a, &a.conv).unwrap();
        assert_eq!(same.conv, a.conv);
        assert!(same.frozen_conv);
        let swapped = load_predesigned_filter(&a, &b.conv).unwrap();
        assert_eq!(swapped.conv, b.conv);
        assert_eq!(swapped.fc1, a.fc1);
        let wrong = build_drvcnn(2, 3, 0).unwrap();
        assert!(matches!(
            load_predesigned_filter(&a, &wrong.conv),
            Err(Error::Config(_))
        ));
    }
}
