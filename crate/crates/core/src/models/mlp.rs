//! Fully connected baselines on the flattened feature vector.

use crate::features::{FeatureConfig, MlpVariant};
use crate::neuralcore::{Activation, DenseLayer, Network, ParamGrads, ParamSpec, Parameterized};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub variant: MlpVariant,
    /// Hidden tanh layers followed by the linear output layer.
    pub layers: Vec<DenseLayer>,
    pub feature: FeatureConfig,
}

/// Hidden width of the single-layer baseline for the three reference
/// configurations; other carrier counts use the nearest one.
pub fn default_arvtdnn_hidden(carriers: usize) -> usize {
    match carriers {
        0 | 1 => 17,
        2 => 35,
        _ => 40,
    }
}

/// Hidden widths of the three-layer baseline, chosen like
/// [`default_arvtdnn_hidden`].
pub fn default_dnn_hidden(carriers: usize) -> Vec<usize> {
    let w = match carriers {
        0 | 1 => 17,
        2 => 25,
        _ => 30,
    };
    vec![w; 3]
}

pub fn build_arvtdnn(carriers: usize, memory_depth: usize, hidden: usize, seed: u64) -> Result<MlpModel> {
    MlpModel::new(
        &FeatureConfig::new(carriers, memory_depth),
        MlpVariant::Arvtdnn,
        &[hidden],
        seed,
    )
}

pub fn build_dnn(carriers: usize, memory_depth: usize, hidden: &[usize], seed: u64) -> Result<MlpModel> {
    if hidden.len() != 3 {
        return Err(Error::Config(format!(
            "dnn baseline has three hidden layers, got {}",
            hidden.len()
        )));
    }
    MlpModel::new(
        &FeatureConfig::new(carriers, memory_depth),
        MlpVariant::Dnn,
        hidden,
        seed,
    )
}

impl MlpModel {
    pub fn new(feature: &FeatureConfig, variant: MlpVariant, hidden: &[usize], seed: u64) -> Result<Self> {
        feature.validate()?;
        if hidden.is_empty() || hidden.contains(&0) {
            return Err(Error::Config("hidden widths must be positive".into()));
        }
        let mut rng = seed::rng(seed);
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut fan_in = variant.input_len(feature);
        for &h in hidden {
            layers.push(DenseLayer::glorot(fan_in, h, Activation::Tanh, &mut rng));
            fan_in = h;
        }
        layers.push(DenseLayer::glorot(
            fan_in,
            2 * feature.carriers,
            Activation::Linear,
            &mut rng,
        ));
        Ok(Self {
            variant,
            layers,
            feature: feature.clone(),
        })
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1].iter().map(|l| l.out_dim).collect()
    }

    pub fn carriers(&self) -> usize {
        self.feature.carriers
    }

    fn layer_name(&self, i: usize) -> String {
        if i + 1 == self.layers.len() {
            "mlp.out".to_string()
        } else {
            format!("mlp.hidden{i}")
        }
    }
}

impl Parameterized for MlpModel {
    fn param_specs(&self) -> Vec<ParamSpec> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| {
                let name = self.layer_name(i);
                [
                    ParamSpec::new(format!("{name}.w"), vec![l.out_dim, l.in_dim]),
                    ParamSpec::new(format!("{name}.b"), vec![l.out_dim]),
                ]
            })
            .collect()
    }

    fn param_blocks(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [&l.weights[..], &l.biases[..]])
            .collect()
    }

    fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weights[..], &mut l.biases[..]])
            .collect()
    }
}

impl Network for MlpModel {
    fn input_len(&self) -> usize {
        self.variant.input_len(&self.feature)
    }

    fn output_len(&self) -> usize {
        2 * self.feature.carriers
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.layers.iter().fold(x.to_vec(), |h, l| l.forward(&h))
    }

    fn accumulate(&self, x: &[f64], target: &[f64], g_scale: f64, grads: &mut ParamGrads) -> f64 {
        let mut acts = vec![x.to_vec()];
        for l in &self.layers {
            let next = l.forward(acts.last().expect("nonempty"));
            acts.push(next);
        }
        let y = acts.last().expect("nonempty");
        let mut sse = 0.0;
        let mut g: Vec<f64> = y
            .iter()
            .zip(target)
            .map(|(y, t)| {
                let d = y - t;
                sse += d * d;
                2.0 * d * g_scale
            })
            .collect();
        for (i, l) in self.layers.iter().enumerate().rev() {
            let (gw, gb) = grads.blocks[2 * i..2 * i + 2].split_at_mut(1);
            g = l.backward(&acts[i], &acts[i + 1], &g, &mut gw[0], &mut gb[0]);
        }
        sse
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuralcore::count_parameters;

    #[test]
    fn reference_counts() {
        let cases = [
            (build_arvtdnn(1, 3, 17, 0).unwrap(), 393),
            (build_dnn(1, 3, &[17; 3], 0).unwrap(), 801),
            (build_arvtdnn(2, 3, 35, 0).unwrap(), 1579),
            (build_dnn(2, 3, &[25; 3], 0).unwrap(), 1829),
            (build_arvtdnn(3, 2, 40, 0).unwrap(), 2086),
            (build_dnn(3, 2, &[30; 3], 0).unwrap(), 2616),
        ];
        for (m, want) in cases {
            assert_eq!(count_parameters(&m), want, "{:?} K={}", m.variant, m.carriers());
        }
    }

    #[test]
    fn defaults_follow_carrier_count() {
        assert_eq!(default_arvtdnn_hidden(2), 35);
        assert_eq!(default_dnn_hidden(3), vec![30, 30, 30]);
    }

    #[test]
    fn dnn_needs_three_layers() {
        assert!(build_dnn(1, 3, &[17, 17], 0).is_err());
    }

    #[test]
    fn names_are_unique() {
        let m = build_dnn(1, 3, &[4, 4, 4], 0).unwrap();
        let names: Vec<String> = m.param_specs().into_iter().map(|s| s.name).collect();
        assert_eq!(names[0], "mlp.hidden0.w");
        assert_eq!(names.last().unwrap(), "mlp.out.b");
        assert_eq!(names.len(), 8);
    }
}
