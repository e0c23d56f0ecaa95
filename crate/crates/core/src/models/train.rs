//! Mini-batch Adam training: the two-stage schedule for the convolutional
//! attention network and a single-stage loop for the MLP baselines.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

use super::drvcnn::DrvcnnModel;
use super::mlp::MlpModel;
use crate::features::{build_feature_matrix, FeatureConfig, InputLayout};
use crate::neuralcore::{adam_step, batch_loss_and_gradients, AdamHyper, AdamState, ConvLayer, Network, Samples};
use crate::signals::Dataset;
use crate::{seed, Error, Exec, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    /// Maximum stage-1 epochs (all parameters).
    pub l1: usize,
    /// Maximum stage-2 epochs (convolution frozen).
    pub l2: usize,
    /// Stop a stage as soon as one batch reaches this MSE.
    pub mse_target: Option<f64>,
    pub seed: u64,
    pub exec: Exec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let h = AdamHyper::default();
        Self {
            lr: h.lr,
            beta1: h.beta1,
            beta2: h.beta2,
            eps: h.eps,
            batch_size: 256,
            l1: 200,
            l2: 100,
            mse_target: None,
            seed: 0,
            exec: Exec::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.lr.is_finite()
            && self.beta1 > 0.0
            && self.beta1 < 1.0
            && self.beta2 > 0.0
            && self.beta2 < 1.0
            && self.eps > 0.0
            && self.batch_size > 0
            && self.mse_target.is_none_or(|t| t > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid training config {self:?}")))
        }
    }

    pub fn hyper(&self) -> AdamHyper {
        AdamHyper {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub stage: u8,
    pub epoch: usize,
    pub mean_mse: f64,
}

/// Per-epoch mean batch MSE of every stage that ran.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub rows: Vec<LogRow>,
}

impl TrainLog {
    pub fn stage(&self, stage: u8) -> impl Iterator<Item = &LogRow> {
        self.rows.iter().filter(move |r| r.stage == stage)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("stage,epoch,mean_mse\n");
        for r in &self.rows {
            writeln!(s, "{},{},{:e}", r.stage, r.epoch, r.mean_mse).expect("string write");
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Row-major feature/target matrices ready for mini-batching.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
    pub in_len: usize,
    pub out_len: usize,
}

impl TrainingSet {
    /// Builds features for every usable time index and the matching
    /// `(I_out_1, Q_out_1, ..., I_out_K, Q_out_K)` targets.
    pub fn from_dataset(ds: &Dataset, feature: &FeatureConfig, layout: InputLayout, exec: Exec) -> Result<Self> {
        if ds.num_carriers() != feature.carriers {
            return Err(Error::Config(format!(
                "dataset has {} carriers, feature config {}",
                ds.num_carriers(),
                feature.carriers
            )));
        }
        let in_len = layout.input_len(feature);
        let first = feature.first_usable();
        let n = ds.num_samples();
        if first >= n {
            return Err(Error::Argument("no usable training samples".into()));
        }
        let all = build_feature_matrix(ds.carriers_in(), feature, layout, exec)?;
        let inputs = all[first * in_len..].to_vec();
        let k = ds.num_carriers();
        let mut targets = Vec::with_capacity((n - first) * 2 * k);
        for i in first..n {
            for c in ds.carriers_out() {
                let v = c.samples()[i];
                targets.push(v.re);
                targets.push(v.im);
            }
        }
        Ok(Self {
            inputs,
            targets,
            in_len,
            out_len: 2 * k,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len() / self.in_len
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn samples(&self) -> Samples<'_> {
        Samples {
            inputs: &self.inputs,
            targets: &self.targets,
            in_len: self.in_len,
            out_len: self.out_len,
        }
    }
}

fn check_fit<N: Network>(net: &N, data: &TrainingSet) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Argument("empty training set".into()));
    }
    if data.in_len != net.input_len() || data.out_len != net.output_len() {
        return Err(Error::Shape(format!(
            "training set is {}->{}, model {}->{}",
            data.in_len,
            data.out_len,
            net.input_len(),
            net.output_len()
        )));
    }
    Ok(())
}

/// Runs up to `epochs` epochs of shuffled mini-batch Adam on the blocks the
/// network marks trainable. Returns early once a batch meets the target.
fn run_stage<N: Network>(
    net: &mut N,
    data: &TrainingSet,
    cfg: &TrainConfig,
    stage: u8,
    epochs: usize,
    log: &mut TrainLog,
) -> Result<()> {
    let trainable = net.trainable_blocks();
    let lens: Vec<usize> = net
        .param_blocks()
        .iter()
        .zip(&trainable)
        .filter(|(_, t)| **t)
        .map(|(b, _)| b.len())
        .collect();
    let mut adam = AdamState::new(cfg.hyper(), &lens);
    let mut rng = seed::rng(seed::derive(cfg.seed, &format!("train/stage{stage}")));
    let mut order: Vec<usize> = (0..data.len()).collect();

    for epoch in 1..=epochs {
        order.shuffle(&mut rng);
        let mut weighted = 0.0;
        let mut seen = 0usize;
        let mut reached = false;
        for batch in order.chunks(cfg.batch_size) {
            let (mse, grads) = batch_loss_and_gradients(&*net, data.samples(), batch, cfg.exec);
            if !mse.is_finite() {
                return Err(Error::Diverged { stage, epoch, mse });
            }
            weighted += mse * batch.len() as f64;
            seen += batch.len();
            if cfg.mse_target.is_some_and(|t| mse <= t) {
                reached = true;
                break;
            }
            let g: Vec<Vec<f64>> = grads
                .blocks
                .into_iter()
                .zip(&trainable)
                .filter(|(_, t)| **t)
                .map(|(g, _)| g)
                .collect();
            let mut params: Vec<&mut [f64]> = net
                .param_blocks_mut()
                .into_iter()
                .zip(&trainable)
                .filter(|(_, t)| **t)
                .map(|(p, _)| p)
                .collect();
            adam_step(&mut params, &g, &mut adam);
        }
        log.rows.push(LogRow {
            stage,
            epoch,
            mean_mse: weighted / seen as f64,
        });
        if reached {
            break;
        }
    }
    Ok(())
}

/// Stage 1 trains every parameter; the convolution is then frozen and
/// stage 2 retrains attention and head. The frozen convolution is returned
/// bit-for-bit as stage 1 left it.
pub fn train_two_stage_on(
    model: &DrvcnnModel,
    data: &TrainingSet,
    cfg: &TrainConfig,
) -> Result<(DrvcnnModel, TrainLog)> {
    cfg.validate()?;
    check_fit(model, data)?;
    let mut m = model.clone();
    let mut log = TrainLog::default();
    m.frozen_conv = false;
    run_stage(&mut m, data, cfg, 1, cfg.l1, &mut log)?;
    m.frozen_conv = true;
    let filter = m.conv.clone();
    run_stage(&mut m, data, cfg, 2, cfg.l2, &mut log)?;
    check_frozen(&filter, &m)?;
    Ok((m, log))
}

fn check_frozen(filter: &ConvLayer, m: &DrvcnnModel) -> Result<()> {
    if *filter != m.conv {
        return Err(Error::Pipeline("convolution changed during stage 2".into()));
    }
    Ok(())
}

/// [`train_two_stage_on`] with features built from a dataset.
pub fn train_two_stage(model: &DrvcnnModel, train: &Dataset, cfg: &TrainConfig) -> Result<(DrvcnnModel, TrainLog)> {
    let data = TrainingSet::from_dataset(train, &model.feature, InputLayout::Tensor, cfg.exec)?;
    train_two_stage_on(model, &data, cfg)
}

/// Stage 2 alone, for a model whose convolution was loaded from elsewhere.
pub fn train_stage2_on(model: &DrvcnnModel, data: &TrainingSet, cfg: &TrainConfig) -> Result<(DrvcnnModel, TrainLog)> {
    cfg.validate()?;
    check_fit(model, data)?;
    let mut m = model.clone();
    m.frozen_conv = true;
    let filter = m.conv.clone();
    let mut log = TrainLog::default();
    run_stage(&mut m, data, cfg, 2, cfg.l2, &mut log)?;
    check_frozen(&filter, &m)?;
    Ok((m, log))
}

/// Single-stage training of an MLP baseline for `l1 + l2` epochs, so it gets
/// the same optimizer budget as the two-stage network.
pub fn train_mlp_on(model: &MlpModel, data: &TrainingSet, cfg: &TrainConfig) -> Result<(MlpModel, TrainLog)> {
    cfg.validate()?;
    check_fit(model, data)?;
    let mut m = model.clone();
    let mut log = TrainLog::default();
    run_stage(&mut m, data, cfg, 1, cfg.l1 + cfg.l2, &mut log)?;
    Ok((m, log))
}

pub fn train_mlp(model: &MlpModel, train: &Dataset, cfg: &TrainConfig) -> Result<(MlpModel, TrainLog)> {
    let data = TrainingSet::from_dataset(train, &model.feature, InputLayout::Mlp(model.variant), cfg.exec)?;
    train_mlp_on(model, &data, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::build_drvcnn;
    use crate::neuralcore::Parameterized;

    fn toy(net: &impl Network, n: usize) -> TrainingSet {
        let in_len = net.input_len();
        let out_len = net.output_len();
        let inputs: Vec<f64> = (0..n * in_len)
            .map(|i| ((i * 7919) % 101) as f64 / 101.0 - 0.5)
            .collect();
        let targets: Vec<f64> = (0..n)
            .flat_map(|s| {
                let x = &inputs[s * in_len..(s + 1) * in_len];
                (0..out_len).map(move |o| 0.5 * x[o].tanh() - 0.2 * x[o + 1] * x[o + 2])
            })
            .collect();
        TrainingSet {
            inputs,
            targets,
            in_len,
            out_len,
        }
    }

    fn cfg(l1: usize, l2: usize) -> TrainConfig {
        TrainConfig {
            l1,
            l2,
            batch_size: 16,
            lr: 3e-3,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn huge_target_exits_each_stage_after_one_epoch() {
        let m = build_drvcnn(1, 3, 1).unwrap();
        let data = toy(&m, 64);
        let c = TrainConfig {
            mse_target: Some(1e9),
            ..cfg(5, 5)
        };
        let (trained, log) = train_two_stage_on(&m, &data, &c).unwrap();
        assert_eq!(log.rows.len(), 2);
        assert_eq!((log.rows[0].stage, log.rows[0].epoch), (1, 1));
        assert_eq!((log.rows[1].stage, log.rows[1].epoch), (2, 1));
        // exit happens before any update
        assert_eq!(trained.export_params(), m.export_params());
    }

    #[test]
    fn no_stage_two_keeps_stage_one_model() {
        let m = build_drvcnn(1, 3, 2).unwrap();
        let data = toy(&m, 48);
        let (a, _) = train_two_stage_on(&m, &data, &cfg(2, 0)).unwrap();
        let (b, log) = train_two_stage_on(&m, &data, &cfg(2, 3)).unwrap();
        assert!(a.frozen_conv);
        assert_eq!(a.conv, b.conv);
        assert_eq!(log.stage(2).count(), 3);
    }

    #[test]
    fn deterministic_and_descending() {
        let m = build_drvcnn(1, 3, 3).unwrap();
        let data = toy(&m, 128);
        let (a, la) = train_two_stage_on(&m, &data, &cfg(8, 2)).unwrap();
        let (b, lb) = train_two_stage_on(&m, &data, &cfg(8, 2)).unwrap();
        assert_eq!(a, b);
        assert_eq!(la, lb);
        let s1: Vec<f64> = la.stage(1).map(|r| r.mean_mse).collect();
        assert!(s1.last().unwrap() <= &s1[0]);
    }

    #[test]
    fn parallel_matches_sequential() {
        let m = build_drvcnn(2, 3, 4).unwrap();
        let data = toy(&m, 100);
        let seq = TrainConfig {
            exec: Exec::Sequential,
            ..cfg(2, 1)
        };
        let par = TrainConfig {
            exec: Exec::Parallel,
            ..cfg(2, 1)
        };
        assert_eq!(
            train_two_stage_on(&m, &data, &seq).unwrap(),
            train_two_stage_on(&m, &data, &par).unwrap()
        );
    }

    #[test]
    fn divergence_is_reported() {
        let mut m = build_drvcnn(1, 3, 5).unwrap();
        m.out.biases[0] = f64::NAN;
        let data = toy(&m, 16);
        match train_two_stage_on(&m, &data, &cfg(3, 3)) {
            Err(Error::Diverged { stage, epoch, .. }) => assert_eq!((stage, epoch), (1, 1)),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn csv_log() {
        let log = TrainLog {
            rows: vec![LogRow {
                stage: 1,
                epoch: 1,
                mean_mse: 0.25,
            }],
        };
        assert_eq!(log.to_csv(), "stage,epoch,mean_mse\n1,1,2.5e-1\n");
    }

    #[test]
    fn rejects_bad_config() {
        let c = TrainConfig {
            beta1: 1.0,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
        let c = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
