//! The convolutional attention network, its two-stage trainer and the
//! ARVTDNN, DNN and GMP baselines, all behind [`BehavioralModel`].

mod drvcnn;
mod gmp;
mod lstsq;
mod mlp;
mod persist;
mod train;

pub use drvcnn::{build_drvcnn, load_predesigned_filter, model_forward, model_gradients, DrvcnnModel};
pub use gmp::{gmp_design_matrix, gmp_fit, gmp_predict, gmp_residual_db, Block, GmpIndex, GmpModel, BASIS_ORDER};
pub use lstsq::{complex_lstsq, CMatrix, LstsqSolution};
pub use mlp::{build_arvtdnn, build_dnn, default_arvtdnn_hidden, default_dnn_hidden, MlpModel};
pub use persist::{ModelFile, ModelMeta};
pub use train::{
    train_mlp, train_mlp_on, train_stage2_on, train_two_stage, train_two_stage_on, LogRow, TrainConfig, TrainLog,
    TrainingSet,
};

use crate::exec::map_chunks;
use crate::features::{build_feature_matrix, FeatureConfig, InputLayout};
use crate::neuralcore::{count_parameters, Network};
use crate::signals::ComplexSeries;
use crate::{Complex64, Error, Exec, Result};

/// What evaluation needs from any trained model.
pub trait BehavioralModel {
    fn name(&self) -> &str;
    fn carriers(&self) -> usize;
    /// Trainable real scalars.
    fn coefficient_count(&self) -> usize;
    /// One predicted output series per carrier, same length as the input.
    fn predict_with(&self, carriers_in: &[ComplexSeries], exec: Exec) -> Result<Vec<ComplexSeries>>;
}

/// Predicted PA output for every carrier.
pub fn predict_series(model: &dyn BehavioralModel, carriers_in: &[ComplexSeries]) -> Result<Vec<ComplexSeries>> {
    model.predict_with(carriers_in, Exec::default())
}

fn check_carriers(expected: usize, carriers_in: &[ComplexSeries]) -> Result<()> {
    if carriers_in.len() != expected {
        return Err(Error::Config(format!(
            "model built for K={expected}, got {} carriers",
            carriers_in.len()
        )));
    }
    Ok(())
}

const PREDICT_CHUNK: usize = 512;

fn predict_network<N: Network>(
    net: &N,
    feature: &FeatureConfig,
    layout: InputLayout,
    carriers_in: &[ComplexSeries],
    exec: Exec,
) -> Result<Vec<ComplexSeries>> {
    check_carriers(feature.carriers, carriers_in)?;
    let feats = build_feature_matrix(carriers_in, feature, layout, exec)?;
    let in_len = net.input_len();
    let n = carriers_in[0].len();
    let idx: Vec<usize> = (0..n).collect();
    let outs = map_chunks(exec, &idx, PREDICT_CHUNK, |_, chunk| {
        chunk
            .iter()
            .flat_map(|&i| net.forward(&feats[i * in_len..(i + 1) * in_len]))
            .collect::<Vec<f64>>()
    })
    .concat();
    let k = feature.carriers;
    let fs = carriers_in[0].sample_rate_hz();
    (0..k)
        .map(|c| {
            let s = (0..n)
                .map(|i| Complex64::new(outs[i * 2 * k + 2 * c], outs[i * 2 * k + 2 * c + 1]))
                .collect();
            ComplexSeries::new(s, fs)
        })
        .collect()
}

impl BehavioralModel for DrvcnnModel {
    fn name(&self) -> &str {
        "drvcnn"
    }

    fn carriers(&self) -> usize {
        self.feature.carriers
    }

    fn coefficient_count(&self) -> usize {
        count_parameters(self)
    }

    fn predict_with(&self, carriers_in: &[ComplexSeries], exec: Exec) -> Result<Vec<ComplexSeries>> {
        predict_network(self, &self.feature, InputLayout::Tensor, carriers_in, exec)
    }
}

impl BehavioralModel for MlpModel {
    fn name(&self) -> &str {
        self.variant.name()
    }

    fn carriers(&self) -> usize {
        self.feature.carriers
    }

    fn coefficient_count(&self) -> usize {
        count_parameters(self)
    }

    fn predict_with(&self, carriers_in: &[ComplexSeries], exec: Exec) -> Result<Vec<ComplexSeries>> {
        predict_network(self, &self.feature, InputLayout::Mlp(self.variant), carriers_in, exec)
    }
}

impl BehavioralModel for GmpModel {
    fn name(&self) -> &str {
        "gmp"
    }

    fn carriers(&self) -> usize {
        1
    }

    fn coefficient_count(&self) -> usize {
        GmpModel::coefficient_count(self)
    }

    fn predict_with(&self, carriers_in: &[ComplexSeries], _exec: Exec) -> Result<Vec<ComplexSeries>> {
        check_carriers(1, carriers_in)?;
        Ok(vec![gmp_predict(self, &carriers_in[0])?])
    }
}

/// Any of the supported model families.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyModel {
    Drvcnn(DrvcnnModel),
    Mlp(MlpModel),
    Gmp(GmpModel),
}

impl AnyModel {
    fn inner(&self) -> &dyn BehavioralModel {
        match self {
            AnyModel::Drvcnn(m) => m,
            AnyModel::Mlp(m) => m,
            AnyModel::Gmp(m) => m,
        }
    }
}

impl BehavioralModel for AnyModel {
    fn name(&self) -> &str {
        self.inner().name()
    }

    fn carriers(&self) -> usize {
        self.inner().carriers()
    }

    fn coefficient_count(&self) -> usize {
        self.inner().coefficient_count()
    }

    fn predict_with(&self, carriers_in: &[ComplexSeries], exec: Exec) -> Result<Vec<ComplexSeries>> {
        self.inner().predict_with(carriers_in, exec)
    }
}
