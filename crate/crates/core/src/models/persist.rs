//! JSON model files: named parameter arrays plus a `meta` block.

use serde::{Deserialize, Serialize};
use std::path::Path;

use super::gmp::{GmpIndex, GmpModel, BASIS_ORDER};
use super::{AnyModel, BehavioralModel, DrvcnnModel, MlpModel};
use crate::features::{FeatureConfig, MlpVariant};
use crate::neuralcore::{NamedArray, Parameterized};
use crate::{Complex64, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub model_type: String,
    #[serde(rename = "K")]
    pub carriers: usize,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub memory_depth: Option<usize>,
    pub coefficient_count: usize,
    /// How inputs are laid out (networks) or how columns are ordered (GMP).
    pub flatten_order: String,
    /// Per-carrier factors applied to raw I/Q before the model sees it.
    pub scale_factors: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<FeatureConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frozen_conv: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gmp_index: Option<GmpIndex>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_deficient: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_nmse_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub meta: ModelMeta,
    pub params: Vec<NamedArray>,
}

impl ModelFile {
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::format(path, e))?;
        s.push('\n');
        std::fs::write(path, s).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&s).map_err(|e| Error::format(path, e))
    }
}

fn base_meta(model: &AnyModel, scale_factors: &[f64]) -> ModelMeta {
    ModelMeta {
        model_type: model.name().to_string(),
        carriers: model.carriers(),
        memory_depth: None,
        coefficient_count: model.coefficient_count(),
        flatten_order: String::new(),
        scale_factors: scale_factors.to_vec(),
        feature: None,
        hidden: None,
        frozen_conv: None,
        gmp_index: None,
        rank_deficient: None,
        residual_nmse_db: None,
    }
}

impl AnyModel {
    pub fn to_file(&self, scale_factors: &[f64]) -> ModelFile {
        let mut meta = base_meta(self, scale_factors);
        let params = match self {
            AnyModel::Drvcnn(m) => {
                meta.memory_depth = Some(m.feature.memory_depth);
                meta.flatten_order = m.feature.flatten_order(None);
                meta.feature = Some(m.feature.clone());
                meta.frozen_conv = Some(m.frozen_conv);
                m.export_params()
            }
            AnyModel::Mlp(m) => {
                meta.memory_depth = Some(m.feature.memory_depth);
                meta.flatten_order = m.feature.flatten_order(Some(m.variant));
                meta.feature = Some(m.feature.clone());
                meta.hidden = Some(m.hidden_widths());
                m.export_params()
            }
            AnyModel::Gmp(m) => {
                meta.flatten_order = BASIS_ORDER.to_string();
                meta.gmp_index = Some(m.index);
                meta.rank_deficient = Some(m.rank_deficient);
                meta.residual_nmse_db = m.residual_nmse_db;
                let n = m.coeffs.len();
                vec![
                    NamedArray {
                        name: "gmp.coeffs.re".into(),
                        shape: vec![n],
                        values: m.coeffs.iter().map(|c| c.re).collect(),
                    },
                    NamedArray {
                        name: "gmp.coeffs.im".into(),
                        shape: vec![n],
                        values: m.coeffs.iter().map(|c| c.im).collect(),
                    },
                ]
            }
        };
        ModelFile { meta, params }
    }

    pub fn from_file(file: &ModelFile) -> Result<Self> {
        let meta = &file.meta;
        let feature = || {
            meta.feature
                .clone()
                .ok_or_else(|| Error::Config("model file lacks a feature config".into()))
        };
        let model = match meta.model_type.as_str() {
            "drvcnn" => {
                let mut m = DrvcnnModel::new(&feature()?, 0)?;
                m.import_params(&file.params)?;
                m.frozen_conv = meta.frozen_conv.unwrap_or(false);
                AnyModel::Drvcnn(m)
            }
            "arvtdnn" | "dnn" => {
                let variant: MlpVariant = meta.model_type.parse()?;
                let hidden = meta
                    .hidden
                    .clone()
                    .ok_or_else(|| Error::Config("MLP model file lacks hidden widths".into()))?;
                let mut m = MlpModel::new(&feature()?, variant, &hidden, 0)?;
                m.import_params(&file.params)?;
                AnyModel::Mlp(m)
            }
            "gmp" => {
                let index = meta
                    .gmp_index
                    .ok_or_else(|| Error::Config("GMP model file lacks index arrays".into()))?;
                let get = |name: &str| {
                    file.params
                        .iter()
                        .find(|a| a.name == name)
                        .ok_or_else(|| Error::Config(format!("missing parameter block '{name}'")))
                };
                let (re, im) = (get("gmp.coeffs.re")?, get("gmp.coeffs.im")?);
                if re.values.len() != im.values.len() {
                    return Err(Error::Config("GMP real/imaginary parts differ in length".into()));
                }
                let coeffs = re
                    .values
                    .iter()
                    .zip(&im.values)
                    .map(|(&a, &b)| Complex64::new(a, b))
                    .collect();
                let mut m = GmpModel::new(index, coeffs)?;
                m.rank_deficient = meta.rank_deficient.unwrap_or(false);
                m.residual_nmse_db = meta.residual_nmse_db;
                AnyModel::Gmp(m)
            }
            other => return Err(Error::Config(format!("unknown model type '{other}'"))),
        };
        if model.carriers() != meta.carriers {
            return Err(Error::Config(format!(
                "model file says K={}, parameters describe K={}",
                meta.carriers,
                model.carriers()
            )));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path, scale_factors: &[f64]) -> Result<()> {
        self.to_file(scale_factors).write(path)
    }

    pub fn load(path: &Path) -> Result<(Self, ModelMeta)> {
        let file = ModelFile::read(path)?;
        let model = Self::from_file(&file).map_err(|e| match e {
            Error::Config(msg) => Error::format(path, msg),
            other => other,
        })?;
        Ok((model, file.meta))
    }
}
