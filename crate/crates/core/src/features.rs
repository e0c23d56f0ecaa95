//! Per-carrier I/Q + envelope feature matrices and their stacked tensor.
//!
//! For carrier `k` at time `n` the matrix has one column per lag
//! `0..=M` and the rows `I`, `Q`, `|x|^e` for each configured envelope
//! exponent `e` (default 1, 2, 3, giving five rows). Samples before the start
//! of the record are zero.

use serde::{Deserialize, Serialize};
use std::str::FromStr;

use crate::exec::{map_range, Exec};
use crate::neuralcore::Tensor3;
use crate::signals::ComplexSeries;
use crate::{Complex64, Error, Result};

/// How samples whose lag window reaches before the record start are used
/// for training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgePolicy {
    /// Missing history is zero.
    #[default]
    ZeroPad,
    /// The first `M` samples are left out of training sets. Prediction
    /// still zero-pads so output length matches input length.
    Drop,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub memory_depth: usize,
    pub carriers: usize,
    #[serde(default = "default_exponents")]
    pub envelope_exponents: Vec<u32>,
    #[serde(default)]
    pub edge: EdgePolicy,
}

fn default_exponents() -> Vec<u32> {
    vec![1, 2, 3]
}

impl FeatureConfig {
    pub fn new(carriers: usize, memory_depth: usize) -> Self {
        Self {
            memory_depth,
            carriers,
            envelope_exponents: default_exponents(),
            edge: EdgePolicy::ZeroPad,
        }
    }

    pub fn rows(&self) -> usize {
        2 + self.envelope_exponents.len()
    }

    pub fn lags(&self) -> usize {
        self.memory_depth + 1
    }

    /// Length of one stacked tensor, `rows * (M+1) * K`.
    pub fn tensor_len(&self) -> usize {
        self.rows() * self.lags() * self.carriers
    }

    pub fn validate(&self) -> Result<()> {
        if self.carriers == 0 {
            return Err(Error::Config("feature config needs K >= 1".into()));
        }
        if self.envelope_exponents.contains(&0) {
            return Err(Error::Config("envelope exponents must be positive".into()));
        }
        Ok(())
    }

    /// Index of the first training sample under the edge policy.
    pub fn first_usable(&self) -> usize {
        match self.edge {
            EdgePolicy::ZeroPad => 0,
            EdgePolicy::Drop => self.memory_depth,
        }
    }

    /// Human-readable flatten order, stored in model files.
    pub fn flatten_order(&self, variant: Option<MlpVariant>) -> String {
        let rows = match variant {
            Some(MlpVariant::Dnn) => 2,
            _ => self.rows(),
        };
        match variant {
            None => format!(
                "tensor[row][lag][carrier], rows={rows}, lags={}, carriers={}",
                self.lags(),
                self.carriers
            ),
            Some(_) => format!(
                "vector[carrier][row][lag], rows={rows}, lags={}, carriers={}",
                self.lags(),
                self.carriers
            ),
        }
    }
}

/// Flattened-input baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MlpVariant {
    /// All rows, `rows * (M+1) * K` inputs.
    Arvtdnn,
    /// I/Q rows only, `2 * (M+1) * K` inputs.
    Dnn,
}

impl MlpVariant {
    pub fn input_len(self, cfg: &FeatureConfig) -> usize {
        match self {
            MlpVariant::Arvtdnn => cfg.tensor_len(),
            MlpVariant::Dnn => 2 * cfg.lags() * cfg.carriers,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MlpVariant::Arvtdnn => "arvtdnn",
            MlpVariant::Dnn => "dnn",
        }
    }
}

impl FromStr for MlpVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "arvtdnn" => Ok(MlpVariant::Arvtdnn),
            "dnn" => Ok(MlpVariant::Dnn),
            other => Err(Error::Argument(format!("unknown MLP variant '{other}'"))),
        }
    }
}

/// Time-indexed stacked feature tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    pub values: Tensor3,
    pub time_index: usize,
}

#[inline]
fn sample_at(x: &[Complex64], n: usize, lag: usize) -> Complex64 {
    if lag > n {
        Complex64::new(0.0, 0.0)
    } else {
        x[n - lag]
    }
}

#[inline]
fn feature_value(v: Complex64, row: usize, exps: &[u32]) -> f64 {
    match row {
        0 => v.re,
        1 => v.im,
        r => v.norm().powi(exps[r - 2] as i32),
    }
}

/// The `rows x (M+1)` matrix of one carrier at time `n`, row-major.
pub fn build_carrier_matrix(x: &ComplexSeries, n: usize, cfg: &FeatureConfig) -> Result<Vec<Vec<f64>>> {
    if n >= x.len() {
        return Err(Error::Argument(format!(
            "time index {n} out of range for length {}",
            x.len()
        )));
    }
    let s = x.samples();
    Ok((0..cfg.rows())
        .map(|r| {
            (0..cfg.lags())
                .map(|l| feature_value(sample_at(s, n, l), r, &cfg.envelope_exponents))
                .collect()
        })
        .collect())
}

fn check_carriers(carriers: &[ComplexSeries], cfg: &FeatureConfig) -> Result<usize> {
    cfg.validate()?;
    if carriers.len() != cfg.carriers {
        return Err(Error::Argument(format!(
            "{} carriers given, feature config expects {}",
            carriers.len(),
            cfg.carriers
        )));
    }
    let len = carriers[0].len();
    if carriers.iter().any(|c| c.len() != len) {
        return Err(Error::Argument("carriers differ in length".into()));
    }
    Ok(len)
}

/// Writes the stacked tensor for time `n` in `[row][lag][carrier]` order.
fn fill_tensor(carriers: &[&[Complex64]], n: usize, cfg: &FeatureConfig, out: &mut [f64]) {
    let (w, k) = (cfg.lags(), carriers.len());
    for (c, x) in carriers.iter().enumerate() {
        for l in 0..w {
            let v = sample_at(x, n, l);
            let mag = v.norm();
            out[l * k + c] = v.re;
            out[(w + l) * k + c] = v.im;
            for (e, &p) in cfg.envelope_exponents.iter().enumerate() {
                out[((2 + e) * w + l) * k + c] = mag.powi(p as i32);
            }
        }
    }
}

/// Writes the flattened MLP input for time `n`: carriers outermost, then
/// row, then lag.
fn fill_mlp(carriers: &[&[Complex64]], n: usize, cfg: &FeatureConfig, variant: MlpVariant, out: &mut [f64]) {
    let rows = match variant {
        MlpVariant::Arvtdnn => cfg.rows(),
        MlpVariant::Dnn => 2,
    };
    let w = cfg.lags();
    let mut i = 0;
    for x in carriers {
        for r in 0..rows {
            for l in 0..w {
                out[i] = feature_value(sample_at(x, n, l), r, &cfg.envelope_exponents);
                i += 1;
            }
        }
    }
}

/// Stacks the K carrier matrices along the third axis.
pub fn build_input_tensor(carriers: &[ComplexSeries], n: usize, cfg: &FeatureConfig) -> Result<FeatureTensor> {
    let len = check_carriers(carriers, cfg)?;
    if n >= len {
        return Err(Error::Argument(format!("time index {n} out of range for length {len}")));
    }
    let views: Vec<&[Complex64]> = carriers.iter().map(|c| c.samples()).collect();
    let mut values = vec![0.0; cfg.tensor_len()];
    fill_tensor(&views, n, cfg, &mut values);
    Ok(FeatureTensor {
        values: Tensor3::from_vec((cfg.rows(), cfg.lags(), cfg.carriers), values)?,
        time_index: n,
    })
}

/// Flattened input vector for the ARVTDNN / DNN baselines.
pub fn build_mlp_features(
    carriers: &[ComplexSeries],
    n: usize,
    cfg: &FeatureConfig,
    variant: MlpVariant,
) -> Result<Vec<f64>> {
    let len = check_carriers(carriers, cfg)?;
    if n >= len {
        return Err(Error::Argument(format!("time index {n} out of range for length {len}")));
    }
    let views: Vec<&[Complex64]> = carriers.iter().map(|c| c.samples()).collect();
    let mut out = vec![0.0; variant.input_len(cfg)];
    fill_mlp(&views, n, cfg, variant, &mut out);
    Ok(out)
}

/// Which input layout a network consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputLayout {
    Tensor,
    Mlp(MlpVariant),
}

impl InputLayout {
    pub fn input_len(self, cfg: &FeatureConfig) -> usize {
        match self {
            InputLayout::Tensor => cfg.tensor_len(),
            InputLayout::Mlp(v) => v.input_len(cfg),
        }
    }
}

/// Features for every time index, concatenated (`len * input_len` values).
pub fn build_feature_matrix(
    carriers: &[ComplexSeries],
    cfg: &FeatureConfig,
    layout: InputLayout,
    exec: Exec,
) -> Result<Vec<f64>> {
    let len = check_carriers(carriers, cfg)?;
    let views: Vec<&[Complex64]> = carriers.iter().map(|c| c.samples()).collect();
    let stride = layout.input_len(cfg);
    let rows = map_range(exec, len, |n| {
        let mut row = vec![0.0; stride];
        match layout {
            InputLayout::Tensor => fill_tensor(&views, n, cfg, &mut row),
            InputLayout::Mlp(v) => fill_mlp(&views, n, cfg, v, &mut row),
        }
        row
    });
    Ok(rows.concat())
}
