//! JSON-configured experiment runs: synthesize a dataset, train the
//! requested models on the 3:2 split, evaluate them on the held-out part.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::{Path, PathBuf};

use crate::eval::{compare_report, error_spectrum, CompareReport, Split, WelchConfig};
use crate::features::{FeatureConfig, InputLayout, MlpVariant};
use crate::models::{
    default_arvtdnn_hidden, default_dnn_hidden, gmp_fit, load_predesigned_filter, train_mlp_on, train_stage2_on,
    train_two_stage_on, AnyModel, BehavioralModel, DrvcnnModel, GmpIndex, MlpModel, TrainConfig, TrainLog, TrainingSet,
};
use crate::signals::{
    split_dataset, synthesize_dataset, CarrierConfig, Dataset, PaOracleConfig, SignalConfig, StaticNonlinearity,
};
use crate::{seed, Complex64, Error, Result};

/// One model to train and evaluate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ModelSpec {
    Drvcnn {
        /// Model file whose convolution is reused frozen; only stage 2 runs.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        predesigned_filter: Option<PathBuf>,
    },
    Arvtdnn {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hidden: Option<usize>,
    },
    Dnn {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hidden: Option<Vec<usize>>,
    },
    Gmp {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        index: Option<GmpIndex>,
    },
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Drvcnn { .. } => "drvcnn",
            ModelSpec::Arvtdnn { .. } => "arvtdnn",
            ModelSpec::Dnn { .. } => "dnn",
            ModelSpec::Gmp { .. } => "gmp",
        }
    }

    pub fn drvcnn() -> Self {
        ModelSpec::Drvcnn {
            predesigned_filter: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub seed: u64,
    pub signal: SignalConfig,
    pub pa: PaOracleConfig,
    pub feature: FeatureConfig,
    pub models: Vec<ModelSpec>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_split")]
    pub split: [usize; 2],
    #[serde(default)]
    pub spectrum: WelchConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_name() -> String {
    "experiment".into()
}

fn default_split() -> [usize; 2] {
    [3, 2]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s).map_err(|e| Error::format(path, e))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn carriers(&self) -> usize {
        self.signal.carriers.len()
    }

    /// Checks K consistency and model support.
    pub fn validate(&self) -> Result<()> {
        let k = self.carriers();
        if k == 0 {
            return Err(Error::Config("no carriers configured".into()));
        }
        if self.feature.carriers != k {
            return Err(Error::Config(format!(
                "feature config has K={}, signal has {k} carriers",
                self.feature.carriers
            )));
        }
        self.feature.validate()?;
        self.train.validate()?;
        if self.models.is_empty() {
            return Err(Error::Config("no models requested".into()));
        }
        if k > 1 && self.models.iter().any(|m| matches!(m, ModelSpec::Gmp { .. })) {
            return Err(Error::Unsupported("multi-carrier GMP unsupported".into()));
        }
        Ok(())
    }

    /// Signal config with every unset carrier seed derived from the master
    /// seed.
    pub fn resolved_signal(&self) -> SignalConfig {
        let mut s = self.signal.clone();
        for (i, c) in s.carriers.iter_mut().enumerate() {
            if c.seed.is_none() {
                c.seed = Some(seed::derive(self.seed, &format!("carrier/{i}")));
            }
        }
        s
    }

    /// File stems, unique per model entry (`drvcnn`, or `drvcnn_1`, ... when
    /// one family appears more than once).
    pub fn model_stems(&self) -> Vec<String> {
        let mut totals: HashMap<&str, usize> = HashMap::new();
        for m in &self.models {
            *totals.entry(m.name()).or_default() += 1;
        }
        let mut seen: HashMap<&str, usize> = HashMap::new();
        self.models
            .iter()
            .map(|m| {
                let n = seen.entry(m.name()).or_default();
                *n += 1;
                if totals[m.name()] > 1 {
                    format!("{}_{}", m.name(), *n)
                } else {
                    m.name().to_string()
                }
            })
            .collect()
    }
}

/// Paths of everything a run writes below `out`.
#[derive(Debug, Clone)]
pub struct Layout {
    pub out: PathBuf,
}

impl Layout {
    pub fn new(out: impl Into<PathBuf>) -> Self {
        Self { out: out.into() }
    }

    pub fn dataset(&self) -> PathBuf {
        self.out.join("dataset.csv")
    }

    pub fn model(&self, stem: &str) -> PathBuf {
        self.out.join(format!("model_{stem}.json"))
    }

    pub fn train_log(&self, stem: &str) -> PathBuf {
        self.out.join(format!("train_log_{stem}.csv"))
    }

    pub fn report_csv(&self) -> PathBuf {
        self.out.join("report.csv")
    }

    pub fn report_json(&self) -> PathBuf {
        self.out.join("report.json")
    }

    pub fn spectrum(&self, stem: &str, carrier: usize) -> PathBuf {
        self.out.join(format!("spectrum_{stem}_c{}.csv", carrier + 1))
    }

    fn ensure(&self) -> Result<()> {
        std::fs::create_dir_all(&self.out).map_err(|e| Error::io(&self.out, e))
    }
}

/// Synthesizes the dataset and writes it (CSV + JSON sidecar).
pub fn run_generate(cfg: &ExperimentConfig, layout: &Layout) -> Result<Dataset> {
    cfg.validate()?;
    layout.ensure()?;
    let ds = synthesize_dataset(&cfg.resolved_signal(), &cfg.pa)?;
    ds.write_csv(&layout.dataset())?;
    Ok(ds)
}

fn load_dataset(cfg: &ExperimentConfig, path: &Path) -> Result<Dataset> {
    let ds = Dataset::read_csv(path)?;
    if ds.num_carriers() != cfg.carriers() {
        return Err(Error::Config(format!(
            "dataset has K={}, config K={}",
            ds.num_carriers(),
            cfg.carriers()
        )));
    }
    Ok(ds)
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub stem: String,
    pub model: AnyModel,
    pub log: Option<TrainLog>,
}

/// Trains every configured model on the training split of `ds`.
pub fn train_models(cfg: &ExperimentConfig, ds: &Dataset) -> Result<Vec<TrainedModel>> {
    cfg.validate()?;
    let (train, _) = split_dataset(ds, cfg.split[0], cfg.split[1])?;
    let k = cfg.carriers();
    let exec = cfg.train.exec;
    let mut out = Vec::with_capacity(cfg.models.len());
    for (spec, stem) in cfg.models.iter().zip(cfg.model_stems()) {
        let init_seed = seed::derive(cfg.seed, &format!("init/{stem}"));
        let tcfg = TrainConfig {
            seed: seed::derive(cfg.seed, &format!("train/{stem}")),
            ..cfg.train.clone()
        };
        let (model, log) = match spec {
            ModelSpec::Drvcnn { predesigned_filter } => {
                let fresh = DrvcnnModel::new(&cfg.feature, init_seed)?;
                let data = TrainingSet::from_dataset(&train, &cfg.feature, InputLayout::Tensor, exec)?;
                let (trained, log) = match predesigned_filter {
                    None => train_two_stage_on(&fresh, &data, &tcfg)?,
                    Some(path) => {
                        let (donor, _) = AnyModel::load(path)?;
                        let AnyModel::Drvcnn(donor) = donor else {
                            return Err(Error::Config(format!("{} is not a drvcnn model file", path.display())));
                        };
                        let seeded = load_predesigned_filter(&fresh, &donor.conv)?;
                        train_stage2_on(&seeded, &data, &tcfg)?
                    }
                };
                (AnyModel::Drvcnn(trained), Some(log))
            }
            ModelSpec::Arvtdnn { hidden } => {
                let h = hidden.unwrap_or_else(|| default_arvtdnn_hidden(k));
                let net = MlpModel::new(&cfg.feature, MlpVariant::Arvtdnn, &[h], init_seed)?;
                let data = TrainingSet::from_dataset(&train, &cfg.feature, InputLayout::Mlp(net.variant), exec)?;
                let (trained, log) = train_mlp_on(&net, &data, &tcfg)?;
                (AnyModel::Mlp(trained), Some(log))
            }
            ModelSpec::Dnn { hidden } => {
                let h = hidden.clone().unwrap_or_else(|| default_dnn_hidden(k));
                let net = MlpModel::new(&cfg.feature, MlpVariant::Dnn, &h, init_seed)?;
                let data = TrainingSet::from_dataset(&train, &cfg.feature, InputLayout::Mlp(net.variant), exec)?;
                let (trained, log) = train_mlp_on(&net, &data, &tcfg)?;
                (AnyModel::Mlp(trained), Some(log))
            }
            ModelSpec::Gmp { index } => {
                let idx = index.unwrap_or_default();
                let fit = gmp_fit(&train.carriers_in()[0], &train.carriers_out()[0], &idx)?;
                (AnyModel::Gmp(fit), None)
            }
        };
        out.push(TrainedModel { stem, model, log });
    }
    Ok(out)
}

/// Trains from the dataset at `dataset` and writes model files and logs.
pub fn run_train(cfg: &ExperimentConfig, dataset: &Path, layout: &Layout) -> Result<Vec<TrainedModel>> {
    cfg.validate()?;
    let ds = load_dataset(cfg, dataset)?;
    layout.ensure()?;
    let trained = train_models(cfg, &ds)?;
    for t in &trained {
        t.model.save(&layout.model(&t.stem), ds.scale_factors())?;
        if let Some(log) = &t.log {
            log.write_csv(&layout.train_log(&t.stem))?;
        }
    }
    Ok(trained)
}

/// Error spectrum of one model on one carrier: (model stem, carrier index, trace).
pub type Spectrum = (String, usize, crate::eval::SpectrumTrace);

/// Evaluates models on the test split, returning the report and one error
/// spectrum per (model, carrier). The Welch length shrinks to a power of two
/// that fits when the test split is shorter than `nfft`.
pub fn evaluate_models(
    cfg: &ExperimentConfig,
    ds: &Dataset,
    models: &[(String, AnyModel)],
) -> Result<(CompareReport, Vec<Spectrum>)> {
    let (_, test) = split_dataset(ds, cfg.split[0], cfg.split[1])?;
    let refs: Vec<&dyn BehavioralModel> = models.iter().map(|(_, m)| m as &dyn BehavioralModel).collect();
    let report = compare_report(&refs, &test, &cfg.name, Split::Test)?;
    let mut welch = cfg.spectrum;
    if test.num_samples() < welch.nfft {
        welch.nfft = 1 << test.num_samples().ilog2();
    }
    let mut spectra = Vec::new();
    for (stem, m) in models {
        let pred = m.predict_with(test.carriers_in(), cfg.train.exec)?;
        for (c, (p, meas)) in pred.iter().zip(test.carriers_out()).enumerate() {
            let mut trace = error_spectrum(p, meas, test.sample_rate_hz(), welch)?;
            trace.label = format!("{stem} carrier {}", c + 1);
            spectra.push((stem.clone(), c, trace));
        }
    }
    Ok((report, spectra))
}

/// Loads the trained model files, evaluates them and writes the report and
/// spectra.
pub fn run_evaluate(cfg: &ExperimentConfig, dataset: &Path, layout: &Layout) -> Result<CompareReport> {
    cfg.validate()?;
    let ds = load_dataset(cfg, dataset)?;
    let mut models = Vec::new();
    for stem in cfg.model_stems() {
        let (m, _) = AnyModel::load(&layout.model(&stem))?;
        models.push((stem, m));
    }
    layout.ensure()?;
    let (report, spectra) = evaluate_models(cfg, &ds, &models)?;
    report.write(&layout.report_csv(), &layout.report_json())?;
    for (stem, c, trace) in &spectra {
        trace.write_csv(&layout.spectrum(stem, *c))?;
    }
    Ok(report)
}

/// `generate`, `train` and `evaluate` in sequence.
pub fn run_all(cfg: &ExperimentConfig, layout: &Layout) -> Result<CompareReport> {
    run_generate(cfg, layout)?;
    run_train(cfg, &layout.dataset(), layout)?;
    run_evaluate(cfg, &layout.dataset(), layout)
}

/// Wiener–Hammerstein PA used by the presets: 3-tap input and output
/// filters around a Rapp (p = 2) compressor.
pub fn desk_pa() -> PaOracleConfig {
    PaOracleConfig {
        pre_fir: vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.5, -0.3),
            Complex64::new(0.2, 0.1),
        ],
        static_nl: StaticNonlinearity::Rapp {
            smoothness: 2.0,
            sat_level: 0.35,
        },
        post_fir: vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(-0.1, 0.06),
            Complex64::new(0.03, -0.02),
        ],
        iq_imbalance: None,
        dc_offset: None,
    }
}

/// Composite RMS backoff of the multi-carrier presets, in dB below full
/// scale. Single-carrier presets keep the per-carrier default of 10 dB.
pub const MULTI_CARRIER_BACKOFF_DB: f64 = 19.0;

/// Named experiment shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// One 100 MHz carrier, M = 3, all four models.
    Single,
    /// Two 40 MHz carriers, M = 3.
    Dual,
    /// Three 20 MHz carriers, M = 2.
    Triple,
    /// Three 28 MHz carriers, M = 2.
    Triple28,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Preset::Single),
            "dual" => Ok(Preset::Dual),
            "triple" => Ok(Preset::Triple),
            "triple28" => Ok(Preset::Triple28),
            other => Err(Error::Argument(format!(
                "unknown preset '{other}' (single, dual, triple, triple28)"
            ))),
        }
    }
}

impl Preset {
    pub fn config(self) -> ExperimentConfig {
        let (k, bw, nsc, os, m) = match self {
            Preset::Single => (1, 100e6, 600, 4, 3),
            Preset::Dual => (2, 40e6, 240, 8, 3),
            Preset::Triple => (3, 20e6, 120, 8, 2),
            Preset::Triple28 => (3, 28e6, 168, 8, 2),
        };
        let mut carrier = CarrierConfig::new(nsc, bw, os, 64);
        if k > 1 {
            carrier.rms_backoff_db = MULTI_CARRIER_BACKOFF_DB + 10.0 * (k as f64).log10();
        }
        let carriers = vec![carrier; k];
        let mut models = vec![
            ModelSpec::drvcnn(),
            ModelSpec::Arvtdnn { hidden: None },
            ModelSpec::Dnn { hidden: None },
        ];
        if k == 1 {
            models.push(ModelSpec::Gmp { index: None });
        }
        let name = match self {
            Preset::Single => "single",
            Preset::Dual => "dual",
            Preset::Triple => "triple",
            Preset::Triple28 => "triple28",
        };
        ExperimentConfig {
            name: name.into(),
            seed: 2024,
            signal: SignalConfig::new(carriers, 20_000),
            pa: desk_pa(),
            feature: FeatureConfig::new(k, m),
            models,
            train: TrainConfig::default(),
            split: default_split(),
            spectrum: WelchConfig::default(),
            output_dir: PathBuf::from(format!("out/{name}")),
        }
    }
}
