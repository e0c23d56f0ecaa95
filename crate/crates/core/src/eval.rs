//! NMSE, modeling-error spectra and model comparison reports.

use rustfft::FftPlanner;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt::Write as _;
use std::path::Path;

use crate::models::BehavioralModel;
use crate::signals::{ComplexSeries, Dataset};
use crate::{Complex64, Error, Exec, Result};

/// Lowest level written to spectrum files, in dB.
pub const PSD_FLOOR_DB: f64 = -300.0;

/// `10 log10(sum |pred - meas|^2 / sum |meas|^2)`. A perfect prediction
/// gives negative infinity.
pub fn nmse_db(pred: &ComplexSeries, meas: &ComplexSeries) -> Result<f64> {
    nmse_db_slices(pred.samples(), meas.samples())
}

pub fn nmse_db_slices(pred: &[Complex64], meas: &[Complex64]) -> Result<f64> {
    if pred.len() != meas.len() || meas.is_empty() {
        return Err(Error::Shape(format!(
            "NMSE needs equal nonempty lengths, got {} and {}",
            pred.len(),
            meas.len()
        )));
    }
    let (mut err, mut reference) = (0.0, 0.0);
    for (p, m) in pred.iter().zip(meas) {
        err += (p - m).norm_sqr();
        reference += m.norm_sqr();
    }
    if reference == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok(10.0 * (err / reference).log10())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WelchConfig {
    pub nfft: usize,
    /// Fraction of a segment shared with the next one, in `[0, 1)`.
    pub overlap: f64,
}

impl Default for WelchConfig {
    fn default() -> Self {
        Self {
            nfft: 1024,
            overlap: 0.5,
        }
    }
}

/// Two-sided averaged-periodogram PSD (Hann window), in power per Hz, with
/// frequencies running from `-fs/2` upward. Summing the PSD times
/// `fs / nfft` gives the mean signal power.
pub fn welch_psd(x: &[Complex64], fs_hz: f64, cfg: WelchConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    let nfft = cfg.nfft;
    if nfft < 2 || !(0.0..1.0).contains(&cfg.overlap) || fs_hz <= 0.0 {
        return Err(Error::Argument(format!(
            "invalid spectrum settings {cfg:?}, fs = {fs_hz}"
        )));
    }
    if x.len() < nfft {
        return Err(Error::Argument(format!(
            "series of {} samples shorter than nfft = {nfft}",
            x.len()
        )));
    }
    let step = (nfft - (cfg.overlap * nfft as f64).round() as usize).max(1);
    let window: Vec<f64> = (0..nfft)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / nfft as f64).cos())
        .collect();
    let u: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(nfft);
    let mut acc = vec![0.0; nfft];
    let mut segments = 0usize;
    let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
    let mut start = 0;
    while start + nfft <= x.len() {
        for ((b, v), w) in buf.iter_mut().zip(&x[start..start + nfft]).zip(&window) {
            *b = v * w;
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        segments += 1;
        start += step;
    }
    let norm = 1.0 / (segments as f64 * fs_hz * u);
    let half = nfft / 2;
    let psd: Vec<f64> = (0..nfft).map(|k| acc[(k + half) % nfft] * norm).collect();
    let freqs: Vec<f64> = (0..nfft)
        .map(|k| (k as f64 - half as f64) * fs_hz / nfft as f64)
        .collect();
    Ok((freqs, psd))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTrace {
    pub label: String,
    pub freqs_hz: Vec<f64>,
    pub psd_db: Vec<f64>,
}

impl SpectrumTrace {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("freq_hz,psd_db\n");
        for (f, p) in self.freqs_hz.iter().zip(&self.psd_db) {
            writeln!(s, "{f:.6e},{p:.6}").expect("string write");
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// PSD of `meas - pred` in dB relative to the peak PSD of `meas`, floored
/// at [`PSD_FLOOR_DB`].
pub fn error_spectrum(
    pred: &ComplexSeries,
    meas: &ComplexSeries,
    fs_hz: f64,
    cfg: WelchConfig,
) -> Result<SpectrumTrace> {
    if pred.len() != meas.len() {
        return Err(Error::Shape(format!("{} vs {} samples", pred.len(), meas.len())));
    }
    let err: Vec<Complex64> = meas.samples().iter().zip(pred.samples()).map(|(m, p)| m - p).collect();
    let (freqs, e) = welch_psd(&err, fs_hz, cfg)?;
    let (_, m) = welch_psd(meas.samples(), fs_hz, cfg)?;
    let peak = m.iter().copied().fold(0.0, f64::max);
    if peak == 0.0 {
        return Err(Error::ZeroReference);
    }
    let psd_db = e
        .iter()
        .map(|v| {
            let db = 10.0 * (v / peak).log10();
            if db.is_nan() {
                PSD_FLOOR_DB
            } else {
                db.max(PSD_FLOOR_DB)
            }
        })
        .collect();
    Ok(SpectrumTrace {
        label: String::new(),
        freqs_hz: freqs,
        psd_db,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// NMSE values that may be infinite are written as numbers when finite and
/// as `"-inf"` / `"inf"` / `"nan"` strings otherwise.
mod nmse_values {
    use super::*;

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Value {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
        let out: Vec<Value> = v
            .iter()
            .map(|&x| {
                if x.is_finite() {
                    Value::Num(x)
                } else {
                    Value::Text(format_db(x))
                }
            })
            .collect();
        out.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
        let raw = Vec::<Value>::deserialize(d)?;
        raw.into_iter()
            .map(|v| match v {
                Value::Num(x) => Ok(x),
                Value::Text(t) => match t.as_str() {
                    "-inf" => Ok(f64::NEG_INFINITY),
                    "inf" => Ok(f64::INFINITY),
                    "nan" => Ok(f64::NAN),
                    other => Err(serde::de::Error::custom(format!("bad NMSE value '{other}'"))),
                },
            })
            .collect()
    }
}

fn format_db(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else if x == f64::INFINITY {
        "inf".into()
    } else {
        format!("{x:.2}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmseReport {
    pub model_name: String,
    pub coefficient_count: usize,
    #[serde(with = "nmse_values")]
    pub per_carrier_nmse_db: Vec<f64>,
    pub dataset_id: String,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub rows: Vec<NmseReport>,
}

impl CompareReport {
    /// `name,count,nmse_db` with the per-carrier values joined by `/`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("name,count,nmse_db\n");
        for r in &self.rows {
            let v: Vec<String> = r.per_carrier_nmse_db.iter().map(|&x| format_db(x)).collect();
            writeln!(s, "{},{},{}", r.model_name, r.coefficient_count, v.join("/")).expect("string write");
        }
        s
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, csv: &Path, json: &Path) -> Result<()> {
        std::fs::write(csv, self.to_csv()).map_err(|e| Error::io(csv, e))?;
        std::fs::write(json, self.to_json()).map_err(|e| Error::io(json, e))
    }
}

/// Per-carrier NMSE of one model on a dataset.
pub fn evaluate_model(model: &dyn BehavioralModel, ds: &Dataset, exec: Exec) -> Result<Vec<f64>> {
    if model.carriers() != ds.num_carriers() {
        return Err(Error::Config(format!(
            "model {} is for K={}, dataset has K={}",
            model.name(),
            model.carriers(),
            ds.num_carriers()
        )));
    }
    let pred = model.predict_with(ds.carriers_in(), exec)?;
    pred.iter().zip(ds.carriers_out()).map(|(p, m)| nmse_db(p, m)).collect()
}

/// One row per model: name, coefficient count, per-carrier NMSE.
pub fn compare_report(
    models: &[&dyn BehavioralModel],
    test: &Dataset,
    dataset_id: &str,
    split: Split,
) -> Result<CompareReport> {
    let rows = models
        .iter()
        .map(|m| {
            Ok(NmseReport {
                model_name: m.name().to_string(),
                coefficient_count: m.coefficient_count(),
                per_carrier_nmse_db: evaluate_model(*m, test, Exec::default())?,
                dataset_id: dataset_id.to_string(),
                split,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CompareReport { rows })
}
