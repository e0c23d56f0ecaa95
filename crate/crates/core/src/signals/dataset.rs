use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

use super::{
    combine_carriers, demux_carriers, generate_ofdm_carrier, reference_pa, CarrierConfig, CarrierSlot, ComplexSeries,
    DemuxConfig, PaOracleConfig,
};
use crate::{Complex64, Error, Result};

/// Stimulus description for [`synthesize_dataset`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalConfig {
    pub carriers: Vec<CarrierConfig>,
    /// Carrier center offsets; defaults to 1.5 bandwidths spacing around DC.
    #[serde(default)]
    pub offsets_hz: Option<Vec<f64>>,
    pub num_samples: usize,
    /// Channel filter for the output demux. Unset: wide open for a single
    /// carrier, otherwise a cutoff at half the closest carrier spacing.
    #[serde(default)]
    pub demux: Option<DemuxConfig>,
    #[serde(default = "default_max_lag")]
    pub max_lag: usize,
    #[serde(default = "default_min_correlation")]
    pub min_correlation: f64,
}

fn default_max_lag() -> usize {
    32
}

fn default_min_correlation() -> f64 {
    0.5
}

impl SignalConfig {
    pub fn new(carriers: Vec<CarrierConfig>, num_samples: usize) -> Self {
        Self {
            carriers,
            offsets_hz: None,
            num_samples,
            demux: None,
            max_lag: default_max_lag(),
            min_correlation: default_min_correlation(),
        }
    }

    pub fn num_carriers(&self) -> usize {
        self.carriers.len()
    }

    pub fn slots(&self) -> Result<Vec<CarrierSlot>> {
        let offsets = match &self.offsets_hz {
            Some(o) => o.clone(),
            None => default_offsets(&self.carriers),
        };
        if offsets.len() != self.carriers.len() {
            return Err(Error::Config(format!(
                "{} offsets for {} carriers",
                offsets.len(),
                self.carriers.len()
            )));
        }
        Ok(offsets
            .iter()
            .zip(&self.carriers)
            .map(|(&o, c)| CarrierSlot::new(o, c.bandwidth_hz))
            .collect())
    }

    fn demux_config(&self, slots: &[CarrierSlot]) -> DemuxConfig {
        if let Some(d) = self.demux {
            return d;
        }
        if slots.len() < 2 {
            return DemuxConfig::wide_open();
        }
        let mut gap = f64::INFINITY;
        for i in 0..slots.len() {
            for j in i + 1..slots.len() {
                gap = gap.min((slots[i].offset_hz - slots[j].offset_hz).abs());
            }
        }
        let bw = slots.iter().map(|s| s.bandwidth_hz).fold(0.0, f64::max);
        DemuxConfig {
            guard_factor: Some(gap / bw),
            ..DemuxConfig::default()
        }
    }
}

/// Carrier offsets in multiples of 1.5 bandwidths, symmetric about DC:
/// `{0}`, `{-1.5, +1.5}` and `{-1.5, 0, +1.5}` bandwidths for K = 1, 2, 3.
/// Larger K keeps the 1.5 bandwidth spacing.
pub fn default_offsets(carriers: &[CarrierConfig]) -> Vec<f64> {
    let k = carriers.len();
    let bw = carriers.iter().map(|c| c.bandwidth_hz).fold(0.0, f64::max);
    if k == 2 {
        return vec![-1.5 * bw, 1.5 * bw];
    }
    (0..k).map(|i| (i as f64 - (k as f64 - 1.0) / 2.0) * 1.5 * bw).collect()
}

/// Provenance written to the JSON sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub sample_rate_hz: f64,
    #[serde(rename = "K")]
    pub carriers: usize,
    pub num_samples: usize,
    pub scale_factors: Vec<f64>,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub offsets_hz: Vec<f64>,
    #[serde(default)]
    pub lags: Vec<isize>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// Paired, aligned, peak-normalized per-carrier PA input/output records.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    carriers_in: Vec<ComplexSeries>,
    carriers_out: Vec<ComplexSeries>,
    meta: DatasetMeta,
}

impl Dataset {
    pub fn new(
        carriers_in: Vec<ComplexSeries>,
        carriers_out: Vec<ComplexSeries>,
        scale_factors: Vec<f64>,
    ) -> Result<Self> {
        let k = carriers_in.len();
        if k == 0 || carriers_out.len() != k || scale_factors.len() != k {
            return Err(Error::Argument(format!(
                "dataset needs K >= 1 matching inputs ({k}), outputs ({}) and scales ({})",
                carriers_out.len(),
                scale_factors.len()
            )));
        }
        let n = carriers_in[0].len();
        let fs = carriers_in[0].sample_rate_hz();
        for s in carriers_in.iter().chain(&carriers_out) {
            if s.len() != n || s.sample_rate_hz() != fs {
                return Err(Error::Argument(
                    "all series in a dataset must share length and sample rate".into(),
                ));
            }
        }
        if scale_factors.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Argument("scale factors must be positive".into()));
        }
        Ok(Self {
            carriers_in,
            carriers_out,
            meta: DatasetMeta {
                sample_rate_hz: fs,
                carriers: k,
                num_samples: n,
                scale_factors,
                seeds: Vec::new(),
                offsets_hz: Vec::new(),
                lags: Vec::new(),
                warnings: Vec::new(),
            },
        })
    }

    pub fn num_carriers(&self) -> usize {
        self.meta.carriers
    }

    pub fn num_samples(&self) -> usize {
        self.meta.num_samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.meta.sample_rate_hz
    }

    pub fn carriers_in(&self) -> &[ComplexSeries] {
        &self.carriers_in
    }

    pub fn carriers_out(&self) -> &[ComplexSeries] {
        &self.carriers_out
    }

    pub fn scale_factors(&self) -> &[f64] {
        &self.meta.scale_factors
    }

    pub fn meta(&self) -> &DatasetMeta {
        &self.meta
    }

    fn range(&self, start: usize, end: usize) -> Result<Self> {
        let slice =
            |v: &[ComplexSeries]| -> Result<Vec<ComplexSeries>> { v.iter().map(|s| s.slice(start, end)).collect() };
        let mut meta = self.meta.clone();
        meta.num_samples = end - start;
        Ok(Self {
            carriers_in: slice(&self.carriers_in)?,
            carriers_out: slice(&self.carriers_out)?,
            meta,
        })
    }

    /// Writes `n, I_in_1, Q_in_1, ..., I_out_K, Q_out_K` rows plus a JSON
    /// sidecar next to it (same stem, `.json`).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let k = self.num_carriers();
        let mut out = String::from("n");
        for dir in ["in", "out"] {
            for c in 1..=k {
                write!(out, ",I_{dir}_{c},Q_{dir}_{c}").unwrap();
            }
        }
        out.push('\n');
        for n in 0..self.num_samples() {
            write!(out, "{n}").unwrap();
            for s in self.carriers_in.iter().chain(&self.carriers_out) {
                let v = s.samples()[n];
                write!(out, ",{:.17e},{:.17e}", v.re, v.im).unwrap();
            }
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))?;
        let side = sidecar_path(path);
        let json = serde_json::to_string_pretty(&self.meta).expect("meta serializes");
        std::fs::write(&side, json).map_err(|e| Error::io(&side, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let side = sidecar_path(path);
        let meta_text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        let meta: DatasetMeta = serde_json::from_str(&meta_text).map_err(|e| Error::format(&side, e))?;
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::format(path, "empty file"))?;
        let k = (header.split(',').count().saturating_sub(1)) / 4;
        if k == 0 || k != meta.carriers {
            return Err(Error::format(
                path,
                format!("header implies K={k}, sidecar says {}", meta.carriers),
            ));
        }
        let mut cols: Vec<Vec<Complex64>> = vec![Vec::new(); 2 * k];
        for (row, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 * k + 1 {
                return Err(Error::format(path, format!("row {row}: expected {} fields", 4 * k + 1)));
            }
            for (c, col) in cols.iter_mut().enumerate() {
                let parse = |s: &str| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::format(path, format!("row {row}: {e}")))
                };
                col.push(Complex64::new(parse(fields[1 + 2 * c])?, parse(fields[2 + 2 * c])?));
            }
        }
        let fs = meta.sample_rate_hz;
        let mut series = cols
            .into_iter()
            .map(|c| ComplexSeries::new(c, fs))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::format(path, e))?;
        let outs = series.split_off(k);
        let mut ds = Dataset::new(series, outs, meta.scale_factors.clone())?;
        if ds.num_samples() != meta.num_samples {
            return Err(Error::format(path, "row count disagrees with sidecar"));
        }
        ds.meta = meta;
        Ok(ds)
    }
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    path.with_extension("json")
}

/// Generates carriers, multiplexes them, runs the PA oracle, demuxes the
/// output, aligns each output to its input by integer-lag cross-correlation
/// and normalizes each pair so the input peak is 1.
pub fn synthesize_dataset(signal: &SignalConfig, pa: &PaOracleConfig) -> Result<Dataset> {
    let k = signal.num_carriers();
    if k == 0 {
        return Err(Error::Config("at least one carrier required".into()));
    }
    if signal.num_samples < 1000 {
        return Err(Error::Argument(format!(
            "num_samples must be at least 1000, got {}",
            signal.num_samples
        )));
    }
    pa.validate()?;
    let fs = signal.carriers[0].sample_rate_hz();
    if signal.carriers.iter().any(|c| c.sample_rate_hz() != fs) {
        return Err(Error::Config(
            "all carriers must share one sample rate (oversampling x bandwidth)".into(),
        ));
    }
    let slots = signal.slots()?;
    let demux = signal.demux_config(&slots);

    // Probe the demux transient on a short zero record to size the margin.
    let probe = ComplexSeries::new(vec![Complex64::new(0.0, 0.0); 8], fs)?;
    let settle = demux_carriers(&probe, &slots, &demux)?.settle;
    let lag = signal.max_lag;
    let margin = settle + 2 * lag + 16;
    let n = signal.num_samples;
    let total = n + 2 * margin;

    let inputs = signal
        .carriers
        .iter()
        .map(|c| generate_ofdm_carrier(c, total))
        .collect::<Result<Vec<_>>>()?;
    let composite = combine_carriers(&inputs, &slots, fs)?;
    let pa_out = reference_pa(&composite, pa)?;
    let split = demux_carriers(&pa_out, &slots, &demux)?;

    let mut carriers_in = Vec::with_capacity(k);
    let mut carriers_out = Vec::with_capacity(k);
    let mut scales = Vec::with_capacity(k);
    let mut lags = Vec::with_capacity(k);
    for (c, (x, y)) in inputs.iter().zip(&split.carriers).enumerate() {
        let best = align(x.samples(), y.samples(), margin, n, lag);
        if best.rho < signal.min_correlation {
            return Err(Error::Pipeline(format!(
                "carrier {c}: alignment correlation {:.3} below {}",
                best.rho, signal.min_correlation
            )));
        }
        let xin = x.slice(margin, margin + n)?;
        let start = (margin as isize + best.lag) as usize;
        let yout = y.slice(start, start + n)?;
        let scale = 1.0 / xin.peak();
        carriers_in.push(xin.scaled(scale));
        carriers_out.push(yout.scaled(scale));
        scales.push(scale);
        lags.push(best.lag);
    }
    let mut ds = Dataset::new(carriers_in, carriers_out, scales)?;
    ds.meta.seeds = signal.carriers.iter().map(|c| c.seed.unwrap_or(0)).collect();
    ds.meta.offsets_hz = slots.iter().map(|s| s.offset_hz).collect();
    ds.meta.lags = lags;
    ds.meta.warnings = split.warnings;
    Ok(ds)
}

struct Alignment {
    lag: isize,
    rho: f64,
}

/// Lag `l` maximizing `|sum_n y(n + l) conj(x(n))|` over the window
/// `[start, start + len)`, with the normalized peak magnitude.
fn align(x: &[Complex64], y: &[Complex64], start: usize, len: usize, max_lag: usize) -> Alignment {
    let xs = &x[start..start + len];
    let ex: f64 = xs.iter().map(|v| v.norm_sqr()).sum();
    let mut best = Alignment { lag: 0, rho: 0.0 };
    for l in -(max_lag as isize)..=max_lag as isize {
        let ys = &y[(start as isize + l) as usize..][..len];
        let r: Complex64 = ys.iter().zip(xs).map(|(a, b)| a * b.conj()).sum();
        let ey: f64 = ys.iter().map(|v| v.norm_sqr()).sum();
        let rho = if ex > 0.0 && ey > 0.0 {
            r.norm() / (ex * ey).sqrt()
        } else {
            0.0
        };
        if rho > best.rho {
            best = Alignment { lag: l, rho };
        }
    }
    best
}

/// Contiguous split: the first `floor(N * train / (train + test))` samples
/// train, the rest test.
pub fn split_dataset(ds: &Dataset, train_parts: usize, test_parts: usize) -> Result<(Dataset, Dataset)> {
    if train_parts == 0 || test_parts == 0 {
        return Err(Error::Argument("split parts must be positive".into()));
    }
    let n = ds.num_samples();
    let cut = (n as u128 * train_parts as u128 / (train_parts + test_parts) as u128) as usize;
    if cut == 0 || cut == n {
        return Err(Error::Argument(format!(
            "dataset of {n} samples too small for a {train_parts}:{test_parts} split"
        )));
    }
    Ok((ds.range(0, cut)?, ds.range(cut, n)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(n: usize) -> Dataset {
        let s: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64 / n as f64, 0.0)).collect();
        let x = ComplexSeries::new(s, 1.0).unwrap();
        Dataset::new(vec![x.clone()], vec![x], vec![1.0]).unwrap()
    }

    #[test]
    fn split_sizes() {
        for (n, a, b, want) in [(20_000, 3, 2, 12_000), (5, 3, 2, 3), (20_000, 1, 1, 10_000)] {
            let (tr, te) = split_dataset(&tiny(n), a, b).unwrap();
            assert_eq!(tr.num_samples(), want);
            assert_eq!(tr.num_samples() + te.num_samples(), n);
            assert_eq!(
                te.carriers_in()[0].samples()[0],
                tiny(n).carriers_in()[0].samples()[want]
            );
        }
        assert!(split_dataset(&tiny(10), 0, 2).is_err());
    }

    #[test]
    fn default_offsets_follow_spacing() {
        let c = CarrierConfig::new(8, 10.0, 8, 4);
        assert_eq!(default_offsets(std::slice::from_ref(&c)), vec![0.0]);
        assert_eq!(default_offsets(&[c.clone(), c.clone()]), vec![-15.0, 15.0]);
        assert_eq!(default_offsets(&[c.clone(), c.clone(), c]), vec![-15.0, 0.0, 15.0]);
    }

    #[test]
    fn linear_pa_single_carrier() {
        let cfg = SignalConfig::new(vec![CarrierConfig::new(64, 20e6, 4, 16).with_seed(5)], 2000);
        let mut pa = PaOracleConfig::identity();
        pa.post_fir = vec![Complex64::new(0.0, 0.0); 3];
        pa.post_fir[0] = Complex64::new(0.8, 0.1);
        let ds = synthesize_dataset(&cfg, &pa).unwrap();
        assert_eq!(ds.num_samples(), 2000);
        let x = ds.carriers_in()[0].samples();
        let y = ds.carriers_out()[0].samples();
        assert!((ds.carriers_in()[0].peak() - 1.0).abs() < 1e-12);
        let e: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| (a * Complex64::new(0.8, 0.1) - b).norm_sqr())
            .sum();
        let p: f64 = y.iter().map(|b| b.norm_sqr()).sum();
        assert!(10.0 * (e / p).log10() < -100.0);
    }

    #[test]
    fn alignment_recovers_pure_delay() {
        let cfg = SignalConfig::new(vec![CarrierConfig::new(64, 20e6, 4, 16).with_seed(6)], 1500);
        let mut pa = PaOracleConfig::identity();
        pa.post_fir = vec![Complex64::new(1.0, 0.0)];
        pa.pre_fir = vec![
            Complex64::new(1e-9, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
        ];
        let ds = synthesize_dataset(&cfg, &pa).unwrap();
        assert_eq!(ds.meta().lags, vec![3]);
    }

    #[test]
    fn csv_round_trip() {
        let cfg = SignalConfig::new(
            vec![
                CarrierConfig::new(32, 10e6, 8, 4).with_seed(1),
                CarrierConfig::new(32, 10e6, 8, 4).with_seed(2),
            ],
            1000,
        );
        let ds = synthesize_dataset(&cfg, &PaOracleConfig::identity()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ds.csv");
        ds.write_csv(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("n,I_in_1,Q_in_1,I_in_2,Q_in_2,I_out_1,Q_out_1,I_out_2,Q_out_2\n"));
        assert_eq!(text.lines().count(), 1001);
        let back = Dataset::read_csv(&p).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn too_few_samples() {
        let cfg = SignalConfig::new(vec![CarrierConfig::new(8, 1e6, 2, 4)], 999);
        assert!(matches!(
            synthesize_dataset(&cfg, &PaOracleConfig::identity()),
            Err(Error::Argument(_))
        ));
    }
}
