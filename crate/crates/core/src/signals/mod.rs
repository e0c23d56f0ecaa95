//! Stimulus synthesis and the synthetic PA oracle.
//!
//! Multi-carrier OFDM baseband signals are generated per carrier, frequency
//! multiplexed, pushed through a Wiener–Hammerstein PA model and demuxed
//! back into aligned, peak-normalized per-carrier input/output pairs.

mod carriers;
mod dataset;
mod filter;
mod ofdm;
mod pa;

pub use carriers::{combine_carriers, demux_carriers, CarrierSlot, DemuxConfig, Demuxed};
pub use dataset::{default_offsets, split_dataset, synthesize_dataset, Dataset, DatasetMeta, SignalConfig};
pub use filter::{filter_centered, fir_causal, kaiser_lowpass};
pub use ofdm::{generate_ofdm_carrier, papr_db, CarrierConfig};
pub use pa::{reference_pa, IqImbalance, PaOracleConfig, StaticNonlinearity};

use crate::{Complex64, Error, Result};

/// Uniformly sampled complex baseband samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSeries {
    samples: Vec<Complex64>,
    sample_rate_hz: f64,
}

impl ComplexSeries {
    pub fn new(samples: Vec<Complex64>, sample_rate_hz: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Argument("series must hold at least one sample".into()));
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::Argument(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if let Some(i) = samples.iter().position(|s| !(s.re.is_finite() && s.im.is_finite())) {
            return Err(Error::Argument(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean of |x|².
    pub fn mean_power(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.len() as f64
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().map(|s| s.norm()).fold(0.0, f64::max)
    }

    /// Contiguous sub-range `[start, end)` as a new series.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::Argument(format!(
                "slice {start}..{end} out of range for length {}",
                self.len()
            )));
        }
        Ok(Self {
            samples: self.samples[start..end].to_vec(),
            sample_rate_hz: self.sample_rate_hz,
        })
    }

    pub(crate) fn scaled(&self, factor: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| s * factor).collect(),
            sample_rate_hz: self.sample_rate_hz,
        }
    }
}
