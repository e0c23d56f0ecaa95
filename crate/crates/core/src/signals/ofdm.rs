use rand::Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::filter::{filter_centered, kaiser_lowpass};
use super::ComplexSeries;
use crate::{seed, Complex64, Error, Result};

/// One OFDM component carrier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarrierConfig {
    pub num_subcarriers: usize,
    pub bandwidth_hz: f64,
    pub oversampling: usize,
    pub qam_order: u32,
    /// Symbol stream seed; experiment runs fill this from the master seed.
    #[serde(default)]
    pub seed: Option<u64>,
    /// RMS level below unit full scale, in dB.
    #[serde(default = "default_backoff")]
    pub rms_backoff_db: f64,
    /// Band-limit the concatenated symbols so adjacent carriers stay
    /// spectrally disjoint (symbol boundaries otherwise splatter).
    #[serde(default = "yes")]
    pub spectral_shaping: bool,
}

fn default_backoff() -> f64 {
    10.0
}

fn yes() -> bool {
    true
}

impl CarrierConfig {
    pub fn new(num_subcarriers: usize, bandwidth_hz: f64, oversampling: usize, qam_order: u32) -> Self {
        Self {
            num_subcarriers,
            bandwidth_hz,
            oversampling,
            qam_order,
            seed: None,
            rms_backoff_db: default_backoff(),
            spectral_shaping: true,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.oversampling as f64 * self.bandwidth_hz
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_subcarriers == 0 {
            return Err(Error::Config("num_subcarriers must be positive".into()));
        }
        if !(self.bandwidth_hz.is_finite() && self.bandwidth_hz > 0.0) {
            return Err(Error::Config("bandwidth_hz must be positive".into()));
        }
        if self.oversampling == 0 {
            return Err(Error::Config("oversampling must be at least 1".into()));
        }
        if ![4, 16, 64].contains(&self.qam_order) {
            return Err(Error::Config(format!(
                "qam_order must be 4, 16 or 64, got {}",
                self.qam_order
            )));
        }
        if !self.rms_backoff_db.is_finite() {
            return Err(Error::Config("rms_backoff_db must be finite".into()));
        }
        Ok(())
    }

    /// Shaping filter taps, or `None` when the stop edge would not fit
    /// below Nyquist (the signal then already fills the band).
    fn shaping_taps(&self) -> Option<Vec<f64>> {
        if !self.spectral_shaping {
            return None;
        }
        let fs = self.sample_rate_hz();
        let pass = 0.5 * self.bandwidth_hz;
        let stop = 0.6 * self.bandwidth_hz;
        if stop >= 0.5 * fs {
            return None;
        }
        Some(kaiser_lowpass(0.5 * (pass + stop) / fs, (stop - pass) / fs, 80.0))
    }
}

/// Unit-average-energy square QAM symbol.
fn qam_symbol<R: Rng>(rng: &mut R, order: u32) -> Complex64 {
    let side = (order as f64).sqrt() as u32;
    let scale = (2.0 * (order as f64 - 1.0) / 3.0).sqrt();
    let level = |i: u32| (2.0 * i as f64 - (side as f64 - 1.0)) / scale;
    let i = rng.random_range(0..side);
    let q = rng.random_range(0..side);
    Complex64::new(level(i), level(q))
}

/// Random-data OFDM baseband for one carrier.
///
/// Subcarriers sit on bins `-N/2 .. N/2-1` of an `N * oversampling` point
/// inverse DFT (the rest of the spectrum is zero padding); symbols are
/// concatenated without cyclic prefix, optionally band-limited, trimmed to
/// `num_samples` and scaled to the configured RMS back-off.
pub fn generate_ofdm_carrier(cfg: &CarrierConfig, num_samples: usize) -> Result<ComplexSeries> {
    cfg.validate()?;
    if num_samples == 0 {
        return Err(Error::Argument("requested length must be positive".into()));
    }
    let nsc = cfg.num_subcarriers;
    let nfft = nsc * cfg.oversampling;
    let shaping = cfg.shaping_taps();
    let pad = shaping.as_ref().map_or(0, |t| t.len());
    let total = num_samples + 2 * pad;
    let num_symbols = total.div_ceil(nfft);

    let mut rng = seed::rng(cfg.seed.unwrap_or(0));
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(nfft);
    let mut stream = Vec::with_capacity(num_symbols * nfft);
    let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
    for _ in 0..num_symbols {
        buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
        for i in 0..nsc {
            let f = i as isize - (nsc / 2) as isize;
            buf[f.rem_euclid(nfft as isize) as usize] = qam_symbol(&mut rng, cfg.qam_order);
        }
        ifft.process(&mut buf);
        stream.extend_from_slice(&buf);
    }
    stream.truncate(total);

    let mut samples = match &shaping {
        Some(taps) => filter_centered(&stream, taps)[pad..pad + num_samples].to_vec(),
        None => stream,
    };
    let rms = (samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / num_samples as f64).sqrt();
    if rms > 0.0 {
        let k = 10f64.powf(-cfg.rms_backoff_db / 20.0) / rms;
        samples.iter_mut().for_each(|s| *s *= k);
    }
    ComplexSeries::new(samples, cfg.sample_rate_hz())
}

/// Peak-to-average power ratio in dB.
pub fn papr_db(x: &ComplexSeries) -> f64 {
    let peak = x.samples().iter().map(|s| s.norm_sqr()).fold(0.0, f64::max);
    10.0 * (peak / x.mean_power()).log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_qpsk_subcarrier_is_constant_modulus() {
        let cfg = CarrierConfig::new(1, 1e6, 1, 4).with_seed(3);
        let x = generate_ofdm_carrier(&cfg, 500).unwrap();
        let m0 = x.samples()[0].norm();
        assert!(x.samples().iter().all(|s| (s.norm() - m0).abs() < 1e-12));
        // and the phases actually move
        let distinct = x
            .samples()
            .iter()
            .filter(|s| (**s - x.samples()[0]).norm() > 1e-9)
            .count();
        assert!(distinct > 100);
    }

    #[test]
    fn deterministic_for_a_seed() {
        let cfg = CarrierConfig::new(64, 20e6, 4, 16).with_seed(11);
        let a = generate_ofdm_carrier(&cfg, 3000).unwrap();
        let b = generate_ofdm_carrier(&cfg, 3000).unwrap();
        assert_eq!(a, b);
        let c = generate_ofdm_carrier(&cfg.clone().with_seed(12), 3000).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rms_hits_backoff_and_rate_is_set() {
        let mut cfg = CarrierConfig::new(128, 10e6, 2, 64).with_seed(1);
        cfg.rms_backoff_db = 6.0;
        let x = generate_ofdm_carrier(&cfg, 4000).unwrap();
        assert!((10.0 * x.mean_power().log10() + 6.0).abs() < 1e-9);
        assert_eq!(x.sample_rate_hz(), 20e6);
        assert_eq!(x.len(), 4000);
    }

    #[test]
    fn errors() {
        let cfg = CarrierConfig::new(8, 1e6, 2, 4);
        assert!(matches!(generate_ofdm_carrier(&cfg, 0), Err(Error::Argument(_))));
        let mut bad = cfg.clone();
        bad.qam_order = 8;
        assert!(matches!(generate_ofdm_carrier(&bad, 10), Err(Error::Config(_))));
        bad = cfg.clone();
        bad.oversampling = 0;
        assert!(matches!(generate_ofdm_carrier(&bad, 10), Err(Error::Config(_))));
    }
}
