use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::filter::{filter_centered, kaiser_lowpass};
use super::ComplexSeries;
use crate::{Complex64, Error, Result};

/// Placement of one component carrier in the composite spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarrierSlot {
    pub offset_hz: f64,
    pub bandwidth_hz: f64,
}

impl CarrierSlot {
    pub fn new(offset_hz: f64, bandwidth_hz: f64) -> Self {
        Self {
            offset_hz,
            bandwidth_hz,
        }
    }

    fn check_nyquist(&self, fs_hz: f64) -> Result<()> {
        if self.offset_hz.abs() + self.bandwidth_hz / 2.0 >= fs_hz / 2.0 {
            return Err(Error::Argument(format!(
                "carrier at {} Hz with {} Hz bandwidth does not fit below Nyquist ({} Hz)",
                self.offset_hz,
                self.bandwidth_hz,
                fs_hz / 2.0
            )));
        }
        Ok(())
    }
}

/// Demux channel-filter settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemuxConfig {
    /// Cutoff as a multiple of half the carrier bandwidth; `None` leaves
    /// the filter wide open (frequency shift only).
    pub guard_factor: Option<f64>,
    /// Flat passband edge as a multiple of half the bandwidth.
    pub passband_factor: f64,
    pub stopband_atten_db: f64,
}

impl Default for DemuxConfig {
    fn default() -> Self {
        Self {
            guard_factor: Some(1.5),
            passband_factor: 1.2,
            stopband_atten_db: 80.0,
        }
    }
}

impl DemuxConfig {
    pub fn wide_open() -> Self {
        Self {
            guard_factor: None,
            ..Self::default()
        }
    }

    fn taps(&self, bandwidth_hz: f64, fs_hz: f64) -> Result<Option<Vec<f64>>> {
        let Some(guard) = self.guard_factor else {
            return Ok(None);
        };
        if guard <= self.passband_factor {
            return Err(Error::Config(format!(
                "guard factor {guard} must exceed passband factor {}",
                self.passband_factor
            )));
        }
        let cutoff = guard * bandwidth_hz / 2.0;
        let pass = self.passband_factor * bandwidth_hz / 2.0;
        let transition = 2.0 * (cutoff - pass);
        if cutoff + transition / 2.0 >= fs_hz / 2.0 {
            return Ok(None);
        }
        Ok(Some(kaiser_lowpass(
            cutoff / fs_hz,
            transition / fs_hz,
            self.stopband_atten_db,
        )))
    }
}

/// Output of [`demux_carriers`].
#[derive(Debug, Clone)]
pub struct Demuxed {
    pub carriers: Vec<ComplexSeries>,
    /// Samples at each end affected by the channel filter's start-up
    /// transient (half the longest filter).
    pub settle: usize,
    pub warnings: Vec<String>,
}

fn mix(x: &[Complex64], freq_hz: f64, fs_hz: f64) -> impl Iterator<Item = Complex64> + '_ {
    let cycles_per_sample = freq_hz / fs_hz;
    x.iter().enumerate().map(move |(n, s)| {
        let phase = 2.0 * PI * (cycles_per_sample * n as f64).fract();
        s * Complex64::from_polar(1.0, phase)
    })
}

/// Frequency-multiplexes carriers: `sum_k x_k(n) exp(j 2 pi f_k n / fs)`.
pub fn combine_carriers(carriers: &[ComplexSeries], slots: &[CarrierSlot], fs_hz: f64) -> Result<ComplexSeries> {
    if carriers.is_empty() || carriers.len() != slots.len() {
        return Err(Error::Argument(format!(
            "{} carriers but {} slots",
            carriers.len(),
            slots.len()
        )));
    }
    let n = carriers[0].len();
    for (k, (c, slot)) in carriers.iter().zip(slots).enumerate() {
        if c.len() != n {
            return Err(Error::Argument(format!(
                "carrier {k} has {} samples, expected {n}",
                c.len()
            )));
        }
        if c.sample_rate_hz() != fs_hz {
            return Err(Error::Argument(format!(
                "carrier {k} sampled at {} Hz, composite at {fs_hz} Hz",
                c.sample_rate_hz()
            )));
        }
        slot.check_nyquist(fs_hz)?;
    }
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (c, slot) in carriers.iter().zip(slots) {
        for (o, s) in out.iter_mut().zip(mix(c.samples(), slot.offset_hz, fs_hz)) {
            *o += s;
        }
    }
    ComplexSeries::new(out, fs_hz)
}

/// Splits a composite back into per-carrier baseband series: shift each
/// carrier to DC, then channel-filter with a linear-phase FIR whose group
/// delay is compensated.
pub fn demux_carriers(composite: &ComplexSeries, slots: &[CarrierSlot], cfg: &DemuxConfig) -> Result<Demuxed> {
    let fs = composite.sample_rate_hz();
    let mut warnings = Vec::new();
    for slot in slots {
        slot.check_nyquist(fs)?;
    }
    for i in 0..slots.len() {
        for j in i + 1..slots.len() {
            let gap = (slots[i].offset_hz - slots[j].offset_hz).abs();
            if gap < (slots[i].bandwidth_hz + slots[j].bandwidth_hz) / 2.0 {
                warnings.push(format!("carriers {i} and {j} overlap in frequency"));
            }
        }
    }
    let mut settle = 0;
    let mut carriers = Vec::with_capacity(slots.len());
    for slot in slots {
        let shifted: Vec<Complex64> = mix(composite.samples(), -slot.offset_hz, fs).collect();
        let out = match cfg.taps(slot.bandwidth_hz, fs)? {
            Some(taps) => {
                settle = settle.max((taps.len() - 1) / 2);
                filter_centered(&shifted, &taps)
            }
            None => shifted,
        };
        carriers.push(ComplexSeries::new(out, fs)?);
    }
    Ok(Demuxed {
        carriers,
        settle,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::{generate_ofdm_carrier, CarrierConfig};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_carrier_at_dc_is_identity() {
        let x = ComplexSeries::new(vec![c(1.0, 2.0), c(-0.5, 0.25), c(0.0, 1.0)], 10.0).unwrap();
        let y = combine_carriers(std::slice::from_ref(&x), &[CarrierSlot::new(0.0, 2.0)], 10.0).unwrap();
        assert_eq!(x, y);
        let d = demux_carriers(&y, &[CarrierSlot::new(0.0, 2.0)], &DemuxConfig::wide_open()).unwrap();
        let dev = d.carriers[0]
            .samples()
            .iter()
            .zip(x.samples())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(dev < 1e-6);
        assert_eq!(dev, 0.0);
    }

    #[test]
    fn sample_zero_is_plain_sum() {
        let a = ComplexSeries::new(vec![c(0.3, -0.1); 8], 100.0).unwrap();
        let b = ComplexSeries::new(vec![c(-0.2, 0.7); 8], 100.0).unwrap();
        let slots = [CarrierSlot::new(-20.0, 10.0), CarrierSlot::new(20.0, 10.0)];
        let y = combine_carriers(&[a, b], &slots, 100.0).unwrap();
        assert_eq!(y.samples()[0], c(0.3, -0.1) + c(-0.2, 0.7));
    }

    #[test]
    fn nyquist_violation_is_rejected() {
        let a = ComplexSeries::new(vec![c(1.0, 0.0); 4], 100.0).unwrap();
        let err = combine_carriers(std::slice::from_ref(&a), &[CarrierSlot::new(45.0, 20.0)], 100.0);
        assert!(matches!(err, Err(Error::Argument(_))));
        let err = demux_carriers(&a, &[CarrierSlot::new(-45.0, 20.0)], &DemuxConfig::default());
        assert!(matches!(err, Err(Error::Argument(_))));
    }

    #[test]
    fn zero_composite_gives_zero_outputs() {
        let z = ComplexSeries::new(vec![c(0.0, 0.0); 600], 8.0).unwrap();
        let slots = [CarrierSlot::new(-1.5, 1.0), CarrierSlot::new(1.5, 1.0)];
        let d = demux_carriers(&z, &slots, &DemuxConfig::default()).unwrap();
        assert_eq!(d.carriers.len(), 2);
        assert!(d.carriers.iter().all(|s| s.samples().iter().all(|v| v.norm() == 0.0)));
        assert!(d.warnings.is_empty());
    }

    #[test]
    fn overlap_is_a_warning_not_an_error() {
        let z = ComplexSeries::new(vec![c(0.0, 0.0); 64], 8.0).unwrap();
        let slots = [CarrierSlot::new(-0.3, 1.0), CarrierSlot::new(0.3, 1.0)];
        let d = demux_carriers(&z, &slots, &DemuxConfig::wide_open()).unwrap();
        assert_eq!(d.warnings.len(), 1);
    }

    fn nmse_db(a: &[Complex64], b: &[Complex64]) -> f64 {
        let e: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
        let p: f64 = b.iter().map(|y| y.norm_sqr()).sum();
        10.0 * (e / p).log10()
    }

    #[test]
    fn round_trip_of_disjoint_carriers() {
        let bw = 20e6;
        let n = 20_000;
        let cfg = CarrierConfig::new(300, bw, 4, 16);
        let x1 = generate_ofdm_carrier(&cfg.clone().with_seed(1), n).unwrap();
        let x2 = generate_ofdm_carrier(&cfg.clone().with_seed(2), n).unwrap();
        let slots = [CarrierSlot::new(-0.75 * bw, bw), CarrierSlot::new(0.75 * bw, bw)];
        let fs = x1.sample_rate_hz();
        let y = combine_carriers(&[x1.clone(), x2.clone()], &slots, fs).unwrap();

        // energy: disjoint spectra add
        let ratio = y.mean_power() / (x1.mean_power() + x2.mean_power());
        assert!((ratio - 1.0).abs() < 0.01, "power ratio {ratio}");

        let d = demux_carriers(&y, &slots, &DemuxConfig::default()).unwrap();
        let s = d.settle;
        assert!(s > 0 && s < 1000);
        for (got, want) in d.carriers.iter().zip([&x1, &x2]) {
            let e = nmse_db(&got.samples()[s..n - s], &want.samples()[s..n - s]);
            assert!(e < -50.0, "round-trip NMSE {e} dB");
        }
    }
}
