use serde::{Deserialize, Serialize};

use super::filter::fir_causal;
use super::ComplexSeries;
use crate::{Complex64, Error, Result};

/// Memoryless AM/AM (and AM/PM) characteristic between the two FIRs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StaticNonlinearity {
    /// `A / (1 + (A / sat)^(2p))^(1/(2p))`, phase preserved.
    Rapp { smoothness: f64, sat_level: f64 },
    /// AM/AM `alpha_a r / (1 + beta_a r^2)`, AM/PM `alpha_p r^2 / (1 + beta_p r^2)`.
    Saleh {
        alpha_a: f64,
        beta_a: f64,
        alpha_p: f64,
        beta_p: f64,
    },
    /// `sum_i c_i x |x|^(2i)` (odd orders 1, 3, 5, ...).
    Polynomial { coeffs: Vec<Complex64> },
}

impl StaticNonlinearity {
    pub fn apply(&self, x: Complex64) -> Complex64 {
        match self {
            StaticNonlinearity::Rapp { smoothness, sat_level } => {
                let a = x.norm();
                if a == 0.0 {
                    return x;
                }
                let two_p = 2.0 * smoothness;
                let gain = (1.0 + (a / sat_level).powf(two_p)).powf(-1.0 / two_p);
                x * gain
            }
            StaticNonlinearity::Saleh {
                alpha_a,
                beta_a,
                alpha_p,
                beta_p,
            } => {
                let r = x.norm();
                if r == 0.0 {
                    return x;
                }
                let r2 = r * r;
                let amp = alpha_a * r / (1.0 + beta_a * r2);
                let phi = x.arg() + alpha_p * r2 / (1.0 + beta_p * r2);
                Complex64::from_polar(amp, phi)
            }
            StaticNonlinearity::Polynomial { coeffs } => {
                let e = x.norm_sqr();
                let mut pow = 1.0;
                let mut acc = Complex64::new(0.0, 0.0);
                for c in coeffs {
                    acc += c * x * pow;
                    pow *= e;
                }
                acc
            }
        }
    }
}

/// Gain and phase mismatch between the I and Q branches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IqImbalance {
    pub gain_mismatch: f64,
    pub phase_mismatch_rad: f64,
}

impl IqImbalance {
    /// `I' = (1+g) I`, `Q' = (1-g) (Q cos phi + I sin phi)`: the Q branch is
    /// scaled and its local oscillator skewed by `phi`.
    pub fn apply(&self, y: Complex64) -> Complex64 {
        let g = self.gain_mismatch;
        let (s, c) = self.phase_mismatch_rad.sin_cos();
        Complex64::new((1.0 + g) * y.re, (1.0 - g) * (y.im * c + y.re * s))
    }
}

/// Wiener–Hammerstein PA oracle with optional modulator impairments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaOracleConfig {
    pub pre_fir: Vec<Complex64>,
    pub static_nl: StaticNonlinearity,
    pub post_fir: Vec<Complex64>,
    #[serde(default)]
    pub iq_imbalance: Option<IqImbalance>,
    #[serde(default)]
    pub dc_offset: Option<Complex64>,
}

impl PaOracleConfig {
    /// Unit-gain pass-through.
    pub fn identity() -> Self {
        let one = vec![Complex64::new(1.0, 0.0)];
        Self {
            pre_fir: one.clone(),
            static_nl: StaticNonlinearity::Polynomial { coeffs: one.clone() },
            post_fir: one,
            iq_imbalance: None,
            dc_offset: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, fir) in [("pre_fir", &self.pre_fir), ("post_fir", &self.post_fir)] {
            if fir.is_empty() || fir[0] == Complex64::new(0.0, 0.0) {
                return Err(Error::Config(format!("{name} needs a nonzero first tap")));
            }
            if fir.iter().any(|t| !(t.re.is_finite() && t.im.is_finite())) {
                return Err(Error::Config(format!("{name} has non-finite taps")));
            }
        }
        match &self.static_nl {
            StaticNonlinearity::Rapp { smoothness, sat_level } => {
                if !(*sat_level > 0.0 && sat_level.is_finite()) {
                    return Err(Error::Config("rapp sat_level must be positive".into()));
                }
                if !(*smoothness > 0.0 && smoothness.is_finite()) {
                    return Err(Error::Config("rapp smoothness must be positive".into()));
                }
            }
            StaticNonlinearity::Saleh { .. } => {}
            StaticNonlinearity::Polynomial { coeffs } => {
                if coeffs.is_empty() {
                    return Err(Error::Config("polynomial needs at least one coefficient".into()));
                }
            }
        }
        Ok(())
    }
}

/// `post_fir * NL(pre_fir * x)`, then I/Q imbalance and DC offset.
pub fn reference_pa(input: &ComplexSeries, cfg: &PaOracleConfig) -> Result<ComplexSeries> {
    cfg.validate()?;
    let u = fir_causal(input.samples(), &cfg.pre_fir);
    let v: Vec<Complex64> = u.iter().map(|&s| cfg.static_nl.apply(s)).collect();
    let mut y = fir_causal(&v, &cfg.post_fir);
    if let Some(iq) = &cfg.iq_imbalance {
        y.iter_mut().for_each(|s| *s = iq.apply(*s));
    }
    if let Some(dc) = cfg.dc_offset {
        y.iter_mut().for_each(|s| *s += dc);
    }
    ComplexSeries::new(y, input.sample_rate_hz())
}
