use crate::Complex64;
use std::f64::consts::PI;

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > sum * 1e-17 {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

/// Linear-phase Kaiser-window low-pass FIR with unit DC gain.
///
/// `cutoff` and `transition` are normalized to the sample rate (cycles per
/// sample); `cutoff` is the -6 dB point, the transition band is centered on
/// it. The tap count is odd, so the group delay is an integer.
pub fn kaiser_lowpass(cutoff: f64, transition: f64, atten_db: f64) -> Vec<f64> {
    let beta = if atten_db > 50.0 {
        0.1102 * (atten_db - 8.7)
    } else if atten_db >= 21.0 {
        0.5842 * (atten_db - 21.0).powf(0.4) + 0.07886 * (atten_db - 21.0)
    } else {
        0.0
    };
    let mut n = ((atten_db - 7.95) / (14.36 * transition)).ceil().max(1.0) as usize + 1;
    if n.is_multiple_of(2) {
        n += 1;
    }
    let center = (n - 1) as f64 / 2.0;
    let norm = bessel_i0(beta);
    let mut taps: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 - center;
            let sinc = if t == 0.0 {
                2.0 * cutoff
            } else {
                (2.0 * PI * cutoff * t).sin() / (PI * t)
            };
            let r = t / center.max(1.0);
            let w = bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / norm;
            sinc * w
        })
        .collect();
    let dc: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= dc);
    taps
}

/// Zero-phase application of an odd-length linear-phase FIR: the group
/// delay is removed so output sample `n` lines up with input sample `n`.
/// Samples outside the input are taken as zero.
pub fn filter_centered(x: &[Complex64], taps: &[f64]) -> Vec<Complex64> {
    let delay = (taps.len() - 1) / 2;
    let n = x.len() as isize;
    (0..n)
        .map(|i| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (m, &h) in taps.iter().enumerate() {
                let j = i + delay as isize - m as isize;
                if j >= 0 && j < n {
                    acc += x[j as usize] * h;
                }
            }
            acc
        })
        .collect()
}

/// Causal complex FIR, output truncated to the input length.
pub fn fir_causal(x: &[Complex64], taps: &[Complex64]) -> Vec<Complex64> {
    (0..x.len())
        .map(|n| taps.iter().enumerate().take(n + 1).map(|(m, h)| h * x[n - m]).sum())
        .collect()
}
