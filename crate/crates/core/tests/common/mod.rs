#![allow(dead_code)]

use pa_modelkit::models::{build_drvcnn, gmp_design_matrix, DrvcnnModel, GmpIndex, MlpModel};
use pa_modelkit::neuralcore::{batch_loss, batch_loss_and_gradients, Network, Parameterized, Samples};
use pa_modelkit::signals::{generate_ofdm_carrier, CarrierConfig, ComplexSeries};
use pa_modelkit::{seed, Complex64, Exec};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub const FD_STEP: f64 = 1e-5;

/// Random inputs/targets for a network.
pub fn random_batch<N: Network>(net: &N, n: usize, seed_value: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = seed::rng(seed_value);
    let inputs = (0..n * net.input_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let targets = (0..n * net.output_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    (inputs, targets)
}

/// Perturbs every parameter, biases included, so no path sits at a special
/// point such as all-zero biases.
pub fn jitter<P: Parameterized>(model: &mut P, seed_value: u64, scale: f64) {
    let mut rng = seed::rng(seed_value);
    for block in model.param_blocks_mut() {
        for v in block.iter_mut() {
            *v += scale * rng.random_range(-1.0..1.0);
        }
    }
}

/// Analytic-vs-central-difference comparison for one network and batch.
#[derive(Debug, Clone, Copy)]
pub struct GradCheck {
    /// `||a - n|| / max(||a||, ||n||)` over the whole gradient vector.
    pub global: f64,
    /// The same ratio for the worst single parameter block.
    pub worst_block: f64,
    /// Smallest gradient norm among the checked blocks.
    pub min_block_norm: f64,
}

/// Compares analytic gradients of the batch-mean MSE with central
/// differences. Blocks the network does not train must be exactly zero;
/// otherwise the result is infinite.
pub fn grad_check<N: Network + Clone>(net: &N, inputs: &[f64], targets: &[f64]) -> GradCheck {
    let data = Samples {
        inputs,
        targets,
        in_len: net.input_len(),
        out_len: net.output_len(),
    };
    let idx: Vec<usize> = (0..data.len()).collect();
    let (_, analytic) = batch_loss_and_gradients(net, data, &idx, Exec::Sequential);
    let trainable = net.trainable_blocks();
    let mut out = GradCheck {
        global: 0.0,
        worst_block: 0.0,
        min_block_norm: f64::INFINITY,
    };
    let (mut diff_all, mut a_all, mut n_all) = (0.0, 0.0, 0.0);
    let mut probe = net.clone();
    for (b, grad) in analytic.blocks.iter().enumerate() {
        if !trainable[b] {
            if grad.iter().any(|g| *g != 0.0) {
                out.global = f64::INFINITY;
                out.worst_block = f64::INFINITY;
                return out;
            }
            continue;
        }
        let mut num = vec![0.0; grad.len()];
        for (i, slot) in num.iter_mut().enumerate() {
            let orig = probe.param_blocks()[b][i];
            probe.param_blocks_mut()[b][i] = orig + FD_STEP;
            let up = batch_loss(&probe, data, &idx, Exec::Sequential);
            probe.param_blocks_mut()[b][i] = orig - FD_STEP;
            let down = batch_loss(&probe, data, &idx, Exec::Sequential);
            probe.param_blocks_mut()[b][i] = orig;
            *slot = (up - down) / (2.0 * FD_STEP);
        }
        let d2: f64 = grad.iter().zip(&num).map(|(a, n)| (a - n).powi(2)).sum();
        let a2: f64 = grad.iter().map(|a| a * a).sum();
        let n2: f64 = num.iter().map(|a| a * a).sum();
        diff_all += d2;
        a_all += a2;
        n_all += n2;
        let denom = a2.max(n2).sqrt();
        if denom > 0.0 {
            out.worst_block = out.worst_block.max(d2.sqrt() / denom);
        }
        out.min_block_norm = out.min_block_norm.min(a2.sqrt());
    }
    out.global = diff_all.sqrt() / a_all.max(n_all).sqrt();
    out
}

/// One randomized gradient-check case for the attention network.
pub fn drvcnn_case(case: u64) -> (usize, usize, GradCheck) {
    let k = 1 + (case % 3) as usize;
    let m = 2 + ((case / 3) % 2) as usize;
    let mut net = build_drvcnn(k, m, seed::derive(case, "gc/init")).unwrap();
    jitter(&mut net, seed::derive(case, "gc/jitter"), 0.2);
    net.frozen_conv = case % 5 == 4;
    let (x, t) = random_batch(&net, 3, seed::derive(case, "gc/batch"));
    (k, m, grad_check(&net, &x, &t))
}

pub fn mlp_case(net: &MlpModel, case: u64) -> GradCheck {
    let mut net = net.clone();
    jitter(&mut net, seed::derive(case, "gc/jitter"), 0.2);
    let (x, t) = random_batch(&net, 3, seed::derive(case, "gc/batch"));
    grad_check(&net, &x, &t)
}

pub fn drvcnn_default(k: usize, m: usize) -> DrvcnnModel {
    build_drvcnn(k, m, 1).unwrap()
}

/// NMSE by direct summation, with the I and Q parts summed separately.
pub fn brute_force_nmse_db(pred: &[Complex64], meas: &[Complex64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..meas.len() {
        let di = pred[i].re - meas[i].re;
        let dq = pred[i].im - meas[i].im;
        num += di * di + dq * dq;
        den += meas[i].re * meas[i].re + meas[i].im * meas[i].im;
    }
    10.0 * (num / den).log10()
}

/// Unit-peak OFDM stimulus.
pub fn stimulus(n: usize, seed_value: u64) -> ComplexSeries {
    let cfg = CarrierConfig::new(300, 20e6, 4, 16).with_seed(seed_value);
    let x = generate_ofdm_carrier(&cfg, n).unwrap();
    let peak = x.peak();
    ComplexSeries::new(x.samples().iter().map(|v| v / peak).collect(), x.sample_rate_hz()).unwrap()
}

/// Planted coefficients whose magnitude decays with nonlinearity order and
/// memory, like a real PA's.
pub fn planted_coeffs(idx: &GmpIndex, seed_value: u64) -> Vec<Complex64> {
    let mut rng = seed::rng(seed_value);
    let mut c = Vec::with_capacity(idx.num_terms());
    for (_, k, l, m) in idx.terms() {
        let decay = 0.6f64.powi(k as i32) * 0.5f64.powi((l + m) as i32);
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        c.push(Complex64::new(re, im) * decay);
    }
    c[0] = Complex64::new(1.0, 0.0);
    c
}

/// `Phi(x) a` through the explicit design matrix.
pub fn planted_output(x: &ComplexSeries, idx: &GmpIndex, coeffs: &[Complex64]) -> ComplexSeries {
    let phi = gmp_design_matrix(x, idx).unwrap();
    ComplexSeries::new(phi.mul_vec(coeffs), x.sample_rate_hz()).unwrap()
}

pub fn rel_error(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum::<f64>().sqrt();
    num / den
}
