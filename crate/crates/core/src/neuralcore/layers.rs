use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Tensor3;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Softmax,
    Linear,
}

/// Numerically safe softmax (max subtracted before exponentiation).
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = e.iter().sum();
    e.into_iter().map(|v| v / sum).collect()
}

fn glorot<R: Rng>(rng: &mut R, n: usize, fan_in: usize, fan_out: usize) -> Vec<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..n).map(|_| rng.random_range(-limit..=limit)).collect()
}

/// Fully connected layer, `activation(W x + b)` with `W` stored `[out][in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            biases: vec![0.0; out_dim],
            activation,
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng>(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut R) -> Self {
        Self {
            weights: glorot(rng, in_dim * out_dim, in_dim, out_dim),
            ..Self::zeros(in_dim, out_dim, activation)
        }
    }

    pub fn num_params(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    pub(crate) fn forward(&self, x: &[f64]) -> Vec<f64> {
        let z: Vec<f64> = self
            .weights
            .chunks_exact(self.in_dim)
            .zip(&self.biases)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect();
        match self.activation {
            Activation::Tanh => z.into_iter().map(f64::tanh).collect(),
            Activation::Softmax => softmax(&z),
            Activation::Linear => z,
        }
    }

    /// Back-propagates `gy` (gradient w.r.t. the activated output `y`),
    /// accumulating parameter gradients and returning the input gradient.
    pub(crate) fn backward(&self, x: &[f64], y: &[f64], gy: &[f64], gw: &mut [f64], gb: &mut [f64]) -> Vec<f64> {
        let gz: Vec<f64> = match self.activation {
            Activation::Tanh => y.iter().zip(gy).map(|(y, g)| g * (1.0 - y * y)).collect(),
            Activation::Softmax => {
                let dot: f64 = y.iter().zip(gy).map(|(a, b)| a * b).sum();
                y.iter().zip(gy).map(|(y, g)| y * (g - dot)).collect()
            }
            Activation::Linear => gy.to_vec(),
        };
        let mut gx = vec![0.0; self.in_dim];
        for (o, &g) in gz.iter().enumerate() {
            gb[o] += g;
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let grow = &mut gw[o * self.in_dim..(o + 1) * self.in_dim];
            for i in 0..self.in_dim {
                grow[i] += g * x[i];
                gx[i] += g * row[i];
            }
        }
        gx
    }
}

/// Checked dense forward pass.
pub fn dense_forward(x: &[f64], layer: &DenseLayer) -> Result<Vec<f64>> {
    if x.len() != layer.in_dim {
        return Err(Error::Shape(format!(
            "dense layer expects {} inputs, got {}",
            layer.in_dim,
            x.len()
        )));
    }
    Ok(layer.forward(x))
}

/// Valid (no padding, stride 1) 2-D convolution over a 3-D tensor followed
/// by tanh. Kernels are stored `[out][kh][kw][in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kh: usize,
    pub kw: usize,
    pub kernels: Vec<f64>,
    pub biases: Vec<f64>,
}

impl ConvLayer {
    pub fn zeros(out_channels: usize, in_channels: usize, kh: usize, kw: usize) -> Self {
        Self {
            out_channels,
            in_channels,
            kh,
            kw,
            kernels: vec![0.0; out_channels * kh * kw * in_channels],
            biases: vec![0.0; out_channels],
        }
    }

    pub fn glorot<R: Rng>(out_channels: usize, in_channels: usize, kh: usize, kw: usize, rng: &mut R) -> Self {
        let area = kh * kw;
        Self {
            kernels: glorot(
                rng,
                out_channels * area * in_channels,
                area * in_channels,
                area * out_channels,
            ),
            ..Self::zeros(out_channels, in_channels, kh, kw)
        }
    }

    pub fn num_params(&self) -> usize {
        self.kernels.len() + self.biases.len()
    }

    pub fn output_dims(&self, input: (usize, usize, usize)) -> Result<(usize, usize, usize)> {
        if input.2 != self.in_channels {
            return Err(Error::Shape(format!(
                "conv expects depth {}, got {}",
                self.in_channels, input.2
            )));
        }
        if input.0 < self.kh || input.1 < self.kw {
            return Err(Error::Shape(format!(
                "input {}x{} smaller than {}x{} kernel",
                input.0, input.1, self.kh, self.kw
            )));
        }
        Ok((input.0 - self.kh + 1, input.1 - self.kw + 1, self.out_channels))
    }

    #[inline]
    fn kidx(&self, s: usize, dh: usize, dw: usize, c: usize) -> usize {
        ((s * self.kh + dh) * self.kw + dw) * self.in_channels + c
    }

    /// Unchecked forward; window terms accumulate in row-major order.
    pub(crate) fn forward(&self, x: &Tensor3) -> Tensor3 {
        let (h, w, _) = x.dims();
        let dims = (h - self.kh + 1, w - self.kw + 1, self.out_channels);
        let mut out = Tensor3::zeros(dims);
        let c_in = self.in_channels;
        let xv = x.values();
        for oh in 0..dims.0 {
            for ow in 0..dims.1 {
                for s in 0..self.out_channels {
                    let mut acc = self.biases[s];
                    for dh in 0..self.kh {
                        for dw in 0..self.kw {
                            let xi = ((oh + dh) * w + ow + dw) * c_in;
                            let ki = self.kidx(s, dh, dw, 0);
                            for c in 0..c_in {
                                acc += self.kernels[ki + c] * xv[xi + c];
                            }
                        }
                    }
                    let i = out.index(oh, ow, s);
                    out.values_mut()[i] = acc.tanh();
                }
            }
        }
        out
    }

    /// Accumulates kernel/bias gradients given `gy` w.r.t. the activated
    /// output `y`. The input gradient is not needed (the conv layer sits on
    /// the raw features).
    pub(crate) fn backward_params(&self, x: &Tensor3, y: &Tensor3, gy: &[f64], gk: &mut [f64], gb: &mut [f64]) {
        let (_, w, c_in) = x.dims();
        let (oh_n, ow_n, _) = y.dims();
        let xv = x.values();
        for oh in 0..oh_n {
            for ow in 0..ow_n {
                for s in 0..self.out_channels {
                    let i = y.index(oh, ow, s);
                    let yv = y.values()[i];
                    let g = gy[i] * (1.0 - yv * yv);
                    gb[s] += g;
                    for dh in 0..self.kh {
                        for dw in 0..self.kw {
                            let xi = ((oh + dh) * w + ow + dw) * c_in;
                            let ki = self.kidx(s, dh, dw, 0);
                            for c in 0..c_in {
                                gk[ki + c] += g * xv[xi + c];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Checked convolution forward pass.
pub fn conv2d_valid_forward(x: &Tensor3, layer: &ConvLayer) -> Result<Tensor3> {
    layer.output_dims(x.dims())?;
    Ok(layer.forward(x))
}

/// Which axes [`avg_pool`] averages out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolAxis {
    /// Over H and W: one value per channel (`1 x 1 x S`).
    Spatial,
    /// Over channels: one value per position (`H x W x 1`).
    Channel,
}

pub fn avg_pool(r: &Tensor3, axis: PoolAxis) -> Vec<f64> {
    let (hw, s) = (r.spatial(), r.channels());
    let v = r.values();
    match axis {
        PoolAxis::Spatial => {
            let mut out = vec![0.0; s];
            for pos in v.chunks_exact(s) {
                for (o, x) in out.iter_mut().zip(pos) {
                    *o += x;
                }
            }
            out.iter_mut().for_each(|o| *o /= hw as f64);
            out
        }
        PoolAxis::Channel => v
            .chunks_exact(s)
            .map(|pos| pos.iter().sum::<f64>() / s as f64)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_examples() {
        let mut id = DenseLayer::zeros(3, 3, Activation::Linear);
        for i in 0..3 {
            id.weights[i * 3 + i] = 1.0;
        }
        assert_eq!(dense_forward(&[1.0, -2.0, 0.5], &id).unwrap(), vec![1.0, -2.0, 0.5]);
        let sm = DenseLayer::zeros(2, 4, Activation::Softmax);
        assert_eq!(dense_forward(&[3.0, 1.0], &sm).unwrap(), vec![0.25; 4]);
        let th = DenseLayer::zeros(2, 3, Activation::Tanh);
        assert_eq!(dense_forward(&[3.0, 1.0], &th).unwrap(), vec![0.0; 3]);
        assert!(matches!(dense_forward(&[1.0], &th), Err(Error::Shape(_))));
    }

    #[test]
    fn softmax_survives_large_logits() {
        let p = softmax(&[1000.0, 1000.0, -1000.0]);
        assert!((p[0] - 0.5).abs() < 1e-15 && p[2] == 0.0);
    }

    #[test]
    fn conv_zero_input_gives_tanh_bias() {
        let mut conv = ConvLayer::zeros(3, 1, 3, 3);
        conv.biases = vec![0.1, -0.4, 2.0];
        conv.kernels.iter_mut().for_each(|k| *k = 0.7);
        let x = Tensor3::zeros((5, 4, 1));
        let y = conv2d_valid_forward(&x, &conv).unwrap();
        assert_eq!(y.dims(), (3, 2, 3));
        for p in y.values().chunks(3) {
            assert_eq!(p, &[0.1f64.tanh(), (-0.4f64).tanh(), 2.0f64.tanh()]);
        }
    }

    #[test]
    fn conv_dims_and_errors() {
        let conv = ConvLayer::zeros(9, 3, 3, 3);
        let y = conv2d_valid_forward(&Tensor3::zeros((5, 3, 3)), &conv).unwrap();
        assert_eq!(y.dims(), (3, 1, 9));
        assert!(matches!(
            conv2d_valid_forward(&Tensor3::zeros((5, 3, 2)), &conv),
            Err(Error::Shape(_))
        ));
        assert!(conv2d_valid_forward(&Tensor3::zeros((5, 2, 3)), &conv).is_err());
    }

    #[test]
    fn conv_window_sum_by_hand() {
        // 3x3x1 input, one 3x3 kernel of ones: output is tanh(sum of inputs).
        let x = Tensor3::from_vec((3, 3, 1), (1..=9).map(|v| v as f64 * 0.01).collect()).unwrap();
        let mut conv = ConvLayer::zeros(1, 1, 3, 3);
        conv.kernels.iter_mut().for_each(|k| *k = 1.0);
        let y = conv2d_valid_forward(&x, &conv).unwrap();
        assert!((y.values()[0] - 0.45f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn pooling() {
        let t = Tensor3::from_vec((2, 2, 1), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(avg_pool(&t, PoolAxis::Spatial), vec![2.5]);
        let c = Tensor3::from_vec((2, 3, 2), vec![0.7; 12]).unwrap();
        assert!(avg_pool(&c, PoolAxis::Spatial).iter().all(|v| (v - 0.7).abs() < 1e-15));
        assert!(avg_pool(&c, PoolAxis::Channel).iter().all(|v| (v - 0.7).abs() < 1e-15));
        // channel s holds value s+1 everywhere
        let v: Vec<f64> = (0..6).flat_map(|_| [1.0, 2.0, 3.0]).collect();
        let r = Tensor3::from_vec((3, 2, 3), v).unwrap();
        assert_eq!(avg_pool(&r, PoolAxis::Spatial), vec![1.0, 2.0, 3.0]);
        assert_eq!(avg_pool(&r, PoolAxis::Channel), vec![2.0; 6]);
    }
}
