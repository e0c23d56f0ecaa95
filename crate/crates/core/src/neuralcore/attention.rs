//! Channel-then-spatial attention over a convolutional feature map.
//!
//! Channel branch: average over positions, tanh FC down to `max(1, S/3)`,
//! softmax FC back to `S` weights, scale every channel. Spatial branch:
//! average over channels, tanh FC down to `max(1, HW/3)`, softmax FC back to
//! `HW` weights, scale every position.

use rand::Rng;

use super::layers::{avg_pool, Activation, DenseLayer, PoolAxis};
use super::Tensor3;
use crate::{Error, Result};

pub fn bottleneck(n: usize) -> usize {
    (n / 3).max(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub channel_fc1: DenseLayer,
    pub channel_fc2: DenseLayer,
    pub spatial_fc1: DenseLayer,
    pub spatial_fc2: DenseLayer,
}

/// Intermediates kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct AttentionCache {
    pooled_c: Vec<f64>,
    hidden_c: Vec<f64>,
    pub w_a: Vec<f64>,
    pub r_a: Tensor3,
    pooled_s: Vec<f64>,
    hidden_s: Vec<f64>,
    pub w_s: Vec<f64>,
}

impl AttentionParams {
    pub fn zeros(channels: usize, positions: usize) -> Self {
        let (bc, bs) = (bottleneck(channels), bottleneck(positions));
        Self {
            channel_fc1: DenseLayer::zeros(channels, bc, Activation::Tanh),
            channel_fc2: DenseLayer::zeros(bc, channels, Activation::Softmax),
            spatial_fc1: DenseLayer::zeros(positions, bs, Activation::Tanh),
            spatial_fc2: DenseLayer::zeros(bs, positions, Activation::Softmax),
        }
    }

    pub fn glorot<R: Rng>(channels: usize, positions: usize, rng: &mut R) -> Self {
        let (bc, bs) = (bottleneck(channels), bottleneck(positions));
        Self {
            channel_fc1: DenseLayer::glorot(channels, bc, Activation::Tanh, rng),
            channel_fc2: DenseLayer::glorot(bc, channels, Activation::Softmax, rng),
            spatial_fc1: DenseLayer::glorot(positions, bs, Activation::Tanh, rng),
            spatial_fc2: DenseLayer::glorot(bs, positions, Activation::Softmax, rng),
        }
    }

    pub fn channels(&self) -> usize {
        self.channel_fc1.in_dim
    }

    pub fn positions(&self) -> usize {
        self.spatial_fc1.in_dim
    }

    pub fn layers(&self) -> [&DenseLayer; 4] {
        [
            &self.channel_fc1,
            &self.channel_fc2,
            &self.spatial_fc1,
            &self.spatial_fc2,
        ]
    }

    pub fn layers_mut(&mut self) -> [&mut DenseLayer; 4] {
        [
            &mut self.channel_fc1,
            &mut self.channel_fc2,
            &mut self.spatial_fc1,
            &mut self.spatial_fc2,
        ]
    }

    fn check(&self, r: &Tensor3) -> Result<()> {
        if r.channels() != self.channels() || r.spatial() != self.positions() {
            return Err(Error::Shape(format!(
                "attention built for {} channels x {} positions, map is {:?}",
                self.channels(),
                self.positions(),
                r.dims()
            )));
        }
        Ok(())
    }

    fn channel_weights(&self, r: &Tensor3) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let pooled = avg_pool(r, PoolAxis::Spatial);
        let hidden = self.channel_fc1.forward(&pooled);
        let w = self.channel_fc2.forward(&hidden);
        (pooled, hidden, w)
    }

    fn spatial_weights(&self, r: &Tensor3) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let pooled = avg_pool(r, PoolAxis::Channel);
        let hidden = self.spatial_fc1.forward(&pooled);
        let w = self.spatial_fc2.forward(&hidden);
        (pooled, hidden, w)
    }

    pub(crate) fn forward(&self, r: &Tensor3) -> (Tensor3, AttentionCache) {
        let s = r.channels();
        let (pooled_c, hidden_c, w_a) = self.channel_weights(r);
        let mut r_a = r.clone();
        for pos in r_a.values_mut().chunks_exact_mut(s) {
            pos.iter_mut().zip(&w_a).for_each(|(v, w)| *v *= w);
        }
        let (pooled_s, hidden_s, w_s) = self.spatial_weights(&r_a);
        let mut r_s = r_a.clone();
        for (pos, w) in r_s.values_mut().chunks_exact_mut(s).zip(&w_s) {
            pos.iter_mut().for_each(|v| *v *= w);
        }
        (
            r_s,
            AttentionCache {
                pooled_c,
                hidden_c,
                w_a,
                r_a,
                pooled_s,
                hidden_s,
                w_s,
            },
        )
    }

    /// Back-propagates through both branches. `grads` holds the eight
    /// weight/bias blocks in the order of [`AttentionParams::layers`].
    pub(crate) fn backward(
        &self,
        r: &Tensor3,
        cache: &AttentionCache,
        g_rs: &[f64],
        grads: &mut [Vec<f64>],
    ) -> Vec<f64> {
        let s = r.channels();
        let hw = r.spatial();
        let [g0, g1, g2, g3, g4, g5, g6, g7] = grads else {
            panic!("attention backward needs 8 gradient blocks");
        };

        // spatial branch: r_s[i, c] = r_a[i, c] * w_s[i]
        let mut g_ra = vec![0.0; hw * s];
        let mut g_ws = vec![0.0; hw];
        for i in 0..hw {
            for c in 0..s {
                let j = i * s + c;
                g_ra[j] += g_rs[j] * cache.w_s[i];
                g_ws[i] += g_rs[j] * cache.r_a.values()[j];
            }
        }
        let g_hs = self.spatial_fc2.backward(&cache.hidden_s, &cache.w_s, &g_ws, g6, g7);
        let g_ps = self
            .spatial_fc1
            .backward(&cache.pooled_s, &cache.hidden_s, &g_hs, g4, g5);
        for i in 0..hw {
            let g = g_ps[i] / s as f64;
            g_ra[i * s..(i + 1) * s].iter_mut().for_each(|v| *v += g);
        }

        // channel branch: r_a[i, c] = r[i, c] * w_a[c]
        let mut g_r = vec![0.0; hw * s];
        let mut g_wa = vec![0.0; s];
        for i in 0..hw {
            for c in 0..s {
                let j = i * s + c;
                g_r[j] += g_ra[j] * cache.w_a[c];
                g_wa[c] += g_ra[j] * r.values()[j];
            }
        }
        let g_hc = self.channel_fc2.backward(&cache.hidden_c, &cache.w_a, &g_wa, g2, g3);
        let g_pc = self
            .channel_fc1
            .backward(&cache.pooled_c, &cache.hidden_c, &g_hc, g0, g1);
        for i in 0..hw {
            for c in 0..s {
                g_r[i * s + c] += g_pc[c] / hw as f64;
            }
        }
        g_r
    }
}

/// Channel weights `W_a` (length S, sums to 1) and the reweighted map.
pub fn channel_attention(r: &Tensor3, p: &AttentionParams) -> Result<(Vec<f64>, Tensor3)> {
    p.check(r)?;
    let (_, _, w) = p.channel_weights(r);
    let mut out = r.clone();
    let s = r.channels();
    for pos in out.values_mut().chunks_exact_mut(s) {
        pos.iter_mut().zip(&w).for_each(|(v, w)| *v *= w);
    }
    Ok((w, out))
}

/// Spatial weights `W_s` (length HW, sums to 1) and the reweighted map.
pub fn spatial_attention(r_a: &Tensor3, p: &AttentionParams) -> Result<(Vec<f64>, Tensor3)> {
    p.check(r_a)?;
    let (_, _, w) = p.spatial_weights(r_a);
    let mut out = r_a.clone();
    let s = r_a.channels();
    for (pos, w) in out.values_mut().chunks_exact_mut(s).zip(&w) {
        pos.iter_mut().for_each(|v| *v *= w);
    }
    Ok((w, out))
}
