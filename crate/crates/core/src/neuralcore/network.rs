use super::params::{ParamGrads, Parameterized};
use crate::exec::{map_chunks, Exec};

/// Samples per gradient work unit. Fixed so the reduction order does not
/// depend on the thread count.
pub const GRAD_CHUNK: usize = 16;

/// A real-valued regression network trained on mean squared error.
pub trait Network: Parameterized + Sync {
    fn input_len(&self) -> usize;
    fn output_len(&self) -> usize;

    fn forward(&self, x: &[f64]) -> Vec<f64>;

    /// Runs one sample forward and back. `g_scale` multiplies the squared
    /// error gradient `2 (y - t)`. Returns the sample's summed squared error.
    fn accumulate(&self, x: &[f64], target: &[f64], g_scale: f64, grads: &mut ParamGrads) -> f64;

    /// Which parameter blocks the optimizer may update.
    fn trainable_blocks(&self) -> Vec<bool> {
        vec![true; self.param_blocks().len()]
    }
}

/// Flat row-major sample storage: `inputs[i * in_len ..]`, `targets[i * out_len ..]`.
#[derive(Debug, Clone, Copy)]
pub struct Samples<'a> {
    pub inputs: &'a [f64],
    pub targets: &'a [f64],
    pub in_len: usize,
    pub out_len: usize,
}

impl<'a> Samples<'a> {
    pub fn input(&self, i: usize) -> &'a [f64] {
        &self.inputs[i * self.in_len..(i + 1) * self.in_len]
    }

    pub fn target(&self, i: usize) -> &'a [f64] {
        &self.targets[i * self.out_len..(i + 1) * self.out_len]
    }

    pub fn len(&self) -> usize {
        self.inputs.len() / self.in_len
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Batch-mean MSE (averaged over samples and outputs) and its exact
/// gradient for the samples at `indices`.
pub fn batch_loss_and_gradients<N: Network>(
    net: &N,
    data: Samples<'_>,
    indices: &[usize],
    exec: Exec,
) -> (f64, ParamGrads) {
    assert!(!indices.is_empty(), "empty batch");
    let denom = (indices.len() * net.output_len()) as f64;
    let parts = map_chunks(exec, indices, GRAD_CHUNK, |_, chunk| {
        let mut g = ParamGrads::zeros_like(net);
        let mut sse = 0.0;
        for &i in chunk {
            sse += net.accumulate(data.input(i), data.target(i), 1.0 / denom, &mut g);
        }
        (sse, g)
    });
    let mut parts = parts.into_iter();
    let (mut sse, mut grads) = parts.next().expect("nonempty");
    for (s, g) in parts {
        sse += s;
        grads.add_assign(&g);
    }
    (sse / denom, grads)
}

/// Batch-mean MSE without gradients.
pub fn batch_loss<N: Network>(net: &N, data: Samples<'_>, indices: &[usize], exec: Exec) -> f64 {
    let denom = (indices.len() * net.output_len()) as f64;
    let parts = map_chunks(exec, indices, GRAD_CHUNK * 16, |_, chunk| {
        chunk
            .iter()
            .map(|&i| {
                net.forward(data.input(i))
                    .iter()
                    .zip(data.target(i))
                    .map(|(y, t)| (y - t) * (y - t))
                    .sum::<f64>()
            })
            .sum::<f64>()
    });
    parts.into_iter().sum::<f64>() / denom
}
