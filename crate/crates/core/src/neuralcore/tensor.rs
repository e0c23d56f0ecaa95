use crate::{Error, Result};

/// Dense real tensor of dims `(H, W, S)`, stored `[h][w][s]` (channel
/// innermost).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: (usize, usize, usize),
    values: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(dims: (usize, usize, usize)) -> Self {
        Self {
            dims,
            values: vec![0.0; dims.0 * dims.1 * dims.2],
        }
    }

    pub fn from_vec(dims: (usize, usize, usize), values: Vec<f64>) -> Result<Self> {
        if dims.0 == 0 || dims.1 == 0 || dims.2 == 0 {
            return Err(Error::Shape(format!("tensor dims must be positive, got {dims:?}")));
        }
        if dims.0 * dims.1 * dims.2 != values.len() {
            return Err(Error::Shape(format!(
                "dims {dims:?} need {} values, got {}",
                dims.0 * dims.1 * dims.2,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("tensor values must be finite".into()));
        }
        Ok(Self { dims, values })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    /// Number of spatial positions `H * W`.
    pub fn spatial(&self) -> usize {
        self.dims.0 * self.dims.1
    }

    pub fn channels(&self) -> usize {
        self.dims.2
    }

    #[inline]
    pub fn index(&self, h: usize, w: usize, s: usize) -> usize {
        (h * self.dims.1 + w) * self.dims.2 + s
    }

    #[inline]
    pub fn get(&self, h: usize, w: usize, s: usize) -> f64 {
        self.values[self.index(h, w, s)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}
