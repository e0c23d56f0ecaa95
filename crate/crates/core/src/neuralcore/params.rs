use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A named, shaped parameter array as stored in model files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, shape: Vec<usize>) -> Self {
        Self {
            name: name.into(),
            shape,
        }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Anything whose trainable scalars are exposed as ordered named blocks.
pub trait Parameterized {
    fn param_specs(&self) -> Vec<ParamSpec>;
    fn param_blocks(&self) -> Vec<&[f64]>;
    fn param_blocks_mut(&mut self) -> Vec<&mut [f64]>;

    fn export_params(&self) -> Vec<NamedArray> {
        self.param_specs()
            .into_iter()
            .zip(self.param_blocks())
            .map(|(spec, values)| NamedArray {
                name: spec.name,
                shape: spec.shape,
                values: values.to_vec(),
            })
            .collect()
    }

    /// Overwrites every block from `arrays`, matched by name; shapes must
    /// agree exactly.
    fn import_params(&mut self, arrays: &[NamedArray]) -> Result<()> {
        let specs = self.param_specs();
        for spec in &specs {
            let a = arrays
                .iter()
                .find(|a| a.name == spec.name)
                .ok_or_else(|| Error::Config(format!("missing parameter block '{}'", spec.name)))?;
            if a.shape != spec.shape || a.values.len() != spec.len() {
                return Err(Error::Config(format!(
                    "block '{}' has shape {:?}, expected {:?}",
                    spec.name, a.shape, spec.shape
                )));
            }
        }
        for (spec, block) in specs.iter().zip(self.param_blocks_mut()) {
            let a = arrays.iter().find(|a| a.name == spec.name).expect("checked above");
            block.copy_from_slice(&a.values);
        }
        Ok(())
    }
}

/// Total number of trainable scalars.
pub fn count_parameters<P: Parameterized + ?Sized>(model: &P) -> usize {
    model.param_blocks().iter().map(|b| b.len()).sum()
}

/// Gradient blocks aligned with a model's parameter blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub blocks: Vec<Vec<f64>>,
}

impl ParamGrads {
    pub fn zeros_like<P: Parameterized + ?Sized>(model: &P) -> Self {
        Self {
            blocks: model.param_blocks().iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &ParamGrads) {
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.blocks.concat()
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.iter().flatten().all(|v| *v == 0.0)
    }
}
