use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamId(pub usize);

/// A trainable tensor with its gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub grad: Vec<f64>,
    /// Whether decoupled weight decay applies (off for biases and norm gains).
    pub decay: bool,
}

/// Flat registry of every trainable tensor in a model.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
}

impl ParamStore {
    pub const fn new() -> Self {
        ParamStore { params: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor, decay: bool) -> ParamId {
        let grad = vec![0.0; value.len()];
        self.params.push(Param {
            name: name.into(),
            value,
            grad,
            decay,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar coordinates across all parameters.
    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    pub fn accumulate(&mut self, grads: &ParamGrads) {
        for (id, g) in &grads.entries {
            let p = &mut self.params[id.0];
            for (acc, v) in p.grad.iter_mut().zip(g) {
                *acc += v;
            }
        }
    }

    /// Flattened gradient buffer, in parameter order.
    pub fn flat_grad(&self) -> Vec<f64> {
        self.params
            .iter()
            .flat_map(|p| p.grad.iter().copied())
            .collect()
    }

    pub fn flat_values(&self) -> Vec<f64> {
        self.params
            .iter()
            .flat_map(|p| p.value.data().iter().copied())
            .collect()
    }

    /// Read coordinate `index` of the flattened parameter vector.
    pub fn scalar(&self, index: usize) -> f64 {
        let (p, off) = self.locate(index);
        self.params[p].value.data()[off]
    }

    pub fn set_scalar(&mut self, index: usize, value: f64) {
        let (p, off) = self.locate(index);
        self.params[p].value.data_mut()[off] = value;
    }

    fn locate(&self, mut index: usize) -> (usize, usize) {
        for (i, p) in self.params.iter().enumerate() {
            if index < p.value.len() {
                return (i, index);
            }
            index -= p.value.len();
        }
        panic!("flat parameter index out of range");
    }

    /// Overwrite values of every parameter whose name appears in `source`.
    /// Returns how many tensors were copied.
    pub fn load_matching(&mut self, source: &ParamStore) -> Result<usize> {
        let mut copied = 0;
        for src in &source.params {
            if let Some(id) = self.find(&src.name) {
                let dst = &mut self.params[id.0];
                if dst.value.shape() != src.value.shape() {
                    return Err(Error::ShapeMismatch {
                        op: "load_params",
                        lhs: dst.value.shape().to_vec(),
                        rhs: src.value.shape().to_vec(),
                    });
                }
                dst.value = src.value.clone();
                copied += 1;
            }
        }
        Ok(copied)
    }
}

/// Gradients of the parameters reached by one backward pass.
#[derive(Debug, Clone, Default)]
pub struct ParamGrads {
    pub(crate) entries: Vec<(ParamId, Vec<f64>)>,
}

impl ParamGrads {
    pub fn get(&self, id: ParamId) -> Option<&[f64]> {
        self.entries
            .iter()
            .find(|(p, _)| *p == id)
            .map(|(_, g)| g.as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &[f64])> {
        self.entries.iter().map(|(id, g)| (*id, g.as_slice()))
    }
}
