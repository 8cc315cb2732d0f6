use std::collections::BTreeMap;

use super::tape::{Gradients, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Named trainable tensors, iterated in sorted name order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    tensors: BTreeMap<String, Tensor>,
}

/// Parameter handles on one tape.
#[derive(Clone, Debug, Default)]
pub struct BoundParams {
    vars: BTreeMap<String, Var>,
}

impl BoundParams {
    pub fn get(&self, name: &str) -> Result<Var> {
        self.vars.get(name).copied().ok_or_else(|| Error::Unknown {
            kind: "parameter",
            name: name.to_string(),
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Var)> {
        self.vars.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.tensors.insert(name.into(), tensor.with_requires_grad());
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.get_mut(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.tensors.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    /// Records every tensor on `tape` as a gradient-tracking leaf.
    pub fn bind(&self, tape: &mut Tape) -> BoundParams {
        let vars = self
            .tensors
            .iter()
            .map(|(k, t)| (k.clone(), tape.param(t)))
            .collect();
        BoundParams { vars }
    }

    /// Copies the gradients of a finished backward pass into each tensor.
    pub fn store_gradients(&mut self, bound: &BoundParams, grads: &Gradients) -> Result<()> {
        for (name, tensor) in self.tensors.iter_mut() {
            let var = bound.get(name)?;
            let g = grads.get(var).ok_or(Error::ForeignVar)?;
            tensor.set_grad(g.to_vec())?;
        }
        Ok(())
    }

    pub fn clear_gradients(&mut self) {
        self.tensors.values_mut().for_each(Tensor::clear_grad);
    }
}
