use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a parameter inside a [`ParameterStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named trainable tensors plus Adam moment estimates.
#[derive(Clone, Debug, Default)]
pub struct ParameterStore {
    names: Vec<String>,
    params: Vec<Tensor>,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
    step: u64,
    by_name: HashMap<String, ParamId>,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, mut tensor: Tensor) -> Result<ParamId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(Error::contract(format!(
                "duplicate parameter name {name:?}"
            )));
        }
        let id = ParamId(self.params.len());
        tensor.zero_grad();
        self.first_moment.push(vec![0.0; tensor.len()]);
        self.second_moment.push(vec![0.0; tensor.len()]);
        self.params.push(tensor);
        self.names.push(name.clone());
        self.by_name.insert(name, id);
        Ok(id)
    }

    /// Dense weight matrix `[fan_in, fan_out]` drawn from U(-a, a), a = sqrt(6 / (fan_in + fan_out)).
    pub fn add_uniform<R: Rng>(
        &mut self,
        name: impl Into<String>,
        fan_in: usize,
        fan_out: usize,
        rng: &mut R,
    ) -> Result<ParamId> {
        let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let dist = Uniform::new_inclusive(-a, a).expect("finite bound");
        let data = (0..fan_in * fan_out).map(|_| dist.sample(rng)).collect();
        self.add(name, Tensor::new(vec![fan_in, fan_out], data)?)
    }

    /// Embedding table `[rows, dim]` drawn from N(0, std²).
    pub fn add_normal<R: Rng>(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        dim: usize,
        std: f64,
        rng: &mut R,
    ) -> Result<ParamId> {
        let dist = Normal::new(0.0, std).map_err(|e| Error::contract(e.to_string()))?;
        let data = (0..rows * dim).map(|_| dist.sample(rng)).collect();
        self.add(name, Tensor::new(vec![rows, dim], data)?)
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, shape: &[usize]) -> Result<ParamId> {
        self.add(name, Tensor::zeros(shape))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0]
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.zero_grad();
        }
    }

    pub(crate) fn moments_mut(&mut self, id: ParamId) -> (&mut Tensor, &mut [f64], &mut [f64]) {
        (
            &mut self.params[id.0],
            &mut self.first_moment[id.0],
            &mut self.second_moment[id.0],
        )
    }

    pub(crate) fn advance_step(&mut self) -> u64 {
        self.step += 1;
        self.step
    }

    /// Overwrites parameter values (not optimizer state) from another store with identical layout.
    pub fn copy_values_from(&mut self, other: &ParameterStore) -> Result<()> {
        if self.names != other.names {
            return Err(Error::contract("parameter layouts differ"));
        }
        for (dst, src) in self.params.iter_mut().zip(&other.params) {
            if dst.shape() != src.shape() {
                return Err(Error::Dimension {
                    op: "copy_values_from",
                    left: dst.shape().to_vec(),
                    right: src.shape().to_vec(),
                });
            }
            dst.data_mut().copy_from_slice(src.data());
        }
        Ok(())
    }
}
