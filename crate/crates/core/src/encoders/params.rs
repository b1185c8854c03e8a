//! Named parameter tensors stored in one flat buffer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Real;

/// Shape and initialization facts for one parameter tensor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    /// Inputs feeding one output unit; sets the init bound `√(1/fan_in)`.
    pub fan_in: usize,
    /// Biases start at zero.
    pub bias: bool,
}

impl TensorSpec {
    pub fn weight(name: impl Into<String>, shape: Vec<usize>, fan_in: usize) -> Self {
        Self { name: name.into(), shape, fan_in, bias: false }
    }

    pub fn bias(name: impl Into<String>, len: usize) -> Self {
        Self { name: name.into(), shape: vec![len], fan_in: 1, bias: true }
    }

    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

/// A list of tensors laid out back to back in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet<T> {
    specs: Vec<TensorSpec>,
    offsets: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> ParamSet<T> {
    pub fn zeros(specs: Vec<TensorSpec>) -> Self {
        let mut offsets = Vec::with_capacity(specs.len() + 1);
        let mut total = 0;
        for s in &specs {
            offsets.push(total);
            total += s.numel();
        }
        offsets.push(total);
        Self { specs, offsets, data: vec![T::zero(); total] }
    }

    /// Builds from a flat buffer; `None` if the length disagrees with `specs`.
    pub fn from_data(specs: Vec<TensorSpec>, data: Vec<T>) -> Option<Self> {
        let mut set = Self::zeros(specs);
        (set.data.len() == data.len()).then(|| {
            set.data = data;
            set
        })
    }

    /// Weights uniform in `±√(1/fan_in)`, biases zero, drawn in declaration
    /// order from `rng`.
    pub fn init_uniform<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for i in 0..self.specs.len() {
            let bias = self.specs[i].bias;
            let bound = (1.0 / self.specs[i].fan_in as f64).sqrt();
            for v in self.tensor_mut(i) {
                *v = if bias { T::zero() } else { T::of(rng.random_range(-bound..bound)) };
            }
        }
    }

    pub fn seeded(specs: Vec<TensorSpec>, seed: u64) -> Self {
        let mut set = Self::zeros(specs);
        set.init_uniform(&mut ChaCha8Rng::seed_from_u64(seed));
        set
    }

    pub fn zeros_like(&self) -> Self {
        Self { specs: self.specs.clone(), offsets: self.offsets.clone(), data: vec![T::zero(); self.data.len()] }
    }

    pub fn specs(&self) -> &[TensorSpec] {
        &self.specs
    }

    /// Total scalar count.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn tensor(&self, i: usize) -> &[T] {
        &self.data[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn tensor_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.specs.iter().position(|s| s.name == name)
    }

    pub fn get(&self, name: &str) -> Option<&[T]> {
        self.index_of(name).map(|i| self.tensor(i))
    }

    /// Scalar offset of tensor `i` in the flat buffer.
    pub fn offset(&self, i: usize) -> usize {
        self.offsets[i]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn add_assign(&mut self, other: &Self) {
        assert_eq!(self.data.len(), other.data.len(), "parameter layouts differ");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: T) {
        for a in &mut self.data {
            *a *= factor;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Real>(&self) -> ParamSet<U> {
        ParamSet {
            specs: self.specs.clone(),
            offsets: self.offsets.clone(),
            data: self.data.iter().map(|v| U::of(v.to_f64().expect("finite"))).collect(),
        }
    }
}
