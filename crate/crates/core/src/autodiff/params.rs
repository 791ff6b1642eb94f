use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{AutodiffError, Real, Tensor};

/// Handle to a tensor registered in a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

/// Name, shape and flat offset of one parameter tensor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl ParamSpec {
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.numel()
    }
}

/// Ordered, named parameter tensors packed into one flat buffer.
///
/// Gradients returned by the graph use the same flat layout, so optimizer
/// and clipping code can work on plain slices.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<T> {
    specs: Vec<ParamSpec>,
    data: Vec<T>,
}

impl<T: Real> Default for ParamStore<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            specs: Vec::new(),
            data: Vec::new(),
        }
    }

    /// Rebuilds a store from declared specs and a flat buffer.
    pub fn from_parts(specs: Vec<ParamSpec>, data: Vec<T>) -> Result<Self, AutodiffError> {
        let mut offset = 0;
        for spec in &specs {
            if spec.offset != offset {
                return Err(AutodiffError::InvalidShape(spec.shape.clone()));
            }
            offset += spec.numel();
        }
        if offset != data.len() {
            return Err(AutodiffError::ShapeMismatch {
                op: "param_store",
                expected: vec![offset],
                got: vec![data.len()],
            });
        }
        Ok(Self { specs, data })
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor<T>) -> ParamId {
        let id = ParamId(self.specs.len());
        self.specs.push(ParamSpec {
            name: name.into(),
            shape: tensor.shape().to_vec(),
            offset: self.data.len(),
        });
        self.data.extend_from_slice(tensor.data());
        id
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.specs.iter().position(|s| s.name == name).map(ParamId)
    }

    pub fn spec(&self, id: ParamId) -> &ParamSpec {
        &self.specs[id.0]
    }

    pub fn specs(&self) -> &[ParamSpec] {
        &self.specs
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.specs.len()).map(ParamId)
    }

    pub fn values(&self, id: ParamId) -> &[T] {
        &self.data[self.specs[id.0].range()]
    }

    pub fn values_mut(&mut self, id: ParamId) -> &mut [T] {
        let range = self.specs[id.0].range();
        &mut self.data[range]
    }

    /// Total number of scalar parameters.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn flat(&self) -> &[T] {
        &self.data
    }

    pub fn flat_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Converts every value to another precision.
    pub fn cast<U: Real>(&self) -> ParamStore<U> {
        ParamStore {
            specs: self.specs.clone(),
            data: self.data.iter().map(|&x| U::from_f64(x.as_f64())).collect(),
        }
    }
}
