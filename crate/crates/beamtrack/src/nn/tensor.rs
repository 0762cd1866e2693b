//! Dense row-major tensors and trainable parameters.

use super::NnError;

/// A dense tensor of `f64` values stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl Tensor {
    /// All-zero tensor of the given shape.
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            values: vec![0.0; len],
        }
    }

    /// Build a tensor from explicit values; the value count must match the shape.
    pub fn from_values(shape: &[usize], values: Vec<f64>) -> Result<Self, NnError> {
        let expected: usize = shape.iter().product();
        if values.len() != expected {
            return Err(NnError::ShapeMismatch {
                context: "Tensor::from_values",
                expected: shape.to_vec(),
                found: vec![values.len()],
            });
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(NnError::NonFinite {
                context: "Tensor::from_values",
            });
        }
        Ok(Self {
            shape: shape.to_vec(),
            values,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Row `r` of a 2-D tensor.
    pub fn row(&self, r: usize) -> &[f64] {
        debug_assert_eq!(self.shape.len(), 2);
        let cols = self.shape[1];
        &self.values[r * cols..(r + 1) * cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        debug_assert_eq!(self.shape.len(), 2);
        let cols = self.shape[1];
        &mut self.values[r * cols..(r + 1) * cols]
    }

    pub fn fill(&mut self, v: f64) {
        self.values.iter_mut().for_each(|x| *x = v);
    }
}

/// A tensor paired with a gradient buffer of the same shape.
#[derive(Debug, Clone)]
pub struct Parameter {
    pub value: Tensor,
    pub grad: Tensor,
}

impl Parameter {
    pub fn new(value: Tensor) -> Self {
        let grad = Tensor::zeros(value.shape());
        Self { value, grad }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::new(Tensor::zeros(shape))
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    /// Scale the accumulated gradient, e.g. to average over a minibatch.
    pub fn scale_grad(&mut self, factor: f64) {
        self.grad.values_mut().iter_mut().for_each(|g| *g *= factor);
    }
}
