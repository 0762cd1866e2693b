//! Fully connected layer with exact analytic gradients.

use super::init::Initializer;
use super::tensor::Parameter;
use super::NnError;

/// `y = W x + b` with `W: out x in`, accumulating gradients on backward.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: Parameter,
    pub bias: Parameter,
}

impl Linear {
    pub fn new(in_dim: usize, out_dim: usize, init: &mut Initializer) -> Self {
        Self {
            weight: init.matrix(out_dim, in_dim, in_dim),
            bias: init.zero_vector(out_dim),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.value.shape()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.value.shape()[0]
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        if x.len() != self.in_dim() {
            return Err(NnError::ShapeMismatch {
                context: "Linear::forward",
                expected: vec![self.in_dim()],
                found: vec![x.len()],
            });
        }
        let mut y = self.bias.value.values().to_vec();
        for (o, yo) in y.iter_mut().enumerate() {
            let row = self.weight.value.row(o);
            *yo += dot(row, x);
        }
        Ok(y)
    }

    /// Accumulate dW and db from upstream `dy`, and add `W^T dy` into `dx`.
    pub fn backward(&mut self, x: &[f64], dy: &[f64], dx: &mut [f64]) {
        debug_assert_eq!(x.len(), self.in_dim());
        debug_assert_eq!(dy.len(), self.out_dim());
        debug_assert_eq!(dx.len(), self.in_dim());
        for (o, &g) in dy.iter().enumerate() {
            self.bias.grad.values_mut()[o] += g;
            let wrow = self.weight.grad.row_mut(o);
            for (i, &xi) in x.iter().enumerate() {
                wrow[i] += g * xi;
            }
            let row = self.weight.value.row(o);
            for (i, dxi) in dx.iter_mut().enumerate() {
                *dxi += row[i] * g;
            }
        }
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.weight, &mut self.bias]
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
