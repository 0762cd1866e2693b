//! Trainable look-up table for discrete indices.

use super::init::Initializer;
use super::tensor::Parameter;
use super::NnError;

/// `num_entries x dim` table; lookups return a row, gradients scatter-add into it.
#[derive(Debug, Clone)]
pub struct Embedding {
    pub table: Parameter,
}

impl Embedding {
    pub fn new(num_entries: usize, dim: usize, init: &mut Initializer) -> Self {
        Self {
            table: init.matrix(num_entries, dim, dim),
        }
    }

    pub fn num_entries(&self) -> usize {
        self.table.value.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.table.value.shape()[1]
    }

    pub fn lookup(&self, index: usize) -> Result<&[f64], NnError> {
        if index >= self.num_entries() {
            return Err(NnError::IndexOutOfRange {
                context: "Embedding::lookup",
                index,
                len: self.num_entries(),
            });
        }
        Ok(self.table.value.row(index))
    }

    /// Gradient flows only into the looked-up row.
    pub fn backward(&mut self, index: usize, upstream: &[f64]) {
        debug_assert!(index < self.num_entries());
        debug_assert_eq!(upstream.len(), self.dim());
        let row = self.table.grad.row_mut(index);
        for (g, u) in row.iter_mut().zip(upstream) {
            *g += u;
        }
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.table]
    }
}

#[cfg(test)]
mod tests {
    use super::super::tensor::{Parameter, Tensor};
    use super::*;

    fn table_3x2() -> Embedding {
        Embedding {
            table: Parameter::new(
                Tensor::from_values(&[3, 2], vec![1., 2., 3., 4., 5., 6.]).unwrap(),
            ),
        }
    }

    #[test]
    fn lookup_returns_exact_row() {
        let e = table_3x2();
        assert_eq!(e.lookup(0).unwrap(), &[1., 2.]);
        assert_eq!(e.lookup(2).unwrap(), &[5., 6.]);
    }

    #[test]
    fn lookup_out_of_range_errors() {
        let e = table_3x2();
        assert!(matches!(
            e.lookup(3),
            Err(NnError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn backward_touches_only_looked_up_row() {
        let mut e = table_3x2();
        e.backward(1, &[10.0, 20.0]);
        assert_eq!(e.table.grad.row(0), &[0.0, 0.0]);
        assert_eq!(e.table.grad.row(1), &[10.0, 20.0]);
        assert_eq!(e.table.grad.row(2), &[0.0, 0.0]);
    }

    #[test]
    fn repeated_lookup_gradients_sum() {
        let mut e = table_3x2();
        e.backward(1, &[1.0, 2.0]);
        e.backward(1, &[0.5, -1.0]);
        assert_eq!(e.table.grad.row(1), &[1.5, 1.0]);
    }
}
