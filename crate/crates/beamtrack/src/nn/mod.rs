//! Minimal trainable building blocks: tensors, a linear layer, an embedding
//! table, a GRU cell, softmax/cross-entropy, an Adam optimizer, a
//! finite-difference gradient oracle, and binary checkpoints.
//!
//! Everything is plain `f64` on the CPU, deterministic given seeds, and small
//! enough to audit gradient by gradient.

mod adam;
mod checkpoint;
mod embedding;
mod gradcheck;
mod gru;
mod init;
mod linear;
mod loss;
mod tensor;

pub use adam::{Adam, OptimizerConfig};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointError};
pub use embedding::Embedding;
pub use gradcheck::finite_difference_check;
pub use gru::{GruCell, GruStepCache};
pub use init::Initializer;
pub use linear::Linear;
pub use loss::{
    cross_entropy, cross_entropy_backward, softmax, softmax_cross_entropy_grad, LOG_EPSILON,
};
pub use tensor::{Parameter, Tensor};

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("{context}: shape mismatch (expected {expected:?}, found {found:?})")]
    ShapeMismatch {
        context: &'static str,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("{context}: index {index} out of range for length {len}")]
    IndexOutOfRange {
        context: &'static str,
        index: usize,
        len: usize,
    },
    #[error("{context}: empty input")]
    EmptyInput { context: &'static str },
    #[error("{context}: non-finite value")]
    NonFinite { context: &'static str },
    #[error("{context}: invalid configuration")]
    InvalidConfig { context: &'static str },
}

#[cfg(test)]
mod grad_tests {
    //! Finite-difference checks of every layer's backward pass.

    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    struct LinearCase {
        layer: Linear,
        x: Vec<f64>,
        dy: Vec<f64>,
    }

    impl LinearCase {
        fn loss(&self) -> f64 {
            // L = dy . y picks out arbitrary directions in output space.
            let y = self.layer.forward(&self.x).unwrap();
            y.iter().zip(&self.dy).map(|(a, b)| a * b).sum()
        }
    }

    #[test]
    fn linear_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut init = Initializer::new(5);
        let layer = Linear::new(3, 5, &mut init);
        let x = random_vec(&mut rng, 3);
        let dy = random_vec(&mut rng, 5);
        let mut case = LinearCase { layer, x, dy };

        let mut dx = vec![0.0; 3];
        let x = case.x.clone();
        let dy = case.dy.clone();
        case.layer.backward(&x, &dy, &mut dx);

        let err = finite_difference_check(
            &mut case,
            |c| c.layer.parameters_mut(),
            |c| c.loss(),
            1e-5,
        );
        assert!(err < 1e-5, "relative error {err}");
    }

    struct EmbeddingCase {
        table: Embedding,
        indices: Vec<usize>,
        dy: Vec<Vec<f64>>,
    }

    impl EmbeddingCase {
        fn loss(&self) -> f64 {
            self.indices
                .iter()
                .zip(&self.dy)
                .map(|(&i, dy)| {
                    let row = self.table.lookup(i).unwrap();
                    row.iter().zip(dy).map(|(a, b)| a * b).sum::<f64>()
                })
                .sum()
        }
    }

    #[test]
    fn embedding_backward_matches_finite_differences_with_repeats() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut init = Initializer::new(6);
        let table = Embedding::new(6, 4, &mut init);
        // Index 2 appears twice: its row gradient must be the sum of both upstreams.
        let indices = vec![2, 5, 2];
        let dy: Vec<Vec<f64>> = (0..3).map(|_| random_vec(&mut rng, 4)).collect();
        let mut case = EmbeddingCase { table, indices, dy };

        for (i, dy) in case.indices.clone().into_iter().zip(case.dy.clone()) {
            case.table.backward(i, &dy);
        }

        let err = finite_difference_check(
            &mut case,
            |c| c.table.parameters_mut(),
            |c| c.loss(),
            1e-5,
        );
        assert!(err < 1e-6, "relative error {err}");
    }

    struct GruCase {
        cell: GruCell,
        x: Vec<f64>,
        h_prev: Vec<f64>,
        dy: Vec<f64>,
    }

    impl GruCase {
        fn loss(&self) -> f64 {
            let (h, _) = self.cell.forward(&self.x, &self.h_prev).unwrap();
            h.iter().zip(&self.dy).map(|(a, b)| a * b).sum()
        }
    }

    #[test]
    fn gru_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut init = Initializer::new(7);
        let cell = GruCell::new(4, 8, &mut init);
        let x = random_vec(&mut rng, 4);
        let h_prev = random_vec(&mut rng, 8);
        let dy = random_vec(&mut rng, 8);
        let mut case = GruCase { cell, x, h_prev, dy };

        let (_, cache) = case.cell.forward(&case.x, &case.h_prev).unwrap();
        let mut dx = vec![0.0; 4];
        let mut dh = vec![0.0; 8];
        let dy = case.dy.clone();
        case.cell.backward(&cache, &dy, &mut dx, &mut dh);

        let err = finite_difference_check(
            &mut case,
            |c| c.cell.parameters_mut(),
            |c| c.loss(),
            1e-5,
        );
        assert!(err < 1e-4, "relative error {err}");
    }

    #[test]
    fn gru_input_and_hidden_gradients_match_finite_differences() {
        // Checks dx and dh_prev, not just the parameter gradients.
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let mut init = Initializer::new(8);
        let cell = GruCell::new(3, 6, &mut init);
        let x = random_vec(&mut rng, 3);
        let h_prev = random_vec(&mut rng, 6);
        let dy = random_vec(&mut rng, 6);

        let (_, cache) = cell.forward(&x, &h_prev).unwrap();
        let mut cell_mut = cell.clone();
        let mut dx = vec![0.0; 3];
        let mut dh = vec![0.0; 6];
        cell_mut.backward(&cache, &dy, &mut dx, &mut dh);

        let eps = 1e-6;
        let loss = |x: &[f64], h: &[f64]| -> f64 {
            let (out, _) = cell.forward(x, h).unwrap();
            out.iter().zip(&dy).map(|(a, b)| a * b).sum()
        };
        for i in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += eps;
            xm[i] -= eps;
            let numeric = (loss(&xp, &h_prev) - loss(&xm, &h_prev)) / (2.0 * eps);
            let denom = numeric.abs().max(dx[i].abs()).max(1e-10);
            assert!((numeric - dx[i]).abs() / denom < 1e-4);
        }
        for i in 0..h_prev.len() {
            let mut hp = h_prev.clone();
            let mut hm = h_prev.clone();
            hp[i] += eps;
            hm[i] -= eps;
            let numeric = (loss(&x, &hp) - loss(&x, &hm)) / (2.0 * eps);
            let denom = numeric.abs().max(dh[i].abs()).max(1e-10);
            assert!((numeric - dh[i]).abs() / denom < 1e-4);
        }
    }

    struct SoftmaxCase {
        logits: Parameter,
        targets: Vec<usize>,
    }

    impl SoftmaxCase {
        fn loss(&self) -> f64 {
            let probs = vec![softmax(self.logits.value.values())];
            cross_entropy(&probs, &self.targets[..1]).unwrap()
        }
    }

    #[test]
    fn fused_softmax_cross_entropy_grad_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let mut logits = Parameter::zeros(&[9]);
        for v in logits.value.values_mut() {
            *v = rng.gen_range(-2.0..2.0);
        }
        let target = 4;
        let probs = softmax(logits.value.values());
        let grad = softmax_cross_entropy_grad(&probs, target, 1);
        logits.grad.values_mut().copy_from_slice(&grad);

        let mut case = SoftmaxCase {
            logits,
            targets: vec![target],
        };
        let err = finite_difference_check(
            &mut case,
            |c| vec![&mut c.logits],
            |c| c.loss(),
            1e-6,
        );
        assert!(err < 1e-6, "relative error {err}");
    }

    struct RawScoreCase {
        scores: Parameter,
        targets: Vec<usize>,
    }

    impl RawScoreCase {
        fn loss(&self) -> f64 {
            let rows: Vec<Vec<f64>> = self
                .scores
                .value
                .values()
                .chunks(4)
                .map(|c| c.to_vec())
                .collect();
            cross_entropy(&rows, &self.targets).unwrap()
        }
    }

    #[test]
    fn cross_entropy_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let mut scores = Parameter::zeros(&[2, 4]);
        for v in scores.value.values_mut() {
            *v = rng.gen_range(0.05..1.0);
        }
        let targets = vec![1, 3];
        let rows: Vec<Vec<f64>> = scores
            .value
            .values()
            .chunks(4)
            .map(|c| c.to_vec())
            .collect();
        let grads = cross_entropy_backward(&rows, &targets);
        let flat: Vec<f64> = grads.into_iter().flatten().collect();
        scores.grad.values_mut().copy_from_slice(&flat);

        let mut case = RawScoreCase { scores, targets };
        let err = finite_difference_check(
            &mut case,
            |c| vec![&mut c.scores],
            |c| c.loss(),
            1e-7,
        );
        assert!(err < 1e-6, "relative error {err}");
    }
}
