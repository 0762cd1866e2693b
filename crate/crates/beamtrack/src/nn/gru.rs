//! Gated recurrent unit cell with exact backpropagation.
//!
//! Gate convention:
//!
//! ```text
//! z = sigmoid(Wz x + Uz h + bz)          update gate (z -> 0 carries h)
//! r = sigmoid(Wr x + Ur h + br)          reset gate
//! c = tanh(Wc x + Uc (r . h) + bc)       candidate state
//! h' = (1 - z) . h + z . c
//! ```

use super::init::Initializer;
use super::linear::dot;
use super::tensor::Parameter;
use super::NnError;

#[derive(Debug, Clone)]
pub struct GruCell {
    pub input_update: Parameter,
    pub recurrent_update: Parameter,
    pub bias_update: Parameter,
    pub input_reset: Parameter,
    pub recurrent_reset: Parameter,
    pub bias_reset: Parameter,
    pub input_candidate: Parameter,
    pub recurrent_candidate: Parameter,
    pub bias_candidate: Parameter,
}

/// Intermediate values of one forward step, required by `backward`.
#[derive(Debug, Clone)]
pub struct GruStepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    c: Vec<f64>,
    reset_hidden: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl GruCell {
    pub fn new(input_dim: usize, hidden_dim: usize, init: &mut Initializer) -> Self {
        let w = |init: &mut Initializer| init.matrix(hidden_dim, input_dim, input_dim);
        let u = |init: &mut Initializer| init.matrix(hidden_dim, hidden_dim, hidden_dim);
        Self {
            input_update: w(init),
            recurrent_update: u(init),
            bias_update: init.zero_vector(hidden_dim),
            input_reset: w(init),
            recurrent_reset: u(init),
            bias_reset: init.zero_vector(hidden_dim),
            input_candidate: w(init),
            recurrent_candidate: u(init),
            bias_candidate: init.zero_vector(hidden_dim),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_update.value.shape()[1]
    }

    pub fn hidden_dim(&self) -> usize {
        self.input_update.value.shape()[0]
    }

    /// One recurrence step; returns the new hidden state and the cache for backward.
    pub fn forward(&self, x: &[f64], h_prev: &[f64]) -> Result<(Vec<f64>, GruStepCache), NnError> {
        let (nin, nh) = (self.input_dim(), self.hidden_dim());
        if x.len() != nin || h_prev.len() != nh {
            return Err(NnError::ShapeMismatch {
                context: "GruCell::forward",
                expected: vec![nin, nh],
                found: vec![x.len(), h_prev.len()],
            });
        }

        let gate = |wi: &Parameter, wr: &Parameter, b: &Parameter, hid: &[f64]| -> Vec<f64> {
            (0..nh)
                .map(|o| {
                    b.value.values()[o] + dot(wi.value.row(o), x) + dot(wr.value.row(o), hid)
                })
                .collect()
        };

        let z: Vec<f64> = gate(&self.input_update, &self.recurrent_update, &self.bias_update, h_prev)
            .into_iter()
            .map(sigmoid)
            .collect();
        let r: Vec<f64> = gate(&self.input_reset, &self.recurrent_reset, &self.bias_reset, h_prev)
            .into_iter()
            .map(sigmoid)
            .collect();
        let reset_hidden: Vec<f64> = r.iter().zip(h_prev).map(|(ri, hi)| ri * hi).collect();
        let c: Vec<f64> = gate(
            &self.input_candidate,
            &self.recurrent_candidate,
            &self.bias_candidate,
            &reset_hidden,
        )
        .into_iter()
        .map(f64::tanh)
        .collect();

        let h_new: Vec<f64> = (0..nh)
            .map(|o| (1.0 - z[o]) * h_prev[o] + z[o] * c[o])
            .collect();

        let cache = GruStepCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            z,
            r,
            c,
            reset_hidden,
        };
        Ok((h_new, cache))
    }

    /// Backward through one step. Accumulates parameter gradients and adds the
    /// input/previous-hidden gradients into `dx` and `dh_prev`.
    pub fn backward(&mut self, cache: &GruStepCache, dh_new: &[f64], dx: &mut [f64], dh_prev: &mut [f64]) {
        let nh = self.hidden_dim();
        debug_assert_eq!(dh_new.len(), nh);

        let GruStepCache {
            x,
            h_prev,
            z,
            r,
            c,
            reset_hidden,
        } = cache;

        // h' = (1-z).h + z.c
        let dz: Vec<f64> = (0..nh).map(|o| dh_new[o] * (c[o] - h_prev[o])).collect();
        let dc: Vec<f64> = (0..nh).map(|o| dh_new[o] * z[o]).collect();
        for o in 0..nh {
            dh_prev[o] += dh_new[o] * (1.0 - z[o]);
        }

        // Candidate branch: c = tanh(ac), ac = Wc x + Uc (r.h) + bc
        let dac: Vec<f64> = (0..nh).map(|o| dc[o] * (1.0 - c[o] * c[o])).collect();
        let mut d_reset_hidden = vec![0.0; nh];
        accumulate_gate(
            &mut self.input_candidate,
            &mut self.recurrent_candidate,
            &mut self.bias_candidate,
            &dac,
            x,
            reset_hidden,
            dx,
            &mut d_reset_hidden,
        );
        let mut dr = vec![0.0; nh];
        for o in 0..nh {
            dr[o] += d_reset_hidden[o] * h_prev[o];
            dh_prev[o] += d_reset_hidden[o] * r[o];
        }

        // Reset branch: r = sigmoid(ar)
        let dar: Vec<f64> = (0..nh).map(|o| dr[o] * r[o] * (1.0 - r[o])).collect();
        accumulate_gate(
            &mut self.input_reset,
            &mut self.recurrent_reset,
            &mut self.bias_reset,
            &dar,
            x,
            h_prev,
            dx,
            dh_prev,
        );

        // Update branch: z = sigmoid(az)
        let daz: Vec<f64> = (0..nh).map(|o| dz[o] * z[o] * (1.0 - z[o])).collect();
        accumulate_gate(
            &mut self.input_update,
            &mut self.recurrent_update,
            &mut self.bias_update,
            &daz,
            x,
            h_prev,
            dx,
            dh_prev,
        );
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        vec![
            &mut self.input_update,
            &mut self.recurrent_update,
            &mut self.bias_update,
            &mut self.input_reset,
            &mut self.recurrent_reset,
            &mut self.bias_reset,
            &mut self.input_candidate,
            &mut self.recurrent_candidate,
            &mut self.bias_candidate,
        ]
    }
}

/// Shared gradient pattern of one pre-activation `a = W x + U hid + b`.
#[allow(clippy::too_many_arguments)]
fn accumulate_gate(
    wi: &mut Parameter,
    wr: &mut Parameter,
    b: &mut Parameter,
    da: &[f64],
    x: &[f64],
    hid: &[f64],
    dx: &mut [f64],
    dhid: &mut [f64],
) {
    for (o, &g) in da.iter().enumerate() {
        b.grad.values_mut()[o] += g;
        let wrow = wi.grad.row_mut(o);
        for (i, &xi) in x.iter().enumerate() {
            wrow[i] += g * xi;
        }
        let urow = wr.grad.row_mut(o);
        for (i, &hi) in hid.iter().enumerate() {
            urow[i] += g * hi;
        }
        let wval = wi.value.row(o);
        for (i, dxi) in dx.iter_mut().enumerate() {
            *dxi += wval[i] * g;
        }
        let uval = wr.value.row(o);
        for (i, dhi) in dhid.iter_mut().enumerate() {
            *dhi += uval[i] * g;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_cell(input_dim: usize, hidden_dim: usize) -> GruCell {
        let mut init = Initializer::new(0);
        let mut cell = GruCell::new(input_dim, hidden_dim, &mut init);
        for p in cell.parameters_mut() {
            p.value.fill(0.0);
        }
        cell
    }

    #[test]
    fn zero_weights_zero_hidden_stay_zero() {
        let cell = zero_cell(3, 4);
        let (h, _) = cell.forward(&[1.0, -2.0, 0.5], &[0.0; 4]).unwrap();
        assert_eq!(h, vec![0.0; 4]);
    }

    #[test]
    fn saturated_update_gate_carries_hidden_state() {
        // Large negative update bias drives z -> 0, so h' ~ h.
        let mut cell = zero_cell(2, 3);
        cell.bias_update.value.fill(-40.0);
        let h_prev = [0.3, -0.7, 0.9];
        let (h, _) = cell.forward(&[5.0, -5.0], &h_prev).unwrap();
        for (a, b) in h.iter().zip(&h_prev) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn hidden_state_stays_in_open_unit_interval() {
        let mut init = Initializer::new(99);
        let cell = GruCell::new(3, 5, &mut init);
        let mut h = vec![0.0; 5];
        for step in 0..200 {
            let x = [(step as f64).sin() * 3.0, 1.0, -2.0];
            let (h_new, _) = cell.forward(&x, &h).unwrap();
            h = h_new;
            assert!(h.iter().all(|v| v.abs() < 1.0), "step {step}: {h:?}");
        }
    }

    #[test]
    fn forward_rejects_shape_mismatch() {
        let cell = zero_cell(3, 4);
        assert!(cell.forward(&[1.0, 2.0], &[0.0; 4]).is_err());
        assert!(cell.forward(&[1.0, 2.0, 3.0], &[0.0; 3]).is_err());
    }
}
