//! Adam optimizer with bias correction.

use crate::error::{Error, Result};
use crate::numeric::dense::{DenseStack, LayerGrads};

/// Optimizer state for one flat parameter block.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    /// Fresh state with the usual 0.9 / 0.999 / 1e-8 defaults.
    pub fn new(len: usize, lr: f64) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn moments(&self) -> (&[f64], &[f64]) {
        (&self.m, &self.v)
    }

    pub fn restore(&mut self, m: Vec<f64>, v: Vec<f64>, t: u64) -> Result<()> {
        if m.len() != self.m.len() || v.len() != self.v.len() {
            return Err(Error::param("adam moment length mismatch on restore"));
        }
        self.m = m;
        self.v = v;
        self.t = t;
        Ok(())
    }

    /// One bias-corrected Adam update applied in place.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Dim {
                op: "adam_step",
                lhs: (params.len(), 1),
                rhs: (self.m.len(), 1),
            });
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

/// Adam states covering every weight matrix and bias vector of a stack.
#[derive(Debug, Clone)]
pub struct StackAdam {
    pub weights: Vec<AdamState>,
    pub biases: Vec<AdamState>,
}

impl StackAdam {
    pub fn for_stack(stack: &DenseStack, lr: f64) -> Self {
        StackAdam {
            weights: stack
                .layers
                .iter()
                .map(|l| AdamState::new(l.weights.data().len(), lr))
                .collect(),
            biases: stack
                .layers
                .iter()
                .map(|l| AdamState::new(l.bias.len(), lr))
                .collect(),
        }
    }

    pub fn step(&mut self, stack: &mut DenseStack, grads: &[LayerGrads]) -> Result<()> {
        assert_eq!(grads.len(), stack.layers.len());
        for (i, g) in grads.iter().enumerate() {
            self.weights[i].step(stack.layers[i].weights.data_mut(), g.d_weights.data())?;
            self.biases[i].step(&mut stack.layers[i].bias, &g.d_bias)?;
        }
        Ok(())
    }
}
