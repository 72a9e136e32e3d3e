//! Dense layers with explicit forward/backward passes.
//!
//! The three network families in this crate are small fixed stacks, so
//! gradients are hand-derived per layer instead of going through a tape.

use rand::Rng;

use crate::error::{Error, Result};
use crate::numeric::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Activation {
    Relu,
    Sigmoid,
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            // Clamped so outputs stay strictly inside (0, 1) even when
            // the pre-activation saturates in f64; log(1 - y) and log(y)
            // then stay finite.
            Activation::Sigmoid => (1.0 / (1.0 + (-x).exp())).clamp(1e-12, 1.0 - 1e-12),
            Activation::Linear => x,
        }
    }

    /// Derivative expressed through the activation *output*.
    #[inline]
    pub fn grad_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Linear => 1.0,
        }
    }
}

/// Xavier/Glorot uniform initialization: U(-l, l) with l = sqrt(6/(fan_in+fan_out)).
pub fn xavier_init<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Result<Matrix> {
    if fan_in == 0 || fan_out == 0 {
        return Err(Error::param(format!(
            "xavier_init requires positive fans, got ({fan_in}, {fan_out})"
        )));
    }
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let mut m = Matrix::zeros(fan_in, fan_out);
    for v in m.data_mut() {
        *v = rng.gen_range(-limit..limit);
    }
    Ok(m)
}

/// Gradients of one dense layer's parameters.
#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub d_weights: Matrix,
    pub d_bias: Vec<f64>,
}

/// `y = activation(x W + b)` with `W` of shape (in_dim, out_dim).
#[derive(Debug, Clone)]
pub struct Dense {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn xavier<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Dense {
            weights: xavier_init(in_dim, out_dim, rng)?,
            bias: vec![0.0; out_dim],
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.cols()
    }

    /// Batch forward pass; `input` is (batch, in_dim).
    pub fn forward(&self, input: &Matrix) -> Result<Matrix> {
        if input.cols() != self.weights.rows() {
            return Err(Error::Dim {
                op: "dense_forward",
                lhs: input.shape(),
                rhs: self.weights.shape(),
            });
        }
        let mut out = input.matmul(&self.weights)?;
        for r in 0..out.rows() {
            for (v, &b) in out.row_mut(r).iter_mut().zip(&self.bias) {
                *v = self.activation.apply(*v + b);
            }
        }
        Ok(out)
    }

    /// Exact gradients of the forward map.
    ///
    /// `output` must be the value `forward` produced for this `input`;
    /// the activation derivative is recovered from it. Returns the
    /// parameter gradients and the gradient w.r.t. the input.
    pub fn backward(
        &self,
        input: &Matrix,
        output: &Matrix,
        upstream: &Matrix,
    ) -> Result<(LayerGrads, Matrix)> {
        if upstream.shape() != output.shape() {
            return Err(Error::Dim {
                op: "dense_backward",
                lhs: upstream.shape(),
                rhs: output.shape(),
            });
        }
        if input.cols() != self.weights.rows() || input.rows() != output.rows() {
            return Err(Error::Dim {
                op: "dense_backward",
                lhs: input.shape(),
                rhs: self.weights.shape(),
            });
        }
        // dZ = upstream ⊙ act'(output)
        let mut dz = upstream.clone();
        for r in 0..dz.rows() {
            for (g, &y) in dz.row_mut(r).iter_mut().zip(output.row(r)) {
                *g *= self.activation.grad_from_output(y);
            }
        }
        let d_weights = input.transpose().matmul(&dz)?;
        let d_bias = dz.col_sums();
        let d_input = dz.matmul(&self.weights.transpose())?;
        Ok((
            LayerGrads { d_weights, d_bias },
            d_input,
        ))
    }
}

/// A plain feed-forward stack of dense layers.
#[derive(Debug, Clone)]
pub struct DenseStack {
    pub layers: Vec<Dense>,
}

impl DenseStack {
    /// Builds a stack from `(in, out, activation)` triples with Xavier weights.
    pub fn xavier<R: Rng + ?Sized>(
        dims: &[(usize, usize, Activation)],
        rng: &mut R,
    ) -> Result<Self> {
        let mut layers = Vec::with_capacity(dims.len());
        for &(i, o, act) in dims {
            layers.push(Dense::xavier(i, o, act, rng)?);
        }
        Ok(DenseStack { layers })
    }

    pub fn forward(&self, input: &Matrix) -> Result<Matrix> {
        let mut x = input.clone();
        for layer in &self.layers {
            x = layer.forward(&x)?;
        }
        Ok(x)
    }

    /// Forward pass keeping each layer's output for the backward pass.
    pub fn forward_cached(&self, input: &Matrix) -> Result<Vec<Matrix>> {
        let mut acts = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for layer in &self.layers {
            x = layer.forward(&x)?;
            acts.push(x.clone());
        }
        Ok(acts)
    }

    /// Backward pass through the whole stack.
    ///
    /// `acts` is the cache from `forward_cached` on the same `input`.
    pub fn backward(
        &self,
        input: &Matrix,
        acts: &[Matrix],
        upstream: &Matrix,
    ) -> Result<(Vec<LayerGrads>, Matrix)> {
        assert_eq!(acts.len(), self.layers.len());
        let mut grads = vec![None; self.layers.len()];
        let mut up = upstream.clone();
        for idx in (0..self.layers.len()).rev() {
            let layer_input = if idx == 0 { input } else { &acts[idx - 1] };
            let (g, d_in) = self.layers[idx].backward(layer_input, &acts[idx], &up)?;
            grads[idx] = Some(g);
            up = d_in;
        }
        Ok((grads.into_iter().map(|g| g.unwrap()).collect(), up))
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim())
    }
}
