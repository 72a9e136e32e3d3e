//! Mini-batch discrimination layer.
//!
//! Projects each sample's hidden activations through a learned tensor into
//! `b_dims` kernels of dimension `c_dims`, then emits per-sample features
//! measuring L1 closeness to every other sample in the batch:
//!
//!   `o(x_i)_b = Σ_{j≠i} exp(-||M_{i,b} - M_{j,b}||_1)`
//!
//! Appending these to the discriminator's hidden features lets it compare
//! samples across the batch, penalizing collapsed generators.

use rand::Rng;

use crate::error::{Error, Result};
use crate::numeric::{xavier_init, Matrix};

#[derive(Debug, Clone)]
pub struct MinibatchDiscrim {
    /// Projection tensor flattened to (in_dim, b_dims * c_dims).
    pub tensor: Matrix,
    pub b_dims: usize,
    pub c_dims: usize,
}

impl MinibatchDiscrim {
    pub fn xavier<R: Rng + ?Sized>(
        in_dim: usize,
        b_dims: usize,
        c_dims: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(MinibatchDiscrim {
            tensor: xavier_init(in_dim, b_dims * c_dims, rng)?,
            b_dims,
            c_dims,
        })
    }

    /// Returns the cross-sample features (batch, b_dims) and the inner
    /// projection `M = activations · T` needed by the backward pass.
    pub fn forward(&self, activations: &Matrix) -> Result<(Matrix, Matrix)> {
        let m = activations.matmul(&self.tensor)?;
        let b = m.rows();
        let mut feats = Matrix::zeros(b, self.b_dims);
        for i in 0..b {
            for j in 0..b {
                if i == j {
                    continue;
                }
                for bb in 0..self.b_dims {
                    let r = self.l1_dist(&m, i, j, bb);
                    let v = feats.get(i, bb) + (-r).exp();
                    feats.set(i, bb, v);
                }
            }
        }
        Ok((feats, m))
    }

    #[inline]
    fn l1_dist(&self, m: &Matrix, i: usize, j: usize, bb: usize) -> f64 {
        let base = bb * self.c_dims;
        let ri = &m.row(i)[base..base + self.c_dims];
        let rj = &m.row(j)[base..base + self.c_dims];
        ri.iter().zip(rj).map(|(&a, &b)| (a - b).abs()).sum()
    }

    /// Gradients w.r.t. the projection tensor and the input activations.
    ///
    /// `m` is the inner projection returned by `forward`; `upstream` has
    /// shape (batch, b_dims).
    pub fn backward(
        &self,
        activations: &Matrix,
        m: &Matrix,
        upstream: &Matrix,
    ) -> Result<(Matrix, Matrix)> {
        let b = m.rows();
        if upstream.shape() != (b, self.b_dims) {
            return Err(Error::Dim {
                op: "minibatch_backward",
                lhs: upstream.shape(),
                rhs: (b, self.b_dims),
            });
        }
        let mut d_m = Matrix::zeros(b, self.b_dims * self.c_dims);
        // Each unordered pair contributes to both rows; exp(-r) and the
        // per-coordinate signs are shared.
        for i in 0..b {
            for j in (i + 1)..b {
                for bb in 0..self.b_dims {
                    let r = self.l1_dist(m, i, j, bb);
                    let e = (-r).exp();
                    let coeff = upstream.get(i, bb) + upstream.get(j, bb);
                    if coeff == 0.0 {
                        continue;
                    }
                    let base = bb * self.c_dims;
                    for c in 0..self.c_dims {
                        let diff = m.get(i, base + c) - m.get(j, base + c);
                        let sign = if diff > 0.0 {
                            1.0
                        } else if diff < 0.0 {
                            -1.0
                        } else {
                            0.0
                        };
                        let g = coeff * e * sign;
                        let di = d_m.get(i, base + c) - g;
                        d_m.set(i, base + c, di);
                        let dj = d_m.get(j, base + c) + g;
                        d_m.set(j, base + c, dj);
                    }
                }
            }
        }
        let d_tensor = activations.transpose().matmul(&d_m)?;
        let d_activations = d_m.matmul(&self.tensor.transpose())?;
        Ok((d_tensor, d_activations))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{assert_grads_close, central_diff};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn batch_of_one_has_zero_features() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mbd = MinibatchDiscrim::xavier(4, 3, 2, &mut rng).unwrap();
        let x = xavier_init(1, 4, &mut rng).unwrap();
        let (feats, _) = mbd.forward(&x).unwrap();
        assert!(feats.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identical_rows_give_unit_features() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mbd = MinibatchDiscrim::xavier(4, 3, 2, &mut rng).unwrap();
        let row: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = Matrix::from_rows(&[row.clone(), row]).unwrap();
        let (feats, _) = mbd.forward(&x).unwrap();
        // Each row's only neighbor is identical: exp(0) = 1 per kernel.
        for &v in feats.data() {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn permutation_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mbd = MinibatchDiscrim::xavier(5, 2, 3, &mut rng).unwrap();
        let x = xavier_init(4, 5, &mut rng).unwrap();
        let (feats, _) = mbd.forward(&x).unwrap();
        let perm = [2usize, 0, 3, 1];
        let xp = x.gather_rows(&perm);
        let (feats_p, _) = mbd.forward(&xp).unwrap();
        // Equivariant up to summation order.
        for (dst, &src) in perm.iter().enumerate() {
            for (a, b) in feats_p.row(dst).iter().zip(feats.row(src)) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mbd = MinibatchDiscrim::xavier(4, 3, 2, &mut rng).unwrap();
        let x = xavier_init(5, 4, &mut rng).unwrap();
        let (feats, m) = mbd.forward(&x).unwrap();
        // Loss: weighted sum of features with fixed pseudo-random weights.
        let w: Vec<f64> = (0..feats.data().len())
            .map(|i| ((i * 7 + 3) % 11) as f64 / 11.0 - 0.4)
            .collect();
        let upstream = Matrix::from_vec(5, 3, w.clone()).unwrap();
        let (d_t, d_x) = mbd.backward(&x, &m, &upstream).unwrap();

        let loss_of = |x_data: &[f64], t_data: &[f64]| {
            let xm = Matrix::from_vec(5, 4, x_data.to_vec()).unwrap();
            let mut mb = mbd.clone();
            mb.tensor.data_mut().copy_from_slice(t_data);
            let (f, _) = mb.forward(&xm).unwrap();
            f.data().iter().zip(&w).map(|(&a, &b)| a * b).sum::<f64>()
        };

        let num_x = central_diff(&|xd: &[f64]| loss_of(xd, mbd.tensor.data()), x.data(), 1e-6);
        assert_grads_close(d_x.data(), &num_x, 1e-5, "mbd d_x");

        let num_t = central_diff(&|td: &[f64]| loss_of(x.data(), td), mbd.tensor.data(), 1e-6);
        assert_grads_close(d_t.data(), &num_t, 1e-5, "mbd d_tensor");
    }
}
