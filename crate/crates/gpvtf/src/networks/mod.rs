//! The six trainable networks (two encoders, two cross-modal generators,
//! two discriminators with mini-batch discrimination) and the adversarial
//! losses that train them.

mod checkpoint;
mod minibatch;

pub use checkpoint::Archive;
pub use minibatch::MinibatchDiscrim;

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{Activation, Dense, DenseStack, LayerGrads, Matrix};

/// Cluster-structured noise: a small Gaussian block cascaded with a
/// uniformly random one-hot block of dimension k.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NoisePrior {
    pub dn: usize,
    pub sigma: f64,
    pub k: usize,
}

impl NoisePrior {
    pub fn dim(&self) -> usize {
        self.dn + self.k
    }

    /// Samples `batch` rows of `(gaussian | one-hot)` noise.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Matrix> {
        if batch == 0 {
            return Err(Error::param("noise batch must be >= 1"));
        }
        if self.sigma <= 0.0 {
            return Err(Error::param(format!("sigma must be > 0, got {}", self.sigma)));
        }
        let normal = Normal::new(0.0, self.sigma).expect("valid normal");
        let mut out = Matrix::zeros(batch, self.dim());
        for r in 0..batch {
            let row = out.row_mut(r);
            for v in row.iter_mut().take(self.dn) {
                *v = normal.sample(rng);
            }
            let hot = rng.gen_range(0..self.k);
            row[self.dn + hot] = 1.0;
        }
        Ok(out)
    }
}

/// Two-layer modality-specific encoder: features -> latent subspace.
#[derive(Debug, Clone)]
pub struct Encoder {
    pub stack: DenseStack,
}

impl Encoder {
    pub fn new<R: Rng + ?Sized>(
        in_dim: usize,
        hidden: usize,
        latent: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Encoder {
            stack: DenseStack::xavier(
                &[
                    (in_dim, hidden, Activation::Relu),
                    (hidden, latent, Activation::Linear),
                ],
                rng,
            )?,
        })
    }

    pub fn encode(&self, x: &Matrix) -> Result<Matrix> {
        self.stack.forward(x)
    }
}

/// Three-layer conditional generator: `(noise | condition latent) -> latent`.
#[derive(Debug, Clone)]
pub struct Generator {
    pub stack: DenseStack,
}

impl Generator {
    pub fn new<R: Rng + ?Sized>(
        noise_dim: usize,
        latent: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Generator {
            stack: DenseStack::xavier(
                &[
                    (noise_dim + latent, hidden, Activation::Relu),
                    (hidden, hidden, Activation::Relu),
                    (hidden, latent, Activation::Linear),
                ],
                rng,
            )?,
        })
    }

    /// Concatenates noise and condition and runs the stack.
    pub fn generate(&self, noise: &Matrix, condition: &Matrix) -> Result<Matrix> {
        self.stack.forward(&noise.hstack(condition)?)
    }
}

/// Samples fake latents for one modality conditioned on the other.
pub fn cross_generate<R: Rng + ?Sized>(
    generator: &Generator,
    condition: &Matrix,
    prior: &NoisePrior,
    rng: &mut R,
) -> Result<Matrix> {
    let noise = prior.sample(condition.rows(), rng)?;
    generator.generate(&noise, condition)
}

/// Discriminator: dense+relu, mini-batch discrimination features, then a
/// sigmoid unit giving one real-vs-fake probability per sample.
#[derive(Debug, Clone)]
pub struct Discriminator {
    pub l1: Dense,
    pub mbd: MinibatchDiscrim,
    pub l2: Dense,
}

/// Intermediate activations of one discriminator pass.
#[derive(Debug, Clone)]
pub struct DiscCache {
    pub hidden: Matrix,
    pub mbd_inner: Matrix,
    pub feats: Matrix,
    pub concat: Matrix,
    pub out: Matrix,
}

impl DiscCache {
    /// Per-sample probabilities, strictly inside (0, 1).
    pub fn probs(&self) -> Vec<f64> {
        self.out.data().to_vec()
    }
}

#[derive(Debug, Clone)]
pub struct DiscGrads {
    pub l1: LayerGrads,
    pub mbd_tensor: Matrix,
    pub l2: LayerGrads,
}

impl DiscGrads {
    pub fn zeros_like(d: &Discriminator) -> Self {
        DiscGrads {
            l1: LayerGrads {
                d_weights: Matrix::zeros(d.l1.weights.rows(), d.l1.weights.cols()),
                d_bias: vec![0.0; d.l1.bias.len()],
            },
            mbd_tensor: Matrix::zeros(d.mbd.tensor.rows(), d.mbd.tensor.cols()),
            l2: LayerGrads {
                d_weights: Matrix::zeros(d.l2.weights.rows(), d.l2.weights.cols()),
                d_bias: vec![0.0; d.l2.bias.len()],
            },
        }
    }

    pub fn accumulate(&mut self, other: &DiscGrads) -> Result<()> {
        self.l1.d_weights.add_scaled(&other.l1.d_weights, 1.0)?;
        for (a, b) in self.l1.d_bias.iter_mut().zip(&other.l1.d_bias) {
            *a += b;
        }
        self.mbd_tensor.add_scaled(&other.mbd_tensor, 1.0)?;
        self.l2.d_weights.add_scaled(&other.l2.d_weights, 1.0)?;
        for (a, b) in self.l2.d_bias.iter_mut().zip(&other.l2.d_bias) {
            *a += b;
        }
        Ok(())
    }
}

impl Discriminator {
    pub fn new<R: Rng + ?Sized>(
        latent: usize,
        hidden: usize,
        mbd_features: usize,
        mbd_kernel: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Discriminator {
            l1: Dense::xavier(latent, hidden, Activation::Relu, rng)?,
            mbd: MinibatchDiscrim::xavier(hidden, mbd_features, mbd_kernel, rng)?,
            l2: Dense::xavier(hidden + mbd_features, 1, Activation::Sigmoid, rng)?,
        })
    }

    pub fn forward(&self, x: &Matrix) -> Result<DiscCache> {
        let hidden = self.l1.forward(x)?;
        let (feats, mbd_inner) = self.mbd.forward(&hidden)?;
        let concat = hidden.hstack(&feats)?;
        let out = self.l2.forward(&concat)?;
        Ok(DiscCache {
            hidden,
            mbd_inner,
            feats,
            concat,
            out,
        })
    }

    /// Backward pass for upstream gradients on the output probabilities.
    /// Returns parameter gradients and the gradient w.r.t. the input batch.
    pub fn backward(
        &self,
        x: &Matrix,
        cache: &DiscCache,
        d_out: &[f64],
    ) -> Result<(DiscGrads, Matrix)> {
        let up = Matrix::from_vec(cache.out.rows(), 1, d_out.to_vec())?;
        let (g2, d_concat) = self.l2.backward(&cache.concat, &cache.out, &up)?;

        let hidden_dim = self.l1.out_dim();
        let b = d_concat.rows();
        let mut d_hidden = Matrix::zeros(b, hidden_dim);
        let mut d_feats = Matrix::zeros(b, self.mbd.b_dims);
        for r in 0..b {
            d_hidden
                .row_mut(r)
                .copy_from_slice(&d_concat.row(r)[..hidden_dim]);
            d_feats
                .row_mut(r)
                .copy_from_slice(&d_concat.row(r)[hidden_dim..]);
        }

        let (d_tensor, d_hidden_mbd) =
            self.mbd
                .backward(&cache.hidden, &cache.mbd_inner, &d_feats)?;
        d_hidden.add_scaled(&d_hidden_mbd, 1.0)?;

        let (g1, d_x) = self.l1.backward(x, &cache.hidden, &d_hidden)?;
        Ok((
            DiscGrads {
                l1: g1,
                mbd_tensor: d_tensor,
                l2: g2,
            },
            d_x,
        ))
    }
}

/// Pieces of the generator objective.
#[derive(Debug, Clone)]
pub struct GeneratorLoss {
    pub total: f64,
    pub adversarial: f64,
    pub similarity: f64,
    /// Gradient w.r.t. the discriminator outputs on the fakes.
    pub d_dout: Vec<f64>,
    /// Gradient of the similarity regularizer w.r.t. the fakes.
    pub d_fake_reg: Matrix,
}

/// Generator loss: adversarial term plus a similarity regularizer pulling
/// fakes toward the real latents of the generated modality.
///
/// The saturating form is `-mean log(1 - D(fake))`; the regularizer is
/// `lambda * mean ||fake - target||^2` over rows where the target modality
/// is actually present.
pub fn generator_loss(
    d_out_fake: &[f64],
    fake: &Matrix,
    real_target: &Matrix,
    target_present: &[bool],
    lambda: f64,
    saturating: bool,
) -> Result<GeneratorLoss> {
    let b = fake.rows();
    if d_out_fake.len() != b || real_target.shape() != fake.shape() || target_present.len() != b {
        return Err(Error::Dim {
            op: "generator_loss",
            lhs: fake.shape(),
            rhs: real_target.shape(),
        });
    }
    let bf = b as f64;
    let mut adversarial = 0.0;
    let mut d_dout = vec![0.0; b];
    for (i, &d) in d_out_fake.iter().enumerate() {
        if saturating {
            // L = -mean log(1 - D); dL/dD = 1 / (b (1 - D)).
            adversarial -= (1.0 - d).ln() / bf;
            d_dout[i] = 1.0 / (bf * (1.0 - d));
        } else {
            // Non-saturating variant: L = -mean log D.
            adversarial -= d.ln() / bf;
            d_dout[i] = -1.0 / (bf * d);
        }
    }

    let present_count = target_present.iter().filter(|&&p| p).count();
    let mut similarity = 0.0;
    let mut d_fake_reg = Matrix::zeros(b, fake.cols());
    if lambda != 0.0 && present_count > 0 {
        let pc = present_count as f64;
        for i in 0..b {
            if !target_present[i] {
                continue;
            }
            for c in 0..fake.cols() {
                let diff = fake.get(i, c) - real_target.get(i, c);
                similarity += diff * diff / pc;
                d_fake_reg.set(i, c, lambda * 2.0 * diff / pc);
            }
        }
    }

    Ok(GeneratorLoss {
        total: adversarial + lambda * similarity,
        adversarial,
        similarity,
        d_dout,
        d_fake_reg,
    })
}

/// Discriminator loss pieces (the negated max objective, minimized).
#[derive(Debug, Clone)]
pub struct DiscriminatorLoss {
    pub total: f64,
    pub d_real: Vec<f64>,
    pub d_fake: Vec<f64>,
}

/// `-[mean log D(real) + mean log(1 - D(fake))]` with its gradients on
/// the two probability vectors. Either side may be empty.
pub fn discriminator_loss(d_out_real: &[f64], d_out_fake: &[f64]) -> DiscriminatorLoss {
    let mut total = 0.0;
    let mut d_real = vec![0.0; d_out_real.len()];
    if !d_out_real.is_empty() {
        let br = d_out_real.len() as f64;
        for (i, &d) in d_out_real.iter().enumerate() {
            total -= d.ln() / br;
            d_real[i] = -1.0 / (br * d);
        }
    }
    let mut d_fake = vec![0.0; d_out_fake.len()];
    if !d_out_fake.is_empty() {
        let bf = d_out_fake.len() as f64;
        for (i, &d) in d_out_fake.iter().enumerate() {
            total -= (1.0 - d).ln() / bf;
            d_fake[i] = 1.0 / (bf * (1.0 - d));
        }
    }
    DiscriminatorLoss {
        total,
        d_real,
        d_fake,
    }
}

/// Layer sizing for the whole model; every field has a paper-scale default.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NetSizes {
    pub latent_dim: usize,
    pub enc_hidden: usize,
    pub gen_hidden: usize,
    pub disc_hidden: usize,
    pub mbd_features: usize,
    pub mbd_kernel: usize,
    pub noise_dim: usize,
}

impl Default for NetSizes {
    fn default() -> Self {
        NetSizes {
            latent_dim: 64,
            enc_hidden: 256,
            gen_hidden: 128,
            disc_hidden: 64,
            mbd_features: 16,
            mbd_kernel: 8,
            noise_dim: 32,
        }
    }
}

/// All trainable parameters of the framework.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub enc1: Encoder,
    pub enc2: Encoder,
    pub gen1: Generator,
    pub gen2: Generator,
    pub disc1: Discriminator,
    pub disc2: Discriminator,
    pub prior: NoisePrior,
}

impl ModelParams {
    /// Xavier-initializes every network. The construction order is fixed
    /// so a seeded RNG reproduces the same model.
    pub fn new<R: Rng + ?Sized>(
        d1: usize,
        d2: usize,
        k: usize,
        sizes: &NetSizes,
        sigma: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let prior = NoisePrior {
            dn: sizes.noise_dim,
            sigma,
            k,
        };
        Ok(ModelParams {
            enc1: Encoder::new(d1, sizes.enc_hidden, sizes.latent_dim, rng)?,
            enc2: Encoder::new(d2, sizes.enc_hidden, sizes.latent_dim, rng)?,
            gen1: Generator::new(prior.dim(), sizes.latent_dim, sizes.gen_hidden, rng)?,
            gen2: Generator::new(prior.dim(), sizes.latent_dim, sizes.gen_hidden, rng)?,
            disc1: Discriminator::new(
                sizes.latent_dim,
                sizes.disc_hidden,
                sizes.mbd_features,
                sizes.mbd_kernel,
                rng,
            )?,
            disc2: Discriminator::new(
                sizes.latent_dim,
                sizes.disc_hidden,
                sizes.mbd_features,
                sizes.mbd_kernel,
                rng,
            )?,
            prior,
        })
    }

    /// Bitwise hash of one parameter block, for isolation checks.
    pub fn fingerprint_block(&self, block: &str) -> u64 {
        fn feed_matrix(hasher: &mut DefaultHasher, m: &Matrix) {
            for &v in m.data() {
                v.to_bits().hash(hasher);
            }
        }
        fn feed_dense(hasher: &mut DefaultHasher, l: &Dense) {
            feed_matrix(hasher, &l.weights);
            for &v in &l.bias {
                v.to_bits().hash(hasher);
            }
        }
        fn feed_stack(hasher: &mut DefaultHasher, s: &DenseStack) {
            for l in &s.layers {
                feed_dense(hasher, l);
            }
        }
        let mut hasher = DefaultHasher::new();
        match block {
            "enc1" => feed_stack(&mut hasher, &self.enc1.stack),
            "enc2" => feed_stack(&mut hasher, &self.enc2.stack),
            "gen1" => feed_stack(&mut hasher, &self.gen1.stack),
            "gen2" => feed_stack(&mut hasher, &self.gen2.stack),
            "disc1" => {
                feed_dense(&mut hasher, &self.disc1.l1);
                feed_matrix(&mut hasher, &self.disc1.mbd.tensor);
                feed_dense(&mut hasher, &self.disc1.l2);
            }
            "disc2" => {
                feed_dense(&mut hasher, &self.disc2.l1);
                feed_matrix(&mut hasher, &self.disc2.mbd.tensor);
                feed_dense(&mut hasher, &self.disc2.l2);
            }
            other => panic!("unknown parameter block {other:?}"),
        }
        hasher.finish()
    }
}
