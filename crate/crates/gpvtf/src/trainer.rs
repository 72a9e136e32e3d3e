//! Training loop: initialization, fused-KL encoder updates, alternating
//! GAN updates at a fixed generator:discriminator ratio, center updates,
//! and final label prediction.

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cluster::{
    argmax_mean_centers, kl_divergence, kl_grad, kmeans_best_of, soft_assign,
    target_distribution, ClusterState,
};
use crate::data::{MissingMask, PairedDataset, Standardizer};
use crate::error::{Error, Result};
use crate::networks::{
    discriminator_loss, generator_loss, Archive, DiscGrads, Discriminator, ModelParams, NetSizes,
};
use crate::numeric::{AdamState, Matrix, StackAdam};

/// Everything that parameterizes one training run. Defaults follow the
/// published configuration: batch 64, encoder lr 1e-4, generator lrs
/// 3e-6/4e-6, discriminator lr 1e-6, five generator updates per
/// discriminator update, alpha 0.2, beta 1, lambda 0.1, phi 0.01/0.01,
/// gamma 1, sigma 0.1.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct TrainConfig {
    pub max_iter: usize,
    pub batch_size: usize,
    pub lr_encoders: f64,
    pub lr_g1: f64,
    pub lr_g2: f64,
    pub lr_d: f64,
    pub g_updates_per_d: usize,
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub phi1: f64,
    pub phi2: f64,
    pub gamma: f64,
    pub sigma: f64,
    pub seed: u64,
    pub disable_gan: bool,
    pub disable_fusion_kl: bool,

    // Architecture knobs.
    pub latent_dim: usize,
    pub enc_hidden: usize,
    pub gen_hidden: usize,
    pub disc_hidden: usize,
    pub mbd_features: usize,
    pub mbd_kernel: usize,
    pub noise_dim: usize,

    /// Gradient-train the modality centers between the per-epoch
    /// re-estimates (the fused centers are always re-estimated only).
    pub center_grad_updates: bool,
    /// Re-estimate all centers from hard assignments at each epoch end
    /// instead of letting the gradient updates carry them. Off by
    /// default: per-epoch re-estimation feeds assignment errors back
    /// into the centers and degrades the clustering over tens of epochs.
    pub center_reestimate: bool,
    /// Use the saturating adversarial generator loss; the non-saturating
    /// variant is available for stability experiments.
    pub saturating_gan: bool,
    /// Condition each generator on its own modality instead of the other
    /// one (kept for comparison; cross-modal is the default).
    pub same_modality_condition: bool,
    /// Stop early when fewer than this fraction of predicted labels
    /// change between consecutive epochs.
    pub early_stop_label_change: f64,
    /// Lloyd iterations for the k-means initializations.
    pub kmeans_iters: usize,
    /// k-means++ restarts at initialization (best inertia wins).
    pub kmeans_restarts: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_iter: 100,
            batch_size: 64,
            lr_encoders: 1e-4,
            lr_g1: 3e-6,
            lr_g2: 4e-6,
            lr_d: 1e-6,
            g_updates_per_d: 5,
            alpha: 0.2,
            beta: 1.0,
            lambda: 0.1,
            phi1: 0.01,
            phi2: 0.01,
            gamma: 1.0,
            sigma: 0.1,
            seed: 0,
            disable_gan: false,
            disable_fusion_kl: false,
            latent_dim: 64,
            enc_hidden: 256,
            gen_hidden: 128,
            disc_hidden: 64,
            mbd_features: 16,
            mbd_kernel: 8,
            noise_dim: 32,
            center_grad_updates: true,
            center_reestimate: false,
            saturating_gan: true,
            same_modality_condition: false,
            early_stop_label_change: 0.001,
            kmeans_iters: 100,
            kmeans_restarts: 8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lr_encoders", self.lr_encoders),
            ("lr_g1", self.lr_g1),
            ("lr_g2", self.lr_g2),
            ("lr_d", self.lr_d),
        ] {
            if !(v > 0.0) {
                return Err(Error::param(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::param("batch_size must be >= 1"));
        }
        if self.g_updates_per_d == 0 {
            return Err(Error::param("g_updates_per_d must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::param(format!("alpha must be in [0,1], got {}", self.alpha)));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::param(format!("gamma must be > 0, got {}", self.gamma)));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::param(format!("sigma must be > 0, got {}", self.sigma)));
        }
        for (name, v) in [("beta", self.beta), ("lambda", self.lambda), ("phi1", self.phi1), ("phi2", self.phi2)] {
            if v < 0.0 || !v.is_finite() {
                return Err(Error::param(format!("{name} must be >= 0, got {v}")));
            }
        }
        if self.latent_dim == 0 || self.enc_hidden == 0 || self.gen_hidden == 0 || self.disc_hidden == 0 {
            return Err(Error::param("layer sizes must be >= 1"));
        }
        Ok(())
    }

    pub fn net_sizes(&self) -> NetSizes {
        NetSizes {
            latent_dim: self.latent_dim,
            enc_hidden: self.enc_hidden,
            gen_hidden: self.gen_hidden,
            disc_hidden: self.disc_hidden,
            mbd_features: self.mbd_features,
            mbd_kernel: self.mbd_kernel,
            noise_dim: self.noise_dim,
        }
    }

}

/// Per-epoch loss trace (per-sample averages for the KL terms, per-step
/// averages for the GAN terms; zero for disabled components).
#[derive(Debug, Clone, Copy, Serialize, Deserialize, Default)]
pub struct EpochLosses {
    pub l_e1: f64,
    pub l_e2: f64,
    pub l_g1: f64,
    pub l_g2: f64,
    pub l_d1: f64,
    pub l_d2: f64,
}

impl EpochLosses {
    pub const NAMES: [&'static str; 6] = ["l_e1", "l_e2", "l_g1", "l_g2", "l_d1", "l_d2"];

    pub fn values(&self) -> [f64; 6] {
        [self.l_e1, self.l_e2, self.l_g1, self.l_g2, self.l_d1, self.l_d2]
    }
}

/// Outcome of a full run.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub losses: Vec<EpochLosses>,
    pub predictions: Vec<usize>,
    pub acc: f64,
    pub nmi: f64,
    pub epochs_run: usize,
    pub wall_clock_s: Vec<f64>,
    pub generator_steps: u64,
    pub discriminator_steps: u64,
    pub config: TrainConfig,
}

// RNG stream ids derived from the run seed; each concern draws from its
// own stream so toggling one component never perturbs another.
const STREAM_INIT: u64 = 1;
const STREAM_KMEANS: u64 = 2;
const STREAM_BATCH: u64 = 3;
const STREAM_NOISE1: u64 = 4;
const STREAM_NOISE2: u64 = 5;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Debug, Clone)]
struct DiscAdam {
    l1_w: AdamState,
    l1_b: AdamState,
    mbd: AdamState,
    l2_w: AdamState,
    l2_b: AdamState,
}

impl DiscAdam {
    fn new(d: &Discriminator, lr: f64) -> Self {
        DiscAdam {
            l1_w: AdamState::new(d.l1.weights.data().len(), lr),
            l1_b: AdamState::new(d.l1.bias.len(), lr),
            mbd: AdamState::new(d.mbd.tensor.data().len(), lr),
            l2_w: AdamState::new(d.l2.weights.data().len(), lr),
            l2_b: AdamState::new(d.l2.bias.len(), lr),
        }
    }

    fn step(&mut self, d: &mut Discriminator, grads: &DiscGrads) -> Result<()> {
        self.l1_w.step(d.l1.weights.data_mut(), grads.l1.d_weights.data())?;
        self.l1_b.step(&mut d.l1.bias, &grads.l1.d_bias)?;
        self.mbd.step(d.mbd.tensor.data_mut(), grads.mbd_tensor.data())?;
        self.l2_w.step(d.l2.weights.data_mut(), grads.l2.d_weights.data())?;
        self.l2_b.step(&mut d.l2.bias, &grads.l2.d_bias)?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Optimizers {
    enc1: StackAdam,
    enc2: StackAdam,
    gen1: StackAdam,
    gen2: StackAdam,
    disc1: DiscAdam,
    disc2: DiscAdam,
    centers1: AdamState,
    centers2: AdamState,
    centers3: AdamState,
}

/// Full training state. Built by [`Trainer::initialize`], advanced one
/// epoch at a time, and checkpointable between epochs.
pub struct Trainer {
    cfg: TrainConfig,
    x1: Matrix,
    x2: Matrix,
    labels: Vec<usize>,
    k: usize,
    mask: MissingMask,

    pub params: ModelParams,
    opt: Optimizers,
    pub centers: ClusterState,

    // Full-data latent snapshots, refreshed at initialization and at each
    // epoch end. Rows of z1/z2 at missing samples hold generated
    // stand-ins (GAN enabled) or are unused (GAN disabled).
    z1: Matrix,
    z2: Matrix,
    fake1: Matrix,
    fake2: Matrix,
    z3: Matrix,

    // Self-training targets, recomputed over the full dataset once per
    // epoch and held fixed across its batches. Rows at samples missing
    // the modality are zero and never read.
    p1: Matrix,
    p2: Matrix,
    p3: Matrix,

    epoch: usize,
    generator_steps: u64,
    discriminator_steps: u64,
    prev_predictions: Vec<usize>,
    loss_history: Vec<EpochLosses>,
    wall_history: Vec<f64>,

    rng_batch: ChaCha8Rng,
    rng_noise1: ChaCha8Rng,
    rng_noise2: ChaCha8Rng,

    dataset_fingerprint: u64,
}

impl Trainer {
    /// Standardizes the features, Xavier-initializes all six networks,
    /// computes initial latents (generated stand-ins for missing rows),
    /// and seeds all three center sets with k-means.
    pub fn initialize(
        dataset: &PairedDataset,
        mask: &MissingMask,
        cfg: TrainConfig,
    ) -> Result<Trainer> {
        cfg.validate()?;
        dataset.validate()?;
        if mask.n() != dataset.n() {
            return Err(Error::Alignment(format!(
                "mask covers {} samples, dataset has {}",
                mask.n(),
                dataset.n()
            )));
        }
        let n = dataset.n();
        let k = dataset.k;
        if n < k {
            return Err(Error::param(format!("need at least k={k} samples, got {n}")));
        }

        let std1 = Standardizer::fit(&dataset.visual, &mask.visual_present)?;
        let std2 = Standardizer::fit(&dataset.tactile, &mask.tactile_present)?;
        let x1 = std1.transform(&dataset.visual);
        let x2 = std2.transform(&dataset.tactile);

        let mut rng_init = stream(cfg.seed, STREAM_INIT);
        let params = ModelParams::new(
            x1.cols(),
            x2.cols(),
            k,
            &cfg.net_sizes(),
            cfg.sigma,
            &mut rng_init,
        )?;

        let fingerprint = dataset_fingerprint(&x1, &x2, &dataset.labels, mask);

        let mut trainer = Trainer {
            opt: Optimizers {
                enc1: StackAdam::for_stack(&params.enc1.stack, cfg.lr_encoders),
                enc2: StackAdam::for_stack(&params.enc2.stack, cfg.lr_encoders),
                gen1: StackAdam::for_stack(&params.gen1.stack, cfg.lr_g1),
                gen2: StackAdam::for_stack(&params.gen2.stack, cfg.lr_g2),
                disc1: DiscAdam::new(&params.disc1, cfg.lr_d),
                disc2: DiscAdam::new(&params.disc2, cfg.lr_d),
                centers1: AdamState::new(k * cfg.latent_dim, cfg.lr_encoders),
                centers2: AdamState::new(k * cfg.latent_dim, cfg.lr_encoders),
                centers3: AdamState::new(k * cfg.latent_dim, cfg.lr_encoders),
            },
            centers: ClusterState {
                centers: [
                    Matrix::zeros(k, cfg.latent_dim),
                    Matrix::zeros(k, cfg.latent_dim),
                    Matrix::zeros(k, cfg.latent_dim),
                ],
                gamma: cfg.gamma,
            },
            z1: Matrix::zeros(n, cfg.latent_dim),
            z2: Matrix::zeros(n, cfg.latent_dim),
            fake1: Matrix::zeros(n, cfg.latent_dim),
            fake2: Matrix::zeros(n, cfg.latent_dim),
            z3: Matrix::zeros(n, cfg.latent_dim),
            p1: Matrix::zeros(n, k),
            p2: Matrix::zeros(n, k),
            p3: Matrix::zeros(n, k),
            epoch: 0,
            generator_steps: 0,
            discriminator_steps: 0,
            prev_predictions: Vec::new(),
            loss_history: Vec::new(),
            wall_history: Vec::new(),
            rng_batch: stream(cfg.seed, STREAM_BATCH),
            rng_noise1: stream(cfg.seed, STREAM_NOISE1),
            rng_noise2: stream(cfg.seed, STREAM_NOISE2),
            dataset_fingerprint: fingerprint,
            params,
            labels: dataset.labels.clone(),
            k,
            mask: mask.clone(),
            x1,
            x2,
            cfg,
        };

        // Initial fusion uses the plain convex combination (no phi terms).
        trainer.refresh_latents(false)?;

        let mut rng_kmeans = stream(trainer.cfg.seed, STREAM_KMEANS);
        for m in 0..3 {
            let pts = trainer.center_points(m);
            if pts.rows() < k {
                return Err(Error::param(format!(
                    "modality {m} has {} usable latents, fewer than k={k}",
                    pts.rows()
                )));
            }
            let (centers, _) = kmeans_best_of(
                &pts,
                k,
                trainer.cfg.kmeans_iters,
                trainer.cfg.kmeans_restarts,
                &mut rng_kmeans,
            )?;
            trainer.centers.centers[m] = centers;
        }

        trainer.refresh_targets()?;
        trainer.prev_predictions = trainer.predict();
        Ok(trainer)
    }

    /// Recomputes the full-data self-training targets (one per modality
    /// plus the fused space) from the current latents and centers. These
    /// stay fixed for all batches of the following epoch.
    fn refresh_targets(&mut self) -> Result<()> {
        if self.cfg.disable_fusion_kl {
            return Ok(());
        }
        let gamma = self.cfg.gamma;
        for (m, present) in [
            (0usize, Some(&self.mask.visual_present)),
            (1, Some(&self.mask.tactile_present)),
            (2, None),
        ] {
            let (z, rows): (&Matrix, Option<Vec<usize>>) = match present {
                Some(flags) => {
                    let idx = present_indices(flags);
                    (if m == 0 { &self.z1 } else { &self.z2 }, Some(idx))
                }
                None => (&self.z3, None),
            };
            let pts = match &rows {
                Some(idx) => z.gather_rows(idx),
                None => z.clone(),
            };
            let q = soft_assign(&pts, &self.centers.centers[m], gamma)?;
            let p = target_distribution(&q)?;
            let full = match &rows {
                Some(idx) => {
                    let mut full = Matrix::zeros(self.mask.n(), self.k);
                    full.scatter_rows(idx, &p);
                    full
                }
                None => p,
            };
            match m {
                0 => self.p1 = full,
                1 => self.p2 = full,
                _ => self.p3 = full,
            }
        }
        Ok(())
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn generator_steps(&self) -> u64 {
        self.generator_steps
    }

    pub fn discriminator_steps(&self) -> u64 {
        self.discriminator_steps
    }

    pub fn latents(&self) -> (&Matrix, &Matrix, &Matrix) {
        (&self.z1, &self.z2, &self.z3)
    }

    pub fn fakes(&self) -> (&Matrix, &Matrix) {
        (&self.fake1, &self.fake2)
    }

    /// Per-row fusion weights for the two real modalities. With the GAN
    /// enabled missing rows carry generated stand-ins, so the convex
    /// weights apply everywhere; with it disabled the weights renormalize
    /// over whichever modalities are present.
    fn fusion_row_weights(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.mask.n();
        let a = self.cfg.alpha;
        let mut w1 = vec![1.0 - a; n];
        let mut w2 = vec![a; n];
        if self.cfg.disable_gan {
            for i in 0..n {
                match (self.mask.visual_present[i], self.mask.tactile_present[i]) {
                    (true, false) => {
                        w1[i] = 1.0;
                        w2[i] = 0.0;
                    }
                    (false, true) => {
                        w1[i] = 0.0;
                        w2[i] = 1.0;
                    }
                    _ => {}
                }
            }
        }
        (w1, w2)
    }

    /// Recomputes full-data latents with the current encoders, regenerates
    /// fakes with fresh noise, and rebuilds the fused representation.
    /// `with_phi` distinguishes the initial fusion (plain combination)
    /// from the per-epoch update that adds the weighted fakes.
    fn refresh_latents(&mut self, with_phi: bool) -> Result<()> {
        let n = self.mask.n();
        let visual_idx = present_indices(&self.mask.visual_present);
        let tactile_idx = present_indices(&self.mask.tactile_present);

        let z1_real = self.params.enc1.encode(&self.x1.gather_rows(&visual_idx))?;
        let z2_real = self.params.enc2.encode(&self.x2.gather_rows(&tactile_idx))?;
        self.z1 = Matrix::zeros(n, self.cfg.latent_dim);
        self.z2 = Matrix::zeros(n, self.cfg.latent_dim);
        self.z1.scatter_rows(&visual_idx, &z1_real);
        self.z2.scatter_rows(&tactile_idx, &z2_real);

        if !self.cfg.disable_gan {
            let (cond1, cond2) = self.generator_conditions(&self.z1, &self.z2);
            let noise1 = self.params.prior.sample(n, &mut self.rng_noise1)?;
            self.fake1 = self.params.gen1.generate(&noise1, &cond1)?;
            let noise2 = self.params.prior.sample(n, &mut self.rng_noise2)?;
            self.fake2 = self.params.gen2.generate(&noise2, &cond2)?;
            // Missing rows take their generated stand-ins.
            for i in 0..n {
                if !self.mask.visual_present[i] {
                    let row = self.fake1.row(i).to_vec();
                    self.z1.row_mut(i).copy_from_slice(&row);
                }
                if !self.mask.tactile_present[i] {
                    let row = self.fake2.row(i).to_vec();
                    self.z2.row_mut(i).copy_from_slice(&row);
                }
            }
        }

        let (w1, w2) = self.fusion_row_weights();
        let mut z3 = Matrix::zeros(n, self.cfg.latent_dim);
        for i in 0..n {
            let out = z3.row_mut(i);
            for (c, o) in out.iter_mut().enumerate() {
                *o = w1[i] * self.z1.get(i, c) + w2[i] * self.z2.get(i, c);
            }
        }
        if with_phi && !self.cfg.disable_gan {
            if self.cfg.phi1 != 0.0 {
                z3.add_scaled(&self.fake1, self.cfg.phi1)?;
            }
            if self.cfg.phi2 != 0.0 {
                z3.add_scaled(&self.fake2, self.cfg.phi2)?;
            }
        }
        self.z3 = z3;
        Ok(())
    }

    /// Condition latents for each generator. By default G1 (fake visual)
    /// conditions on tactile latents and G2 on visual ones; a sample whose
    /// condition modality is missing falls back to its available modality.
    fn generator_conditions(&self, z1: &Matrix, z2: &Matrix) -> (Matrix, Matrix) {
        let n = self.mask.n();
        let mut cond1 = Matrix::zeros(n, self.cfg.latent_dim);
        let mut cond2 = Matrix::zeros(n, self.cfg.latent_dim);
        for i in 0..n {
            let (v, t) = (self.mask.visual_present[i], self.mask.tactile_present[i]);
            debug_assert!(v || t, "sample {i} lost both modalities");
            if self.cfg.same_modality_condition {
                cond1.row_mut(i).copy_from_slice(if v { z1.row(i) } else { z2.row(i) });
                cond2.row_mut(i).copy_from_slice(if t { z2.row(i) } else { z1.row(i) });
            } else {
                cond1.row_mut(i).copy_from_slice(if t { z2.row(i) } else { z1.row(i) });
                cond2.row_mut(i).copy_from_slice(if v { z1.row(i) } else { z2.row(i) });
            }
        }
        (cond1, cond2)
    }

    /// Latent matrices used to fit each modality's centers. The real
    /// modalities use present rows only, so generated stand-ins never
    /// drag their centers; the fused space covers every sample.
    fn center_points(&self, modality: usize) -> Matrix {
        match modality {
            0 => self.z1.gather_rows(&present_indices(&self.mask.visual_present)),
            1 => self.z2.gather_rows(&present_indices(&self.mask.tactile_present)),
            2 => self.z3.clone(),
            _ => unreachable!(),
        }
    }

    fn check_finite(&self, name: &str, value: f64) -> Result<()> {
        if value.is_finite() {
            Ok(())
        } else {
            Err(Error::Divergence {
                loss: name.to_string(),
                epoch: self.epoch,
                value,
            })
        }
    }

    /// Runs one full epoch: per batch, encoder updates from the fused KL
    /// losses, then `g_updates_per_d` generator steps and one
    /// discriminator step per modality; at epoch end the fused
    /// representation and all centers are refreshed.
    pub fn train_epoch(&mut self) -> Result<EpochLosses> {
        let started = Instant::now();
        let epoch_seed = self.rng_batch.gen::<u64>();
        let n = self.mask.n();
        let batch_list = crate::data::batch_indices(n, self.cfg.batch_size, epoch_seed);

        let mut sums = EpochLosses::default();
        let mut g1_count = 0u64;
        let mut g2_count = 0u64;
        let mut d1_count = 0u64;
        let mut d2_count = 0u64;

        for batch_idx in &batch_list {
            if !self.cfg.disable_fusion_kl {
                let (le1, le2) = self.encoder_step(batch_idx)?;
                sums.l_e1 += le1;
                sums.l_e2 += le2;
            }
            if !self.cfg.disable_gan {
                let (lg1, ld1, lg2, ld2) = self.gan_step(batch_idx)?;
                sums.l_g1 += lg1;
                sums.l_d1 += ld1;
                sums.l_g2 += lg2;
                sums.l_d2 += ld2;
                g1_count += self.cfg.g_updates_per_d as u64;
                g2_count += self.cfg.g_updates_per_d as u64;
                d1_count += 1;
                d2_count += 1;
            }
        }

        self.refresh_latents(true)?;
        if self.cfg.center_reestimate {
            self.reestimate_centers()?;
        }
        self.refresh_targets()?;
        self.epoch += 1;

        let losses = EpochLosses {
            l_e1: sums.l_e1 / n as f64,
            l_e2: sums.l_e2 / n as f64,
            l_g1: if g1_count > 0 { sums.l_g1 / g1_count as f64 } else { 0.0 },
            l_g2: if g2_count > 0 { sums.l_g2 / g2_count as f64 } else { 0.0 },
            l_d1: if d1_count > 0 { sums.l_d1 / d1_count as f64 } else { 0.0 },
            l_d2: if d2_count > 0 { sums.l_d2 / d2_count as f64 } else { 0.0 },
        };
        self.loss_history.push(losses);
        self.wall_history.push(started.elapsed().as_secs_f64());
        Ok(losses)
    }

    /// Encoder updates for one batch. Both gradients are computed from the
    /// same state snapshot, then both Adam steps are applied.
    fn encoder_step(&mut self, batch_idx: &[usize]) -> Result<(f64, f64)> {
        let v_idx: Vec<usize> = batch_idx
            .iter()
            .copied()
            .filter(|&i| self.mask.visual_present[i])
            .collect();
        let t_idx: Vec<usize> = batch_idx
            .iter()
            .copied()
            .filter(|&i| self.mask.tactile_present[i])
            .collect();

        let gamma = self.cfg.gamma;
        let beta = self.cfg.beta;

        // Fresh latents for present rows.
        let x1p = self.x1.gather_rows(&v_idx);
        let acts1 = self.params.enc1.stack.forward_cached(&x1p)?;
        let z1p = acts1.last().cloned().unwrap_or_else(|| Matrix::zeros(0, 0));
        let x2p = self.x2.gather_rows(&t_idx);
        let acts2 = self.params.enc2.stack.forward_cached(&x2p)?;
        let z2p = acts2.last().cloned().unwrap_or_else(|| Matrix::zeros(0, 0));

        // Per-modality KL over present rows against the epoch's targets.
        let (l1, dz1p, dmu1) = if v_idx.is_empty() {
            (0.0, Matrix::zeros(0, 0), Matrix::zeros(self.k, self.cfg.latent_dim))
        } else {
            let q1 = soft_assign(&z1p, &self.centers.centers[0], gamma)?;
            let p1 = self.p1.gather_rows(&v_idx);
            let l = kl_divergence(&p1, &q1)?;
            let (dz, dc) = kl_grad(&z1p, &self.centers.centers[0], &p1, &q1, gamma)?;
            (l, dz, dc)
        };
        let (l2, dz2p, dmu2) = if t_idx.is_empty() {
            (0.0, Matrix::zeros(0, 0), Matrix::zeros(self.k, self.cfg.latent_dim))
        } else {
            let q2 = soft_assign(&z2p, &self.centers.centers[1], gamma)?;
            let p2 = self.p2.gather_rows(&t_idx);
            let l = kl_divergence(&p2, &q2)?;
            let (dz, dc) = kl_grad(&z2p, &self.centers.centers[1], &p2, &q2, gamma)?;
            (l, dz, dc)
        };

        // Fused KL over the whole batch: current latents where present,
        // cached stand-ins and fakes elsewhere.
        let (w1, w2) = self.fusion_row_weights();
        let b = batch_idx.len();
        let dim = self.cfg.latent_dim;
        let mut z3b = Matrix::zeros(b, dim);
        let mut v_pos = 0usize;
        let mut t_pos = 0usize;
        let mut v_rows = Vec::with_capacity(v_idx.len());
        let mut t_rows = Vec::with_capacity(t_idx.len());
        for (r, &i) in batch_idx.iter().enumerate() {
            let z1_row: &[f64] = if self.mask.visual_present[i] {
                v_rows.push(r);
                let row = z1p.row(v_pos);
                v_pos += 1;
                row
            } else {
                self.z1.row(i)
            };
            let z2_row: &[f64] = if self.mask.tactile_present[i] {
                t_rows.push(r);
                let row = z2p.row(t_pos);
                t_pos += 1;
                row
            } else {
                self.z2.row(i)
            };
            for c in 0..dim {
                let mut v = w1[i] * z1_row[c] + w2[i] * z2_row[c];
                if !self.cfg.disable_gan {
                    if self.cfg.phi1 != 0.0 {
                        v += self.cfg.phi1 * self.fake1.get(i, c);
                    }
                    if self.cfg.phi2 != 0.0 {
                        v += self.cfg.phi2 * self.fake2.get(i, c);
                    }
                }
                z3b.set(r, c, v);
            }
        }
        let q3 = soft_assign(&z3b, &self.centers.centers[2], gamma)?;
        let p3 = self.p3.gather_rows(batch_idx);
        let l3 = kl_divergence(&p3, &q3)?;
        let (dz3, dmu3) = kl_grad(&z3b, &self.centers.centers[2], &p3, &q3, gamma)?;

        let le1 = l1 + beta * l3;
        let le2 = l2 + beta * l3;
        self.check_finite("encoder1_kl", le1)?;
        self.check_finite("encoder2_kl", le2)?;

        // Chain the fused gradient back to each encoder through its own
        // fusion weight; stand-in rows are constants for the encoders.
        let mut dz1_total = dz1p;
        for (p, &r) in v_rows.iter().enumerate() {
            let i = batch_idx[r];
            for c in 0..dim {
                let add = beta * w1[i] * dz3.get(r, c);
                let cur = dz1_total.get(p, c);
                dz1_total.set(p, c, cur + add);
            }
        }
        let mut dz2_total = dz2p;
        for (p, &r) in t_rows.iter().enumerate() {
            let i = batch_idx[r];
            for c in 0..dim {
                let add = beta * w2[i] * dz3.get(r, c);
                let cur = dz2_total.get(p, c);
                dz2_total.set(p, c, cur + add);
            }
        }

        // Apply all updates after every gradient is computed.
        if !v_idx.is_empty() {
            let (g1, _) = self.params.enc1.stack.backward(&x1p, &acts1, &dz1_total)?;
            self.opt.enc1.step(&mut self.params.enc1.stack, &g1)?;
            if self.cfg.center_grad_updates {
                self.opt
                    .centers1
                    .step(self.centers.centers[0].data_mut(), dmu1.data())?;
            }
        }
        if !t_idx.is_empty() {
            let (g2, _) = self.params.enc2.stack.backward(&x2p, &acts2, &dz2_total)?;
            self.opt.enc2.step(&mut self.params.enc2.stack, &g2)?;
            if self.cfg.center_grad_updates {
                self.opt
                    .centers2
                    .step(self.centers.centers[1].data_mut(), dmu2.data())?;
            }
        }
        if self.cfg.center_grad_updates && !self.cfg.center_reestimate && beta != 0.0 {
            let scaled = dmu3.scale(beta);
            self.opt
                .centers3
                .step(self.centers.centers[2].data_mut(), scaled.data())?;
        }

        Ok((le1, le2))
    }

    /// GAN updates for one batch: per modality, `g_updates_per_d`
    /// generator steps then one discriminator step.
    fn gan_step(&mut self, batch_idx: &[usize]) -> Result<(f64, f64, f64, f64)> {
        // Fresh real latents from the just-updated encoders.
        let v_idx: Vec<usize> = batch_idx
            .iter()
            .copied()
            .filter(|&i| self.mask.visual_present[i])
            .collect();
        let t_idx: Vec<usize> = batch_idx
            .iter()
            .copied()
            .filter(|&i| self.mask.tactile_present[i])
            .collect();
        let z1p = self.params.enc1.encode(&self.x1.gather_rows(&v_idx))?;
        let z2p = self.params.enc2.encode(&self.x2.gather_rows(&t_idx))?;

        let b = batch_idx.len();
        let dim = self.cfg.latent_dim;
        // Batch-local real latent matrices (stand-in rows stay zero and
        // are excluded everywhere below via the presence flags).
        let mut z1b = Matrix::zeros(b, dim);
        let mut z2b = Matrix::zeros(b, dim);
        let mut v_flags = vec![false; b];
        let mut t_flags = vec![false; b];
        let mut v_pos = 0usize;
        let mut t_pos = 0usize;
        for (r, &i) in batch_idx.iter().enumerate() {
            if self.mask.visual_present[i] {
                z1b.row_mut(r).copy_from_slice(z1p.row(v_pos));
                v_flags[r] = true;
                v_pos += 1;
            }
            if self.mask.tactile_present[i] {
                z2b.row_mut(r).copy_from_slice(z2p.row(t_pos));
                t_flags[r] = true;
                t_pos += 1;
            }
        }

        // Conditions: cross-modal by default, own-modality behind the flag,
        // always falling back to whichever modality exists.
        let mut cond1 = Matrix::zeros(b, dim);
        let mut cond2 = Matrix::zeros(b, dim);
        for r in 0..b {
            let (v, t) = (v_flags[r], t_flags[r]);
            if self.cfg.same_modality_condition {
                cond1.row_mut(r).copy_from_slice(if v { z1b.row(r) } else { z2b.row(r) });
                cond2.row_mut(r).copy_from_slice(if t { z2b.row(r) } else { z1b.row(r) });
            } else {
                cond1.row_mut(r).copy_from_slice(if t { z2b.row(r) } else { z1b.row(r) });
                cond2.row_mut(r).copy_from_slice(if v { z1b.row(r) } else { z2b.row(r) });
            }
        }

        let (lg1, ld1) = self.gan_modality(0, &cond1, &z1b, &v_flags)?;
        let (lg2, ld2) = self.gan_modality(1, &cond2, &z2b, &t_flags)?;
        Ok((lg1, ld1, lg2, ld2))
    }

    fn gan_modality(
        &mut self,
        modality: usize,
        cond: &Matrix,
        real: &Matrix,
        present: &[bool],
    ) -> Result<(f64, f64)> {
        let b = cond.rows();
        let mut g_loss_sum = 0.0;

        for _ in 0..self.cfg.g_updates_per_d {
            let noise = if modality == 0 {
                self.params.prior.sample(b, &mut self.rng_noise1)?
            } else {
                self.params.prior.sample(b, &mut self.rng_noise2)?
            };
            let input = noise.hstack(cond)?;
            let (gen_stack, disc) = if modality == 0 {
                (&self.params.gen1.stack, &self.params.disc1)
            } else {
                (&self.params.gen2.stack, &self.params.disc2)
            };
            let acts = gen_stack.forward_cached(&input)?;
            let fake = acts.last().unwrap().clone();
            let cache = disc.forward(&fake)?;
            let gl = generator_loss(
                &cache.probs(),
                &fake,
                real,
                present,
                self.cfg.lambda,
                self.cfg.saturating_gan,
            )?;
            self.check_finite(if modality == 0 { "generator1" } else { "generator2" }, gl.total)?;

            // Adversarial gradient flows through the discriminator without
            // touching its parameters.
            let (_, d_fake_adv) = disc.backward(&fake, &cache, &gl.d_dout)?;
            let mut d_fake = d_fake_adv;
            d_fake.add_scaled(&gl.d_fake_reg, 1.0)?;
            let (grads, _) = gen_stack.backward(&input, &acts, &d_fake)?;

            if modality == 0 {
                self.opt.gen1.step(&mut self.params.gen1.stack, &grads)?;
            } else {
                self.opt.gen2.step(&mut self.params.gen2.stack, &grads)?;
            }
            self.generator_steps += 1;
            g_loss_sum += gl.total;
        }

        // One discriminator step on fresh fakes.
        let noise = if modality == 0 {
            self.params.prior.sample(b, &mut self.rng_noise1)?
        } else {
            self.params.prior.sample(b, &mut self.rng_noise2)?
        };
        let (gen, disc) = if modality == 0 {
            (&self.params.gen1, &self.params.disc1)
        } else {
            (&self.params.gen2, &self.params.disc2)
        };
        let fake = gen.generate(&noise, cond)?;
        let fake_cache = disc.forward(&fake)?;

        let real_rows: Vec<usize> = (0..b).filter(|&r| present[r]).collect();
        let (real_probs, real_gathered, real_cache) = if real_rows.is_empty() {
            (Vec::new(), None, None)
        } else {
            let gathered = real.gather_rows(&real_rows);
            let cache = disc.forward(&gathered)?;
            (cache.probs(), Some(gathered), Some(cache))
        };

        let dl = discriminator_loss(&real_probs, &fake_cache.probs());
        self.check_finite(
            if modality == 0 { "discriminator1" } else { "discriminator2" },
            dl.total,
        )?;

        let (mut grads, _) = disc.backward(&fake, &fake_cache, &dl.d_fake)?;
        if let (Some(gathered), Some(cache)) = (&real_gathered, &real_cache) {
            let (g_real, _) = disc.backward(gathered, cache, &dl.d_real)?;
            grads.accumulate(&g_real)?;
        }
        if modality == 0 {
            self.opt.disc1.step(&mut self.params.disc1, &grads)?;
        } else {
            self.opt.disc2.step(&mut self.params.disc2, &grads)?;
        }
        self.discriminator_steps += 1;

        Ok((g_loss_sum / self.cfg.g_updates_per_d as f64, dl.total))
    }

    /// Per-epoch full re-estimate of all three center sets from the hard
    /// assignments of the current latents.
    fn reestimate_centers(&mut self) -> Result<()> {
        for m in 0..3 {
            let pts = self.center_points(m);
            let q = soft_assign(&pts, &self.centers.centers[m], self.cfg.gamma)?;
            self.centers.centers[m] = argmax_mean_centers(&pts, &q, &self.centers.centers[m])?;
        }
        Ok(())
    }

    /// Predicted labels: argmax over the fused soft assignment, ties
    /// resolved toward the lowest cluster index.
    pub fn predict(&self) -> Vec<usize> {
        let q3 = soft_assign(&self.z3, &self.centers.centers[2], self.cfg.gamma)
            .expect("fused latents and centers share the latent dimension");
        (0..q3.rows())
            .map(|i| {
                let row = q3.row(i);
                let mut best = 0usize;
                let mut best_v = row[0];
                for (j, &v) in row.iter().enumerate().skip(1) {
                    if v > best_v {
                        best_v = v;
                        best = j;
                    }
                }
                best
            })
            .collect()
    }

    /// Full run: initialize, train up to `max_iter` epochs with the
    /// label-change early stop, then predict and score.
    pub fn run(dataset: &PairedDataset, mask: &MissingMask, cfg: TrainConfig) -> Result<TrainReport> {
        Self::run_with_callback(dataset, mask, cfg, |_| Ok(()))
    }

    /// Like [`Trainer::run`] but invokes `on_epoch` with the trainer after
    /// every completed epoch (checkpoint hooks plug in here).
    pub fn run_with_callback(
        dataset: &PairedDataset,
        mask: &MissingMask,
        cfg: TrainConfig,
        mut on_epoch: impl FnMut(&Trainer) -> Result<()>,
    ) -> Result<TrainReport> {
        let mut trainer = Trainer::initialize(dataset, mask, cfg)?;
        trainer.run_to_completion(&mut on_epoch)
    }

    /// Drives an initialized or resumed trainer to completion.
    pub fn run_to_completion(
        &mut self,
        on_epoch: &mut impl FnMut(&Trainer) -> Result<()>,
    ) -> Result<TrainReport> {
        let n = self.mask.n();

        while self.epoch < self.cfg.max_iter {
            self.train_epoch()?;
            on_epoch(self)?;

            let predictions = self.predict();
            let changed = predictions
                .iter()
                .zip(&self.prev_predictions)
                .filter(|(a, b)| a != b)
                .count();
            let frac = changed as f64 / n as f64;
            self.prev_predictions = predictions;
            if frac < self.cfg.early_stop_label_change {
                break;
            }
        }

        let predictions = self.predict();
        let acc = crate::metrics::accuracy(&self.labels, &predictions)?;
        let nmi = crate::metrics::nmi(&self.labels, &predictions)?;
        Ok(TrainReport {
            losses: self.loss_history.clone(),
            predictions,
            acc,
            nmi,
            epochs_run: self.epoch,
            wall_clock_s: self.wall_history.clone(),
            generator_steps: self.generator_steps,
            discriminator_steps: self.discriminator_steps,
            config: self.cfg.clone(),
        })
    }

    /// Serializes the full trainer state (weights, optimizer moments,
    /// centers, latent snapshots, RNG positions) into one archive.
    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let meta = serde_json::json!({
            "format": "gpvtf-checkpoint-v1",
            "config": serde_json::to_value(&self.cfg)
                .map_err(|e| Error::Checkpoint(e.to_string()))?,
            "epoch": self.epoch,
            "generator_steps": self.generator_steps,
            "discriminator_steps": self.discriminator_steps,
            "dataset_fingerprint": self.dataset_fingerprint.to_string(),
            "rng": {
                "batch": self.rng_batch.get_word_pos().to_string(),
                "noise1": self.rng_noise1.get_word_pos().to_string(),
                "noise2": self.rng_noise2.get_word_pos().to_string(),
            },
        });
        let mut archive = Archive::new(meta);

        save_stack(&mut archive, "enc1", &self.params.enc1.stack, &self.opt.enc1);
        save_stack(&mut archive, "enc2", &self.params.enc2.stack, &self.opt.enc2);
        save_stack(&mut archive, "gen1", &self.params.gen1.stack, &self.opt.gen1);
        save_stack(&mut archive, "gen2", &self.params.gen2.stack, &self.opt.gen2);
        save_disc(&mut archive, "disc1", &self.params.disc1, &self.opt.disc1);
        save_disc(&mut archive, "disc2", &self.params.disc2, &self.opt.disc2);

        for (m, name) in ["centers.m1", "centers.m2", "centers.m3"].iter().enumerate() {
            archive.insert(*name, self.centers.centers[m].clone());
        }
        save_adam(&mut archive, "adam.centers.m1", &self.opt.centers1);
        save_adam(&mut archive, "adam.centers.m2", &self.opt.centers2);
        save_adam(&mut archive, "adam.centers.m3", &self.opt.centers3);

        archive.insert("latents.z1", self.z1.clone());
        archive.insert("latents.z2", self.z2.clone());
        archive.insert("latents.z3", self.z3.clone());
        archive.insert("latents.fake1", self.fake1.clone());
        archive.insert("latents.fake2", self.fake2.clone());
        archive.insert_vec(
            "prev_predictions",
            &self.prev_predictions.iter().map(|&v| v as f64).collect::<Vec<_>>(),
        );

        let flat_losses: Vec<f64> = self
            .loss_history
            .iter()
            .flat_map(|l| l.values().to_vec())
            .collect();
        archive.insert(
            "loss_history",
            Matrix::from_vec(self.loss_history.len(), 6, flat_losses)?,
        );
        archive.insert_vec("wall_history", &self.wall_history);

        archive.save(path)
    }

    /// Restores a trainer from a checkpoint; the same dataset and mask
    /// must be supplied (verified by fingerprint).
    pub fn resume(dataset: &PairedDataset, mask: &MissingMask, path: &Path) -> Result<Trainer> {
        let archive = Archive::load(path)?;
        if archive.meta["format"] != "gpvtf-checkpoint-v1" {
            return Err(Error::Checkpoint(format!(
                "unsupported format tag {}",
                archive.meta["format"]
            )));
        }
        let cfg: TrainConfig = serde_json::from_value(archive.meta["config"].clone())
            .map_err(|e| Error::Checkpoint(format!("config: {e}")))?;

        let mut trainer = Trainer::initialize(dataset, mask, cfg)?;
        let want = trainer.dataset_fingerprint.to_string();
        if archive.meta["dataset_fingerprint"] != serde_json::Value::String(want.clone()) {
            return Err(Error::Checkpoint(format!(
                "checkpoint was written for a different dataset/mask (fingerprint {} vs {})",
                archive.meta["dataset_fingerprint"], want
            )));
        }

        load_stack(&archive, "enc1", &mut trainer.params.enc1.stack, &mut trainer.opt.enc1)?;
        load_stack(&archive, "enc2", &mut trainer.params.enc2.stack, &mut trainer.opt.enc2)?;
        load_stack(&archive, "gen1", &mut trainer.params.gen1.stack, &mut trainer.opt.gen1)?;
        load_stack(&archive, "gen2", &mut trainer.params.gen2.stack, &mut trainer.opt.gen2)?;
        load_disc(&archive, "disc1", &mut trainer.params.disc1, &mut trainer.opt.disc1)?;
        load_disc(&archive, "disc2", &mut trainer.params.disc2, &mut trainer.opt.disc2)?;

        for (m, name) in ["centers.m1", "centers.m2", "centers.m3"].iter().enumerate() {
            trainer.centers.centers[m] = archive.get(name)?.clone();
        }
        load_adam(&archive, "adam.centers.m1", &mut trainer.opt.centers1)?;
        load_adam(&archive, "adam.centers.m2", &mut trainer.opt.centers2)?;
        load_adam(&archive, "adam.centers.m3", &mut trainer.opt.centers3)?;

        trainer.z1 = archive.get("latents.z1")?.clone();
        trainer.z2 = archive.get("latents.z2")?.clone();
        trainer.z3 = archive.get("latents.z3")?.clone();
        trainer.fake1 = archive.get("latents.fake1")?.clone();
        trainer.fake2 = archive.get("latents.fake2")?.clone();
        // Targets are a pure function of the restored latents and centers.
        trainer.refresh_targets()?;
        trainer.prev_predictions = archive
            .get_vec("prev_predictions")?
            .into_iter()
            .map(|v| v as usize)
            .collect();

        let loss_mat = archive.get("loss_history")?;
        trainer.loss_history = (0..loss_mat.rows())
            .map(|r| {
                let row = loss_mat.row(r);
                EpochLosses {
                    l_e1: row[0],
                    l_e2: row[1],
                    l_g1: row[2],
                    l_g2: row[3],
                    l_d1: row[4],
                    l_d2: row[5],
                }
            })
            .collect();
        trainer.wall_history = archive.get_vec("wall_history")?;

        trainer.epoch = archive.meta["epoch"]
            .as_u64()
            .ok_or_else(|| Error::Checkpoint("missing epoch".into()))? as usize;
        trainer.generator_steps = archive.meta["generator_steps"].as_u64().unwrap_or(0);
        trainer.discriminator_steps = archive.meta["discriminator_steps"].as_u64().unwrap_or(0);

        let pos = |key: &str| -> Result<u128> {
            archive.meta["rng"][key]
                .as_str()
                .ok_or_else(|| Error::Checkpoint(format!("missing rng position {key}")))?
                .parse()
                .map_err(|e| Error::Checkpoint(format!("rng position {key}: {e}")))
        };
        trainer.rng_batch.set_word_pos(pos("batch")?);
        trainer.rng_noise1.set_word_pos(pos("noise1")?);
        trainer.rng_noise2.set_word_pos(pos("noise2")?);

        Ok(trainer)
    }
}

fn present_indices(flags: &[bool]) -> Vec<usize> {
    flags
        .iter()
        .enumerate()
        .filter_map(|(i, &p)| p.then_some(i))
        .collect()
}

fn dataset_fingerprint(x1: &Matrix, x2: &Matrix, labels: &[usize], mask: &MissingMask) -> u64 {
    use std::collections::hash_map::DefaultHasher;
    use std::hash::{Hash, Hasher};
    let mut h = DefaultHasher::new();
    for &v in x1.data() {
        v.to_bits().hash(&mut h);
    }
    for &v in x2.data() {
        v.to_bits().hash(&mut h);
    }
    labels.hash(&mut h);
    mask.visual_present.hash(&mut h);
    mask.tactile_present.hash(&mut h);
    h.finish()
}


fn save_adam(archive: &mut Archive, name: &str, state: &AdamState) {
    let (m, v) = state.moments();
    archive.insert_vec(format!("{name}.m"), m);
    archive.insert_vec(format!("{name}.v"), v);
    archive.insert_vec(format!("{name}.t"), &[state.step_count() as f64]);
}

fn load_adam(archive: &Archive, name: &str, state: &mut AdamState) -> Result<()> {
    let m = archive.get_vec(&format!("{name}.m"))?;
    let v = archive.get_vec(&format!("{name}.v"))?;
    let t = archive.get_vec(&format!("{name}.t"))?[0] as u64;
    state.restore(m, v, t)
}

fn save_stack(
    archive: &mut Archive,
    prefix: &str,
    stack: &crate::numeric::DenseStack,
    adam: &StackAdam,
) {
    for (i, layer) in stack.layers.iter().enumerate() {
        archive.insert(format!("{prefix}.l{i}.w"), layer.weights.clone());
        archive.insert_vec(format!("{prefix}.l{i}.b"), &layer.bias);
        save_adam(archive, &format!("adam.{prefix}.l{i}.w"), &adam.weights[i]);
        save_adam(archive, &format!("adam.{prefix}.l{i}.b"), &adam.biases[i]);
    }
}

fn load_stack(
    archive: &Archive,
    prefix: &str,
    stack: &mut crate::numeric::DenseStack,
    adam: &mut StackAdam,
) -> Result<()> {
    for (i, layer) in stack.layers.iter_mut().enumerate() {
        let w = archive.get(&format!("{prefix}.l{i}.w"))?;
        if w.shape() != layer.weights.shape() {
            return Err(Error::Checkpoint(format!(
                "{prefix}.l{i}.w has shape {:?}, expected {:?}",
                w.shape(),
                layer.weights.shape()
            )));
        }
        layer.weights = w.clone();
        layer.bias = archive.get_vec(&format!("{prefix}.l{i}.b"))?;
        load_adam(archive, &format!("adam.{prefix}.l{i}.w"), &mut adam.weights[i])?;
        load_adam(archive, &format!("adam.{prefix}.l{i}.b"), &mut adam.biases[i])?;
    }
    Ok(())
}

fn save_disc(archive: &mut Archive, prefix: &str, d: &Discriminator, adam: &DiscAdam) {
    archive.insert(format!("{prefix}.l1.w"), d.l1.weights.clone());
    archive.insert_vec(format!("{prefix}.l1.b"), &d.l1.bias);
    archive.insert(format!("{prefix}.mbd.t"), d.mbd.tensor.clone());
    archive.insert(format!("{prefix}.l2.w"), d.l2.weights.clone());
    archive.insert_vec(format!("{prefix}.l2.b"), &d.l2.bias);
    save_adam(archive, &format!("adam.{prefix}.l1.w"), &adam.l1_w);
    save_adam(archive, &format!("adam.{prefix}.l1.b"), &adam.l1_b);
    save_adam(archive, &format!("adam.{prefix}.mbd"), &adam.mbd);
    save_adam(archive, &format!("adam.{prefix}.l2.w"), &adam.l2_w);
    save_adam(archive, &format!("adam.{prefix}.l2.b"), &adam.l2_b);
}

fn load_disc(
    archive: &Archive,
    prefix: &str,
    d: &mut Discriminator,
    adam: &mut DiscAdam,
) -> Result<()> {
    d.l1.weights = archive.get(&format!("{prefix}.l1.w"))?.clone();
    d.l1.bias = archive.get_vec(&format!("{prefix}.l1.b"))?;
    d.mbd.tensor = archive.get(&format!("{prefix}.mbd.t"))?.clone();
    d.l2.weights = archive.get(&format!("{prefix}.l2.w"))?.clone();
    d.l2.bias = archive.get_vec(&format!("{prefix}.l2.b"))?;
    load_adam(archive, &format!("adam.{prefix}.l1.w"), &mut adam.l1_w)?;
    load_adam(archive, &format!("adam.{prefix}.l1.b"), &mut adam.l1_b)?;
    load_adam(archive, &format!("adam.{prefix}.mbd"), &mut adam.mbd)?;
    load_adam(archive, &format!("adam.{prefix}.l2.w"), &mut adam.l2_w)?;
    load_adam(archive, &format!("adam.{prefix}.l2.b"), &mut adam.l2_b)?;
    Ok(())
}
