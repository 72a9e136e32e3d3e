//! End-to-end behavior of the training loop: determinism, ablation
//! contracts, parameter isolation, checkpoint resume, and the directional
//! loss properties of the self-training objective.

use gpvtf::cluster::fuse;
use gpvtf::data::{make_mask, synth_dataset, MissingMask};
use gpvtf::error::Error;
use gpvtf::numeric::{sq_dist, StackAdam};
use gpvtf::trainer::{TrainConfig, Trainer};

fn small_config(seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        max_iter: 3,
        batch_size: 32,
        latent_dim: 16,
        enc_hidden: 32,
        gen_hidden: 24,
        disc_hidden: 16,
        mbd_features: 4,
        mbd_kernel: 3,
        noise_dim: 8,
        ..TrainConfig::default()
    }
}

#[test]
fn initialize_is_deterministic_and_shapes_are_right() {
    let ds = synth_dataset(4, 20, 10, 8, 5.0, 0.2, 11).unwrap();
    let mask = make_mask(ds.n(), 0.2, 5).unwrap();
    let a = Trainer::initialize(&ds, &mask, small_config(3)).unwrap();
    let b = Trainer::initialize(&ds, &mask, small_config(3)).unwrap();
    for m in 0..3 {
        assert_eq!(a.centers.centers[m].shape(), (4, 16));
        assert_eq!(a.centers.centers[m], b.centers.centers[m]);
    }
    assert_eq!(a.predict(), b.predict());
}

#[test]
fn initial_fusion_at_mr_zero_is_plain_convex_combination() {
    let ds = synth_dataset(3, 15, 8, 6, 4.0, 0.2, 2).unwrap();
    let mask = MissingMask::complete(ds.n());
    let cfg = small_config(1);
    let alpha = cfg.alpha;
    let trainer = Trainer::initialize(&ds, &mask, cfg).unwrap();
    let (z1, z2, z3) = trainer.latents();
    let expected = fuse(
        z1,
        z2,
        None,
        &gpvtf::cluster::FusionWeights {
            alpha,
            phi1: 0.0,
            phi2: 0.0,
            beta: 1.0,
        },
    )
    .unwrap();
    assert_eq!(*z3, expected);
}

#[test]
fn predictions_with_no_training_match_nearest_fused_center() {
    let ds = synth_dataset(4, 15, 8, 6, 6.0, 0.2, 7).unwrap();
    let mask = make_mask(ds.n(), 0.1, 3).unwrap();
    let mut cfg = small_config(5);
    cfg.max_iter = 0;
    let trainer = Trainer::initialize(&ds, &mask, cfg).unwrap();
    let (_, _, z3) = trainer.latents();
    let centers = &trainer.centers.centers[2];
    let preds = trainer.predict();
    for (i, &p) in preds.iter().enumerate() {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for j in 0..centers.rows() {
            let d = sq_dist(z3.row(i), centers.row(j));
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        assert_eq!(p, best, "sample {i}");
        assert!(p < ds.k);
    }
}

#[test]
fn prediction_ties_break_to_lowest_index() {
    let ds = synth_dataset(3, 10, 6, 5, 4.0, 0.2, 9).unwrap();
    let mask = MissingMask::complete(ds.n());
    let mut trainer = Trainer::initialize(&ds, &mask, small_config(2)).unwrap();
    // Identical centers make every assignment row uniform.
    let row: Vec<f64> = trainer.centers.centers[2].row(0).to_vec();
    for j in 0..3 {
        trainer.centers.centers[2].row_mut(j).copy_from_slice(&row);
    }
    assert!(trainer.predict().iter().all(|&p| p == 0));
}

#[test]
fn full_run_is_deterministic() {
    let ds = synth_dataset(4, 20, 10, 8, 4.0, 0.5, 21).unwrap();
    let mask = make_mask(ds.n(), 0.3, 13).unwrap();
    let a = Trainer::run(&ds, &mask, small_config(77)).unwrap();
    let b = Trainer::run(&ds, &mask, small_config(77)).unwrap();
    assert_eq!(a.predictions, b.predictions);
    assert_eq!(a.acc, b.acc);
    assert_eq!(a.nmi, b.nmi);
    assert_eq!(a.epochs_run, b.epochs_run);
    for (x, y) in a.losses.iter().zip(&b.losses) {
        assert_eq!(x.values(), y.values());
    }
}

#[test]
fn disable_gan_zeroes_adversarial_traces_and_freezes_gan_params() {
    let ds = synth_dataset(3, 20, 8, 6, 4.0, 0.3, 5).unwrap();
    let mask = make_mask(ds.n(), 0.2, 1).unwrap();
    let mut cfg = small_config(4);
    cfg.disable_gan = true;

    let mut trainer = Trainer::initialize(&ds, &mask, cfg).unwrap();
    let g1 = trainer.params.fingerprint_block("gen1");
    let g2 = trainer.params.fingerprint_block("gen2");
    let d1 = trainer.params.fingerprint_block("disc1");
    let d2 = trainer.params.fingerprint_block("disc2");
    for _ in 0..2 {
        let losses = trainer.train_epoch().unwrap();
        assert_eq!(losses.l_g1, 0.0);
        assert_eq!(losses.l_g2, 0.0);
        assert_eq!(losses.l_d1, 0.0);
        assert_eq!(losses.l_d2, 0.0);
    }
    assert_eq!(trainer.generator_steps(), 0);
    assert_eq!(trainer.discriminator_steps(), 0);
    // Encoder training never touches the adversarial parameters.
    assert_eq!(g1, trainer.params.fingerprint_block("gen1"));
    assert_eq!(g2, trainer.params.fingerprint_block("gen2"));
    assert_eq!(d1, trainer.params.fingerprint_block("disc1"));
    assert_eq!(d2, trainer.params.fingerprint_block("disc2"));
}

#[test]
fn disable_fusion_kl_freezes_encoders() {
    let ds = synth_dataset(3, 20, 8, 6, 4.0, 0.3, 5).unwrap();
    let mask = make_mask(ds.n(), 0.2, 1).unwrap();
    let mut cfg = small_config(4);
    cfg.disable_fusion_kl = true;

    let mut trainer = Trainer::initialize(&ds, &mask, cfg).unwrap();
    let e1 = trainer.params.fingerprint_block("enc1");
    let e2 = trainer.params.fingerprint_block("enc2");
    let g1 = trainer.params.fingerprint_block("gen1");
    for _ in 0..2 {
        let losses = trainer.train_epoch().unwrap();
        assert_eq!(losses.l_e1, 0.0);
        assert_eq!(losses.l_e2, 0.0);
    }
    // GAN training proceeds, encoders stay bit-identical.
    assert_eq!(e1, trainer.params.fingerprint_block("enc1"));
    assert_eq!(e2, trainer.params.fingerprint_block("enc2"));
    assert_ne!(g1, trainer.params.fingerprint_block("gen1"));
}

#[test]
fn generator_discriminator_update_ratio_is_honored() {
    let ds = synth_dataset(3, 20, 8, 6, 4.0, 0.3, 8).unwrap();
    let mask = make_mask(ds.n(), 0.2, 2).unwrap();
    let cfg = small_config(6);
    let ratio = cfg.g_updates_per_d as u64;
    let report = Trainer::run(&ds, &mask, cfg).unwrap();
    assert!(report.discriminator_steps > 0);
    assert_eq!(report.generator_steps, ratio * report.discriminator_steps);
}

#[test]
fn phi_zero_matches_disable_gan_kl_losses_bitwise() {
    let ds = synth_dataset(3, 20, 8, 6, 5.0, 0.2, 31).unwrap();
    let mask = MissingMask::complete(ds.n());

    let mut gan_off = small_config(9);
    gan_off.disable_gan = true;
    gan_off.phi1 = 0.0;
    gan_off.phi2 = 0.0;
    gan_off.early_stop_label_change = 0.0;
    let a = Trainer::run(&ds, &mask, gan_off.clone()).unwrap();

    // phi is irrelevant when no fakes exist.
    let mut gan_off_phi = gan_off.clone();
    gan_off_phi.phi1 = 0.01;
    gan_off_phi.phi2 = 0.01;
    let b = Trainer::run(&ds, &mask, gan_off_phi).unwrap();

    // With complete data and phi = 0, a GAN-enabled run degrades to the
    // same fused self-training trajectory.
    let mut gan_on = gan_off.clone();
    gan_on.disable_gan = false;
    gan_on.phi1 = 0.0;
    gan_on.phi2 = 0.0;
    let c = Trainer::run(&ds, &mask, gan_on).unwrap();

    for (x, y) in a.losses.iter().zip(&b.losses) {
        assert_eq!(x.l_e1.to_bits(), y.l_e1.to_bits());
        assert_eq!(x.l_e2.to_bits(), y.l_e2.to_bits());
    }
    for (x, y) in a.losses.iter().zip(&c.losses) {
        assert_eq!(x.l_e1.to_bits(), y.l_e1.to_bits());
        assert_eq!(x.l_e2.to_bits(), y.l_e2.to_bits());
    }
    assert_eq!(a.predictions, c.predictions);
}

#[test]
fn beta_zero_decouples_encoder_one_from_tactile_data() {
    let ds_a = synth_dataset(3, 20, 8, 6, 4.0, 0.3, 17).unwrap();
    let mut ds_b = ds_a.clone();
    // Swap two tactile columns; standardization cannot undo this.
    for r in 0..ds_b.n() {
        let row = ds_b.tactile.row_mut(r);
        row.swap(0, 1);
    }
    let mask = make_mask(ds_a.n(), 0.3, 3).unwrap();

    let mut cfg = small_config(12);
    cfg.beta = 0.0;
    cfg.early_stop_label_change = 0.0;
    cfg.max_iter = 3;

    let mut ta = Trainer::initialize(&ds_a, &mask, cfg.clone()).unwrap();
    let mut tb = Trainer::initialize(&ds_b, &mask, cfg).unwrap();
    for _ in 0..3 {
        ta.train_epoch().unwrap();
        tb.train_epoch().unwrap();
    }
    assert_eq!(
        ta.params.fingerprint_block("enc1"),
        tb.params.fingerprint_block("enc1")
    );
    assert_eq!(ta.centers.centers[0], tb.centers.centers[0]);
    // Sanity: the tactile side did diverge.
    assert_ne!(
        ta.params.fingerprint_block("enc2"),
        tb.params.fingerprint_block("enc2")
    );
}

#[test]
fn fused_kl_trend_is_downward_on_complete_data() {
    let ds = synth_dataset(4, 50, 12, 10, 12.0, 0.3, 23).unwrap();
    let mask = MissingMask::complete(ds.n());
    let mut cfg = small_config(3);
    cfg.max_iter = 20;
    cfg.early_stop_label_change = 0.0;
    let report = Trainer::run(&ds, &mask, cfg).unwrap();
    assert_eq!(report.losses.len(), 20);
    let first = report.losses.first().unwrap().l_e1;
    let last = report.losses.last().unwrap().l_e1;
    assert!(
        last < first,
        "fused KL did not decrease: first {first}, last {last}"
    );
}

#[test]
fn checkpoint_resume_reproduces_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mid.ckpt");

    let ds = synth_dataset(3, 20, 8, 6, 4.0, 0.4, 41).unwrap();
    let mask = make_mask(ds.n(), 0.2, 9).unwrap();
    let mut cfg = small_config(15);
    cfg.max_iter = 6;
    cfg.early_stop_label_change = 0.0;

    // Uninterrupted run.
    let full = Trainer::run(&ds, &mask, cfg.clone()).unwrap();

    // Interrupted at epoch 3, resumed, driven to completion.
    let mut trainer = Trainer::initialize(&ds, &mask, cfg).unwrap();
    for _ in 0..3 {
        trainer.train_epoch().unwrap();
    }
    trainer.save_checkpoint(&path).unwrap();
    drop(trainer);

    let mut resumed = Trainer::resume(&ds, &mask, &path).unwrap();
    assert_eq!(resumed.epoch(), 3);
    let report = resumed.run_to_completion(&mut |_| Ok(())).unwrap();

    assert_eq!(report.predictions, full.predictions);
    assert_eq!(report.epochs_run, full.epochs_run);
    assert_eq!(report.losses.len(), full.losses.len());
    for (x, y) in report.losses.iter().zip(&full.losses) {
        for (a, b) in x.values().iter().zip(y.values().iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}

#[test]
fn resume_rejects_mismatched_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");

    let ds = synth_dataset(3, 15, 8, 6, 4.0, 0.4, 1).unwrap();
    let mask = make_mask(ds.n(), 0.2, 9).unwrap();
    let trainer = Trainer::initialize(&ds, &mask, small_config(1)).unwrap();
    trainer.save_checkpoint(&path).unwrap();

    let other_mask = make_mask(ds.n(), 0.2, 10).unwrap();
    match Trainer::resume(&ds, &other_mask, &path) {
        Err(Error::Checkpoint(msg)) => assert!(msg.contains("fingerprint")),
        Err(other) => panic!("expected checkpoint error, got {other:?}"),
        Ok(_) => panic!("resume should have rejected the mismatched mask"),
    }
}

#[test]
fn regularizer_dominated_generator_training_converges_on_targets() {
    use gpvtf::networks::{generator_loss, Generator, NoisePrior};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let prior = NoisePrior {
        dn: 4,
        sigma: 0.1,
        k: 3,
    };
    let latent = 8;
    let mut gen = Generator::new(prior.dim(), latent, 16, &mut rng).unwrap();
    let cond = gpvtf::numeric::xavier_init(24, latent, &mut rng).unwrap();
    let target = gpvtf::numeric::xavier_init(24, latent, &mut rng).unwrap();
    let present = vec![true; 24];
    let mut adam = StackAdam::for_stack(&gen.stack, 1e-3);

    // With a huge lambda the similarity term dominates; evaluated on a
    // fixed noise draw, the mean squared gap to the targets should fall
    // monotonically over the first steps.
    let lambda = 1000.0;
    let eval_noise = prior.sample(24, &mut rng).unwrap();
    let eval_gap = |gen: &Generator| -> f64 {
        let fake = gen.generate(&eval_noise, &cond).unwrap();
        (0..24)
            .map(|r| sq_dist(fake.row(r), target.row(r)))
            .sum::<f64>()
            / 24.0
    };
    let mut prev = eval_gap(&gen);
    for step in 0..50 {
        let noise = prior.sample(24, &mut rng).unwrap();
        let input = noise.hstack(&cond).unwrap();
        let acts = gen.stack.forward_cached(&input).unwrap();
        let fake = acts.last().unwrap().clone();
        // Fixed pseudo-probabilities: only the regularizer should matter.
        let d_out = vec![0.5; 24];
        let gl = generator_loss(&d_out, &fake, &target, &present, lambda, true).unwrap();
        let (grads, _) = gen.stack.backward(&input, &acts, &gl.d_fake_reg).unwrap();
        adam.step(&mut gen.stack, &grads).unwrap();

        let gap = eval_gap(&gen);
        assert!(
            gap < prev,
            "step {step}: gap {gap} did not improve on {prev}"
        );
        prev = gap;
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let ds = synth_dataset(3, 10, 6, 5, 4.0, 0.2, 2).unwrap();
    let mask = MissingMask::complete(ds.n());

    let mut cfg = small_config(1);
    cfg.lr_encoders = 0.0;
    assert!(matches!(
        Trainer::initialize(&ds, &mask, cfg),
        Err(Error::Param(_))
    ));

    let mut cfg = small_config(1);
    cfg.alpha = 1.5;
    assert!(matches!(
        Trainer::initialize(&ds, &mask, cfg),
        Err(Error::Param(_))
    ));
}

#[test]
fn too_few_samples_for_k_is_param_error() {
    let mut ds = synth_dataset(3, 2, 6, 5, 4.0, 0.2, 2).unwrap();
    ds.k = 10;
    ds.labels = (0..ds.n()).map(|i| i % 10).collect();
    let mask = MissingMask::complete(ds.n());
    assert!(matches!(
        Trainer::initialize(&ds, &mask, small_config(1)),
        Err(Error::Param(_))
    ));
}
