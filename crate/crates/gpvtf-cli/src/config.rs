//! Config resolution: built-in defaults, then a TOML config file, then
//! command-line flags, in increasing precedence.

use std::path::Path;

use gpvtf::error::{Error, Result};
use gpvtf::trainer::TrainConfig;

/// Loads a flat TOML document whose keys mirror [`TrainConfig`] fields;
/// keys that are absent keep their default values.
pub fn load_config_file(path: &Path) -> Result<TrainConfig> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::param(format!("{}: {e}", path.display())))
}

/// Optional command-line overrides applied on top of the resolved config.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct ConfigOverrides {
    /// Maximum number of training epochs.
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Mini-batch size.
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Encoder learning rate.
    #[arg(long)]
    pub lr_encoders: Option<f64>,
    /// Learning rate of the visual-side generator.
    #[arg(long)]
    pub lr_g1: Option<f64>,
    /// Learning rate of the tactile-side generator.
    #[arg(long)]
    pub lr_g2: Option<f64>,
    /// Learning rate of both discriminators.
    #[arg(long)]
    pub lr_d: Option<f64>,
    /// Generator updates per discriminator update.
    #[arg(long)]
    pub g_updates_per_d: Option<usize>,
    /// Tactile share of the fused representation.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Weight of the fused KL term.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Weight of the generator similarity regularizer.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Weight of generated visual latents in the fusion.
    #[arg(long)]
    pub phi1: Option<f64>,
    /// Weight of generated tactile latents in the fusion.
    #[arg(long)]
    pub phi2: Option<f64>,
    /// Degrees of freedom of the Student's-t kernel.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Standard deviation of the Gaussian noise block.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Latent subspace dimension.
    #[arg(long)]
    pub latent_dim: Option<usize>,
    /// Train without the cross-modal GANs.
    #[arg(long)]
    pub disable_gan: bool,
    /// Train without the fused KL-divergence encoder losses.
    #[arg(long)]
    pub disable_fusion_kl: bool,
}

impl ConfigOverrides {
    pub fn apply(&self, mut cfg: TrainConfig) -> TrainConfig {
        macro_rules! set {
            ($field:ident) => {
                if let Some(v) = self.$field {
                    cfg.$field = v;
                }
            };
        }
        set!(max_iter);
        set!(batch_size);
        set!(lr_encoders);
        set!(lr_g1);
        set!(lr_g2);
        set!(lr_d);
        set!(g_updates_per_d);
        set!(alpha);
        set!(beta);
        set!(lambda);
        set!(phi1);
        set!(phi2);
        set!(gamma);
        set!(sigma);
        set!(latent_dim);
        if self.disable_gan {
            cfg.disable_gan = true;
        }
        if self.disable_fusion_kl {
            cfg.disable_fusion_kl = true;
        }
        cfg
    }
}

/// defaults < config file < flags.
pub fn resolve(config_file: Option<&Path>, overrides: &ConfigOverrides) -> Result<TrainConfig> {
    let base = match config_file {
        Some(path) => load_config_file(path)?,
        None => TrainConfig::default(),
    };
    Ok(overrides.apply(base))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_overrides_defaults_and_flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "alpha = 0.4\nbatch_size = 16\n").unwrap();

        let from_file = resolve(Some(&path), &ConfigOverrides::default()).unwrap();
        assert_eq!(from_file.alpha, 0.4);
        assert_eq!(from_file.batch_size, 16);
        // Untouched keys keep published defaults.
        assert_eq!(from_file.lr_encoders, 1e-4);
        assert_eq!(from_file.g_updates_per_d, 5);

        let flags = ConfigOverrides {
            alpha: Some(0.1),
            ..Default::default()
        };
        let resolved = resolve(Some(&path), &flags).unwrap();
        assert_eq!(resolved.alpha, 0.1);
        assert_eq!(resolved.batch_size, 16);
    }

    #[test]
    fn bad_config_file_is_param_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        std::fs::write(&path, "alpha = \"high\"\n").unwrap();
        assert!(matches!(
            resolve(Some(&path), &ConfigOverrides::default()),
            Err(gpvtf::Error::Param(_))
        ));
    }
}
