//! Generative partial visual-tactile fused clustering.
//!
//! Clusters objects from paired visual/tactile feature matrices where some
//! samples are missing one modality. Two modality-specific encoders embed
//! the features into latent subspaces; conditional cross-modal clustering
//! GANs synthesize the missing modality's latents from the available one;
//! encoders self-train with fused KL-divergence losses over Student's-t
//! soft assignments; predictions come from the fused representation.
//!
//! The crate is organized as:
//!
//! - [`numeric`]: dense matrices, layer primitives, Adam
//! - [`data`]: dataset loading, synthesis, missing masks, batching
//! - [`cluster`]: k-means, soft assignment, target sharpening, fusion, KL
//! - [`networks`]: encoders, generators, discriminators, GAN losses
//! - [`trainer`]: the full training loop and prediction
//! - [`metrics`]: clustering ACC (Hungarian matching) and NMI
//! - [`gradcheck`]: finite-difference oracle used across the test suites

pub mod cluster;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod metrics;
pub mod networks;
pub mod numeric;
pub mod trainer;

pub use error::{Error, Result};
