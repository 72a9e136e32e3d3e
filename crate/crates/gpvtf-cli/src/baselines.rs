//! Reference k-means baselines run on the raw (standardized) features.
//!
//! Missing rows are mean-imputed, which after per-column z-scoring means
//! zero-filled, so a masked sample contributes no information to the
//! baseline -- exactly the handicap the fused model is supposed to beat.

use gpvtf::cluster::kmeans;
use gpvtf::data::{MissingMask, PairedDataset, Standardizer};
use gpvtf::error::Result;
use gpvtf::numeric::Matrix;
use rand::SeedableRng;

fn standardized_imputed(features: &Matrix, present: &[bool]) -> Result<Matrix> {
    let std = Standardizer::fit(features, present)?;
    let mut out = std.transform(features);
    for (i, &p) in present.iter().enumerate() {
        if !p {
            out.row_mut(i).fill(0.0);
        }
    }
    Ok(out)
}

fn kmeans_labels(points: &Matrix, k: usize, seed: u64) -> Result<Vec<usize>> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (_, labels) = kmeans(points, k, 100, &mut rng)?;
    Ok(labels)
}

/// K-means on one modality's standardized features; masked rows are
/// zero-imputed. `modality` is 0 (visual) or 1 (tactile).
pub fn masked_single_modality_kmeans(
    dataset: &PairedDataset,
    mask: &MissingMask,
    modality: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let (features, present) = match modality {
        0 => (&dataset.visual, &mask.visual_present),
        1 => (&dataset.tactile, &mask.tactile_present),
        _ => panic!("modality index must be 0 or 1"),
    };
    let x = standardized_imputed(features, present)?;
    kmeans_labels(&x, dataset.k, seed)
}

/// K-means on the concatenation of both standardized modalities, with
/// zero-imputed missing blocks.
pub fn masked_concat_kmeans(
    dataset: &PairedDataset,
    mask: &MissingMask,
    seed: u64,
) -> Result<Vec<usize>> {
    let x1 = standardized_imputed(&dataset.visual, &mask.visual_present)?;
    let x2 = standardized_imputed(&dataset.tactile, &mask.tactile_present)?;
    let x = x1.hstack(&x2)?;
    kmeans_labels(&x, dataset.k, seed)
}
