//! Dataset ingestion, synthetic paired-modality generation, missing-data
//! masks, and mini-batch iteration.
//!
//! Feature files are headerless CSV with one sample per row; labels are one
//! integer per line. Missing features are tracked by presence flags only —
//! no sentinel values are ever written into the feature matrices.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::numeric::Matrix;

/// Paired visual/tactile features with ground-truth labels.
#[derive(Debug, Clone)]
pub struct PairedDataset {
    /// Visual features, (n, d1), one sample per row.
    pub visual: Matrix,
    /// Tactile features, (n, d2), same sample order as `visual`.
    pub tactile: Matrix,
    /// Ground-truth labels in 0..k-1.
    pub labels: Vec<usize>,
    /// Number of clusters.
    pub k: usize,
}

impl PairedDataset {
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.visual.rows() != self.tactile.rows() {
            return Err(Error::Alignment(format!(
                "visual has {} rows, tactile has {}",
                self.visual.rows(),
                self.tactile.rows()
            )));
        }
        if self.labels.len() != self.visual.rows() {
            return Err(Error::Alignment(format!(
                "features have {} rows, labels have {}",
                self.visual.rows(),
                self.labels.len()
            )));
        }
        if self.k < 2 {
            return Err(Error::param("dataset must declare k >= 2 clusters"));
        }
        for (row, &l) in self.labels.iter().enumerate() {
            if l >= self.k {
                return Err(Error::Label {
                    row: row + 1,
                    value: l as i64,
                    k: self.k,
                });
            }
        }
        Ok(())
    }
}

/// Per-sample modality availability at a given missing rate.
#[derive(Debug, Clone)]
pub struct MissingMask {
    pub visual_present: Vec<bool>,
    pub tactile_present: Vec<bool>,
    pub missing_rate: f64,
}

impl MissingMask {
    pub fn n(&self) -> usize {
        self.visual_present.len()
    }

    /// All-present mask.
    pub fn complete(n: usize) -> Self {
        MissingMask {
            visual_present: vec![true; n],
            tactile_present: vec![true; n],
            missing_rate: 0.0,
        }
    }

    pub fn masked_slots(&self) -> usize {
        self.visual_present.iter().filter(|&&p| !p).count()
            + self.tactile_present.iter().filter(|&&p| !p).count()
    }

    pub fn present(&self, modality: usize) -> &[bool] {
        match modality {
            0 => &self.visual_present,
            1 => &self.tactile_present,
            _ => panic!("modality index must be 0 or 1"),
        }
    }
}

/// One mini-batch: sample indices plus per-modality presence flags.
#[derive(Debug, Clone)]
pub struct Batch {
    pub indices: Vec<usize>,
    pub visual_present: Vec<bool>,
    pub tactile_present: Vec<bool>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

fn parse_feature_csv(path: &Path) -> Result<Matrix> {
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for (c, cell) in line.split(',').enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                row: r + 1,
                col: c + 1,
                msg: format!("not a number: {:?}", cell.trim()),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: r + 1,
                    col: c + 1,
                    msg: format!("non-finite value {v}"),
                });
            }
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::param(format!("{} contains no samples", path.display())));
    }
    Matrix::from_rows(&rows)
}

fn parse_labels(path: &Path) -> Result<Vec<i64>> {
    let text = std::fs::read_to_string(path)?;
    let mut labels = Vec::new();
    for (r, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let v: i64 = t.parse().map_err(|_| Error::Parse {
            row: r + 1,
            col: 1,
            msg: format!("not an integer: {t:?}"),
        })?;
        labels.push(v);
    }
    Ok(labels)
}

/// Loads and validates a paired dataset from three CSV files.
///
/// `k` is taken as `max(label) + 1`; labels must already be 0-based and
/// contiguous enough that every value is below that count.
pub fn load_dataset(
    visual_path: &Path,
    tactile_path: &Path,
    labels_path: &Path,
) -> Result<PairedDataset> {
    let visual = parse_feature_csv(visual_path)?;
    let tactile = parse_feature_csv(tactile_path)?;
    let raw_labels = parse_labels(labels_path)?;

    if visual.rows() != tactile.rows() {
        return Err(Error::Alignment(format!(
            "visual has {} rows, tactile has {}",
            visual.rows(),
            tactile.rows()
        )));
    }
    if raw_labels.len() != visual.rows() {
        return Err(Error::Alignment(format!(
            "features have {} rows, labels have {}",
            visual.rows(),
            raw_labels.len()
        )));
    }
    let k = raw_labels.iter().copied().max().unwrap_or(0) + 1;
    let mut labels = Vec::with_capacity(raw_labels.len());
    for (row, &v) in raw_labels.iter().enumerate() {
        if v < 0 || v >= k {
            return Err(Error::Label {
                row: row + 1,
                value: v,
                k: k.max(0) as usize,
            });
        }
        labels.push(v as usize);
    }
    let ds = PairedDataset {
        visual,
        tactile,
        labels,
        k: k as usize,
    };
    ds.validate()?;
    Ok(ds)
}

/// Writes a feature matrix as headerless CSV, round-trippable bit-exactly.
pub fn save_matrix_csv(m: &Matrix, path: &Path) -> Result<()> {
    let mut out = String::new();
    for r in 0..m.rows() {
        let row = m.row(r);
        for (c, v) in row.iter().enumerate() {
            if c > 0 {
                out.push(',');
            }
            // `{}` prints the shortest representation that parses back
            // to the same f64.
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn save_labels(labels: &[usize], path: &Path) -> Result<()> {
    let mut out = String::new();
    for &l in labels {
        let _ = writeln!(out, "{l}");
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Exports a mask as `sample_index,visual_present,tactile_present`.
pub fn save_mask_csv(mask: &MissingMask, path: &Path) -> Result<()> {
    let mut out = String::from("sample_index,visual_present,tactile_present\n");
    for i in 0..mask.n() {
        let _ = writeln!(
            out,
            "{},{},{}",
            i,
            u8::from(mask.visual_present[i]),
            u8::from(mask.tactile_present[i])
        );
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Dimensionality of the shared latent code behind both synthetic modalities.
const SYNTH_LATENT_DIM: usize = 8;

/// Generates a paired two-modality dataset with shared cluster structure.
///
/// Each cluster gets a latent mean scaled by `separation`; every sample
/// draws a shared latent code (mean + unit Gaussian). Each modality then
/// observes its own noisy copy of that code (`modality_noise` Gaussian
/// perturbation in latent space) through a fixed random linear map. The
/// per-modality perturbations are independent, so the two views are
/// complementary: either alone is noisy, together they pin the code down.
pub fn synth_dataset(
    k: usize,
    per_cluster: usize,
    d1: usize,
    d2: usize,
    separation: f64,
    modality_noise: f64,
    seed: u64,
) -> Result<PairedDataset> {
    if k < 2 || per_cluster == 0 || d1 == 0 || d2 == 0 {
        return Err(Error::param(format!(
            "synth_dataset requires k >= 2 and positive counts, got k={k}, per_cluster={per_cluster}, d1={d1}, d2={d2}"
        )));
    }
    if !(separation > 0.0) {
        return Err(Error::param(format!("separation must be > 0, got {separation}")));
    }
    if modality_noise < 0.0 {
        return Err(Error::param(format!(
            "modality_noise must be >= 0, got {modality_noise}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");

    // Cluster means in latent space, scaled by the requested separation.
    let mut means = Matrix::zeros(k, SYNTH_LATENT_DIM);
    for v in means.data_mut() {
        *v = std_normal.sample(&mut rng) * separation;
    }

    // Fixed random linear maps latent -> each modality.
    let mut map1 = Matrix::zeros(SYNTH_LATENT_DIM, d1);
    for v in map1.data_mut() {
        *v = std_normal.sample(&mut rng) / (SYNTH_LATENT_DIM as f64).sqrt();
    }
    let mut map2 = Matrix::zeros(SYNTH_LATENT_DIM, d2);
    for v in map2.data_mut() {
        *v = std_normal.sample(&mut rng) / (SYNTH_LATENT_DIM as f64).sqrt();
    }

    let n = k * per_cluster;
    let mut latent = Matrix::zeros(n, SYNTH_LATENT_DIM);
    let mut labels = Vec::with_capacity(n);
    for cluster in 0..k {
        for s in 0..per_cluster {
            let i = cluster * per_cluster + s;
            for c in 0..SYNTH_LATENT_DIM {
                latent.set(i, c, means.get(cluster, c) + std_normal.sample(&mut rng));
            }
            labels.push(cluster);
        }
    }

    // Independent per-modality views of the shared code.
    let mut view1 = latent.clone();
    for v in view1.data_mut() {
        *v += std_normal.sample(&mut rng) * modality_noise;
    }
    let mut view2 = latent;
    for v in view2.data_mut() {
        *v += std_normal.sample(&mut rng) * modality_noise;
    }

    Ok(PairedDataset {
        visual: view1.matmul(&map1)?,
        tactile: view2.matmul(&map2)?,
        labels,
        k,
    })
}

/// Draws a missing mask with exactly `floor(missing_rate * 2n)` masked
/// (sample, modality) slots, uniform over configurations where every
/// sample keeps at least one modality.
pub fn make_mask(n: usize, missing_rate: f64, seed: u64) -> Result<MissingMask> {
    if !(0.0..=0.5).contains(&missing_rate) {
        return Err(Error::param(format!(
            "missing_rate must be in [0, 0.5], got {missing_rate}"
        )));
    }
    if n == 0 {
        return Err(Error::param("make_mask requires n >= 1"));
    }
    let slots = (missing_rate * 2.0 * n as f64).floor() as usize;
    // Each masked sample loses exactly one modality, so the count of
    // affected samples equals the slot count.
    debug_assert!(slots <= n);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);

    let mut visual_present = vec![true; n];
    let mut tactile_present = vec![true; n];
    for &i in order.iter().take(slots) {
        if rng.gen_bool(0.5) {
            visual_present[i] = false;
        } else {
            tactile_present[i] = false;
        }
    }
    Ok(MissingMask {
        visual_present,
        tactile_present,
        missing_rate,
    })
}

/// Shuffled index chunks for one epoch; the shared partition behind both
/// [`batches`] and the trainer's loop.
pub fn batch_indices(n: usize, batch_size: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    order.chunks(batch_size.max(1)).map(|c| c.to_vec()).collect()
}

/// One epoch of shuffled batches covering every sample exactly once.
pub fn batches(
    dataset: &PairedDataset,
    mask: &MissingMask,
    batch_size: usize,
    seed: u64,
) -> Result<Vec<Batch>> {
    if batch_size == 0 {
        return Err(Error::param("batch_size must be >= 1"));
    }
    if mask.n() != dataset.n() {
        return Err(Error::Alignment(format!(
            "mask covers {} samples, dataset has {}",
            mask.n(),
            dataset.n()
        )));
    }
    Ok(batch_indices(dataset.n(), batch_size, seed)
        .into_iter()
        .map(|chunk| Batch {
            visual_present: chunk.iter().map(|&i| mask.visual_present[i]).collect(),
            tactile_present: chunk.iter().map(|&i| mask.tactile_present[i]).collect(),
            indices: chunk,
        })
        .collect())
}

/// Column-wise z-scoring statistics computed over present samples only.
#[derive(Debug, Clone)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Fits on the rows flagged present; constant columns get std 1 so
    /// transformed values stay finite.
    pub fn fit(features: &Matrix, present: &[bool]) -> Result<Self> {
        if present.len() != features.rows() {
            return Err(Error::Alignment(format!(
                "presence flags cover {} rows, features have {}",
                present.len(),
                features.rows()
            )));
        }
        let count = present.iter().filter(|&&p| p).count();
        if count == 0 {
            return Err(Error::param("cannot standardize: no present samples"));
        }
        let d = features.cols();
        let mut mean = vec![0.0; d];
        for (i, &p) in present.iter().enumerate() {
            if p {
                for (m, &v) in mean.iter_mut().zip(features.row(i)) {
                    *m += v;
                }
            }
        }
        for m in &mut mean {
            *m /= count as f64;
        }
        let mut var = vec![0.0; d];
        for (i, &p) in present.iter().enumerate() {
            if p {
                for (c, &v) in features.row(i).iter().enumerate() {
                    let dlt = v - mean[c];
                    var[c] += dlt * dlt;
                }
            }
        }
        let std = var
            .into_iter()
            .map(|v| {
                let s = (v / count as f64).sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Standardizer { mean, std })
    }

    pub fn transform(&self, features: &Matrix) -> Matrix {
        let mut out = features.clone();
        for r in 0..out.rows() {
            for (c, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = (*v - self.mean[c]) / self.std[c];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn write_fixture(dir: &Path, name: &str, content: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, content).unwrap();
        p
    }

    #[test]
    fn load_dataset_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let v = write_fixture(
            dir.path(),
            "v.csv",
            "1.0,2.0\n3.5,-0.25\n0.125,7\n1,1\n2,2\n3,3\n4,4\n5,5\n",
        );
        let t = write_fixture(
            dir.path(),
            "t.csv",
            "0.5\n1.5\n2.5\n3.5\n4.5\n5.5\n6.5\n7.5\n",
        );
        let l = write_fixture(dir.path(), "l.csv", "0\n0\n1\n1\n0\n1\n0\n1\n");
        let ds = load_dataset(&v, &t, &l).unwrap();
        assert_eq!(ds.n(), 8);
        assert_eq!(ds.k, 2);
        assert_eq!(ds.visual.get(1, 1), -0.25);

        // save ∘ load is bit-exact
        let v2 = dir.path().join("v2.csv");
        save_matrix_csv(&ds.visual, &v2).unwrap();
        let reloaded = parse_feature_csv(&v2).unwrap();
        assert_eq!(reloaded, ds.visual);
    }

    #[test]
    fn load_dataset_row_mismatch_is_alignment_error() {
        let dir = tempfile::tempdir().unwrap();
        let v = write_fixture(dir.path(), "v.csv", "1,2\n3,4\n5,6\n");
        let t = write_fixture(dir.path(), "t.csv", "1\n2\n");
        let l = write_fixture(dir.path(), "l.csv", "0\n1\n0\n");
        match load_dataset(&v, &t, &l) {
            Err(Error::Alignment(_)) => {}
            other => panic!("expected alignment error, got {other:?}"),
        }
    }

    #[test]
    fn load_dataset_bad_cell_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        let v = write_fixture(dir.path(), "v.csv", "1,2\n3,oops\n");
        let t = write_fixture(dir.path(), "t.csv", "1\n2\n");
        let l = write_fixture(dir.path(), "l.csv", "0\n1\n");
        match load_dataset(&v, &t, &l) {
            Err(Error::Parse { row: 2, col: 2, .. }) => {}
            other => panic!("expected parse error at (2,2), got {other:?}"),
        }
    }

    #[test]
    fn validate_rejects_label_at_or_above_k() {
        let mut ds = synth_dataset(3, 4, 4, 3, 2.0, 0.1, 1).unwrap();
        ds.labels[5] = ds.k; // value k is out of 0..k-1
        match ds.validate() {
            Err(Error::Label { row: 6, value, .. }) => assert_eq!(value, 3),
            other => panic!("expected label error, got {other:?}"),
        }
    }

    #[test]
    fn load_dataset_negative_label_is_label_error() {
        let dir = tempfile::tempdir().unwrap();
        let v = write_fixture(dir.path(), "v.csv", "1,2\n3,4\n");
        let t = write_fixture(dir.path(), "t.csv", "1\n2\n");
        let l = write_fixture(dir.path(), "l.csv", "0\n-1\n");
        match load_dataset(&v, &t, &l) {
            Err(Error::Label { row: 2, value: -1, .. }) => {}
            other => panic!("expected label error, got {other:?}"),
        }
    }

    #[test]
    fn synth_dataset_shape_and_balance() {
        let ds = synth_dataset(5, 100, 32, 24, 5.0, 0.1, 7).unwrap();
        assert_eq!(ds.n(), 500);
        assert_eq!(ds.visual.shape(), (500, 32));
        assert_eq!(ds.tactile.shape(), (500, 24));
        for cluster in 0..5 {
            assert_eq!(ds.labels.iter().filter(|&&l| l == cluster).count(), 100);
        }
    }

    #[test]
    fn synth_dataset_deterministic() {
        let a = synth_dataset(3, 10, 6, 4, 2.0, 0.5, 42).unwrap();
        let b = synth_dataset(3, 10, 6, 4, 2.0, 0.5, 42).unwrap();
        assert_eq!(a.visual, b.visual);
        assert_eq!(a.tactile, b.tactile);
        assert_eq!(a.labels, b.labels);
    }

    #[test]
    fn synth_dataset_separated_clusters_are_kmeans_recoverable() {
        use crate::cluster::kmeans;
        use crate::metrics::accuracy;
        use rand::SeedableRng;
        use rand_chacha::ChaCha8Rng;

        let ds = synth_dataset(5, 40, 16, 12, 10.0, 0.01, 3).unwrap();
        for features in [&ds.visual, &ds.tactile] {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let (_, pred) = kmeans(features, 5, 100, &mut rng).unwrap();
            let acc = accuracy(&ds.labels, &pred).unwrap();
            assert!(acc > 0.95, "single-modality kmeans acc {acc}");
        }
    }

    #[test]
    fn make_mask_zero_rate_is_all_present() {
        let mask = make_mask(50, 0.0, 1).unwrap();
        assert!(mask.visual_present.iter().all(|&p| p));
        assert!(mask.tactile_present.iter().all(|&p| p));
    }

    #[test]
    fn make_mask_exact_slot_count_and_no_dead_samples() {
        let mask = make_mask(100, 0.1, 5).unwrap();
        assert_eq!(mask.masked_slots(), 20);
        for i in 0..100 {
            assert!(
                mask.visual_present[i] || mask.tactile_present[i],
                "sample {i} lost both modalities"
            );
        }
    }

    #[test]
    fn make_mask_rejects_rate_above_half() {
        assert!(make_mask(10, 0.6, 0).is_err());
    }

    #[test]
    fn batches_partition_samples() {
        let ds = synth_dataset(2, 65, 4, 3, 2.0, 0.1, 9).unwrap();
        let mask = MissingMask::complete(ds.n());
        let bs = batches(&ds, &mask, 64, 17).unwrap();
        assert_eq!(bs.len(), 3);
        assert_eq!(bs[0].len(), 64);
        assert_eq!(bs[1].len(), 64);
        assert_eq!(bs[2].len(), 2);
        let mut seen: Vec<usize> = bs.iter().flat_map(|b| b.indices.clone()).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..130).collect::<Vec<_>>());
    }

    #[test]
    fn batches_same_seed_same_order() {
        let ds = synth_dataset(2, 20, 4, 3, 2.0, 0.1, 9).unwrap();
        let mask = make_mask(ds.n(), 0.2, 3).unwrap();
        let a = batches(&ds, &mask, 7, 101).unwrap();
        let b = batches(&ds, &mask, 7, 101).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.indices, y.indices);
            assert_eq!(x.visual_present, y.visual_present);
        }
    }

    #[test]
    fn standardizer_uses_present_rows_only() {
        let m = Matrix::from_rows(&[vec![1.0], vec![3.0], vec![1000.0]]).unwrap();
        let s = Standardizer::fit(&m, &[true, true, false]).unwrap();
        assert_eq!(s.mean, vec![2.0]);
        assert_eq!(s.std, vec![1.0]);
        let t = s.transform(&m);
        assert_eq!(t.get(0, 0), -1.0);
        assert_eq!(t.get(1, 0), 1.0);
    }

    #[test]
    fn masking_is_label_blind() {
        // Chi-square over many seeds: masked slot counts per class should
        // be uniform for a balanced labeling. df = 3, alpha = 0.001
        // critical value 16.266.
        let k = 4;
        let per = 50;
        let n = k * per;
        let labels: Vec<usize> = (0..n).map(|i| i / per).collect();
        let mut counts = vec![0f64; k];
        let mut total = 0f64;
        for seed in 0..200u64 {
            let mask = make_mask(n, 0.25, seed).unwrap();
            for i in 0..n {
                let masked = usize::from(!mask.visual_present[i])
                    + usize::from(!mask.tactile_present[i]);
                counts[labels[i]] += masked as f64;
                total += masked as f64;
            }
        }
        let expected = total / k as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c - expected) * (c - expected) / expected)
            .sum();
        assert!(chi2 < 16.266, "chi-square {chi2}, counts {counts:?}");
    }
}
