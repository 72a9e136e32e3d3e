//! Clustering mathematics: k-means initialization, Student's-t soft
//! assignment, target-distribution sharpening, latent fusion, and the
//! fused KL self-training losses with their gradients.

use rand::Rng;

use crate::error::{Error, Result};
use crate::numeric::{sq_dist, Matrix};

/// Cluster centers for the visual, tactile, and fused latent spaces.
#[derive(Debug, Clone)]
pub struct ClusterState {
    /// One k x latent_dim center matrix per modality (index 0,1 = real
    /// modalities, 2 = fused space).
    pub centers: [Matrix; 3],
    /// Degrees of freedom of the Student's-t kernel.
    pub gamma: f64,
}

impl ClusterState {
    pub fn k(&self) -> usize {
        self.centers[0].rows()
    }
}

/// Weights of the fusion combination.
#[derive(Debug, Clone, Copy)]
pub struct FusionWeights {
    /// Tactile share of the convex combination, in [0, 1].
    pub alpha: f64,
    /// Weight of generated visual latents.
    pub phi1: f64,
    /// Weight of generated tactile latents.
    pub phi2: f64,
    /// Trade-off of the fused KL term.
    pub beta: f64,
}

impl FusionWeights {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::param(format!("alpha must be in [0,1], got {}", self.alpha)));
        }
        for (name, v) in [("phi1", self.phi1), ("phi2", self.phi2), ("beta", self.beta)] {
            if v < 0.0 || !v.is_finite() {
                return Err(Error::param(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Lloyd's algorithm with k-means++ seeding.
///
/// Empty clusters are re-seeded to the point farthest from its current
/// center. Inertia is non-increasing across iterations by construction.
pub fn kmeans<R: Rng + ?Sized>(
    points: &Matrix,
    k: usize,
    max_iter: usize,
    rng: &mut R,
) -> Result<(Matrix, Vec<usize>)> {
    let n = points.rows();
    let d = points.cols();
    if k == 0 {
        return Err(Error::param("kmeans requires k >= 1"));
    }
    if n < k {
        return Err(Error::param(format!(
            "kmeans requires at least k={k} points, got {n}"
        )));
    }

    let mut centers = kmeans_pp_seed(points, k, rng);
    let mut labels = vec![0usize; n];

    for _ in 0..max_iter {
        // Assignment step.
        let mut changed = false;
        for i in 0..n {
            let row = points.row(i);
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for j in 0..k {
                let dist = sq_dist(row, centers.row(j));
                if dist < best_d {
                    best_d = dist;
                    best = j;
                }
            }
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }

        // Update step.
        let mut sums = Matrix::zeros(k, d);
        let mut counts = vec![0usize; k];
        for (i, &label) in labels.iter().enumerate() {
            counts[label] += 1;
            for (s, &v) in sums.row_mut(label).iter_mut().zip(points.row(i)) {
                *s += v;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                let inv = 1.0 / counts[j] as f64;
                for v in sums.row_mut(j) {
                    *v *= inv;
                }
                centers.row_mut(j).copy_from_slice(sums.row(j));
            } else {
                // Re-seed an empty cluster to the farthest point.
                let far = farthest_point(points, &centers, &labels);
                centers.row_mut(j).copy_from_slice(points.row(far));
                changed = true;
            }
        }

        if !changed {
            break;
        }
    }

    Ok((centers, labels))
}

fn kmeans_pp_seed<R: Rng + ?Sized>(points: &Matrix, k: usize, rng: &mut R) -> Matrix {
    let n = points.rows();
    let d = points.cols();
    let mut centers = Matrix::zeros(k, d);
    let first = rng.gen_range(0..n);
    centers.row_mut(0).copy_from_slice(points.row(first));

    let mut min_d = vec![0.0f64; n];
    for i in 0..n {
        min_d[i] = sq_dist(points.row(i), centers.row(0));
    }
    for c in 1..k {
        let total: f64 = min_d.iter().sum();
        let chosen = if total <= 0.0 {
            // All points coincide with a center; any choice works.
            rng.gen_range(0..n)
        } else {
            let mut target = rng.gen_range(0.0..total);
            let mut pick = n - 1;
            for (i, &w) in min_d.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        };
        centers.row_mut(c).copy_from_slice(points.row(chosen));
        for i in 0..n {
            let dist = sq_dist(points.row(i), centers.row(c));
            if dist < min_d[i] {
                min_d[i] = dist;
            }
        }
    }
    centers
}

/// Best-of-`restarts` k-means: repeats [`kmeans`] with fresh seeding and
/// keeps the run with the lowest inertia.
pub fn kmeans_best_of<R: Rng + ?Sized>(
    points: &Matrix,
    k: usize,
    max_iter: usize,
    restarts: usize,
    rng: &mut R,
) -> Result<(Matrix, Vec<usize>)> {
    let mut best: Option<(f64, Matrix, Vec<usize>)> = None;
    for _ in 0..restarts.max(1) {
        let (centers, labels) = kmeans(points, k, max_iter, rng)?;
        let score = inertia(points, &centers, &labels);
        if best.as_ref().is_none_or(|(s, _, _)| score < *s) {
            best = Some((score, centers, labels));
        }
    }
    let (_, centers, labels) = best.expect("at least one restart");
    Ok((centers, labels))
}

fn farthest_point(points: &Matrix, centers: &Matrix, labels: &[usize]) -> usize {
    let mut far = 0usize;
    let mut far_d = -1.0f64;
    for (i, &label) in labels.iter().enumerate() {
        let dist = sq_dist(points.row(i), centers.row(label));
        if dist > far_d {
            far_d = dist;
            far = i;
        }
    }
    far
}

/// Within-cluster sum of squared distances.
pub fn inertia(points: &Matrix, centers: &Matrix, labels: &[usize]) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(i, &j)| sq_dist(points.row(i), centers.row(j)))
        .sum()
}

/// Student's-t soft assignment: rows of Q sum to one.
///
/// `q_nj ∝ (1 + ||z_n - mu_j||^2 / gamma)^(-(gamma+1)/2)`.
pub fn soft_assign(z: &Matrix, centers: &Matrix, gamma: f64) -> Result<Matrix> {
    if gamma <= 0.0 {
        return Err(Error::param(format!("gamma must be > 0, got {gamma}")));
    }
    if z.cols() != centers.cols() {
        return Err(Error::Dim {
            op: "soft_assign",
            lhs: z.shape(),
            rhs: centers.shape(),
        });
    }
    let n = z.rows();
    let k = centers.rows();
    let exponent = -(gamma + 1.0) / 2.0;
    let mut q = Matrix::zeros(n, k);
    for i in 0..n {
        let row = z.row(i);
        let mut sum = 0.0;
        for j in 0..k {
            let kernel = (1.0 + sq_dist(row, centers.row(j)) / gamma).powf(exponent);
            q.set(i, j, kernel);
            sum += kernel;
        }
        let inv = 1.0 / sum;
        for v in q.row_mut(i) {
            *v *= inv;
        }
    }
    Ok(q)
}

/// Sharpened self-training target: `p_nj ∝ q_nj^2 / f_j` with `f_j = Σ_n q_nj`.
pub fn target_distribution(q: &Matrix) -> Result<Matrix> {
    let freqs = q.col_sums();
    if let Some(j) = freqs.iter().position(|&f| f <= 0.0) {
        return Err(Error::DegenerateCluster(j));
    }
    let mut p = Matrix::zeros(q.rows(), q.cols());
    for i in 0..q.rows() {
        let mut sum = 0.0;
        for j in 0..q.cols() {
            let v = q.get(i, j) * q.get(i, j) / freqs[j];
            p.set(i, j, v);
            sum += v;
        }
        let inv = 1.0 / sum;
        for v in p.row_mut(i) {
            *v *= inv;
        }
    }
    Ok(p)
}

/// Fused latent representation.
///
/// Without fakes this is the convex combination `(1-alpha) z1 + alpha z2`;
/// with fakes it additionally adds `phi1 * fake1 + phi2 * fake2`.
pub fn fuse(
    z1: &Matrix,
    z2: &Matrix,
    fakes: Option<(&Matrix, &Matrix)>,
    w: &FusionWeights,
) -> Result<Matrix> {
    w.validate()?;
    if z1.shape() != z2.shape() {
        return Err(Error::Dim {
            op: "fuse",
            lhs: z1.shape(),
            rhs: z2.shape(),
        });
    }
    let mut z3 = z1.scale(1.0 - w.alpha);
    z3.add_scaled(z2, w.alpha)?;
    if let Some((f1, f2)) = fakes {
        if w.phi1 != 0.0 {
            z3.add_scaled(f1, w.phi1)?;
        }
        if w.phi2 != 0.0 {
            z3.add_scaled(f2, w.phi2)?;
        }
    }
    Ok(z3)
}

/// Plain KL divergence `KL(P || Q) = Σ p log(p/q)` over matching rows.
///
/// Gibbs' inequality guarantees the true value is non-negative; the
/// floating-point sum is floored at zero so rounding noise near P = Q
/// cannot produce a negative divergence.
pub fn kl_divergence(p: &Matrix, q: &Matrix) -> Result<f64> {
    if p.shape() != q.shape() {
        return Err(Error::Dim {
            op: "kl_divergence",
            lhs: p.shape(),
            rhs: q.shape(),
        });
    }
    let mut total = 0.0;
    for (&pv, &qv) in p.data().iter().zip(q.data()) {
        if pv > 0.0 {
            total += pv * (pv / qv).ln();
        }
    }
    Ok(total.max(0.0))
}

/// Fused self-training loss `KL(P||Q) + beta * KL(P3||Q3)`.
pub fn kl_loss(p: &Matrix, q: &Matrix, p3: &Matrix, q3: &Matrix, beta: f64) -> Result<f64> {
    Ok(kl_divergence(p, q)? + beta * kl_divergence(p3, q3)?)
}

/// Gradient of `KL(P||Q)` w.r.t. the latent codes and the centers,
/// chained through the Student's-t soft assignment (P held constant).
///
/// `dL/dz_n = ((gamma+1)/gamma) Σ_j u_nj (p_nj - q_nj)(z_n - mu_j)` with
/// `u_nj = (1 + ||z_n - mu_j||^2/gamma)^(-1)`; the center gradient is the
/// negation accumulated over samples.
pub fn kl_grad(
    z: &Matrix,
    centers: &Matrix,
    p: &Matrix,
    q: &Matrix,
    gamma: f64,
) -> Result<(Matrix, Matrix)> {
    if z.cols() != centers.cols() || p.shape() != q.shape() || q.rows() != z.rows() {
        return Err(Error::Dim {
            op: "kl_grad",
            lhs: z.shape(),
            rhs: centers.shape(),
        });
    }
    let n = z.rows();
    let k = centers.rows();
    let scale = (gamma + 1.0) / gamma;
    let mut dz = Matrix::zeros(n, z.cols());
    let mut dc = Matrix::zeros(k, centers.cols());
    for i in 0..n {
        let zi = z.row(i);
        for j in 0..k {
            let cj = centers.row(j);
            let u = 1.0 / (1.0 + sq_dist(zi, cj) / gamma);
            let coeff = scale * u * (p.get(i, j) - q.get(i, j));
            for c in 0..z.cols() {
                let diff = zi[c] - cj[c];
                dz.data_mut()[i * z.cols() + c] += coeff * diff;
                dc.data_mut()[j * centers.cols() + c] -= coeff * diff;
            }
        }
    }
    Ok((dz, dc))
}

/// Hard re-estimate of cluster centers: each center becomes the mean of
/// the samples whose soft assignment peaks on it (ties to the lowest
/// index). A cluster that captured no samples keeps its previous center.
///
/// The fully soft Q-weighted mean is available as
/// [`weighted_mean_centers`], but with the heavy-tailed Student's-t
/// kernel it contracts all centers toward the global mean on every
/// pass, which collapses the clustering over tens of epochs.
pub fn argmax_mean_centers(z: &Matrix, q: &Matrix, prev: &Matrix) -> Result<Matrix> {
    if q.rows() != z.rows() || prev.cols() != z.cols() || prev.rows() != q.cols() {
        return Err(Error::Dim {
            op: "argmax_mean_centers",
            lhs: q.shape(),
            rhs: z.shape(),
        });
    }
    let k = q.cols();
    let d = z.cols();
    let mut centers = Matrix::zeros(k, d);
    let mut counts = vec![0usize; k];
    for i in 0..z.rows() {
        let row = q.row(i);
        let mut best = 0usize;
        let mut best_v = row[0];
        for (j, &v) in row.iter().enumerate().skip(1) {
            if v > best_v {
                best_v = v;
                best = j;
            }
        }
        counts[best] += 1;
        for (c, &v) in z.row(i).iter().enumerate() {
            dataadd(&mut centers, best, c, v);
        }
    }
    for j in 0..k {
        if counts[j] > 0 {
            let inv = 1.0 / counts[j] as f64;
            for v in centers.row_mut(j) {
                *v *= inv;
            }
        } else {
            centers.row_mut(j).copy_from_slice(prev.row(j));
        }
    }
    Ok(centers)
}

/// Soft (Q-weighted) mean re-estimate of cluster centers:
/// `mu_j = Σ_n q_nj z_n / Σ_n q_nj`.
pub fn weighted_mean_centers(z: &Matrix, q: &Matrix) -> Result<Matrix> {
    if q.rows() != z.rows() {
        return Err(Error::Dim {
            op: "weighted_mean_centers",
            lhs: q.shape(),
            rhs: z.shape(),
        });
    }
    let k = q.cols();
    let d = z.cols();
    let mut centers = Matrix::zeros(k, d);
    let freqs = q.col_sums();
    if let Some(j) = freqs.iter().position(|&f| f <= 0.0) {
        return Err(Error::DegenerateCluster(j));
    }
    for i in 0..z.rows() {
        let row = z.row(i);
        for j in 0..k {
            let w = q.get(i, j);
            for c in 0..d {
                dataadd(&mut centers, j, c, w * row[c]);
            }
        }
    }
    for j in 0..k {
        let inv = 1.0 / freqs[j];
        for v in centers.row_mut(j) {
            *v *= inv;
        }
    }
    Ok(centers)
}

#[inline]
fn dataadd(m: &mut Matrix, r: usize, c: usize, v: f64) {
    let cols = m.cols();
    m.data_mut()[r * cols + c] += v;
}
