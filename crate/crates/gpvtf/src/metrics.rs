//! Clustering evaluation: accuracy under optimal label matching and
//! normalized mutual information.

use crate::error::{Error, Result};

/// Joint label counts between two labelings of the same samples.
#[derive(Debug, Clone)]
pub struct ContingencyTable {
    pub k_true: usize,
    pub k_pred: usize,
    /// Row-major counts, shape (k_true, k_pred).
    pub counts: Vec<u64>,
    pub n: usize,
}

impl ContingencyTable {
    /// Builds the table, densifying sparse label values on both sides.
    pub fn from_labels(true_labels: &[usize], pred_labels: &[usize]) -> Result<Self> {
        if true_labels.len() != pred_labels.len() {
            return Err(Error::param(format!(
                "label length mismatch: {} vs {}",
                true_labels.len(),
                pred_labels.len()
            )));
        }
        if true_labels.is_empty() {
            return Err(Error::param("cannot evaluate empty labelings"));
        }
        let t_map = dense_map(true_labels);
        let p_map = dense_map(pred_labels);
        let (kt, kp) = (t_map.len(), p_map.len());
        let mut counts = vec![0u64; kt * kp];
        for (&t, &p) in true_labels.iter().zip(pred_labels) {
            counts[t_map[&t] * kp + p_map[&p]] += 1;
        }
        Ok(ContingencyTable {
            k_true: kt,
            k_pred: kp,
            counts,
            n: true_labels.len(),
        })
    }

    fn row_sums(&self) -> Vec<u64> {
        let mut sums = vec![0u64; self.k_true];
        for i in 0..self.k_true {
            for j in 0..self.k_pred {
                sums[i] += self.counts[i * self.k_pred + j];
            }
        }
        sums
    }

    fn col_sums(&self) -> Vec<u64> {
        let mut sums = vec![0u64; self.k_pred];
        for i in 0..self.k_true {
            for j in 0..self.k_pred {
                sums[j] += self.counts[i * self.k_pred + j];
            }
        }
        sums
    }
}

fn dense_map(labels: &[usize]) -> std::collections::BTreeMap<usize, usize> {
    let mut map = std::collections::BTreeMap::new();
    for &l in labels {
        let next = map.len();
        map.entry(l).or_insert(next);
    }
    map
}

/// Minimum-cost perfect matching on a square cost matrix (row-major).
///
/// Returns `perm` with `perm[row] = column`. O(n^3) potentials-and-
/// augmenting-paths formulation.
pub fn hungarian(cost: &[f64], n: usize) -> Vec<usize> {
    assert_eq!(cost.len(), n * n, "cost matrix must be n x n");
    if n == 0 {
        return Vec::new();
    }
    let inf = f64::INFINITY;
    // 1-based arrays; index 0 is the virtual start column.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1]; // p[j] = row matched to column j
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        // Augment along the found path.
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut perm = vec![0usize; n];
    for j in 1..=n {
        perm[p[j] - 1] = j - 1;
    }
    perm
}

/// Clustering accuracy: best one-to-one cluster-to-class matching.
///
/// Pads the contingency table with zero rows/columns when the two
/// labelings use different numbers of clusters.
pub fn accuracy(true_labels: &[usize], pred_labels: &[usize]) -> Result<f64> {
    let table = ContingencyTable::from_labels(true_labels, pred_labels)?;
    let s = table.k_true.max(table.k_pred);
    // Maximize matched counts == minimize negated counts.
    let mut cost = vec![0.0f64; s * s];
    for i in 0..table.k_true {
        for j in 0..table.k_pred {
            cost[i * s + j] = -(table.counts[i * table.k_pred + j] as f64);
        }
    }
    let perm = hungarian(&cost, s);
    let mut matched = 0u64;
    for (i, &j) in perm.iter().enumerate() {
        if i < table.k_true && j < table.k_pred {
            matched += table.counts[i * table.k_pred + j];
        }
    }
    Ok(matched as f64 / table.n as f64)
}

/// Normalized mutual information with sqrt-of-entropies normalization
/// and natural logs.
///
/// Conventions when an entropy is zero: 1 if the two partitions are
/// identical, 0 otherwise.
pub fn nmi(true_labels: &[usize], pred_labels: &[usize]) -> Result<f64> {
    let table = ContingencyTable::from_labels(true_labels, pred_labels)?;
    let n = table.n as f64;
    let rows = table.row_sums();
    let cols = table.col_sums();

    let entropy = |sums: &[u64]| -> f64 {
        sums.iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let f = c as f64 / n;
                -f * f.ln()
            })
            .sum()
    };
    let h_t = entropy(&rows);
    let h_p = entropy(&cols);

    if h_t == 0.0 || h_p == 0.0 {
        // A constant partition carries no information; the ratio is only
        // meaningful when both sides are constant (identical partitions).
        return Ok(if h_t == 0.0 && h_p == 0.0 { 1.0 } else { 0.0 });
    }

    let mut mi = 0.0;
    for i in 0..table.k_true {
        for j in 0..table.k_pred {
            let c = table.counts[i * table.k_pred + j];
            if c > 0 {
                let joint = c as f64 / n;
                mi += joint * (joint / ((rows[i] as f64 / n) * (cols[j] as f64 / n))).ln();
            }
        }
    }
    Ok((mi / (h_t * h_p).sqrt()).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn brute_force_min_cost(cost: &[f64], n: usize) -> f64 {
        fn permutations(n: usize) -> Vec<Vec<usize>> {
            if n == 1 {
                return vec![vec![0]];
            }
            let mut out = Vec::new();
            for p in permutations(n - 1) {
                for first in 0..n {
                    let mut q: Vec<usize> =
                        p.iter().map(|&v| v + usize::from(v >= first)).collect();
                    q.insert(0, first);
                    out.push(q);
                }
            }
            out
        }
        permutations(n)
            .into_iter()
            .map(|perm| perm.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn hungarian_identity_favoring_cost() {
        let n = 4;
        let mut cost = vec![1.0; n * n];
        for i in 0..n {
            cost[i * n + i] = 0.0;
        }
        assert_eq!(hungarian(&cost, n), vec![0, 1, 2, 3]);
    }

    #[test]
    fn hungarian_matches_brute_force_on_random_tables() {
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        for _ in 0..200 {
            let n = rng.gen_range(1..=6usize);
            let cost: Vec<f64> = (0..n * n).map(|_| rng.gen_range(0..50) as f64).collect();
            let perm = hungarian(&cost, n);
            let got: f64 = perm.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
            let want = brute_force_min_cost(&cost, n);
            assert_eq!(got, want, "n={n} cost={cost:?}");
        }
    }

    #[test]
    fn hungarian_row_shift_keeps_argmin() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 4;
        let cost: Vec<f64> = (0..n * n).map(|_| rng.gen_range(0..20) as f64).collect();
        let base = hungarian(&cost, n);
        let mut shifted = cost.clone();
        for j in 0..n {
            shifted[2 * n + j] += 7.0;
        }
        // Adding a constant to one row changes every assignment's cost
        // equally, so an optimal assignment stays optimal.
        let after = hungarian(&shifted, n);
        let cost_of = |perm: &[usize], c: &[f64]| -> f64 {
            perm.iter().enumerate().map(|(i, &j)| c[i * n + j]).sum()
        };
        assert_eq!(cost_of(&after, &shifted), cost_of(&base, &shifted));
    }

    #[test]
    fn accuracy_label_permutation_is_perfect() {
        let acc = accuracy(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap();
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn accuracy_half_matched() {
        // Brute force over both assignments gives 0.5.
        let acc = accuracy(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap();
        assert_eq!(acc, 0.5);
    }

    #[test]
    fn accuracy_identity() {
        let labels = [0, 1, 2, 1, 0, 2];
        assert_eq!(accuracy(&labels, &labels).unwrap(), 1.0);
    }

    #[test]
    fn accuracy_handles_unequal_cluster_counts() {
        // Prediction uses 3 clusters for 2 classes.
        let acc = accuracy(&[0, 0, 1, 1], &[0, 2, 1, 1]).unwrap();
        assert_eq!(acc, 0.75);
    }

    #[test]
    fn accuracy_length_mismatch_is_error() {
        assert!(accuracy(&[0, 1], &[0]).is_err());
    }

    #[test]
    fn nmi_identical_partitions() {
        let labels = [0, 1, 0, 2, 1, 2];
        let v = nmi(&labels, &labels).unwrap();
        assert!((v - 1.0).abs() < 1e-12, "nmi {v}");
    }

    #[test]
    fn nmi_independent_partitions_is_zero() {
        // Perfectly balanced independent split: mutual information 0.
        let v = nmi(&[0, 1, 0, 1], &[0, 0, 1, 1]).unwrap();
        assert!(v.abs() < 1e-15, "nmi {v}");
    }

    #[test]
    fn nmi_invariant_to_relabeling() {
        let t = [0, 0, 1, 1, 2, 2, 0, 1];
        let p = [1, 1, 0, 0, 2, 2, 1, 2];
        let relabeled: Vec<usize> = p.iter().map(|&v| (v + 1) % 3).collect();
        let a = nmi(&t, &p).unwrap();
        let b = nmi(&t, &relabeled).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn nmi_constant_vs_nonconstant_is_zero() {
        assert_eq!(nmi(&[0, 0, 0, 0], &[0, 1, 0, 1]).unwrap(), 0.0);
        assert_eq!(nmi(&[0, 1, 0, 1], &[3, 3, 3, 3]).unwrap(), 0.0);
        assert_eq!(nmi(&[2, 2, 2], &[5, 5, 5]).unwrap(), 1.0);
    }

    #[test]
    fn nmi_symmetric() {
        let t = [0, 0, 1, 1, 2, 2];
        let p = [0, 1, 1, 1, 2, 0];
        assert!((nmi(&t, &p).unwrap() - nmi(&p, &t).unwrap()).abs() < 1e-12);
    }
}
