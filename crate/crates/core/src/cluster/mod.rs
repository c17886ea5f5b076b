//! Spectral clustering of trajectories with the cluster count chosen by the
//! Calinski-Harabasz score.

mod ch;
mod kmeans;
mod spectral;

use std::collections::BTreeMap;

use nalgebra::DMatrix;

pub use ch::calinski_harabasz;
pub use kmeans::{kmeans, KMeansFit};
pub use spectral::{spectral_embed, Embedding};

use crate::error::{Error, Result};
use crate::trajnet::SimilarityMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    pub k_selected: usize,
    /// One label per trajectory, numbered by first appearance.
    pub labels: Vec<usize>,
    /// Score for every k in the sweep that could be evaluated.
    pub ch_scores: BTreeMap<usize, f64>,
    /// Embedding used for the selected k.
    pub embedding: DMatrix<f64>,
    pub isolated: Vec<usize>,
}

impl ClusterResult {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k_selected];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

struct Candidate {
    fit: KMeansFit,
    embedding: Embedding,
    score: f64,
}

fn evaluate(matrix: &SimilarityMatrix, k: usize, seed: u64, restarts: usize) -> Result<Candidate> {
    let embedding = spectral_embed(matrix, k)?;
    let fit = kmeans(&embedding.points, k, seed, restarts)?;
    let score = calinski_harabasz(&embedding.points, &fit.labels)?;
    Ok(Candidate {
        fit,
        embedding,
        score,
    })
}

/// Sweeps `k` over `k_min..=min(k_max, n-1)` and keeps the clustering with
/// the highest Calinski-Harabasz score; ties go to the smaller `k`.
pub fn select_k_and_cluster(
    matrix: &SimilarityMatrix,
    k_min: usize,
    k_max: usize,
    seed: u64,
    restarts: usize,
) -> Result<ClusterResult> {
    let n = matrix.order();
    if k_min < 2 || k_max < k_min {
        return Err(Error::invalid(format!(
            "invalid cluster range {k_min}..={k_max}"
        )));
    }
    if n < k_min + 1 {
        return Err(Error::invalid(format!(
            "clustering needs at least k_min + 1 = {} trajectories, got {n}",
            k_min + 1
        )));
    }
    let upper = k_max.min(n - 1);
    let mut ch_scores = BTreeMap::new();
    let mut best: Option<(usize, Candidate)> = None;
    for k in k_min..=upper {
        let candidate = match evaluate(matrix, k, seed, restarts) {
            Ok(c) => c,
            Err(e) => {
                log::warn!("skipping k = {k}: {e}");
                continue;
            }
        };
        log::debug!("k = {k}: CH = {}", candidate.score);
        ch_scores.insert(k, candidate.score);
        if best.as_ref().map_or(true, |(_, b)| candidate.score > b.score) {
            best = Some((k, candidate));
        }
    }
    let (k_selected, winner) = best.ok_or_else(|| {
        Error::invalid(format!(
            "no cluster count in {k_min}..={upper} could be evaluated"
        ))
    })?;
    Ok(ClusterResult {
        k_selected,
        labels: winner.fit.labels,
        ch_scores,
        embedding: winner.embedding.points,
        isolated: winner.embedding.isolated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_oracles::ari_by_pairs;
    use proptest::prelude::*;

    fn block_matrix(labels: &[usize]) -> SimilarityMatrix {
        let rows = labels
            .iter()
            .map(|a| labels.iter().map(|b| if a == b { 1.0 } else { 0.0 }).collect())
            .collect();
        SimilarityMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn three_blocks_recovered() {
        let truth: Vec<usize> = [0, 1, 2, 0, 1, 2, 2, 0, 1, 1, 2, 0].to_vec();
        let r = select_k_and_cluster(&block_matrix(&truth), 2, 10, 42, 10).unwrap();
        assert_eq!(r.k_selected, 3);
        assert_eq!(ari_by_pairs(&r.labels, &truth), 1.0);
        assert_eq!(r.labels[0], 0);
        assert!(r.cluster_sizes().iter().all(|&s| s > 0));
    }

    #[test]
    fn too_few_trajectories() {
        let err = select_k_and_cluster(&block_matrix(&[0, 1]), 2, 10, 1, 10).unwrap_err();
        assert!(err.to_string().contains("at least"), "{err}");
    }

    #[test]
    fn sweep_is_capped_at_n_minus_one() {
        let r = select_k_and_cluster(&block_matrix(&[0, 0, 1, 1, 2]), 2, 10, 3, 10).unwrap();
        assert!(r.ch_scores.keys().all(|&k| k <= 4));
    }

    #[test]
    fn isolated_rows_share_a_cluster() {
        let m = SimilarityMatrix::from_rows(vec![
            vec![1.0, 0.9, 0.0, 0.0, 0.0, 0.0],
            vec![0.9, 1.0, 0.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.8, 0.0, 0.0],
            vec![0.0, 0.0, 0.8, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        ])
        .unwrap();
        let r = select_k_and_cluster(&m, 2, 10, 0, 10).unwrap();
        assert_eq!(r.isolated, vec![4, 5]);
        assert_eq!(r.labels[4], r.labels[5]);
    }

    fn noisy_blocks(truth: &[usize], salt: u64) -> Vec<Vec<f64>> {
        let n = truth.len();
        let mut rows = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i..n {
                let h = ((i as u64 * 31 + j as u64 * 17 + salt) % 97) as f64 / 97.0;
                let v = if i == j {
                    1.0
                } else if truth[i] == truth[j] {
                    0.6 + 0.3 * h
                } else {
                    0.05 * h
                };
                rows[i][j] = v;
                rows[j][i] = v;
            }
        }
        rows
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let truth = [0, 0, 1, 1, 1, 2, 2, 0, 2, 1];
        let m = SimilarityMatrix::from_rows(noisy_blocks(&truth, 5)).unwrap();
        let a = select_k_and_cluster(&m, 2, 10, 17, 10).unwrap();
        let b = select_k_and_cluster(&m, 2, 10, 17, 10).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn permutation_preserves_partition(
            sizes in proptest::collection::vec(3usize..7, 2..5),
            salt in 0u64..1000,
            rotate in 1usize..10,
        ) {
            let truth: Vec<usize> = sizes.iter().enumerate().flat_map(|(b, &s)| std::iter::repeat(b).take(s)).collect();
            let n = truth.len();
            let rows = noisy_blocks(&truth, salt);
            let perm: Vec<usize> = (0..n).map(|i| (i * 7 + rotate) % n).collect();
            prop_assume!({ let mut p = perm.clone(); p.sort(); p.dedup(); p.len() == n });
            let permuted: Vec<Vec<f64>> = perm.iter().map(|&i| perm.iter().map(|&j| rows[i][j]).collect()).collect();
            let a = select_k_and_cluster(&SimilarityMatrix::from_rows(rows).unwrap(), 2, 10, 9, 10).unwrap();
            let b = select_k_and_cluster(&SimilarityMatrix::from_rows(permuted).unwrap(), 2, 10, 9, 10).unwrap();
            let b_back: Vec<usize> = {
                let mut v = vec![0; n];
                for (new, &old) in perm.iter().enumerate() { v[old] = b.labels[new]; }
                v
            };
            prop_assert_eq!(a.k_selected, b.k_selected);
            prop_assert_eq!(ari_by_pairs(&a.labels, &b_back), 1.0);
        }

        #[test]
        fn ch_positive_iff_centroids_differ(
            xs in proptest::collection::vec(-5.0f64..5.0, 6..12),
        ) {
            let n = xs.len();
            let labels: Vec<usize> = (0..n).map(|i| if i < n / 2 { 0 } else { 1 }).collect();
            let pts = DMatrix::from_column_slice(n, 1, &xs);
            let ch = calinski_harabasz(&pts, &labels).unwrap();
            let m0 = xs[..n / 2].iter().sum::<f64>() / (n / 2) as f64;
            let m1 = xs[n / 2..].iter().sum::<f64>() / (n - n / 2) as f64;
            prop_assert!(ch >= 0.0);
            if (m0 - m1).abs() > 1e-9 { prop_assert!(ch > 0.0); }
        }
    }
}
