use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 300;
const SHIFT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    /// Labels in first-appearance order (point 0 is in cluster 0).
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squared distances.
    pub wcss: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn rows_of(points: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..points.nrows())
        .map(|i| points.row(i).iter().copied().collect())
        .collect()
}

fn distinct_count(rows: &[Vec<f64>]) -> usize {
    let mut sorted: Vec<&Vec<f64>> = rows.iter().collect();
    sorted.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    sorted.dedup_by(|a, b| a == b);
    sorted.len()
}

/// Lloyd's k-means with k-means++ seeding; the best of `restarts` runs by WCSS.
/// Deterministic for a fixed `seed`.
pub fn kmeans(points: &DMatrix<f64>, k: usize, seed: u64, restarts: usize) -> Result<KMeansFit> {
    let rows = rows_of(points);
    if k == 0 {
        return Err(Error::invalid("k-means with k = 0"));
    }
    let distinct = distinct_count(&rows);
    if k > distinct {
        return Err(Error::invalid(format!(
            "k-means with k = {k} but only {distinct} distinct points"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeansFit> = None;
    for _ in 0..restarts.max(1) {
        let fit = lloyd(&rows, seed_centroids(&rows, k, &mut rng));
        if best.as_ref().map_or(true, |b| fit.wcss < b.wcss) {
            best = Some(fit);
        }
    }
    Ok(canonicalize(best.expect("at least one restart")))
}

fn seed_centroids(rows: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut centroids = vec![rows[rng.random_range(0..n)].clone()];
    let mut nearest: Vec<f64> = rows.iter().map(|r| sq_dist(r, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = nearest.iter().sum();
        let mut target = rng.random::<f64>() * total;
        let mut pick = None;
        for (i, &d) in nearest.iter().enumerate() {
            if d <= 0.0 {
                continue;
            }
            pick = Some(i);
            if target < d {
                break;
            }
            target -= d;
        }
        let i = pick.expect("fewer chosen centres than distinct points");
        centroids.push(rows[i].clone());
        for (d, r) in nearest.iter_mut().zip(rows) {
            *d = d.min(sq_dist(r, &rows[i]));
        }
    }
    centroids
}

fn assign(rows: &[Vec<f64>], centroids: &[Vec<f64>]) -> Vec<usize> {
    rows.iter()
        .map(|r| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, centroid) in centroids.iter().enumerate() {
                let d = sq_dist(r, centroid);
                if d < best_d {
                    best = c;
                    best_d = d;
                }
            }
            best
        })
        .collect()
}

fn lloyd(rows: &[Vec<f64>], mut centroids: Vec<Vec<f64>>) -> KMeansFit {
    let k = centroids.len();
    let dims = rows[0].len();
    let mut labels = assign(rows, &centroids);
    for _ in 0..MAX_ITERATIONS {
        let mut sums = vec![vec![0.0; dims]; k];
        let mut counts = vec![0usize; k];
        for (r, &l) in rows.iter().zip(&labels) {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(r) {
                *s += x;
            }
        }
        // an emptied cluster takes the point farthest from its current centroid
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let far = (0..rows.len())
                .filter(|&i| counts[labels[i]] > 1)
                .max_by(|&a, &b| {
                    sq_dist(&rows[a], &centroids[labels[a]])
                        .total_cmp(&sq_dist(&rows[b], &centroids[labels[b]]))
                        .then(b.cmp(&a))
                })
                .expect("some cluster has more than one point");
            let old = labels[far];
            counts[old] -= 1;
            for (s, x) in sums[old].iter_mut().zip(&rows[far]) {
                *s -= x;
            }
            labels[far] = c;
            counts[c] = 1;
            sums[c] = rows[far].clone();
        }
        let updated: Vec<Vec<f64>> = sums
            .iter()
            .zip(&counts)
            .map(|(s, &n)| s.iter().map(|x| x / n as f64).collect())
            .collect();
        let shift = centroids
            .iter()
            .zip(&updated)
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = updated;
        let relabeled = assign(rows, &centroids);
        let stable = relabeled == labels;
        labels = relabeled;
        if shift < SHIFT_TOLERANCE || stable {
            break;
        }
    }
    let wcss = rows
        .iter()
        .zip(&labels)
        .map(|(r, &l)| sq_dist(r, &centroids[l]))
        .sum();
    KMeansFit {
        labels,
        centroids,
        wcss,
    }
}

/// Renumbers clusters by order of first appearance.
fn canonicalize(fit: KMeansFit) -> KMeansFit {
    let k = fit.centroids.len();
    let mut map = vec![usize::MAX; k];
    let mut next = 0;
    for &l in &fit.labels {
        if map[l] == usize::MAX {
            map[l] = next;
            next += 1;
        }
    }
    let mut centroids = vec![Vec::new(); next];
    for (old, &new) in map.iter().enumerate() {
        if new != usize::MAX {
            centroids[new] = fit.centroids[old].clone();
        }
    }
    KMeansFit {
        labels: fit.labels.iter().map(|&l| map[l]).collect(),
        centroids,
        wcss: fit.wcss,
    }
}
