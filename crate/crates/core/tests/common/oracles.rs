//! Independent reference computations used by unit, integration and acceptance
//! tests. Only std is used so these never share code paths with the library.

#![allow(dead_code)]

/// Exact binomial coefficient in 128-bit integers (n ≤ 120 is safe).
pub fn choose(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Two-sided Fisher p by enumerating every table with the observed margins and
/// comparing integer point weights exactly.
pub fn fisher_enumeration(n11: u64, n10: u64, n01: u64, n00: u64) -> f64 {
    let row1 = n11 + n10;
    let row2 = n01 + n00;
    let col1 = n11 + n01;
    let n = row1 + row2;
    let weight = |x: u64| choose(row1, x) * choose(row2, col1 - x);
    let observed = weight(n11);
    let lo = col1.saturating_sub(row2);
    let hi = row1.min(col1);
    let mut numer: u128 = 0;
    for x in lo..=hi {
        let w = weight(x);
        if w <= observed {
            numer += w;
        }
    }
    numer as f64 / choose(n, col1) as f64
}

/// `min(1, 2 * P(X >= k))` for X ~ Binomial(n, 1/2), from exact integer tail sums.
pub fn binomial_doubled_tail(n: u64, k: u64) -> f64 {
    let tail: u128 = (k..=n).map(|j| choose(n, j)).sum();
    let p = 2.0 * tail as f64 / 2f64.powi(n as i32);
    p.min(1.0)
}

/// Minimum path weight between every pair of nodes by enumerating all simple
/// paths. `adj[i][j]` is the edge weight or `None`.
pub fn all_pairs_by_enumeration(adj: &[Vec<Option<f64>>]) -> Vec<Vec<Option<f64>>> {
    let n = adj.len();
    let mut best = vec![vec![None; n]; n];
    for s in 0..n {
        best[s][s] = Some(0.0);
        let mut visited = vec![false; n];
        visited[s] = true;
        explore(adj, s, 0.0, &mut visited, &mut best[s]);
    }
    best
}

fn explore(adj: &[Vec<Option<f64>>], at: usize, dist: f64, visited: &mut [bool], best: &mut [Option<f64>]) {
    for next in 0..adj.len() {
        if visited[next] {
            continue;
        }
        if let Some(w) = adj[at][next] {
            let d = dist + w;
            if best[next].map_or(true, |b| d < b) {
                best[next] = Some(d);
            }
            visited[next] = true;
            explore(adj, next, d, visited, best);
            visited[next] = false;
        }
    }
}

/// Adjusted Rand index by explicit enumeration of all point pairs.
pub fn ari_by_pairs(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let (mut both, mut only_a, mut only_b, mut neither) = (0f64, 0f64, 0f64, 0f64);
    for i in 0..n {
        for j in (i + 1)..n {
            match (a[i] == a[j], b[i] == b[j]) {
                (true, true) => both += 1.0,
                (true, false) => only_a += 1.0,
                (false, true) => only_b += 1.0,
                (false, false) => neither += 1.0,
            }
        }
    }
    let total = both + only_a + only_b + neither;
    let expected = (both + only_a) * (both + only_b) / total;
    let max = ((both + only_a) + (both + only_b)) / 2.0;
    if max == expected {
        return 1.0;
    }
    (both - expected) / (max - expected)
}

/// Best k-way partition of `points` (rows) by exhaustive search over label
/// assignments; returns (labels, within-cluster sum of squares).
pub fn best_partition(points: &[Vec<f64>], k: usize) -> (Vec<usize>, f64) {
    let n = points.len();
    let mut labels = vec![0usize; n];
    let mut best: (Vec<usize>, f64) = (Vec::new(), f64::INFINITY);
    loop {
        // canonical: labels appear in first-use order and all k are used
        let mut next_new = 0;
        let mut canonical = true;
        for &l in &labels {
            if l > next_new {
                canonical = false;
                break;
            }
            if l == next_new {
                next_new += 1;
            }
        }
        if canonical && next_new == k {
            let w = wcss(points, &labels, k);
            if w < best.1 {
                best = (labels.clone(), w);
            }
        }
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            labels[i] += 1;
            if labels[i] < k {
                break;
            }
            labels[i] = 0;
        }
    }
}

pub fn wcss(points: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
    let dims = points[0].len();
    let mut total = 0.0;
    for c in 0..k {
        let members: Vec<&Vec<f64>> = points
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == c)
            .map(|(p, _)| p)
            .collect();
        if members.is_empty() {
            continue;
        }
        for d in 0..dims {
            let mean = members.iter().map(|p| p[d]).sum::<f64>() / members.len() as f64;
            total += members.iter().map(|p| (p[d] - mean).powi(2)).sum::<f64>();
        }
    }
    total
}

/// Sample mean and (n−1) standard deviation computed in two passes.
pub fn mean_sd(xs: &[f64]) -> (f64, Option<f64>) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = (xs.len() > 1)
        .then(|| (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt());
    (mean, sd)
}
