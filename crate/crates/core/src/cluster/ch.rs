use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Calinski-Harabasz score: `(B / (k-1)) / (W / (n-k))` with B and W the
/// between- and within-cluster sums of squares. `+inf` when W is zero and B
/// is not; 0 when all centroids coincide.
pub fn calinski_harabasz(points: &DMatrix<f64>, labels: &[usize]) -> Result<f64> {
    let n = points.nrows();
    if labels.len() != n {
        return Err(Error::invalid(format!(
            "{} labels for {n} points",
            labels.len()
        )));
    }
    let k = labels.iter().max().map_or(0, |&m| m + 1);
    if k < 2 {
        return Err(Error::invalid("Calinski-Harabasz needs at least 2 clusters"));
    }
    if n <= k {
        return Err(Error::invalid(format!(
            "Calinski-Harabasz needs more points ({n}) than clusters ({k})"
        )));
    }
    let dims = points.ncols();
    let mut counts = vec![0usize; k];
    let mut centroids = DMatrix::<f64>::zeros(k, dims);
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        let mut row = centroids.row_mut(l);
        row += points.row(i);
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(Error::invalid(format!("cluster {empty} is empty")));
    }
    for (l, &c) in counts.iter().enumerate() {
        centroids.row_mut(l).unscale_mut(c as f64);
    }
    let overall = points.row_sum() / n as f64;

    let between: f64 = (0..k)
        .map(|l| counts[l] as f64 * (centroids.row(l) - &overall).norm_squared())
        .sum();
    let within: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, &l)| (points.row(i) - centroids.row(l)).norm_squared())
        .sum();
    if between == 0.0 {
        return Ok(0.0);
    }
    if within == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((between / (k - 1) as f64) / (within / (n - k) as f64))
}
