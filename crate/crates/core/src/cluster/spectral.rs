use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::trajnet::SimilarityMatrix;

const EIGEN_TOLERANCE: f64 = 1e-9;
const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Spectral coordinates of each trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    /// `n × k`, rows normalized to unit length (zero rows stay zero).
    pub points: DMatrix<f64>,
    /// Rows with zero affinity to every point; embedded at the origin.
    pub isolated: Vec<usize>,
}

/// Embeds each point as its row in the eigenvectors of the `k` smallest
/// eigenvalues of the symmetric normalized Laplacian `I - D^-1/2 A D^-1/2`.
///
/// The null space of the Laplacian is spanned by one degree-weighted indicator
/// per connected component, so those columns are built directly (largest
/// component first) rather than taken from the solver, whose basis for a
/// repeated zero eigenvalue is arbitrary. The remaining eigenvector signs are
/// fixed so the largest-magnitude component is positive.
pub fn spectral_embed(affinity: &SimilarityMatrix, k: usize) -> Result<Embedding> {
    let n = affinity.order();
    if k < 2 {
        return Err(Error::invalid(format!("spectral embedding needs k >= 2, got {k}")));
    }
    if n < k {
        return Err(Error::invalid(format!(
            "spectral embedding of {n} points into {k} dimensions"
        )));
    }
    if !affinity.is_symmetric(SYMMETRY_TOLERANCE) {
        return Err(Error::invalid("affinity matrix is not symmetric"));
    }
    if (0..n).any(|i| affinity.row(i).iter().any(|&v| !(v >= 0.0) || !v.is_finite())) {
        return Err(Error::invalid("affinity entries must be finite and non-negative"));
    }

    let degree: Vec<f64> = (0..n).map(|i| affinity.row(i).iter().sum()).collect();
    let isolated: Vec<usize> = (0..n).filter(|&i| degree[i] == 0.0).collect();
    if !isolated.is_empty() {
        log::warn!("{} isolated point(s) embedded at the origin", isolated.len());
    }
    let scale: Vec<f64> = degree
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();
    let laplacian = DMatrix::from_fn(n, n, |i, j| {
        let a = 0.5 * (affinity.get(i, j) + affinity.get(j, i));
        let normalized = a * (scale[i] * scale[j]);
        if i == j { 1.0 - normalized } else { -normalized }
    });

    let eigen = SymmetricEigen::try_new(laplacian, EIGEN_TOLERANCE, 0)
        .ok_or_else(|| Error::invalid("eigen-decomposition did not converge"))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eigen.eigenvalues[a]
            .total_cmp(&eigen.eigenvalues[b])
            .then(a.cmp(&b))
    });

    let components = components(affinity, &degree);
    let mut points = DMatrix::zeros(n, k);
    for (col, members) in components.iter().take(k).enumerate() {
        let mass: f64 = members.iter().map(|&i| degree[i]).sum();
        for &i in members {
            points[(i, col)] = (degree[i] / mass).sqrt();
        }
    }
    let null_dim = components.len().min(k);
    for (col, &which) in order.iter().enumerate().take(k).skip(null_dim) {
        let v = eigen.eigenvectors.column(which);
        let mut pivot = 0;
        for i in 1..n {
            if v[i].abs() > v[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            points[(i, col)] = sign * v[i];
        }
    }
    for i in 0..n {
        if isolated.contains(&i) {
            points.row_mut(i).fill(0.0);
            continue;
        }
        let norm = points.row(i).norm();
        if norm > 0.0 {
            points.row_mut(i).unscale_mut(norm);
        }
    }
    Ok(Embedding { points, isolated })
}

/// Connected components of the points with positive degree, largest first,
/// ties broken by smallest member.
fn components(affinity: &SimilarityMatrix, degree: &[f64]) -> Vec<Vec<usize>> {
    let n = affinity.order();
    let mut component = vec![usize::MAX; n];
    let mut found: Vec<Vec<usize>> = Vec::new();
    for start in 0..n {
        if degree[start] == 0.0 || component[start] != usize::MAX {
            continue;
        }
        let id = found.len();
        component[start] = id;
        let mut members = vec![start];
        let mut next = 0;
        while next < members.len() {
            let i = members[next];
            next += 1;
            for j in 0..n {
                if component[j] == usize::MAX && (affinity.get(i, j) > 0.0 || affinity.get(j, i) > 0.0) {
                    component[j] = id;
                    members.push(j);
                }
            }
        }
        members.sort_unstable();
        found.push(members);
    }
    found.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    found
}
