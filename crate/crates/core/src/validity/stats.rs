//! Dispersion matrices, pair counts and pairwise-distance summaries shared by
//! the validity indices.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::kmeans::Points;

/// Aggregates of all pairwise Euclidean distances, split by cluster membership.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseSummary {
    /// `min_between[(k, l)]`: closest pair across clusters k and l (δ₁).
    pub min_between: DMatrix<f64>,
    /// Farthest pair across clusters (δ₂).
    pub max_between: DMatrix<f64>,
    /// Sum of all cross-cluster distances.
    pub sum_between: DMatrix<f64>,
    /// Largest distance between two distinct points of a cluster (Δ₁); 0 for singletons.
    pub diameter: Vec<f64>,
    /// Sum over unordered within-cluster pairs.
    pub sum_within: Vec<f64>,
    /// Row-major `n × k`: sum of distances from point i to the points of cluster k.
    pub point_to_cluster: Vec<f64>,
}

impl PairwiseSummary {
    /// Total distance over unordered within-cluster pairs.
    pub fn total_within(&self) -> f64 {
        self.sum_within.iter().sum()
    }

    /// Total distance over unordered cross-cluster pairs.
    pub fn total_between(&self) -> f64 {
        let k = self.sum_between.nrows();
        let mut s = 0.0;
        for a in 0..k {
            for b in a + 1..k {
                s += self.sum_between[(a, b)];
            }
        }
        s
    }
}

/// Preliminary quantities for one partition of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterStats {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    /// Zero-based cluster of each row.
    pub labels: Vec<usize>,
    pub sizes: Vec<usize>,
    pub grand_mean: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    /// T
    pub total_scatter: DMatrix<f64>,
    /// WC_k
    pub within_scatter: Vec<DMatrix<f64>>,
    /// WC = Σ WC_k
    pub pooled_within: DMatrix<f64>,
    /// BC = Σ n_k (μ_k − μ)(μ_k − μ)ᵀ
    pub between_scatter: DMatrix<f64>,
    pub tss: f64,
    pub wcss: f64,
    pub bcss: f64,
    pub tss_per_var: Vec<f64>,
    pub bcss_per_var: Vec<f64>,
    pub n_t: u64,
    pub n_w: u64,
    pub n_b: u64,
    /// δ_k: mean distance of cluster members to their centroid.
    pub mean_dist_to_centroid: Vec<f64>,
    pub sum_dist_to_centroid: Vec<f64>,
    pub sum_dist_to_grand_mean: f64,
    /// Δ_kk' = ‖μ_k − μ_k'‖
    pub centroid_distances: DMatrix<f64>,
    pub pairs: PairwiseSummary,
}

/// Number of clusters implied by zero-based labels.
pub fn cluster_count(labels: &[usize]) -> usize {
    labels.iter().max().map_or(0, |m| m + 1)
}

pub fn cluster_statistics(data: &DMatrix<f64>, labels: &[usize]) -> Result<ClusterStats> {
    let (n, d) = data.shape();
    if labels.len() != n {
        return Err(Error::LengthMismatch {
            labels: labels.len(),
            rows: n,
        });
    }
    let k = cluster_count(labels);
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    if let Some(empty) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::EmptyCluster(empty));
    }
    let points = Points::from_matrix(data);

    let mut grand_mean = vec![0.0; d];
    let mut means = vec![vec![0.0; d]; k];
    for i in 0..n {
        for (j, &x) in points.row(i).iter().enumerate() {
            grand_mean[j] += x;
            means[labels[i]][j] += x;
        }
    }
    grand_mean.iter_mut().for_each(|v| *v /= n as f64);
    for (m, &s) in means.iter_mut().zip(&sizes) {
        m.iter_mut().for_each(|v| *v /= s as f64);
    }

    let mut total_scatter = DMatrix::zeros(d, d);
    let mut within_scatter = vec![DMatrix::zeros(d, d); k];
    let mut sum_dist_to_centroid = vec![0.0; k];
    let mut sum_dist_to_grand_mean = 0.0;
    let mut dev = vec![0.0; d];
    let mut dev_k = vec![0.0; d];
    for i in 0..n {
        let x = points.row(i);
        let c = labels[i];
        for j in 0..d {
            dev[j] = x[j] - grand_mean[j];
            dev_k[j] = x[j] - means[c][j];
        }
        let wk = &mut within_scatter[c];
        for a in 0..d {
            for b in 0..d {
                total_scatter[(a, b)] += dev[a] * dev[b];
                wk[(a, b)] += dev_k[a] * dev_k[b];
            }
        }
        sum_dist_to_centroid[c] += norm(&dev_k);
        sum_dist_to_grand_mean += norm(&dev);
    }
    let mut pooled_within = DMatrix::zeros(d, d);
    for w in &within_scatter {
        pooled_within += w;
    }
    let mut between_scatter = DMatrix::zeros(d, d);
    for (m, &s) in means.iter().zip(&sizes) {
        for a in 0..d {
            for b in 0..d {
                between_scatter[(a, b)] +=
                    s as f64 * (m[a] - grand_mean[a]) * (m[b] - grand_mean[b]);
            }
        }
    }
    let tss_per_var: Vec<f64> = (0..d).map(|j| total_scatter[(j, j)]).collect();
    let bcss_per_var: Vec<f64> = (0..d).map(|j| between_scatter[(j, j)]).collect();

    let n_t = (n as u64) * (n as u64 - 1) / 2;
    let n_w: u64 = sizes.iter().map(|&s| (s as u64) * (s as u64 - 1) / 2).sum();
    let mut n_b = 0u64;
    for a in 0..k {
        for b in a + 1..k {
            n_b += sizes[a] as u64 * sizes[b] as u64;
        }
    }

    let mean_dist_to_centroid = sum_dist_to_centroid
        .iter()
        .zip(&sizes)
        .map(|(s, &m)| s / m as f64)
        .collect();
    let centroid_distances =
        DMatrix::from_fn(k, k, |a, b| norm_diff(&means[a], &means[b]));

    Ok(ClusterStats {
        n,
        d,
        k,
        tss: total_scatter.trace(),
        wcss: pooled_within.trace(),
        bcss: between_scatter.trace(),
        sizes,
        grand_mean,
        means,
        total_scatter,
        within_scatter,
        pooled_within,
        between_scatter,
        tss_per_var,
        bcss_per_var,
        n_t,
        n_w,
        n_b,
        mean_dist_to_centroid,
        sum_dist_to_centroid,
        sum_dist_to_grand_mean,
        centroid_distances,
        pairs: pairwise_summary(&points, labels, k),
        labels: labels.to_vec(),
    })
}

fn pairwise_summary(points: &Points, labels: &[usize], k: usize) -> PairwiseSummary {
    let n = points.n;
    let mut min_between = DMatrix::from_element(k, k, f64::INFINITY);
    let mut max_between = DMatrix::zeros(k, k);
    let mut sum_between = DMatrix::zeros(k, k);
    let mut diameter = vec![0.0; k];
    let mut sum_within = vec![0.0; k];
    let mut point_to_cluster = vec![0.0; n * k];
    for i in 0..n {
        let xi = points.row(i);
        let ci = labels[i];
        for j in i + 1..n {
            let dist = norm_diff(xi, points.row(j));
            let cj = labels[j];
            point_to_cluster[i * k + cj] += dist;
            point_to_cluster[j * k + ci] += dist;
            if ci == cj {
                sum_within[ci] += dist;
                if dist > diameter[ci] {
                    diameter[ci] = dist;
                }
            } else {
                let (a, b) = if ci < cj { (ci, cj) } else { (cj, ci) };
                sum_between[(a, b)] += dist;
                if dist < min_between[(a, b)] {
                    min_between[(a, b)] = dist;
                }
                if dist > max_between[(a, b)] {
                    max_between[(a, b)] = dist;
                }
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            min_between[(a, b)] = min_between[(b, a)];
            max_between[(a, b)] = max_between[(b, a)];
            sum_between[(a, b)] = sum_between[(b, a)];
        }
    }
    PairwiseSummary {
        min_between,
        max_between,
        sum_between,
        diameter,
        sum_within,
        point_to_cluster,
    }
}

#[inline]
fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[inline]
fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    crate::kmeans::sq_dist(a, b).sqrt()
}
