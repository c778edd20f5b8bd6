//! Column standardisation and Lloyd's K-means.

use nalgebra::DMatrix;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding::{derive_seed, rng_from_seed, Rng};

/// Data with every column centred and scaled to unit sample standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedMatrix {
    values: DMatrix<f64>,
    column_means: Vec<f64>,
    column_sds: Vec<f64>,
    constant_columns: Vec<usize>,
}

impl StandardizedMatrix {
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn column_means(&self) -> &[f64] {
        &self.column_means
    }

    /// Sample standard deviations; constant columns report 1.
    pub fn column_sds(&self) -> &[f64] {
        &self.column_sds
    }

    pub fn constant_columns(&self) -> &[usize] {
        &self.constant_columns
    }
}

/// Centres each column and divides by its sample (n−1) standard deviation.
///
/// Constant columns become all zeros with their sd recorded as 1.
pub fn standardize(data: &DMatrix<f64>) -> Result<StandardizedMatrix> {
    let n = data.nrows();
    if n < 2 {
        return Err(Error::TooFewRows(n));
    }
    let d = data.ncols();
    let mut values = data.clone();
    let mut column_means = Vec::with_capacity(d);
    let mut column_sds = Vec::with_capacity(d);
    let mut constant_columns = Vec::new();
    for j in 0..d {
        let mean = data.column(j).mean();
        let ss: f64 = data.column(j).iter().map(|v| (v - mean).powi(2)).sum();
        let sd = (ss / (n - 1) as f64).sqrt();
        // Columns whose spread is lost in rounding relative to their level count as constant.
        let scale = data.column(j).amax().max(f64::MIN_POSITIVE);
        if sd <= 1e-13 * scale {
            constant_columns.push(j);
            column_means.push(mean);
            column_sds.push(1.0);
            values.column_mut(j).fill(0.0);
            continue;
        }
        values.column_mut(j).iter_mut().for_each(|v| *v = (*v - mean) / sd);
        column_means.push(mean);
        column_sds.push(sd);
    }
    if !constant_columns.is_empty() {
        log::warn!("constant column(s) {constant_columns:?} mapped to zero");
    }
    Ok(StandardizedMatrix {
        values,
        column_means,
        column_sds,
        constant_columns,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Seeding {
    /// D²-weighted sampling of initial centroids.
    PlusPlus,
    /// K distinct data points drawn uniformly.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KmeansConfig {
    pub seed: u64,
    pub restarts: usize,
    pub max_iter: usize,
    /// Largest centroid displacement regarded as stationary.
    pub tol: f64,
    pub seeding: Seeding,
}

impl Default for KmeansConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            restarts: 10,
            max_iter: 100,
            tol: 1e-8,
            seeding: Seeding::PlusPlus,
        }
    }
}

/// One K-means solution. Labels are zero-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub labels: Vec<usize>,
    /// Row-major `k × d` centroids.
    pub centroids: Vec<Vec<f64>>,
    pub sizes: Vec<usize>,
    pub wcss: f64,
    pub iterations: usize,
    pub converged: bool,
    /// WCSS after every update step of the winning run.
    pub wcss_trace: Vec<f64>,
}

impl Partition {
    pub fn k(&self) -> usize {
        self.sizes.len()
    }
}

/// Row-major copy of a matrix, the layout every hot loop here iterates over.
pub(crate) struct Points {
    pub data: Vec<f64>,
    pub n: usize,
    pub d: usize,
}

impl Points {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let (n, d) = m.shape();
        let mut data = Vec::with_capacity(n * d);
        for i in 0..n {
            data.extend(m.row(i).iter());
        }
        Self { data, n, d }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Best of `config.restarts` Lloyd runs, by lowest WCSS.
pub fn kmeans_fit(data: &DMatrix<f64>, k: usize, config: &KmeansConfig) -> Result<Partition> {
    let n = data.nrows();
    if k == 0 || k > n {
        return Err(Error::KOutOfRange { k, n });
    }
    let points = Points::from_matrix(data);
    let mut best: Option<Partition> = None;
    for restart in 0..config.restarts.max(1) {
        let mut rng = rng_from_seed(derive_seed(config.seed, &[restart as u64]));
        let init = match config.seeding {
            Seeding::PlusPlus => plus_plus_init(&points, k, &mut rng),
            Seeding::Random => random_init(&points, k, &mut rng),
        };
        let run = lloyd(&points, init, config)?;
        if best.as_ref().is_none_or(|b| run.wcss < b.wcss) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn plus_plus_init(points: &Points, k: usize, rng: &mut Rng) -> Vec<f64> {
    let n = points.n;
    let mut centroids = Vec::with_capacity(k * points.d);
    let first = rng.random_range(0..n);
    centroids.extend_from_slice(points.row(first));
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist(points.row(i), points.row(first))).collect();
    for _ in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in nearest.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = points.row(pick).to_vec();
        for (i, near) in nearest.iter_mut().enumerate() {
            *near = near.min(sq_dist(points.row(i), &c));
        }
        centroids.extend_from_slice(&c);
    }
    centroids
}

fn random_init(points: &Points, k: usize, rng: &mut Rng) -> Vec<f64> {
    let mut centroids = Vec::with_capacity(k * points.d);
    for i in rand::seq::index::sample(rng, points.n, k) {
        centroids.extend_from_slice(points.row(i));
    }
    centroids
}

/// Nearest centroid for every point; ties go to the lowest index.
fn assign(points: &Points, centroids: &[f64], k: usize, labels: &mut [usize], dists: &mut [f64]) {
    let d = points.d;
    for i in 0..points.n {
        let x = points.row(i);
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for c in 0..k {
            let dist = sq_dist(x, &centroids[c * d..(c + 1) * d]);
            if dist < best_d {
                best_d = dist;
                best = c;
            }
        }
        labels[i] = best;
        dists[i] = best_d;
    }
}

/// Moves the point farthest from its centroid into each empty cluster. Donors
/// must come from clusters holding at least two points.
fn fill_empty(k: usize, labels: &mut [usize], dists: &mut [f64]) -> Result<()> {
    let mut sizes = vec![0usize; k];
    for &l in labels.iter() {
        sizes[l] += 1;
    }
    for c in 0..k {
        if sizes[c] > 0 {
            continue;
        }
        let donor = (0..labels.len())
            .filter(|&i| sizes[labels[i]] > 1)
            .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
            .ok_or(Error::EmptyClusterUnrecoverable)?;
        sizes[labels[donor]] -= 1;
        labels[donor] = c;
        dists[donor] = 0.0;
        sizes[c] = 1;
    }
    Ok(())
}

fn update(points: &Points, labels: &[usize], k: usize) -> (Vec<f64>, Vec<usize>) {
    let d = points.d;
    let mut centroids = vec![0.0; k * d];
    let mut sizes = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        sizes[l] += 1;
        for (c, x) in centroids[l * d..(l + 1) * d].iter_mut().zip(points.row(i)) {
            *c += x;
        }
    }
    for (c, &s) in sizes.iter().enumerate() {
        centroids[c * d..(c + 1) * d].iter_mut().for_each(|v| *v /= s as f64);
    }
    (centroids, sizes)
}

fn wcss(points: &Points, labels: &[usize], centroids: &[f64]) -> f64 {
    let d = points.d;
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| sq_dist(points.row(i), &centroids[l * d..(l + 1) * d]))
        .sum()
}

fn lloyd(points: &Points, init: Vec<f64>, config: &KmeansConfig) -> Result<Partition> {
    let (n, d) = (points.n, points.d);
    let k = init.len() / d.max(1);
    let mut centroids = init;
    let mut labels = vec![0usize; n];
    let mut dists = vec![0.0; n];
    assign(points, &centroids, k, &mut labels, &mut dists);
    fill_empty(k, &mut labels, &mut dists)?;

    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut sizes;
    let mut next = vec![0usize; n];
    loop {
        iterations += 1;
        let (new_centroids, new_sizes) = update(points, &labels, k);
        let movement = centroids
            .chunks(d.max(1))
            .zip(new_centroids.chunks(d.max(1)))
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = new_centroids;
        sizes = new_sizes;
        trace.push(wcss(points, &labels, &centroids));
        if movement < config.tol {
            converged = true;
            break;
        }
        if iterations >= config.max_iter {
            break;
        }
        assign(points, &centroids, k, &mut next, &mut dists);
        fill_empty(k, &mut next, &mut dists)?;
        if next == labels {
            converged = true;
            break;
        }
        std::mem::swap(&mut labels, &mut next);
    }
    Ok(Partition {
        labels,
        centroids: centroids.chunks(d.max(1)).map(<[f64]>::to_vec).collect(),
        sizes,
        wcss: *trace.last().expect("at least one update"),
        iterations,
        converged,
        wcss_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four_points() -> DMatrix<f64> {
        DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 0.0, 1.0, 10.0, 0.0, 10.0, 1.0])
    }

    #[test]
    fn standardize_examples() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 5.0, 2.0, 5.0, 3.0, 5.0]);
        let s = standardize(&m).unwrap();
        assert_eq!(s.values().column(0).iter().copied().collect::<Vec<_>>(), vec![-1.0, 0.0, 1.0]);
        assert_eq!(s.values().column(1).iter().copied().collect::<Vec<_>>(), vec![0.0; 3]);
        assert_eq!(s.column_sds()[1], 1.0);
        assert_eq!(s.constant_columns(), &[1]);

        let m = DMatrix::from_row_slice(2, 1, &[0.0, 10.0]);
        let s = standardize(&m).unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert!((s.values()[(0, 0)] + h).abs() < 1e-15);
        assert!((s.values()[(1, 0)] - h).abs() < 1e-15);
        assert!((s.column_sds()[0] - 10.0 / 2f64.sqrt()).abs() < 1e-12);

        assert_eq!(standardize(&DMatrix::zeros(1, 2)), Err(Error::TooFewRows(1)));
    }

    #[test]
    fn four_point_instance() {
        let p = kmeans_fit(&four_points(), 2, &KmeansConfig::default()).unwrap();
        assert_eq!(p.labels[0], p.labels[1]);
        assert_eq!(p.labels[2], p.labels[3]);
        assert_ne!(p.labels[0], p.labels[2]);
        assert!((p.wcss - 1.0).abs() < 1e-12);
        let mut cents = p.centroids.clone();
        cents.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert_eq!(cents, vec![vec![0.0, 0.5], vec![10.0, 0.5]]);
    }

    #[test]
    fn k_equal_one_and_n() {
        let data = four_points();
        let one = kmeans_fit(&data, 1, &KmeansConfig::default()).unwrap();
        assert_eq!(one.centroids, vec![vec![5.0, 0.5]]);
        assert!((one.wcss - 101.0).abs() < 1e-12);

        let all = kmeans_fit(&data, 4, &KmeansConfig::default()).unwrap();
        assert_eq!(all.sizes, vec![1; 4]);
        assert_eq!(all.wcss, 0.0);

        assert_eq!(
            kmeans_fit(&data, 5, &KmeansConfig::default()),
            Err(Error::KOutOfRange { k: 5, n: 4 })
        );
        assert!(kmeans_fit(&data, 0, &KmeansConfig::default()).is_err());
    }

    #[test]
    fn duplicate_points_still_fill_every_cluster() {
        let data = DMatrix::from_row_slice(5, 1, &[1.0, 1.0, 1.0, 1.0, 2.0]);
        for seeding in [Seeding::PlusPlus, Seeding::Random] {
            let cfg = KmeansConfig { seeding, ..Default::default() };
            let p = kmeans_fit(&data, 3, &cfg).unwrap();
            assert!(p.sizes.iter().all(|&s| s >= 1));
            assert_eq!(p.sizes.iter().sum::<usize>(), 5);
        }
    }

    #[test]
    fn fill_empty_takes_farthest_point() {
        let mut labels = vec![0, 0, 0, 1];
        let mut dists = vec![0.1, 5.0, 0.2, 0.0];
        fill_empty(3, &mut labels, &mut dists).unwrap();
        assert_eq!(labels, vec![0, 2, 0, 1]);
    }
}
