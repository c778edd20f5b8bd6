//! EM estimation of Gaussian parsimonious clustering models (GPCMs).
//!
//! Component covariances are parameterised as `Σ_k = λ_k D_k A_k D_kᵀ` with
//! volume `λ_k`, orientation `D_k` and unit-determinant diagonal shape `A_k`;
//! each of the 14 [`GpcmModelId`]s holds some of these equal across
//! components or fixes them to the identity.

mod estep;
mod model;
mod mstep;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use model::{n_params, n_params_by_name, parse_model_list, Constraint, GpcmModelId, ALL_MODELS};

use crate::error::{Error, Result};
use crate::kmeans::{kmeans_fit, KmeansConfig, Partition, Points};
use crate::seeding::derive_seed;
use mstep::Floor;

/// Starts that need the covariance floor on more consecutive iterations than
/// this are abandoned.
const MAX_FLOORED_ITERATIONS: usize = 5;
const FLOOR_SCALE: f64 = 1e-10;

/// Mixture parameters between EM steps.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureParams {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<DMatrix<f64>>,
    /// Shared orientation of EVE and VVE fits, reused to warm-start the next M-step.
    pub orientation: Option<DMatrix<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub seed: u64,
    pub n_starts: usize,
    pub max_iter: usize,
    pub rel_tol: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_starts: 5,
            max_iter: 500,
            rel_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpcmFit {
    pub model: GpcmModelId,
    pub k: usize,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<DMatrix<f64>>,
    /// `n × K`, rows sum to one.
    pub responsibilities: DMatrix<f64>,
    pub loglik: f64,
    pub n_params: usize,
    pub bic: f64,
    /// M-steps performed after initialisation.
    pub iterations: usize,
    pub converged: bool,
    /// Observed log-likelihood after initialisation and after every iteration.
    pub loglik_trace: Vec<f64>,
    /// Index of the winning start.
    pub start: usize,
}

impl GpcmFit {
    pub fn params(&self) -> MixtureParams {
        MixtureParams {
            weights: self.weights.clone(),
            means: self.means.clone(),
            covariances: self.covariances.clone(),
            orientation: None,
        }
    }

    pub fn n(&self) -> usize {
        self.responsibilities.nrows()
    }
}

/// Responsibilities and observed log-likelihood.
pub fn e_step(data: &DMatrix<f64>, params: &MixtureParams) -> Result<(DMatrix<f64>, f64)> {
    estep::e_step_points(&Points::from_matrix(data), params)
}

/// Log mixture density at each row of `data`.
pub fn log_density(data: &DMatrix<f64>, params: &MixtureParams) -> Result<Vec<f64>> {
    estep::log_density_points(&Points::from_matrix(data), params)
}

/// Parameter update from responsibilities, starting the iterative covariance
/// estimators from scratch.
pub fn m_step(data: &DMatrix<f64>, resp: &DMatrix<f64>, model: GpcmModelId) -> Result<MixtureParams> {
    m_step_from(data, resp, model, None)
}

/// Parameter update warm-started from `previous`.
pub fn m_step_from(
    data: &DMatrix<f64>,
    resp: &DMatrix<f64>,
    model: GpcmModelId,
    previous: Option<&MixtureParams>,
) -> Result<MixtureParams> {
    let points = Points::from_matrix(data);
    let mut floor = Floor::new(covariance_floor(&points));
    mstep::m_step_points(&points, resp, model, previous, &mut floor)
}

/// `1e-10 · tr(S) / d` for the ML covariance `S` of the data.
fn covariance_floor(points: &Points) -> f64 {
    let (n, d) = (points.n, points.d);
    let mut mean = vec![0.0; d];
    for i in 0..n {
        mean.iter_mut().zip(points.row(i)).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut tr = 0.0;
    for i in 0..n {
        tr += crate::kmeans::sq_dist(points.row(i), &mean);
    }
    let v = FLOOR_SCALE * tr / (n as f64 * d as f64);
    if v > 0.0 {
        v
    } else {
        FLOOR_SCALE
    }
}

pub fn bic_value(loglik: f64, n_params: usize, n: usize) -> f64 {
    2.0 * loglik - n_params as f64 * (n as f64).ln()
}

/// `2ℓ − ν ln n`; larger is better.
pub fn bic(fit: &GpcmFit) -> f64 {
    bic_value(fit.loglik, fit.n_params, fit.n())
}

/// Zero-based MAP labels; ties go to the lowest component.
pub fn map_labels(resp: &DMatrix<f64>) -> Vec<usize> {
    resp.row_iter()
        .map(|row| {
            let mut best = 0;
            for (c, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

pub fn map_assign(fit: &GpcmFit) -> Vec<usize> {
    map_labels(&fit.responsibilities)
}

fn hard_responsibilities(labels: &[usize], k: usize) -> DMatrix<f64> {
    let mut r = DMatrix::zeros(labels.len(), k);
    for (i, &l) in labels.iter().enumerate() {
        r[(i, l)] = 1.0;
    }
    r
}

/// One single-restart K-means partition per start; these seed every model
/// fitted with the same `k` and `config`.
pub fn initial_partitions(data: &DMatrix<f64>, k: usize, config: &EmConfig) -> Vec<Result<Partition>> {
    (0..config.n_starts)
        .map(|s| {
            let km = KmeansConfig {
                seed: derive_seed(config.seed, &[s as u64]),
                restarts: 1,
                ..KmeansConfig::default()
            };
            kmeans_fit(data, k, &km)
        })
        .collect()
}

/// Best-likelihood fit over `config.n_starts` K-means initialisations.
pub fn em_fit(data: &DMatrix<f64>, k: usize, model: GpcmModelId, config: &EmConfig) -> Result<GpcmFit> {
    check_size(data, k)?;
    let inits = initial_partitions(data, k, config);
    em_fit_from(data, k, model, config, &inits)
}

fn check_size(data: &DMatrix<f64>, k: usize) -> Result<()> {
    let n = data.nrows();
    if k == 0 || n <= k {
        return Err(Error::TooFewObservations { n, k });
    }
    Ok(())
}

/// As [`em_fit`], from precomputed initial partitions.
pub fn em_fit_from(
    data: &DMatrix<f64>,
    k: usize,
    model: GpcmModelId,
    config: &EmConfig,
    inits: &[Result<Partition>],
) -> Result<GpcmFit> {
    check_size(data, k)?;
    let points = Points::from_matrix(data);
    let floor = covariance_floor(&points);
    let mut best: Option<GpcmFit> = None;
    let mut failures = Vec::new();
    for (start, init) in inits.iter().enumerate() {
        let outcome = init
            .clone()
            .and_then(|p| run_start(&points, &p.labels, k, model, config, floor, start));
        match outcome {
            Ok(fit) => {
                if best.as_ref().is_none_or(|b| fit.loglik > b.loglik) {
                    best = Some(fit);
                }
            }
            Err(e) => {
                log::debug!("{model} K={k} start {start} failed: {e}");
                failures.push(format!("start {start}: {e}"));
            }
        }
    }
    best.ok_or_else(|| Error::AllStartsFailed(failures.join("; ")))
}

fn smallest_component(params: &MixtureParams) -> usize {
    params
        .covariances
        .iter()
        .map(|s| s.determinant())
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map_or(0, |(c, _)| c)
}

fn run_start(
    points: &Points,
    labels: &[usize],
    k: usize,
    model: GpcmModelId,
    config: &EmConfig,
    floor: f64,
    start: usize,
) -> Result<GpcmFit> {
    let mut fl = Floor::new(floor);
    let mut params = mstep::m_step_points(points, &hard_responsibilities(labels, k), model, None, &mut fl)?;
    let mut floored = usize::from(fl.hit);
    let (mut resp, mut loglik) = estep::e_step_points(points, &params)?;
    let mut trace = vec![loglik];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iter {
        let mut fl = Floor::new(floor);
        let next = mstep::m_step_points(points, &resp, model, Some(&params), &mut fl)?;
        floored = if fl.hit { floored + 1 } else { 0 };
        if floored > MAX_FLOORED_ITERATIONS {
            return Err(Error::DegenerateComponent(smallest_component(&next)));
        }
        let (r, l) = estep::e_step_points(points, &next)?;
        iterations += 1;
        trace.push(l);
        params = next;
        resp = r;
        let change = (l - loglik).abs();
        loglik = l;
        if change <= config.rel_tol * l.abs() {
            converged = true;
            break;
        }
    }
    if !loglik.is_finite() {
        return Err(Error::DegenerateComponent(smallest_component(&params)));
    }
    let nu = n_params(model, k, points.d);
    Ok(GpcmFit {
        model,
        k,
        weights: params.weights,
        means: params.means,
        covariances: params.covariances,
        responsibilities: resp,
        loglik,
        n_params: nu,
        bic: bic_value(loglik, nu, points.n),
        iterations,
        converged,
        loglik_trace: trace,
        start,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn params_2d(weights: &[f64], means: &[[f64; 2]]) -> MixtureParams {
        MixtureParams {
            weights: weights.to_vec(),
            means: means.iter().map(|m| m.to_vec()).collect(),
            covariances: vec![DMatrix::identity(2, 2); weights.len()],
            orientation: None,
        }
    }

    fn blobs(seed: u64) -> DMatrix<f64> {
        let mut rng = crate::seeding::rng_from_seed(seed);
        let mut rows = Vec::new();
        for (cx, cy) in [(0.0, 0.0), (8.0, 8.0)] {
            for _ in 0..100 {
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                rows.extend([cx + a, cy + b]);
            }
        }
        DMatrix::from_row_slice(200, 2, &rows)
    }

    #[test]
    fn e_step_examples() {
        let data = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 2.0, -3.0, 1.0]);
        let (r, _) = e_step(&data, &params_2d(&[1.0], &[[0.5, 0.5]])).unwrap();
        assert!(r.iter().all(|&v| v == 1.0));

        let mid = DMatrix::from_row_slice(1, 2, &[0.0, 0.0]);
        let (r, _) = e_step(&mid, &params_2d(&[0.5, 0.5], &[[-1.0, 0.0], [1.0, 0.0]])).unwrap();
        assert!((r[(0, 0)] - 0.5).abs() < 1e-15 && (r[(0, 1)] - 0.5).abs() < 1e-15);

        let (r, _) = e_step(&mid, &params_2d(&[0.3, 0.7], &[[-1.0, 0.0], [1.0, 0.0]])).unwrap();
        assert!((r[(0, 0)] - 0.3).abs() < 1e-15 && (r[(0, 1)] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn single_component_m_step_is_the_mle() {
        let data = blobs(3);
        let n = data.nrows() as f64;
        let ones = DMatrix::from_element(data.nrows(), 1, 1.0);
        let mean = data.row_mean();
        let centred = DMatrix::from_fn(data.nrows(), 2, |i, j| data[(i, j)] - mean[j]);
        let s = centred.transpose() * &centred / n;

        let vvv = m_step(&data, &ones, GpcmModelId::Vvv).unwrap();
        assert!((vvv.means[0][0] - mean[0]).abs() < 1e-12);
        assert!((&vvv.covariances[0] - &s).amax() < 1e-10);
        assert_eq!(vvv.weights, vec![1.0]);

        let eii = m_step(&data, &ones, GpcmModelId::Eii).unwrap();
        let expect = DMatrix::<f64>::identity(2, 2) * (s.trace() / 2.0);
        assert!((&eii.covariances[0] - &expect).amax() < 1e-10);
    }

    #[test]
    fn hard_responsibilities_give_cluster_proportions() {
        let data = blobs(4);
        let labels: Vec<usize> = (0..200).map(|i| usize::from(i >= 150)).collect();
        let p = m_step(&data, &hard_responsibilities(&labels, 2), GpcmModelId::Eee).unwrap();
        assert_eq!(p.weights, vec![0.75, 0.25]);
    }

    #[test]
    fn single_component_fit_matches_closed_form_loglik() {
        let data = blobs(5);
        let n = data.nrows() as f64;
        let fit = em_fit(&data, 1, GpcmModelId::Vvv, &EmConfig::default()).unwrap();
        let ones = DMatrix::from_element(data.nrows(), 1, 1.0);
        let s = m_step(&data, &ones, GpcmModelId::Vvv).unwrap().covariances[0].clone();
        let d = 2.0;
        let expect = -0.5 * n * (d * (2.0 * std::f64::consts::PI).ln() + s.determinant().ln() + d);
        assert!((fit.loglik - expect).abs() < 1e-8 * expect.abs());
    }

    #[test]
    fn separated_blobs_recover_means() {
        let data = blobs(6);
        let fit = em_fit(&data, 2, GpcmModelId::Eii, &EmConfig::default()).unwrap();
        let mut means = fit.means.clone();
        means.sort_by(|a, b| a[0].total_cmp(&b[0]));
        // sampling error of a 100-point mean is about 0.1 per coordinate
        for (m, c) in means.iter().zip([0.0, 8.0]) {
            assert!((m[0] - c).abs() < 0.3 && (m[1] - c).abs() < 0.3, "{m:?}");
        }
        assert!(fit.converged);
        assert!(fit.loglik_trace.windows(2).all(|w| w[1] >= w[0] - 1e-8));
    }

    #[test]
    fn map_and_bic_examples() {
        let r = DMatrix::from_row_slice(3, 2, &[0.9, 0.1, 0.5, 0.5, 0.0, 1.0]);
        assert_eq!(map_labels(&r), vec![0, 0, 1]);
        assert!((bic_value(-100.0, 9, 100) - (-241.447)).abs() < 1e-3);
        assert_eq!(bic_value(-50.0, 0, 10), -100.0);
        assert!(bic_value(-50.0, 3, 10) > bic_value(-50.0, 4, 10));
    }

    #[test]
    fn too_few_observations() {
        let data = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 1.0]);
        assert!(matches!(
            em_fit(&data, 2, GpcmModelId::Eii, &EmConfig::default()),
            Err(Error::TooFewObservations { n: 2, k: 2 })
        ));
    }
}
