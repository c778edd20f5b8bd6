use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::MixtureParams;
use crate::error::{Error, Result};
use crate::kmeans::Points;

/// One Gaussian component prepared for repeated log-density evaluation.
struct Component<'a> {
    /// ln q_k − ½ d ln 2π − ½ ln |Σ_k|
    offset: f64,
    mean: &'a [f64],
    /// Row-major inverse of the lower Cholesky factor.
    l_inv: Vec<f64>,
}

fn prepare(params: &MixtureParams, d: usize) -> Result<Vec<Component<'_>>> {
    let half_log_2pi = 0.5 * d as f64 * (2.0 * PI).ln();
    params
        .covariances
        .iter()
        .enumerate()
        .map(|(c, sigma)| {
            let chol = sigma
                .clone()
                .cholesky()
                .ok_or(Error::DegenerateComponent(c))?;
            let l = chol.l();
            let half_log_det: f64 = (0..d).map(|i| l[(i, i)].ln()).sum();
            let inv = l
                .solve_lower_triangular(&DMatrix::identity(d, d))
                .ok_or(Error::DegenerateComponent(c))?;
            let mut l_inv = vec![0.0; d * d];
            for a in 0..d {
                for b in 0..=a {
                    l_inv[a * d + b] = inv[(a, b)];
                }
            }
            Ok(Component {
                offset: params.weights[c].ln() - half_log_2pi - half_log_det,
                mean: &params.means[c],
                l_inv,
            })
        })
        .collect()
}

impl Component<'_> {
    fn log_weighted_density(&self, y: &[f64], dev: &mut [f64]) -> f64 {
        let d = y.len();
        for j in 0..d {
            dev[j] = y[j] - self.mean[j];
        }
        let mut quad = 0.0;
        for a in 0..d {
            let row = &self.l_inv[a * d..a * d + a + 1];
            let z: f64 = row.iter().zip(&dev[..=a]).map(|(l, v)| l * v).sum();
            quad += z * z;
        }
        self.offset - 0.5 * quad
    }
}

/// Responsibilities and observed log-likelihood under `params`.
pub(crate) fn e_step_points(points: &Points, params: &MixtureParams) -> Result<(DMatrix<f64>, f64)> {
    let (n, d) = (points.n, points.d);
    let comps = prepare(params, d)?;
    let k = comps.len();
    let mut resp = DMatrix::zeros(n, k);
    let mut logs = vec![0.0; k];
    let mut dev = vec![0.0; d];
    let mut loglik = 0.0;
    for i in 0..n {
        let y = points.row(i);
        let mut max = f64::NEG_INFINITY;
        for (c, comp) in comps.iter().enumerate() {
            logs[c] = comp.log_weighted_density(y, &mut dev);
            max = max.max(logs[c]);
        }
        if !max.is_finite() {
            return Err(Error::NumericalUnderflowUnrecoverable(i));
        }
        let mut total = 0.0;
        for l in logs.iter_mut() {
            *l = (*l - max).exp();
            total += *l;
        }
        let inv = 1.0 / total;
        let out = resp.as_mut_slice();
        for (c, l) in logs.iter().enumerate() {
            out[c * n + i] = l * inv;
        }
        loglik += max + total.ln();
    }
    Ok((resp, loglik))
}

/// Log of the mixture density at each row.
pub(crate) fn log_density_points(points: &Points, params: &MixtureParams) -> Result<Vec<f64>> {
    let comps = prepare(params, points.d)?;
    let mut dev = vec![0.0; points.d];
    Ok((0..points.n)
        .map(|i| {
            let y = points.row(i);
            let logs: Vec<f64> = comps
                .iter()
                .map(|c| c.log_weighted_density(y, &mut dev))
                .collect();
            let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !max.is_finite() {
                return max;
            }
            max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
        })
        .collect())
}
