//! Constrained covariance estimators for the M-step.
//!
//! Every estimator works from the weighted scatter matrices
//! `S_k = Σ_i w_ik (y_i − μ_k)(y_i − μ_k)ᵀ`. The iterative ones (VEI, VEE, EVE,
//! VVE, VEV) start from the previous parameters when available, so each call
//! does not decrease the expected complete-data log-likelihood.

use nalgebra::{DMatrix, SymmetricEigen};

use super::model::GpcmModelId;
use super::MixtureParams;
use crate::error::{Error, Result};
use crate::kmeans::Points;
use crate::validity::spd_log_det;

const INNER_MAX_ITER: usize = 20;
const INNER_TOL: f64 = 1e-8;

/// A component whose total responsibility falls below `d · MIN_WEIGHT` is degenerate.
const MIN_WEIGHT: f64 = 1e-8;

pub(crate) struct Moments {
    pub nk: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub scatter: Vec<DMatrix<f64>>,
}

pub(crate) fn moments(points: &Points, resp: &DMatrix<f64>) -> Result<Moments> {
    let (n, d, k) = (points.n, points.d, resp.ncols());
    let mut nk = vec![0.0; k];
    let mut means = vec![vec![0.0; d]; k];
    let mut scatter = Vec::with_capacity(k);
    let mut dev = vec![0.0; d];
    for c in 0..k {
        let w = &resp.as_slice()[c * n..(c + 1) * n];
        let mean = &mut means[c];
        for (i, &wi) in w.iter().enumerate() {
            nk[c] += wi;
            for (m, v) in mean.iter_mut().zip(points.row(i)) {
                *m += wi * v;
            }
        }
        if !(nk[c] >= d as f64 * MIN_WEIGHT) {
            return Err(Error::DegenerateComponent(c));
        }
        mean.iter_mut().for_each(|m| *m /= nk[c]);
        // column-major lower triangle, filled out below
        let mut acc = vec![0.0; d * d];
        for (i, &wi) in w.iter().enumerate() {
            if wi == 0.0 {
                continue;
            }
            for ((dv, y), m) in dev.iter_mut().zip(points.row(i)).zip(mean.iter()) {
                *dv = y - m;
            }
            for b in 0..d {
                let wb = wi * dev[b];
                let col = &mut acc[b * d + b..(b + 1) * d];
                for (s, dv) in col.iter_mut().zip(&dev[b..]) {
                    *s += wb * dv;
                }
            }
        }
        let mut s = DMatrix::from_vec(d, d, acc);
        s.fill_upper_triangle_with_lower_triangle();
        scatter.push(s);
    }
    Ok(Moments { nk, means, scatter })
}

/// Lower bound on covariance eigenvalues, tracking whether it was needed.
pub(crate) struct Floor {
    pub value: f64,
    pub hit: bool,
}

impl Floor {
    pub fn new(value: f64) -> Self {
        Self { value, hit: false }
    }

    /// Clamps a variance-like quantity accumulated over `weight` observations.
    fn clamp(&mut self, v: f64, weight: f64) -> f64 {
        let f = self.value * weight;
        if v >= f {
            v
        } else {
            self.hit = true;
            f
        }
    }
}

fn eigen_desc(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// `V diag(values) Vᵀ`
fn compose(vectors: &DMatrix<f64>, values: &[f64]) -> DMatrix<f64> {
    let d = values.len();
    let mut scaled = vectors.clone();
    for (j, &v) in values.iter().enumerate() {
        scaled.column_mut(j).scale_mut(v);
    }
    let mut m = scaled * vectors.transpose();
    symmetrize(&mut m, d);
    m
}

fn symmetrize(m: &mut DMatrix<f64>, d: usize) {
    for a in 0..d {
        for b in 0..a {
            let v = 0.5 * (m[(a, b)] + m[(b, a)]);
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
    }
}

fn geo_mean(v: &[f64]) -> f64 {
    (v.iter().map(|x| x.ln()).sum::<f64>() / v.len() as f64).exp()
}

fn diag_matrix(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(v))
}

/// `|Σ|^{1/d}` of each previous covariance, the starting volumes of the
/// flip-flop estimators.
fn previous_volumes(prev: Option<&MixtureParams>, m: &Moments, d: usize) -> Vec<f64> {
    (0..m.nk.len())
        .map(|c| {
            prev.and_then(|p| p.covariances.get(c))
                .and_then(spd_log_det)
                .map(|ld| (ld / d as f64).exp())
                .unwrap_or_else(|| m.scatter[c].trace() / (d as f64 * m.nk[c]))
        })
        .map(|v| if v > 0.0 && v.is_finite() { v } else { 1.0 })
        .collect()
}

fn converged(old: &[f64], new: &[f64]) -> bool {
    old.iter()
        .zip(new)
        .all(|(a, b)| (a - b).abs() <= INNER_TOL * b.abs().max(f64::MIN_POSITIVE))
}

/// Covariances under `model`, plus the shared orientation for EVE and VVE.
pub(crate) fn covariances(
    model: GpcmModelId,
    m: &Moments,
    d: usize,
    prev: Option<&MixtureParams>,
    floor: &mut Floor,
) -> (Vec<DMatrix<f64>>, Option<DMatrix<f64>>) {
    use GpcmModelId::*;
    let k = m.nk.len();
    let n: f64 = m.nk.iter().sum();
    let eye = DMatrix::<f64>::identity(d, d);
    let mut pooled = DMatrix::zeros(d, d);
    for s in &m.scatter {
        pooled += s;
    }
    let diag_of = |s: &DMatrix<f64>, w: f64, floor: &mut Floor| -> Vec<f64> {
        (0..d).map(|j| floor.clamp(s[(j, j)], w)).collect()
    };
    let mut orientation = None;

    let sigmas: Vec<DMatrix<f64>> = match model {
        Eii => {
            let lambda = floor.clamp(pooled.trace() / (n * d as f64), 1.0);
            vec![&eye * lambda; k]
        }
        Vii => (0..k)
            .map(|c| &eye * floor.clamp(m.scatter[c].trace() / (m.nk[c] * d as f64), 1.0))
            .collect(),
        Eei => {
            let b = diag_of(&(pooled / n), 1.0, floor);
            vec![diag_matrix(&b); k]
        }
        Vei => {
            let diags: Vec<Vec<f64>> = (0..k).map(|c| diag_of(&m.scatter[c], m.nk[c], floor)).collect();
            let mut lambda = previous_volumes(prev, m, d);
            let mut shape = vec![1.0; d];
            for _ in 0..INNER_MAX_ITER {
                for (j, b) in shape.iter_mut().enumerate() {
                    *b = (0..k).map(|c| diags[c][j] / lambda[c]).sum();
                }
                let g = geo_mean(&shape);
                shape.iter_mut().for_each(|b| *b /= g);
                let next: Vec<f64> = (0..k)
                    .map(|c| {
                        let t: f64 = diags[c].iter().zip(&shape).map(|(s, b)| s / b).sum();
                        t / (d as f64 * m.nk[c])
                    })
                    .collect();
                let done = converged(&lambda, &next);
                lambda = next;
                if done {
                    break;
                }
            }
            let base = diag_matrix(&shape);
            lambda.iter().map(|&l| &base * l).collect()
        }
        Evi => {
            let diags: Vec<Vec<f64>> = (0..k).map(|c| diag_of(&m.scatter[c], m.nk[c], floor)).collect();
            let g: Vec<f64> = diags.iter().map(|v| geo_mean(v)).collect();
            let lambda = g.iter().sum::<f64>() / n;
            diags
                .iter()
                .zip(&g)
                .map(|(v, gk)| diag_matrix(&v.iter().map(|x| lambda * x / gk).collect::<Vec<_>>()))
                .collect()
        }
        Vvi => (0..k)
            .map(|c| {
                let v: Vec<f64> = diag_of(&m.scatter[c], m.nk[c], floor)
                    .iter()
                    .map(|x| x / m.nk[c])
                    .collect();
                diag_matrix(&v)
            })
            .collect(),
        Eee => vec![pooled / n; k],
        Vee => {
            let mut lambda = previous_volumes(prev, m, d);
            let mut shape = eye.clone();
            for _ in 0..INNER_MAX_ITER {
                let mut acc = DMatrix::zeros(d, d);
                let mut weight = 0.0;
                for c in 0..k {
                    acc += &m.scatter[c] / lambda[c];
                    weight += m.nk[c] / lambda[c];
                }
                let (mut vals, vecs) = eigen_desc(&acc);
                vals.iter_mut().for_each(|v| *v = floor.clamp(*v, weight));
                let g = geo_mean(&vals);
                let normed: Vec<f64> = vals.iter().map(|v| v / g).collect();
                let inv: Vec<f64> = normed.iter().map(|v| 1.0 / v).collect();
                shape = compose(&vecs, &normed);
                let shape_inv = compose(&vecs, &inv);
                let next: Vec<f64> = (0..k)
                    .map(|c| {
                        let t = (&m.scatter[c] * &shape_inv).trace() / (d as f64 * m.nk[c]);
                        floor.clamp(t, 1.0)
                    })
                    .collect();
                let done = converged(&lambda, &next);
                lambda = next;
                if done {
                    break;
                }
            }
            lambda.iter().map(|&l| &shape * l).collect()
        }
        Eve | Vve => {
            let (d_mat, lambdas) = shared_orientation(model, m, &pooled, d, prev, floor);
            let sig = lambdas.iter().map(|l| compose(&d_mat, l)).collect();
            orientation = Some(d_mat);
            sig
        }
        Eev | Vev | Evv => {
            let eigs: Vec<(Vec<f64>, DMatrix<f64>)> = (0..k)
                .map(|c| {
                    let (mut vals, vecs) = eigen_desc(&m.scatter[c]);
                    vals.iter_mut().for_each(|v| *v = floor.clamp(*v, m.nk[c]));
                    (vals, vecs)
                })
                .collect();
            match model {
                Eev => {
                    let mut total = vec![0.0; d];
                    for (vals, _) in &eigs {
                        total.iter_mut().zip(vals).for_each(|(t, v)| *t += v);
                    }
                    let scaled: Vec<f64> = total.iter().map(|t| t / n).collect();
                    eigs.iter().map(|(_, vecs)| compose(vecs, &scaled)).collect()
                }
                Vev => {
                    let mut lambda = previous_volumes(prev, m, d);
                    let mut shape = vec![1.0; d];
                    for _ in 0..INNER_MAX_ITER {
                        for (j, a) in shape.iter_mut().enumerate() {
                            *a = (0..k).map(|c| eigs[c].0[j] / lambda[c]).sum();
                        }
                        let g = geo_mean(&shape);
                        shape.iter_mut().for_each(|a| *a /= g);
                        let next: Vec<f64> = (0..k)
                            .map(|c| {
                                let t: f64 = eigs[c].0.iter().zip(&shape).map(|(o, a)| o / a).sum();
                                t / (d as f64 * m.nk[c])
                            })
                            .collect();
                        let done = converged(&lambda, &next);
                        lambda = next;
                        if done {
                            break;
                        }
                    }
                    eigs.iter()
                        .zip(&lambda)
                        .map(|((_, vecs), &l)| {
                            compose(vecs, &shape.iter().map(|a| a * l).collect::<Vec<_>>())
                        })
                        .collect()
                }
                _ => {
                    let g: Vec<f64> = eigs.iter().map(|(vals, _)| geo_mean(vals)).collect();
                    let lambda = g.iter().sum::<f64>() / n;
                    eigs.iter()
                        .zip(&g)
                        .map(|((vals, vecs), gk)| {
                            compose(vecs, &vals.iter().map(|v| lambda * v / gk).collect::<Vec<_>>())
                        })
                        .collect()
                }
            }
        }
        Vvv => (0..k).map(|c| &m.scatter[c] / m.nk[c]).collect(),
    };

    let sigmas = sigmas
        .into_iter()
        .map(|s| ensure_positive_definite(s, d, floor))
        .collect();
    (sigmas, orientation)
}

/// Shared orientation `D` and per-component eigenvalues `Λ_k` for EVE
/// (`Λ_k = λ A_k`) and VVE (`Λ_k = λ_k A_k`). Alternates the exact update of
/// `Λ_k` given `D` with one majorise-minimise step on `D`.
fn shared_orientation(
    model: GpcmModelId,
    m: &Moments,
    pooled: &DMatrix<f64>,
    d: usize,
    prev: Option<&MixtureParams>,
    floor: &mut Floor,
) -> (DMatrix<f64>, Vec<Vec<f64>>) {
    let k = m.nk.len();
    let n: f64 = m.nk.iter().sum();
    let mut d_mat = prev
        .and_then(|p| p.orientation.clone())
        .filter(|o| o.nrows() == d)
        .unwrap_or_else(|| eigen_desc(pooled).1);
    let omegas: Vec<f64> = m.scatter.iter().map(|s| eigen_desc(s).0[0].max(0.0)).collect();
    let eye = DMatrix::<f64>::identity(d, d);

    let eigenvalues = |d_mat: &DMatrix<f64>, floor: &mut Floor| -> Vec<Vec<f64>> {
        let projected: Vec<Vec<f64>> = (0..k)
            .map(|c| {
                let e = d_mat.transpose() * &m.scatter[c] * d_mat;
                (0..d).map(|j| floor.clamp(e[(j, j)], m.nk[c])).collect()
            })
            .collect();
        if model == GpcmModelId::Eve {
            let g: Vec<f64> = projected.iter().map(|e| geo_mean(e)).collect();
            let lambda = g.iter().sum::<f64>() / n;
            projected
                .iter()
                .zip(&g)
                .map(|(e, gk)| e.iter().map(|x| lambda * x / gk).collect())
                .collect()
        } else {
            projected
                .iter()
                .zip(&m.nk)
                .map(|(e, nk)| e.iter().map(|x| x / nk).collect())
                .collect()
        }
    };
    let objective = |d_mat: &DMatrix<f64>, lambdas: &[Vec<f64>]| -> f64 {
        (0..k)
            .map(|c| {
                let e = d_mat.transpose() * &m.scatter[c] * d_mat;
                (0..d)
                    .map(|j| e[(j, j)] / lambdas[c][j] + m.nk[c] * lambdas[c][j].ln())
                    .sum::<f64>()
            })
            .sum()
    };

    let mut lambdas = eigenvalues(&d_mat, floor);
    let mut f_prev = objective(&d_mat, &lambdas);
    for _ in 0..INNER_MAX_ITER {
        let mut g = DMatrix::zeros(d, d);
        for c in 0..k {
            let mut right = d_mat.clone();
            for (j, l) in lambdas[c].iter().enumerate() {
                right.column_mut(j).scale_mut(1.0 / l);
            }
            g += (&eye * omegas[c] - &m.scatter[c]) * right;
        }
        let svd = g.svd(true, true);
        let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
            break;
        };
        let candidate = u * v_t;
        let cand_lambdas = eigenvalues(&candidate, floor);
        let f = objective(&candidate, &cand_lambdas);
        if !(f <= f_prev) {
            break;
        }
        d_mat = candidate;
        lambdas = cand_lambdas;
        let done = (f_prev - f).abs() <= INNER_TOL * f.abs().max(f64::MIN_POSITIVE);
        f_prev = f;
        if done {
            break;
        }
    }
    (d_mat, lambdas)
}

/// Raises eigenvalues below the floor; a matrix whose Cholesky pivots all
/// clear the floor is returned unchanged.
fn ensure_positive_definite(mut s: DMatrix<f64>, d: usize, floor: &mut Floor) -> DMatrix<f64> {
    symmetrize(&mut s, d);
    if let Some(chol) = s.clone().cholesky() {
        let l = chol.l_dirty();
        if (0..d).all(|i| l[(i, i)] * l[(i, i)] >= floor.value) {
            return s;
        }
    }
    let (mut vals, vecs) = eigen_desc(&s);
    vals.iter_mut().for_each(|v| *v = floor.clamp(*v, 1.0));
    compose(&vecs, &vals)
}

/// Mixing weights, means and covariances from responsibilities.
pub(crate) fn m_step_points(
    points: &Points,
    resp: &DMatrix<f64>,
    model: GpcmModelId,
    prev: Option<&MixtureParams>,
    floor: &mut Floor,
) -> Result<MixtureParams> {
    let m = moments(points, resp)?;
    let n: f64 = m.nk.iter().sum();
    let (covariances, orientation) = covariances(model, &m, points.d, prev, floor);
    for (c, s) in covariances.iter().enumerate() {
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateComponent(c));
        }
    }
    Ok(MixtureParams {
        weights: m.nk.iter().map(|w| w / n).collect(),
        means: m.means,
        covariances,
        orientation,
    })
}
