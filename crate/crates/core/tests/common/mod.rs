//! Independent oracles shared by the integration suites and the acceptance run.
#![allow(dead_code)]

use alphaclust::compositions::alpha_transform_row;
use alphaclust::gpcm::{GpcmFit, GpcmModelId};
use alphaclust::seeding::{rng_from_seed, Rng};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

/// Strictly positive composition with log-normal spread, so that some parts are
/// small and some dominate.
pub fn random_composition(rng: &mut Rng, p: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..p)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            (1.2 * z).exp()
        })
        .collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

// ---------------------------------------------------------------------------
// Jacobian oracle

fn chart(t: &[f64]) -> Vec<f64> {
    let mut x = t.to_vec();
    x.push(1.0 - t.iter().sum::<f64>());
    x
}

fn central(t: &[f64], j: usize, h: f64, alpha: f64) -> DVector<f64> {
    let mut up = t.to_vec();
    let mut down = t.to_vec();
    up[j] += h;
    down[j] -= h;
    let fu = alpha_transform_row(&chart(&up), alpha).unwrap();
    let fd = alpha_transform_row(&chart(&down), alpha).unwrap();
    (fu - fd) / (2.0 * h)
}

/// ln|det ∂y/∂t| for the chart t = (x_1..x_{p−1}), x_p = 1 − Σt, by central
/// differences with one Richardson extrapolation step.
pub fn fd_log_jacobian(x: &[f64], alpha: f64) -> f64 {
    let p = x.len();
    let t = &x[..p - 1];
    let smallest = x.iter().copied().fold(f64::INFINITY, f64::min);
    let h = 1e-3 * smallest;
    let mut jac = DMatrix::zeros(p - 1, p - 1);
    for j in 0..p - 1 {
        let coarse = central(t, j, h, alpha);
        let fine = central(t, j, h / 2.0, alpha);
        let col = (fine * 4.0 - coarse) / 3.0;
        jac.set_column(j, &col);
    }
    jac.determinant().abs().ln()
}

// ---------------------------------------------------------------------------
// Naive validity indices

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn mean_of(rows: &[&[f64]]) -> Vec<f64> {
    let d = rows[0].len();
    (0..d)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64)
        .collect()
}

fn scatter(rows: &[&[f64]], centre: &[f64]) -> DMatrix<f64> {
    let d = centre.len();
    let mut m = DMatrix::zeros(d, d);
    for r in rows {
        let v = DVector::from_iterator(d, r.iter().zip(centre).map(|(a, b)| a - b));
        m += &v * v.transpose();
    }
    m
}

/// All 33 indices in registry order, straight from their definitions with
/// explicit double loops over points. Assumes every cluster has more than d
/// members and the data are in general position.
pub fn naive_indices(data: &DMatrix<f64>, labels: &[usize]) -> Vec<f64> {
    let n = data.nrows();
    let d = data.ncols();
    let k = labels.iter().max().unwrap() + 1;
    let rows: Vec<Vec<f64>> = (0..n).map(|i| data.row(i).iter().copied().collect()).collect();
    let members: Vec<Vec<&[f64]>> = (0..k)
        .map(|c| (0..n).filter(|&i| labels[i] == c).map(|i| rows[i].as_slice()).collect())
        .collect();
    let all: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
    let grand = mean_of(&all);
    let mu: Vec<Vec<f64>> = members.iter().map(|m| mean_of(m)).collect();
    let nk: Vec<f64> = members.iter().map(|m| m.len() as f64).collect();
    let kf = k as f64;
    let nf = n as f64;

    let t = scatter(&all, &grand);
    let wk: Vec<DMatrix<f64>> = members.iter().zip(&mu).map(|(m, c)| scatter(m, c)).collect();
    let w = wk.iter().fold(DMatrix::zeros(d, d), |acc, m| acc + m);
    let mut bc = DMatrix::zeros(d, d);
    for (c, m) in mu.iter().enumerate() {
        let v = DVector::from_iterator(d, m.iter().zip(&grand).map(|(a, b)| a - b));
        bc += &v * v.transpose() * nk[c];
    }
    let wcss = w.trace();
    let bcss = bc.trace();

    // pair sums
    let (mut sw, mut nw, mut sb, mut nb) = (0.0, 0.0, 0.0, 0.0);
    let mut min_sep = f64::INFINITY;
    let mut max_diam = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            let dij = dist(&rows[i], &rows[j]);
            if labels[i] == labels[j] {
                sw += dij;
                nw += 1.0;
                max_diam = max_diam.max(dij);
            } else {
                sb += dij;
                nb += 1.0;
                min_sep = min_sep.min(dij);
            }
        }
    }
    let nt = nf * (nf - 1.0) / 2.0;

    let delta: Vec<f64> = members
        .iter()
        .zip(&mu)
        .map(|(m, c)| m.iter().map(|r| dist(r, c)).sum::<f64>() / m.len() as f64)
        .collect();
    let centre_dist = |a: usize, b: usize| dist(&mu[a], &mu[b]);
    let cluster_pairs: Vec<(usize, usize)> = (0..k).flat_map(|a| (a + 1..k).map(move |b| (a, b))).collect();

    let bri: f64 = (0..k).map(|c| nk[c] * (wk[c].trace() / nk[c]).ln()).sum();
    let dbi = (0..k)
        .map(|a| {
            (0..k)
                .filter(|&b| b != a)
                .map(|b| (delta[a] + delta[b]) / centre_dist(a, b))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum::<f64>()
        / kf;
    let det_t = t.determinant();
    let det_w = w.determinant();
    let dri = det_t / det_w;
    let ldri = nf * (det_t / det_w).ln();
    let lssi = (bcss / wcss).ln();
    let mri = (sw / nw) / (sb / nb);
    let min_centre = cluster_pairs
        .iter()
        .map(|&(a, b)| centre_dist(a, b))
        .fold(f64::INFINITY, f64::min);
    let rti = wcss / (nf * min_centre * min_centre);
    let ssi: f64 = (0..k).map(|c| nk[c] * (&wk[c] / nk[c]).determinant().ln()).sum();
    let xbi = wcss / (nf * min_sep * min_sep);
    let bhi = (0..k).map(|c| wk[c].trace() / nk[c]).sum::<f64>() / kf;
    let chi = (nf - kf) / (kf - 1.0) * bcss / wcss;
    let di = min_sep / max_diam;

    let point_dists = |a: usize, b: usize| -> Vec<f64> {
        members[a]
            .iter()
            .flat_map(|x| members[b].iter().map(move |y| dist(x, y)))
            .collect()
    };
    let between = |variant: u8, a: usize, b: usize| -> f64 {
        let ds = point_dists(a, b);
        match variant {
            1 => ds.iter().copied().fold(f64::INFINITY, f64::min),
            2 => ds.iter().copied().fold(0.0, f64::max),
            3 => ds.iter().sum::<f64>() / ds.len() as f64,
            4 => centre_dist(a, b),
            _ => {
                let sa: f64 = members[a].iter().map(|x| dist(x, &mu[a])).sum();
                let sb: f64 = members[b].iter().map(|x| dist(x, &mu[b])).sum();
                (sa + sb) / (nk[a] + nk[b])
            }
        }
    };
    let within = |variant: u8, c: usize| -> f64 {
        let m = &members[c];
        let mut pairs = Vec::new();
        for i in 0..m.len() {
            for j in i + 1..m.len() {
                pairs.push(dist(m[i], m[j]));
            }
        }
        match variant {
            1 => pairs.iter().copied().fold(0.0, f64::max),
            2 => pairs.iter().sum::<f64>() / pairs.len() as f64,
            _ => 2.0 * delta[c],
        }
    };
    let gdi = |b: u8, w: u8| -> f64 {
        let num = cluster_pairs
            .iter()
            .map(|&(x, y)| between(b, x, y))
            .fold(f64::INFINITY, f64::min);
        let den = (0..k).map(|c| within(w, c)).fold(0.0, f64::max);
        num / den
    };

    let kwi = kf * kf * det_w;
    let et: f64 = rows.iter().map(|r| dist(r, &grand)).sum();
    let ew: f64 = (0..n).map(|i| dist(&rows[i], &mu[labels[i]])).sum();
    let dk = cluster_pairs
        .iter()
        .map(|&(a, b)| centre_dist(a, b))
        .fold(0.0, f64::max);
    let pbmi = (et / ew * dk / kf).powi(2);
    let pbi = (sw / nw - sb / nb) * (nw * nb).sqrt() / nt;
    let rli = {
        let mut ratio = 0.0;
        for j in 0..d {
            let tss_j: f64 = rows.iter().map(|r| (r[j] - grand[j]).powi(2)).sum();
            let bcss_j: f64 = (0..k).map(|c| nk[c] * (mu[c][j] - grand[j]).powi(2)).sum();
            ratio += bcss_j / tss_j;
        }
        (ratio / d as f64 / kf).sqrt()
    };
    let si = {
        let mut per_cluster = vec![0.0; k];
        for i in 0..n {
            let c = labels[i];
            if members[c].len() == 1 {
                continue;
            }
            let mean_to = |o: usize| {
                let s: f64 = (0..n).filter(|&j| j != i && labels[j] == o).map(|j| dist(&rows[i], &rows[j])).sum();
                let cnt = if o == c { nk[o] - 1.0 } else { nk[o] };
                s / cnt
            };
            let a = mean_to(c);
            let b = (0..k).filter(|&o| o != c).map(mean_to).fold(f64::INFINITY, f64::min);
            per_cluster[c] += (b - a) / a.max(b);
        }
        (0..k).map(|c| per_cluster[c] / nk[c]).sum::<f64>() / kf
    };
    let twbi = w.clone().try_inverse().map_or(f64::NAN, |inv| (inv * &bc).trace());

    let mut out = vec![bri, dbi, dri, ldri, lssi, mri, rti, ssi, xbi, bhi, chi, di];
    for b in 1..=5u8 {
        for w in 1..=3u8 {
            out.push(gdi(b, w));
        }
    }
    out.extend([kwi, pbmi, pbi, rli, si, twbi]);
    out
}

/// Four points in two tight, far-apart pairs.
pub fn four_point_instance() -> (DMatrix<f64>, Vec<usize>) {
    let data = DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 0.0, 1.0, 10.0, 0.0, 10.0, 1.0]);
    (data, vec![0, 0, 1, 1])
}

/// Random labelled instance in which every cluster has more than `d` members.
pub fn random_instance(rng: &mut Rng) -> (DMatrix<f64>, Vec<usize>) {
    let d = rng.random_range(1..=4);
    let k = rng.random_range(2..=5);
    let min_n = k * (d + 1);
    let n = rng.random_range(min_n.max(10)..=50);
    let shift: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..d).map(|_| rng.random_range(-3.0..3.0)).collect())
        .collect();
    let mut labels: Vec<usize> = (0..n).map(|i| if i < min_n { i % k } else { rng.random_range(0..k) }).collect();
    // shuffle so cluster ids are not in row order
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        labels.swap(i, j);
    }
    let mut values = Vec::with_capacity(n * d);
    for &c in &labels {
        for j in 0..d {
            let z: f64 = StandardNormal.sample(rng);
            values.push(shift[c][j] + z);
        }
    }
    (DMatrix::from_row_slice(n, d, &values), labels)
}

// ---------------------------------------------------------------------------
// K-means oracle

fn wcss_of(data: &DMatrix<f64>, labels: &[usize], k: usize) -> f64 {
    let d = data.ncols();
    let mut total = 0.0;
    for c in 0..k {
        let idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        for j in 0..d {
            let m = idx.iter().map(|&i| data[(i, j)]).sum::<f64>() / idx.len() as f64;
            total += idx.iter().map(|&i| (data[(i, j)] - m).powi(2)).sum::<f64>();
        }
    }
    total
}

/// Smallest WCSS over every labelling with k non-empty clusters.
pub fn exhaustive_min_wcss(data: &DMatrix<f64>, k: usize) -> f64 {
    let n = data.nrows();
    let mut best = f64::INFINITY;
    let mut labels = vec![0usize; n];
    let total = k.pow(n as u32);
    for code in 0..total {
        let mut c = code;
        for l in labels.iter_mut() {
            *l = c % k;
            c /= k;
        }
        let mut seen = vec![false; k];
        for &l in &labels {
            seen[l] = true;
        }
        if seen.iter().all(|&s| s) {
            best = best.min(wcss_of(data, &labels, k));
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Gaussian mixtures and GPCM structure checks

/// Gaussian mixture sample with random means and random full covariances.
pub fn mixture_sample(seed: u64, n: usize, d: usize, k: usize, spread: f64) -> DMatrix<f64> {
    let mut rng = rng_from_seed(seed);
    let centres: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..d).map(|_| rng.random_range(-spread..spread)).collect())
        .collect();
    let factors: Vec<DMatrix<f64>> = (0..k)
        .map(|_| DMatrix::from_fn(d, d, |_, _| rng.random_range(-0.8..0.8)) + DMatrix::identity(d, d) * 0.6)
        .collect();
    let mut rows = Vec::with_capacity(n * d);
    for i in 0..n {
        let c = i % k;
        let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let x = &factors[c] * DVector::from_vec(z);
        rows.extend((0..d).map(|j| centres[c][j] + x[j]));
    }
    DMatrix::from_row_slice(n, d, &rows)
}

fn sorted_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

fn mats_close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
    let scale = a.amax().max(b.amax());
    (a - b).amax() <= tol * scale
}

fn is_diagonal(m: &DMatrix<f64>, tol: f64) -> bool {
    let scale = m.amax();
    (0..m.nrows()).all(|a| (0..m.ncols()).all(|b| a == b || m[(a, b)].abs() <= tol * scale))
}

fn det_root(m: &DMatrix<f64>) -> f64 {
    m.determinant().powf(1.0 / m.nrows() as f64)
}

fn normalized(m: &DMatrix<f64>) -> DMatrix<f64> {
    m / det_root(m)
}

fn commute(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
    let scale = a.amax() * b.amax();
    (a * b - b * a).amax() <= tol * scale
}

/// Checks each model's defining constraint on the fitted covariances.
pub fn satisfies_structure(fit: &GpcmFit, tol: f64) -> Result<(), String> {
    let s = &fit.covariances;
    let d = s[0].nrows();
    let eye = DMatrix::<f64>::identity(d, d);
    let first = &s[0];
    let all = |f: &dyn Fn(&DMatrix<f64>) -> bool| s.iter().all(f);
    let pairs = |f: &dyn Fn(&DMatrix<f64>, &DMatrix<f64>) -> bool| {
        s.iter().all(|a| s.iter().all(|b| f(a, b)))
    };
    let spherical = |m: &DMatrix<f64>| mats_close(m, &(&eye * m[(0, 0)]), tol);
    let equal_det = || all(&|m| rel_close(det_root(m), det_root(first), tol));
    let same_profile = |f: &dyn Fn(&DMatrix<f64>) -> DMatrix<f64>| {
        let e0 = sorted_eigenvalues(&f(first));
        all(&|m| {
            sorted_eigenvalues(&f(m))
                .iter()
                .zip(&e0)
                .all(|(a, b)| rel_close(*a, *b, tol))
        })
    };
    let ok = match fit.model {
        GpcmModelId::Eii => all(&|m| spherical(m) && mats_close(m, first, tol)),
        GpcmModelId::Vii => all(&spherical),
        GpcmModelId::Eei => all(&|m| is_diagonal(m, tol) && mats_close(m, first, tol)),
        GpcmModelId::Vei => all(&|m| is_diagonal(m, tol) && mats_close(&normalized(m), &normalized(first), tol)),
        GpcmModelId::Evi => all(&|m| is_diagonal(m, tol)) && equal_det(),
        GpcmModelId::Vvi => all(&|m| is_diagonal(m, tol)),
        GpcmModelId::Eee => all(&|m| mats_close(m, first, tol)),
        GpcmModelId::Vee => all(&|m| mats_close(&normalized(m), &normalized(first), tol)),
        GpcmModelId::Eve => equal_det() && pairs(&|a, b| commute(a, b, tol)),
        GpcmModelId::Vve => pairs(&|a, b| commute(a, b, tol)),
        GpcmModelId::Eev => same_profile(&|m| m.clone()),
        GpcmModelId::Vev => same_profile(&normalized),
        GpcmModelId::Evv => equal_det(),
        GpcmModelId::Vvv => true,
    };
    if ok {
        Ok(())
    } else {
        Err(format!("{} violates its structure: {:?}", fit.model, s))
    }
}

/// Row-stochastic responsibilities, valid weights, SPD covariances and the BIC identity.
pub fn check_fit_invariants(fit: &GpcmFit) -> Result<(), String> {
    if (fit.weights.iter().sum::<f64>() - 1.0).abs() >= 1e-10 || fit.weights.iter().any(|&w| w <= 0.0) {
        return Err(format!("bad weights {:?}", fit.weights));
    }
    for row in fit.responsibilities.row_iter() {
        if (row.sum() - 1.0).abs() >= 1e-10 {
            return Err(format!("responsibility row sums to {}", row.sum()));
        }
    }
    for s in &fit.covariances {
        if (s - s.transpose()).amax() > 1e-10 * s.amax() || s.clone().cholesky().is_none() {
            return Err(format!("covariance not SPD: {s:?}"));
        }
    }
    let n = fit.responsibilities.nrows() as f64;
    if fit.bic != 2.0 * fit.loglik - fit.n_params as f64 * n.ln() {
        return Err("bic != 2 loglik - nu ln n".into());
    }
    Ok(())
}

/// First drop of the log-likelihood trace below `-tol`, if any.
pub fn monotonicity_violation(fit: &GpcmFit, tol: f64) -> Option<(f64, f64)> {
    fit.loglik_trace
        .windows(2)
        .find(|w| w[1] < w[0] - tol)
        .map(|w| (w[0], w[1]))
}

// ---------------------------------------------------------------------------
// Sampler statistics

/// Two-sided Kolmogorov–Smirnov statistic of `sample` against `cdf`.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value at significance 0.001.
pub fn ks_critical_001(n: usize) -> f64 {
    1.949 / (n as f64).sqrt()
}
