//! Index formulas evaluated on precomputed [`ClusterStats`].
//!
//! A formula that has no value for a partition (zero denominator, logarithm of
//! zero, singular dispersion matrix, too few clusters) yields `None`.

use nalgebra::{Cholesky, DMatrix};

use super::registry::CviIndex;
use super::stats::ClusterStats;

/// Relative pivot size below which a dispersion matrix is treated as singular.
const SINGULAR_PIVOT: f64 = 1e-12;

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn positive(v: f64) -> Option<f64> {
    (v > 0.0 && v.is_finite()).then_some(v)
}

/// Natural log of the determinant of a symmetric positive-definite matrix,
/// `None` when the matrix is singular to working precision.
pub(crate) fn spd_log_det(m: &DMatrix<f64>) -> Option<f64> {
    let scale = m.diagonal().amax();
    if scale <= 0.0 || !scale.is_finite() {
        return None;
    }
    let chol = Cholesky::new(m.clone())?;
    let l = chol.l_dirty();
    let mut log_det = 0.0;
    for i in 0..m.nrows() {
        let pivot = l[(i, i)] * l[(i, i)];
        if pivot <= SINGULAR_PIVOT * scale {
            return None;
        }
        log_det += pivot.ln();
    }
    Some(log_det)
}

fn log_det_ratio(s: &ClusterStats) -> Option<f64> {
    Some(spd_log_det(&s.total_scatter)? - spd_log_det(&s.pooled_within)?)
}

fn pairs(k: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..k).flat_map(move |a| (a + 1..k).map(move |b| (a, b)))
}

fn min_over_pairs(k: usize, f: impl Fn(usize, usize) -> f64) -> Option<f64> {
    let m = pairs(k).map(|(a, b)| f(a, b)).fold(f64::INFINITY, f64::min);
    m.is_finite().then_some(m)
}

/// Generalised Dunn index: min over cluster pairs of δ_between divided by the
/// max over clusters of Δ_within.
pub fn generalized_dunn(s: &ClusterStats, between: u8, within: u8) -> Option<f64> {
    if s.k < 2 {
        return None;
    }
    let num = min_over_pairs(s.k, |a, b| between_distance(s, between, a, b))?;
    let den = (0..s.k)
        .map(|c| within_spread(s, within, c))
        .fold(0.0, f64::max);
    positive(den).and_then(|den| finite(num / den))
}

fn between_distance(s: &ClusterStats, variant: u8, a: usize, b: usize) -> f64 {
    let p = &s.pairs;
    match variant {
        1 => p.min_between[(a, b)],
        2 => p.max_between[(a, b)],
        3 => p.sum_between[(a, b)] / (s.sizes[a] * s.sizes[b]) as f64,
        4 => s.centroid_distances[(a, b)],
        5 => {
            (s.sum_dist_to_centroid[a] + s.sum_dist_to_centroid[b])
                / (s.sizes[a] + s.sizes[b]) as f64
        }
        _ => panic!("between-cluster distance variant {variant} out of 1..=5"),
    }
}

fn within_spread(s: &ClusterStats, variant: u8, c: usize) -> f64 {
    let nk = s.sizes[c] as f64;
    match variant {
        1 => s.pairs.diameter[c],
        2 if s.sizes[c] < 2 => 0.0,
        2 => 2.0 * s.pairs.sum_within[c] / (nk * (nk - 1.0)),
        3 => 2.0 * s.sum_dist_to_centroid[c] / nk,
        _ => panic!("within-cluster spread variant {variant} out of 1..=3"),
    }
}

fn silhouette(s: &ClusterStats) -> Option<f64> {
    if s.k < 2 {
        return None;
    }
    let k = s.k;
    let mut per_cluster = vec![0.0; k];
    for (i, &c) in s.labels.iter().enumerate() {
        // singletons contribute s(i) = 0
        let nk = s.sizes[c];
        if nk == 1 {
            continue;
        }
        let row = &s.pairs.point_to_cluster[i * k..(i + 1) * k];
        let a = row[c] / (nk - 1) as f64;
        let b = (0..k)
            .filter(|&o| o != c)
            .map(|o| row[o] / s.sizes[o] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            per_cluster[c] += (b - a) / m;
        }
    }
    let total: f64 = per_cluster
        .iter()
        .zip(&s.sizes)
        .map(|(v, &nk)| v / nk as f64)
        .sum();
    finite(total / k as f64)
}

pub fn evaluate(index: CviIndex, s: &ClusterStats) -> Option<f64> {
    use CviIndex::*;
    let n = s.n as f64;
    let k = s.k as f64;
    match index {
        Bri => {
            let mut total = 0.0;
            for (w, &nk) in s.within_scatter.iter().zip(&s.sizes) {
                let tr = positive(w.trace())?;
                total += nk as f64 * (tr / nk as f64).ln();
            }
            finite(total)
        }
        Dbi => {
            if s.k < 2 {
                return None;
            }
            let mut total = 0.0;
            for a in 0..s.k {
                let mut worst = f64::NEG_INFINITY;
                for b in (0..s.k).filter(|&b| b != a) {
                    let sep = positive(s.centroid_distances[(a, b)])?;
                    let r = (s.mean_dist_to_centroid[a] + s.mean_dist_to_centroid[b]) / sep;
                    worst = worst.max(r);
                }
                total += worst;
            }
            finite(total / k)
        }
        Dri => finite(log_det_ratio(s)?.exp()),
        Ldri => finite(n * log_det_ratio(s)?),
        Lssi => finite((positive(s.bcss)? / positive(s.wcss)?).ln()),
        Mri => {
            if s.n_w == 0 || s.n_b == 0 {
                return None;
            }
            let within = s.pairs.total_within() / s.n_w as f64;
            let between = positive(s.pairs.total_between())? / s.n_b as f64;
            finite(within / between)
        }
        Rti => {
            let sep = positive(min_over_pairs(s.k, |a, b| s.centroid_distances[(a, b)])?)?;
            finite(s.wcss / (n * sep * sep))
        }
        Ssi => {
            let mut total = 0.0;
            for (w, &nk) in s.within_scatter.iter().zip(&s.sizes) {
                if nk <= s.d {
                    return None;
                }
                let nk = nk as f64;
                total += nk * (spd_log_det(w)? - s.d as f64 * nk.ln());
            }
            finite(total)
        }
        Xbi => {
            let sep = positive(min_over_pairs(s.k, |a, b| s.pairs.min_between[(a, b)])?)?;
            finite(s.wcss / (n * sep * sep))
        }
        Bhi => {
            let total: f64 = s
                .within_scatter
                .iter()
                .zip(&s.sizes)
                .map(|(w, &nk)| w.trace() / nk as f64)
                .sum();
            finite(total / k)
        }
        Chi => {
            if s.k < 2 || s.n <= s.k {
                return None;
            }
            finite((n - k) / (k - 1.0) * s.bcss / positive(s.wcss)?)
        }
        Di => generalized_dunn(s, 1, 1),
        Gdi { between, within } => generalized_dunn(s, between, within),
        Kwi => finite(k * k * spd_log_det(&s.pooled_within)?.exp()),
        Pbmi => {
            let spread = positive(max_over_pairs(s.k, |a, b| s.centroid_distances[(a, b)])?)?;
            let within = positive(s.sum_dist_to_centroid.iter().sum())?;
            let v = s.sum_dist_to_grand_mean / within * spread / k;
            finite(v * v)
        }
        Pbi => {
            if s.n_w == 0 || s.n_b == 0 {
                return None;
            }
            let (nw, nb, nt) = (s.n_w as f64, s.n_b as f64, s.n_t as f64);
            let diff = s.pairs.total_within() / nw - s.pairs.total_between() / nb;
            finite(diff * (nw * nb).sqrt() / nt)
        }
        Rli => {
            let mut ratio = 0.0;
            for (b, t) in s.bcss_per_var.iter().zip(&s.tss_per_var) {
                ratio += b / positive(*t)?;
            }
            finite((ratio / s.d as f64 / k).sqrt())
        }
        Si => silhouette(s),
        Twbi => {
            spd_log_det(&s.pooled_within)?;
            let chol = Cholesky::new(s.pooled_within.clone())?;
            finite(chol.solve(&s.between_scatter).trace())
        }
    }
}

fn max_over_pairs(k: usize, f: impl Fn(usize, usize) -> f64) -> Option<f64> {
    let m = pairs(k).map(|(a, b)| f(a, b)).fold(f64::NEG_INFINITY, f64::max);
    m.is_finite().then_some(m)
}
