//! The α-K-means and α-GPCM pipelines: sweep a grid of α values and cluster
//! counts, then pick the best cell by validity index or by BIC.

use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compositions::{alpha_transform, CompositionMatrix, TransformedMatrix};
use crate::error::{Error, Result};
use crate::gpcm::{
    bic_value, em_fit_from, initial_partitions, map_assign, EmConfig, GpcmFit, GpcmModelId,
};
use crate::kmeans::{kmeans_fit, standardize, KmeansConfig, Partition};
use crate::seeding::derive_seed;
use crate::validity::{compute_all, CviCell, CviIndex, CviReport};

/// Ordered α values to sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaGrid {
    values: Vec<f64>,
    zero_excluded: bool,
}

impl AlphaGrid {
    pub fn new(values: Vec<f64>, zero_excluded: bool) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidGrid("empty α grid".into()));
        }
        if let Some(a) = values.iter().find(|a| !(-1.0..=1.0).contains(*a)) {
            return Err(Error::InvalidGrid(format!("α = {a} outside [-1, 1]")));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("α grid must be strictly increasing".into()));
        }
        if zero_excluded && values.iter().any(|&a| a <= 0.0) {
            return Err(Error::InvalidGrid(
                "data with zeros admit only strictly positive α".into(),
            ));
        }
        Ok(Self {
            values,
            zero_excluded,
        })
    }

    /// `-1, -0.9, …, 1`, or `0.1, …, 1` when the data contain zeros.
    pub fn default_for(x: &CompositionMatrix) -> Self {
        let zeros = x.has_zeros();
        let lo = if zeros { 1 } else { -10 };
        Self {
            values: (lo..=10).map(|i| i as f64 / 10.0).collect(),
            zero_excluded: zeros,
        }
    }

    pub fn single(alpha: f64, x: &CompositionMatrix) -> Result<Self> {
        Self::new(vec![alpha], x.has_zeros())
    }

    /// Parses `lo:hi:step` or a comma-separated list.
    pub fn parse(spec: &str, x: &CompositionMatrix) -> Result<Self> {
        Self::new(parse_alpha_values(spec)?, x.has_zeros())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn zero_excluded(&self) -> bool {
        self.zero_excluded
    }
}

/// The α values of a `lo:hi:step` range or a comma-separated list, unchecked.
pub fn parse_alpha_values(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidGrid(format!("cannot parse α grid `{spec}`"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() == 3 {
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let (lo, hi, step) = (nums[0], nums[1], nums[2]);
        if !(step > 0.0) || hi < lo {
            return Err(bad());
        }
        let count = ((hi - lo) / step + 1e-9).floor() as i64;
        Ok((0..=count)
            .map(|i| {
                // round away representation noise such as 0.30000000000000004
                let v = lo + i as f64 * step;
                (v * 1e12).round() / 1e12
            })
            .collect())
    } else {
        spec.split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect()
    }
}

fn check_k_range(ks: &[usize], n: usize, min: usize) -> Result<()> {
    if ks.is_empty() {
        return Err(Error::InvalidGrid("empty K range".into()));
    }
    if let Some(k) = ks.iter().find(|&&k| k < min || k + 1 > n) {
        return Err(Error::InvalidGrid(format!(
            "K = {k} outside [{min}, {}]",
            n.saturating_sub(1)
        )));
    }
    Ok(())
}

fn check_zero_pattern(x: &CompositionMatrix, grid: &AlphaGrid) -> Result<()> {
    if x.has_zeros() {
        if let Some(&a) = grid.values.iter().find(|&&a| a <= 0.0) {
            return Err(Error::ZeroWithNonpositiveAlpha(a));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaKmeansResult {
    pub report: CviReport,
    /// Partition of every grid cell, aligned with `report.cells`; `None` for failed cells.
    pub partitions: Vec<Option<Partition>>,
}

impl AlphaKmeansResult {
    /// Partition of the cell selected by `index`.
    pub fn selected_partition(&self, index: CviIndex) -> Option<&Partition> {
        let sel = self.report.selection(index)?;
        self.partitions[sel.cell].as_ref()
    }
}

/// For every α: transform, standardise, run K-means for each K and score the
/// partition with all validity indices.
pub fn alpha_kmeans(
    x: &CompositionMatrix,
    grid: &AlphaGrid,
    ks: &[usize],
    config: &KmeansConfig,
) -> Result<AlphaKmeansResult> {
    check_k_range(ks, x.nrows(), 2)?;
    check_zero_pattern(x, grid)?;
    let standardized: Vec<Option<DMatrix<f64>>> = grid
        .values
        .par_iter()
        .map(|&a| match alpha_transform(x, a).and_then(|y| standardize(y.values())) {
            Ok(s) => Some(s.values().clone()),
            Err(e) => {
                log::warn!("α = {a}: {e}");
                None
            }
        })
        .collect();
    let tasks: Vec<(usize, usize)> = (0..grid.values.len())
        .flat_map(|ai| ks.iter().map(move |&k| (ai, k)))
        .collect();
    let outcomes: Vec<(CviCell, Option<Partition>)> = tasks
        .par_iter()
        .map(|&(ai, k)| {
            let alpha = grid.values[ai];
            let empty = || CviCell {
                alpha,
                k,
                values: Vec::new(),
            };
            let Some(data) = &standardized[ai] else {
                return (empty(), None);
            };
            let cfg = KmeansConfig {
                seed: derive_seed(config.seed, &[alpha.to_bits(), k as u64]),
                ..*config
            };
            let fitted = kmeans_fit(data, k, &cfg)
                .and_then(|p| compute_all(data, &p.labels).map(|v| (v, p)));
            match fitted {
                Ok((values, p)) => (CviCell { alpha, k, values }, Some(p)),
                Err(e) => {
                    log::warn!("α = {alpha}, K = {k}: {e}");
                    (empty(), None)
                }
            }
        })
        .collect();
    let (cells, partitions): (Vec<_>, Vec<_>) = outcomes.into_iter().unzip();
    Ok(AlphaKmeansResult {
        report: CviReport::new(cells),
        partitions,
    })
}

/// Outcome of one (α, K, model) fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpcmCell {
    pub alpha: f64,
    pub k: usize,
    pub model: GpcmModelId,
    /// Log-likelihood of the transformed data.
    pub loglik: Option<f64>,
    /// `loglik` plus the summed log-Jacobian: the likelihood of the compositions.
    pub adjusted_loglik: Option<f64>,
    pub n_params: Option<usize>,
    /// BIC of the adjusted log-likelihood; `None` when the fit failed.
    pub bic: Option<f64>,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaGpcmResult {
    /// Ordered by α, then K, then model.
    pub cells: Vec<GpcmCell>,
    pub best: GpcmCell,
    pub fit: GpcmFit,
    /// Zero-based MAP labels of the winning fit.
    pub labels: Vec<usize>,
    /// False when the data contain zeros and the likelihood is left unadjusted.
    pub jacobian_applied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaGpcmConfig {
    pub em: EmConfig,
    pub models: Vec<GpcmModelId>,
}

impl Default for AlphaGpcmConfig {
    fn default() -> Self {
        Self {
            em: EmConfig::default(),
            models: crate::gpcm::ALL_MODELS.to_vec(),
        }
    }
}

/// Fits every model for every (α, K) and returns the cell with the largest
/// Jacobian-adjusted BIC. Ties keep the earliest cell in (α, K, model) order.
///
/// Data with zeros have no finite Jacobian: the grid must then hold a single
/// positive α, and the likelihood of the transformed data is used as is.
pub fn alpha_gpcm(
    x: &CompositionMatrix,
    grid: &AlphaGrid,
    ks: &[usize],
    config: &AlphaGpcmConfig,
) -> Result<AlphaGpcmResult> {
    check_k_range(ks, x.nrows(), 1)?;
    check_zero_pattern(x, grid)?;
    if config.models.is_empty() {
        return Err(Error::InvalidGrid("no models requested".into()));
    }
    let jacobian_applied = !x.has_zeros();
    if !jacobian_applied {
        if grid.values.len() != 1 {
            return Err(Error::InvalidGrid(
                "data with zeros require a single fixed α".into(),
            ));
        }
        log::warn!(
            "data contain zeros: fitting at α = {} without the Jacobian adjustment",
            grid.values[0]
        );
    }
    let transformed: Vec<Option<TransformedMatrix>> = grid
        .values
        .iter()
        .map(|&a| {
            alpha_transform(x, a)
                .map_err(|e| log::warn!("α = {a}: {e}"))
                .ok()
        })
        .collect();
    let tasks: Vec<(usize, usize)> = (0..grid.values.len())
        .flat_map(|ai| ks.iter().map(move |&k| (ai, k)))
        .collect();
    let per_task: Vec<(Vec<GpcmCell>, Option<GpcmFit>)> = tasks
        .par_iter()
        .map(|&(ai, k)| fit_cell(&transformed[ai], grid.values[ai], k, config))
        .collect();

    let mut cells = Vec::with_capacity(tasks.len() * config.models.len());
    let mut best: Option<(GpcmCell, GpcmFit)> = None;
    for (task_cells, fit) in per_task {
        let Some(fit) = fit else {
            cells.extend(task_cells);
            continue;
        };
        let top = task_cells
            .iter()
            .find(|c| c.model == fit.model)
            .cloned()
            .expect("fit belongs to a cell");
        if best.as_ref().is_none_or(|(b, _)| top.bic > b.bic) {
            best = Some((top, fit));
        }
        cells.extend(task_cells);
    }
    let (best, fit) = best.ok_or(Error::AllCellsFailed)?;
    let labels = map_assign(&fit);
    Ok(AlphaGpcmResult {
        cells,
        best,
        fit,
        labels,
        jacobian_applied,
    })
}

/// All models at one (α, K), sharing the same initial partitions. Returns
/// the cells and the fit with the largest BIC among them.
fn fit_cell(
    y: &Option<TransformedMatrix>,
    alpha: f64,
    k: usize,
    config: &AlphaGpcmConfig,
) -> (Vec<GpcmCell>, Option<GpcmFit>) {
    let failed = |model, msg: String| GpcmCell {
        alpha,
        k,
        model,
        loglik: None,
        adjusted_loglik: None,
        n_params: None,
        bic: None,
        converged: false,
        error: Some(msg),
    };
    let Some(y) = y else {
        let cells = config
            .models
            .iter()
            .map(|&m| failed(m, "transformation failed".into()))
            .collect();
        return (cells, None);
    };
    let data = y.values();
    let n = data.nrows();
    let jacobian = y.total_log_jacobian().unwrap_or(0.0);
    let em = EmConfig {
        seed: derive_seed(config.em.seed, &[alpha.to_bits(), k as u64]),
        ..config.em
    };
    let inits = initial_partitions(data, k, &em);
    let mut cells = Vec::with_capacity(config.models.len());
    let mut best: Option<(f64, GpcmFit)> = None;
    for &model in &config.models {
        match em_fit_from(data, k, model, &em, &inits) {
            Ok(fit) => {
                let adjusted = fit.loglik + jacobian;
                let bic = bic_value(adjusted, fit.n_params, n);
                cells.push(GpcmCell {
                    alpha,
                    k,
                    model,
                    loglik: Some(fit.loglik),
                    adjusted_loglik: Some(adjusted),
                    n_params: Some(fit.n_params),
                    bic: Some(bic),
                    converged: fit.converged,
                    error: None,
                });
                if best.as_ref().is_none_or(|(b, _)| bic > *b) {
                    best = Some((bic, fit));
                }
            }
            Err(e) => {
                log::debug!("α = {alpha}, K = {k}, {model}: {e}");
                cells.push(failed(model, e.to_string()));
            }
        }
    }
    (cells, best.map(|(_, f)| f))
}

/// Wall-clock seconds of two pipelines and their ratio `second / first`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuntimeComparison {
    pub first_secs: f64,
    pub second_secs: f64,
    pub ratio: f64,
}

pub fn time_ratio<A, B>(first: impl FnOnce() -> A, second: impl FnOnce() -> B) -> RuntimeComparison {
    let t = Instant::now();
    std::hint::black_box(first());
    let first_secs = t.elapsed().as_secs_f64();
    let t = Instant::now();
    std::hint::black_box(second());
    let second_secs = t.elapsed().as_secs_f64();
    RuntimeComparison {
        first_secs,
        second_secs,
        ratio: second_secs / first_secs.max(1e-12),
    }
}

/// Cost of α-GPCM over all 14 models relative to α-K-means with all 33
/// indices, both at the single value `alpha` and over the same K range.
/// `first_secs` is the α-K-means time.
pub fn compare_runtimes(
    x: &CompositionMatrix,
    alpha: f64,
    ks: &[usize],
    kmeans: &KmeansConfig,
    gpcm: &AlphaGpcmConfig,
) -> Result<RuntimeComparison> {
    let grid = AlphaGrid::single(alpha, x)?;
    check_k_range(ks, x.nrows(), 2)?;
    Ok(time_ratio(
        || alpha_kmeans(x, &grid, ks, kmeans),
        || alpha_gpcm(x, &grid, ks, gpcm),
    ))
}
