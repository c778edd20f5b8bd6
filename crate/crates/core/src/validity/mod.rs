//! Cluster validity indices (CVIs) and their selection over a grid of
//! partitions.
//!
//! [`compute_all`] evaluates every index in [`ALL_INDICES`] from a single
//! [`ClusterStats`] pass. Values that a formula cannot produce for a given
//! partition are reported as `None` and skipped by [`select_best`].

mod indices;
mod registry;
mod stats;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use indices::generalized_dunn;
pub(crate) use indices::spd_log_det;
pub use registry::{CviIndex, Direction, ALL_INDICES};
pub use stats::{cluster_count, cluster_statistics, ClusterStats, PairwiseSummary};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CviValue {
    pub index: CviIndex,
    pub direction: Direction,
    /// `None` when the index is undefined for the partition.
    pub value: Option<f64>,
}

/// Evaluates one index from precomputed statistics.
pub fn compute_index(index: CviIndex, stats: &ClusterStats) -> CviValue {
    CviValue {
        index,
        direction: index.direction(),
        value: indices::evaluate(index, stats),
    }
}

/// Evaluates one index by name.
pub fn compute_index_by_name(name: &str, stats: &ClusterStats) -> Result<CviValue> {
    Ok(compute_index(name.parse()?, stats))
}

/// All 33 indices for one partition, in registry order.
pub fn compute_all(data: &DMatrix<f64>, labels: &[usize]) -> Result<Vec<CviValue>> {
    let stats = cluster_statistics(data, labels)?;
    Ok(compute_all_from_stats(&stats))
}

pub fn compute_all_from_stats(stats: &ClusterStats) -> Vec<CviValue> {
    ALL_INDICES
        .iter()
        .map(|&index| compute_index(index, stats))
        .collect()
}

/// Index values for one (α, K) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CviCell {
    pub alpha: f64,
    pub k: usize,
    /// Registry-ordered values; empty when the cell failed entirely.
    pub values: Vec<CviValue>,
}

impl CviCell {
    pub fn value(&self, index: CviIndex) -> Option<f64> {
        self.values
            .iter()
            .find(|v| v.index == index)
            .and_then(|v| v.value)
    }
}

/// Winning cell for one index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub alpha: f64,
    pub k: usize,
    pub value: f64,
    /// Position of the winning cell in the grid.
    pub cell: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexSelection {
    pub index: CviIndex,
    pub direction: Direction,
    /// `None` when the index is undefined in every cell.
    pub selected: Option<Selection>,
}

/// Extremum of every index over the grid. Ties go to the smaller K, then the
/// smaller α.
pub fn select_best(cells: &[CviCell]) -> Vec<IndexSelection> {
    let mut order: Vec<usize> = (0..cells.len()).collect();
    order.sort_by(|&a, &b| {
        cells[a]
            .k
            .cmp(&cells[b].k)
            .then(cells[a].alpha.total_cmp(&cells[b].alpha))
    });
    ALL_INDICES
        .iter()
        .map(|&index| {
            let direction = index.direction();
            let mut selected: Option<Selection> = None;
            for &c in &order {
                let Some(value) = cells[c].value(index) else {
                    continue;
                };
                if selected.is_none_or(|s| direction.improves(value, s.value)) {
                    selected = Some(Selection {
                        alpha: cells[c].alpha,
                        k: cells[c].k,
                        value,
                        cell: c,
                    });
                }
            }
            IndexSelection {
                index,
                direction,
                selected,
            }
        })
        .collect()
}

/// Index values over an (α, K) grid together with each index's winner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CviReport {
    pub cells: Vec<CviCell>,
    pub selections: Vec<IndexSelection>,
}

impl CviReport {
    pub fn new(cells: Vec<CviCell>) -> Self {
        let selections = select_best(&cells);
        Self { cells, selections }
    }

    pub fn selection(&self, index: CviIndex) -> Option<Selection> {
        self.selections
            .iter()
            .find(|s| s.index == index)
            .and_then(|s| s.selected)
    }
}
