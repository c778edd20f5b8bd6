//! Dirichlet mixture models (DMMs), partition agreement measures and the
//! Monte-Carlo driver that scores how well each pipeline recovers the number
//! of clusters.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::compositions::CompositionMatrix;
use crate::error::{Error, Result};
use crate::kmeans::KmeansConfig;
use crate::seeding::{derive_seed, hash_label, rng_from_seed, Rng};
use crate::selection::{alpha_gpcm, alpha_kmeans, AlphaGpcmConfig, AlphaGrid};

/// Mixture of Dirichlet distributions with precision φ = 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmmSpec {
    pub label: String,
    pub weights: Vec<f64>,
    /// One row of Dirichlet parameters per component.
    pub params: Vec<Vec<f64>>,
}

impl DmmSpec {
    pub fn new(label: impl Into<String>, weights: Vec<f64>, params: Vec<Vec<f64>>) -> Result<Self> {
        let spec = Self {
            label: label.into(),
            weights,
            params,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks the invariants; needed after deserialising.
    pub fn validate(&self) -> Result<()> {
        let k = self.weights.len();
        if k == 0 || self.params.len() != k {
            return Err(Error::InvalidSpec(format!(
                "{}: {} weights for {} parameter rows",
                self.label,
                k,
                self.params.len()
            )));
        }
        let p = self.params[0].len();
        if p < 2 || self.params.iter().any(|r| r.len() != p) {
            return Err(Error::InvalidSpec(format!("{}: ragged or too short parameter rows", self.label)));
        }
        if self.weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidSpec(format!("{}: weights must be positive", self.label)));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidSpec(format!("{}: weights sum to {total}", self.label)));
        }
        for row in &self.params {
            if let Some(i) = row.iter().position(|a| !(*a > 0.0 && a.is_finite())) {
                return Err(Error::NonpositiveParameter(i));
            }
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn p(&self) -> usize {
        self.params[0].len()
    }
}

const P3_ROWS: [[f64; 3]; 6] = [
    [12.0, 30.0, 45.0],
    [32.0, 50.0, 16.0],
    [55.0, 28.0, 35.0],
    [25.0, 18.0, 90.0],
    [3.0, 68.0, 60.0],
    [75.0, 2.0, 80.0],
];

/// Row indices into `P3_ROWS` and weights of the four p = 3 mixtures.
const P3_MIXTURES: [&[(usize, f64)]; 4] = [
    &[(0, 0.40), (1, 0.40), (2, 0.20)],
    &[(0, 0.30), (3, 0.30), (2, 0.20), (1, 0.20)],
    &[(0, 0.20), (3, 0.10), (2, 0.30), (1, 0.20), (4, 0.20)],
    &[(0, 0.20), (1, 0.24), (2, 0.21), (4, 0.11), (3, 0.13), (5, 0.11)],
];

const P5_MIXTURES: [&[(usize, f64)]; 4] = [
    &[(0, 0.30), (1, 0.30), (2, 0.40)],
    &[(0, 0.25), (3, 0.25), (2, 0.25), (1, 0.25)],
    &[(0, 0.35), (3, 0.15), (2, 0.25), (1, 0.10), (4, 0.15)],
    &[(0, 0.22), (1, 0.22), (2, 0.19), (4, 0.11), (3, 0.13), (5, 0.13)],
];

/// The p = 5 rows mirror the p = 3 rows: (a, b, c, b, a).
fn p5_row(i: usize) -> Vec<f64> {
    let [a, b, c] = P3_ROWS[i];
    vec![a, b, c, b, a]
}

/// Last five parameters of each p = 10 component; the first five are the p = 5 row.
const P10_TAILS: [&[(usize, [f64; 5], f64)]; 4] = [
    &[
        (0, [17.0, 31.0, 42.0, 30.0, 8.0], 0.30),
        (1, [34.0, 53.0, 15.0, 46.0, 32.0], 0.30),
        (2, [55.0, 32.0, 39.0, 25.0, 57.0], 0.40),
    ],
    &[
        (0, [13.0, 25.0, 44.0, 34.0, 8.0], 0.25),
        (3, [23.0, 17.0, 93.0, 14.0, 25.0], 0.25),
        (2, [59.0, 28.0, 39.0, 27.0, 53.0], 0.25),
        (1, [28.0, 53.0, 21.0, 46.0, 31.0], 0.25),
    ],
    &[
        (0, [11.0, 31.0, 47.0, 31.0, 16.0], 0.35),
        (3, [23.0, 16.0, 86.0, 23.0, 29.0], 0.15),
        (2, [52.0, 31.0, 31.0, 24.0, 59.0], 0.25),
        (1, [36.0, 47.0, 17.0, 54.0, 35.0], 0.10),
        (4, [1.0, 69.0, 62.0, 65.0, -1.0], 0.15),
    ],
    &[
        (0, [9.0, 31.0, 40.0, 34.0, 15.0], 0.22),
        (1, [37.0, 45.0, 11.0, 50.0, 32.0], 0.22),
        (2, [54.0, 26.0, 40.0, 33.0, 60.0], 0.19),
        (4, [1.0, 71.0, 61.0, 65.0, 6.0], 0.11),
        (3, [28.0, 18.0, 90.0, 22.0, 23.0], 0.13),
        (5, [72.0, -1.0, 76.0, 3.0, 77.0], 0.13),
    ],
];

/// Names accepted by [`builtin_spec`].
pub fn builtin_names() -> Vec<String> {
    [3, 5, 10]
        .iter()
        .flat_map(|p| (1..=4).map(move |m| format!("p{p}-dmm{m}")))
        .collect()
}

/// One of the twelve tabulated mixtures, e.g. `p3-dmm1` or `p10-dmm4`.
///
/// Two p = 10 entries are tabulated as −1, which no Dirichlet admits; they are
/// replaced by +1 with a warning.
pub fn builtin_spec(name: &str) -> Result<DmmSpec> {
    let lower = name.trim().to_ascii_lowercase();
    let unknown = || Error::InvalidSpec(format!("unknown built-in mixture `{name}`"));
    let (p, m) = lower
        .strip_prefix('p')
        .and_then(|r| r.split_once("-dmm"))
        .and_then(|(p, m)| Some((p.parse::<usize>().ok()?, m.parse::<usize>().ok()?)))
        .ok_or_else(unknown)?;
    if !(1..=4).contains(&m) {
        return Err(unknown());
    }
    let (weights, params): (Vec<f64>, Vec<Vec<f64>>) = match p {
        3 => P3_MIXTURES[m - 1]
            .iter()
            .map(|&(r, w)| (w, P3_ROWS[r].to_vec()))
            .unzip(),
        5 => P5_MIXTURES[m - 1].iter().map(|&(r, w)| (w, p5_row(r))).unzip(),
        10 => P10_TAILS[m - 1]
            .iter()
            .enumerate()
            .map(|(c, &(r, tail, w))| {
                let mut row = p5_row(r);
                for (j, &v) in tail.iter().enumerate() {
                    if v <= 0.0 {
                        log::warn!(
                            "{lower}: tabulated parameter {v} (component {}, part {}) is not a valid Dirichlet parameter; using 1",
                            c + 1,
                            j + 6
                        );
                        row.push(1.0);
                    } else {
                        row.push(v);
                    }
                }
                (w, row)
            })
            .unzip(),
        _ => return Err(unknown()),
    };
    DmmSpec::new(lower, weights, params)
}

fn gammas(a: &[f64]) -> Result<Vec<Gamma<f64>>> {
    a.iter()
        .enumerate()
        .map(|(i, &ai)| {
            if !(ai > 0.0 && ai.is_finite()) {
                return Err(Error::NonpositiveParameter(i));
            }
            Gamma::new(ai, 1.0).map_err(|_| Error::NonpositiveParameter(i))
        })
        .collect()
}

fn draw_row(dists: &[Gamma<f64>], rng: &mut Rng, out: &mut Vec<f64>) {
    loop {
        let start = out.len();
        let mut total = 0.0;
        for g in dists {
            let v = g.sample(rng);
            total += v;
            out.push(v);
        }
        if total > 0.0 {
            out[start..].iter_mut().for_each(|v| *v /= total);
            return;
        }
        // every draw underflowed; redraw the row
        out.truncate(start);
    }
}

/// `n` draws from Dirichlet(`a`), each a normalised vector of Gamma(a_i, 1) variates.
pub fn dirichlet_sample(a: &[f64], n: usize, seed: u64) -> Result<CompositionMatrix> {
    let dists = gammas(a)?;
    if n == 0 {
        return Err(Error::InvalidSpec("sample size must be positive".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut data = Vec::with_capacity(n * a.len());
    for _ in 0..n {
        draw_row(&dists, &mut rng, &mut data);
    }
    CompositionMatrix::new(DMatrix::from_row_slice(n, a.len(), &data))
}

/// `n` draws from the mixture and their zero-based component labels.
pub fn dmm_sample(spec: &DmmSpec, n: usize, seed: u64) -> Result<(CompositionMatrix, Vec<usize>)> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::InvalidSpec("sample size must be positive".into()));
    }
    let comps: Vec<Vec<Gamma<f64>>> = spec.params.iter().map(|a| gammas(a)).collect::<Result<_>>()?;
    let picker = WeightedIndex::new(&spec.weights).map_err(|e| Error::InvalidSpec(e.to_string()))?;
    let mut rng = rng_from_seed(seed);
    let mut data = Vec::with_capacity(n * spec.p());
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let c = picker.sample(&mut rng);
        labels.push(c);
        draw_row(&comps[c], &mut rng, &mut data);
    }
    let x = CompositionMatrix::new(DMatrix::from_row_slice(n, spec.p(), &data))?;
    Ok((x, labels))
}

/// Log density of Dirichlet(`a`) at an interior point.
pub fn dirichlet_log_density(a: &[f64], x: &[f64]) -> Result<f64> {
    if a.len() != x.len() {
        return Err(Error::InvalidSpec(format!("{} parameters for {} parts", a.len(), x.len())));
    }
    if x.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::BoundaryPoint);
    }
    let total: f64 = a.iter().sum();
    let mut l = ln_gamma(total);
    for (&ai, &xi) in a.iter().zip(x) {
        l += (ai - 1.0) * xi.ln() - ln_gamma(ai);
    }
    Ok(l)
}

pub fn dmm_density(spec: &DmmSpec, x: &[f64]) -> Result<f64> {
    let logs: Vec<f64> = spec
        .params
        .iter()
        .zip(&spec.weights)
        .map(|(a, w)| Ok(w.ln() + dirichlet_log_density(a, x)?))
        .collect::<Result<_>>()?;
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(max.exp() * logs.iter().map(|l| (l - max).exp()).sum::<f64>())
}

/// Contingency counts of two labelings: cells, row sums, column sums.
fn contingency(a: &[usize], b: &[usize]) -> Result<(Vec<u64>, Vec<u64>, Vec<u64>)> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            labels: a.len(),
            rows: b.len(),
        });
    }
    let mut cells: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *cells.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    Ok((
        cells.into_values().collect(),
        rows.into_values().collect(),
        cols.into_values().collect(),
    ))
}

fn pairs(m: u64) -> f64 {
    (m * m.saturating_sub(1) / 2) as f64
}

/// Adjusted Rand index (Hubert–Arabie). Two labelings that leave the index
/// undefined (both a single cluster, or both all singletons) score 1.
pub fn ari(a: &[usize], b: &[usize]) -> Result<f64> {
    let (cells, rows, cols) = contingency(a, b)?;
    let index: f64 = cells.iter().map(|&c| pairs(c)).sum();
    let sa: f64 = rows.iter().map(|&c| pairs(c)).sum();
    let sb: f64 = cols.iter().map(|&c| pairs(c)).sum();
    let total = pairs(a.len() as u64);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sa * sb / total;
    let max = 0.5 * (sa + sb);
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// Fowlkes–Mallows index over co-membership pairs; 0 when either labeling
/// has no co-clustered pair.
pub fn fmi(a: &[usize], b: &[usize]) -> Result<f64> {
    let (cells, rows, cols) = contingency(a, b)?;
    let tp: f64 = cells.iter().map(|&c| pairs(c)).sum();
    let sa: f64 = rows.iter().map(|&c| pairs(c)).sum();
    let sb: f64 = cols.iter().map(|&c| pairs(c)).sum();
    if sa == 0.0 || sb == 0.0 {
        return Ok(0.0);
    }
    Ok(tp / (sa * sb).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyMethod {
    AlphaKmeans,
    AlphaGpcm,
}

impl fmt::Display for StudyMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StudyMethod::AlphaKmeans => "alpha-kmeans",
            StudyMethod::AlphaGpcm => "alpha-gpcm",
        })
    }
}

impl FromStr for StudyMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "kmeans" | "alpha-kmeans" => Ok(StudyMethod::AlphaKmeans),
            "gpcm" | "alpha-gpcm" => Ok(StudyMethod::AlphaGpcm),
            _ => Err(Error::InvalidSpec(format!("unknown method `{s}`"))),
        }
    }
}

/// Name under which α-GPCM estimates are reported.
pub const GPCM_CRITERION: &str = "BIC";

/// The K (and α) picked by one criterion in one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    /// Validity index name, or [`GPCM_CRITERION`].
    pub criterion: String,
    pub k: Option<usize>,
    pub alpha: Option<f64>,
    /// `|k − true K|`
    pub abs_distance: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub spec: String,
    pub n: usize,
    pub replicate: usize,
    pub method: StudyMethod,
    pub true_k: usize,
    pub estimates: Vec<Estimate>,
    pub seed: u64,
    pub wall_secs: f64,
    /// Agreement of the α-GPCM labels with the generating components.
    pub ari: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub ks: Vec<usize>,
    /// α grid; `None` for the data-dependent default.
    pub alphas: Option<Vec<f64>>,
    pub kmeans: KmeansConfig,
    pub gpcm: AlphaGpcmConfig,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            ks: (2..=10).collect(),
            alphas: None,
            kmeans: KmeansConfig::default(),
            gpcm: AlphaGpcmConfig::default(),
        }
    }
}

/// Mean `|K̂ − K|` of one criterion over the successful replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub spec: String,
    pub n: usize,
    pub method: StudyMethod,
    pub criterion: String,
    pub mean_abs_distance: Option<f64>,
    /// Replicates in which the criterion chose α = 0.
    pub alpha_zero_count: usize,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyTable {
    pub rows: Vec<StudyRow>,
    pub trials: Vec<TrialResult>,
    /// `(spec, n, method, message)` for every replicate that errored.
    pub failures: Vec<(String, usize, StudyMethod, String)>,
}

impl StudyTable {
    pub fn row(&self, spec: &str, n: usize, method: StudyMethod, criterion: &str) -> Option<&StudyRow> {
        self.rows
            .iter()
            .find(|r| r.spec == spec && r.n == n && r.method == method && r.criterion == criterion)
    }

    /// Mean wall time of a method over its successful replicates.
    pub fn mean_wall_secs(&self, spec: &str, n: usize, method: StudyMethod) -> Option<f64> {
        let times: Vec<f64> = self
            .trials
            .iter()
            .filter(|t| t.spec == spec && t.n == n && t.method == method)
            .map(|t| t.wall_secs)
            .collect();
        (!times.is_empty()).then(|| times.iter().sum::<f64>() / times.len() as f64)
    }
}

/// Seed of one replicate, from the base seed, mixture label, n and replicate index.
pub fn replicate_seed(base: u64, label: &str, n: usize, replicate: usize) -> u64 {
    derive_seed(base, &[hash_label(label), n as u64, replicate as u64])
}

fn distance(k: Option<usize>, true_k: usize) -> Option<usize> {
    k.map(|k| k.abs_diff(true_k))
}

fn run_trial(
    spec: &DmmSpec,
    n: usize,
    replicate: usize,
    method: StudyMethod,
    base_seed: u64,
    config: &StudyConfig,
) -> Result<TrialResult> {
    let seed = replicate_seed(base_seed, &spec.label, n, replicate);
    let (x, truth) = dmm_sample(spec, n, seed)?;
    let grid = match &config.alphas {
        Some(v) => AlphaGrid::new(v.clone(), x.has_zeros())?,
        None => AlphaGrid::default_for(&x),
    };
    let true_k = spec.k();
    let started = Instant::now();
    let (estimates, ari_value) = match method {
        StudyMethod::AlphaKmeans => {
            let cfg = KmeansConfig {
                seed: derive_seed(seed, &[1]),
                ..config.kmeans
            };
            let result = alpha_kmeans(&x, &grid, &config.ks, &cfg)?;
            let est = result
                .report
                .selections
                .iter()
                .map(|s| Estimate {
                    criterion: s.index.name(),
                    k: s.selected.map(|v| v.k),
                    alpha: s.selected.map(|v| v.alpha),
                    abs_distance: distance(s.selected.map(|v| v.k), true_k),
                })
                .collect();
            (est, None)
        }
        StudyMethod::AlphaGpcm => {
            let mut cfg = config.gpcm.clone();
            cfg.em.seed = derive_seed(seed, &[2]);
            let result = alpha_gpcm(&x, &grid, &config.ks, &cfg)?;
            let est = vec![Estimate {
                criterion: GPCM_CRITERION.into(),
                k: Some(result.best.k),
                alpha: Some(result.best.alpha),
                abs_distance: distance(Some(result.best.k), true_k),
            }];
            (est, Some(ari(&truth, &result.labels)?))
        }
    };
    Ok(TrialResult {
        spec: spec.label.clone(),
        n,
        replicate,
        method,
        true_k,
        estimates,
        seed,
        wall_secs: started.elapsed().as_secs_f64(),
        ari: ari_value,
    })
}

/// Runs every (mixture, n, replicate, method) combination and tabulates the
/// mean distance between the estimated and true K for each criterion.
pub fn run_study(
    specs: &[DmmSpec],
    sample_sizes: &[usize],
    n_replicates: usize,
    methods: &[StudyMethod],
    base_seed: u64,
    config: &StudyConfig,
) -> Result<StudyTable> {
    for s in specs {
        s.validate()?;
    }
    let mut tasks = Vec::new();
    for (si, _) in specs.iter().enumerate() {
        for &n in sample_sizes {
            for &m in methods {
                for r in 0..n_replicates {
                    tasks.push((si, n, m, r));
                }
            }
        }
    }
    let outcomes: Vec<Result<TrialResult>> = tasks
        .par_iter()
        .map(|&(si, n, m, r)| run_trial(&specs[si], n, r, m, base_seed, config))
        .collect();

    let mut trials = Vec::new();
    let mut failures = Vec::new();
    for (&(si, n, m, r), outcome) in tasks.iter().zip(outcomes) {
        match outcome {
            Ok(t) => trials.push(t),
            Err(e) => {
                log::warn!("{} n={n} {m} replicate {r} failed: {e}", specs[si].label);
                failures.push((specs[si].label.clone(), n, m, e.to_string()));
            }
        }
    }

    let mut rows = Vec::new();
    for spec in specs {
        for &n in sample_sizes {
            for &m in methods {
                let group: Vec<&TrialResult> = trials
                    .iter()
                    .filter(|t| t.spec == spec.label && t.n == n && t.method == m)
                    .collect();
                let Some(first) = group.first() else {
                    continue;
                };
                for (ci, est) in first.estimates.iter().enumerate() {
                    let dists: Vec<usize> = group
                        .iter()
                        .filter_map(|t| t.estimates[ci].abs_distance)
                        .collect();
                    let mean = (!dists.is_empty())
                        .then(|| dists.iter().sum::<usize>() as f64 / dists.len() as f64);
                    let alpha_zero_count = group
                        .iter()
                        .filter(|t| t.estimates[ci].alpha == Some(0.0))
                        .count();
                    rows.push(StudyRow {
                        spec: spec.label.clone(),
                        n,
                        method: m,
                        criterion: est.criterion.clone(),
                        mean_abs_distance: mean,
                        alpha_zero_count,
                        replicates: dists.len(),
                    });
                }
            }
        }
    }
    Ok(StudyTable {
        rows,
        trials,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_match_the_tables() {
        let s = builtin_spec("p3-dmm1").unwrap();
        assert_eq!(s.weights, vec![0.4, 0.4, 0.2]);
        assert_eq!(s.params[2], vec![55.0, 28.0, 35.0]);
        let s = builtin_spec("P5-DMM2").unwrap();
        assert_eq!(s.k(), 4);
        assert_eq!(s.params[1], vec![25.0, 18.0, 90.0, 18.0, 25.0]);
        let s = builtin_spec("p3-dmm4").unwrap();
        assert_eq!(s.params[5], vec![75.0, 2.0, 80.0]);
        assert!((s.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        let s = builtin_spec("p10-dmm3").unwrap();
        assert_eq!(s.params[4][9], 1.0);
        assert_eq!(s.params[4][..5], [3.0, 68.0, 60.0, 68.0, 3.0]);
        let s = builtin_spec("p10-dmm4").unwrap();
        assert_eq!(s.params[5][6], 1.0);
        assert_eq!(s.params[3][9], 6.0);
        for name in builtin_names() {
            let s = builtin_spec(&name).unwrap();
            assert!((s.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12, "{name}");
        }
        assert!(builtin_spec("p4-dmm1").is_err());
        assert!(builtin_spec("p3-dmm5").is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(matches!(
            DmmSpec::new("x", vec![1.0], vec![vec![1.0, -1.0]]),
            Err(Error::NonpositiveParameter(1))
        ));
        assert!(DmmSpec::new("x", vec![0.5, 0.6], vec![vec![1.0, 1.0]; 2]).is_err());
        assert!(matches!(dirichlet_sample(&[1.0, 0.0], 5, 0), Err(Error::NonpositiveParameter(1))));
    }

    #[test]
    fn uniform_dirichlet_density() {
        let spec = DmmSpec::new("u", vec![1.0], vec![vec![1.0; 3]]).unwrap();
        for x in [[0.2, 0.3, 0.5], [0.9, 0.05, 0.05]] {
            assert!((dmm_density(&spec, &x).unwrap() - 2.0).abs() < 1e-12);
        }
        assert_eq!(dmm_density(&spec, &[0.5, 0.5, 0.0]), Err(Error::BoundaryPoint));
        let twin = DmmSpec::new("t", vec![0.5, 0.5], vec![vec![2.0, 3.0, 4.0]; 2]).unwrap();
        let one = DmmSpec::new("o", vec![1.0], vec![vec![2.0, 3.0, 4.0]]).unwrap();
        let x = [0.1, 0.3, 0.6];
        assert!((dmm_density(&twin, &x).unwrap() - dmm_density(&one, &x).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn samples_are_compositions() {
        let x = dirichlet_sample(&[0.5, 2.0, 3.0], 200, 9).unwrap();
        for i in 0..x.nrows() {
            let r = x.row(i);
            assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(x, dirichlet_sample(&[0.5, 2.0, 3.0], 200, 9).unwrap());
        let single = DmmSpec::new("s", vec![1.0], vec![vec![2.0, 2.0]]).unwrap();
        let (_, labels) = dmm_sample(&single, 50, 1).unwrap();
        assert!(labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn agreement_examples() {
        let a = [0, 0, 1, 1, 2, 2];
        let relabeled = [5, 5, 3, 3, 0, 0];
        assert_eq!(ari(&a, &a).unwrap(), 1.0);
        assert!((ari(&a, &relabeled).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(fmi(&a, &a).unwrap(), 1.0);
        assert_eq!(fmi(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap(), 0.0);
        assert_eq!(fmi(&[0; 4], &[0, 1, 2, 3]).unwrap(), 0.0);
        assert!(matches!(ari(&[0, 1], &[0]), Err(Error::LengthMismatch { .. })));
        // table [[2,1],[0,2]] by hand: index 2, row and column pair sums 4, expected 1.6, max 4
        let x = [0, 0, 0, 1, 1];
        let y = [0, 0, 1, 1, 1];
        assert!((ari(&x, &y).unwrap() - 0.4 / 2.4).abs() < 1e-12);
        assert!((fmi(&x, &y).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_study() {
        let spec = builtin_spec("p3-dmm1").unwrap();
        let t = run_study(&[spec], &[50], 0, &[StudyMethod::AlphaKmeans], 1, &StudyConfig::default()).unwrap();
        assert!(t.rows.is_empty() && t.trials.is_empty());
    }
}
