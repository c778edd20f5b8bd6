use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use alphaclust::compositions::{alpha_transform_with, CompositionMatrix, TransformOptions};
use alphaclust::gpcm::{parse_model_list, EmConfig, GpcmFit};
use alphaclust::kmeans::{kmeans_fit, standardize, KmeansConfig};
use alphaclust::selection::{alpha_gpcm, alpha_kmeans, parse_alpha_values, AlphaGpcmConfig, AlphaGrid};
use alphaclust::simulation::{builtin_names, builtin_spec, dmm_sample, run_study, DmmSpec, StudyConfig, StudyMethod};
use alphaclust::validity::compute_all;
use alphaclust_cli::{
    emit_report, fmt_f64, fmt_opt, labels_table, load_compositions, load_labels, load_matrix,
    write_compositions, write_json, write_manifest, write_table, CliError, Format, LoadOptions, Manifest, Result,
    Table,
};
use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "alphaclust", version, about = "Clustering of compositional data via the α-transformation")]
struct Cli {
    /// Base seed for every randomised step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Format of the main report.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Directory receiving every output file.
    #[arg(long, global = true, env = "ALPHACLUST_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Input {
    /// CSV of compositions, one row per observation.
    #[arg(long, short)]
    input: PathBuf,
    /// The first line is a header.
    #[arg(long)]
    header: bool,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    /// Divide rows by their sums (e.g. percentages).
    #[arg(long)]
    close: bool,
}

impl Input {
    fn options(&self) -> LoadOptions {
        LoadOptions {
            header: self.header,
            delimiter: self.delimiter as u8,
            close: self.close,
        }
    }

    fn load(&self) -> Result<CompositionMatrix> {
        load_compositions(&self.input, &self.options())
    }
}

#[derive(Args, Clone)]
struct KRange {
    #[arg(long, default_value_t = 2)]
    k_min: usize,
    #[arg(long, default_value_t = 10)]
    k_max: usize,
}

impl KRange {
    fn values(&self, n: usize) -> Result<Vec<usize>> {
        if self.k_min < 1 || self.k_min > self.k_max || self.k_max >= n {
            return Err(CliError::Invalid(format!(
                "K range {}..={} must lie within 1..={}",
                self.k_min,
                self.k_max,
                n.saturating_sub(1)
            )));
        }
        Ok((self.k_min..=self.k_max).collect())
    }
}

#[derive(Args, Clone)]
struct EmArgs {
    /// EM starts per (α, K, model).
    #[arg(long, default_value_t = 5)]
    starts: usize,
    #[arg(long, default_value_t = 500)]
    em_max_iter: usize,
    /// Relative log-likelihood change regarded as converged.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Covariance models: `all` or a comma list such as `EII,VVV`.
    #[arg(long, default_value = "all")]
    models: String,
}

impl EmArgs {
    fn config(&self, seed: u64) -> Result<AlphaGpcmConfig> {
        Ok(AlphaGpcmConfig {
            em: EmConfig {
                seed,
                n_starts: self.starts,
                max_iter: self.em_max_iter,
                rel_tol: self.tol,
            },
            models: parse_model_list(&self.models)?,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Apply the α-transformation and write the coordinates with log-Jacobians.
    Transform {
        #[command(flatten)]
        input: Input,
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        /// Accept α outside [-1, 1].
        #[arg(long)]
        no_range_check: bool,
    },
    /// K-means on the standardized α-transformed data.
    Kmeans {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        k: usize,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        alpha: f64,
        #[arg(long, default_value_t = 10)]
        restarts: usize,
        #[arg(long, default_value_t = 100)]
        max_iter: usize,
    },
    /// Gaussian parsimonious mixtures at one α, compared by BIC.
    Gpcm {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        ks: KRange,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        alpha: f64,
        #[command(flatten)]
        em: EmArgs,
    },
    /// The 33 validity indices of a given labelling.
    Validate {
        /// Numeric data; compositions when --alpha is given.
        #[command(flatten)]
        input: Input,
        /// One 1-based label per line.
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        labels_header: bool,
        /// Transform and standardize the compositions first.
        #[arg(long, allow_hyphen_values = true)]
        alpha: Option<f64>,
    },
    /// Choose α and K with α-K-means, α-GPCM or both.
    Select {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_enum, default_value_t = Method::Both)]
        method: Method,
        /// `lo:hi:step` or a comma list (default -1:1:0.1, or 0.1:1:0.1 with zeros).
        #[arg(long, allow_hyphen_values = true)]
        alpha_grid: Option<String>,
        #[command(flatten)]
        ks: KRange,
        #[arg(long, default_value_t = 10)]
        restarts: usize,
        #[command(flatten)]
        em: EmArgs,
    },
    /// Monte-Carlo study on Dirichlet mixtures.
    Simulate {
        /// Built-in mixture name or a JSON file holding a mixture; repeatable.
        #[arg(long, required = true)]
        spec: Vec<String>,
        /// Sample sizes, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "300")]
        n: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        reps: usize,
        #[arg(long, value_delimiter = ',', default_value = "kmeans")]
        methods: Vec<String>,
        #[command(flatten)]
        ks: KRange,
        #[arg(long, allow_hyphen_values = true)]
        alpha_grid: Option<String>,
        #[arg(long, default_value_t = 10)]
        restarts: usize,
        #[command(flatten)]
        em: EmArgs,
        /// Only write one sample (first spec, first n) and its labels.
        #[arg(long)]
        sample_only: bool,
    },
    /// List the built-in mixtures.
    Specs,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Method {
    Kmeans,
    Gpcm,
    Both,
}

struct Outputs {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Outputs {
    fn path(&mut self, name: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.dir).map_err(|e| CliError::Io {
            path: self.dir.clone(),
            message: e.to_string(),
        })?;
        let p = self.dir.join(name);
        self.files.push(p.clone());
        Ok(p)
    }

    fn table(&mut self, name: &str, table: &Table) -> Result<()> {
        write_table(&self.path(name)?, table)
    }

    fn json(&mut self, name: &str, value: &Value) -> Result<()> {
        write_json(&self.path(name)?, value)
    }

    fn report(&mut self, name: &str, format: Format, value: &Value, table: &Table) -> Result<()> {
        let p = emit_report(&self.dir, name, format, value, table)?;
        self.files.push(p);
        Ok(())
    }
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn fit_json(fit: &GpcmFit) -> Value {
    json!({
        "model": fit.model,
        "k": fit.k,
        "weights": fit.weights,
        "means": fit.means,
        "covariances": fit.covariances.iter().map(matrix_rows).collect::<Vec<_>>(),
        "loglik": fit.loglik,
        "n_params": fit.n_params,
        "bic": fit.bic,
        "iterations": fit.iterations,
        "converged": fit.converged,
    })
}

fn standardized_image(x: &CompositionMatrix, alpha: f64) -> Result<DMatrix<f64>> {
    let y = alpha_transform_with(x, alpha, TransformOptions::default())?;
    Ok(standardize(y.values())?.values().clone())
}

fn resolve_grid(spec: &Option<String>, x: &CompositionMatrix) -> Result<AlphaGrid> {
    Ok(match spec {
        Some(s) => AlphaGrid::parse(s, x)?,
        None => AlphaGrid::default_for(x),
    })
}

fn load_spec(name: &str) -> Result<DmmSpec> {
    let path = Path::new(name);
    if !path.exists() {
        return Ok(builtin_spec(name)?);
    }
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let spec: DmmSpec = serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{name}: {e}")))?;
    spec.validate()?;
    Ok(spec)
}

/// Runs one subcommand; returns its input path and effective settings.
fn run(cli: &Cli, out: &mut Outputs) -> Result<(Option<PathBuf>, Value)> {
    let seed = cli.seed;
    match &cli.command {
        Command::Transform {
            input,
            alpha,
            no_range_check,
        } => {
            let x = input.load()?;
            let options = TransformOptions {
                enforce_range: !no_range_check,
            };
            let y = alpha_transform_with(&x, *alpha, options)?;
            let d = y.values().ncols();
            let mut header: Vec<String> = (1..=d).map(|j| format!("y{j}")).collect();
            header.push("log_jacobian".into());
            let mut table = Table {
                header,
                rows: Vec::new(),
            };
            for (i, row) in y.values().row_iter().enumerate() {
                let mut r: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
                r.push(fmt_opt(y.log_jacobian().map(|j| j[i])));
                table.push(r);
            }
            let value = json!({
                "alpha": alpha,
                "values": matrix_rows(y.values()),
                "log_jacobian": y.log_jacobian(),
            });
            out.report("transformed", cli.format, &value, &table)?;
            Ok((Some(input.input.clone()), json!({ "alpha": alpha, "enforce_range": !no_range_check })))
        }
        Command::Kmeans {
            input,
            k,
            alpha,
            restarts,
            max_iter,
        } => {
            let x = input.load()?;
            let data = standardized_image(&x, *alpha)?;
            let config = KmeansConfig {
                seed,
                restarts: *restarts,
                max_iter: *max_iter,
                ..KmeansConfig::default()
            };
            let p = kmeans_fit(&data, *k, &config)?;
            out.table("labels.csv", &labels_table(&p.labels))?;
            let summary = json!({
                "alpha": alpha,
                "k": k,
                "sizes": p.sizes,
                "centroids": p.centroids,
                "wcss": p.wcss,
                "iterations": p.iterations,
                "converged": p.converged,
            });
            out.json("kmeans.json", &summary)?;
            Ok((Some(input.input.clone()), json!({ "alpha": alpha, "k": k, "kmeans": config })))
        }
        Command::Gpcm { input, ks, alpha, em } => {
            let x = input.load()?;
            let ks = ks.values(x.nrows())?;
            let config = em.config(seed)?;
            let grid = AlphaGrid::single(*alpha, &x)?;
            let r = alpha_gpcm(&x, &grid, &ks, &config)?;
            out.table("labels.csv", &labels_table(&r.labels))?;
            let mut table = Table::new(&["alpha", "k", "model", "loglik", "adjusted_loglik", "n_params", "bic", "converged"]);
            for c in &r.cells {
                table.push(vec![
                    fmt_f64(c.alpha),
                    c.k.to_string(),
                    c.model.to_string(),
                    fmt_opt(c.loglik),
                    fmt_opt(c.adjusted_loglik),
                    c.n_params.map(|v| v.to_string()).unwrap_or_default(),
                    fmt_opt(c.bic),
                    c.converged.to_string(),
                ]);
            }
            out.table("gpcm_grid.csv", &table)?;
            let value = json!({
                "alpha": alpha,
                "jacobian_applied": r.jacobian_applied,
                "cells": r.cells,
                "best": r.best,
                "fit": fit_json(&r.fit),
            });
            out.json("gpcm.json", &value)?;
            Ok((Some(input.input.clone()), json!({ "alpha": alpha, "ks": ks, "gpcm": config })))
        }
        Command::Validate {
            input,
            labels,
            labels_header,
            alpha,
        } => {
            let data = match alpha {
                Some(a) => standardized_image(&input.load()?, *a)?,
                None => load_matrix(&input.input, &input.options())?,
            };
            let assigned = load_labels(labels, *labels_header)?;
            let values = compute_all(&data, &assigned)?;
            let mut table = Table::new(&["index", "direction", "value"]);
            for v in &values {
                table.push(vec![v.index.name(), format!("{:?}", v.direction).to_lowercase(), fmt_opt(v.value)]);
            }
            out.report("validity", cli.format, &serde_json::to_value(&values).unwrap_or_default(), &table)?;
            Ok((Some(input.input.clone()), json!({ "alpha": alpha, "labels": labels, "labels_header": labels_header })))
        }
        Command::Select {
            input,
            method,
            alpha_grid,
            ks,
            restarts,
            em,
        } => {
            let x = input.load()?;
            let grid = resolve_grid(alpha_grid, &x)?;
            let ks = ks.values(x.nrows())?;
            let mut report = serde_json::Map::new();
            let mut table = Table::new(&["method", "criterion", "direction", "alpha", "k", "value"]);
            let kcfg = KmeansConfig {
                seed,
                restarts: *restarts,
                ..KmeansConfig::default()
            };
            let gcfg = em.config(seed)?;
            if matches!(method, Method::Kmeans | Method::Both) {
                let r = alpha_kmeans(&x, &grid, &ks, &kcfg)?;
                for s in &r.report.selections {
                    let sel = s.selected;
                    table.push(vec![
                        "alpha-kmeans".into(),
                        s.index.name(),
                        format!("{:?}", s.index.direction()).to_lowercase(),
                        fmt_opt(sel.map(|v| v.alpha)),
                        sel.map(|v| v.k.to_string()).unwrap_or_default(),
                        fmt_opt(sel.map(|v| v.value)),
                    ]);
                }
                report.insert("alpha_kmeans".into(), serde_json::to_value(&r.report).unwrap_or_default());
            }
            if matches!(method, Method::Gpcm | Method::Both) {
                let r = alpha_gpcm(&x, &grid, &ks, &gcfg)?;
                table.push(vec![
                    "alpha-gpcm".into(),
                    format!("BIC ({})", r.best.model),
                    "maximize".into(),
                    fmt_f64(r.best.alpha),
                    r.best.k.to_string(),
                    fmt_opt(r.best.bic),
                ]);
                out.table("gpcm_labels.csv", &labels_table(&r.labels))?;
                report.insert(
                    "alpha_gpcm".into(),
                    json!({
                        "jacobian_applied": r.jacobian_applied,
                        "cells": r.cells,
                        "best": r.best,
                        "fit": fit_json(&r.fit),
                    }),
                );
            }
            out.json("select.json", &Value::Object(report))?;
            out.table("selections.csv", &table)?;
            Ok((
                Some(input.input.clone()),
                json!({ "alpha_grid": grid.values(), "ks": ks, "kmeans": kcfg, "gpcm": gcfg }),
            ))
        }
        Command::Simulate {
            spec,
            n,
            reps,
            methods,
            ks,
            alpha_grid,
            restarts,
            em,
            sample_only,
        } => {
            let specs: Vec<DmmSpec> = spec.iter().map(|s| load_spec(s)).collect::<Result<_>>()?;
            if *sample_only {
                let (x, labels) = dmm_sample(&specs[0], n[0], seed)?;
                write_compositions(&out.path("sample.csv")?, &x)?;
                out.table("sample_labels.csv", &labels_table(&labels))?;
                return Ok((None, json!({ "spec": specs[0], "n": n[0] })));
            }
            let methods: Vec<StudyMethod> = methods.iter().map(|m| m.parse()).collect::<alphaclust::Result<_>>()?;
            let smallest = n.iter().copied().min().unwrap_or(0);
            let config = StudyConfig {
                ks: ks.values(smallest)?,
                alphas: alpha_grid.as_deref().map(parse_alpha_values).transpose()?,
                kmeans: KmeansConfig {
                    restarts: *restarts,
                    ..KmeansConfig::default()
                },
                gpcm: em.config(seed)?,
            };
            let table = run_study(&specs, n, *reps, &methods, seed, &config)?;
            for f in &table.failures {
                log::warn!("{} n={} {}: replicate failed: {}", f.0, f.1, f.2, f.3);
            }
            let mut csv = Table::new(&["spec", "n", "method", "criterion", "mean_abs_distance", "alpha_zero_count", "replicates"]);
            for r in &table.rows {
                csv.push(vec![
                    r.spec.clone(),
                    r.n.to_string(),
                    r.method.to_string(),
                    r.criterion.clone(),
                    fmt_opt(r.mean_abs_distance),
                    r.alpha_zero_count.to_string(),
                    r.replicates.to_string(),
                ]);
            }
            out.report("study", cli.format, &serde_json::to_value(&table).unwrap_or_default(), &csv)?;
            let mut times = Table::new(&["spec", "n", "method", "mean_wall_secs"]);
            for s in &specs {
                for &size in n {
                    for &m in &methods {
                        times.push(vec![
                            s.label.clone(),
                            size.to_string(),
                            m.to_string(),
                            fmt_opt(table.mean_wall_secs(&s.label, size, m)),
                        ]);
                    }
                }
            }
            out.table("study_times.csv", &times)?;
            Ok((None, json!({ "specs": specs, "n": n, "reps": reps, "methods": methods, "study": config })))
        }
        Command::Specs => {
            let mut t = Table::new(&["name", "parts", "components"]);
            for name in builtin_names() {
                let s = builtin_spec(&name)?;
                t.push(vec![name, s.p().to_string(), s.k().to_string()]);
            }
            let value = json!(builtin_names()
                .iter()
                .map(|n| builtin_spec(n).map(|s| json!(s)).unwrap_or(Value::Null))
                .collect::<Vec<_>>());
            out.report("specs", cli.format, &value, &t)?;
            Ok((None, Value::Null))
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Transform { .. } => "transform",
        Command::Kmeans { .. } => "kmeans",
        Command::Gpcm { .. } => "gpcm",
        Command::Validate { .. } => "validate",
        Command::Select { .. } => "select",
        Command::Simulate { .. } => "simulate",
        Command::Specs => "specs",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    let started = Instant::now();
    let mut out = Outputs {
        dir: cli.out_dir.clone(),
        files: Vec::new(),
    };
    let result = run(&cli, &mut out).and_then(|(input, config)| {
        let manifest = Manifest {
            command: command_name(&cli.command).into(),
            args: std::env::args().collect(),
            input,
            seed: cli.seed,
            threads: rayon::current_num_threads(),
            version: env!("CARGO_PKG_VERSION").into(),
            wall_secs: started.elapsed().as_secs_f64(),
            outputs: out.files.clone(),
            config,
        };
        write_manifest(&out.dir, &manifest)
    });
    match result {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
