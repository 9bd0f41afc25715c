//! Monte Carlo runs over model, n and p grids.
//!
//! [`run`] is pure and deterministic given the config; [`write_outputs`]
//! does all file I/O.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::analysis::{
    bound_csv, evaluate_bound, fit_loglog_unchecked, in_regime, q_functional, BoundParams,
    LogLogFit, RateBound,
};
use crate::error::{Error, Result};
use crate::estimator::{estimate, EstimatorConfig, PMode};
use crate::isotonic::{ProjectionMethod, ProjectionOptions};
use crate::matrix::frobenius_mse;
use crate::models::{generate, generate_sorted, stream_rng, ModelParams, ModelSpec};
use crate::observation::sample_with;
use crate::plot::{render_loglog, Overlay};

/// Presets shipped with the crate.
pub const BUILTIN_PRESETS: &str = include_str!("../configs/presets.toml");

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSettings {
    #[serde(default)]
    pub projection: ProjectionMethod,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
    /// Divide by the cell's true p instead of the observed fraction.
    #[serde(default)]
    pub known_p: bool,
}

impl EstimatorSettings {
    pub fn config(&self, p: f64, tie_seed: u64) -> EstimatorConfig {
        let defaults = ProjectionOptions::default();
        EstimatorConfig {
            p_mode: if self.known_p {
                PMode::UseKnownP(p)
            } else {
                PMode::UseEstimatedP
            },
            projection: ProjectionOptions {
                method: self.projection,
                tol: self.tol.unwrap_or(defaults.tol),
                max_iters: self.max_iters.unwrap_or(defaults.max_iters),
            },
            tie_seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Table name in the config file.
    #[serde(skip)]
    pub name: String,
    pub models: Vec<ModelParams>,
    pub n_grid: Vec<usize>,
    pub p_grid: Vec<f64>,
    pub replicates: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub estimator: EstimatorSettings,
    /// Output directory; `results/<name>` when absent.
    #[serde(default)]
    pub outputs: Option<PathBuf>,
    #[serde(default)]
    pub overlays: Vec<RateBound>,
    /// Write wall-clock times; off by default so reruns are byte-identical.
    #[serde(default)]
    pub record_runtime: bool,
}

impl ExperimentConfig {
    pub fn output_dir(&self) -> PathBuf {
        self.outputs
            .clone()
            .unwrap_or_else(|| Path::new("results").join(&self.name))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::invalid(format!("preset `{}`: {msg}", self.name)));
        if self.models.is_empty() {
            return bad("no models".into());
        }
        if self.n_grid.is_empty() || self.n_grid.contains(&0) {
            return bad(format!(
                "n_grid must be nonempty and positive, got {:?}",
                self.n_grid
            ));
        }
        if self.p_grid.is_empty() || self.p_grid.iter().any(|p| !(*p > 0.0 && *p <= 1.0)) {
            return bad(format!(
                "p_grid values must lie in (0, 1], got {:?}",
                self.p_grid
            ));
        }
        if self.replicates == 0 {
            return bad("replicates must be positive".into());
        }
        let labels: BTreeSet<String> = self.models.iter().map(ModelParams::label).collect();
        if labels.len() != self.models.len() {
            return bad("two models share a label".into());
        }
        for params in &self.models {
            for &n in &self.n_grid {
                ModelSpec {
                    n,
                    seed: 0,
                    params: params.clone(),
                }
                .validate()
                .map_err(|e| e.context(format!("preset `{}`", self.name)))?;
            }
        }
        Ok(())
    }
}

/// Parses a config file: one table per preset.
pub fn parse_config(text: &str) -> Result<Vec<ExperimentConfig>> {
    let table: toml::Table = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let mut out = Vec::new();
    for (name, value) in table {
        let mut cfg: ExperimentConfig = value
            .try_into()
            .map_err(|e: toml::de::Error| Error::Parse(format!("preset `{name}`: {e}")))?;
        cfg.name = name;
        out.push(cfg);
    }
    Ok(out)
}

pub fn load_config(path: &Path) -> Result<Vec<ExperimentConfig>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text).map_err(|e| e.context(format!("reading {}", path.display())))
}

pub fn builtin_presets() -> Result<Vec<ExperimentConfig>> {
    parse_config(BUILTIN_PRESETS)
}

/// Picks one preset by name, or all when `name` is `None`.
pub fn select(presets: Vec<ExperimentConfig>, name: Option<&str>) -> Result<Vec<ExperimentConfig>> {
    match name {
        None => Ok(presets),
        Some(want) => {
            let names: Vec<String> = presets.iter().map(|c| c.name.clone()).collect();
            let found: Vec<_> = presets.into_iter().filter(|c| c.name == want).collect();
            if found.is_empty() {
                return Err(Error::invalid(format!(
                    "no preset `{want}`; available: {}",
                    names.join(", ")
                )));
            }
            Ok(found)
        }
    }
}

fn hash_u64(text: &str) -> u64 {
    let digest = Sha256::digest(text.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Seed of one replicate, a hash of every coordinate of the cell.
pub fn cell_seed(master: u64, label: &str, n: usize, p: f64, replicate: usize) -> u64 {
    hash_u64(&format!(
        "{master}|{label}|{n}|{:016x}|{replicate}",
        p.to_bits()
    ))
}

fn tie_seed(seed: u64) -> u64 {
    hash_u64(&format!("{seed}|ties"))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplicateRecord {
    pub family: String,
    pub n: usize,
    pub p: f64,
    pub replicate: usize,
    pub seed: u64,
    pub mse: f64,
    pub runtime_ms: f64,
    pub proj_iters: usize,
    pub final_delta: f64,
    pub clipped_cells: usize,
    pub fallback: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplicateFailure {
    pub family: String,
    pub n: usize,
    pub p: f64,
    pub replicate: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellSummary {
    pub family: String,
    pub n: usize,
    pub p: f64,
    pub completed: usize,
    pub failed: usize,
    /// `None` when every replicate failed.
    pub mean_mse: Option<f64>,
    pub stderr: Option<f64>,
    pub q_value: f64,
    pub bound_main: f64,
    pub in_regime: bool,
    /// `(bound, value)` for each configured overlay.
    pub overlays: Vec<(RateBound, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlopeSummary {
    pub family: String,
    pub p: f64,
    pub fit: LogLogFit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub records: Vec<ReplicateRecord>,
    pub failures: Vec<ReplicateFailure>,
    pub summary: Vec<CellSummary>,
    pub slopes: Vec<SlopeSummary>,
}

impl ExperimentResult {
    pub fn slope(&self, family: &str, p: f64) -> Option<f64> {
        self.slopes
            .iter()
            .find(|s| s.family == family && s.p == p)
            .map(|s| s.fit.slope)
    }
}

struct Task<'a> {
    params: &'a ModelParams,
    label: &'a str,
    n: usize,
    p: f64,
    replicate: usize,
}

fn run_replicate(
    task: &Task<'_>,
    cfg: &ExperimentConfig,
) -> std::result::Result<ReplicateRecord, ReplicateFailure> {
    let seed = cell_seed(cfg.master_seed, task.label, task.n, task.p, task.replicate);
    let start = Instant::now();
    let outcome = (|| -> Result<_> {
        let spec = ModelSpec {
            n: task.n,
            seed,
            params: task.params.clone(),
        };
        let (theta, pi) = generate(&spec)?;
        let truth = theta.permuted(&pi)?;
        let obs = sample_with(&truth, task.p, &mut stream_rng(seed, 2))?;
        let est = estimate(&obs, &cfg.estimator.config(task.p, tie_seed(seed)))?;
        let mse = frobenius_mse(est.theta.matrix(), truth.matrix())?;
        Ok((mse, est))
    })();
    let runtime_ms = if cfg.record_runtime {
        start.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    };
    match outcome {
        Ok((mse, est)) => Ok(ReplicateRecord {
            family: task.label.to_string(),
            n: task.n,
            p: task.p,
            replicate: task.replicate,
            seed,
            mse,
            runtime_ms,
            proj_iters: est.diagnostics.iterations,
            final_delta: est.diagnostics.final_delta,
            clipped_cells: est.diagnostics.clipped_cells,
            fallback: est.fallback,
        }),
        Err(e) => Err(ReplicateFailure {
            family: task.label.to_string(),
            n: task.n,
            p: task.p,
            replicate: task.replicate,
            seed,
            error: e.to_string(),
        }),
    }
}

/// Runs every replicate of every cell on a pool of `jobs` workers (all
/// cores when `None`). Output order is fixed by the grid, not by timing.
pub fn run(config: &ExperimentConfig, jobs: Option<usize>) -> Result<ExperimentResult> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::invalid(format!("worker pool: {e}")))?;
    let labels: Vec<String> = config.models.iter().map(ModelParams::label).collect();
    let mut cells = Vec::new();
    for (params, label) in config.models.iter().zip(&labels) {
        for &n in &config.n_grid {
            for &p in &config.p_grid {
                cells.push((params, label.as_str(), n, p));
            }
        }
    }
    let tasks: Vec<Task<'_>> = cells
        .iter()
        .flat_map(|&(params, label, n, p)| {
            (0..config.replicates).map(move |replicate| Task {
                params,
                label,
                n,
                p,
                replicate,
            })
        })
        .collect();

    let (outcomes, qs) = pool.install(|| {
        let outcomes: Vec<_> = tasks.par_iter().map(|t| run_replicate(t, config)).collect();
        let qs: Result<Vec<f64>> = cells
            .iter()
            .map(|&(params, label, n, p)| {
                let spec = ModelSpec {
                    n,
                    seed: cell_seed(config.master_seed, label, n, p, 0),
                    params: params.clone(),
                };
                Ok(q_functional(&generate_sorted(&spec)?, p))
            })
            .collect();
        (outcomes, qs)
    });
    let qs = qs?;

    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut summary = Vec::new();
    for (c, chunk) in outcomes.chunks(config.replicates).enumerate() {
        let (params, label, n, p) = cells[c];
        let mut mses = Vec::new();
        let mut failed = 0;
        for o in chunk {
            match o {
                Ok(r) => {
                    mses.push(r.mse);
                    records.push(r.clone());
                }
                Err(f) => {
                    failed += 1;
                    failures.push(f.clone());
                }
            }
        }
        let (mean_mse, stderr) = mean_and_stderr(&mses);
        let bp = BoundParams::from_model(params).with_q(qs[c]);
        let bound_main = if n >= 2 {
            evaluate_bound(RateBound::Main, n, p, &bp)?.value
        } else {
            f64::NAN
        };
        let overlays = if n >= 2 {
            config
                .overlays
                .iter()
                .map(|&b| Ok((b, evaluate_bound(b, n, p, &bp)?.value)))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| e.context(format!("overlay for {label}")))?
        } else {
            Vec::new()
        };
        summary.push(CellSummary {
            family: label.to_string(),
            n,
            p,
            completed: mses.len(),
            failed,
            mean_mse,
            stderr,
            q_value: qs[c],
            bound_main,
            in_regime: n >= 2 && in_regime(n, p),
            overlays,
        });
    }

    let mut slopes = Vec::new();
    for label in &labels {
        for &p in &config.p_grid {
            let pts = curve(&summary, label, p);
            if distinct_n(&pts) >= 2 {
                slopes.push(SlopeSummary {
                    family: label.clone(),
                    p,
                    fit: fit_loglog_unchecked(&pts)?,
                });
            }
        }
    }

    Ok(ExperimentResult {
        config: config.clone(),
        records,
        failures,
        summary,
        slopes,
    })
}

fn mean_and_stderr(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let stderr = if xs.len() < 2 {
        0.0
    } else {
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
        (var / m).sqrt()
    };
    (Some(mean), Some(stderr))
}

/// `(n, mean mse)` points of one model and p with a positive mean.
fn curve(summary: &[CellSummary], label: &str, p: f64) -> Vec<(f64, f64)> {
    summary
        .iter()
        .filter(|s| s.family == label && s.p == p)
        .filter_map(|s| s.mean_mse.filter(|m| *m > 0.0).map(|m| (s.n as f64, m)))
        .collect()
}

fn distinct_n(pts: &[(f64, f64)]) -> usize {
    let mut xs: Vec<u64> = pts.iter().map(|p| p.0.to_bits()).collect();
    xs.sort_unstable();
    xs.dedup();
    xs.len()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn results_csv(result: &ExperimentResult) -> String {
    let mut s = String::from("family,n,p,replicate,seed,mse,runtime_ms,proj_iters,fallback\n");
    for r in &result.records {
        writeln!(
            s,
            "{},{},{},{},{},{},{:.3},{},{}",
            r.family, r.n, r.p, r.replicate, r.seed, r.mse, r.runtime_ms, r.proj_iters, r.fallback
        )
        .unwrap();
    }
    s
}

pub fn summary_csv(result: &ExperimentResult) -> String {
    let mut s = String::from("family,n,p,mean_mse,stderr,q_value,bound_main\n");
    for c in &result.summary {
        writeln!(
            s,
            "{},{},{},{},{},{},{}",
            c.family,
            c.n,
            c.p,
            opt(c.mean_mse),
            opt(c.stderr),
            c.q_value,
            c.bound_main
        )
        .unwrap();
    }
    s
}

pub fn slopes_csv(result: &ExperimentResult) -> String {
    let mut s = String::from("family,p,slope,intercept,r2\n");
    for f in &result.slopes {
        writeln!(
            s,
            "{},{},{},{},{}",
            f.family, f.p, f.fit.slope, f.fit.intercept, f.fit.r2
        )
        .unwrap();
    }
    s
}

pub fn failures_csv(result: &ExperimentResult) -> String {
    let mut s = String::from("family,n,p,replicate,seed,error\n");
    for f in &result.failures {
        let msg = f.error.replace('"', "'");
        writeln!(
            s,
            "{},{},{},{},{},\"{msg}\"",
            f.family, f.n, f.p, f.replicate, f.seed
        )
        .unwrap();
    }
    s
}

pub fn out_of_regime_csv(result: &ExperimentResult) -> String {
    let mut s = String::from("family,n,p\n");
    for c in result.summary.iter().filter(|c| !c.in_regime) {
        writeln!(s, "{},{},{}", c.family, c.n, c.p).unwrap();
    }
    s
}

pub fn projection_csv(result: &ExperimentResult) -> String {
    let mut s = String::from("family,n,p,replicate,iterations,final_delta,clipped_cells\n");
    for r in &result.records {
        writeln!(
            s,
            "{},{},{},{},{},{:e},{}",
            r.family, r.n, r.p, r.replicate, r.proj_iters, r.final_delta, r.clipped_cells
        )
        .unwrap();
    }
    s
}

pub fn overlay_bounds_csv(result: &ExperimentResult) -> String {
    let rows: Vec<(usize, f64, String, f64)> = result
        .summary
        .iter()
        .flat_map(|c| {
            c.overlays
                .iter()
                .map(move |(b, v)| (c.n, c.p, format!("{}:{b}", c.family), *v))
        })
        .collect();
    bound_csv(&rows)
}

/// One SVG per (model, p) curve with at least two distinct n, keyed by
/// file name.
pub fn plots(result: &ExperimentResult) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for fit in &result.slopes {
        let pts = curve(&result.summary, &fit.family, fit.p);
        let mut overlays: Vec<Overlay> = result
            .config
            .overlays
            .iter()
            .map(|&b| Overlay {
                name: b.to_string(),
                points: Vec::new(),
            })
            .collect();
        for c in result.summary.iter().filter(|c| {
            c.family == fit.family && c.p == fit.p && c.mean_mse.is_some_and(|m| m > 0.0)
        }) {
            for (o, (_, v)) in overlays.iter_mut().zip(&c.overlays) {
                o.points.push((c.n as f64, *v));
            }
        }
        let title = format!("{} (p = {})", fit.family, fit.p);
        let plot = render_loglog(&title, &pts, &overlays)?;
        out.push((format!("plot_{}_p{}.svg", fit.family, fit.p), plot.svg));
    }
    Ok(out)
}

/// Writes every table and plot of `result` into `dir`; returns the paths.
pub fn write_outputs(
    result: &ExperimentResult,
    dir: &Path,
    projection_log: bool,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = vec![
        ("results.csv".to_string(), results_csv(result)),
        ("summary.csv".to_string(), summary_csv(result)),
        ("slopes.csv".to_string(), slopes_csv(result)),
        ("failures.csv".to_string(), failures_csv(result)),
        ("out_of_regime.csv".to_string(), out_of_regime_csv(result)),
        ("bounds.csv".to_string(), overlay_bounds_csv(result)),
    ];
    if projection_log {
        files.push(("projection.csv".to_string(), projection_csv(result)));
    }
    files.extend(plots(result)?);
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
