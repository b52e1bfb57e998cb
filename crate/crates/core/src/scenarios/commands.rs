//! File-producing commands. Every seed runs as an independent simulation;
//! outputs land in `<out>/seed-<n>/`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::output::{write_csv, write_metrics, write_trace, AUDIT_FILE, METRICS_FILE, REPORT_FILE, TRACE_FILE, TRAINING_FILE};
use super::report::{aggregate_dir, per_bidder_means, summarize, RunReport};
use super::{test_run, train_run, ScenarioConfig};
use crate::baselines::AlgoKind;
use crate::error::{Error, Result};
use crate::nn::Checkpoint;

pub const CONFIG_FILE: &str = "config.toml";

/// Parses `N`, `A..B` (inclusive) or `A..=B`.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let num = |x: &str| {
        x.trim()
            .parse::<u64>()
            .map_err(|_| Error::Config(format!("bad seed `{x}` in `{s}`")))
    };
    match s.split_once("..") {
        None => Ok(vec![num(s)?]),
        Some((a, b)) => {
            let (a, b) = (num(a)?, num(b.trim_start_matches('='))?);
            if b < a {
                return Err(Error::Config(format!("empty seed range `{s}`")));
            }
            Ok((a..=b).collect())
        }
    }
}

pub fn with_seed(cfg: &ScenarioConfig, seed: u64) -> ScenarioConfig {
    let mut c = cfg.clone();
    c.seed = seed;
    c
}

pub fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed-{seed}"))
}

fn checkpoint_name(kind: AlgoKind) -> String {
    format!("checkpoint-{}.json", kind.label())
}

fn save_config(cfg: &ScenarioConfig, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    fs::write(out.join(CONFIG_FILE), cfg.to_toml_string()?)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummary {
    pub seed: u64,
    pub kinds: Vec<String>,
    pub shots: usize,
    pub coordinator_updates: u64,
}

/// Offline training per seed: checkpoints, training curves and the
/// training-run metrics.
pub fn train(cfg: &ScenarioConfig, seeds: &[u64], out: &Path) -> Result<Vec<TrainSummary>> {
    save_config(cfg, out)?;
    seeds
        .par_iter()
        .map(|&seed| {
            let c = with_seed(cfg, seed);
            let t = train_run(&c)?;
            let dir = seed_dir(out, seed);
            for (kind, ck) in &t.checkpoints {
                ck.save(&dir.join(checkpoint_name(*kind)))?;
            }
            write_csv(&dir.join(TRAINING_FILE), &t.training)?;
            write_metrics(&dir.join(METRICS_FILE), &t.metrics)?;
            Ok(TrainSummary {
                seed,
                kinds: t.checkpoints.keys().map(|k| k.label().to_string()).collect(),
                shots: t.training.len(),
                coordinator_updates: t.coordinator_updates,
            })
        })
        .collect()
}

/// Checkpoints for `seed`: a single file, or every `checkpoint-*.json` in
/// `<path>/seed-<seed>/` when that exists, else in `<path>/`.
pub fn load_checkpoints(path: &Path, seed: u64) -> Result<BTreeMap<AlgoKind, Checkpoint>> {
    let mut out = BTreeMap::new();
    if path.is_file() {
        let c = Checkpoint::load(path)?;
        out.insert(c.kind.parse()?, c);
        return Ok(out);
    }
    let per_seed = seed_dir(path, seed);
    let dir = if per_seed.is_dir() { per_seed } else { path.to_path_buf() };
    if !dir.is_dir() {
        return Err(Error::Checkpoint(format!("{} does not exist", dir.display())));
    }
    let mut files: Vec<PathBuf> = fs::read_dir(&dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("checkpoint-") && n.ends_with(".json"))
        })
        .collect();
    files.sort();
    for f in files {
        let c = Checkpoint::load(&f)?;
        out.insert(c.kind.parse()?, c);
    }
    Ok(out)
}

fn checkpoints_for(path: Option<&Path>, seed: u64) -> Result<BTreeMap<AlgoKind, Checkpoint>> {
    match path {
        Some(p) => load_checkpoints(p, seed),
        None => Ok(BTreeMap::new()),
    }
}

/// Deployment runs per seed plus the aggregated report.
pub fn test(
    cfg: &ScenarioConfig,
    seeds: &[u64],
    checkpoint: Option<&Path>,
    out: &Path,
    audit: bool,
) -> Result<RunReport> {
    save_config(cfg, out)?;
    seeds
        .par_iter()
        .map(|&seed| {
            let c = with_seed(cfg, seed);
            let t = test_run(&c, &checkpoints_for(checkpoint, seed)?, audit, audit)?;
            let dir = seed_dir(out, seed);
            write_metrics(&dir.join(METRICS_FILE), &t.metrics)?;
            if audit {
                write_csv(&dir.join(AUDIT_FILE), &t.audit)?;
                write_trace(&dir.join(TRACE_FILE), &t.trace)?;
            }
            Ok(())
        })
        .collect::<Result<Vec<()>>>()?;
    let report = aggregate_dir("test", cfg, out)?;
    report.save(&out.join(REPORT_FILE))?;
    Ok(report)
}

/// Per-bidder OFR of one mixed-population run, for CDF plots.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixRow {
    /// Bidders of the mix kind in the population.
    pub mix: usize,
    pub seed: u64,
    pub bidder: String,
    pub algo: String,
    pub ofr: f64,
}

pub fn mix_population(cfg: &ScenarioConfig, count: usize) -> BTreeMap<AlgoKind, usize> {
    let total = cfg.bidder_count();
    let mut p = BTreeMap::new();
    if count > 0 {
        p.insert(cfg.mix.kind, count);
    }
    if total > count {
        p.insert(cfg.mix.baseline, total - count);
    }
    p
}

/// One deployment run per mix count and seed. Writes `mix.csv` and a
/// report per mix under `<out>/mix-<count>/`.
pub fn mix(
    cfg: &ScenarioConfig,
    seeds: &[u64],
    checkpoint: Option<&Path>,
    out: &Path,
) -> Result<(Vec<MixRow>, Vec<RunReport>)> {
    if let Some(c) = cfg.mix.counts.iter().find(|c| **c > cfg.bidder_count()) {
        return Err(Error::Config(format!("mix count {c} exceeds the {} bidders", cfg.bidder_count())));
    }
    save_config(cfg, out)?;
    let jobs: Vec<(usize, u64)> = cfg
        .mix
        .counts
        .iter()
        .flat_map(|c| seeds.iter().map(move |s| (*c, *s)))
        .collect();
    let rows: Vec<Vec<MixRow>> = jobs
        .par_iter()
        .map(|&(count, seed)| {
            let mut c = with_seed(cfg, seed);
            c.population = mix_population(cfg, count);
            let t = test_run(&c, &checkpoints_for(checkpoint, seed)?, false, false)?;
            write_metrics(&seed_dir(&out.join(format!("mix-{count}")), seed).join(METRICS_FILE), &t.metrics)?;
            let mut rows = Vec::new();
            for kind in c.population.keys() {
                for (bidder, ofr) in per_bidder_means(&t.metrics, "ofr", kind.label()) {
                    rows.push(MixRow {
                        mix: count,
                        seed,
                        bidder,
                        algo: kind.label().to_string(),
                        ofr,
                    });
                }
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    let rows: Vec<MixRow> = rows.into_iter().flatten().collect();
    write_csv(&out.join("mix.csv"), &rows)?;
    let mut reports = Vec::new();
    for count in &cfg.mix.counts {
        let mut c = cfg.clone();
        c.population = mix_population(cfg, *count);
        let dir = out.join(format!("mix-{count}"));
        let r = aggregate_dir(&format!("mix-{count}"), &c, &dir)?;
        r.save(&dir.join(REPORT_FILE))?;
        reports.push(r);
    }
    Ok((rows, reports))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridCell {
    pub valuation_scale: f64,
    pub backoff_scale: f64,
    pub w_utility: Option<f64>,
    pub w_ofr: Option<f64>,
}

impl GridCell {
    pub fn apply(&self, cfg: &ScenarioConfig) -> ScenarioConfig {
        let mut c = cfg.clone();
        c.valuation_scale = self.valuation_scale;
        c.backoff_scale = self.backoff_scale;
        if self.w_utility.is_some() || self.w_ofr.is_some() {
            let base = cfg.fixed_preferences.unwrap_or((0.5, 0.5, 0.5));
            c.fixed_preferences = Some((self.w_utility.unwrap_or(base.0), self.w_ofr.unwrap_or(base.1), base.2));
        }
        c
    }
}

/// Cartesian product of the configured grid; an empty axis holds the
/// configured value.
pub fn grid_cells(cfg: &ScenarioConfig) -> Vec<GridCell> {
    let g = &cfg.sensitivity;
    let or = |v: &Vec<f64>, d: f64| if v.is_empty() { vec![d] } else { v.clone() };
    let opt = |v: &Vec<f64>| {
        if v.is_empty() {
            vec![None]
        } else {
            v.iter().map(|x| Some(*x)).collect()
        }
    };
    let mut cells = Vec::new();
    for v in or(&g.valuation_scale, cfg.valuation_scale) {
        for q in or(&g.backoff_scale, cfg.backoff_scale) {
            for wu in opt(&g.w_utility) {
                for wo in opt(&g.w_ofr) {
                    cells.push(GridCell {
                        valuation_scale: v,
                        backoff_scale: q,
                        w_utility: wu,
                        w_ofr: wo,
                    });
                }
            }
        }
    }
    cells
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridRow {
    pub cell: usize,
    pub valuation_scale: f64,
    pub backoff_scale: f64,
    pub w_utility: Option<f64>,
    pub w_ofr: Option<f64>,
    pub seed: u64,
    pub utility: f64,
    pub ofr: f64,
    pub fairness: f64,
    pub beta: f64,
}

/// One deployment run per grid cell and seed; writes `grid.csv` and the
/// per-cell metrics under `<out>/cell-<i>/`.
pub fn sensitivity(
    cfg: &ScenarioConfig,
    seeds: &[u64],
    checkpoint: Option<&Path>,
    out: &Path,
) -> Result<Vec<GridRow>> {
    save_config(cfg, out)?;
    let cells = grid_cells(cfg);
    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|i| seeds.iter().map(move |s| (i, *s)))
        .collect();
    let rows: Vec<Vec<GridRow>> = jobs
        .par_iter()
        .map(|&(i, seed)| {
            let cell = cells[i];
            let c = with_seed(&cell.apply(cfg), seed);
            let t = test_run(&c, &checkpoints_for(checkpoint, seed)?, false, false)?;
            write_metrics(&seed_dir(&out.join(format!("cell-{i}")), seed).join(METRICS_FILE), &t.metrics)?;
            Ok(c.population
                .keys()
                .map(|k| {
                    let s = summarize(seed, &t.metrics, k.label());
                    GridRow {
                        cell: i,
                        valuation_scale: cell.valuation_scale,
                        backoff_scale: cell.backoff_scale,
                        w_utility: cell.w_utility,
                        w_ofr: cell.w_ofr,
                        seed,
                        utility: s.utility,
                        ofr: s.ofr,
                        fairness: s.fairness,
                        beta: s.beta,
                    }
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let rows: Vec<GridRow> = rows.into_iter().flatten().collect();
    write_csv(&out.join("grid.csv"), &rows)?;
    Ok(rows)
}
