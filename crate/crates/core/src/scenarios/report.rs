//! Per-seed summaries, confidence intervals and the small set of
//! across-seed tests used by the comparative checks.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, StudentsT};

use super::output::{read_metrics, METRICS_FILE};
use super::{MetricRow, ScenarioConfig, SYSTEM};
use crate::error::Result;

/// Mean with a two-sided 95% Student-t interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Interval {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                lo: f64::NAN,
                hi: f64::NAN,
                n,
            };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        if n < 2 {
            return Self {
                mean,
                lo: f64::NAN,
                hi: f64::NAN,
                n,
            };
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
            .expect("positive degrees of freedom")
            .inverse_cdf(0.975);
        let half = t * (var / n as f64).sqrt();
        Self {
            mean,
            lo: mean - half,
            hi: mean + half,
            n,
        }
    }

    pub fn disjoint_below(&self, other: &Interval) -> bool {
        self.hi < other.lo
    }
}

/// One-sided paired sign test of `a < b`; ties are dropped.
pub fn sign_test_less(a: &[f64], b: &[f64]) -> f64 {
    let (mut wins, mut n) = (0u64, 0u64);
    for (x, y) in a.iter().zip(b) {
        if x != y {
            n += 1;
            if x < y {
                wins += 1;
            }
        }
    }
    if n == 0 || wins == 0 {
        return 1.0;
    }
    let bin = Binomial::new(0.5, n).expect("valid binomial");
    bin.sf(wins - 1)
}

pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (dx, dy) = (x[i] - mx, y[i] - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

pub fn config_hash(cfg: &ScenarioConfig) -> String {
    let text = cfg.to_toml_string().unwrap_or_default();
    Sha256::digest(text.as_bytes())
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (s, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Per-window values of one system metric, in window order.
pub fn system_series(rows: &[MetricRow], metric: &str) -> Vec<(u64, f64)> {
    rows.iter()
        .filter(|r| r.bidder == SYSTEM && r.metric == metric)
        .map(|r| (r.window, r.value))
        .collect()
}

/// Per-window mean over the bidders of `algo` (all bidders if `None`).
pub fn bidder_series(rows: &[MetricRow], metric: &str, algo: Option<&str>) -> Vec<(u64, f64)> {
    let mut by: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for r in rows {
        if r.bidder != SYSTEM && r.metric == metric && algo.is_none_or(|a| r.algo == a) {
            by.entry(r.window).or_default().push(r.value);
        }
    }
    by.into_iter().map(|(w, v)| (w, mean(v))).collect()
}

/// Mean of a metric per bidder of `algo` over the run.
pub fn per_bidder_means(rows: &[MetricRow], metric: &str, algo: &str) -> BTreeMap<String, f64> {
    let mut by: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in rows {
        if r.bidder != SYSTEM && r.metric == metric && r.algo == algo {
            by.entry(r.bidder.clone()).or_default().push(r.value);
        }
    }
    by.into_iter().map(|(b, v)| (b, mean(v))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub algo: String,
    pub utility: f64,
    pub ofr: f64,
    pub fairness: f64,
    pub beta: f64,
    pub load_variance: f64,
    pub retrain_fraction: f64,
    /// Pearson correlation of system fairness and negated system OFR over windows.
    pub corr_fairness_neg_ofr: Option<f64>,
}

pub fn summarize(seed: u64, rows: &[MetricRow], algo: &str) -> SeedSummary {
    let sys_mean = |m: &str| mean(system_series(rows, m).into_iter().map(|(_, v)| v));
    let pick = |m: &'static str| {
        rows.iter()
            .filter(move |r| r.bidder != SYSTEM && r.algo == algo && r.metric == m)
            .map(|r| r.value)
    };
    let bidders: BTreeSet<&str> = rows
        .iter()
        .filter(|r| r.bidder != SYSTEM && r.algo == algo)
        .map(|r| r.bidder.as_str())
        .collect();
    let end = rows.iter().map(|r| r.step).max().unwrap_or(0);
    let busy: f64 = pick("retrain_steps").sum();
    let denom = bidders.len() as f64 * end as f64;
    let fair = system_series(rows, "fairness");
    let ofr = system_series(rows, "ofr");
    let ofr_at: BTreeMap<u64, f64> = ofr.into_iter().collect();
    let (f, o): (Vec<f64>, Vec<f64>) = fair
        .iter()
        .filter_map(|(w, fv)| ofr_at.get(w).map(|ov| (*fv, -ov)))
        .unzip();
    SeedSummary {
        seed,
        algo: algo.to_string(),
        utility: mean(pick("utility")),
        ofr: mean(pick("ofr")),
        fairness: sys_mean("fairness"),
        beta: sys_mean("beta"),
        load_variance: sys_mean("load_variance"),
        retrain_fraction: if denom > 0.0 { (busy / denom).min(1.0) } else { 0.0 },
        corr_fairness_neg_ofr: pearson(&f, &o),
    }
}

pub fn algos(rows: &[MetricRow]) -> Vec<String> {
    let set: BTreeSet<&str> = rows
        .iter()
        .filter(|r| r.bidder != SYSTEM)
        .map(|r| r.algo.as_str())
        .collect();
    set.into_iter().map(String::from).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub horizon: u64,
    pub bidders: usize,
    pub notes: Vec<String>,
    pub per_seed: Vec<SeedSummary>,
    /// algo -> metric -> interval across seeds.
    pub aggregate: BTreeMap<String, BTreeMap<String, Interval>>,
}

impl RunReport {
    pub fn from_summaries(command: &str, cfg: &ScenarioConfig, per_seed: Vec<SeedSummary>) -> Self {
        let mut seeds: Vec<u64> = per_seed.iter().map(|s| s.seed).collect();
        seeds.dedup();
        let mut aggregate: BTreeMap<String, BTreeMap<String, Interval>> = BTreeMap::new();
        let kinds: BTreeSet<&str> = per_seed.iter().map(|s| s.algo.as_str()).collect();
        for k in kinds {
            let of = |f: fn(&SeedSummary) -> f64| {
                let xs: Vec<f64> = per_seed
                    .iter()
                    .filter(|s| s.algo == k)
                    .map(f)
                    .filter(|x| x.is_finite())
                    .collect();
                Interval::of(&xs)
            };
            let m = BTreeMap::from([
                ("utility".to_string(), of(|s| s.utility)),
                ("ofr".to_string(), of(|s| s.ofr)),
                ("fairness".to_string(), of(|s| s.fairness)),
                ("beta".to_string(), of(|s| s.beta)),
                ("load_variance".to_string(), of(|s| s.load_variance)),
                ("retrain_fraction".to_string(), of(|s| s.retrain_fraction)),
            ]);
            aggregate.insert(k.to_string(), m);
        }
        Self {
            command: command.to_string(),
            config_hash: config_hash(cfg),
            seeds,
            horizon: cfg.horizon,
            bidders: cfg.bidder_count(),
            notes: desk_scale_notes(cfg),
            per_seed,
            aggregate,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn provenance(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        format!("config {} seeds [{}]", self.config_hash, seeds.join(","))
    }
}

pub fn desk_scale_notes(cfg: &ScenarioConfig) -> Vec<String> {
    vec![
        format!("horizon {} steps of 1 ms, metric window {} steps", cfg.horizon, cfg.window),
        format!("{} bidders, total capacity {}", cfg.bidder_count(), cfg.total_capacity()),
        format!(
            "offline training {} epochs of {} steps, mobility warm-up {} steps",
            cfg.epochs, cfg.epoch_steps, cfg.warmup_steps
        ),
        format!("vehicle participation {}", cfg.participation),
    ]
}

/// Rebuilds a report from `seed-*/metrics.csv` under `dir`.
pub fn aggregate_dir(command: &str, cfg: &ScenarioConfig, dir: &Path) -> Result<RunReport> {
    let mut seeds: Vec<(u64, std::path::PathBuf)> = Vec::new();
    for e in fs::read_dir(dir)? {
        let p = e?.path();
        let seed = p
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("seed-"))
            .and_then(|s| s.parse::<u64>().ok());
        if let Some(s) = seed {
            let m = p.join(METRICS_FILE);
            if m.exists() {
                seeds.push((s, m));
            }
        }
    }
    seeds.sort();
    let mut per_seed = Vec::new();
    for (s, p) in seeds {
        let rows = read_metrics(&p)?;
        for a in algos(&rows) {
            per_seed.push(summarize(s, &rows, &a));
        }
    }
    Ok(RunReport::from_summaries(command, cfg, per_seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(window: u64, bidder: &str, algo: &str, metric: &str, value: f64) -> MetricRow {
        MetricRow {
            step: (window + 1) * 10,
            window,
            bidder: bidder.into(),
            algo: algo.into(),
            metric: metric.into(),
            value,
        }
    }

    #[test]
    fn t_interval_matches_table() {
        let i = Interval::of(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(i.mean, 3.0);
        let half = 2.776_445_105 * (2.5f64 / 5.0).sqrt();
        assert!((i.hi - 3.0 - half).abs() < 1e-6);
        assert!(Interval::of(&[1.0]).lo.is_nan());
    }

    #[test]
    fn sign_test_values() {
        let a = [1.0; 5];
        let b = [2.0; 5];
        assert!((sign_test_less(&a, &b) - 1.0 / 32.0).abs() < 1e-12);
        assert_eq!(sign_test_less(&b, &a), 1.0);
        let c = [1.0, 1.0, 1.0, 1.0, 3.0];
        assert!((sign_test_less(&c, &b) - 6.0 / 32.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_signs() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(pearson(&[1.0, 1.0], &[0.0, 2.0]), None);
    }

    #[test]
    fn summary_from_rows() {
        let rows = vec![
            row(0, "0", "moody", "ofr", 0.2),
            row(0, "1", "moody", "ofr", 0.4),
            row(0, "0", "moody", "retrain_steps", 5.0),
            row(0, SYSTEM, SYSTEM, "fairness", 0.8),
            row(0, SYSTEM, SYSTEM, "ofr", 0.3),
            row(1, "0", "moody", "ofr", 0.0),
            row(1, SYSTEM, SYSTEM, "fairness", 0.9),
            row(1, SYSTEM, SYSTEM, "ofr", 0.1),
        ];
        let s = summarize(7, &rows, "moody");
        assert!((s.ofr - 0.2).abs() < 1e-12);
        assert!((s.fairness - 0.85).abs() < 1e-12);
        assert!((s.retrain_fraction - 5.0 / 40.0).abs() < 1e-12);
        assert!(s.corr_fairness_neg_ofr.unwrap() > 0.99);
        assert_eq!(algos(&rows), vec!["moody".to_string()]);
        assert_eq!(bidder_series(&rows, "ofr", None), vec![(0, 0.30000000000000004), (1, 0.0)]);
    }
}
