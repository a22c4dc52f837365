use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::rollout::Episode;
use crate::env::{EnvId, EnvSpec};
use crate::error::{Error, Result};

/// Evaluation seeds per environment.
pub const DEFAULT_EVAL_SEEDS: usize = 64;
const EVAL_SEED_BASE: u64 = 1_000_000;

pub const METRIC_CSV_HEADER: &str = "env_id,goal_index,seed,final_distance,normalized";

/// The standard evaluation seeds, disjoint from the seeds used for data.
pub fn eval_seeds(n: usize) -> Vec<u64> {
    (0..n as u64).map(|k| EVAL_SEED_BASE + k).collect()
}

/// Per-goal normalization bounds of one environment.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub env_id: String,
    pub family: String,
    pub d_min: Vec<f64>,
    pub d_max: Vec<f64>,
}

impl Bounds {
    pub fn of(env: &EnvSpec) -> Bounds {
        Bounds {
            env_id: env.id.clone(),
            family: env.family(),
            d_min: env.task.d_min.clone(),
            d_max: env.task.d_max.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub env_id: String,
    pub goal_index: usize,
    pub seed: u64,
    pub final_distance: f64,
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvScore {
    pub env_id: String,
    pub family: String,
    /// Mean over episodes of the summed normalized goal terms.
    pub normalized: f64,
    pub episodes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricResult {
    pub rows: Vec<MetricRow>,
    pub per_env: Vec<EnvScore>,
    /// `(family, mean over its environments)`, sorted by family.
    pub per_family: Vec<(String, f64)>,
    /// Unweighted mean over environments.
    pub mean: f64,
    /// Unweighted mean over sub-domains.
    pub subdomain_mean: f64,
    pub episodes: usize,
}

/// Normalized final distance. For each environment, each episode
/// contributes the sum over goals of `(d_T - d_min) / (d_max - d_min)`;
/// episodes are averaged, then environments. Values are not clamped.
pub fn normalized_final_distance(groups: &[(Bounds, Vec<Episode>)]) -> Result<MetricResult> {
    if groups.is_empty() {
        return Err(Error::Value("no environments to score".into()));
    }
    let mut rows = Vec::new();
    let mut per_env = Vec::with_capacity(groups.len());
    for (b, episodes) in groups {
        if b.d_min.len() != b.d_max.len() {
            return Err(Error::Config(format!("{}: d_min and d_max lengths differ", b.env_id)));
        }
        for (i, (lo, hi)) in b.d_min.iter().zip(&b.d_max).enumerate() {
            if !(lo < hi) {
                return Err(Error::Config(format!("{} goal {i}: d_min {lo} is not below d_max {hi}", b.env_id)));
            }
        }
        if episodes.is_empty() {
            return Err(Error::Value(format!("{}: no episodes", b.env_id)));
        }
        let mut total = 0.0;
        for ep in episodes {
            if ep.final_distances.len() != b.d_min.len() {
                return Err(Error::Shape(format!(
                    "{} seed {}: {} distances for {} goals",
                    b.env_id,
                    ep.seed,
                    ep.final_distances.len(),
                    b.d_min.len()
                )));
            }
            let mut episode = 0.0;
            for (i, &d) in ep.final_distances.iter().enumerate() {
                let normalized = (d - b.d_min[i]) / (b.d_max[i] - b.d_min[i]);
                episode += normalized;
                rows.push(MetricRow {
                    env_id: b.env_id.clone(),
                    goal_index: i,
                    seed: ep.seed,
                    final_distance: d,
                    normalized,
                });
            }
            total += episode;
        }
        per_env.push(EnvScore {
            env_id: b.env_id.clone(),
            family: b.family.clone(),
            normalized: total / episodes.len() as f64,
            episodes: episodes.len(),
        });
    }
    Ok(aggregate(rows, per_env))
}

fn aggregate(rows: Vec<MetricRow>, per_env: Vec<EnvScore>) -> MetricResult {
    let mut fam: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for e in &per_env {
        let slot = fam.entry(&e.family).or_default();
        slot.0 += e.normalized;
        slot.1 += 1;
    }
    let per_family: Vec<(String, f64)> = fam.into_iter().map(|(f, (s, n))| (f.to_string(), s / n as f64)).collect();
    let mean = per_env.iter().map(|e| e.normalized).sum::<f64>() / per_env.len() as f64;
    let subdomain_mean = per_family.iter().map(|(_, v)| v).sum::<f64>() / per_family.len() as f64;
    let episodes = per_env.iter().map(|e| e.episodes).sum();
    MetricResult { rows, per_env, per_family, mean, subdomain_mean, episodes }
}

/// Percentage by which `d1` improves on `d2`: `100 (d2 - d1) / d2`.
pub fn percentage_improvement(d1: f64, d2: f64) -> Result<f64> {
    if !(d1 < d2) {
        return Err(Error::Ordering(format!("improvement needs d1 < d2, got {d1} and {d2}")));
    }
    if !(d2 > 0.0) {
        return Err(Error::Value(format!("improvement needs d2 > 0, got {d2}")));
    }
    Ok(100.0 * (d2 - d1) / d2)
}

impl MetricResult {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(METRIC_CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{},{}", r.env_id, r.goal_index, r.seed, r.final_distance, r.normalized);
        }
        s
    }

    /// Aggregates as `key=value` lines; `mean_env` weighs environments
    /// equally and `mean_subdomain` weighs sub-domains equally.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# aggregation: mean_env over environments, mean_subdomain over sub-domains");
        let _ = writeln!(s, "episodes={}", self.episodes);
        let _ = writeln!(s, "mean_env={}", self.mean);
        let _ = writeln!(s, "mean_subdomain={}", self.subdomain_mean);
        for (f, v) in &self.per_family {
            let _ = writeln!(s, "subdomain.{f}={v}");
        }
        for e in &self.per_env {
            let _ = writeln!(s, "env.{}={}", e.env_id, e.normalized);
        }
        s
    }

    /// Rebuilds the aggregates from a metric CSV.
    pub fn from_csv(text: &str) -> Result<MetricResult> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == METRIC_CSV_HEADER => {}
            _ => return Err(Error::Parse { line: 1, msg: format!("expected header '{METRIC_CSV_HEADER}'") }),
        }
        let mut rows = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |msg: &str| Error::Parse { line: i + 1, msg: msg.to_string() };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(bad("expected 5 fields"));
            }
            rows.push(MetricRow {
                env_id: f[0].to_string(),
                goal_index: f[1].parse().map_err(|_| bad("bad goal index"))?,
                seed: f[2].parse().map_err(|_| bad("bad seed"))?,
                final_distance: f[3].parse().map_err(|_| bad("bad distance"))?,
                normalized: f[4].parse().map_err(|_| bad("bad normalized value"))?,
            });
        }
        if rows.is_empty() {
            return Err(Error::Value("metric report has no rows".into()));
        }
        // env order of first appearance, episodes keyed by seed
        let mut order: Vec<String> = Vec::new();
        let mut sums: BTreeMap<String, BTreeMap<u64, f64>> = BTreeMap::new();
        for r in &rows {
            if !sums.contains_key(&r.env_id) {
                order.push(r.env_id.clone());
            }
            *sums.entry(r.env_id.clone()).or_default().entry(r.seed).or_default() += r.normalized;
        }
        let per_env = order
            .iter()
            .map(|id| {
                let eps = &sums[id];
                let family = EnvId::parse(id).map(|e| e.family()).unwrap_or_else(|_| id.clone());
                EnvScore {
                    env_id: id.clone(),
                    family,
                    normalized: eps.values().sum::<f64>() / eps.len() as f64,
                    episodes: eps.len(),
                }
            })
            .collect();
        Ok(aggregate(rows, per_env))
    }
}
