use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::{RunConfig, TokenChoice};
use crate::distill::{
    fnv1a, generate_dataset, load_checkpoint, save_checkpoint, train, ExpertStats, TrainReport, TrainingSet,
    TransitionDataset,
};
use crate::env::EnvSpec;
use crate::error::{Error, Result};
use crate::eval::{
    attention_report, eval_seeds, normalized_final_distance, percentage_improvement, score, split_environments,
    Bounds, Controller, Episode, MetricResult,
};
use crate::nn::{init_params, Arch};

fn build_envs(ids: &[String]) -> Result<Vec<EnvSpec>> {
    if ids.is_empty() {
        return Err(Error::Usage("no environments configured".into()));
    }
    ids.iter().map(|id| EnvSpec::from_id(id)).collect()
}

fn write_config(cfg: &RunConfig, name: &str) -> Result<()> {
    fs::create_dir_all(&cfg.out)?;
    fs::write(cfg.out.join(format!("{name}.config")), cfg.to_text())?;
    Ok(())
}

/// Mean normalized final distance of the kept expert episodes.
pub fn dataset_score(envs: &[EnvSpec], stats: &[ExpertStats]) -> Result<MetricResult> {
    let groups: Vec<(Bounds, Vec<Episode>)> = envs
        .iter()
        .zip(stats)
        .map(|(env, s)| {
            let eps = s
                .final_distances
                .iter()
                .enumerate()
                .map(|(k, d)| Episode { env_id: env.id.clone(), seed: k as u64, final_distances: d.clone() })
                .collect();
            (Bounds::of(env), eps)
        })
        .collect();
    normalized_final_distance(&groups)
}

#[derive(Debug, Clone)]
pub struct GenDataOutput {
    pub dataset_path: PathBuf,
    pub stats: Vec<ExpertStats>,
    pub score: MetricResult,
    pub checksum: u64,
}

/// Generates the expert dataset and its manifest.
pub fn cmd_gen_data(cfg: &RunConfig) -> Result<GenDataOutput> {
    write_config(cfg, "gen-data")?;
    let envs = build_envs(&cfg.envs)?;
    let obs = cfg.obs_spec()?;
    let (data, stats) = generate_dataset(&envs, &obs, cfg.expert_gain, cfg.transitions, cfg.seed)?;
    let bytes = data.to_bytes();
    let path = cfg.dataset_path();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(&path, &bytes)?;
    let score = dataset_score(&envs, &stats)?;
    let mut m = String::from("env_id,transitions,episodes,successes,success_rate,normalized\n");
    for (s, e) in stats.iter().zip(&score.per_env) {
        let _ = writeln!(m, "{},{},{},{},{},{}", s.env_id, s.transitions, s.episodes, s.successes, s.success_rate(), e.normalized);
    }
    fs::write(cfg.out.join("manifest.csv"), m)?;
    let checksum = fnv1a(&bytes);
    Ok(GenDataOutput { dataset_path: path, stats, score, checksum })
}

#[derive(Debug, Clone)]
pub struct DistillOutput {
    pub checkpoint_path: PathBuf,
    pub report: TrainReport,
}

/// Trains a policy on the configured dataset.
pub fn cmd_distill(cfg: &RunConfig) -> Result<DistillOutput> {
    let pc = cfg.policy_config()?;
    let data = TransitionDataset::load(&cfg.dataset_path())?;
    let obs = pc.obs_spec()?;
    for e in &data.environments {
        if e.obs != obs {
            return Err(Error::Config(format!("{} was recorded with '{}', the policy observes '{obs}'", e.env.id, e.obs)));
        }
        if pc.arch == Arch::Mlp && e.env.graph.num_nodes() + e.env.task.goals.len() > pc.max_nodes {
            return Err(Error::Config(format!("{} does not fit in {} MLP input rows", e.env.id, pc.max_nodes)));
        }
    }
    write_config(cfg, "distill")?;
    let set = TrainingSet::from_dataset(&data, &pc)?;
    let params = init_params(&pc, cfg.seed)?;
    let tc = crate::distill::TrainConfig { seed: cfg.seed, ..cfg.train.clone() };
    let (params, report) = train(params, &set, &tc)?;
    let path = cfg.checkpoint_path();
    save_checkpoint(&params, &path)?;
    let mut csv = String::from("step,loss\n");
    for (step, loss) in &report.curve {
        let _ = writeln!(csv, "{step},{loss}");
    }
    fs::write(cfg.out.join("loss.csv"), csv)?;
    let summary = format!(
        "arch={}\ncg={}\nparameters={}\ninitial_loss={}\nfinal_loss={}\nmax_applied_grad_norm={}\n",
        pc.arch,
        pc.cg_variant,
        params.num_parameters(),
        report.initial_loss,
        report.final_loss,
        report.max_applied_norm
    );
    fs::write(cfg.out.join("train_summary.txt"), summary)?;
    Ok(DistillOutput { checkpoint_path: path, report })
}

#[derive(Debug, Clone)]
pub struct EvalOutput {
    pub metrics: MetricResult,
    pub test_envs: Vec<String>,
    pub improvement_pct: Option<f64>,
    /// The summary written next to the metric report.
    pub summary: String,
}

/// Rolls the checkpoint out on the split's test environments.
pub fn cmd_eval(cfg: &RunConfig, compare: Option<&Path>) -> Result<EvalOutput> {
    let baseline = match compare {
        Some(p) => match fs::read_to_string(p) {
            Ok(text) => Some(MetricResult::from_csv(&text)?),
            Err(e) => return Err(Error::Usage(format!("cannot read baseline report {}: {e}", p.display()))),
        },
        None => None,
    };
    let params = load_checkpoint(&cfg.checkpoint_path())?;
    let plan = split_environments(&cfg.envs, cfg.split, &cfg.holdout)?;
    write_config(cfg, "eval")?;
    let envs = build_envs(&plan.test)?;
    let seeds = eval_seeds(cfg.eval_seeds);
    let metrics = score(Controller::Policy(&params), &envs, &seeds, cfg.horizon)?;
    fs::write(cfg.out.join("metrics.csv"), metrics.to_csv())?;
    let mut summary = format!("split={}\ntest={}\n", plan.kind, plan.test.join(" "));
    summary.push_str(&metrics.summary());
    let mut improvement_pct = None;
    if let Some(b) = &baseline {
        let _ = writeln!(summary, "baseline_mean_env={}", b.mean);
        match percentage_improvement(metrics.mean, b.mean) {
            Ok(p) => {
                improvement_pct = Some(p);
                let _ = writeln!(summary, "improvement_pct={p:.2}");
            }
            Err(Error::Ordering(_)) => {
                let _ = writeln!(summary, "improvement_pct=n/a (no improvement over the baseline)");
            }
            Err(e) => return Err(e),
        }
    }
    fs::write(cfg.out.join("metrics_summary.txt"), &summary)?;
    if cfg.export_attention && params.config.arch.is_transformer() {
        let env = &envs[0];
        let r = attention_report(&params, env, seeds.first().copied().unwrap_or(0), cfg.horizon)?;
        r.save(&cfg.out.join(format!("attention_{}.cgat", env.id)))?;
    }
    Ok(EvalOutput { metrics, test_envs: plan.test, improvement_pct, summary })
}

/// One cell of an ablation.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub cell: usize,
    pub obs: String,
    pub pe: bool,
    pub token: TokenChoice,
    pub history: usize,
    pub seed: u64,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub mean_env: f64,
    pub mean_subdomain: f64,
}

pub const ABLATION_HEADER: &str = "cell,obs,pe,token,history,seed,initial_loss,final_loss,mean_env,mean_subdomain";

/// Runs every combination of the configured ablation axes.
pub fn cmd_ablate(cfg: &RunConfig) -> Result<Vec<AblationRow>> {
    let a = &cfg.ablate;
    if a.obs.is_none() && a.pe.is_none() && a.token.is_none() && a.history.is_none() {
        return Err(Error::Usage("no ablation axes configured".into()));
    }
    let empty = [
        a.obs.as_ref().is_some_and(|v| v.is_empty()),
        a.pe.as_ref().is_some_and(|v| v.is_empty()),
        a.token.as_ref().is_some_and(|v| v.is_empty()),
        a.history.as_ref().is_some_and(|v| v.is_empty()),
    ];
    if empty.iter().any(|&e| e) {
        return Err(Error::Usage("an ablation axis lists no values".into()));
    }
    let obs_axis = a.obs.clone().unwrap_or_else(|| vec![cfg.obs.clone()]);
    let pe_axis = a.pe.clone().unwrap_or_else(|| vec![cfg.pe]);
    let token_axis = a.token.clone().unwrap_or_else(|| vec![cfg.token]);
    let history_axis = a.history.clone().unwrap_or_else(|| vec![cfg.history]);
    write_config(cfg, "ablate")?;

    let mut rows = Vec::new();
    let mut table = format!("{ABLATION_HEADER}\n");
    for (oi, obs) in obs_axis.iter().enumerate() {
        let data_dir = cfg.out.join(format!("data_{oi}"));
        let gen = RunConfig { obs: obs.clone(), out: data_dir.clone(), dataset: None, ..cfg.clone() };
        let dataset = cmd_gen_data(&gen)?.dataset_path;
        for &pe in &pe_axis {
            for &token in &token_axis {
                for &history in &history_axis {
                    let cell = rows.len();
                    let out = cfg.out.join(format!("cell_{cell}"));
                    let run = RunConfig {
                        obs: obs.clone(),
                        pe,
                        token,
                        history,
                        out: out.clone(),
                        dataset: Some(dataset.clone()),
                        checkpoint: None,
                        ..cfg.clone()
                    };
                    let d = cmd_distill(&run)?;
                    let e = cmd_eval(&run, None)?;
                    let row = AblationRow {
                        cell,
                        obs: obs.clone(),
                        pe,
                        token,
                        history,
                        seed: cfg.seed,
                        initial_loss: d.report.initial_loss,
                        final_loss: d.report.final_loss,
                        mean_env: e.metrics.mean,
                        mean_subdomain: e.metrics.subdomain_mean,
                    };
                    let _ = writeln!(
                        table,
                        "{},{},{},{},{},{},{},{},{},{}",
                        row.cell,
                        row.obs,
                        if row.pe { "on" } else { "off" },
                        row.token.as_str(),
                        row.history,
                        row.seed,
                        row.initial_loss,
                        row.final_loss,
                        row.mean_env,
                        row.mean_subdomain
                    );
                    rows.push(row);
                }
            }
        }
    }
    fs::write(cfg.out.join("ablation.csv"), table)?;
    Ok(rows)
}
