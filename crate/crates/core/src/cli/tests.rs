use super::*;
use crate::distill::{checkpoint_bytes, load_checkpoint};
use crate::error::Error;
use crate::nn::{init_params, Arch};

fn tiny(dir: &std::path::Path) -> RunConfig {
    let text = format!(
        "# tiny run\nout = {}\nenvs = ant_reach_3 ant_twister_3\ntransitions = 60\nsteps = 3\nbatch_size = 4\n\
         embed = 8\nattn_hidden = 8\nlayers = 1\neval_seeds = 2\nhorizon = 10\nlog_every = 1\nprobe_size = 8\n",
        dir.display()
    );
    RunConfig::parse(&text).unwrap()
}

#[test]
fn config_rejects_unknown_keys_and_bad_values() {
    assert!(matches!(RunConfig::parse("seed = 1\nlearning_rat = 0.1\n"), Err(Error::Parse { line: 2, .. })));
    assert!(matches!(RunConfig::parse("steps = many"), Err(Error::Parse { line: 1, .. })));
    assert!(matches!(RunConfig::parse("just words"), Err(Error::Parse { .. })));
    let c = RunConfig::parse("seed = 9 # trailing comment\n\n# full line\ncg = v1\narch = gnn").unwrap();
    assert_eq!((c.seed, c.arch), (9, Arch::Gnn));
}

#[test]
fn resolved_config_round_trips() {
    let mut c = RunConfig::parse("seed = 4\npe = off\ntoken = da\nablate.obs = base_set; base_set+m\nablate.pe = on off").unwrap();
    c.holdout.counts = vec![3, 5];
    let again = RunConfig::parse(&c.to_text()).unwrap();
    assert_eq!(again.to_text(), c.to_text());
    assert_eq!(again.ablate, c.ablate);
}

#[test]
fn tokenized_heads_need_a_transformer() {
    let c = RunConfig::parse("arch = mlp\ntoken = d").unwrap();
    assert!(matches!(c.policy_config(), Err(Error::Config(_))));
    let c = RunConfig::parse("arch = gnn\ncg = v2").unwrap();
    assert!(matches!(c.policy_config(), Err(Error::Config(_))));
    let c = RunConfig::parse("token = c").unwrap();
    assert_eq!(c.policy_config().unwrap().arch, Arch::TransformerTokenized);
}

#[test]
fn pipeline_writes_its_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path());
    let g = cmd_gen_data(&cfg).unwrap();
    assert!(g.stats.iter().all(|s| s.transitions == 60));
    let manifest = std::fs::read_to_string(dir.path().join("manifest.csv")).unwrap();
    assert_eq!(manifest.lines().count(), 3);

    let d = cmd_distill(&cfg).unwrap();
    let loss = std::fs::read_to_string(dir.path().join("loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 1 + 3 + 1);
    assert_eq!(d.report.curve.len(), 4);
    assert!(dir.path().join("distill.config").exists());

    let e = cmd_eval(&cfg, None).unwrap();
    assert_eq!(e.metrics.episodes, 4);
    assert!(e.summary.contains("mean_subdomain="));

    let missing = dir.path().join("nope.csv");
    assert!(matches!(cmd_eval(&cfg, Some(&missing)), Err(Error::Usage(_))));
    let baseline = dir.path().join("metrics.csv");
    let again = cmd_eval(&cfg, Some(&baseline)).unwrap();
    assert!(again.summary.contains("improvement_pct="));
}

#[test]
fn zero_steps_keep_the_initial_weights() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(dir.path());
    cfg.train.steps = 0;
    cmd_gen_data(&cfg).unwrap();
    let d = cmd_distill(&cfg).unwrap();
    let p = load_checkpoint(&d.checkpoint_path).unwrap();
    let init = init_params::<f64>(&cfg.policy_config().unwrap(), cfg.seed).unwrap();
    assert_eq!(checkpoint_bytes(&p), checkpoint_bytes(&init));
    assert_eq!(d.report.curve.len(), 1);
}

#[test]
fn mismatched_observations_fail_before_training() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(dir.path());
    cmd_gen_data(&cfg).unwrap();
    cfg.obs = "base_set".into();
    assert!(matches!(cmd_distill(&cfg), Err(Error::Config(_))));
    assert!(!dir.path().join("policy.ckpt").exists());
}

#[test]
fn ablation_runs_the_cross_product() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(dir.path());
    cfg.envs = vec!["ant_reach_3".into()];
    cfg.set("ablate.obs", "base_set; base_set+m").unwrap();
    cfg.set("ablate.pe", "on off").unwrap();
    let rows = cmd_ablate(&cfg).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.seed == cfg.seed));
    let table = std::fs::read_to_string(dir.path().join("ablation.csv")).unwrap();
    assert_eq!(table.lines().count(), 5);

    let mut cfg = tiny(dir.path());
    assert!(matches!(cmd_ablate(&cfg), Err(Error::Usage(_))));
    cfg.set("ablate.token", "").unwrap();
    assert!(matches!(cmd_ablate(&cfg), Err(Error::Usage(_))));
}

#[test]
fn token_axis_tags_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(dir.path());
    cfg.envs = vec!["ant_reach_3".into()];
    cfg.set("ablate.token", "d da c").unwrap();
    let rows = cmd_ablate(&cfg).unwrap();
    let tags: Vec<&str> = rows.iter().map(|r| r.token.as_str()).collect();
    assert_eq!(tags, ["d", "da", "c"]);
}
