use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ctrlgraph"))
}

#[test]
fn usage_errors_exit_with_one() {
    let st = bin().args(["distill", "--arch", "rnn"]).output().unwrap();
    assert_eq!(st.status.code(), Some(1));
    let st = bin().args(["eval", "--config", "/nonexistent/run.config"]).output().unwrap();
    assert_eq!(st.status.code(), Some(1));
    let st = bin().arg("--help").output().unwrap();
    assert_eq!(st.status.code(), Some(0));
}

#[test]
fn bad_config_line_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.config");
    std::fs::write(&cfg, "seed = 1\nwidth = 3\n").unwrap();
    let out = bin().arg("gen-data").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":2:"));
}

#[test]
fn tiny_run_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.config");
    std::fs::write(
        &cfg,
        "envs = ant_reach_3\ntransitions = 50\nbatch_size = 4\nembed = 8\nattn_hidden = 8\nlayers = 1\n\
         eval_seeds = 2\nhorizon = 20\nlog_every = 1\nprobe_size = 8\n",
    )
    .unwrap();
    let out = dir.path().join("run");
    let run = |cmd: &str, extra: &[&str]| {
        let o = bin().arg(cmd).arg("--config").arg(&cfg).arg("--out").arg(&out).args(extra).output().unwrap();
        assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8(o.stdout).unwrap()
    };
    assert!(run("gen-data", &[]).contains("fnv1a="));
    assert!(run("distill", &["--steps", "2"]).contains("final_loss="));
    assert!(run("eval", &[]).contains("mean_env="));
    // missing checkpoint is a runtime failure, not a usage error
    let o = bin()
        .args(["eval", "--checkpoint"])
        .arg(dir.path().join("absent.ckpt"))
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
