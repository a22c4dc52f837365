use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ctrlgraph::cli::{cmd_ablate, cmd_distill, cmd_eval, cmd_gen_data, RunConfig};
use ctrlgraph::{Error, Result};

/// Control-graph policies: expert data, behavior distillation and evaluation.
#[derive(Parser)]
#[command(name = "ctrlgraph", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Roll the scripted expert and write a transition dataset.
    GenData(Flags),
    /// Train a policy on a dataset by behavior cloning.
    Distill(Flags),
    /// Score a checkpoint on the test environments of a split.
    Eval(Flags),
    /// Run every combination of the configured ablation axes.
    Ablate(Flags),
}

#[derive(Args)]
struct Flags {
    /// `key = value` run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = ["mlp", "gnn", "transformer"])]
    arch: Option<String>,
    #[arg(long, value_parser = ["v1", "v2"])]
    cg: Option<String>,
    #[arg(long, value_parser = ["none", "d", "da", "c"])]
    token: Option<String>,
    #[arg(long, value_parser = ["on", "off"])]
    pe: Option<String>,
    #[arg(long)]
    history: Option<usize>,
    #[arg(long)]
    transitions: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, value_parser = ["indist", "comp-morph", "comp-task", "ood"])]
    split: Option<String>,
    /// Baseline metric report to compare against.
    #[arg(long)]
    compare: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

impl Flags {
    /// The config file with command-line flags applied on top.
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p).map_err(|e| match e {
                Error::Io(io) => Error::Usage(format!("cannot read config {}: {io}", p.display())),
                Error::Parse { line, msg } => Error::Usage(format!("{}:{line}: {msg}", p.display())),
                other => other,
            })?,
            None => RunConfig::default(),
        };
        let text = |v: &Option<String>| v.clone();
        let overrides: [(&str, Option<String>); 12] = [
            ("seed", self.seed.map(|v| v.to_string())),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
            ("arch", text(&self.arch)),
            ("cg", text(&self.cg)),
            ("token", text(&self.token)),
            ("pe", text(&self.pe)),
            ("history", self.history.map(|v| v.to_string())),
            ("transitions", self.transitions.map(|v| v.to_string())),
            ("steps", self.steps.map(|v| v.to_string())),
            ("split", text(&self.split)),
            ("dataset", self.dataset.as_ref().map(|p| p.display().to_string())),
            ("checkpoint", self.checkpoint.as_ref().map(|p| p.display().to_string())),
        ];
        for (k, v) in overrides {
            if let Some(v) = v {
                cfg.set(k, &v)?;
            }
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(f) => {
            let out = cmd_gen_data(&f.resolve()?)?;
            for s in &out.stats {
                println!("{}: {} transitions, expert success {}/{}", s.env_id, s.transitions, s.successes, s.episodes);
            }
            println!("dataset={} fnv1a={:016x}", out.dataset_path.display(), out.checksum);
        }
        Command::Distill(f) => {
            let out = cmd_distill(&f.resolve()?)?;
            println!("initial_loss={}", out.report.initial_loss);
            println!("final_loss={}", out.report.final_loss);
            println!("checkpoint={}", out.checkpoint_path.display());
        }
        Command::Eval(f) => {
            let out = cmd_eval(&f.resolve()?, f.compare.as_deref())?;
            print!("{}", out.summary);
        }
        Command::Ablate(f) => {
            if f.compare.is_some() {
                return Err(Error::Usage("--compare applies to eval only".into()));
            }
            let rows = cmd_ablate(&f.resolve()?)?;
            println!("{}", ctrlgraph::cli::ABLATION_HEADER);
            for r in rows {
                println!(
                    "{},{},{},{},{},{},{},{},{},{}",
                    r.cell,
                    r.obs,
                    if r.pe { "on" } else { "off" },
                    r.token.as_str(),
                    r.history,
                    r.seed,
                    r.initial_loss,
                    r.final_loss,
                    r.mean_env,
                    r.mean_subdomain
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
