use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::control_graph::{CgVariant, ObservationSpec};
use crate::distill::{TrainConfig, DEFAULT_TRANSITIONS};
use crate::env::DEFAULT_EXPERT_GAIN;
use crate::error::{Error, Result};
use crate::eval::{Holdout, SplitKind, DEFAULT_EVAL_SEEDS};
use crate::morphology::Blueprint;
use crate::nn::{Arch, PolicyConfig, TokenHead};

/// Environments of the desk-scale suite.
pub const DESK_ENVS: [&str; 4] = ["ant_reach_3", "ant_reach_5", "ant_twister_3", "ant_twister_5"];

/// Architecture choice as written in configs: `token` other than `none`
/// turns a transformer into the tokenized transformer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenChoice {
    None,
    Head(TokenHead),
}

impl TokenChoice {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Some(TokenChoice::None),
            other => TokenHead::parse(other).map(TokenChoice::Head),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TokenChoice::None => "none",
            TokenChoice::Head(h) => match h {
                TokenHead::D => "d",
                TokenHead::Da => "da",
                TokenHead::C => "c",
            },
        }
    }
}

/// Ablation axes; an absent axis keeps the base value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AblationAxes {
    pub obs: Option<Vec<String>>,
    pub pe: Option<Vec<bool>>,
    pub token: Option<Vec<TokenChoice>>,
    pub history: Option<Vec<usize>>,
}

/// Everything a run needs, parsed from `key = value` lines.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub envs: Vec<String>,
    pub obs: String,
    pub cg: CgVariant,
    pub history: usize,
    pub arch: Arch,
    pub token: TokenChoice,
    pub pe: bool,
    pub embed_ln: bool,
    pub embed: usize,
    pub heads: usize,
    pub layers: usize,
    pub attn_hidden: usize,
    pub mlp_hidden: usize,
    pub mlp_layers: usize,
    pub gnn_hidden: usize,
    pub gnn_layers: usize,
    pub max_nodes: usize,
    pub transitions: usize,
    pub expert_gain: f64,
    pub train: TrainConfig,
    pub split: SplitKind,
    pub holdout: Holdout,
    pub eval_seeds: usize,
    pub horizon: usize,
    pub dataset: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub export_attention: bool,
    pub ablate: AblationAxes,
}

impl Default for RunConfig {
    fn default() -> Self {
        let desk = PolicyConfig::desk();
        RunConfig {
            seed: 0,
            out: PathBuf::from("out"),
            envs: DESK_ENVS.iter().map(|s| s.to_string()).collect(),
            obs: ObservationSpec::base_set_m().to_string(),
            cg: CgVariant::V2,
            history: 1,
            arch: Arch::Transformer,
            token: TokenChoice::None,
            pe: true,
            embed_ln: desk.use_embed_ln,
            embed: desk.embed,
            heads: desk.heads,
            layers: desk.layers,
            attn_hidden: desk.attn_hidden,
            mlp_hidden: desk.mlp_hidden,
            mlp_layers: desk.mlp_layers,
            gnn_hidden: desk.gnn_hidden,
            gnn_layers: desk.gnn_layers,
            max_nodes: desk.max_nodes,
            transitions: DEFAULT_TRANSITIONS,
            expert_gain: DEFAULT_EXPERT_GAIN,
            train: TrainConfig::default(),
            split: SplitKind::InDistribution,
            holdout: Holdout::default(),
            eval_seeds: DEFAULT_EVAL_SEEDS,
            horizon: crate::env::DEFAULT_EPISODE_LENGTH,
            dataset: None,
            checkpoint: None,
            export_attention: false,
            ablate: AblationAxes::default(),
        }
    }
}

fn words(v: &str) -> Vec<String> {
    v.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty()).map(str::to_string).collect()
}

fn parse_bool(v: &str) -> Option<bool> {
    match v {
        "on" | "true" | "yes" => Some(true),
        "off" | "false" | "no" => Some(false),
        _ => None,
    }
}

fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

impl RunConfig {
    /// Parses a config file body. Unknown keys and malformed values are
    /// errors; later lines override earlier ones.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(i + 1, format!("expected 'key = value', got '{line}'")))?;
            c.set(k.trim(), v.trim()).map_err(|e| match e {
                Error::Usage(msg) => Error::parse(i + 1, msg),
                other => other,
            })?;
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Sets one key from its text form.
    pub fn set(&mut self, k: &str, v: &str) -> Result<()> {
        let bad = || Error::Usage(format!("invalid value '{v}' for '{k}'"));
        let num = || v.parse::<usize>().map_err(|_| bad());
        let real = || v.parse::<f64>().map_err(|_| bad());
        let flag = || parse_bool(v).ok_or_else(bad);
        match k {
            "seed" => self.seed = v.parse().map_err(|_| bad())?,
            "out" => self.out = PathBuf::from(v),
            "envs" => self.envs = words(v),
            "obs" => self.obs = ObservationSpec::parse(v).map_err(|_| bad())?.to_string(),
            "cg" => self.cg = CgVariant::parse(v).ok_or_else(bad)?,
            "history" => self.history = num()?,
            "arch" => {
                self.arch = match v {
                    "mlp" => Arch::Mlp,
                    "gnn" => Arch::Gnn,
                    "transformer" => Arch::Transformer,
                    _ => return Err(bad()),
                }
            }
            "token" => self.token = TokenChoice::parse(v).ok_or_else(bad)?,
            "pe" => self.pe = flag()?,
            "embed_ln" => self.embed_ln = flag()?,
            "embed" => self.embed = num()?,
            "heads" => self.heads = num()?,
            "layers" => self.layers = num()?,
            "attn_hidden" => self.attn_hidden = num()?,
            "mlp_hidden" => self.mlp_hidden = num()?,
            "mlp_layers" => self.mlp_layers = num()?,
            "gnn_hidden" => self.gnn_hidden = num()?,
            "gnn_layers" => self.gnn_layers = num()?,
            "max_nodes" => self.max_nodes = num()?,
            "transitions" => self.transitions = num()?,
            "expert_gain" => self.expert_gain = real()?,
            "learning_rate" => self.train.learning_rate = real()?,
            "batch_size" => self.train.batch_size = num()?,
            "grad_clip" => self.train.grad_clip = real()?,
            "steps" => self.train.steps = num()?,
            "log_every" => self.train.log_every = num()?,
            "mixed_batches" => self.train.mixed_batches = flag()?,
            "probe_size" => self.train.probe_size = num()?,
            "split" => self.split = SplitKind::parse(v).ok_or_else(bad)?,
            "holdout_counts" => {
                self.holdout.counts = words(v).iter().map(|w| w.parse()).collect::<Result<_, _>>().map_err(|_| bad())?
            }
            "holdout_blueprints" => {
                self.holdout.blueprints = words(v).iter().map(|w| Blueprint::parse(w).ok_or_else(bad)).collect::<Result<_>>()?
            }
            "holdout_task" => self.holdout.task = v.to_string(),
            "eval_seeds" => self.eval_seeds = num()?,
            "horizon" => self.horizon = num()?,
            "dataset" => self.dataset = Some(PathBuf::from(v)),
            "checkpoint" => self.checkpoint = Some(PathBuf::from(v)),
            "export_attention" => self.export_attention = flag()?,
            "ablate.obs" => {
                let sets = v.split(';').map(str::trim).filter(|s| !s.is_empty());
                let sets = sets.map(|s| ObservationSpec::parse(s).map(|o| o.to_string()).map_err(|_| bad()));
                self.ablate.obs = Some(sets.collect::<Result<_>>()?)
            }
            "ablate.pe" => self.ablate.pe = Some(words(v).iter().map(|w| parse_bool(w).ok_or_else(bad)).collect::<Result<_>>()?),
            "ablate.token" => {
                self.ablate.token = Some(words(v).iter().map(|w| TokenChoice::parse(w).ok_or_else(bad)).collect::<Result<_>>()?)
            }
            "ablate.history" => {
                self.ablate.history = Some(words(v).iter().map(|w| w.parse()).collect::<Result<_, _>>().map_err(|_| bad())?)
            }
            _ => return Err(Error::Usage(format!("unknown config key '{k}'"))),
        }
        Ok(())
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.dataset.clone().unwrap_or_else(|| self.out.join("dataset.cgds"))
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint.clone().unwrap_or_else(|| self.out.join("policy.ckpt"))
    }

    pub fn obs_spec(&self) -> Result<ObservationSpec> {
        ObservationSpec::parse(&self.obs)
    }

    /// Policy configuration implied by the run.
    pub fn policy_config(&self) -> Result<PolicyConfig> {
        let arch = match (self.arch, self.token) {
            (a, TokenChoice::None) => a,
            (Arch::Transformer, TokenChoice::Head(_)) => Arch::TransformerTokenized,
            (a, TokenChoice::Head(_)) => {
                return Err(Error::Config(format!("tokenized heads need the transformer, not {a}")));
            }
        };
        let base = PolicyConfig {
            arch,
            token: match self.token {
                TokenChoice::Head(h) => h,
                TokenChoice::None => TokenHead::C,
            },
            max_nodes: self.max_nodes,
            embed: self.embed,
            heads: self.heads,
            layers: self.layers,
            attn_hidden: self.attn_hidden,
            mlp_hidden: self.mlp_hidden,
            mlp_layers: self.mlp_layers,
            gnn_hidden: self.gnn_hidden,
            gnn_layers: self.gnn_layers,
            use_pe: self.pe,
            use_embed_ln: self.embed_ln,
            ..PolicyConfig::default()
        };
        let c = base.with_inputs(&self.obs_spec()?, self.cg, self.history);
        c.validate()?;
        Ok(c)
    }

    /// The resolved configuration in the same `key = value` syntax.
    pub fn to_text(&self) -> String {
        let list = |v: &[String]| v.join(" ");
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("seed", self.seed.to_string());
        kv("out", self.out.display().to_string());
        kv("envs", list(&self.envs));
        kv("obs", self.obs.clone());
        kv("cg", self.cg.to_string());
        kv("history", self.history.to_string());
        kv("arch", self.arch.to_string());
        kv("token", self.token.as_str().into());
        kv("pe", on_off(self.pe).into());
        kv("embed_ln", on_off(self.embed_ln).into());
        kv("embed", self.embed.to_string());
        kv("heads", self.heads.to_string());
        kv("layers", self.layers.to_string());
        kv("attn_hidden", self.attn_hidden.to_string());
        kv("mlp_hidden", self.mlp_hidden.to_string());
        kv("mlp_layers", self.mlp_layers.to_string());
        kv("gnn_hidden", self.gnn_hidden.to_string());
        kv("gnn_layers", self.gnn_layers.to_string());
        kv("max_nodes", self.max_nodes.to_string());
        kv("transitions", self.transitions.to_string());
        kv("expert_gain", self.expert_gain.to_string());
        kv("learning_rate", self.train.learning_rate.to_string());
        kv("batch_size", self.train.batch_size.to_string());
        kv("grad_clip", self.train.grad_clip.to_string());
        kv("steps", self.train.steps.to_string());
        kv("log_every", self.train.log_every.to_string());
        kv("mixed_batches", on_off(self.train.mixed_batches).into());
        kv("probe_size", self.train.probe_size.to_string());
        kv("split", self.split.to_string());
        kv("holdout_counts", self.holdout.counts.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" "));
        kv(
            "holdout_blueprints",
            self.holdout.blueprints.iter().map(|b| b.as_str()).collect::<Vec<_>>().join(" "),
        );
        kv("holdout_task", self.holdout.task.clone());
        kv("eval_seeds", self.eval_seeds.to_string());
        kv("horizon", self.horizon.to_string());
        kv("dataset", self.dataset_path().display().to_string());
        kv("checkpoint", self.checkpoint_path().display().to_string());
        kv("export_attention", on_off(self.export_attention).into());
        if let Some(v) = &self.ablate.obs {
            kv("ablate.obs", v.join("; "));
        }
        if let Some(v) = &self.ablate.pe {
            kv("ablate.pe", v.iter().map(|&b| on_off(b)).collect::<Vec<_>>().join(" "));
        }
        if let Some(v) = &self.ablate.token {
            kv("ablate.token", v.iter().map(|t| t.as_str()).collect::<Vec<_>>().join(" "));
        }
        if let Some(v) = &self.ablate.history {
            kv("ablate.history", v.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(" "));
        }
        s
    }
}
