use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::control_graph::{cg_width, detokenize_value, CgVariant, Dequantize, ObservationSpec, ACTION_SLOTS, N_BINS};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

pub const PE_STD: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arch {
    Mlp,
    Gnn,
    Transformer,
    TransformerTokenized,
}

impl Arch {
    pub fn as_str(self) -> &'static str {
        match self {
            Arch::Mlp => "mlp",
            Arch::Gnn => "gnn",
            Arch::Transformer => "transformer",
            Arch::TransformerTokenized => "transformer_tokenized",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "mlp" => Some(Arch::Mlp),
            "gnn" => Some(Arch::Gnn),
            "transformer" => Some(Arch::Transformer),
            "transformer_tokenized" => Some(Arch::TransformerTokenized),
            _ => None,
        }
    }

    pub fn is_transformer(self) -> bool {
        matches!(self, Arch::Transformer | Arch::TransformerTokenized)
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Output head of the tokenized transformer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenHead {
    /// Per-slot bin logits, argmax decoded at the bin center.
    D,
    /// Per-slot bin logits, argmax decoded with the three-bin average.
    Da,
    /// Continuous tanh head.
    C,
}

impl TokenHead {
    pub fn as_str(self) -> &'static str {
        match self {
            TokenHead::D => "d",
            TokenHead::Da => "da",
            TokenHead::C => "c",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "d" => Some(TokenHead::D),
            "da" => Some(TokenHead::Da),
            "c" => Some(TokenHead::C),
            _ => None,
        }
    }

    pub fn is_discrete(self) -> bool {
        !matches!(self, TokenHead::C)
    }

    pub fn dequantize_mode(self) -> Dequantize {
        match self {
            TokenHead::Da => Dequantize::AverageWindow,
            _ => Dequantize::Center,
        }
    }
}

/// Architecture, input layout and layer sizes of a policy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyConfig {
    pub arch: Arch,
    pub token: TokenHead,
    pub cg_variant: CgVariant,
    pub obs_mask: u16,
    pub history: usize,
    /// Per-node input width, history included.
    pub feature_width: usize,
    /// Rows of the position table and of the padded MLP input.
    pub max_nodes: usize,
    pub embed: usize,
    pub heads: usize,
    pub layers: usize,
    /// Hidden width of the feed-forward block after attention.
    pub attn_hidden: usize,
    pub mlp_hidden: usize,
    pub mlp_layers: usize,
    pub gnn_hidden: usize,
    pub gnn_layers: usize,
    pub use_pe: bool,
    pub use_embed_ln: bool,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        let obs = ObservationSpec::base_set_m();
        PolicyConfig {
            arch: Arch::Transformer,
            token: TokenHead::C,
            cg_variant: CgVariant::V2,
            obs_mask: obs.bitmask(),
            history: 1,
            feature_width: cg_width(obs.width(), CgVariant::V2),
            max_nodes: 40,
            embed: 256,
            heads: 2,
            layers: 3,
            attn_hidden: 512,
            mlp_hidden: 1024,
            mlp_layers: 2,
            gnn_hidden: 256,
            gnn_layers: 3,
            use_pe: true,
            use_embed_ln: false,
        }
    }
}

impl PolicyConfig {
    /// Small sizes that train in minutes on one core.
    pub fn desk() -> Self {
        PolicyConfig {
            embed: 64,
            heads: 2,
            layers: 2,
            attn_hidden: 128,
            mlp_hidden: 256,
            gnn_hidden: 64,
            use_embed_ln: true,
            ..Self::default()
        }
    }

    pub fn obs_spec(&self) -> Result<ObservationSpec> {
        ObservationSpec::from_bitmask(self.obs_mask)
    }

    /// Re-derives the input width from the observation flags, variant and history.
    pub fn with_inputs(mut self, obs: &ObservationSpec, variant: CgVariant, history: usize) -> Self {
        self.obs_mask = obs.bitmask();
        self.cg_variant = variant;
        self.history = history;
        self.feature_width = cg_width(obs.width(), variant) * history;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("feature_width", self.feature_width),
            ("max_nodes", self.max_nodes),
            ("history", self.history),
            ("embed", self.embed),
            ("heads", self.heads),
            ("attn_hidden", self.attn_hidden),
            ("mlp_hidden", self.mlp_hidden),
            ("gnn_hidden", self.gnn_hidden),
        ];
        if let Some((k, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{k} must be positive")));
        }
        if self.embed % self.heads != 0 {
            return Err(Error::Config(format!("embed {} is not divisible by {} heads", self.embed, self.heads)));
        }
        if self.arch == Arch::Gnn && self.cg_variant != CgVariant::V1 {
            return Err(Error::Config("the gnn policy reads control graph v1 only".into()));
        }
        let obs = self.obs_spec()?;
        if cg_width(obs.width(), self.cg_variant) * self.history != self.feature_width {
            return Err(Error::Config(format!(
                "feature width {} does not match observation '{obs}', {} and history {}",
                self.feature_width, self.cg_variant, self.history
            )));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            s.push_str(&format!("{k}={v}\n"));
        }
        s
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("arch", self.arch.to_string()),
            ("token", self.token.as_str().to_string()),
            ("cg", self.cg_variant.to_string()),
            ("obs_mask", self.obs_mask.to_string()),
            ("history", self.history.to_string()),
            ("feature_width", self.feature_width.to_string()),
            ("max_nodes", self.max_nodes.to_string()),
            ("embed", self.embed.to_string()),
            ("heads", self.heads.to_string()),
            ("layers", self.layers.to_string()),
            ("attn_hidden", self.attn_hidden.to_string()),
            ("mlp_hidden", self.mlp_hidden.to_string()),
            ("mlp_layers", self.mlp_layers.to_string()),
            ("gnn_hidden", self.gnn_hidden.to_string()),
            ("gnn_layers", self.gnn_layers.to_string()),
            ("use_pe", self.use_pe.to_string()),
            ("use_embed_ln", self.use_embed_ln.to_string()),
        ]
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = PolicyConfig::default();
        let bad = |k: &str, v: &str| Error::Corruption(format!("bad config value {k}={v}"));
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Corruption(format!("bad config line '{line}'")))?;
            let num = || v.parse::<usize>().map_err(|_| bad(k, v));
            let flag = || v.parse::<bool>().map_err(|_| bad(k, v));
            match k {
                "arch" => c.arch = Arch::parse(v).ok_or_else(|| bad(k, v))?,
                "token" => c.token = TokenHead::parse(v).ok_or_else(|| bad(k, v))?,
                "cg" => c.cg_variant = CgVariant::parse(v).ok_or_else(|| bad(k, v))?,
                "obs_mask" => c.obs_mask = v.parse().map_err(|_| bad(k, v))?,
                "history" => c.history = num()?,
                "feature_width" => c.feature_width = num()?,
                "max_nodes" => c.max_nodes = num()?,
                "embed" => c.embed = num()?,
                "heads" => c.heads = num()?,
                "layers" => c.layers = num()?,
                "attn_hidden" => c.attn_hidden = num()?,
                "mlp_hidden" => c.mlp_hidden = num()?,
                "mlp_layers" => c.mlp_layers = num()?,
                "gnn_hidden" => c.gnn_hidden = num()?,
                "gnn_layers" => c.gnn_layers = num()?,
                "use_pe" => c.use_pe = flag()?,
                "use_embed_ln" => c.use_embed_ln = flag()?,
                _ => return Err(Error::Corruption(format!("unknown config key '{k}'"))),
            }
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Init {
    Glorot,
    Zeros,
    Ones,
    Normal(f64),
    Codebook,
}

/// Parameter names, shapes and initializers in storage order.
fn layout(c: &PolicyConfig) -> Vec<(String, [usize; 2], Init)> {
    let mut v: Vec<(String, [usize; 2], Init)> = Vec::new();
    let dense = |v: &mut Vec<_>, name: &str, i: usize, o: usize| {
        v.push((format!("{name}.w"), [i, o], Init::Glorot));
        v.push((format!("{name}.b"), [1, o], Init::Zeros));
    };
    let f = c.feature_width;
    match c.arch {
        Arch::Mlp => {
            let mut width = c.max_nodes * f;
            for l in 0..c.mlp_layers {
                dense(&mut v, &format!("mlp{l}"), width, c.mlp_hidden);
                width = c.mlp_hidden;
            }
            dense(&mut v, "dec", width, c.max_nodes * ACTION_SLOTS);
        }
        Arch::Gnn => {
            let mut width = f;
            for l in 0..c.gnn_layers {
                v.push((format!("gnn{l}.self"), [width, c.gnn_hidden], Init::Glorot));
                v.push((format!("gnn{l}.msg"), [width, c.gnn_hidden], Init::Glorot));
                v.push((format!("gnn{l}.b"), [1, c.gnn_hidden], Init::Zeros));
                width = c.gnn_hidden;
            }
            dense(&mut v, "dec", width, ACTION_SLOTS);
        }
        Arch::Transformer | Arch::TransformerTokenized => {
            let e = c.embed;
            if c.arch == Arch::TransformerTokenized {
                v.push(("codebook".into(), [1, N_BINS], Init::Codebook));
            }
            dense(&mut v, "embed", f, e);
            if c.use_pe {
                v.push(("pe".into(), [c.max_nodes, e], Init::Normal(PE_STD)));
            }
            if c.use_embed_ln {
                v.push(("embed_ln.g".into(), [1, e], Init::Ones));
                v.push(("embed_ln.b".into(), [1, e], Init::Zeros));
            }
            for l in 0..c.layers {
                for p in ["q", "k", "v", "o"] {
                    dense(&mut v, &format!("l{l}.{p}"), e, e);
                }
                v.push((format!("l{l}.ln1.g"), [1, e], Init::Ones));
                v.push((format!("l{l}.ln1.b"), [1, e], Init::Zeros));
                dense(&mut v, &format!("l{l}.ff1"), e, c.attn_hidden);
                dense(&mut v, &format!("l{l}.ff2"), c.attn_hidden, e);
                v.push((format!("l{l}.ln2.g"), [1, e], Init::Ones));
                v.push((format!("l{l}.ln2.b"), [1, e], Init::Zeros));
            }
            let out = if c.arch == Arch::TransformerTokenized && c.token.is_discrete() {
                ACTION_SLOTS * N_BINS
            } else {
                ACTION_SLOTS
            };
            dense(&mut v, "dec", e + f, out);
        }
    }
    v
}

/// Named parameter tensors of one policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams<T: Real = f64> {
    pub config: PolicyConfig,
    pub names: Vec<String>,
    pub tensors: Vec<Tensor<T>>,
}

impl<T: Real> PolicyParams<T> {
    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.index(name).map(|i| &self.tensors[i])
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    pub fn cast<U: Real>(&self) -> PolicyParams<U> {
        PolicyParams {
            config: self.config.clone(),
            names: self.names.clone(),
            tensors: self.tensors.iter().map(|t| t.cast()).collect(),
        }
    }

    /// Checks that names and shapes match the layout implied by the config.
    pub fn check_layout(&self) -> Result<()> {
        let expected = layout(&self.config);
        if expected.len() != self.names.len() || self.tensors.len() != self.names.len() {
            return Err(Error::Config(format!(
                "{} tensors stored, config {} expects {}",
                self.tensors.len(),
                self.config.arch,
                expected.len()
            )));
        }
        for ((name, shape, _), (n, t)) in expected.iter().zip(self.names.iter().zip(&self.tensors)) {
            if name != n || t.shape() != shape {
                return Err(Error::Config(format!(
                    "tensor '{n}' {:?} does not match expected '{name}' {:?}",
                    t.shape(),
                    shape
                )));
            }
        }
        Ok(())
    }
}

/// Glorot-uniform weights, zero biases, unit layer-norm gains, small normal
/// position table. Deterministic in `seed`.
pub fn init_params<T: Real>(config: &PolicyConfig, seed: u64) -> Result<PolicyParams<T>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut names = Vec::new();
    let mut tensors = Vec::new();
    for (name, [r, c], init) in layout(config) {
        let n = r * c;
        let data: Vec<f64> = match init {
            Init::Glorot => {
                let a = (6.0 / (r + c) as f64).sqrt();
                (0..n).map(|_| rng.gen_range(-a..=a)).collect()
            }
            Init::Zeros => vec![0.0; n],
            Init::Ones => vec![1.0; n],
            Init::Normal(std) => {
                let d = Normal::new(0.0, std).expect("positive standard deviation");
                (0..n).map(|_| d.sample(&mut rng)).collect()
            }
            Init::Codebook => (0..n).map(|k| detokenize_value::<f64>(k, Dequantize::Center)).collect::<Result<_>>()?,
        };
        names.push(name);
        tensors.push(Tensor::matrix(r, c, data.into_iter().map(T::lit).collect()));
    }
    Ok(PolicyParams { config: config.clone(), names, tensors })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> PolicyConfig {
        PolicyConfig { embed: 32, heads: 2, layers: 1, attn_hidden: 48, max_nodes: 12, ..PolicyConfig::default() }
    }

    #[test]
    fn same_seed_same_params() {
        let a: PolicyParams = init_params(&tiny(), 7).unwrap();
        let b: PolicyParams = init_params(&tiny(), 7).unwrap();
        assert_eq!(a, b);
        let c: PolicyParams = init_params(&tiny(), 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn biases_start_at_zero() {
        let p: PolicyParams = init_params(&tiny(), 1).unwrap();
        for (n, t) in p.names.iter().zip(&p.tensors) {
            if n.ends_with(".b") {
                assert!(t.data().iter().all(|&v| v == 0.0), "{n}");
            }
        }
    }

    #[test]
    fn transformer_parameter_count() {
        // embed 32, 2 heads, 1 layer, F = 30 + 3 goal indicators = 33,
        // feed-forward 48, 12 position rows.
        let p: PolicyParams = init_params(&tiny(), 0).unwrap();
        let (f, e, h, n) = (33, 32, 48, 12);
        let embed = f * e + e;
        let pe = n * e;
        let attn = 4 * (e * e + e);
        let norms = 2 * 2 * e;
        let ff = e * h + h + h * e + e;
        let dec = (e + f) * 3 + 3;
        assert_eq!(p.num_parameters(), embed + pe + attn + norms + ff + dec);
        assert_eq!(p.num_parameters(), 1088 + 384 + 4224 + 128 + 3152 + 198);
    }

    #[test]
    fn heads_must_divide_embed() {
        let c = PolicyConfig { embed: 30, heads: 4, ..tiny() };
        assert!(matches!(init_params::<f64>(&c, 0), Err(Error::Config(_))));
    }

    #[test]
    fn config_text_round_trip() {
        let c = PolicyConfig { arch: Arch::TransformerTokenized, token: TokenHead::Da, use_pe: false, ..tiny() };
        assert_eq!(PolicyConfig::from_text(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn codebook_starts_at_bin_values() {
        let c = PolicyConfig { arch: Arch::TransformerTokenized, ..tiny() };
        let p: PolicyParams = init_params(&c, 0).unwrap();
        let cb = p.get("codebook").unwrap();
        assert_eq!(cb.data()[512], detokenize_value::<f64>(512, Dequantize::Center).unwrap());
    }
}
