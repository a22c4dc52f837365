use crate::control_graph::{
    dequantize, mu_law, mu_law_inverse, quantize, tokenize_cg, CgVariant, ControlGraph, ACTION_SLOTS, N_BINS,
};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

use super::params::{Arch, PolicyConfig, PolicyParams};
use super::tape::{Tape, Var};

/// A control graph prepared for a specific policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyInput<T: Real = f64> {
    pub features: Tensor<T>,
    /// Token grid, present for the tokenized transformer.
    pub tokens: Option<Vec<usize>>,
    /// `n_nodes x ACTION_SLOTS`.
    pub action_mask: Tensor<T>,
    pub actuator_map: Vec<(usize, usize)>,
    pub edges: Vec<(usize, usize)>,
    pub variant: CgVariant,
}

impl<T: Real> PolicyInput<T> {
    pub fn from_cg(cg: &ControlGraph, config: &PolicyConfig) -> Result<Self> {
        if cg.variant != config.cg_variant {
            return Err(Error::Config(format!(
                "policy expects control graph {}, got {}",
                config.cg_variant, cg.variant
            )));
        }
        if cg.feature_width() != config.feature_width {
            return Err(Error::Shape(format!(
                "control graph width {} does not match policy width {}",
                cg.feature_width(),
                config.feature_width
            )));
        }
        let tokens = if config.arch == Arch::TransformerTokenized { Some(tokenize_cg(cg)?) } else { None };
        Ok(PolicyInput {
            features: cg.node_features.cast(),
            tokens,
            action_mask: cg.action_mask.cast(),
            actuator_map: cg.actuator_map.clone(),
            edges: cg.edges.clone(),
            variant: cg.variant,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.features.rows()
    }

    pub fn action_dimension(&self) -> usize {
        self.actuator_map.len()
    }
}

/// Outputs of one forward pass, as tape variables.
#[derive(Debug, Clone)]
pub struct Forward {
    /// Masked `n_nodes x ACTION_SLOTS` tanh outputs (continuous heads).
    pub slots: Option<Var>,
    /// `(n_nodes * ACTION_SLOTS) x N_BINS` logits (discrete heads).
    pub logits: Option<Var>,
    /// Attention maps, layer-major then head.
    pub attention: Vec<Var>,
}

/// Registers every parameter tensor on the tape.
pub fn load_params<T: Real>(tape: &mut Tape<T>, params: &PolicyParams<T>) -> Vec<Var> {
    params.tensors.iter().map(|t| tape.param(t.clone())).collect()
}

struct Ctx<'a, T: Real> {
    params: &'a PolicyParams<T>,
    vars: &'a [Var],
}

impl<T: Real> Ctx<'_, T> {
    fn p(&self, name: &str) -> Var {
        let i = self.params.index(name).unwrap_or_else(|| panic!("parameter '{name}' missing from layout"));
        self.vars[i]
    }

    fn dense(&self, tape: &mut Tape<T>, x: Var, name: &str) -> Var {
        let y = tape.matmul(x, self.p(&format!("{name}.w")));
        tape.add_row(y, self.p(&format!("{name}.b")))
    }
}

fn mask_row_major<T: Real>(mask: &Tensor<T>, rows: usize, cols: usize) -> Tensor<T> {
    let mut m = mask.data().to_vec();
    m.resize(rows * cols, T::zero());
    Tensor::matrix(rows, cols, m)
}

pub fn forward<T: Real>(
    tape: &mut Tape<T>,
    params: &PolicyParams<T>,
    vars: &[Var],
    input: &PolicyInput<T>,
) -> Result<Forward> {
    let c = &params.config;
    if input.features.cols() != c.feature_width {
        return Err(Error::Shape(format!(
            "input width {} does not match policy width {}",
            input.features.cols(),
            c.feature_width
        )));
    }
    let ctx = Ctx { params, vars };
    match c.arch {
        Arch::Mlp => mlp_forward(tape, &ctx, input),
        Arch::Gnn => gnn_forward(tape, &ctx, input),
        Arch::Transformer | Arch::TransformerTokenized => transformer_forward(tape, &ctx, input),
    }
}

fn mlp_forward<T: Real>(tape: &mut Tape<T>, ctx: &Ctx<'_, T>, input: &PolicyInput<T>) -> Result<Forward> {
    let c = &ctx.params.config;
    let n = input.n_nodes();
    if n > c.max_nodes {
        return Err(Error::Shape(format!("{n} nodes exceed the mlp input capacity of {}", c.max_nodes)));
    }
    let mut flat = input.features.data().to_vec();
    flat.resize(c.max_nodes * c.feature_width, T::zero());
    let mut h = tape.constant(Tensor::matrix(1, flat.len(), flat));
    for l in 0..c.mlp_layers {
        h = ctx.dense(tape, h, &format!("mlp{l}"));
        h = tape.relu(h);
        h = tape.check(h, &format!("mlp{l}"))?;
    }
    let out = ctx.dense(tape, h, "dec");
    let out = tape.tanh(out);
    let out = tape.mul_const(out, mask_row_major(&input.action_mask, 1, c.max_nodes * ACTION_SLOTS));
    let out = tape.slice_cols(out, 0, n * ACTION_SLOTS);
    let out = tape.reshape(out, n, ACTION_SLOTS);
    let out = tape.check(out, "dec")?;
    Ok(Forward { slots: Some(out), logits: None, attention: Vec::new() })
}

fn gnn_forward<T: Real>(tape: &mut Tape<T>, ctx: &Ctx<'_, T>, input: &PolicyInput<T>) -> Result<Forward> {
    if input.variant != CgVariant::V1 {
        return Err(Error::Unsupported("the gnn policy reads control graph v1 only".into()));
    }
    let c = &ctx.params.config;
    let n = input.n_nodes();
    let mut adj = Tensor::zeros(&[n, n]);
    for &(a, b) in &input.edges {
        adj.set(a, b, T::one());
        adj.set(b, a, T::one());
    }
    let adj = tape.constant(adj);
    let mut h = tape.constant(input.features.clone());
    for l in 0..c.gnn_layers {
        let msg = tape.matmul_ordered(adj, h);
        let a = tape.matmul(h, ctx.p(&format!("gnn{l}.self")));
        let b = tape.matmul(msg, ctx.p(&format!("gnn{l}.msg")));
        let s = tape.add(a, b);
        let s = tape.add_row(s, ctx.p(&format!("gnn{l}.b")));
        h = tape.relu(s);
        h = tape.check(h, &format!("gnn{l}"))?;
    }
    let out = ctx.dense(tape, h, "dec");
    let out = tape.tanh(out);
    let out = tape.mul_const(out, input.action_mask.clone());
    let out = tape.check(out, "dec")?;
    Ok(Forward { slots: Some(out), logits: None, attention: Vec::new() })
}

fn transformer_forward<T: Real>(tape: &mut Tape<T>, ctx: &Ctx<'_, T>, input: &PolicyInput<T>) -> Result<Forward> {
    let c = &ctx.params.config;
    let n = input.n_nodes();
    if c.use_pe && n > c.max_nodes {
        return Err(Error::Shape(format!("{n} nodes exceed the position table of {} rows", c.max_nodes)));
    }
    let s = if c.arch == Arch::TransformerTokenized {
        let tokens = input.tokens.as_ref().ok_or_else(|| Error::Value("tokenized policy needs a token grid".into()))?;
        if let Some(&t) = tokens.iter().find(|&&t| t >= N_BINS) {
            return Err(Error::Index(format!("token {t} out of range for {N_BINS} bins")));
        }
        tape.gather(ctx.p("codebook"), tokens.clone(), n, c.feature_width)
    } else {
        tape.constant(input.features.clone())
    };
    let mut z = ctx.dense(tape, s, "embed");
    if c.use_pe {
        let pe = tape.slice_rows(ctx.p("pe"), 0, n);
        z = tape.add(z, pe);
    }
    if c.use_embed_ln {
        z = tape.layer_norm(z, ctx.p("embed_ln.g"), ctx.p("embed_ln.b"));
    }
    z = tape.check(z, "embed")?;
    let dh = c.embed / c.heads;
    let scale = T::one() / T::count(dh).sqrt();
    let mut attention = Vec::with_capacity(c.layers * c.heads);
    for l in 0..c.layers {
        let q = ctx.dense(tape, z, &format!("l{l}.q"));
        let k = ctx.dense(tape, z, &format!("l{l}.k"));
        let v = ctx.dense(tape, z, &format!("l{l}.v"));
        let mut heads = Vec::with_capacity(c.heads);
        for h in 0..c.heads {
            let qh = tape.slice_cols(q, h * dh, dh);
            let kh = tape.slice_cols(k, h * dh, dh);
            let vh = tape.slice_cols(v, h * dh, dh);
            let scores = tape.matmul_bt(qh, kh);
            let scores = tape.scale(scores, scale);
            let a = tape.softmax_rows(scores);
            attention.push(a);
            heads.push(tape.matmul_ordered(a, vh));
        }
        let cat = if heads.len() == 1 { heads[0] } else { tape.concat_cols(&heads) };
        let o = ctx.dense(tape, cat, &format!("l{l}.o"));
        let r = tape.add(o, z);
        let z1 = tape.layer_norm(r, ctx.p(&format!("l{l}.ln1.g")), ctx.p(&format!("l{l}.ln1.b")));
        let z1 = tape.check(z1, &format!("l{l}.attn"))?;
        let f = ctx.dense(tape, z1, &format!("l{l}.ff1"));
        let f = tape.relu(f);
        let f = ctx.dense(tape, f, &format!("l{l}.ff2"));
        let r = tape.add(f, z1);
        z = tape.layer_norm(r, ctx.p(&format!("l{l}.ln2.g")), ctx.p(&format!("l{l}.ln2.b")));
        z = tape.check(z, &format!("l{l}.ff"))?;
    }
    let zs = tape.concat_cols(&[z, s]);
    let out = ctx.dense(tape, zs, "dec");
    let out = tape.check(out, "dec")?;
    if c.arch == Arch::TransformerTokenized && c.token.is_discrete() {
        let logits = tape.reshape(out, n * ACTION_SLOTS, N_BINS);
        return Ok(Forward { slots: None, logits: Some(logits), attention });
    }
    let out = tape.tanh(out);
    let out = tape.mul_const(out, input.action_mask.clone());
    Ok(Forward { slots: Some(out), logits: None, attention })
}

/// The morphology's action vector from a forward pass.
pub fn decode_actions<T: Real>(
    tape: &Tape<T>,
    config: &PolicyConfig,
    out: &Forward,
    input: &PolicyInput<T>,
) -> Result<Vec<T>> {
    if let Some(slots) = out.slots {
        let v = tape.value(slots).data();
        return Ok(input.actuator_map.iter().map(|&(n, s)| v[n * ACTION_SLOTS + s]).collect());
    }
    let logits = tape.value(out.logits.expect("discrete head has logits"));
    let mode = config.token.dequantize_mode();
    input
        .actuator_map
        .iter()
        .map(|&(n, s)| {
            let row = logits.row(n * ACTION_SLOTS + s);
            let k = argmax(row);
            let y: T = dequantize(k, N_BINS, mode)?;
            Ok(mu_law_inverse(y).max(-T::one()).min(T::one()))
        })
        .collect()
}

fn argmax<T: Real>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Bin index used as the classification target for an action value.
pub fn action_bin<T: Real>(a: T) -> usize {
    quantize(mu_law(a), N_BINS)
}

/// Behavior-cloning loss of one example, already divided by `batch`.
/// Continuous heads use the squared error averaged over actuated slots;
/// discrete heads use the mean cross-entropy of the expert's bins.
pub fn example_loss<T: Real>(
    tape: &mut Tape<T>,
    out: &Forward,
    input: &PolicyInput<T>,
    target: &[T],
    batch: usize,
) -> Result<Var> {
    let dim = input.action_dimension();
    if target.len() != dim {
        return Err(Error::Shape(format!("target has {} actions, morphology has {dim}", target.len())));
    }
    if dim == 0 {
        return Err(Error::Value("morphology has no actuators".into()));
    }
    let norm = T::one() / (T::count(dim) * T::count(batch));
    let n = input.n_nodes();
    if let Some(slots) = out.slots {
        let mut t = Tensor::zeros(&[n, ACTION_SLOTS]);
        for (&(node, s), &a) in input.actuator_map.iter().zip(target) {
            t.set(node, s, a);
        }
        let t = tape.constant(t);
        let d = tape.sub(slots, t);
        let sq = tape.square(d);
        let sum = tape.sum_all(sq);
        return Ok(tape.scale(sum, norm));
    }
    let logits = out.logits.expect("discrete head has logits");
    let mut targets = vec![None; n * ACTION_SLOTS];
    for (&(node, s), &a) in input.actuator_map.iter().zip(target) {
        targets[node * ACTION_SLOTS + s] = Some(action_bin(a));
    }
    let ce = tape.cross_entropy(logits, targets);
    Ok(tape.scale(ce, norm))
}

/// Forward pass outside of training: the action vector and attention maps.
pub fn policy_act<T: Real>(params: &PolicyParams<T>, input: &PolicyInput<T>) -> Result<(Vec<T>, Vec<Tensor<T>>)> {
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.tensors.iter().map(|t| tape.constant(t.clone())).collect();
    let out = forward(&mut tape, params, &vars, input)?;
    let actions = decode_actions(&tape, &params.config, &out, input)?;
    let attn = out.attention.iter().map(|&a| tape.value(a).clone()).collect();
    Ok((actions, attn))
}

/// Mean loss of a batch and the gradient of every parameter tensor.
pub fn loss_and_grad<T: Real>(
    params: &PolicyParams<T>,
    inputs: &[&PolicyInput<T>],
    targets: &[&[T]],
) -> Result<(T, Vec<Tensor<T>>)> {
    if inputs.is_empty() {
        return Err(Error::Value("empty batch".into()));
    }
    if inputs.len() != targets.len() {
        return Err(Error::Shape(format!("{} inputs but {} targets", inputs.len(), targets.len())));
    }
    let mut tape = Tape::new();
    let vars = load_params(&mut tape, params);
    let mut total: Option<Var> = None;
    for (input, target) in inputs.iter().zip(targets) {
        let out = forward(&mut tape, params, &vars, input)?;
        let l = example_loss(&mut tape, &out, input, target, inputs.len())?;
        total = Some(match total {
            Some(t) => tape.add(t, l),
            None => l,
        });
    }
    let total = total.expect("non-empty batch");
    let loss = tape.value(total).data()[0];
    if !loss.is_finite() {
        return Err(Error::numeric("loss", "non-finite loss"));
    }
    let mut grads = tape.backward(total);
    let g = vars
        .iter()
        .zip(&params.tensors)
        .map(|(v, t)| grads[v.index()].take().unwrap_or_else(|| Tensor::zeros(t.shape())))
        .collect();
    Ok((loss, g))
}

/// Mean behavior-cloning loss of a batch, forward pass only.
pub fn batch_loss<T: Real>(params: &PolicyParams<T>, inputs: &[&PolicyInput<T>], targets: &[&[T]]) -> Result<T> {
    if inputs.is_empty() {
        return Err(Error::Value("empty batch".into()));
    }
    if inputs.len() != targets.len() {
        return Err(Error::Shape(format!("{} inputs but {} targets", inputs.len(), targets.len())));
    }
    let mut total = T::zero();
    for (input, target) in inputs.iter().zip(targets) {
        let mut tape = Tape::new();
        let vars: Vec<Var> = params.tensors.iter().map(|t| tape.constant(t.clone())).collect();
        let out = forward(&mut tape, params, &vars, input)?;
        let l = example_loss(&mut tape, &out, input, target, inputs.len())?;
        total += tape.value(l).data()[0];
    }
    if !total.is_finite() {
        return Err(Error::numeric("loss", "non-finite loss"));
    }
    Ok(total)
}
