//! Finite-difference checking of analytic gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::control_graph::{build_observation_spec, tokenize_value, CgVariant, ObsFlag, ACTION_SLOTS};
use crate::error::Result;
use crate::tensor::Tensor;

use super::params::{Arch, PolicyConfig, PolicyParams, TokenHead};
use super::policy::{loss_and_grad, PolicyInput};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub directions: usize,
    pub max_rel_error: f64,
}

/// Compares the analytic directional derivative of the batch loss with a
/// central difference along `directions` random unit directions.
pub fn directional_gradient_check(
    params: &PolicyParams,
    inputs: &[PolicyInput],
    targets: &[Vec<f64>],
    directions: usize,
    eps: f64,
    seed: u64,
) -> Result<GradCheck> {
    let refs: Vec<&PolicyInput> = inputs.iter().collect();
    let trefs: Vec<&[f64]> = targets.iter().map(|t| t.as_slice()).collect();
    let (_, grads) = loss_and_grad(params, &refs, &trefs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..directions {
        let mut dir: Vec<Vec<f64>> =
            params.tensors.iter().map(|t| (0..t.len()).map(|_| rng.sample(StandardNormal)).collect()).collect();
        let norm = dir.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
        dir.iter_mut().flatten().for_each(|v| *v /= norm);
        let analytic: f64 =
            grads.iter().zip(&dir).map(|(g, d)| g.data().iter().zip(d).map(|(a, b)| a * b).sum::<f64>()).sum();
        let shifted = |s: f64| -> Result<f64> {
            let mut p = params.clone();
            for (t, d) in p.tensors.iter_mut().zip(&dir) {
                t.data_mut().iter_mut().zip(d).for_each(|(v, dv)| *v += s * dv);
            }
            Ok(loss_and_grad(&p, &refs, &trefs)?.0)
        };
        let fd = (shifted(eps)? - shifted(-eps)?) / (2.0 * eps);
        let scale = analytic.abs().max(fd.abs()).max(1e-8);
        worst = worst.max((analytic - fd).abs() / scale);
    }
    Ok(GradCheck { directions, max_rel_error: worst })
}

/// A two-node instance with random features, for gradient and invariance
/// checks. Node 0 drives one actuator, node 1 drives two.
pub fn toy_input(arch: Arch, token: TokenHead, seed: u64) -> (PolicyConfig, PolicyInput, Vec<f64>) {
    let obs = build_observation_spec([ObsFlag::P]).expect("non-empty flag set");
    let variant = if arch == Arch::Gnn { CgVariant::V1 } else { CgVariant::V2 };
    let config = PolicyConfig {
        arch,
        token,
        embed: 4,
        heads: 2,
        layers: 1,
        attn_hidden: 6,
        mlp_hidden: 5,
        mlp_layers: 2,
        gnn_hidden: 4,
        gnn_layers: 3,
        max_nodes: 3,
        ..PolicyConfig::default()
    }
    .with_inputs(&obs, variant, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = config.feature_width;
    let features = Tensor::matrix(2, f, (0..2 * f).map(|_| rng.gen_range(-1.0..1.0)).collect());
    let mut mask = Tensor::zeros(&[2, ACTION_SLOTS]);
    mask.set(0, 0, 1.0);
    mask.set(1, 0, 1.0);
    mask.set(1, 1, 1.0);
    let tokens = (arch == Arch::TransformerTokenized).then(|| features.data().iter().map(|&x| tokenize_value(x)).collect());
    let input = PolicyInput {
        features,
        tokens,
        action_mask: mask,
        actuator_map: vec![(0, 0), (1, 0), (1, 1)],
        edges: vec![(0, 1)],
        variant,
    };
    let target = (0..3).map(|_| rng.gen_range(-0.9..0.9)).collect();
    (config, input, target)
}
