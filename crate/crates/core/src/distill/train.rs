use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::{batch_loss, loss_and_grad, PolicyConfig, PolicyInput, PolicyParams};
use crate::scalar::Real;
use crate::tensor::Tensor;

use super::dataset::TransitionDataset;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Maximum global gradient norm.
    pub grad_clip: f64,
    pub steps: usize,
    pub seed: u64,
    pub log_every: usize,
    /// Draw each batch from all environments (`true`) or from one
    /// environment at a time in rotation.
    pub mixed_batches: bool,
    /// Examples in the fixed subset used for the initial and final loss.
    pub probe_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 3e-4,
            batch_size: 256,
            grad_clip: 0.1,
            steps: 5_000,
            seed: 0,
            log_every: 100,
            mixed_batches: true,
            probe_size: 512,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.grad_clip > 0.0) || self.batch_size == 0 || self.log_every == 0 {
            return Err(Error::Config("learning rate, batch size, clip and log interval must be positive".into()));
        }
        Ok(())
    }
}

/// Policy inputs and expert targets, grouped by environment.
#[derive(Debug, Clone)]
pub struct TrainingSet<T: Real = f64> {
    pub env_ids: Vec<String>,
    pub inputs: Vec<Vec<PolicyInput<T>>>,
    pub targets: Vec<Vec<Vec<T>>>,
}

impl TrainingSet<f64> {
    pub fn from_dataset(data: &TransitionDataset, config: &PolicyConfig) -> Result<Self> {
        let mut set = TrainingSet { env_ids: Vec::new(), inputs: Vec::new(), targets: Vec::new() };
        for e in &data.environments {
            set.env_ids.push(e.env.id.clone());
            set.inputs.push(e.policy_inputs(config)?);
            set.targets.push(e.transitions.iter().map(|t| t.actions.iter().map(|&a| a as f64).collect()).collect());
        }
        Ok(set)
    }
}

impl<T: Real> TrainingSet<T> {
    pub fn len(&self) -> usize {
        self.inputs.iter().map(|v| v.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cast<U: Real>(&self) -> TrainingSet<U> {
        TrainingSet {
            env_ids: self.env_ids.clone(),
            inputs: self
                .inputs
                .iter()
                .map(|v| {
                    v.iter()
                        .map(|i| PolicyInput {
                            features: i.features.cast(),
                            tokens: i.tokens.clone(),
                            action_mask: i.action_mask.cast(),
                            actuator_map: i.actuator_map.clone(),
                            edges: i.edges.clone(),
                            variant: i.variant,
                        })
                        .collect()
                })
                .collect(),
            targets: self
                .targets
                .iter()
                .map(|v| v.iter().map(|t| t.iter().map(|&x| U::lit(x.to_f64_lossy())).collect()).collect())
                .collect(),
        }
    }

    fn all_indices(&self) -> Vec<(usize, usize)> {
        self.inputs.iter().enumerate().flat_map(|(e, v)| (0..v.len()).map(move |i| (e, i))).collect()
    }

    /// Evenly spaced subset of at most `n` examples.
    pub fn probe(&self, n: usize) -> Vec<(usize, usize)> {
        let all = self.all_indices();
        if all.len() <= n {
            return all;
        }
        (0..n).map(|k| all[k * all.len() / n]).collect()
    }

    pub fn loss_on(&self, params: &PolicyParams<T>, idx: &[(usize, usize)]) -> Result<T> {
        let inputs: Vec<&PolicyInput<T>> = idx.iter().map(|&(e, i)| &self.inputs[e][i]).collect();
        let targets: Vec<&[T]> = idx.iter().map(|&(e, i)| self.targets[e][i].as_slice()).collect();
        batch_loss(params, &inputs, &targets)
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam<T: Real = f64> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    pub t: i32,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(lr: f64, params: &[Tensor<T>]) -> Self {
        let zeros: Vec<Tensor<T>> = params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        Adam { lr: T::lit(lr), beta1: T::lit(0.9), beta2: T::lit(0.999), eps: T::lit(1e-8), t: 0, m: zeros.clone(), v: zeros }
    }

    pub fn step(&mut self, params: &mut [Tensor<T>], grads: &[Tensor<T>]) {
        self.t += 1;
        let one = T::one();
        let c1 = one - self.beta1.powi(self.t);
        let c2 = one - self.beta2.powi(self.t);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            let pd = p.data_mut();
            for (j, &gj) in g.data().iter().enumerate() {
                let mj = &mut m.data_mut()[j];
                *mj = self.beta1 * *mj + (one - self.beta1) * gj;
                let vj = &mut v.data_mut()[j];
                *vj = self.beta2 * *vj + (one - self.beta2) * gj * gj;
                let mhat = m.data()[j] / c1;
                let vhat = v.data()[j] / c2;
                pd[j] -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}

pub fn global_norm<T: Real>(grads: &[Tensor<T>]) -> T {
    grads.iter().flat_map(|g| g.data()).fold(T::zero(), |s, &v| s + v * v).sqrt()
}

/// Rescales `grads` so their global norm is at most `max`; returns the norm
/// before clipping.
pub fn clip_global_norm<T: Real>(grads: &mut [Tensor<T>], max: T) -> T {
    let norm = global_norm(grads);
    if norm > max {
        let s = max / norm;
        grads.iter_mut().for_each(|g| g.data_mut().iter_mut().for_each(|v| *v *= s));
    }
    norm
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// `(step, loss)`: the first batch's loss at step 0, then the mean batch
    /// loss over each logging window.
    pub curve: Vec<(usize, f64)>,
    /// Loss on the probe subset before the first update.
    pub initial_loss: f64,
    /// Loss on the probe subset after the last update.
    pub final_loss: f64,
    /// Largest global gradient norm applied, after clipping.
    pub max_applied_norm: f64,
}

struct Sampler {
    rng: ChaCha8Rng,
    mixed: bool,
    pools: Vec<Vec<(usize, usize)>>,
    cursors: Vec<usize>,
    turn: usize,
}

impl Sampler {
    fn new<T: Real>(set: &TrainingSet<T>, mixed: bool, seed: u64) -> Self {
        let pools = if mixed {
            vec![set.all_indices()]
        } else {
            set.inputs.iter().enumerate().map(|(e, v)| (0..v.len()).map(|i| (e, i)).collect()).collect()
        };
        let cursors = pools.iter().map(|p: &Vec<(usize, usize)>| p.len()).collect();
        Sampler { rng: ChaCha8Rng::seed_from_u64(seed), mixed, pools, cursors, turn: 0 }
    }

    fn batch(&mut self, size: usize) -> Vec<(usize, usize)> {
        let k = if self.mixed { 0 } else { self.turn % self.pools.len() };
        self.turn += 1;
        let mut out = Vec::with_capacity(size);
        while out.len() < size {
            if self.cursors[k] >= self.pools[k].len() {
                self.pools[k].shuffle(&mut self.rng);
                self.cursors[k] = 0;
            }
            out.push(self.pools[k][self.cursors[k]]);
            self.cursors[k] += 1;
        }
        out
    }
}

/// Behavior cloning with Adam and global-norm clipping. Bit-deterministic
/// in the data, configuration and seed.
pub fn train<T: Real>(
    mut params: PolicyParams<T>,
    data: &TrainingSet<T>,
    config: &TrainConfig,
) -> Result<(PolicyParams<T>, TrainReport)> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Value("training set is empty".into()));
    }
    let probe = data.probe(config.probe_size);
    let initial_loss = data.loss_on(&params, &probe)?.to_f64_lossy();
    let mut sampler = Sampler::new(data, config.mixed_batches, config.seed);
    let mut adam = Adam::new(config.learning_rate, &params.tensors);
    let clip = T::lit(config.grad_clip);
    let mut curve = Vec::with_capacity(config.steps / config.log_every + 1);
    let mut window = 0.0;
    let mut max_applied: f64 = 0.0;
    let mut first = None;
    for step in 1..=config.steps {
        let idx = sampler.batch(config.batch_size);
        let inputs: Vec<&PolicyInput<T>> = idx.iter().map(|&(e, i)| &data.inputs[e][i]).collect();
        let targets: Vec<&[T]> = idx.iter().map(|&(e, i)| data.targets[e][i].as_slice()).collect();
        let (loss, mut grads) = loss_and_grad(&params, &inputs, &targets).map_err(|e| match e {
            Error::Numeric { layer, msg } => Error::Numeric { layer: format!("step {step}, {layer}"), msg },
            other => other,
        })?;
        let loss = loss.to_f64_lossy();
        if first.is_none() {
            first = Some(loss);
            curve.push((0, loss));
        }
        clip_global_norm(&mut grads, clip);
        max_applied = max_applied.max(global_norm(&grads).to_f64_lossy());
        adam.step(&mut params.tensors, &grads);
        window += loss;
        if step % config.log_every == 0 {
            curve.push((step, window / config.log_every as f64));
            window = 0.0;
        }
    }
    if first.is_none() {
        let idx = sampler.batch(config.batch_size);
        curve.push((0, data.loss_on(&params, &idx)?.to_f64_lossy()));
    }
    let final_loss = data.loss_on(&params, &probe)?.to_f64_lossy();
    if !final_loss.is_finite() {
        return Err(Error::numeric(format!("step {}", config.steps), "non-finite loss"));
    }
    Ok((params, TrainReport { curve, initial_loss, final_loss, max_applied_norm: max_applied }))
}

/// Continues training from `checkpoint`; the report's initial loss is the
/// checkpoint's loss on the new data.
pub fn finetune<T: Real>(
    checkpoint: &PolicyParams<T>,
    data: &TrainingSet<T>,
    config: &TrainConfig,
) -> Result<(PolicyParams<T>, TrainReport)> {
    checkpoint.check_layout()?;
    train(checkpoint.clone(), data, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_first_step_closed_form() {
        // At t = 1 the bias-corrected moments are g and g^2, so the update
        // is lr * g / (|g| + eps).
        let mut p = vec![Tensor::<f64>::scalar(0.5)];
        let g: f64 = 0.3;
        let mut adam = Adam::new(1e-3, &p);
        adam.step(&mut p, &[Tensor::scalar(g)]);
        let want = 0.5 - 1e-3 * g / (g.abs() + 1e-8);
        assert!((p[0].data()[0] - want).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![Tensor::matrix(1, 2, vec![0.1, -0.2])];
        let before = p.clone();
        let mut adam = Adam::new(1e-2, &p);
        for _ in 0..10 {
            adam.step(&mut p, &[Tensor::zeros(&[1, 2])]);
        }
        assert_eq!(p, before);
    }

    #[test]
    fn clipping_bounds_norm() {
        let mut g = vec![Tensor::<f64>::matrix(1, 2, vec![3.0, 4.0])];
        assert_eq!(clip_global_norm(&mut g, 0.1), 5.0);
        assert!((global_norm(&g) - 0.1).abs() < 1e-15);
        let mut small = vec![Tensor::matrix(1, 1, vec![0.01])];
        clip_global_norm(&mut small, 0.1);
        assert_eq!(small[0].data()[0], 0.01);
    }
}
