//! Differentiable kernels and the MLP, GNN and transformer policies.

mod check;
mod params;
mod policy;
pub mod tape;

pub use check::{directional_gradient_check, toy_input, GradCheck};
pub use params::{init_params, Arch, PolicyConfig, PolicyParams, TokenHead, PE_STD};
pub use policy::{
    action_bin, batch_loss, decode_actions, example_loss, forward, load_params, loss_and_grad, policy_act, Forward, PolicyInput,
};
pub use tape::{Tape, Var, LAYER_NORM_EPS};
