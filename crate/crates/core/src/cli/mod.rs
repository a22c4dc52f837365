//! Run configuration and the pipeline stages behind the command-line tool.

mod commands;
mod config;

pub use commands::{
    cmd_ablate, cmd_distill, cmd_eval, cmd_gen_data, dataset_score, AblationRow, DistillOutput, EvalOutput,
    GenDataOutput, ABLATION_HEADER,
};
pub use config::{AblationAxes, RunConfig, TokenChoice, DESK_ENVS};

#[cfg(test)]
mod tests;
