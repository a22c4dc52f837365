//! Expert data, behavior cloning and checkpoints.

mod checkpoint;
pub(crate) mod codec;
mod dataset;
mod train;

pub use checkpoint::{
    checkpoint_bytes, fnv1a, load_checkpoint, load_checkpoint_as, params_from_bytes, save_checkpoint,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub(crate) use checkpoint::{parse_tensor_table, tensor_table_bytes};
pub use dataset::{
    generate_dataset, generate_env_data, goal_input_nodes, EnvData, ExpertStats, Transition, TransitionDataset,
    DATASET_MAGIC, DATASET_VERSION, DEFAULT_TRANSITIONS, HOLD_STEPS,
};
pub use train::{clip_global_norm, finetune, global_norm, train, Adam, TrainConfig, TrainReport, TrainingSet};

pub use crate::nn::batch_loss as bc_loss;
