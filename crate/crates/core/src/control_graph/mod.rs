//! The control graph: observations, goals and action slots arranged as one
//! node-feature matrix over the morphology tree.

mod graph;
mod spec;
mod token;

pub use graph::{
    build_cg, build_cg_v1, build_cg_v2, cg_width, stack_history, CgVariant, ControlGraph, HistoryBuffer, ACTION_SLOTS,
    G_MAX,
};
pub use spec::{build_observation_spec, ObsFlag, ObservationSpec};
pub use token::{
    bin_center, dequantize, detokenize, detokenize_value, mu_law, mu_law_inverse, quantize, tokenize_cg,
    tokenize_value, Dequantize, MU, MU_LAW_M, N_BINS,
};
