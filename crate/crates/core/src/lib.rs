//! Control-graph policies for modular agents: procedural morphologies, a
//! kinematic goal-reaching suite with a scripted expert, graph/sequence
//! policies trained by behavior distillation, and their evaluation.
//!
//! Numeric code is generic over [`scalar::Real`] (`f32` or `f64`); the
//! aliases below fix the scalar for the common cases.

pub mod cli;
pub mod control_graph;
pub mod distill;
pub mod env;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod morphology;
pub mod nn;
pub mod scalar;
pub mod tensor;

pub use error::{Error, Result};

pub type Tensor = tensor::Tensor<f64>;
pub type Tensor32 = tensor::Tensor<f32>;
pub type Policy = nn::PolicyParams<f64>;
pub type Policy32 = nn::PolicyParams<f32>;
pub type Tape = nn::Tape<f64>;
pub type Tape32 = nn::Tape<f32>;
pub type PolicyInput = nn::PolicyInput<f64>;
pub type PolicyInput32 = nn::PolicyInput<f32>;
pub type TrainingSet = distill::TrainingSet<f64>;
pub type TrainingSet32 = distill::TrainingSet<f32>;
pub type Vec3 = geometry::Vec3<f64>;
pub type Vec3f = geometry::Vec3<f32>;
