//! Kinematic goal-reaching environments and their scripted expert.

mod expert;
pub mod kinematics;
mod observe;
mod sim;
mod suite;
mod task;

pub use expert::{scripted_expert, DEFAULT_EXPERT_GAIN};
pub use kinematics::{forward_kinematics, kinematic_frames, position_jacobian, Frames};
pub use observe::local_observations;
pub use sim::{sample_goals, EnvState, GoalInput, BALL_RADIUS, BOX_RADIUS, DEFAULT_DT, OMEGA_MAX};
pub use suite::{calibrate_d_max, EnvId, EnvSpec, D_MAX_SAMPLES};
pub use task::{
    parse_task, serialize_task, GoalKind, GoalTemplate, NodeSelector, TaskKind, TaskSpec, DEFAULT_EPISODE_LENGTH,
};
