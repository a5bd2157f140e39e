//! Conditional DDPM over 2-D points: schedule, noise predictor, guidance
//! rules, ancestral sampling with exact transition log-densities, and DDIM.

pub mod data;
pub mod denoiser;
pub mod guidance;
pub mod sampler;
pub mod schedule;

pub use data::DataConfig;
pub use denoiser::{time_embedding, Condition, ConditionEmbedding, Denoiser, DenoiserCache, DenoiserConfig};
pub use guidance::{combine_terms, guided_noise, Guidance, GuidanceTerm};
pub use sampler::{
    accumulate_log_prob_grad, ddim_sample, ddim_sample_from, gaussian_log_prob, sample_step,
    sample_step_with_noise, sample_trajectory, standard_normal_2d, trajectory_log_prob, Trajectory,
    Transition,
};
pub use schedule::{forward_noise, DiffusionSchedule, ScheduleConfig};
