//! Pareto-masked multi-reward policy-gradient fine-tuning at desk scale.
//!
//! A conditional diffusion model over 2-D points and a categorical
//! prompt-expansion policy are fine-tuned jointly against several analytic
//! rewards. Each reward-conditioned batch keeps only its non-dominated
//! samples for the policy-gradient update; a weighted-sum scalarization
//! mode serves as the baseline.
//!
//! Module map:
//!
//! - [`pareto`]: dominance, non-dominated set, non-dominated fraction
//! - [`nn`]: parameter store, MLP with reverse pass, Adam, gradient checks,
//!   checkpoints
//! - [`diffusion`]: schedule, noise predictor, guidance, samplers
//! - [`pen`]: prompt-expansion policy and reward identifiers
//! - [`rewards`]: analytic reward registry
//! - [`trainer`]: pretraining, fine-tuning iterations, evaluation, ablations
//! - [`experiment`]: manifests, metrics CSV, SVG plots, run comparison

pub mod diffusion;
pub mod error;
pub mod experiment;
pub mod nn;
pub mod pareto;
pub mod pen;
pub mod rewards;
pub mod trainer;

pub use error::{Error, Result};
