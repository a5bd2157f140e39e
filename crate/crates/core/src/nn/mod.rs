//! Small dense numeric kernel: parameter storage, a tanh MLP with a
//! hand-written reverse pass, Adam, finite-difference checking and a binary
//! checkpoint container.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod mlp;
pub mod params;

pub use adam::{Adam, AdamConfig};
pub use gradcheck::{finite_diff_check, relative_error, GradCheckReport};
pub use mlp::{Activation, Mlp, MlpCache, MlpSpec};
pub use params::{Grads, Param, ParamId, ParamStore};
