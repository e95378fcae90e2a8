//! Actor-critic network, Gaussian policy head and optimizer.

pub mod adam;
pub mod gaussian;
pub mod mlp;
pub mod real;

pub use adam::{AdamParams, AdamState};
pub use gaussian::GaussianPolicySample;
pub use mlp::{ActorCritic, ActorCriticSpec, Cache, ForwardOutput};
pub use real::Real;
