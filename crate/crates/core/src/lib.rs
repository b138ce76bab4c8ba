//! Seedable simulator of quantized federated learning over a vehicular edge
//! network. Each participating vehicle runs its own double-DQN agent that
//! picks the gradient quantization level, trading estimated total training
//! time against quantization error.
//!
//! The numerical modules are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`, which is what the harness uses.

pub mod baselines;
pub mod ddqn;
pub mod error;
pub mod fl;
pub mod harness;
pub mod mobility_channel;
pub mod quantizer;
pub mod rng;
pub mod scalar;
pub mod selection;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type GradientVector = quantizer::GradientVector<f64>;
pub type QuantizedGradient = quantizer::QuantizedGradient<f64>;
pub type VehicleState = mobility_channel::VehicleState<f64>;
pub type SelectionDecision = selection::SelectionDecision<f64>;
pub type ModelVector = fl::ModelVector<f64>;
pub type ConvergenceModel = fl::ConvergenceModel<f64>;
pub type Dataset = fl::Dataset<f64>;
pub type AgentState = ddqn::AgentState<f64>;
pub type Experience = ddqn::Experience<f64>;
pub type ReplayBuffer = ddqn::ReplayBuffer<f64>;
pub type QNetwork = ddqn::QNetwork<f64>;
pub type Agent = ddqn::Agent<f64>;

/// Single-precision variants of the hot-path types.
pub mod f32 {
    pub type GradientVector = crate::quantizer::GradientVector<f32>;
    pub type QuantizedGradient = crate::quantizer::QuantizedGradient<f32>;
    pub type QNetwork = crate::ddqn::QNetwork<f32>;
    pub type ModelVector = crate::fl::ModelVector<f32>;
}
