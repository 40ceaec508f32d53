//! Continuous normalizing flows trained by flow matching.

pub mod flow;
pub mod manifold;
pub mod net;
pub mod ode;

pub use flow::{train_flow, uniform_polytope_samples, FlowKind, FlowSamples, TrainConfig, TrainReport, TrainedFlow};
pub use manifold::ManifoldSpec;
pub use net::{Adam, VectorFieldNet};
pub use ode::{geodesic_interpolant, integrate, integrate_with_divergence, rcfm_step, Direction, DivergenceMode};
