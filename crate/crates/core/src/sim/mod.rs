//! Discrete-event simulation of the scheme and its baselines.

pub mod admission;
mod engine;
pub mod event;
pub mod metrics;
pub mod routing;

pub use engine::{run, Engine, Flow, FlowState};
pub use metrics::{MetricsFrame, RunOutput};
