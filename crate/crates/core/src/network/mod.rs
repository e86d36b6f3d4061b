//! Reconstruction network: layer specs, forward passes on the exact and
//! chip backends, backpropagation, Adam training and weight files.

pub mod checkpoint;
pub mod gemm;
pub mod model;
pub mod spec;
pub mod train;

pub use model::{loss, Backend, ForwardTrace, LayerParams, Network};
pub use spec::{Activation, DomainMode, ErrorInjection, LayerSpec, NetworkSpec, TrainConfig};
pub use train::{batch_gradients, evaluate, train, Adam, EpochLog, Sample, TrainLog};

#[cfg(test)]
mod tests;
