//! Convolutional classifiers with hand-written backpropagation and Adam.
//!
//! Networks are generic over [`Scalar`] so the same code trains in `f32`
//! or `f64`. Convolutions use unit stride and size-preserving zero padding
//! (`(k − 1) / 2` before, the rest after); pooling windows do not overlap.

mod arch;
mod layers;
mod model;
mod optim;
mod train;

use core::fmt::Debug;

use num_traits::Float;

pub use arch::{ActShape, ArchTag, Architecture, CnnWidths, LayerSpec, Padding};
pub use model::{Mode, Model};
pub use optim::{adam_update, AdamConfig, AdamState};
pub use train::{predict, predict_proba, train, EpochStats, Examples, History, TrainConfig};

/// Floating-point element type of a network.
pub trait Scalar: Float + Debug + Default + Send + Sync + 'static {
    const NAME: &'static str;
    fn from_f64(x: f64) -> Self;
    fn from_f32(x: f32) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn from_f32(x: f32) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        f64::from(self)
    }
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";
    fn from_f64(x: f64) -> Self {
        x
    }
    fn from_f32(x: f32) -> Self {
        f64::from(x)
    }
    fn to_f64(self) -> f64 {
        self
    }
}
