//! Image classification with tensor-product features: kernel-based MANDy and
//! alternating ridge regression over tensor trains.
//!
//! Everything is generic over the scalar type ([`Real`], implemented for
//! `f32` and `f64`); the aliases below fix the common choices.

pub mod arr;
pub mod classifier;
pub mod data;
pub mod error;
pub mod features;
pub mod linalg;
pub mod mandy;
pub mod scalar;
pub mod tt;

pub use arr::{ArrConfig, TTModel};
pub use classifier::{argmax, Classifier};
pub use data::Dataset;
pub use error::{Error, Result};
pub use features::{FeatureBasis, FeatureMatrixSet};
pub use mandy::{KernelModel, MandyConfig};
pub use scalar::Real;
pub use tt::{TTCore, TensorTrain};

pub type TensorTrainF64 = TensorTrain<f64>;
pub type TensorTrainF32 = TensorTrain<f32>;
pub type KernelModelF64 = KernelModel<f64>;
pub type KernelModelF32 = KernelModel<f32>;
pub type TTModelF64 = TTModel<f64>;
pub type TTModelF32 = TTModel<f32>;
pub type DatasetF64 = Dataset<f64>;
pub type DatasetF32 = Dataset<f32>;
pub type FeatureMatrixSetF64 = FeatureMatrixSet<f64>;
