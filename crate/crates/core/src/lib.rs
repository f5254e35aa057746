//! Semantic segmentation at desk scale: K-means color clustering for
//! pseudo-labels, a small from-scratch convolutional encoder–decoder, and
//! per-class IOU / mean IOU / throughput evaluation.
//!
//! The modules follow the pipeline order:
//!
//! * [`dataset`]: PPM/PGM rasters, the 12-class palette, augmentation,
//!   train/validation splits and synthetic street scenes.
//! * [`clustering`]: K-means over RGB pixels and recoloring.
//! * [`tensor`]: the `f32` tensor and differentiable primitives.
//! * [`optim`]: SGD and Adam.
//! * [`network`]: the segmentation CNN, training loop and checkpoints.
//! * [`metrics`]: confusion counts, IOU, FPS benchmarking and reports.

pub mod clustering;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod network;
pub mod optim;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/tensors.md")]
    mod tensors {}
    #[doc = include_str!("../../../book/src/optimizers.md")]
    mod optimizers {}
    #[doc = include_str!("../../../book/src/clustering.md")]
    mod clustering {}
    #[doc = include_str!("../../../book/src/dataset.md")]
    mod dataset {}
    #[doc = include_str!("../../../book/src/network.md")]
    mod network {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
