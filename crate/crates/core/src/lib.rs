//! Procedure segmentation for long untrimmed videos.
//!
//! A video is a sequence of precomputed frame features. A bidirectional LSTM
//! makes them context-aware, a bank of temporal convolutions scores and
//! regresses a fixed set of anchors at every frame, and a segment-level LSTM
//! picks an ordered set of procedure segments from the max-pooled
//! candidates, deciding itself when to stop.
//!
//! The numeric core is generic over [`Scalar`]; training and the pipeline run
//! in `f64` through the aliases below.

pub mod anchors;
pub mod dataio;
pub mod decoder;
pub mod encoder;
pub mod error;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod pipeline;
pub mod proposal;
mod scalar;

pub use anchors::{AnchorGrid, OffsetPair, Segment};
pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision instantiations used for training and evaluation.
pub type Matrix = numerics::Array2<f64>;
pub type Features = encoder::VideoFeatures<f64>;
pub type Model = model::ProcNets<f64>;
pub type Grid = decoder::CandidateGrid<f64>;

/// Single-precision instantiations, matching the on-disk feature format.
pub type Matrix32 = numerics::Array2<f32>;
pub type Features32 = encoder::VideoFeatures<f32>;
pub type Model32 = model::ProcNets<f32>;
