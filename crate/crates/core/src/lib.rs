//! Core algorithms for multimodal physiological emotion recognition.
//!
//! Everything in this crate is pure computation over in-memory values and
//! builds without `std` (an allocator is required). File formats, the job
//! runner and the command-line interface live in the `affectfuse` crate.
//!
//! Module map:
//!
//! * [`dataset`]: trial records, arousal/valence quadrant labels, seeded
//!   synthetic recordings and per-label window counts.
//! * [`preprocess`]: baseline removal, 1 s segmentation, z-scoring, the 9×9
//!   electrode grid and band-pass decomposition.
//! * [`nnet`]: the 3D and 1D convolutional classifiers with backpropagation
//!   and Adam.
//! * [`fusion`]: inverse-variance cue combination and centroid-distance
//!   decision-level fusion.
//! * [`experiment`]: k-fold plans, metrics, per-modality training and fusion
//!   evaluation.
#![no_std]

extern crate alloc;

pub mod dataset;
pub mod error;
pub mod experiment;
pub mod fusion;
pub mod nnet;
pub mod preprocess;
pub mod seed;

pub use error::{Error, Result};

/// Sampling rate shared by every recording handled by this crate.
pub const SAMPLE_RATE: usize = 128;

/// Window length in samples (one second at [`SAMPLE_RATE`]).
pub const WINDOW_LEN: usize = 128;
