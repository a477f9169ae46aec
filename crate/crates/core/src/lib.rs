//! Multi-task music mood classification.
//!
//! The crate is organised along the processing pipeline:
//!
//! - [`dsp`]: WAV ingestion, resampling and log-mel spectrograms (96 bands, 62.5 frames/s).
//! - [`tensor`]: a small dense tensor engine with hand-written reverse-mode rules for the
//!   layers the network needs (3×3 convolution, batch norm, 2×2 max pooling, dropout,
//!   dense, ReLU, sigmoid, binary cross-entropy) plus Adam and a finite-difference checker.
//! - [`gradprobe`]: finite-difference checks of every op and of a full block.
//! - [`model`]: the five-block convolutional trunk shared by a mood head and a metadata head,
//!   the weighted multi-task loss and segment-averaged song inference.
//! - [`dataset`]: manifests, label vocabularies, song-level splits and the random-window sampler.
//! - [`train`]: the epoch loop with early stopping and checkpoint selection.
//! - [`metrics`]: average precision, ROC-AUC and macro-averaged reports.
//! - [`synth`]: a synthetic corpus generator for desk-scale experiments.
//! - [`pipeline`]: in-memory glue from records and spectrograms to a trained, scored model.
//! - [`cli`]: the commands behind the `mtl-mood` binary.
//!
//! Runnable walkthroughs for each stage live in the crate's `examples/` directory.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dataset;
pub mod dsp;
pub mod error;
pub mod gradprobe;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod synth;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
