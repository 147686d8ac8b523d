//! Patch-level cellularity regression toolkit.
//!
//! The crate bundles the pieces needed to run a rotation-augmentation /
//! model-fusion study end to end on RGB tissue patches:
//!
//! - [`imgio`]: binary PPM/PGM codecs, resampling, and the raster types
//!   everything else works on.
//! - [`augment`]: the lossless rotation augmentation (cropped-fit and
//!   resized-fit rotations composited through a validity mask) and the
//!   session angle sampler.
//! - [`metric`]: prediction probability PK, Kendall tau-b, and the unpaired
//!   t-test.
//! - [`nn`]: a small reverse-mode tensor engine (conv/pool/dense/concat,
//!   Adam, dropout, early stopping, weight persistence).
//! - [`models`]: the built-in shallow and deep network analogs plus the
//!   parallel fusion surgery.
//! - [`pipeline`]: manifests, splits, synthetic data, prediction, and the
//!   cumulative rotation-session workflow.
//! - [`viz`]: per-filter activation heatmaps.
//! - [`cli`]: the `cellpk` command-line surface tying it all together.

pub mod augment;
pub mod cli;
pub mod config;
pub mod imgio;
pub mod metric;
pub mod models;
pub mod nn;
pub mod pipeline;
pub mod seeds;
pub mod viz;
