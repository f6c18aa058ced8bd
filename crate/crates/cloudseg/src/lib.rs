//! Color-based sky/cloud segmentation for ground-based sky cameras.
//!
//! The pipeline decomposes sRGB images into 16 color channels, analyzes
//! their discriminative power with PCA and ROC areas, trains a partial least
//! squares (SIMPLS) regression from selected channels to cloud labels, and
//! predicts per-pixel cloud belongingness maps. Around that core sit
//! threshold baselines, an evaluation/benchmark harness with k-fold
//! cross-validation, a deterministic synthetic dataset generator, dataset
//! manifest I/O, and fisheye-to-perspective undistortion for producing
//! sky-camera patches.
//!
//! The `cloudseg` binary exposes every stage as a subcommand; see the
//! repository README for the CLI walkthrough.

pub mod analysis;
pub mod baselines;
pub mod color;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod fisheye;
pub mod image;
pub mod pls;
pub mod report;
pub mod synth;

pub use color::ChannelId;
pub use error::{Error, Result};
pub use image::{GroundTruthMask, Image};
pub use pls::{PlsModel, ProbabilityMap};
