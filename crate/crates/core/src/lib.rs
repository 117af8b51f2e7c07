//! End-to-end noisy-label learning with per-example label distributions.
//!
//! Every training example carries a learnable label distribution
//! `y_d = softmax(label_logits)`, initialized from its observed (possibly wrong)
//! label. A small network and the label distributions are optimized jointly;
//! the classification loss `KL(f || y_d)` produces label gradients that move
//! mislabeled examples toward the class the network predicts.
//!
//! Module map:
//!
//! - [`numerics`]: softmax, clamped logs, entropy, finite-difference oracle.
//! - [`labelbank`]: per-example label logits and their checkpoint format.
//! - [`losses`]: compatibility, classification and entropy losses with
//!   closed-form gradients.
//! - [`backbone`]: MLP with manual backprop and SGD momentum.
//! - [`noise`]: synthetic datasets and label-noise injectors.
//! - [`dataset`]: CSV / binary dataset files.
//! - [`trainer`]: three-phase schedule, repetitive training, run reports.
//! - [`config`]: flat `key = value` run configuration.
//! - [`cli`]: command implementations behind the `pencil` binary.

pub mod backbone;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod labelbank;
pub mod losses;
pub mod noise;
pub mod numerics;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
