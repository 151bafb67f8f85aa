//! Generative models of binary species co-occurrence patches.
//!
//! The crate trains a Wasserstein GAN and a convolutional VAE on patch
//! presence/absence vectors, then uses the generated populations to
//! quantify direct and higher-order co-occurrence structure and to
//! forecast the diversity of compositions seeded by a pioneer species.
//! An exactly enumerable pairwise random-field model doubles as the
//! verification oracle for every statistic.

pub mod error;
pub mod nn;
pub mod patch;

pub use error::{Error, Result};
