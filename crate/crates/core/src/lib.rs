//! Arbitrary-scale super-resolution and crater-catalog evaluation tooling.
//!
//! The crate is split into two halves that meet at the image boundary:
//!
//! 1. **Super-resolution** – [`raster`] holds grayscale rasters, PGM I/O,
//!    bicubic resampling and tiling; [`nn`] provides hand-differentiated
//!    kernels (linear, ReLU, 3×3 convolution, L1, Adam) and a small residual
//!    encoder; [`liif`] builds the local implicit image function on top:
//!    feature unfolding, nearest-latent lookup, area-weighted local ensemble
//!    and an MLP decoder that can be queried at any output resolution.
//! 2. **Crater detection post-processing** – [`detect`] removes boundary
//!    detections, filters by confidence, converts patch pixels to
//!    longitude/latitude/diameter and suppresses duplicates; [`eval`] matches
//!    detections against a catalog, computes precision/recall/F1, localization
//!    statistics, overlapping-crater and rim-completeness breakdowns, and runs
//!    the post-processing grid search.
//!
//! Detector inference itself is out of scope: detections are read from CSV
//! files, and [`eval::synth`] generates realistic synthetic detections so the
//! whole chain can be exercised end to end.

pub mod detect;
mod error;
pub mod eval;
pub mod liif;
pub mod nn;
pub mod raster;

pub use error::{Error, Result};
