//! Arbitrary-scale super-resolution with a local implicit image function.
//!
//! An encoder turns a low-resolution raster into a `D × H × W` feature map.
//! Each cell's 3×3 neighbourhood is concatenated into a `9D` latent. A query
//! at a continuous coordinate is answered by decoding the four surrounding
//! latents with a small MLP, each fed the query's offset from the latent's
//! center and the output pixel size, and blending the four decodes by
//! opposite-rectangle area. Offset and pixel size are both multiplied by the
//! feature-grid size `(H, W)`, so the decoder sees them in latent-cell units.
//!
//! Coordinates are normalized to `[−1, 1]` with pixel `i` of `n` centered at
//! `−1 + (2i + 1)/n`. Pairs are ordered `(row, col)`.

mod bundle;
mod data;
mod latent;
mod mlp;
mod model;
mod train;

pub use bundle::{load_bundle, save_bundle, BundleHeader, BUNDLE_FORMAT, COORD_CONVENTION, HEADER_FILE};
pub use data::{sample_training_pair, sample_training_pair_with, SamplingConfig, TrainingBatch};
pub use latent::{
    ensemble_weights, nearest_latent, pixel_center_coords, unfold3x3, Corner, EnsembleWeights,
    FeatureMapLatent, LatentSample, QueryPoint,
};
pub use mlp::{mlp_decode, MlpParams, DEFAULT_HIDDEN, MLP_LAYERS};
pub use model::{batch_loss, batch_loss_and_grad, batch_loss_signature, predict_sr, train_step, LiifModel};
pub use train::{EpochSummary, TrainConfig, Trainer};
