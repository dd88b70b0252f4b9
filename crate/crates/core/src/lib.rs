//! Synthetic `n+m` formula images, a from-scratch convolutional classifier
//! (label = sum), the train/test split protocols, and the analyses that ask
//! whether the classifier learned addition or memorized glyph patterns.

pub mod analysis;
pub mod dataset;
pub mod error;
pub mod glyph;
pub mod io_util;
pub mod nn;
pub mod rng;
pub mod scalar;
pub mod splits;
pub mod train;

pub use dataset::{AdditionKey, ImageSet};
pub use error::{Error, Result};
pub use glyph::{Image, RenderConfig};
pub use scalar::Scalar;
pub use splits::{Role, SplitManifest, SplitProtocol};

/// Training precision.
pub type Tensor32 = nn::Tensor<f32>;
/// Verification precision.
pub type Tensor64 = nn::Tensor<f64>;
pub type Params32 = nn::Parameters<f32>;
pub type Params64 = nn::Parameters<f64>;
