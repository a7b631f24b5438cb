//! SIFT bag-of-features image encoding with weighted-SVM multiclass
//! probability estimation.
//!
//! Pipeline: [`imageio`] → [`sift`] → [`codebook`] → [`encoding`] →
//! [`pooling`] → [`wsvm`] → [`metrics`], orchestrated by [`pipeline`].

pub mod artifact;
pub mod codebook;
pub mod encoding;
pub mod error;
pub mod imageio;
pub mod pooling;
mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod sift;
pub mod split;
pub mod synthetic;
pub mod wsvm;

pub use error::{Error, ErrorKind, Result};
pub use imageio::GrayImage;
pub use sift::{Descriptor, DescriptorSet, Keypoint, SiftParams};
