//! Few-shot semantic segmentation with prototype networks.
//!
//! Pixels are embedded by a small pyramid embedder, class prototypes are
//! pooled from annotated support images, and query pixels are classified by
//! a softmax over amplified similarities to the prototypes. Training adds a
//! support-restoration loss; inference can refine the prototypes by gradient
//! descent on that loss and fuse the resulting predictions.

pub mod cli;
pub mod data;
pub mod embedder;
pub mod error;
pub mod eval;
pub mod inference;
pub mod iqi;
pub mod loss;
pub mod numerics;
pub mod prototype;
pub mod rng;

pub use error::{Error, Result};
