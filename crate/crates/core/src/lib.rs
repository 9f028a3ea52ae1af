//! Core algorithms for segment-level causal scoring of learned representations.
//!
//! Everything in this crate is pure computation over in-memory data: a small
//! dense-network substrate with analytic gradients, the image-domain
//! transforms used to synthesize shifted benchmark domains, stage-one
//! representation training (encoder/generator with a latent-consistency
//! objective), classifier heads, the Monte-Carlo intervention estimators that
//! score each latent segment's cross-domain sufficiency and necessity, and a
//! synthetic structural-causal-model oracle that validates the estimators by
//! exhaustive enumeration.
//!
//! The crate is `no_std` (with `alloc`); all file formats, the CLI, and the
//! experiment pipeline live in the companion `segpns` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod checkpoint;
pub mod classify;
pub mod domain;
pub mod error;
pub mod image;
pub mod latent;
pub mod linalg;
pub mod nn;
pub mod numeric;
pub mod repr;
pub mod rng;
pub mod scm;
pub mod scoring;

pub use error::{CoreError, Result};
pub use latent::{LatentCode, SegmentLayout};
pub use linalg::Matrix;
