//! Binary power control (link scheduling) for K-user wireless interference
//! networks, learned with a graph neural network over the interference graph.
//!
//! The crate is organised bottom-up:
//!
//! - [`channel`]: random deployments and channel gain matrices.
//! - [`rate`]: per-link rates, sum-rates and the exhaustive-search oracle.
//! - [`graph`]: the normalised interference graph fed to the model.
//! - [`gnn`]: local extremum convolution backbone, sigmoid scheduling head,
//!   analytic backward pass and the Adam optimizer.
//! - [`train`]: supervised, unsupervised and contrastive losses, augmentations
//!   and the training loop.
//! - [`eval`]: normalised sum-rate evaluation and the comparison studies.
//! - [`config`], [`dataset`], [`pipeline`]: the on-disk formats and the
//!   command implementations behind the `linksched` binary.

pub mod channel;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod gnn;
pub mod graph;
pub mod pipeline;
pub mod rate;
pub mod seed;
pub mod train;

pub use error::{Error, Result};
