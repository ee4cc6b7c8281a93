//! Multi-target prediction toolkit.
//!
//! The crate covers the whole path from a raw score matrix to evaluated
//! predictions:
//!
//! - [`dataset`]: triplet, feature and hierarchy files.
//! - [`selector`]: the questionnaire that names the problem setting.
//! - [`splitter`]: train/validation/test partitions for the four validation settings.
//! - [`encoders`]: one-hot, hierarchy-path and tabular branch inputs.
//! - [`network`]: the two-branch (optionally tri-branch) network and its gradients.
//! - [`train`]: losses, Adam and early stopping.
//! - [`metrics`]: evaluation metrics.
//! - [`cli`]: the `mtp` command-line tool.

pub mod cli;
pub mod dataset;
pub mod encoders;
pub mod metrics;
pub mod network;
pub mod selector;
pub mod splitter;
pub mod train;

pub use dataset::{InteractionData, MtpDataset, ScoreType, SideInfo, Triplet};
pub use network::Model;
