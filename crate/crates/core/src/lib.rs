//! Robust semi-supervised node classification with pairwise-interaction
//! regularization.
//!
//! A task GNN is trained on (possibly corrupted) node labels plus a loss that
//! pulls the embeddings of interacting node pairs together. A second GNN, the
//! mask generator, learns the pair interactions alone and its confidence is
//! used to down-weight unreliable pairs in the task model's pair loss.
//!
//! Modules, bottom up:
//! - [`graph`]: CSR adjacency, normalization, splits.
//! - [`data`]: citation/CSV loaders, stochastic block models, on-disk bundles.
//! - [`noise`]: transition matrices and label corruption.
//! - [`nn`]: GCN / GraphSAGE-mean forward, exact backward, cross-entropy, Adam.
//! - [`pi`]: pair labels, label propagation, the pair loss.
//! - [`trainer`]: the two-network training schedule and evaluation.

pub mod data;
pub mod error;
pub mod graph;
pub mod nn;
pub mod noise;
pub mod pi;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
pub use graph::{Csr, Graph, Role, Split, SplitPolicy};
