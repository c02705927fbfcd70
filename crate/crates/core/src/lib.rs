//! Multi-graph neural networks for classifying collections of 3D triangle meshes.
//!
//! A sample is a fixed set of `N` meshes (one per anatomical structure). Each
//! mesh becomes a graph whose nodes carry constant, positional or FPFH
//! features and whose edges carry normalized spherical coordinates. One shared
//! graph network (three convolutions of a selectable kind, ReLU, global mean
//! pool) embeds every structure; the stacked embeddings feed a small fully
//! connected head.
//!
//! Module map:
//!
//! - [`mesh`]: OFF I/O, vertex normals, face edges, radius neighbor search
//! - [`features`]: Darboux angles, SPFH/FPFH, node feature modes, edge attributes
//! - [`graph`]: structure graphs, samples, disjoint-union batches, jitter augmentation
//! - [`nn`]: GCN / GraphConv / spline convolutions, the shared-submodel model,
//!   cross entropy, gradients, Adam, checkpoints
//! - [`pipeline`]: manifests, splits, training, ROC/AUC evaluation, synthetic data
//! - [`cli`]: the `meshgnn` command line
//!
//! The runnable programs under `examples/` walk through each capability.

pub mod cli;
pub mod error;
pub mod features;
pub mod graph;
pub mod linalg;
pub mod mesh;
pub mod nn;
pub mod pipeline;

pub use error::{Error, Result};
pub use features::{FeatureConfig, FeatureMode};
pub use graph::{Batch, Graph, Sample};
pub use linalg::Matrix;
pub use mesh::Mesh;
pub use nn::{AdamState, ConvKind, ModelConfig, ModelParameters};
