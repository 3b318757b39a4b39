//! Graph storage, dataset bundles, train/val/test splits and deterministic
//! neighbour sampling shared by both training protocols.

mod bundle;
mod sampler;
mod split;

pub use bundle::{Adjacency, BundleMeta, GraphBundle};
pub use sampler::{
    sample_from, sample_neighbors, sample_round_clients, SampledAdjacency, SamplerConfig,
};
pub use split::{
    make_inductive_split, make_per_class_split, make_transductive_split, InductiveGraphs,
    SplitMode, SplitSpec, ViewRole,
};
