//! Training graph neural networks over fully-distributed graphs, where every
//! node lives on its own client and a server coordinates training without
//! seeing the edges.
//!
//! Two protocols are simulated side by side:
//!
//! * [`baseline`]: end-to-end GNN training where every round mobilises the
//!   K-hop neighbourhood of each sampled client (layer shares, raw features,
//!   hidden representations and gradient factors all cross client links).
//! * [`retexo`]: the layer-wise transformation, where a K-layer GNN becomes
//!   K+1 MLPs trained one after another with FedSGD and exactly one
//!   embedding exchange between consecutive models.
//!
//! Every simulated transmission is charged to a [`netsim::CommLedger`], so
//! the two protocols can be compared byte for byte.

// Float checks are written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod error;
pub mod graph;
pub mod harness;
pub mod netsim;
pub mod nn;
pub mod retexo;
pub mod rng;

pub use error::{Error, Result};
pub use graph::{GraphBundle, SamplerConfig, SplitSpec};
pub use harness::{run_experiment, ExperimentConfig, RunReport};
pub use netsim::CommLedger;
pub use nn::ModelParams;
