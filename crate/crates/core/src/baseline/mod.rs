//! End-to-end distributed GNN training. The learning itself is computed
//! centrally over each round's sampled K-hop subgraphs; every message the
//! distributed enactment would need is charged to the ledger.

mod cost;
mod plan;
mod train;

pub use cost::{charge_backward_pass, charge_forward_pass, charge_server_round, CostSchedule};
pub use plan::{ClientPlan, RoundPlan};
pub use train::{
    computation_levels, plan_round, round_tag, train_baseline, train_baseline_traced, BaselineConfig,
    BaselineRun, TraceOptions,
};
