//! What one client with ten neighbours must send just to share the first
//! layer of a two-layer GCN (1000 features, 256 hidden units), per round
//! and over 400 rounds.

use std::collections::HashSet;

use retexo::baseline::{charge_forward_pass, ClientPlan, CostSchedule};
use retexo::graph::{Adjacency, SampledAdjacency, SamplerConfig};
use retexo::netsim::{CommLedger, MessageKind};
use retexo::nn::{GnnKind, ModelParams, ModelSpec};

/// Returns (payload bytes of one round, payload bytes of 400 rounds).
pub fn run_example() -> retexo::Result<(u64, u64)> {
    let edges: Vec<(usize, usize)> = (1..=10).map(|leaf| (0, leaf)).collect();
    let (adj, _) = Adjacency::from_edges(11, &edges)?;
    let model = ModelParams::<f32>::init(ModelSpec::gnn(GnnKind::Gcn, 1000, 256, 7, 2), 0)?;
    let schedule = CostSchedule::for_model(&model);

    let mut ledger = CommLedger::default();
    let mut seen = HashSet::new();
    let mut per_round = 0;
    for round in 0..400u64 {
        let mut sampled = SampledAdjacency::new(&adj, SamplerConfig::default(), round);
        let plan = ClientPlan::build(0, true, 2, &mut sampled);
        charge_forward_pass(&plan, &schedule, round, &mut ledger, &mut seen);
        if round == 0 {
            per_round = ledger.kind(MessageKind::ModelShare).payload_bytes;
        }
    }
    let total = ledger.kind(MessageKind::ModelShare).payload_bytes;
    println!("first-layer shares per round: {per_round} bytes = {:.2} Mbit", per_round as f64 * 8e-6);
    println!("over 400 rounds: {total} bytes = {:.3} Gbit", total as f64 * 8e-9);
    Ok((per_round, total))
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
