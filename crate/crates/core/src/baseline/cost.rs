use std::collections::HashSet;

use super::plan::ClientPlan;
use crate::netsim::{CommLedger, Message, MessageKind};
use crate::nn::ModelParams;

/// Float counts of every message type of the end-to-end protocol, taken
/// from the model's actual tensor sizes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostSchedule {
    pub input_dim: u64,
    /// Parameter floats of each layer.
    pub layer_floats: Vec<u64>,
    /// Output width of each layer.
    pub layer_out: Vec<u64>,
    pub model_floats: u64,
}

impl CostSchedule {
    pub fn for_model(model: &ModelParams) -> Self {
        CostSchedule {
            input_dim: model.input_dim() as u64,
            layer_floats: model.layers.iter().map(|l| l.num_floats() as u64).collect(),
            layer_out: model.layers.iter().map(|l| l.out_dim as u64).collect(),
            model_floats: model.num_floats() as u64,
        }
    }

    pub fn num_layers(&self) -> usize {
        self.layer_floats.len()
    }

    /// Floats of the lowest `count` layers, which a node at distance
    /// `K - count` needs to compute its own representations.
    pub fn model_share(&self, count: usize) -> u64 {
        self.layer_floats[..count].iter().sum()
    }
}

/// Forward enactment for one client: layer shares travel outwards along
/// the BFS tree, raw features and hidden representations travel inwards.
///
/// `feature_cache` holds ordered `(sender, receiver)` pairs that already
/// exchanged raw features during the run; those are not charged again.
pub fn charge_forward_pass(
    plan: &ClientPlan,
    schedule: &CostSchedule,
    round: u64,
    ledger: &mut CommLedger,
    feature_cache: &mut HashSet<(usize, usize)>,
) {
    let k = schedule.num_layers();
    for p in 1..k.min(plan.depth() + 1) {
        let floats = schedule.model_share(k - p);
        for &w in &plan.hops[p] {
            ledger.record(Message::c2c(round, plan.parent[&w], w, MessageKind::ModelShare, floats));
        }
    }
    for p in 0..k.min(plan.depth() + 1) {
        for &w in &plan.hops[p] {
            for &u in plan.sampled.get(&w).map_or(&[][..], Vec::as_slice) {
                if feature_cache.insert((u, w)) {
                    ledger.record(Message::c2c(round, u, w, MessageKind::Repr0, schedule.input_dim));
                }
            }
        }
    }
    for p in 0..(k.saturating_sub(1)).min(plan.depth() + 1) {
        for &w in &plan.hops[p] {
            let nbrs = plan.sampled.get(&w).map_or(&[][..], Vec::as_slice);
            for level in 2..=k - p {
                let floats = schedule.layer_out[level - 2];
                for &u in nbrs {
                    ledger.record(Message::c2c(round, u, w, MessageKind::Repr1, floats));
                }
            }
        }
    }
}

/// Backward enactment: every node inside the shared layers returns a
/// gradient factor the size of the layer input to its BFS parent.
pub fn charge_backward_pass(plan: &ClientPlan, schedule: &CostSchedule, round: u64, ledger: &mut CommLedger) {
    let k = schedule.num_layers();
    for p in 1..k.min(plan.depth() + 1) {
        for &w in &plan.hops[p] {
            ledger.record(Message::c2c(
                round,
                w,
                plan.parent[&w],
                MessageKind::GradFactor,
                schedule.input_dim,
            ));
        }
    }
}

/// Model download to every sampled client, updated model back from train
/// clients, `(loss, correct)` back from validation clients.
pub fn charge_server_round(
    train: &[usize],
    val: &[usize],
    model_floats: u64,
    round: u64,
    ledger: &mut CommLedger,
) {
    for &v in train {
        ledger.record(Message::down(round, v, MessageKind::ServerModel, model_floats));
        ledger.record(Message::up(round, v, MessageKind::GradUp, model_floats));
    }
    for &v in val {
        ledger.record(Message::down(round, v, MessageKind::ServerModel, model_floats));
        ledger.record(Message::up(round, v, MessageKind::ValReport, 2));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Adjacency, SampledAdjacency, SamplerConfig};
    use crate::netsim::{Channel, HEADER_BYTES};
    use crate::nn::{GnnKind, ModelSpec};

    fn star(leaves: usize) -> Adjacency {
        let edges: Vec<_> = (1..=leaves).map(|i| (0, i)).collect();
        Adjacency::from_edges(leaves + 1, &edges).unwrap().0
    }

    fn gcn_schedule(i: usize, h: usize, o: usize) -> CostSchedule {
        let m = ModelParams::<f32>::init(ModelSpec::gnn(GnnKind::Gcn, i, h, o, 2), 0).unwrap();
        CostSchedule::for_model(&m)
    }

    #[test]
    fn model_share_is_two_i_h_per_neighbour() {
        let adj = star(10);
        let mut s = SampledAdjacency::new(&adj, SamplerConfig::default(), 0);
        let plan = ClientPlan::build(0, true, 2, &mut s);
        let sched = gcn_schedule(1000, 256, 7);
        let mut ledger = CommLedger::default();
        charge_forward_pass(&plan, &sched, 0, &mut ledger, &mut HashSet::new());
        assert_eq!(ledger.kind(MessageKind::ModelShare).payload_bytes, 2 * 1000 * 256 * 10 * 4);
    }

    #[test]
    fn star_enumeration() {
        // centre 0 with leaves 1..=3, K = 2, I = 5, H = 4
        let adj = star(3);
        let mut s = SampledAdjacency::new(&adj, SamplerConfig::default(), 0);
        let plan = ClientPlan::build(0, true, 2, &mut s);
        let sched = gcn_schedule(5, 4, 2);
        let mut ledger = CommLedger::default().with_log();
        let mut cache = HashSet::new();
        charge_forward_pass(&plan, &sched, 0, &mut ledger, &mut cache);
        charge_backward_pass(&plan, &sched, 0, &mut ledger);
        let mut got: Vec<_> = ledger
            .events()
            .unwrap()
            .iter()
            .map(|m| (m.kind, m.src, m.dst, m.float_count))
            .collect();
        got.sort();
        let c = crate::netsim::Endpoint::Client;
        let mut want = Vec::new();
        for leaf in 1..=3 {
            want.push((MessageKind::ModelShare, c(0), c(leaf), 2 * 5 * 4));
            want.push((MessageKind::Repr0, c(leaf), c(0), 5));
            want.push((MessageKind::Repr0, c(0), c(leaf), 5));
            want.push((MessageKind::Repr1, c(leaf), c(0), 4));
            want.push((MessageKind::GradFactor, c(leaf), c(0), 5));
        }
        want.sort();
        assert_eq!(got, want);

        // a second enactment reuses cached features
        let before = ledger.kind(MessageKind::Repr0);
        charge_forward_pass(&plan, &sched, 1, &mut ledger, &mut cache);
        assert_eq!(ledger.kind(MessageKind::Repr0), before);
    }

    #[test]
    fn single_layer_has_no_factors_or_shares() {
        let adj = star(4);
        let mut s = SampledAdjacency::new(&adj, SamplerConfig::default(), 0);
        let plan = ClientPlan::build(0, true, 1, &mut s);
        let m = ModelParams::<f32>::init(ModelSpec::gnn(GnnKind::Gcn, 6, 4, 2, 1), 0).unwrap();
        let sched = CostSchedule::for_model(&m);
        let mut ledger = CommLedger::default();
        charge_forward_pass(&plan, &sched, 0, &mut ledger, &mut HashSet::new());
        charge_backward_pass(&plan, &sched, 0, &mut ledger);
        assert_eq!(ledger.kind(MessageKind::ModelShare).messages, 0);
        assert_eq!(ledger.kind(MessageKind::GradFactor).messages, 0);
        assert_eq!(ledger.kind(MessageKind::Repr0).messages, 4);
    }

    #[test]
    fn server_round_counts() {
        let mut ledger = CommLedger::default();
        charge_server_round(&[0], &[1, 2], 250_000, 0, &mut ledger);
        assert_eq!(ledger.client(0).c2s_bytes, 2 * (1_000_000 + HEADER_BYTES));
        assert_eq!(ledger.client(1).c2s_bytes, 1_000_000 + 8 + 2 * HEADER_BYTES);
        let mut empty = CommLedger::default();
        charge_server_round(&[], &[], 10, 0, &mut empty);
        assert_eq!(empty.total_bytes(Channel::ClientToServer), 0);
    }
}
