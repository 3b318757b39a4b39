use ndarray::{array, Array2};
use retexo::graph::{make_transductive_split, GraphBundle, SplitMode, SplitSpec};
use retexo::harness::{synth_graph, SynthSpec};
use retexo::netsim::{Channel, Endpoint, MessageKind};
use retexo::nn::{forward_mlp, loss_and_grad, ArchContext, GnnKind, ModelParams, OptimizerState, ParamSet};
use retexo::retexo::{train_retexo, RetexoConfig};
use retexo::rng::mix;

fn graph() -> GraphBundle {
    synth_graph(&SynthSpec::new(60, 3, 0.8, 6, 4.0, 13)).unwrap()
}

fn cfg(kind: GnnKind, k: usize, rounds: usize) -> RetexoConfig {
    let mut c = RetexoConfig::new(kind, k, 0.05, 8);
    c.rounds = rounds;
    c.heads = 2;
    c.pool_dim = 6;
    c.seed = 4;
    c
}

fn manual_split(train: &[usize], val: &[usize], test: &[usize]) -> SplitSpec {
    SplitSpec {
        mode: SplitMode::Transductive,
        train_ids: train.to_vec(),
        val_ids: val.to_vec(),
        test_ids: test.to_vec(),
        inductive_graphs: None,
    }
}

#[test]
fn two_layers_train_three_models_with_two_exchanges() {
    let g = graph();
    let split = make_transductive_split(&g, 0.3, 0.2, 0).unwrap();
    let mut c = cfg(GnnKind::Gcn, 2, 5);
    c.log_events = true;
    let run = train_retexo(&g, &split, &c).unwrap();
    assert_eq!(run.models.len(), 3);
    assert_eq!(run.curves.len(), 3);
    assert_eq!(run.ledger.c2c_rounds().unwrap().len(), 2);
}

#[test]
fn zero_layers_is_a_plain_federated_mlp() {
    let g = graph();
    let split = make_transductive_split(&g, 0.3, 0.2, 0).unwrap();
    let run = train_retexo(&g, &split, &cfg(GnnKind::Gcn, 0, 5)).unwrap();
    assert_eq!(run.models.len(), 1);
    assert_eq!(run.ledger.total_bytes(Channel::ClientToClient), 0);
}

#[test]
fn runs_are_bit_identical() {
    let g = graph();
    let split = make_transductive_split(&g, 0.3, 0.2, 0).unwrap();
    for kind in [GnnKind::Gcn, GnnKind::Sage, GnnKind::Gat] {
        let c = cfg(kind, 2, 6);
        assert_eq!(train_retexo(&g, &split, &c).unwrap(), train_retexo(&g, &split, &c).unwrap());
    }
}

#[test]
fn earlier_models_are_frozen() {
    let g = graph();
    let split = make_transductive_split(&g, 0.3, 0.2, 0).unwrap();
    let one = train_retexo(&g, &split, &cfg(GnnKind::Sage, 1, 6)).unwrap();
    let two = train_retexo(&g, &split, &cfg(GnnKind::Sage, 2, 6)).unwrap();
    assert_eq!(one.models[..], two.models[..2]);
}

#[test]
fn client_traffic_does_not_depend_on_rounds() {
    let g = graph();
    let split = make_transductive_split(&g, 0.3, 0.2, 0).unwrap();
    let c2c = |r| {
        train_retexo(&g, &split, &cfg(GnnKind::Gat, 2, r))
            .unwrap()
            .ledger
            .total_bytes(Channel::ClientToClient)
    };
    assert_eq!(c2c(3), c2c(12));
}

#[test]
fn one_exchange_sends_one_embedding_per_directed_edge() {
    let g = graph();
    let split = make_transductive_split(&g, 0.3, 0.2, 0).unwrap();
    let mut c = cfg(GnnKind::Gcn, 1, 2);
    c.log_events = true;
    let run = train_retexo(&g, &split, &c).unwrap();
    let entries = g.adjacency.directed_edge_count() as u64;
    assert_eq!(run.ledger.payload_bytes(Channel::ClientToClient), entries * g.num_classes as u64 * 4);

    let v = (0..g.num_nodes()).find(|&v| g.adjacency.degree(v) == 3).expect("a degree-3 node");
    let events = run.ledger.events().unwrap();
    let sent = events.iter().filter(|m| m.src == Endpoint::Client(v) && m.kind == MessageKind::Embedding);
    let got = events.iter().filter(|m| m.dst == Endpoint::Client(v) && m.kind == MessageKind::Embedding);
    assert_eq!(sent.clone().count(), 3);
    assert!(sent.clone().all(|m| m.float_count == g.num_classes as u64));
    assert_eq!(got.count(), 3);
}

#[test]
fn client_side_embeddings_match_the_cache() {
    let g = graph();
    let split = make_transductive_split(&g, 0.3, 0.2, 0).unwrap();
    for kind in [GnnKind::Gcn, GnnKind::Sage, GnnKind::Gat] {
        let run = train_retexo(&g, &split, &cfg(kind, 2, 4)).unwrap();
        for v in 0..g.num_nodes() {
            let state = run.client_state(&g, v);
            for m in 1..=2 {
                let local = run.compute_embedding(&state, m).unwrap();
                let cached = run.cache().embedding(m, v).unwrap();
                for (a, b) in local.iter().zip(&cached) {
                    assert!((a - b).abs() <= 1e-5 * (1.0 + b.abs()), "{kind:?} m={m} v={v}: {a} vs {b}");
                }
            }
        }
        let first = forward_mlp(&run.models[0], &g.features.row(0).to_vec()).unwrap().0;
        assert_eq!(run.compute_embedding(&run.client_state(&g, 0), 1).unwrap(), first);
    }
}

fn dense(x: &[f32], w: &Array2<f32>, b: Option<&Array2<f32>>, relu: bool) -> Vec<f32> {
    (0..w.ncols())
        .map(|j| {
            let s: f32 = x.iter().enumerate().map(|(i, xi)| xi * w[[i, j]]).sum::<f32>() + b.map_or(0.0, |b| b[[0, j]]);
            if relu {
                s.max(0.0)
            } else {
                s
            }
        })
        .collect()
}

/// Hand computation of the GCN chain `Q^1 = MLP_0(F)`,
/// `Q^2 = MLP_1([Q^1_v ‖ mean Q^1_N(v)])`.
fn manual_q2(run_models: &[ModelParams], g: &GraphBundle, v: usize) -> Vec<f32> {
    let t0 = &run_models[0].params.0;
    let q1 = |u: usize| {
        let x = g.features.row(u).to_vec();
        dense(&dense(&x, &t0[0], Some(&t0[1]), true), &t0[2], Some(&t0[3]), false)
    };
    let neigh = g.adjacency.neighbors(v);
    let mut mean = vec![0.0f32; g.num_classes];
    for &u in neigh {
        for (m, q) in mean.iter_mut().zip(q1(u)) {
            *m += q / neigh.len() as f32;
        }
    }
    let mut combined = q1(v);
    combined.extend(mean);
    let t1 = &run_models[1].params.0;
    dense(&dense(&combined, &t1[0], None, true), &t1[1], Some(&t1[2]), false)
}

#[test]
fn triangle_chain_matches_hand_computation() {
    let features = array![[1.0f32, 0.0, 0.5], [0.0, 1.0, -0.5], [0.3, 0.3, 0.3], [0.9, -0.2, 0.1]];
    // a triangle plus an isolated node
    let g = GraphBundle::new(4, &[(0, 1), (1, 2), (0, 2)], features, vec![0, 1, 0, 1], 2).unwrap();
    let split = manual_split(&[0, 1], &[2], &[3]);
    let run = train_retexo(&g, &split, &cfg(GnnKind::Gcn, 2, 3)).unwrap();
    for v in 0..4 {
        let want = manual_q2(&run.models, &g, v);
        let got = run.compute_embedding(&run.client_state(&g, v), 2).unwrap();
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-6, "node {v}: {a} vs {b}");
        }
    }
}

#[test]
fn federated_rounds_match_a_centralized_reenactment() {
    let features = array![[1.0f32, 0.2], [0.1, 0.9], [0.8, 0.1], [0.0, 1.0]];
    let g = GraphBundle::new(4, &[(0, 1), (1, 2), (2, 3)], features, vec![0, 1, 0, 1], 2).unwrap();
    let split = manual_split(&[0, 1, 2], &[3], &[]);
    let c = cfg(GnnKind::Gcn, 1, 3);
    let run = train_retexo(&g, &split, &c).unwrap();

    let row = |u: usize| g.features.row(u).to_vec();
    let q1: Vec<Vec<f32>> = (0..4).map(|u| forward_mlp(&run.models[0], &row(u)).unwrap().0).collect();
    for m in 0..=1 {
        let input = |u: usize| if m == 0 { row(u) } else { q1[u].clone() };
        let ctx = |u: usize| {
            if m == 0 {
                ArchContext::none()
            } else {
                ArchContext::with_neighbors(g.adjacency.neighbors(u).iter().map(|&w| q1[w].clone()).collect())
            }
        };
        let mut model = ModelParams::init(c.model_spec(m, 2, 2), mix(&[c.seed, m as u64])).unwrap();
        let mut opt = OptimizerState::new(c.sgd);
        let (mut best, mut best_loss) = (model.clone(), f64::INFINITY);
        for r in 0..c.rounds {
            let mut losses = 0.0;
            let mut grads = Vec::new();
            for &v in &split.train_ids {
                let (l, gr) = loss_and_grad(&model, &input(v), g.labels[v], &ctx(v)).unwrap();
                losses += l as f64;
                grads.push(gr);
            }
            let refs: Vec<&ParamSet> = grads.iter().collect();
            let mean = ParamSet::mean(&refs).unwrap();
            let train_loss = losses / 3.0;
            assert!((train_loss - run.curves[m].train_loss[r]).abs() < 1e-6, "m={m} r={r}");
            let val = loss_and_grad(&model, &input(3), g.labels[3], &ctx(3)).unwrap().0 as f64;
            assert!((val - run.curves[m].val_loss[r]).abs() < 1e-6, "m={m} r={r}");
            if val < best_loss {
                best_loss = val;
                best = model.clone();
            }
            opt.step(&mut model.params, &mean);
        }
        for (a, b) in best.params.iter_floats().zip(run.models[m].params.iter_floats()) {
            assert!((a - b).abs() < 1e-6, "m={m}: {a} vs {b}");
        }
    }
}
