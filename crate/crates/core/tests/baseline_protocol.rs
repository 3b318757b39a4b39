use ndarray::Array2;
use retexo::baseline::{plan_round, train_baseline, BaselineConfig};
use retexo::graph::{make_transductive_split, GraphBundle, SplitMode, SplitSpec};
use retexo::harness::{synth_graph, SynthSpec};
use retexo::netsim::{Channel, Endpoint, MessageKind};
use retexo::nn::GnnKind;

fn star() -> GraphBundle {
    let features = Array2::from_shape_fn((4, 5), |(i, j)| (i * 5 + j) as f32 / 20.0);
    GraphBundle::new(4, &[(0, 1), (0, 2), (0, 3)], features, vec![0, 1, 0, 1], 2).unwrap()
}

#[test]
fn star_round_matches_enumeration() {
    let g = star();
    let split = SplitSpec {
        mode: SplitMode::Transductive,
        train_ids: vec![0],
        val_ids: vec![],
        test_ids: vec![1, 2, 3],
        inductive_graphs: None,
    };
    let mut cfg = BaselineConfig::new(GnnKind::Gcn, 2, 0.1, 4);
    cfg.rounds = 1;
    cfg.log_events = true;
    let run = train_baseline(&g, &split, &cfg).unwrap();

    // GCN 5 -> 4 -> 2 without biases: 2*5*4 + 2*4*2 floats
    let model_floats = 40 + 16;
    let c = Endpoint::Client;
    let mut want = vec![
        (MessageKind::ServerModel, Endpoint::Server, c(0), model_floats),
        (MessageKind::GradUp, c(0), Endpoint::Server, model_floats),
    ];
    for leaf in 1..=3 {
        want.push((MessageKind::ModelShare, c(0), c(leaf), 40));
        want.push((MessageKind::Repr0, c(leaf), c(0), 5));
        want.push((MessageKind::Repr0, c(0), c(leaf), 5));
        want.push((MessageKind::Repr1, c(leaf), c(0), 4));
        want.push((MessageKind::GradFactor, c(leaf), c(0), 5));
    }
    want.sort();
    let mut got: Vec<_> = run
        .ledger
        .events()
        .unwrap()
        .iter()
        .map(|m| (m.kind, m.src, m.dst, m.float_count))
        .collect();
    got.sort();
    assert_eq!(got, want);
}

#[test]
fn zero_rounds_leave_the_model_untrained_and_the_ledger_empty() {
    let g = star();
    let split = make_transductive_split(&g, 0.5, 0.0, 0).unwrap();
    let mut cfg = BaselineConfig::new(GnnKind::Sage, 2, 0.1, 4);
    cfg.rounds = 0;
    cfg.pool_dim = 3;
    let run = train_baseline(&g, &split, &cfg).unwrap();
    assert_eq!(run.ledger.total_bytes(Channel::ClientToClient), 0);
    assert_eq!(run.ledger.total_bytes(Channel::ClientToServer), 0);
    let init = retexo::nn::ModelParams::init(cfg.model_spec(5, 2), cfg.init_seed()).unwrap();
    assert_eq!(run.model, init);
}

#[test]
fn plans_and_runs_are_deterministic() {
    let g = synth_graph(&SynthSpec::new(80, 3, 0.7, 6, 6.0, 2)).unwrap();
    let split = make_transductive_split(&g, 0.3, 0.2, 5).unwrap();
    let mut cfg = BaselineConfig::new(GnnKind::Gat, 2, 0.05, 8);
    cfg.rounds = 4;
    cfg.heads = 2;
    cfg.batch_cap = 10;
    cfg.sampler.max_neighbors_per_hop = 3;
    cfg.sampler.edge_keep_fraction = 0.6;
    for r in 0..4 {
        assert_eq!(plan_round(&g, &split, &cfg, r), plan_round(&g, &split, &cfg, r));
    }
    assert_eq!(train_baseline(&g, &split, &cfg).unwrap(), train_baseline(&g, &split, &cfg).unwrap());
}

#[test]
fn early_stopping_never_costs_more() {
    let g = synth_graph(&SynthSpec::new(80, 3, 0.7, 6, 6.0, 2)).unwrap();
    let split = make_transductive_split(&g, 0.3, 0.2, 5).unwrap();
    let mut cfg = BaselineConfig::new(GnnKind::Gcn, 2, 0.1, 8);
    cfg.rounds = 60;
    let fixed = train_baseline(&g, &split, &cfg).unwrap();
    cfg.patience = Some(3);
    let early = train_baseline(&g, &split, &cfg).unwrap();
    assert!(early.curve.rounds_run <= 60);
    for ch in [Channel::ClientToClient, Channel::ClientToServer] {
        assert!(early.ledger.total_bytes(ch) <= fixed.ledger.total_bytes(ch));
    }
}
