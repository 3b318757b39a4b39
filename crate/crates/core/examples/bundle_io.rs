//! Round trips through every on-disk format: graph bundles, model
//! checkpoints and message logs.

use retexo::graph::{make_transductive_split, GraphBundle};
use retexo::harness::{synth_graph, SynthSpec};
use retexo::netsim::{read_event_log, CommLedger};
use retexo::nn::{read_checkpoint, write_checkpoint, GnnKind};
use retexo::retexo::{train_retexo, RetexoConfig};

/// Returns true when every artefact reads back unchanged.
pub fn run_example() -> retexo::Result<bool> {
    let dir = tempfile::tempdir().expect("temporary directory");
    let g = synth_graph(&SynthSpec::new(50, 3, 0.7, 6, 4.0, 9))?;
    g.save(dir.path().join("graph"))?;
    let loaded = GraphBundle::load(dir.path().join("graph"))?;
    let graph_ok = loaded == g;
    println!("bundle: {} nodes, {} classes, identical: {graph_ok}", loaded.num_nodes(), loaded.num_classes);

    let split = make_transductive_split(&g, 0.3, 0.2, 0)?;
    let mut cfg = RetexoConfig::new(GnnKind::Sage, 1, 0.05, 8);
    cfg.rounds = 5;
    cfg.log_events = true;
    let run = train_retexo(&g, &split, &cfg)?;

    let ckpt = dir.path().join("model1.ckpt");
    write_checkpoint(&ckpt, &run.models[1])?;
    let model_ok = read_checkpoint(&ckpt)? == run.models[1];
    println!("checkpoint of model 1 identical: {model_ok}");

    let log = dir.path().join("events.csv");
    run.ledger.write_event_log(&log)?;
    let events = read_event_log(&log)?;
    let replayed = CommLedger::replay(&events, cfg.attribution);
    let ledger_ok = replayed.summary(false) == run.ledger.summary(false);
    println!("{} logged messages replay to the same totals: {ledger_ok}", events.len());
    Ok(graph_ok && model_ok && ledger_ok)
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
