//! RetexoGAT when half of the links are down during message passing, and
//! when contacts are flaky but retried.

use retexo::graph::make_transductive_split;
use retexo::harness::{synth_graph, SynthSpec};
use retexo::netsim::ContactSchedule;
use retexo::nn::GnnKind;
use retexo::retexo::{train_retexo, RetexoConfig};

/// Returns test accuracy for (all links, half the links, flaky links).
pub fn run_example() -> retexo::Result<(f64, f64, f64)> {
    let g = synth_graph(&SynthSpec::new(400, 4, 0.85, 16, 8.0, 11))?;
    let split = make_transductive_split(&g, 0.2, 0.2, 3)?;
    let mut cfg = RetexoConfig::new(GnnKind::Gat, 2, 0.02, 32);
    cfg.rounds = 80;
    cfg.heads = 4;

    let mut accs = Vec::new();
    for (name, contact) in [
        ("all links", ContactSchedule::always()),
        ("half the links", ContactSchedule::edge_drop(0.5, 1)),
        ("p = 0.3, 4 attempts", ContactSchedule::probabilistic(0.3, 1, 4)),
    ] {
        cfg.contact = contact;
        let run = train_retexo(&g, &split, &cfg)?;
        let acc = run.test_accuracy(&g, &split)?;
        println!("{name:<20} accuracy {acc:.3}  c2c {} bytes", run.ledger.summary(false).c2c_bytes);
        accs.push(acc);
    }
    Ok((accs[0], accs[1], accs[2]))
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
