//! Train a two-round RetexoGCN on a small synthetic graph and print its
//! accuracy and communication totals.

use retexo::harness::{run_experiment, DatasetSource, ExperimentConfig, Family, Protocol, SynthSpec};
use retexo::RunReport;

pub fn run_example() -> retexo::Result<RunReport> {
    let graph = SynthSpec::new(300, 4, 0.85, 16, 6.0, 7);
    let cfg = ExperimentConfig::new(Family::Gcn, Protocol::Retexo)
        .with_dataset(DatasetSource::Synth(graph))
        .with_rounds(60)
        .with_repeats(2)
        .with_hyper(0.05, 32);
    let report = run_experiment(&cfg)?;
    println!(
        "{}: micro-F1 {:.3} ± {:.3}",
        report.label, report.micro_f1_mean, report.micro_f1_std
    );
    let l = report.ledger();
    println!("client-to-client {:.4} MB, client-to-server {:.2} MB", l.c2c_mb, l.c2s_mb);
    for c in &report.seeds[0].curves {
        println!(
            "  model {}: {} rounds, best validation loss {:.4} at round {:?}",
            c.model_index, c.rounds_run, c.best_val_loss, c.best_round
        );
    }
    Ok(report)
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
