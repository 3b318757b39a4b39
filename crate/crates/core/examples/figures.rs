//! Writes per-client data-volume curves (`Sno,node` CSVs) for a GCN and a
//! RetexoGCN, with and without early stopping.

use std::path::PathBuf;

use retexo::harness::{emit_figures_data, run_on, synth_graph, ExperimentConfig, Family, FigureChannel, Protocol, SynthSpec};

/// Returns the files written.
pub fn run_example() -> retexo::Result<Vec<PathBuf>> {
    let g = synth_graph(&SynthSpec::new(250, 4, 0.8, 16, 6.0, 4))?;
    let mut reports = Vec::new();
    for protocol in [Protocol::Baseline, Protocol::Retexo] {
        for patience in [None, Some(5)] {
            let mut cfg = ExperimentConfig::new(Family::Gcn, protocol)
                .with_rounds(40)
                .with_repeats(1)
                .with_hyper(0.05, 32);
            cfg.patience = patience;
            reports.push(run_on(&g, "synthetic", &cfg)?);
        }
    }
    let dir = std::env::temp_dir().join("retexo-figures");
    let paths = emit_figures_data(&reports, &dir, FigureChannel::Both)?;
    for p in &paths {
        let text = std::fs::read_to_string(p).unwrap_or_default();
        let top = text.lines().nth(1).unwrap_or("");
        println!("{} (busiest client: {top})", p.display());
    }
    Ok(paths)
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
