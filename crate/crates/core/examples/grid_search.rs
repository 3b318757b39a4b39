//! Picks learning rate and hidden size for RetexoSage by validation loss.

use retexo::harness::{grid_search, synth_graph, ExperimentConfig, Family, GridResult, GridSpace, Protocol, SynthSpec};

pub fn run_example() -> retexo::Result<GridResult> {
    let g = synth_graph(&SynthSpec::new(200, 3, 0.8, 12, 5.0, 2))?;
    let base = ExperimentConfig::new(Family::Sage, Protocol::Retexo)
        .with_rounds(25)
        .with_repeats(1);
    let space = GridSpace {
        lrs: vec![0.01, 0.05],
        hiddens: vec![16, 32],
    };
    let result = grid_search(&g, "synthetic", &base, &space)?;
    for p in &result.evaluated {
        println!("lr {:<5} hidden {:<3} validation loss {:.4}", p.lr, p.hidden, p.val_loss);
    }
    println!("chosen: lr {} hidden {}", result.best_point.lr, result.best_point.hidden);
    Ok(result)
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
