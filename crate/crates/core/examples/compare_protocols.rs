//! End-to-end GCN vs RetexoGCN on the citation-network graph (a real Cora
//! bundle when `RETEXO_CORA_DIR` is set, the surrogate otherwise), with a
//! short round budget so it finishes in seconds.

use retexo::harness::{run_on, DatasetSource, ExperimentConfig, Family, Protocol};

/// Returns the baseline / Retexo client-to-client byte ratio.
pub fn run_example() -> retexo::Result<f64> {
    let (g, name) = DatasetSource::Cora.load()?;
    let mut c2c = Vec::new();
    for protocol in [Protocol::Baseline, Protocol::Retexo] {
        let cfg = ExperimentConfig::new(Family::Gcn, protocol).with_rounds(20).with_repeats(1);
        let r = run_on(&g, &name, &cfg)?;
        let l = r.ledger();
        println!(
            "{:<11} micro-F1 {:.3}  c2c {:>14.3} MB  c2s {:>10.1} MB",
            r.label, r.micro_f1_mean, l.c2c_mb, l.c2s_mb
        );
        c2c.push(l.c2c_bytes as f64);
    }
    let ratio = c2c[0] / c2c[1];
    println!("client-to-client ratio after 20 rounds: {ratio:.3e}");
    Ok(ratio)
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
