//! Compares hand-written backpropagation with central finite differences
//! for every layer family.

use retexo::nn::{grad_check_report, GradCheckArch};

/// Returns the worst relative error seen.
pub fn run_example() -> retexo::Result<f64> {
    let archs = [
        ("mlp", GradCheckArch::Mlp),
        ("gcn block", GradCheckArch::GcnBlock),
        ("sage block", GradCheckArch::SageBlock),
        ("gat block", GradCheckArch::GatBlock { heads: 2 }),
    ];
    let mut worst = 0.0f64;
    for (name, arch) in archs {
        for seed in 0..3 {
            let r = grad_check_report(arch, (4, 4, 2), seed)?;
            println!(
                "{name:<10} seed {seed}: max rel error {:.2e} over {} entries ({} skipped at kinks)",
                r.max_rel_error, r.checked, r.skipped_at_kinks
            );
            worst = worst.max(r.max_rel_error);
        }
    }
    Ok(worst)
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
