use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Protocol};
use crate::baseline::{train_baseline, BaselineRun};
use crate::error::Result;
use crate::graph::{GraphBundle, SplitSpec};
use crate::netsim::{CommLedger, LedgerSummary};
use crate::retexo::{train_retexo, ModelCurve, RetexoRun};

/// The trained artefacts of one seed.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedRun {
    Retexo(RetexoRun),
    Baseline(BaselineRun),
}

impl TrainedRun {
    pub fn ledger(&self) -> &CommLedger {
        match self {
            TrainedRun::Retexo(r) => &r.ledger,
            TrainedRun::Baseline(r) => &r.ledger,
        }
    }

    pub fn curves(&self) -> Vec<ModelCurve> {
        match self {
            TrainedRun::Retexo(r) => r.curves.clone(),
            TrainedRun::Baseline(r) => vec![r.curve.clone()],
        }
    }

    pub fn test_accuracy(&self, g: &GraphBundle, split: &SplitSpec) -> Result<f64> {
        match self {
            TrainedRun::Retexo(r) => r.test_accuracy(g, split),
            TrainedRun::Baseline(r) => r.test_accuracy(g, split),
        }
    }

    /// Validation loss of the selected snapshot of the final model.
    pub fn selection_loss(&self) -> f64 {
        match self {
            TrainedRun::Retexo(r) => r.curves.last().map_or(f64::INFINITY, |c| c.best_val_loss),
            TrainedRun::Baseline(r) => r.curve.best_val_loss,
        }
    }
}

/// Splits the graph for `seed` and trains with the configured protocol.
pub fn train_seed(g: &GraphBundle, cfg: &ExperimentConfig, seed: u64) -> Result<(SplitSpec, TrainedRun)> {
    cfg.validate()?;
    let split = cfg.split.make(g, seed)?;
    let run = match (cfg.arch.kind(), cfg.protocol) {
        (Some(_), Protocol::Baseline) => TrainedRun::Baseline(train_baseline(g, &split, &cfg.baseline_config(seed)?)?),
        _ => TrainedRun::Retexo(train_retexo(g, &split, &cfg.retexo_config(seed))?),
    };
    Ok((split, run))
}

/// Per-client byte counts, indexed by client id.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientBytes {
    pub c2c: u64,
    pub c2s: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    /// Accuracy over the test nodes, which is micro-F1 for single-label
    /// classification.
    pub micro_f1: f64,
    pub val_loss: f64,
    pub curves: Vec<ModelCurve>,
    pub ledger: LedgerSummary,
    pub clients: Vec<ClientBytes>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// Resolved config; running it again reproduces this report.
    pub config: ExperimentConfig,
    pub dataset: String,
    pub label: String,
    pub micro_f1_mean: f64,
    /// Sample standard deviation over seeds (0 for a single seed).
    pub micro_f1_std: f64,
    pub val_loss_mean: f64,
    pub seeds: Vec<SeedOutcome>,
    pub wall_time_secs: f64,
}

impl RunReport {
    /// Equality on everything except wall time.
    pub fn same_outcome(&self, other: &RunReport) -> bool {
        RunReport {
            wall_time_secs: 0.0,
            ..self.clone()
        } == RunReport {
            wall_time_secs: 0.0,
            ..other.clone()
        }
    }

    pub fn early_stopped(&self) -> bool {
        self.config.patience.is_some()
    }

    /// Ledger summary of the first seed.
    pub fn ledger(&self) -> &LedgerSummary {
        &self.seeds[0].ledger
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Loads the configured dataset and runs every repeat.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let (g, name) = cfg.dataset.load()?;
    run_on(&g, &name, cfg)
}

/// Runs every repeat of `cfg` on an already loaded graph. Repeats run in
/// parallel; results do not depend on scheduling.
pub fn run_on(g: &GraphBundle, dataset: &str, cfg: &ExperimentConfig) -> Result<RunReport> {
    let cfg = cfg.resolved();
    cfg.validate()?;
    let start = Instant::now();
    let seeds = (0..cfg.repeats)
        .into_par_iter()
        .map(|i| {
            let seed = cfg.repeat_seed(i);
            let (split, run) = train_seed(g, &cfg, seed)?;
            let ledger = run.ledger();
            Ok(SeedOutcome {
                seed,
                micro_f1: run.test_accuracy(g, &split)?,
                val_loss: run.selection_loss(),
                curves: run.curves(),
                ledger: ledger.summary(cfg.bits),
                clients: ledger
                    .clients()
                    .iter()
                    .map(|c| ClientBytes {
                        c2c: c.c2c_bytes,
                        c2s: c.c2s_bytes,
                    })
                    .collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let f1: Vec<f64> = seeds.iter().map(|s| s.micro_f1).collect();
    let (micro_f1_mean, micro_f1_std) = mean_std(&f1);
    let val_loss_mean = seeds.iter().map(|s| s.val_loss).sum::<f64>() / seeds.len() as f64;
    Ok(RunReport {
        label: cfg.label(),
        config: cfg,
        dataset: dataset.to_string(),
        micro_f1_mean,
        micro_f1_std,
        val_loss_mean,
        seeds,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{DatasetSource, Family};
    use crate::harness::synth::SynthSpec;

    fn small(arch: Family, protocol: Protocol) -> ExperimentConfig {
        ExperimentConfig::new(arch, protocol)
            .with_dataset(DatasetSource::Synth(SynthSpec::new(60, 3, 0.8, 8, 4.0, 5)))
            .with_rounds(6)
            .with_repeats(2)
            .with_hyper(0.05, 8)
    }

    #[test]
    fn mean_std_matches_hand_values() {
        assert_eq!(mean_std(&[0.5]), (0.5, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn report_echoes_resolved_config_and_reproduces() {
        for (arch, protocol) in [(Family::Mlp, Protocol::Retexo), (Family::Gcn, Protocol::Baseline), (Family::Sage, Protocol::Retexo)] {
            let a = run_experiment(&small(arch, protocol)).unwrap();
            assert_eq!(a.seeds.len(), 2);
            assert_eq!(a.config.lr, Some(0.05));
            let b = run_experiment(&a.config).unwrap();
            assert!(a.same_outcome(&b));
            let back = RunReport::from_json(&a.to_json()).unwrap();
            assert!(back.same_outcome(&a));
        }
    }

    #[test]
    fn mlp_has_no_client_to_client_traffic() {
        let r = run_experiment(&small(Family::Mlp, Protocol::Retexo).with_repeats(1)).unwrap();
        assert_eq!(r.ledger().c2c_bytes, 0);
        assert!(r.ledger().c2s_bytes > 0);
        assert_eq!(r.seeds[0].curves.len(), 1);
    }
}
