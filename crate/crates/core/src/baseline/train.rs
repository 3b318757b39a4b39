use std::collections::HashSet;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::cost::{charge_backward_pass, charge_forward_pass, charge_server_round, CostSchedule};
use super::plan::{ClientPlan, RoundPlan};
use crate::error::{Error, Result};
use crate::graph::{
    sample_round_clients, Adjacency, GraphBundle, SampledAdjacency, SamplerConfig, SplitSpec, ViewRole,
};
use crate::netsim::{Attribution, CommLedger};
use crate::nn::{GnnKind, Hop, ModelParams, ModelSpec, OptimizerState, SgdConfig};
use crate::retexo::{EarlyStopTracker, ModelCurve, StopDecision};
use crate::rng::mix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub kind: GnnKind,
    pub num_layers: usize,
    pub rounds: usize,
    pub hidden: usize,
    pub heads: usize,
    pub pool_dim: usize,
    pub residual: bool,
    pub sgd: SgdConfig,
    pub batch_cap: usize,
    pub sampler: SamplerConfig,
    pub patience: Option<usize>,
    pub attribution: Attribution,
    pub log_events: bool,
}

impl BaselineConfig {
    pub fn new(kind: GnnKind, num_layers: usize, lr: f64, hidden: usize) -> Self {
        BaselineConfig {
            kind,
            num_layers,
            rounds: 400,
            hidden,
            heads: 8,
            pool_dim: 512,
            residual: false,
            sgd: SgdConfig::new(lr),
            batch_cap: 1024,
            sampler: SamplerConfig::default(),
            patience: None,
            attribution: Attribution::Sender,
            log_events: false,
        }
    }

    pub fn seed(&self) -> u64 {
        self.sampler.seed
    }

    pub fn model_spec(&self, input_dim: usize, classes: usize) -> ModelSpec {
        ModelSpec::gnn(self.kind, input_dim, self.hidden, classes, self.num_layers)
            .with_heads(self.heads)
            .with_pool_dim(self.pool_dim)
            .with_residual(self.residual)
    }

    /// Seed of the initial model.
    pub fn init_seed(&self) -> u64 {
        mix(&[self.seed(), 0x6261_7365])
    }
}

const PHASE_ROUND: u64 = 0;
const PHASE_EVAL: u64 = 1;

/// Neighbour-sampling tag of a round on a given view. Train and validation
/// clients of one round share a view's samples, so the plan and the
/// computation agree.
pub fn round_tag(role: ViewRole, round: usize) -> u64 {
    let view = match role {
        ViewRole::Train => 0u64,
        ViewRole::Val => 1,
        ViewRole::Test => 2,
    };
    (view << 60) | (PHASE_ROUND << 56) | round as u64
}

fn eval_tag() -> u64 {
    (2u64 << 60) | (PHASE_EVAL << 56)
}

/// Node lists per layer and the hops that wire them, for computing the
/// outputs of `targets` with `k` layers. Every level is a sorted id list
/// containing the level above it.
pub fn computation_levels(targets: &[usize], k: usize, adj: &mut SampledAdjacency<'_>) -> Result<(Vec<usize>, Vec<Hop>)> {
    let mut levels: Vec<Vec<usize>> = vec![targets.to_vec()];
    for _ in 0..k {
        let top = levels.last().unwrap();
        let mut below: Vec<usize> = top.clone();
        for &w in top {
            below.extend_from_slice(adj.get(w));
        }
        below.sort_unstable();
        below.dedup();
        levels.push(below);
    }
    levels.reverse();
    let mut hops = Vec::with_capacity(k);
    for l in 0..k {
        let (src, dst) = (&levels[l], &levels[l + 1]);
        let pos = |v: usize| src.binary_search(&v).expect("levels are nested");
        let self_idx = dst.iter().map(|&v| pos(v)).collect();
        let lists = dst
            .iter()
            .map(|&v| adj.get(v).iter().map(|&u| pos(u)).collect())
            .collect();
        hops.push(Hop::new(src.len(), self_idx, lists)?);
    }
    Ok((levels.swap_remove(0), hops))
}

fn batch(g: &GraphBundle, targets: &[usize], k: usize, adj: &mut SampledAdjacency<'_>) -> Result<(Array2<f32>, Vec<Hop>, Vec<usize>)> {
    let (inputs, hops) = computation_levels(targets, k, adj)?;
    let labels = targets.iter().map(|&v| g.labels[v]).collect();
    Ok((g.features.select(Axis(0), &inputs), hops, labels))
}

/// Samples clients for `round` and expands their neighbourhoods.
pub fn plan_round(
    g: &GraphBundle,
    split: &SplitSpec,
    cfg: &BaselineConfig,
    round: usize,
) -> RoundPlan {
    let train_adj = split.view_adjacency(g, ViewRole::Train);
    let val_adj = split.view_adjacency(g, ViewRole::Val);
    plan_on(&train_adj, &val_adj, split, cfg, round)
}

fn plan_on(train_adj: &Adjacency, val_adj: &Adjacency, split: &SplitSpec, cfg: &BaselineConfig, round: usize) -> RoundPlan {
    let (train, val) = sample_round_clients(
        &split.train_ids,
        &split.val_ids,
        cfg.batch_cap,
        cfg.seed(),
        0,
        round as u64,
    );
    let mut s_tr = SampledAdjacency::new(train_adj, cfg.sampler, round_tag(ViewRole::Train, round));
    let mut s_val = SampledAdjacency::new(val_adj, cfg.sampler, round_tag(ViewRole::Val, round));
    let mut clients: Vec<ClientPlan> = train
        .iter()
        .map(|&v| ClientPlan::build(v, true, cfg.num_layers, &mut s_tr))
        .collect();
    clients.extend(
        val.iter()
            .map(|&v| ClientPlan::build(v, false, cfg.num_layers, &mut s_val)),
    );
    RoundPlan {
        round,
        train_clients: train,
        val_clients: val,
        clients,
    }
}

/// A finished end-to-end run.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineRun {
    pub config: BaselineConfig,
    /// Snapshot with the best validation loss.
    pub model: ModelParams,
    /// Model after every applied update, starting with the initial one.
    pub trajectory: Vec<ModelParams>,
    pub curve: ModelCurve,
    pub ledger: CommLedger,
}

/// Options that only matter to callers inspecting a run.
#[derive(Debug, Clone, Copy, Default)]
pub struct TraceOptions {
    pub keep_trajectory: bool,
}

pub fn train_baseline(g: &GraphBundle, split: &SplitSpec, cfg: &BaselineConfig) -> Result<BaselineRun> {
    train_baseline_traced(g, split, cfg, TraceOptions::default())
}

pub fn train_baseline_traced(
    g: &GraphBundle,
    split: &SplitSpec,
    cfg: &BaselineConfig,
    trace: TraceOptions,
) -> Result<BaselineRun> {
    split.validate(g.num_nodes())?;
    if !(cfg.sgd.lr > 0.0) || cfg.hidden == 0 || cfg.batch_cap == 0 {
        return Err(Error::Config(
            "learning rate, hidden size and batch cap must be positive".into(),
        ));
    }
    let train_adj = split.view_adjacency(g, ViewRole::Train);
    let val_adj = split.view_adjacency(g, ViewRole::Val);
    let mut model = ModelParams::init(cfg.model_spec(g.feature_dim(), g.num_classes), cfg.init_seed())?;
    let schedule = CostSchedule::for_model(&model);
    let mut opt = OptimizerState::new(cfg.sgd);
    let mut tracker = EarlyStopTracker::new(cfg.patience);
    let mut ledger = CommLedger::new(cfg.attribution).with_clients(g.num_nodes());
    if cfg.log_events {
        ledger = ledger.with_log();
    }
    let mut feature_cache = HashSet::new();
    let mut best = model.clone();
    let mut trajectory = Vec::new();
    if trace.keep_trajectory {
        trajectory.push(model.clone());
    }
    let mut curve = ModelCurve {
        model_index: 0,
        rounds_run: 0,
        best_round: None,
        best_val_loss: f64::INFINITY,
        val_loss: Vec::new(),
        val_acc: Vec::new(),
        train_loss: Vec::new(),
    };

    for r in 0..cfg.rounds {
        let plan = plan_on(&train_adj, &val_adj, split, cfg, r);
        if plan.train_clients.is_empty() {
            return Err(Error::Config("no train clients were sampled".into()));
        }
        let step = r as u64;
        charge_server_round(
            &plan.train_clients,
            &plan.val_clients,
            schedule.model_floats,
            step,
            &mut ledger,
        );
        for c in &plan.clients {
            charge_forward_pass(c, &schedule, step, &mut ledger, &mut feature_cache);
            if c.train {
                charge_backward_pass(c, &schedule, step, &mut ledger);
            }
        }

        let mut s_tr = SampledAdjacency::new(&train_adj, cfg.sampler, round_tag(ViewRole::Train, r));
        let (x, hops, labels) = batch(g, &plan.train_clients, cfg.num_layers, &mut s_tr)?;
        let (train_loss, grads, _) = model.loss_and_grad_batch(x, &hops, &labels)?;

        let selection_loss = if plan.val_clients.is_empty() {
            train_loss as f64
        } else {
            let mut s_val = SampledAdjacency::new(&val_adj, cfg.sampler, round_tag(ViewRole::Val, r));
            let (x, hops, labels) = batch(g, &plan.val_clients, cfg.num_layers, &mut s_val)?;
            let (loss, correct) = model.evaluate_batch(x, &hops, &labels)?;
            curve.val_acc.push(correct as f64 / labels.len() as f64);
            loss as f64
        };
        curve.val_loss.push(selection_loss);
        curve.train_loss.push(train_loss as f64);
        if tracker.observe(r, selection_loss) {
            best = model.clone();
        }
        opt.step(&mut model.params, &grads);
        if trace.keep_trajectory {
            trajectory.push(model.clone());
        }
        curve.rounds_run = r + 1;
        if tracker.decide(r) == StopDecision::Stop {
            break;
        }
    }
    curve.best_round = tracker.best_round;
    curve.best_val_loss = tracker.best_loss;
    if cfg.rounds == 0 {
        best = model;
    }
    Ok(BaselineRun {
        config: cfg.clone(),
        model: best,
        trajectory,
        curve,
        ledger,
    })
}

impl BaselineRun {
    pub fn logits(&self, g: &GraphBundle, split: &SplitSpec, ids: &[usize]) -> Result<Array2<f32>> {
        let adj = split.view_adjacency(g, ViewRole::Test);
        let mut s = SampledAdjacency::new(&adj, self.config.sampler, eval_tag());
        let (x, hops, _) = batch(g, ids, self.config.num_layers, &mut s)?;
        self.model.logits(x, &hops)
    }

    pub fn test_accuracy(&self, g: &GraphBundle, split: &SplitSpec) -> Result<f64> {
        if split.test_ids.is_empty() {
            return Ok(0.0);
        }
        let logits = self.logits(g, split, &split.test_ids)?;
        let hits = logits
            .rows()
            .into_iter()
            .zip(&split.test_ids)
            .filter(|(row, &v)| {
                let pred = row
                    .iter()
                    .enumerate()
                    .fold((0, f32::NEG_INFINITY), |b, (i, &x)| if x > b.1 { (i, x) } else { b })
                    .0;
                pred == g.labels[v]
            })
            .count();
        Ok(hits as f64 / split.test_ids.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levels_nest_and_wire() {
        let adj = Adjacency::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4)]).unwrap().0;
        let mut s = SampledAdjacency::new(&adj, SamplerConfig::default(), 0);
        let (inputs, hops) = computation_levels(&[2], 2, &mut s).unwrap();
        assert_eq!(inputs, vec![0, 1, 2, 3, 4]);
        assert_eq!(hops[0].len(), 3);
        assert_eq!(hops[1].len(), 1);
        assert_eq!(hops[1].neighbors(0), &[0, 2]);
    }
}
