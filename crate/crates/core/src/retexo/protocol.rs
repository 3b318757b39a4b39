use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::cache::EmbeddingCache;
use super::early_stop::{EarlyStopTracker, StopDecision};
use crate::error::{Error, Result};
use crate::graph::{
    sample_from, sample_round_clients, Adjacency, GraphBundle, SamplerConfig, SplitSpec, ViewRole,
};
use crate::netsim::{Attribution, CommLedger, ContactSchedule, Message, MessageKind};
use crate::nn::{
    forward_mlp, forward_single, ArchContext, GnnKind, Hop, ModelParams, ModelSpec, OptimizerState,
    SgdConfig,
};
use crate::rng::mix;

fn full_keep() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetexoConfig {
    /// Aggregation used by every model after the first.
    pub kind: GnnKind,
    /// Number of message-passing rounds `K`; `K + 1` models are trained.
    pub num_layers: usize,
    pub rounds: usize,
    pub hidden: usize,
    pub heads: usize,
    pub pool_dim: usize,
    pub residual: bool,
    pub sgd: SgdConfig,
    pub batch_cap: usize,
    pub max_neighbors: usize,
    pub contact: ContactSchedule,
    /// Fraction of its reachable neighbours each node hears from in a
    /// message-passing round, in (0, 1].
    #[serde(default = "full_keep")]
    pub edge_keep: f64,
    pub patience: Option<usize>,
    pub seed: u64,
    pub attribution: Attribution,
    pub log_events: bool,
}

impl RetexoConfig {
    pub fn new(kind: GnnKind, num_layers: usize, lr: f64, hidden: usize) -> Self {
        RetexoConfig {
            kind,
            num_layers,
            rounds: 400,
            hidden,
            heads: 8,
            pool_dim: 512,
            residual: false,
            sgd: SgdConfig::new(lr),
            batch_cap: 1024,
            max_neighbors: 25,
            contact: ContactSchedule::always(),
            edge_keep: 1.0,
            patience: None,
            seed: 0,
            attribution: Attribution::Sender,
            log_events: false,
        }
    }

    fn sampler(&self) -> SamplerConfig {
        SamplerConfig {
            max_neighbors_per_hop: self.max_neighbors,
            edge_keep_fraction: 1.0,
            seed: self.seed,
        }
    }

    /// Spec of model `m` for a graph with `input_dim` features and
    /// `classes` labels.
    pub fn model_spec(&self, m: usize, input_dim: usize, classes: usize) -> ModelSpec {
        if m == 0 {
            ModelSpec::mlp(input_dim, self.hidden, classes)
        } else {
            ModelSpec::retexo_block(self.kind, classes, self.hidden, classes)
                .with_heads(self.heads)
                .with_pool_dim(self.pool_dim)
                .with_residual(self.residual && m < self.num_layers)
        }
    }

    fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.batch_cap == 0 || self.max_neighbors == 0 {
            return Err(Error::Config(
                "hidden size, batch cap and neighbour cap must be positive".into(),
            ));
        }
        if !(self.edge_keep > 0.0 && self.edge_keep <= 1.0) {
            return Err(Error::Config(format!("edge_keep must lie in (0, 1], got {}", self.edge_keep)));
        }
        if !(self.sgd.lr > 0.0) {
            return Err(Error::Config(format!("learning rate must be > 0, got {}", self.sgd.lr)));
        }
        Ok(())
    }
}

/// Server-side bookkeeping of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct ServerState {
    pub train_ids: Vec<usize>,
    pub val_ids: Vec<usize>,
    pub test_ids: Vec<usize>,
    pub k: usize,
    pub rounds: usize,
    /// Model currently being trained.
    pub m: usize,
    pub round: usize,
    pub tracker: EarlyStopTracker,
    /// Protocol step counter; every message-passing round and every
    /// training round gets its own step.
    pub step: u64,
}

impl ServerState {
    fn next_step(&mut self) -> u64 {
        let s = self.step;
        self.step += 1;
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    Train,
    Validation,
}

/// What the server asks a sampled client to do in one round.
#[derive(Debug, Clone, Copy)]
pub struct TrainTask<'a> {
    pub kind: TaskKind,
    pub round: u64,
    pub model: &'a ModelParams,
}

impl TrainTask<'_> {
    /// Charges the exchange: model down, then the updated model (train) or
    /// a `(loss, correct)` pair (validation) back up.
    pub fn charge(&self, client: usize, ledger: &mut CommLedger) {
        let floats = self.model.num_floats() as u64;
        ledger.record(Message::down(self.round, client, MessageKind::ServerModel, floats));
        match self.kind {
            TaskKind::Train => ledger.record(Message::up(self.round, client, MessageKind::GradUp, floats)),
            TaskKind::Validation => {
                ledger.record(Message::up(self.round, client, MessageKind::ValReport, 2))
            }
        }
    }
}

/// One client's local view, as held on its device.
#[derive(Debug, Clone, Copy)]
pub struct ClientState<'a> {
    pub id: usize,
    pub neighbors: &'a [usize],
    pub label: usize,
    pub features: ndarray::ArrayView1<'a, f32>,
    pub cache: &'a EmbeddingCache,
}

/// Per-model training trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCurve {
    pub model_index: usize,
    pub rounds_run: usize,
    pub best_round: Option<usize>,
    pub best_val_loss: f64,
    pub val_loss: Vec<f64>,
    pub val_acc: Vec<f64>,
    pub train_loss: Vec<f64>,
}

const PHASE_TRAIN: u64 = 0;
const PHASE_MP: u64 = 1;
const PHASE_VAL: u64 = 2;
const PHASE_EVAL: u64 = 3;
const PHASE_AVAIL: u64 = 4;

fn tag(view: u64, phase: u64, m: usize, r: usize) -> u64 {
    (view << 60) | (phase << 56) | ((m as u64) << 32) | r as u64
}

#[derive(Debug, Clone, PartialEq)]
struct View {
    id: u64,
    adj: Adjacency,
    members: Vec<usize>,
    cache: EmbeddingCache,
}

/// A finished run: the frozen models, the ledger and the embeddings each
/// client cached along the way.
#[derive(Debug, Clone, PartialEq)]
pub struct RetexoRun {
    pub config: RetexoConfig,
    pub models: Vec<ModelParams>,
    pub curves: Vec<ModelCurve>,
    pub ledger: CommLedger,
    pub server: ServerState,
    views: Vec<View>,
    val_view: usize,
}

struct Ctx<'a> {
    g: &'a GraphBundle,
    cfg: &'a RetexoConfig,
}

impl Ctx<'_> {
    /// Inputs and wiring for `clients` under model `m` in `view`.
    fn batch(&self, view: &View, m: usize, clients: &[usize], tag: u64) -> Result<(Array2<f32>, Vec<Hop>)> {
        if m == 0 {
            let x = self.g.features.select(Axis(0), clients);
            return Ok((x, vec![Hop::identity(clients.len()), Hop::identity(clients.len())]));
        }
        let x = view.cache.level(m)?.clone();
        let sampler = self.cfg.sampler();
        let lists = clients
            .iter()
            .map(|&v| Ok(sample_from(view.cache.received(m, v)?, &sampler, v, tag)))
            .collect::<Result<Vec<_>>>()?;
        let hop = Hop::new(x.nrows(), clients.to_vec(), lists)?;
        Ok((x, vec![hop, Hop::identity(clients.len())]))
    }

    /// Who each member of `view` hears from in exchange `m`: the
    /// neighbours it can reach at `contact_round`, thinned to the
    /// configured keep fraction. Indexed by receiver.
    fn senders(&self, view: &View, m: usize, contact_round: u64) -> Vec<Vec<usize>> {
        let keep = SamplerConfig {
            max_neighbors_per_hop: usize::MAX,
            edge_keep_fraction: self.cfg.edge_keep,
            seed: self.cfg.seed,
        };
        let mut received = vec![Vec::new(); self.g.num_nodes()];
        for &u in &view.members {
            let reachable: Vec<usize> = view
                .adj
                .neighbors(u)
                .iter()
                .copied()
                .filter(|&v| self.cfg.contact.contact(v, u, contact_round))
                .collect();
            received[u] = sample_from(&reachable, &keep, u, tag(view.id, PHASE_AVAIL, m, 0));
        }
        received
    }

    /// `Q^m` for every node of `view`, computed with `models[m - 1]`.
    fn level(&self, view: &View, models: &[ModelParams], m: usize, tag: u64) -> Result<Array2<f32>> {
        let all: Vec<usize> = (0..self.g.num_nodes()).collect();
        let (x, hops) = self.batch(view, m - 1, &all, tag)?;
        models[m - 1].logits(x, &hops)
    }
}

/// Broadcasts `MLP_{m-1}`, lets every client compute `Q^m` and send it to
/// each neighbour it can reach, and caches what arrives.
pub fn message_passing_round(run: &mut RetexoRun, g: &GraphBundle, m: usize) -> Result<()> {
    if m == 0 || m > run.models.len() {
        return Err(Error::Protocol(format!(
            "message-passing round {m} needs {m} trained models, have {}",
            run.models.len()
        )));
    }
    let step = run.server.next_step();
    let sync_floats = run.models[m - 1].num_floats() as u64;
    for &v in &run.views[run.val_view].members {
        run.ledger
            .record(Message::down(step, v, MessageKind::Sync, sync_floats));
    }
    let ctx = Ctx { g, cfg: &run.config };
    let out_dim = g.num_classes as u64;
    for view in run.views.iter_mut() {
        let q = ctx.level(view, &run.models, m, tag(view.id, PHASE_MP, m, 0))?;
        let received = ctx.senders(view, m, step);
        let mut sent: Vec<Message> = Vec::new();
        for (u, from) in received.iter().enumerate() {
            sent.extend(from.iter().map(|&v| Message::c2c(step, v, u, MessageKind::Embedding, out_dim)));
        }
        run.ledger.record_batch(sent);
        view.cache.write(m, q, received)?;
    }
    Ok(())
}

/// Trains model `m` with FedSGD for up to `R` rounds and returns the
/// snapshot with the best validation loss.
pub fn federated_learning(run: &mut RetexoRun, g: &GraphBundle, m: usize) -> Result<(ModelParams, ModelCurve)> {
    let cfg = run.config.clone();
    let ctx = Ctx { g, cfg: &cfg };
    let spec = cfg.model_spec(m, g.feature_dim(), g.num_classes);
    let mut model = ModelParams::init(spec, mix(&[cfg.seed, m as u64]))?;
    let mut opt = OptimizerState::new(cfg.sgd);
    let mut best = model.clone();
    run.server.m = m;
    run.server.tracker = EarlyStopTracker::new(cfg.patience);
    let mut curve = ModelCurve {
        model_index: m,
        rounds_run: 0,
        best_round: None,
        best_val_loss: f64::INFINITY,
        val_loss: Vec::new(),
        val_acc: Vec::new(),
        train_loss: Vec::new(),
    };
    for r in 0..cfg.rounds {
        run.server.round = r;
        let step = run.server.next_step();
        let (train, val) = sample_round_clients(
            &run.server.train_ids,
            &run.server.val_ids,
            cfg.batch_cap,
            cfg.seed,
            m as u64,
            r as u64,
        );
        if train.is_empty() {
            return Err(Error::Config("no train clients were sampled".into()));
        }
        let train_task = TrainTask {
            kind: TaskKind::Train,
            round: step,
            model: &model,
        };
        let val_task = TrainTask {
            kind: TaskKind::Validation,
            ..train_task
        };
        for &v in &train {
            train_task.charge(v, &mut run.ledger);
        }
        for &v in &val {
            val_task.charge(v, &mut run.ledger);
        }

        let (x, hops) = ctx.batch(&run.views[0], m, &train, tag(0, PHASE_TRAIN, m, r))?;
        let labels: Vec<usize> = train.iter().map(|&v| g.labels[v]).collect();
        let (train_loss, grads, _) = model.loss_and_grad_batch(x, &hops, &labels)?;

        let selection_loss = if val.is_empty() {
            train_loss as f64
        } else {
            let view = &run.views[run.val_view];
            let (x, hops) = ctx.batch(view, m, &val, tag(view.id, PHASE_VAL, m, r))?;
            let labels: Vec<usize> = val.iter().map(|&v| g.labels[v]).collect();
            let (loss, correct) = model.evaluate_batch(x, &hops, &labels)?;
            curve.val_acc.push(correct as f64 / val.len() as f64);
            loss as f64
        };
        curve.val_loss.push(selection_loss);
        curve.train_loss.push(train_loss as f64);
        if run.server.tracker.observe(r, selection_loss) {
            best = model.clone();
        }
        opt.step(&mut model.params, &grads);
        curve.rounds_run = r + 1;
        if run.server.tracker.decide(r) == StopDecision::Stop {
            break;
        }
    }
    curve.best_round = run.server.tracker.best_round;
    curve.best_val_loss = run.server.tracker.best_loss;
    if cfg.rounds == 0 {
        best = model;
    }
    Ok((best, curve))
}

/// Trains `MLP_0 .. MLP_K` in sequence, with one message-passing round
/// before every model after the first.
pub fn train_retexo(g: &GraphBundle, split: &SplitSpec, cfg: &RetexoConfig) -> Result<RetexoRun> {
    cfg.validate()?;
    split.validate(g.num_nodes())?;
    let mut views = vec![View {
        id: 0,
        adj: split.view_adjacency(g, ViewRole::Train),
        members: split.view_members(g.num_nodes(), ViewRole::Train),
        cache: EmbeddingCache::new(),
    }];
    let mut val_view = 0;
    if split.inductive_graphs.is_some() {
        views.push(View {
            id: 1,
            adj: split.view_adjacency(g, ViewRole::Val),
            members: split.view_members(g.num_nodes(), ViewRole::Val),
            cache: EmbeddingCache::new(),
        });
        val_view = 1;
    }
    let mut ledger = CommLedger::new(cfg.attribution).with_clients(g.num_nodes());
    if cfg.log_events {
        ledger = ledger.with_log();
    }
    let mut run = RetexoRun {
        config: cfg.clone(),
        models: Vec::with_capacity(cfg.num_layers + 1),
        curves: Vec::new(),
        ledger,
        server: ServerState {
            train_ids: split.train_ids.clone(),
            val_ids: split.val_ids.clone(),
            test_ids: split.test_ids.clone(),
            k: cfg.num_layers,
            rounds: cfg.rounds,
            m: 0,
            round: 0,
            tracker: EarlyStopTracker::new(cfg.patience),
            step: 0,
        },
        views,
        val_view,
    };
    for m in 0..=cfg.num_layers {
        if m > 0 {
            message_passing_round(&mut run, g, m)?;
        }
        let (model, curve) = federated_learning(&mut run, g, m)?;
        run.models.push(model);
        run.curves.push(curve);
    }
    Ok(run)
}

impl RetexoRun {
    /// Cached embeddings of the training view.
    pub fn cache(&self) -> &EmbeddingCache {
        &self.views[0].cache
    }

    pub fn client_state<'a>(&'a self, g: &'a GraphBundle, v: usize) -> ClientState<'a> {
        ClientState {
            id: v,
            neighbors: self.views[0].adj.neighbors(v),
            label: g.labels[v],
            features: g.features.row(v),
            cache: &self.views[0].cache,
        }
    }

    /// Recomputes `Q^m_v` on the client alone, from its own cache, exactly
    /// as it did during message-passing round `m`.
    pub fn compute_embedding(&self, client: &ClientState<'_>, m: usize) -> Result<Vec<f32>> {
        if m == 0 || m > self.models.len() {
            return Err(Error::Protocol(format!("model {} is not available", m.saturating_sub(1))));
        }
        if m == 1 {
            let x = client.features.to_vec();
            return Ok(forward_mlp(&self.models[0], &x)?.0);
        }
        let q = client.cache.level(m - 1)?;
        let sampled = sample_from(
            client.cache.received(m - 1, client.id)?,
            &self.config.sampler(),
            client.id,
            tag(0, PHASE_MP, m, 0),
        );
        let neighbors = sampled.iter().map(|&u| q.row(u).to_vec()).collect();
        forward_single(
            &self.models[m - 1],
            &q.row(client.id).to_vec(),
            &ArchContext::with_neighbors(neighbors),
        )
    }

    /// Final-model logits for `ids`. Inductive runs first replay the
    /// message-passing rounds on the full test graph; that inference traffic
    /// is not part of the training ledger.
    pub fn logits(&self, g: &GraphBundle, split: &SplitSpec, ids: &[usize]) -> Result<Array2<f32>> {
        let k = self.models.len() - 1;
        let ctx = Ctx { g, cfg: &self.config };
        let view = if split.inductive_graphs.is_some() {
            let mut view = View {
                id: 2,
                adj: split.view_adjacency(g, ViewRole::Test),
                members: split.view_members(g.num_nodes(), ViewRole::Test),
                cache: EmbeddingCache::new(),
            };
            for m in 1..=k {
                let q = ctx.level(&view, &self.models, m, tag(view.id, PHASE_MP, m, 0))?;
                let received = ctx.senders(&view, m, u64::MAX - m as u64);
                view.cache.write(m, q, received)?;
            }
            view
        } else {
            self.views[0].clone()
        };
        let (x, hops) = ctx.batch(&view, k, ids, tag(view.id, PHASE_EVAL, k, 0))?;
        self.models[k].logits(x, &hops)
    }

    pub fn predict(&self, g: &GraphBundle, split: &SplitSpec, ids: &[usize]) -> Result<Vec<usize>> {
        let logits = self.logits(g, split, ids)?;
        Ok(logits
            .rows()
            .into_iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .fold((0, f32::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b })
                    .0
            })
            .collect())
    }

    /// Accuracy (micro-F1) on the split's test nodes.
    pub fn test_accuracy(&self, g: &GraphBundle, split: &SplitSpec) -> Result<f64> {
        if split.test_ids.is_empty() {
            return Ok(0.0);
        }
        let pred = self.predict(g, split, &split.test_ids)?;
        let hits = pred
            .iter()
            .zip(&split.test_ids)
            .filter(|&(&p, &v)| p == g.labels[v])
            .count();
        Ok(hits as f64 / split.test_ids.len() as f64)
    }
}
