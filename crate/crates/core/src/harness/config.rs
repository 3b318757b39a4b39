use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::synth::{cora_like, synth_graph, CoraLikeSpec, SynthSpec};
use crate::baseline::BaselineConfig;
use crate::error::{Error, Result};
use crate::graph::{
    make_inductive_split, make_per_class_split, make_transductive_split, GraphBundle, SamplerConfig,
    SplitSpec,
};
use crate::netsim::Attribution;
use crate::nn::{GnnKind, SgdConfig};
use crate::retexo::RetexoConfig;

/// Environment variable naming a directory with a real Cora bundle.
pub const CORA_DIR_ENV: &str = "RETEXO_CORA_DIR";

/// Where the graph comes from.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum DatasetSource {
    /// The bundle in `$RETEXO_CORA_DIR` when set, the Cora-shaped
    /// surrogate otherwise.
    #[default]
    Cora,
    Bundle { path: PathBuf },
    Synth(SynthSpec),
    CoraLike(CoraLikeSpec),
}

impl DatasetSource {
    /// Loads or generates the graph, with a label describing what was used.
    pub fn load(&self) -> Result<(GraphBundle, String)> {
        match self {
            DatasetSource::Cora => match std::env::var_os(CORA_DIR_ENV) {
                Some(dir) => {
                    let path = PathBuf::from(dir);
                    let g = GraphBundle::load(&path)?;
                    Ok((g, format!("cora:{}", path.display())))
                }
                None => Ok((cora_like(&CoraLikeSpec::default())?, "cora-surrogate".into())),
            },
            DatasetSource::Bundle { path } => Ok((GraphBundle::load(path)?, format!("bundle:{}", path.display()))),
            DatasetSource::Synth(spec) => Ok((synth_graph(spec)?, format!("synth:{}n", spec.nodes))),
            DatasetSource::CoraLike(spec) => Ok((cora_like(spec)?, "cora-like".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Mlp,
    Gcn,
    Sage,
    Gat,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Mlp, Family::Gcn, Family::Sage, Family::Gat];

    pub fn name(self) -> &'static str {
        match self {
            Family::Mlp => "mlp",
            Family::Gcn => "gcn",
            Family::Sage => "sage",
            Family::Gat => "gat",
        }
    }

    pub fn kind(self) -> Option<GnnKind> {
        match self {
            Family::Mlp => None,
            Family::Gcn => Some(GnnKind::Gcn),
            Family::Sage => Some(GnnKind::Sage),
            Family::Gat => Some(GnnKind::Gat),
        }
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown architecture {s:?} (expected mlp, gcn, sage or gat)")))
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Baseline,
    #[default]
    Retexo,
}

impl FromStr for Protocol {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Protocol::Baseline),
            "retexo" => Ok(Protocol::Retexo),
            _ => Err(Error::Config(format!("unknown protocol {s:?} (expected baseline or retexo)"))),
        }
    }
}

/// How nodes are divided into train, validation and test sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum SplitConfig {
    Transductive { train_frac: f64, val_frac: f64 },
    PerClass { per_class: usize, val_total: usize },
    Inductive,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig::Transductive {
            train_frac: 0.1,
            val_frac: 0.1,
        }
    }
}

impl SplitConfig {
    pub fn make(&self, g: &GraphBundle, seed: u64) -> Result<SplitSpec> {
        match *self {
            SplitConfig::Transductive { train_frac, val_frac } => make_transductive_split(g, train_frac, val_frac, seed),
            SplitConfig::PerClass { per_class, val_total } => make_per_class_split(g, per_class, val_total, seed),
            SplitConfig::Inductive => make_inductive_split(g, seed),
        }
    }

    pub fn is_inductive(&self) -> bool {
        matches!(self, SplitConfig::Inductive)
    }
}

/// Best learning rate and hidden size for a family, per training mode.
pub fn preset(family: Family, protocol: Protocol, inductive: bool) -> (f64, usize) {
    let retexo = protocol == Protocol::Retexo;
    match (inductive, family, retexo) {
        (_, Family::Mlp, _) => (0.1, 256),
        (false, Family::Gcn, false) => (0.075, 128),
        (false, Family::Gcn, true) => (0.005, 256),
        (false, Family::Sage, false) => (0.025, 256),
        (false, Family::Sage, true) => (0.005, 256),
        (false, Family::Gat, false) => (0.1, 256),
        (false, Family::Gat, true) => (0.005, 256),
        (true, Family::Gcn, false) => (0.05, 128),
        (true, Family::Gcn, true) => (0.005, 128),
        (true, Family::Sage, false) => (0.025, 256),
        (true, Family::Sage, true) => (0.005, 256),
        (true, Family::Gat, false) => (0.1, 64),
        (true, Family::Gat, true) => (0.005, 128),
    }
}

/// One experiment. Every field has a default, so `{}` is a valid config
/// file; `lr` and `hidden` fall back to the family presets when absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub arch: Family,
    pub protocol: Protocol,
    /// GNN depth `K`; Retexo trains `K + 1` models.
    pub num_layers: usize,
    pub rounds: usize,
    pub lr: Option<f64>,
    pub hidden: Option<usize>,
    pub heads: usize,
    pub pool_dim: usize,
    pub batch_cap: usize,
    pub max_neighbors: usize,
    pub momentum: f64,
    pub weight_decay: f64,
    pub patience: Option<usize>,
    pub edge_keep: f64,
    pub residual: bool,
    pub seed: u64,
    pub repeats: usize,
    pub split: SplitConfig,
    pub attribution: Attribution,
    pub log_events: bool,
    /// Also report megabits.
    pub bits: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetSource::default(),
            arch: Family::Gcn,
            protocol: Protocol::Retexo,
            num_layers: 2,
            rounds: 400,
            lr: None,
            hidden: None,
            heads: 8,
            pool_dim: 512,
            batch_cap: 1024,
            max_neighbors: 25,
            momentum: 0.9,
            weight_decay: 5e-4,
            patience: None,
            edge_keep: 1.0,
            residual: false,
            seed: 0,
            repeats: 5,
            split: SplitConfig::default(),
            attribution: Attribution::Sender,
            log_events: false,
            bits: false,
        }
    }
}

/// Patience used when early stopping is switched on without a value.
pub const DEFAULT_PATIENCE: usize = 30;

impl ExperimentConfig {
    pub fn new(arch: Family, protocol: Protocol) -> Self {
        ExperimentConfig {
            arch,
            protocol,
            ..Default::default()
        }
    }

    /// Deep residual setting for graphs whose edges mostly join different
    /// classes: five layers, 1000 rounds and a 50/25/25 split.
    pub fn heterophilous(arch: Family, protocol: Protocol) -> Self {
        ExperimentConfig {
            num_layers: 5,
            rounds: 1000,
            residual: true,
            split: SplitConfig::Transductive {
                train_frac: 0.5,
                val_frac: 0.25,
            },
            ..ExperimentConfig::new(arch, protocol)
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config JSON: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn with_rounds(mut self, rounds: usize) -> Self {
        self.rounds = rounds;
        self
    }

    pub fn with_dataset(mut self, dataset: DatasetSource) -> Self {
        self.dataset = dataset;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_repeats(mut self, repeats: usize) -> Self {
        self.repeats = repeats;
        self
    }

    pub fn with_hyper(mut self, lr: f64, hidden: usize) -> Self {
        self.lr = Some(lr);
        self.hidden = Some(hidden);
        self
    }

    /// Same config with `lr` and `hidden` filled in from the presets.
    pub fn resolved(&self) -> Self {
        let (lr, hidden) = preset(self.arch, self.protocol, self.split.is_inductive());
        ExperimentConfig {
            lr: Some(self.lr.unwrap_or(lr)),
            hidden: Some(self.hidden.unwrap_or(hidden)),
            ..self.clone()
        }
    }

    /// Display name such as `gcn`, `retexo-gcn` or `mlp`.
    pub fn label(&self) -> String {
        match (self.arch, self.protocol) {
            (Family::Mlp, _) => "mlp".into(),
            (a, Protocol::Baseline) => a.name().into(),
            (a, Protocol::Retexo) => format!("retexo-{a}"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let r = self.resolved();
        let (lr, hidden) = (r.lr.unwrap(), r.hidden.unwrap());
        if !(lr > 0.0 && lr.is_finite()) {
            return bad(format!("lr must be a positive number, got {lr}"));
        }
        if hidden == 0 || self.batch_cap == 0 || self.max_neighbors == 0 {
            return bad("hidden, batch_cap and max_neighbors must be at least 1".into());
        }
        if self.repeats == 0 {
            return bad("repeats must be at least 1".into());
        }
        if !(self.edge_keep > 0.0 && self.edge_keep <= 1.0) {
            return bad(format!("edge_keep must lie in (0, 1], got {}", self.edge_keep));
        }
        if !(0.0..1.0).contains(&self.momentum) || !(self.weight_decay >= 0.0) {
            return bad("momentum must lie in [0, 1) and weight_decay must be >= 0".into());
        }
        if self.arch != Family::Mlp && self.num_layers == 0 {
            return bad("a graph architecture needs num_layers >= 1".into());
        }
        if self.arch == Family::Gat && self.heads == 0 {
            return bad("gat needs heads >= 1".into());
        }
        if self.arch == Family::Gat
            && !(self.protocol == Protocol::Baseline && self.num_layers == 1)
            && hidden % self.heads != 0 {
            return bad(format!("gat hidden size {hidden} is not divisible by {} heads", self.heads));
        }
        if self.patience == Some(0) {
            return bad("patience must be at least 1 when set".into());
        }
        Ok(())
    }

    /// Seed of repeat `i`.
    pub fn repeat_seed(&self, i: usize) -> u64 {
        self.seed.wrapping_add(i as u64)
    }

    fn sgd(&self) -> SgdConfig {
        SgdConfig {
            lr: self.resolved().lr.unwrap(),
            momentum: self.momentum,
            weight_decay: self.weight_decay,
        }
    }

    /// Protocol config for one seed. Plain MLPs run as a Retexo job with
    /// no message passing.
    pub fn retexo_config(&self, seed: u64) -> RetexoConfig {
        let r = self.resolved();
        let (kind, k) = match self.arch.kind() {
            Some(kind) => (kind, self.num_layers),
            None => (GnnKind::Gcn, 0),
        };
        let mut cfg = RetexoConfig::new(kind, k, r.lr.unwrap(), r.hidden.unwrap());
        cfg.rounds = self.rounds;
        cfg.heads = self.heads;
        cfg.pool_dim = self.pool_dim;
        cfg.residual = self.residual;
        cfg.sgd = self.sgd();
        cfg.batch_cap = self.batch_cap;
        cfg.max_neighbors = self.max_neighbors;
        cfg.edge_keep = self.edge_keep;
        cfg.patience = self.patience;
        cfg.seed = seed;
        cfg.attribution = self.attribution;
        cfg.log_events = self.log_events;
        cfg
    }

    pub fn baseline_config(&self, seed: u64) -> Result<BaselineConfig> {
        let kind = self
            .arch
            .kind()
            .ok_or_else(|| Error::Config("mlp has no end-to-end GNN baseline".into()))?;
        let r = self.resolved();
        let mut cfg = BaselineConfig::new(kind, self.num_layers, r.lr.unwrap(), r.hidden.unwrap());
        cfg.rounds = self.rounds;
        cfg.heads = self.heads;
        cfg.pool_dim = self.pool_dim;
        cfg.residual = self.residual;
        cfg.sgd = self.sgd();
        cfg.batch_cap = self.batch_cap;
        cfg.sampler = SamplerConfig {
            max_neighbors_per_hop: self.max_neighbors,
            edge_keep_fraction: self.edge_keep,
            seed,
        };
        cfg.patience = self.patience;
        cfg.attribution = self.attribution;
        cfg.log_events = self.log_events;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_json_gives_defaults() {
        let c = ExperimentConfig::from_json("{}").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.rounds, 400);
        assert_eq!(c.batch_cap, 1024);
        assert_eq!(c.max_neighbors, 25);
        assert_eq!((c.momentum, c.weight_decay), (0.9, 5e-4));
    }

    #[test]
    fn presets_fill_missing_hyperparameters() {
        let c = ExperimentConfig::new(Family::Gcn, Protocol::Retexo).resolved();
        assert_eq!((c.lr, c.hidden), (Some(0.005), Some(256)));
        let c = ExperimentConfig::new(Family::Gcn, Protocol::Baseline).resolved();
        assert_eq!((c.lr, c.hidden), (Some(0.075), Some(128)));
        let mut c = ExperimentConfig::new(Family::Gat, Protocol::Baseline);
        c.split = SplitConfig::Inductive;
        assert_eq!(c.resolved().hidden, Some(64));
        let c = ExperimentConfig::new(Family::Sage, Protocol::Retexo).with_hyper(0.01, 64).resolved();
        assert_eq!((c.lr, c.hidden), (Some(0.01), Some(64)));
    }

    #[test]
    fn json_round_trip_and_unknown_fields() {
        let mut c = ExperimentConfig::heterophilous(Family::Sage, Protocol::Baseline);
        c.dataset = DatasetSource::Synth(SynthSpec::new(50, 3, 0.2, 8, 4.0, 1));
        c.patience = Some(30);
        let back = ExperimentConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert!(matches!(ExperimentConfig::from_json(r#"{"lrr": 1}"#), Err(Error::Config(_))));
        let partial = ExperimentConfig::from_json(r#"{"arch":"gat","split":{"mode":"inductive"}}"#).unwrap();
        assert_eq!(partial.arch, Family::Gat);
        assert!(partial.split.is_inductive());
    }

    #[test]
    fn validation_catches_bad_values() {
        let c = ExperimentConfig { edge_keep: 0.0, ..Default::default() };
        assert!(c.validate().is_err());
        let c = ExperimentConfig { repeats: 0, ..Default::default() };
        assert!(c.validate().is_err());
        let c = ExperimentConfig::default().with_hyper(-1.0, 16);
        assert!(c.validate().is_err());
        assert!(ExperimentConfig::default().validate().is_ok());
    }

    #[test]
    fn mlp_maps_to_a_single_model_job() {
        let c = ExperimentConfig::new(Family::Mlp, Protocol::Baseline);
        assert_eq!(c.retexo_config(3).num_layers, 0);
        assert!(c.baseline_config(3).is_err());
        assert_eq!(c.label(), "mlp");
    }
}
