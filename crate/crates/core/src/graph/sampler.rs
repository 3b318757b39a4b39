use std::collections::HashMap;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::Adjacency;
use crate::rng::{domain, rng_for};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub max_neighbors_per_hop: usize,
    /// Fraction of a node's neighbours eligible in a given round, in (0, 1].
    pub edge_keep_fraction: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            max_neighbors_per_hop: 25,
            edge_keep_fraction: 1.0,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn with_seed(seed: u64) -> Self {
        SamplerConfig {
            seed,
            ..Default::default()
        }
    }

    /// Target sample size for a population of `deg` candidates.
    pub fn sample_size(&self, deg: usize) -> usize {
        let kept = (deg as f64 * self.edge_keep_fraction).round() as usize;
        kept.min(self.max_neighbors_per_hop).min(deg)
    }
}

/// Uniform sample without replacement from `candidates`, keyed on
/// `(seed, owner, round_tag)`. The result is sorted.
pub fn sample_from(
    candidates: &[usize],
    cfg: &SamplerConfig,
    owner: usize,
    round_tag: u64,
) -> Vec<usize> {
    let k = cfg.sample_size(candidates.len());
    if k == candidates.len() {
        return candidates.to_vec();
    }
    let mut rng = rng_for(&[domain::NEIGHBOR_SAMPLE, cfg.seed, owner as u64, round_tag]);
    let mut picked: Vec<usize> = index::sample(&mut rng, candidates.len(), k)
        .into_iter()
        .map(|i| candidates[i])
        .collect();
    picked.sort_unstable();
    picked
}

pub fn sample_neighbors(
    adj: &Adjacency,
    v: usize,
    cfg: &SamplerConfig,
    round_tag: u64,
) -> Vec<usize> {
    sample_from(adj.neighbors(v), cfg, v, round_tag)
}

/// Per-round memo of sampled neighbour lists. Because sampling is a pure
/// function of `(seed, v, round_tag)`, every client that touches `v` in a
/// round sees the same list.
#[derive(Debug)]
pub struct SampledAdjacency<'a> {
    adj: &'a Adjacency,
    cfg: SamplerConfig,
    round_tag: u64,
    memo: HashMap<usize, Vec<usize>>,
}

impl<'a> SampledAdjacency<'a> {
    pub fn new(adj: &'a Adjacency, cfg: SamplerConfig, round_tag: u64) -> Self {
        SampledAdjacency {
            adj,
            cfg,
            round_tag,
            memo: HashMap::new(),
        }
    }

    pub fn get(&mut self, v: usize) -> &[usize] {
        let (adj, cfg, tag) = (self.adj, self.cfg, self.round_tag);
        self.memo
            .entry(v)
            .or_insert_with(|| sample_neighbors(adj, v, &cfg, tag))
    }

    pub fn round_tag(&self) -> u64 {
        self.round_tag
    }
}

/// Clients taking part in one training round: up to `cap` in total, split
/// between train and validation in proportion to the two set sizes. Keyed
/// on `(seed, stage, round)`; both lists come back sorted.
pub fn sample_round_clients(
    train: &[usize],
    val: &[usize],
    cap: usize,
    seed: u64,
    stage: u64,
    round: u64,
) -> (Vec<usize>, Vec<usize>) {
    let total = train.len() + val.len();
    let (n_tr, n_val) = if total <= cap {
        (train.len(), val.len())
    } else {
        let n_tr = ((cap as f64 * train.len() as f64 / total as f64).round() as usize).min(train.len());
        (n_tr, (cap - n_tr).min(val.len()))
    };
    let mut rng = rng_for(&[domain::CLIENT_SAMPLE, seed, stage, round]);
    let mut pick = |ids: &[usize], k: usize| {
        if k == ids.len() {
            return ids.to_vec();
        }
        let mut out: Vec<usize> = index::sample(&mut rng, ids.len(), k)
            .into_iter()
            .map(|i| ids[i])
            .collect();
        out.sort_unstable();
        out
    };
    let tr = pick(train, n_tr);
    let va = pick(val, n_val);
    (tr, va)
}
