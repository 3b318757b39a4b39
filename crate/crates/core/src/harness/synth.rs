//! Synthetic graphs: a homophilous stochastic block model with Gaussian
//! features, and a citation-network-shaped surrogate with sparse binary
//! bag-of-words features and heavy-tailed degrees.

use std::collections::HashSet;

use ndarray::Array2;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, Pareto};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::GraphBundle;
use crate::rng::{domain, rng_for};

fn default_noise() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub nodes: usize,
    pub classes: usize,
    /// Probability that an edge stays inside its first endpoint's class.
    pub homophily: f64,
    pub feature_dim: usize,
    pub avg_degree: f64,
    pub seed: u64,
    /// Standard deviation of the per-node feature noise around the class
    /// mean (class means are standard normal).
    #[serde(default = "default_noise")]
    pub feature_noise: f64,
}

impl SynthSpec {
    pub fn new(nodes: usize, classes: usize, homophily: f64, feature_dim: usize, avg_degree: f64, seed: u64) -> Self {
        SynthSpec {
            nodes,
            classes,
            homophily,
            feature_dim,
            avg_degree,
            seed,
            feature_noise: 1.0,
        }
    }

    pub fn with_noise(mut self, feature_noise: f64) -> Self {
        self.feature_noise = feature_noise;
        self
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("invalid synthetic spec: {m}")));
        if self.classes == 0 || self.nodes < self.classes {
            return bad("need nodes >= classes >= 1");
        }
        if !(0.0..=1.0).contains(&self.homophily) {
            return bad("homophily must lie in [0, 1]");
        }
        if self.feature_dim == 0 {
            return bad("feature_dim must be positive");
        }
        if !(self.avg_degree >= 0.0) || self.avg_degree > (self.nodes - 1) as f64 / 2.0 {
            return bad("avg_degree must lie in [0, (nodes - 1) / 2]");
        }
        if !(self.feature_noise >= 0.0) {
            return bad("feature_noise must be non-negative");
        }
        Ok(())
    }
}

/// Endpoint sampler of a degree-corrected block model: edges start at a
/// node drawn by weight and end in the same class with probability
/// `homophily`, otherwise in another class drawn by total weight.
struct BlockSampler {
    members: Vec<Vec<usize>>,
    within: Vec<WeightedIndex<f64>>,
    classes: WeightedIndex<f64>,
    class_weight: Vec<f64>,
    any: WeightedIndex<f64>,
    homophily: f64,
}

impl BlockSampler {
    fn new(labels: &[usize], classes: usize, weights: &[f64], homophily: f64) -> Self {
        let mut members = vec![Vec::new(); classes];
        for (v, &c) in labels.iter().enumerate() {
            members[c].push(v);
        }
        let within = members
            .iter()
            .map(|m| WeightedIndex::new(m.iter().map(|&v| weights[v])).expect("classes are non-empty"))
            .collect();
        let class_weight: Vec<f64> = members.iter().map(|m| m.iter().map(|&v| weights[v]).sum()).collect();
        BlockSampler {
            members,
            within,
            classes: WeightedIndex::new(&class_weight).expect("positive weights"),
            class_weight,
            any: WeightedIndex::new(weights).expect("positive weights"),
            homophily,
        }
    }

    fn edge(&self, labels: &[usize], rng: &mut ChaCha8Rng) -> (usize, usize) {
        let u = self.any.sample(rng);
        let c = labels[u];
        let target = if self.members.len() == 1 || rng.random::<f64>() < self.homophily {
            c
        } else {
            // another class, proportional to its weight
            let rest = self.class_weight.iter().sum::<f64>() - self.class_weight[c];
            if rest <= 0.0 {
                c
            } else {
                loop {
                    let d = self.classes.sample(rng);
                    if d != c {
                        break d;
                    }
                }
            }
        };
        (u, self.members[target][self.within[target].sample(rng)])
    }

    /// Exactly `count` distinct undirected edges, or fewer if the block
    /// structure cannot supply them within a generous attempt budget.
    fn edges(&self, labels: &[usize], count: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
        let mut seen = HashSet::with_capacity(count * 2);
        let mut out = Vec::with_capacity(count);
        let mut attempts = 0usize;
        while out.len() < count && attempts < count * 200 + 1000 {
            attempts += 1;
            let (u, v) = self.edge(labels, rng);
            if u == v {
                continue;
            }
            let key = (u.min(v), u.max(v));
            if seen.insert(key) {
                out.push(key);
            }
        }
        out
    }
}

fn balanced_labels(n: usize, classes: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut labels: Vec<usize> = (0..n).map(|v| v % classes).collect();
    labels.shuffle(rng);
    labels
}

/// Stochastic block model with class-conditioned Gaussian features.
pub fn synth_graph(spec: &SynthSpec) -> Result<GraphBundle> {
    spec.validate()?;
    let mut rng = rng_for(&[domain::SYNTH, 0, spec.seed]);
    let labels = balanced_labels(spec.nodes, spec.classes, &mut rng);
    let sampler = BlockSampler::new(&labels, spec.classes, &vec![1.0; spec.nodes], spec.homophily);
    let count = (spec.nodes as f64 * spec.avg_degree / 2.0).round() as usize;
    let edges = sampler.edges(&labels, count, &mut rng);

    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let means = Array2::from_shape_simple_fn((spec.classes, spec.feature_dim), || normal.sample(&mut rng));
    let mut features = Array2::zeros((spec.nodes, spec.feature_dim));
    for (v, &c) in labels.iter().enumerate() {
        for j in 0..spec.feature_dim {
            features[[v, j]] = (means[[c, j]] + spec.feature_noise * normal.sample(&mut rng)) as f32;
        }
    }
    GraphBundle::new(spec.nodes, &edges, features, labels, spec.classes)
}

/// Shape of the citation-network surrogate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoraLikeSpec {
    pub class_sizes: Vec<usize>,
    pub vocabulary: usize,
    pub undirected_edges: usize,
    pub homophily: f64,
    /// Tail index of the node-weight distribution driving degrees.
    pub degree_tail: f64,
    pub words_per_node: usize,
    /// Vocabulary slice preferred by each class.
    pub topic_words: usize,
    /// Probability that a word is drawn from the node's class topic.
    pub topic_affinity: f64,
    pub seed: u64,
}

impl Default for CoraLikeSpec {
    fn default() -> Self {
        CoraLikeSpec {
            class_sizes: vec![351, 217, 418, 818, 426, 298, 180],
            vocabulary: 1433,
            undirected_edges: 5283,
            homophily: 0.81,
            degree_tail: 2.0,
            words_per_node: 18,
            topic_words: 160,
            topic_affinity: 0.35,
            seed: 0,
        }
    }
}

/// 2708 nodes, 7 classes, 1433 binary features and 5283 undirected edges
/// (10566 directed entries) by default.
pub fn cora_like(spec: &CoraLikeSpec) -> Result<GraphBundle> {
    let classes = spec.class_sizes.len();
    let n: usize = spec.class_sizes.iter().sum();
    if classes == 0 || spec.class_sizes.contains(&0) || spec.vocabulary == 0 {
        return Err(Error::Config("surrogate needs non-empty classes and vocabulary".into()));
    }
    if spec.topic_words == 0 || spec.topic_words > spec.vocabulary || spec.words_per_node > spec.vocabulary {
        return Err(Error::Config("topic and document sizes must fit the vocabulary".into()));
    }
    let mut rng = rng_for(&[domain::SYNTH, 1, spec.seed]);
    let mut labels: Vec<usize> = spec
        .class_sizes
        .iter()
        .enumerate()
        .flat_map(|(c, &k)| std::iter::repeat_n(c, k))
        .collect();
    labels.shuffle(&mut rng);

    let pareto = Pareto::new(1.0, spec.degree_tail).map_err(|e| Error::Config(e.to_string()))?;
    let weights: Vec<f64> = (0..n).map(|_| pareto.sample(&mut rng).min(200.0)).collect();
    let sampler = BlockSampler::new(&labels, classes, &weights, spec.homophily);
    let edges = sampler.edges(&labels, spec.undirected_edges, &mut rng);
    if edges.len() != spec.undirected_edges {
        return Err(Error::Config("could not place the requested number of edges".into()));
    }

    let mut vocab: Vec<usize> = (0..spec.vocabulary).collect();
    let topics: Vec<Vec<usize>> = (0..classes)
        .map(|_| {
            vocab.shuffle(&mut rng);
            vocab[..spec.topic_words].to_vec()
        })
        .collect();
    let mut features = Array2::<f32>::zeros((n, spec.vocabulary));
    for (v, &c) in labels.iter().enumerate() {
        let mut placed = 0;
        while placed < spec.words_per_node {
            let w = if rng.random::<f64>() < spec.topic_affinity {
                topics[c][rng.random_range(0..spec.topic_words)]
            } else {
                rng.random_range(0..spec.vocabulary)
            };
            if features[[v, w]] == 0.0 {
                features[[v, w]] = 1.0;
                placed += 1;
            }
        }
    }
    GraphBundle::new(n, &edges, features, labels, classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inter_intra(g: &GraphBundle) -> (usize, usize) {
        let (mut inter, mut intra) = (0, 0);
        for (u, v) in g.adjacency.undirected_edges() {
            if g.labels[u] == g.labels[v] {
                intra += 1;
            } else {
                inter += 1;
            }
        }
        (inter, intra)
    }

    #[test]
    fn full_homophily_has_no_inter_class_edges() {
        let g = synth_graph(&SynthSpec::new(200, 4, 1.0, 8, 4.0, 1)).unwrap();
        let (inter, intra) = inter_intra(&g);
        assert_eq!(inter, 0);
        assert_eq!(intra, 400);
    }

    #[test]
    fn homophily_one_over_c_is_near_uniform() {
        let g = synth_graph(&SynthSpec::new(2000, 4, 0.25, 4, 10.0, 2)).unwrap();
        let (inter, intra) = inter_intra(&g);
        let frac_intra = intra as f64 / (inter + intra) as f64;
        assert!((frac_intra - 0.25).abs() < 0.02, "{frac_intra}");
    }

    #[test]
    fn deterministic_and_round_trips() {
        let spec = SynthSpec::new(60, 3, 0.8, 5, 3.0, 7);
        let g = synth_graph(&spec).unwrap();
        assert_eq!(g, synth_graph(&spec).unwrap());
        let dir = tempfile::tempdir().unwrap();
        g.save(dir.path()).unwrap();
        assert_eq!(GraphBundle::load(dir.path()).unwrap(), g);
    }

    #[test]
    fn invalid_specs() {
        assert!(synth_graph(&SynthSpec::new(2, 3, 0.5, 4, 1.0, 0)).is_err());
        assert!(synth_graph(&SynthSpec::new(20, 3, 1.5, 4, 1.0, 0)).is_err());
    }

    #[test]
    fn cora_like_shape() {
        let g = cora_like(&CoraLikeSpec::default()).unwrap();
        assert_eq!(g.num_nodes(), 2708);
        assert_eq!(g.num_classes, 7);
        assert_eq!(g.feature_dim(), 1433);
        assert_eq!(g.adjacency.directed_edge_count(), 10566);
        assert!((g.edge_homophily() - 0.81).abs() < 0.03, "{}", g.edge_homophily());
        let words: f32 = g.features.sum() / 2708.0;
        assert!((words - 18.0).abs() < 1e-3);
    }
}
