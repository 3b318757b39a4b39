use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Adjacency, GraphBundle};
use crate::error::{Error, Result};
use crate::rng::{domain, rng_for};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    Transductive,
    Inductive,
}

/// Node sets of the three nested subgraphs of an inductive split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InductiveGraphs {
    pub train_nodes: Vec<usize>,
    pub val_nodes: Vec<usize>,
    pub test_nodes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub mode: SplitMode,
    pub train_ids: Vec<usize>,
    pub val_ids: Vec<usize>,
    pub test_ids: Vec<usize>,
    pub inductive_graphs: Option<InductiveGraphs>,
}

impl SplitSpec {
    /// Checks disjointness, id range and (for inductive splits) nesting.
    pub fn validate(&self, num_nodes: usize) -> Result<()> {
        let mut seen = vec![0u8; num_nodes];
        for (tag, ids) in [(1u8, &self.train_ids), (2, &self.val_ids), (4, &self.test_ids)] {
            for &v in ids {
                if v >= num_nodes {
                    return Err(Error::Config(format!("split id {v} >= {num_nodes}")));
                }
                if seen[v] != 0 {
                    return Err(Error::Config(format!("node {v} appears in two split sets")));
                }
                seen[v] |= tag;
            }
        }
        if let Some(ind) = &self.inductive_graphs {
            let subset = |a: &[usize], b: &[usize]| a.iter().all(|x| b.binary_search(x).is_ok());
            if !subset(&ind.train_nodes, &ind.val_nodes) || !subset(&ind.val_nodes, &ind.test_nodes)
            {
                return Err(Error::Config("inductive graphs are not nested".into()));
            }
        }
        Ok(())
    }
}

/// Which subgraph a phase of training or evaluation runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViewRole {
    Train,
    Val,
    Test,
}

impl SplitSpec {
    /// Nodes present in the graph seen during `role`.
    pub fn view_members(&self, num_nodes: usize, role: ViewRole) -> Vec<usize> {
        match (&self.inductive_graphs, role) {
            (None, _) => (0..num_nodes).collect(),
            (Some(ind), ViewRole::Train) => ind.train_nodes.clone(),
            (Some(ind), ViewRole::Val) => ind.val_nodes.clone(),
            (Some(ind), ViewRole::Test) => ind.test_nodes.clone(),
        }
    }

    /// Adjacency of the graph seen during `role`, in the original id space.
    pub fn view_adjacency(&self, g: &GraphBundle, role: ViewRole) -> Adjacency {
        match self.inductive_graphs {
            None => g.adjacency.clone(),
            Some(_) => g.adjacency.induced(&self.view_members(g.num_nodes(), role)),
        }
    }
}

fn shuffled(n: usize, seed: u64, tag: u64) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(&mut rng_for(&[domain::SPLIT, seed, tag]));
    ids
}

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v
}

/// Random train/val/test split by fractions of the node count (floored).
pub fn make_transductive_split(
    g: &GraphBundle,
    train_frac: f64,
    val_frac: f64,
    seed: u64,
) -> Result<SplitSpec> {
    if !(train_frac > 0.0 && train_frac < 1.0) || !(0.0..1.0).contains(&val_frac) {
        return Err(Error::Config(format!(
            "split fractions out of range: train={train_frac}, val={val_frac}"
        )));
    }
    if train_frac + val_frac >= 1.0 {
        return Err(Error::Config("train_frac + val_frac must be < 1".into()));
    }
    let n = g.num_nodes();
    let n_train = (n as f64 * train_frac).floor() as usize;
    let n_val = (n as f64 * val_frac).floor() as usize;
    if n_train == 0 {
        return Err(Error::Config("split leaves no training nodes".into()));
    }
    let perm = shuffled(n, seed, 0);
    Ok(SplitSpec {
        mode: SplitMode::Transductive,
        train_ids: sorted(perm[..n_train].to_vec()),
        val_ids: sorted(perm[n_train..n_train + n_val].to_vec()),
        test_ids: sorted(perm[n_train + n_val..].to_vec()),
        inductive_graphs: None,
    })
}

/// `per_class` training nodes from every class, then `val_total` validation
/// nodes drawn from the remainder; everything else is test.
pub fn make_per_class_split(
    g: &GraphBundle,
    per_class: usize,
    val_total: usize,
    seed: u64,
) -> Result<SplitSpec> {
    if per_class == 0 {
        return Err(Error::Config("per_class must be positive".into()));
    }
    let perm = shuffled(g.num_nodes(), seed, 1);
    let mut taken = vec![0usize; g.num_classes];
    let (mut train, mut rest) = (Vec::new(), Vec::new());
    for v in perm {
        let c = g.labels[v];
        if taken[c] < per_class {
            taken[c] += 1;
            train.push(v);
        } else {
            rest.push(v);
        }
    }
    if val_total > rest.len() {
        return Err(Error::Config(format!(
            "val_total={val_total} exceeds the {} nodes left after training",
            rest.len()
        )));
    }
    let test = rest.split_off(val_total);
    Ok(SplitSpec {
        mode: SplitMode::Transductive,
        train_ids: sorted(train),
        val_ids: sorted(rest),
        test_ids: sorted(test),
        inductive_graphs: None,
    })
}

/// Nested train (50%), validation (60%) and test (100%) graphs. Training
/// labels come from 10% of the train-graph nodes; validation and test ids
/// are the nodes each larger graph adds.
pub fn make_inductive_split(g: &GraphBundle, seed: u64) -> Result<SplitSpec> {
    let n = g.num_nodes();
    if n < 10 {
        return Err(Error::Config(format!(
            "inductive split needs at least 10 nodes, got {n}"
        )));
    }
    let perm = shuffled(n, seed, 2);
    let n_tr_graph = n / 2;
    let n_val_graph = (n as f64 * 0.6).floor() as usize;
    let n_labeled = ((n_tr_graph as f64) * 0.1).floor().max(1.0) as usize;
    Ok(SplitSpec {
        mode: SplitMode::Inductive,
        // the permutation prefix is already random, so its head is a random
        // 10% of the train graph
        train_ids: sorted(perm[..n_labeled].to_vec()),
        val_ids: sorted(perm[n_tr_graph..n_val_graph].to_vec()),
        test_ids: sorted(perm[n_val_graph..].to_vec()),
        inductive_graphs: Some(InductiveGraphs {
            train_nodes: sorted(perm[..n_tr_graph].to_vec()),
            val_nodes: sorted(perm[..n_val_graph].to_vec()),
            test_nodes: (0..n).collect(),
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn graph(n: usize, classes: usize) -> GraphBundle {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        let labels = (0..n).map(|i| i % classes).collect();
        GraphBundle::new(n, &edges, Array2::zeros((n, 2)), labels, classes).unwrap()
    }

    #[test]
    fn cora_sized_fraction_split() {
        let s = make_transductive_split(&graph(2708, 7), 0.1, 0.1, 3).unwrap();
        assert_eq!(s.train_ids.len(), 270);
        assert_eq!(s.val_ids.len(), 270);
        assert_eq!(s.test_ids.len(), 2168);
        s.validate(2708).unwrap();
    }

    #[test]
    fn zero_train_fraction_rejected() {
        assert!(make_transductive_split(&graph(20, 2), 0.0, 0.1, 0).is_err());
        assert!(make_transductive_split(&graph(20, 2), 0.6, 0.4, 0).is_err());
    }

    #[test]
    fn split_is_deterministic() {
        let g = graph(300, 3);
        assert_eq!(
            make_transductive_split(&g, 0.2, 0.1, 9).unwrap(),
            make_transductive_split(&g, 0.2, 0.1, 9).unwrap()
        );
        assert_ne!(
            make_transductive_split(&g, 0.2, 0.1, 9).unwrap(),
            make_transductive_split(&g, 0.2, 0.1, 10).unwrap()
        );
    }

    #[test]
    fn per_class_citeseer_shape() {
        let s = make_per_class_split(&graph(3327, 6), 56, 336, 1).unwrap();
        assert_eq!(s.train_ids.len(), 336);
        assert_eq!(s.val_ids.len(), 336);
        s.validate(3327).unwrap();
    }

    #[test]
    fn inductive_sizes() {
        let s = make_inductive_split(&graph(2708, 7), 4).unwrap();
        let ind = s.inductive_graphs.as_ref().unwrap();
        assert_eq!(ind.train_nodes.len(), 1354);
        assert_eq!(ind.val_nodes.len(), 1624);
        assert_eq!(ind.test_nodes.len(), 2708);
        assert_eq!(s.train_ids.len(), 135);
        s.validate(2708).unwrap();

        let s = make_inductive_split(&graph(10, 2), 0).unwrap();
        let ind = s.inductive_graphs.unwrap();
        assert_eq!(
            (ind.train_nodes.len(), ind.val_nodes.len(), ind.test_nodes.len()),
            (5, 6, 10)
        );
        assert!(make_inductive_split(&graph(9, 2), 0).is_err());
    }

    #[test]
    fn induced_train_graph_stays_inside() {
        let g = graph(200, 4);
        let s = make_inductive_split(&g, 7).unwrap();
        let ind = s.inductive_graphs.unwrap();
        let view = g.adjacency.induced(&ind.train_nodes);
        let member: std::collections::HashSet<_> = ind.train_nodes.iter().copied().collect();
        for v in 0..200 {
            for &u in view.neighbors(v) {
                assert!(member.contains(&u) && member.contains(&v));
            }
        }
    }
}
