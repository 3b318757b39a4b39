use std::collections::BTreeMap;

use crate::graph::SampledAdjacency;

/// One client's K-hop neighbourhood over the round's sampled adjacency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientPlan {
    pub client: usize,
    /// Train clients also run the backward pass.
    pub train: bool,
    /// `hops[p]`: nodes first reached at distance `p`; `hops[0] == [client]`.
    pub hops: Vec<Vec<usize>>,
    /// BFS parent of every node reached at distance >= 1.
    pub parent: BTreeMap<usize, usize>,
    /// Sampled neighbour list of every node at distance < K.
    pub sampled: BTreeMap<usize, Vec<usize>>,
}

impl ClientPlan {
    /// Breadth-first expansion of `client` over `adj` to depth `k`.
    pub fn build(client: usize, train: bool, k: usize, adj: &mut SampledAdjacency<'_>) -> Self {
        let mut hops = vec![vec![client]];
        let mut parent = BTreeMap::new();
        let mut sampled = BTreeMap::new();
        let mut seen = std::collections::HashSet::from([client]);
        for p in 1..=k {
            let mut next = Vec::new();
            for &w in &hops[p - 1] {
                let s = adj.get(w).to_vec();
                for &u in &s {
                    if seen.insert(u) {
                        parent.insert(u, w);
                        next.push(u);
                    }
                }
                sampled.insert(w, s);
            }
            next.sort_unstable();
            hops.push(next);
        }
        ClientPlan {
            client,
            train,
            hops,
            parent,
            sampled,
        }
    }

    pub fn depth(&self) -> usize {
        self.hops.len() - 1
    }

    /// Sampled degree of `w` (0 for nodes at the outer boundary).
    pub fn degree(&self, w: usize) -> usize {
        self.sampled.get(&w).map_or(0, Vec::len)
    }
}

/// Clients taking part in a baseline round and their neighbourhoods.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundPlan {
    pub round: usize,
    pub train_clients: Vec<usize>,
    pub val_clients: Vec<usize>,
    pub clients: Vec<ClientPlan>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Adjacency, SamplerConfig};

    #[test]
    fn isolated_client_has_empty_hops() {
        let adj = Adjacency::from_edges(3, &[(1, 2)]).unwrap().0;
        let mut s = SampledAdjacency::new(&adj, SamplerConfig::default(), 0);
        let p = ClientPlan::build(0, true, 2, &mut s);
        assert_eq!(p.hops, vec![vec![0], vec![], vec![]]);
    }

    #[test]
    fn triangle_second_hop_is_empty() {
        let adj = Adjacency::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap().0;
        let mut s = SampledAdjacency::new(&adj, SamplerConfig::default(), 0);
        let p = ClientPlan::build(0, true, 2, &mut s);
        assert_eq!(p.hops, vec![vec![0], vec![1, 2], vec![]]);
        assert_eq!(p.sampled[&1], vec![0, 2]);
        assert_eq!(p.parent[&2], 0);
    }
}
