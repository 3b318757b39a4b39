use std::collections::BTreeSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Undirected adjacency stored in both directions, one sorted list per node.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Adjacency {
    lists: Vec<Vec<usize>>,
}

impl Adjacency {
    /// Builds a symmetric adjacency from an edge list given in either
    /// orientation. Self-loops are dropped and counted; duplicates collapse.
    pub fn from_edges(num_nodes: usize, edges: &[(usize, usize)]) -> Result<(Self, usize)> {
        let mut sets = vec![BTreeSet::new(); num_nodes];
        let mut self_loops = 0;
        for &(u, v) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::InvalidBundle(format!(
                    "edge ({u}, {v}) references a node outside 0..{num_nodes}"
                )));
            }
            if u == v {
                self_loops += 1;
                continue;
            }
            sets[u].insert(v);
            sets[v].insert(u);
        }
        let lists = sets.into_iter().map(|s| s.into_iter().collect()).collect();
        Ok((Adjacency { lists }, self_loops))
    }

    pub fn num_nodes(&self) -> usize {
        self.lists.len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.lists[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.lists[v].len()
    }

    /// Number of stored directed entries, i.e. twice the undirected edge count.
    pub fn directed_edge_count(&self) -> usize {
        self.lists.iter().map(Vec::len).sum()
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`.
    pub fn undirected_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.lists
            .iter()
            .enumerate()
            .flat_map(|(u, l)| l.iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
    }

    /// Same id space, only edges with both endpoints in `members` survive.
    pub fn induced(&self, members: &[usize]) -> Adjacency {
        let mut keep = vec![false; self.lists.len()];
        for &m in members {
            keep[m] = true;
        }
        let lists = self
            .lists
            .iter()
            .enumerate()
            .map(|(v, l)| {
                if keep[v] {
                    l.iter().copied().filter(|&u| keep[u]).collect()
                } else {
                    Vec::new()
                }
            })
            .collect();
        Adjacency { lists }
    }

    pub fn is_symmetric(&self) -> bool {
        self.lists.iter().enumerate().all(|(v, l)| {
            l.iter()
                .all(|&u| u != v && self.lists[u].binary_search(&v).is_ok())
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub num_nodes: usize,
    pub feature_dim: usize,
    pub num_classes: usize,
}

/// Immutable graph with node features, labels and metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphBundle {
    pub adjacency: Adjacency,
    pub features: Array2<f32>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    /// Self-loops found in the edge list and discarded on load.
    pub dropped_self_loops: usize,
}

impl GraphBundle {
    pub fn new(
        num_nodes: usize,
        edges: &[(usize, usize)],
        features: Array2<f32>,
        labels: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self> {
        if features.nrows() != num_nodes {
            return Err(Error::InvalidBundle(format!(
                "{} feature rows for {num_nodes} nodes",
                features.nrows()
            )));
        }
        if labels.len() != num_nodes {
            return Err(Error::InvalidBundle(format!(
                "{} labels for {num_nodes} nodes",
                labels.len()
            )));
        }
        if let Some((v, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= num_classes) {
            return Err(Error::InvalidBundle(format!(
                "label {l} of node {v} is not below num_classes={num_classes}"
            )));
        }
        let (adjacency, dropped_self_loops) = Adjacency::from_edges(num_nodes, edges)?;
        Ok(GraphBundle {
            adjacency,
            features,
            labels,
            num_classes,
            dropped_self_loops,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn meta(&self) -> BundleMeta {
        BundleMeta {
            num_nodes: self.num_nodes(),
            feature_dim: self.feature_dim(),
            num_classes: self.num_classes,
        }
    }

    /// Fraction of undirected edges joining two nodes of the same class.
    pub fn edge_homophily(&self) -> f64 {
        let (mut same, mut total) = (0usize, 0usize);
        for (u, v) in self.adjacency.undirected_edges() {
            total += 1;
            if self.labels[u] == self.labels[v] {
                same += 1;
            }
        }
        if total == 0 {
            0.0
        } else {
            same as f64 / total as f64
        }
    }

    /// Reads a bundle directory: `edges.tsv`, `features.tsv`, `labels.tsv`
    /// and optionally `meta.json`.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let read = |name: &str| -> Result<String> {
            let path = dir.join(name);
            if !path.exists() {
                return Err(Error::MissingFile(path));
            }
            fs::read_to_string(&path).map_err(|e| Error::io(path, e))
        };

        let labels_txt = read("labels.tsv")?;
        let mut labels = Vec::new();
        for (i, line) in labels_txt.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            labels.push(parse_field::<usize>(line, "labels.tsv", i + 1)?);
        }

        let meta_path = dir.join("meta.json");
        let meta: Option<BundleMeta> = if meta_path.exists() {
            let txt = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
            Some(serde_json::from_str(&txt).map_err(|e| Error::Parse {
                file: "meta.json".into(),
                line: e.line(),
                msg: e.to_string(),
            })?)
        } else {
            None
        };
        let num_nodes = meta.map_or(labels.len(), |m| m.num_nodes);
        if labels.len() != num_nodes {
            return Err(Error::InvalidBundle(format!(
                "labels.tsv has {} entries but num_nodes={num_nodes}",
                labels.len()
            )));
        }

        let feat_txt = read("features.tsv")?;
        let mut rows: Vec<Vec<f32>> = Vec::with_capacity(num_nodes);
        for (i, line) in feat_txt.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split('\t')
                .map(|t| parse_field::<f32>(t.trim(), "features.tsv", i + 1))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        if rows.len() != num_nodes {
            return Err(Error::InvalidBundle(format!(
                "features.tsv has {} rows but num_nodes={num_nodes}",
                rows.len()
            )));
        }
        let feature_dim = meta
            .map(|m| m.feature_dim)
            .or_else(|| rows.first().map(Vec::len))
            .unwrap_or(0);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != feature_dim) {
            return Err(Error::InvalidBundle(format!(
                "feature row {i} has {} values, expected {feature_dim}",
                r.len()
            )));
        }
        let flat: Vec<f32> = rows.into_iter().flatten().collect();
        let features = Array2::from_shape_vec((num_nodes, feature_dim), flat)
            .map_err(|e| Error::Shape(e.to_string()))?;

        let edges_txt = read("edges.tsv")?;
        let mut edges = Vec::new();
        for (i, line) in edges_txt.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
                return Err(Error::Parse {
                    file: "edges.tsv".into(),
                    line: i + 1,
                    msg: "expected two columns".into(),
                });
            };
            edges.push((
                parse_field(a, "edges.tsv", i + 1)?,
                parse_field(b, "edges.tsv", i + 1)?,
            ));
        }

        let num_classes = meta.map_or_else(
            || labels.iter().max().map_or(0, |&m| m + 1),
            |m| m.num_classes,
        );
        GraphBundle::new(num_nodes, &edges, features, labels, num_classes)
    }

    /// Writes the bundle directory, including `meta.json`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: &str, body: &dyn Fn(&mut dyn Write) -> std::io::Result<()>| {
            let path = dir.join(name);
            let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            let mut w = BufWriter::new(file);
            body(&mut w)
                .and_then(|_| w.flush())
                .map_err(|e| Error::io(&path, e))
        };
        write("edges.tsv", &|w| {
            for (u, v) in self.adjacency.undirected_edges() {
                writeln!(w, "{u}\t{v}")?;
            }
            Ok(())
        })?;
        write("features.tsv", &|w| {
            for row in self.features.rows() {
                let mut first = true;
                for x in row {
                    if !first {
                        w.write_all(b"\t")?;
                    }
                    write!(w, "{x}")?;
                    first = false;
                }
                w.write_all(b"\n")?;
            }
            Ok(())
        })?;
        write("labels.tsv", &|w| {
            for l in &self.labels {
                writeln!(w, "{l}")?;
            }
            Ok(())
        })?;
        let meta = serde_json::to_string(&self.meta())?;
        write("meta.json", &|w| writeln!(w, "{meta}"))
    }
}

fn parse_field<T: std::str::FromStr>(tok: &str, file: &str, line: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    tok.parse().map_err(|e: T::Err| Error::Parse {
        file: file.into(),
        line,
        msg: format!("{tok:?}: {e}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn tiny() -> GraphBundle {
        GraphBundle::new(
            4,
            &[(0, 1), (1, 0), (1, 2), (2, 2), (3, 2)],
            array![[0.5, 1.0], [0.25, -1.0], [3.0, 0.125], [1e-7, 2.5]],
            vec![0, 1, 1, 0],
            2,
        )
        .unwrap()
    }

    #[test]
    fn symmetrizes_and_drops_self_loops() {
        let g = tiny();
        assert_eq!(g.dropped_self_loops, 1);
        assert!(g.adjacency.is_symmetric());
        assert_eq!(g.adjacency.neighbors(1), &[0, 2]);
        assert_eq!(g.adjacency.neighbors(2), &[1, 3]);
        assert_eq!(g.adjacency.directed_edge_count(), 6);
    }

    #[test]
    fn rejects_label_out_of_range() {
        let err = GraphBundle::new(1, &[], Array2::zeros((1, 2)), vec![3], 2).unwrap_err();
        assert!(matches!(err, Error::InvalidBundle(_)));
    }

    #[test]
    fn rejects_row_count_mismatch() {
        let err = GraphBundle::new(2, &[], Array2::zeros((1, 2)), vec![0, 0], 1).unwrap_err();
        assert!(err.is_data_error());
    }

    #[test]
    fn single_isolated_node_is_valid() {
        let g = GraphBundle::new(1, &[], Array2::zeros((1, 3)), vec![0], 1).unwrap();
        assert!(g.adjacency.neighbors(0).is_empty());
        assert_eq!(g.adjacency.directed_edge_count(), 0);
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let g = tiny();
        g.save(dir.path()).unwrap();
        let back = GraphBundle::load(dir.path()).unwrap();
        assert_eq!(back.adjacency, g.adjacency);
        assert_eq!(back.features, g.features);
        assert_eq!(back.labels, g.labels);
        assert_eq!(back.num_classes, g.num_classes);
    }

    #[test]
    fn missing_file_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        tiny().save(dir.path()).unwrap();
        fs::remove_file(dir.path().join("features.tsv")).unwrap();
        let err = GraphBundle::load(dir.path()).unwrap_err();
        assert!(matches!(err, Error::MissingFile(_)));
    }

    #[test]
    fn meta_dimension_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        tiny().save(dir.path()).unwrap();
        fs::write(
            dir.path().join("meta.json"),
            r#"{"num_nodes":4,"feature_dim":3,"num_classes":2}"#,
        )
        .unwrap();
        assert!(matches!(
            GraphBundle::load(dir.path()),
            Err(Error::InvalidBundle(_))
        ));
    }

    #[test]
    fn induced_view_keeps_inner_edges_only() {
        let g = tiny();
        let sub = g.adjacency.induced(&[1, 2, 3]);
        assert_eq!(sub.neighbors(1), &[2]);
        assert!(sub.neighbors(0).is_empty());
        assert!(sub.is_symmetric());
    }
}
