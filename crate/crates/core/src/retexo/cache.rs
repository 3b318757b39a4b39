use ndarray::Array2;

use crate::error::{Error, Result};

/// Embeddings produced by message-passing rounds for one graph view.
///
/// Level `m` holds `Q^m` for every node (row `v`) together with, for each
/// node, the neighbours whose `Q^m` actually reached it. `Q^0` is the raw
/// feature matrix and is not stored here.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingCache {
    levels: Vec<Array2<f32>>,
    received: Vec<Vec<Vec<usize>>>,
}

impl EmbeddingCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Highest level written so far (0 when empty).
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Stores level `m`. Levels are written once, in order.
    pub fn write(&mut self, m: usize, q: Array2<f32>, received: Vec<Vec<usize>>) -> Result<()> {
        if m != self.levels.len() + 1 {
            return Err(Error::Protocol(format!(
                "embedding level {m} written after level {}",
                self.levels.len()
            )));
        }
        if received.len() != q.nrows() {
            return Err(Error::Protocol("received lists do not cover every node".into()));
        }
        self.levels.push(q);
        self.received.push(received);
        Ok(())
    }

    pub fn level(&self, m: usize) -> Result<&Array2<f32>> {
        m.checked_sub(1)
            .and_then(|i| self.levels.get(i))
            .ok_or_else(|| Error::Protocol(format!("embedding level {m} not available")))
    }

    /// Neighbours of `v` whose level-`m` embedding was delivered.
    pub fn received(&self, m: usize, v: usize) -> Result<&[usize]> {
        m.checked_sub(1)
            .and_then(|i| self.received.get(i))
            .and_then(|r| r.get(v))
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Protocol(format!("no level-{m} inbox for node {v}")))
    }

    pub fn embedding(&self, m: usize, v: usize) -> Result<Vec<f32>> {
        let q = self.level(m)?;
        if v >= q.nrows() {
            return Err(Error::Protocol(format!("node {v} outside the cache")));
        }
        Ok(q.row(v).to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levels_are_write_once_and_ordered() {
        let mut c = EmbeddingCache::new();
        assert!(c.write(2, Array2::zeros((2, 3)), vec![vec![], vec![]]).is_err());
        c.write(1, Array2::ones((2, 3)), vec![vec![1], vec![0]]).unwrap();
        assert!(c.write(1, Array2::zeros((2, 3)), vec![vec![], vec![]]).is_err());
        assert_eq!(c.embedding(1, 0).unwrap(), vec![1.0; 3]);
        assert_eq!(c.received(1, 1).unwrap(), &[0]);
        assert!(c.level(0).is_err());
        assert!(c.level(2).is_err());
    }
}
