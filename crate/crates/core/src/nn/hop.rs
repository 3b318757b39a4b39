use crate::error::{Error, Result};

/// One message-passing step of a computation graph: maps every destination
/// row to its own row in the source level plus a (sorted) list of neighbour
/// rows in the source level. Stored in CSR form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hop {
    src_len: usize,
    self_idx: Vec<usize>,
    offsets: Vec<usize>,
    nbrs: Vec<usize>,
    identity: bool,
}

impl Hop {
    /// Row `i` maps to source row `i` with no neighbours.
    pub fn identity(n: usize) -> Self {
        Hop {
            src_len: n,
            self_idx: (0..n).collect(),
            offsets: vec![0; n + 1],
            nbrs: Vec::new(),
            identity: true,
        }
    }

    pub fn new(src_len: usize, self_idx: Vec<usize>, lists: Vec<Vec<usize>>) -> Result<Self> {
        if self_idx.len() != lists.len() {
            return Err(Error::Shape(format!(
                "hop has {} self rows but {} neighbour lists",
                self_idx.len(),
                lists.len()
            )));
        }
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        offsets.push(0);
        let mut nbrs = Vec::with_capacity(lists.iter().map(Vec::len).sum());
        for mut l in lists {
            l.sort_unstable();
            nbrs.extend_from_slice(&l);
            offsets.push(nbrs.len());
        }
        if let Some(&bad) = self_idx.iter().chain(&nbrs).find(|&&r| r >= src_len) {
            return Err(Error::Shape(format!(
                "hop references source row {bad} of {src_len}"
            )));
        }
        let identity = nbrs.is_empty()
            && self_idx.len() == src_len
            && self_idx.iter().enumerate().all(|(i, &s)| i == s);
        Ok(Hop {
            src_len,
            self_idx,
            offsets,
            nbrs,
            identity,
        })
    }

    pub fn len(&self) -> usize {
        self.self_idx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.self_idx.is_empty()
    }

    pub fn src_len(&self) -> usize {
        self.src_len
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    pub fn self_index(&self, i: usize) -> usize {
        self.self_idx[i]
    }

    pub fn self_indices(&self) -> &[usize] {
        &self.self_idx
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.nbrs[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Start of row `i`'s neighbour block in the flattened CSR arrays.
    pub(crate) fn offset(&self, i: usize) -> usize {
        self.offsets[i]
    }

    pub(crate) fn total_neighbors(&self) -> usize {
        self.nbrs.len()
    }

    pub(crate) fn all_neighbors(&self) -> &[usize] {
        &self.nbrs
    }
}
