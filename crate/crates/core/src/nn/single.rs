//! Single-node entry points: one client's view of a model, its own input
//! vector and the vectors it received from its neighbours.

use ndarray::{Array1, Array2};

use super::layers::{self, LayerCache};
use super::{softmax_cross_entropy, Arch, Hop, LayerKind, ModelParams, ParamSet, Real, Tape};
use crate::error::{Error, Result};

/// Neighbour inputs that accompany a node's own input.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ArchContext<F: Real = f32> {
    pub neighbors: Vec<Vec<F>>,
}

impl<F: Real> ArchContext<F> {
    pub fn none() -> Self {
        ArchContext { neighbors: Vec::new() }
    }

    pub fn with_neighbors(neighbors: Vec<Vec<F>>) -> Self {
        ArchContext { neighbors }
    }
}

fn single_batch<F: Real>(p: &ModelParams<F>, own: &[F], ctx: &ArchContext<F>) -> Result<(Array2<F>, Vec<Hop>)> {
    let dim = p.input_dim();
    if own.len() != dim {
        return Err(Error::Shape(format!("input has length {}, model expects {dim}", own.len())));
    }
    if let Some(v) = ctx.neighbors.iter().find(|v| v.len() != dim) {
        return Err(Error::Shape(format!("neighbour vector has length {}, expected {dim}", v.len())));
    }
    let convs = p.layers.iter().filter(|l| l.kind != LayerKind::Dense).count();
    if convs > 1 {
        return Err(Error::Shape(
            "single-node evaluation covers at most one aggregation layer".into(),
        ));
    }
    if convs == 0 && !ctx.neighbors.is_empty() {
        return Err(Error::Shape("a dense model takes no neighbour inputs".into()));
    }
    let n = ctx.neighbors.len();
    let mut data = Vec::with_capacity((n + 1) * dim);
    data.extend_from_slice(own);
    for v in &ctx.neighbors {
        data.extend_from_slice(v);
    }
    let x = Array2::from_shape_vec((n + 1, dim), data).expect("rows have equal length");
    let hops = p
        .layers
        .iter()
        .enumerate()
        .map(|(l, layer)| {
            if l == 0 && layer.kind != LayerKind::Dense {
                Hop::new(n + 1, vec![0], vec![(1..=n).collect()])
            } else if l == 0 {
                Hop::new(n + 1, vec![0], vec![Vec::new()])
            } else {
                Ok(Hop::identity(1))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((x, hops))
}

/// Runs an MLP on one feature vector.
pub fn forward_mlp<F: Real>(p: &ModelParams<F>, x: &[F]) -> Result<(Vec<F>, Tape<F>)> {
    if p.spec.arch != Arch::Mlp {
        return Err(Error::Shape(format!("forward_mlp called on a {} model", p.spec.arch)));
    }
    let (input, hops) = single_batch(p, x, &ArchContext::none())?;
    let tape = p.forward(input, &hops)?;
    Ok((tape.logits().row(0).to_vec(), tape))
}

/// The first aggregation layer's combined representation for one node:
/// `[own ‖ mean(neigh)]` for GCN, `[own ‖ max(relu(pool(neigh)))]` for
/// GraphSAGE and the attention-weighted sum over `{own} ∪ neigh`,
/// concatenated over heads, for GAT.
pub fn combine_aggregate<F: Real>(p: &ModelParams<F>, own: &[F], neigh: &[Vec<F>]) -> Result<Vec<F>> {
    let layer = p
        .layers
        .first()
        .filter(|l| l.kind != LayerKind::Dense)
        .ok_or_else(|| Error::Shape(format!("{} has no aggregation layer", p.spec.arch)))?;
    let ctx = ArchContext::with_neighbors(neigh.to_vec());
    let (x, hops) = single_batch(p, own, &ctx)?;
    let (_, cache) = layers::forward(layer, p.layer_tensors(0), &x, &hops[0]);
    let row: Array1<F> = match cache {
        LayerCache::Gcn { combined, .. } | LayerCache::Sage { combined, .. } => combined.row(0).to_owned(),
        LayerCache::Gat { z, .. } => z.row(0).to_owned(),
        LayerCache::Dense { .. } => unreachable!("filtered above"),
    };
    Ok(row.to_vec())
}

/// Logits for one node given its own input and its neighbours' inputs.
pub fn forward_single<F: Real>(p: &ModelParams<F>, own: &[F], ctx: &ArchContext<F>) -> Result<Vec<F>> {
    let (x, hops) = single_batch(p, own, ctx)?;
    let tape = p.forward(x, &hops)?;
    Ok(tape.logits().row(0).to_vec())
}

/// Cross-entropy of one labelled node and the gradient of every parameter.
pub fn loss_and_grad<F: Real>(
    p: &ModelParams<F>,
    input: &[F],
    label: usize,
    ctx: &ArchContext<F>,
) -> Result<(F, ParamSet<F>)> {
    let (x, hops) = single_batch(p, input, ctx)?;
    let tape = p.forward(x, &hops)?;
    let out = softmax_cross_entropy(tape.logits(), &[label])?;
    let grads = p.backward(&tape, &hops, out.d_logits);
    Ok((out.loss, grads))
}
