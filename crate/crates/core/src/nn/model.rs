use ndarray::Array2;

use super::layers::{self, LayerCache};
use super::{softmax_cross_entropy, Arch, Hop, ModelParams, ParamSet, Real};
use crate::error::{Error, Result};

/// Activation record of one forward pass.
#[derive(Debug, Clone)]
pub struct Tape<F: Real> {
    /// `levels[0]` is the input; `levels[l + 1]` is the output of layer `l`.
    pub levels: Vec<Array2<F>>,
    caches: Vec<LayerCache<F>>,
}

impl<F: Real> Tape<F> {
    pub fn logits(&self) -> &Array2<F> {
        self.levels.last().expect("tape has at least the input level")
    }

    pub(crate) fn branch_pattern(&self) -> Vec<usize> {
        self.caches.iter().flat_map(|c| c.branch_pattern()).collect()
    }
}

impl<F: Real> ModelParams<F> {
    /// Runs the layer stack. `hops[l]` wires layer `l`'s output rows to its
    /// input rows.
    pub fn forward(&self, input: Array2<F>, hops: &[Hop]) -> Result<Tape<F>> {
        if hops.len() != self.layers.len() {
            return Err(Error::Shape(format!(
                "{} hops for {} layers",
                hops.len(),
                self.layers.len()
            )));
        }
        let mut levels = Vec::with_capacity(hops.len() + 1);
        let mut caches = Vec::with_capacity(hops.len());
        levels.push(input);
        for (l, (layer, hop)) in self.layers.iter().zip(hops).enumerate() {
            let x = &levels[l];
            if x.nrows() != hop.src_len() || x.ncols() != layer.in_dim {
                return Err(Error::Shape(format!(
                    "layer {l} expects {} x {} input, got {} x {}",
                    hop.src_len(),
                    layer.in_dim,
                    x.nrows(),
                    x.ncols()
                )));
            }
            let (out, cache) = layers::forward(layer, self.layer_tensors(l), x, hop);
            levels.push(out);
            caches.push(cache);
        }
        if self.spec.residual && matches!(self.spec.arch, Arch::RetexoBlock(_)) {
            let own = own_rows(hops);
            let (head, tail) = levels.split_at_mut(1);
            let input = &head[0];
            let out = tail.last_mut().expect("at least one layer");
            for (i, &r) in own.iter().enumerate() {
                let mut row = out.row_mut(i);
                row += &input.row(r);
            }
        }
        Ok(Tape { levels, caches })
    }

    /// Back-propagates `d_logits` through the tape; returns gradients with
    /// the same layout as `self.params`.
    pub fn backward(&self, tape: &Tape<F>, hops: &[Hop], d_logits: Array2<F>) -> ParamSet<F> {
        let mut grads: Vec<Vec<Array2<F>>> = vec![Vec::new(); self.layers.len()];
        let mut d = d_logits;
        for l in (0..self.layers.len()).rev() {
            let (g, dx) = layers::backward(
                &self.layers[l],
                self.layer_tensors(l),
                &tape.levels[l],
                &hops[l],
                &tape.caches[l],
                &d,
                l > 0,
            );
            grads[l] = g;
            if let Some(dx) = dx {
                d = dx;
            }
        }
        ParamSet(grads.into_iter().flatten().collect())
    }

    /// Mean cross-entropy over the output rows, its gradient, and the number
    /// of correctly classified rows.
    pub fn loss_and_grad_batch(
        &self,
        input: Array2<F>,
        hops: &[Hop],
        labels: &[usize],
    ) -> Result<(F, ParamSet<F>, usize)> {
        let tape = self.forward(input, hops)?;
        let out = softmax_cross_entropy(tape.logits(), labels)?;
        let grads = self.backward(&tape, hops, out.d_logits);
        Ok((out.loss, grads, out.correct))
    }

    /// Mean loss and correct count without gradients.
    pub fn evaluate_batch(&self, input: Array2<F>, hops: &[Hop], labels: &[usize]) -> Result<(F, usize)> {
        let tape = self.forward(input, hops)?;
        let out = softmax_cross_entropy(tape.logits(), labels)?;
        Ok((out.loss, out.correct))
    }

    pub fn logits(&self, input: Array2<F>, hops: &[Hop]) -> Result<Array2<F>> {
        let mut tape = self.forward(input, hops)?;
        Ok(tape.levels.pop().unwrap())
    }
}

/// Input row holding each output row's own node, composed through all hops.
pub(crate) fn own_rows(hops: &[Hop]) -> Vec<usize> {
    let last = hops.last().expect("at least one hop");
    (0..last.len())
        .map(|i| hops.iter().rev().fold(i, |r, h| h.self_index(r)))
        .collect()
}
