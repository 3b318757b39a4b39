use ndarray::Array2;

use super::Real;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LossOutput<F: Real> {
    /// Mean cross-entropy over rows.
    pub loss: F,
    /// Gradient of the mean loss with respect to the logits.
    pub d_logits: Array2<F>,
    pub correct: usize,
}

/// Softmax cross-entropy averaged over rows, with its gradient and the
/// number of rows whose argmax equals the label.
pub fn softmax_cross_entropy<F: Real>(logits: &Array2<F>, labels: &[usize]) -> Result<LossOutput<F>> {
    let (n, c) = logits.dim();
    if labels.len() != n {
        return Err(Error::Shape(format!("{} labels for {n} logit rows", labels.len())));
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::Shape(format!("label {l} out of range for {c} classes")));
    }
    let mut d = Array2::zeros((n, c));
    let mut total = F::zero();
    let mut correct = 0;
    let inv_n = if n == 0 { F::zero() } else { F::one() / F::from_usize(n).unwrap() };
    for (i, &label) in labels.iter().enumerate() {
        let row = logits.row(i);
        let mut best = 0;
        for j in 1..c {
            if row[j] > row[best] {
                best = j;
            }
        }
        if best == label {
            correct += 1;
        }
        let mx = row[best];
        let sum: F = row.iter().map(|&v| (v - mx).exp()).sum();
        let lse = mx + sum.ln();
        total += lse - row[label];
        for j in 0..c {
            let p = (row[j] - lse).exp();
            let target = if j == label { F::one() } else { F::zero() };
            d[[i, j]] = (p - target) * inv_n;
        }
    }
    Ok(LossOutput {
        loss: total * inv_n,
        d_logits: d,
        correct,
    })
}
