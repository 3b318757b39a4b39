//! Central finite differences against the hand-written backward pass.

use ndarray::Array2;
use rand::Rng;

use super::{softmax_cross_entropy, GnnKind, Hop, ModelParams, ModelSpec};
use crate::error::Result;
use crate::rng::rng_for;

const EPS: f64 = 1e-3;
/// Gradient magnitudes below this are compared absolutely.
const FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradCheckArch {
    Mlp,
    GcnBlock,
    SageBlock,
    GatBlock { heads: usize },
}

impl GradCheckArch {
    fn spec(self, (i, h, o): (usize, usize, usize)) -> ModelSpec {
        match self {
            GradCheckArch::Mlp => ModelSpec::mlp(i, h, o),
            GradCheckArch::GcnBlock => ModelSpec::retexo_block(GnnKind::Gcn, i, h, o),
            GradCheckArch::SageBlock => ModelSpec::retexo_block(GnnKind::Sage, i, h, o).with_pool_dim(h),
            GradCheckArch::GatBlock { heads } => ModelSpec::retexo_block(GnnKind::Gat, i, h, o).with_heads(heads),
        }
    }
}

/// Detailed outcome of a gradient check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Entries whose perturbation flipped a ReLU, LeakyReLU or max-pool
    /// branch; finite differences are meaningless there.
    pub skipped_at_kinks: usize,
}

/// Worst relative error between analytic and numerical gradients over every
/// parameter of a small randomly initialised model.
pub fn grad_check(arch: GradCheckArch, dims: (usize, usize, usize), seed: u64) -> f64 {
    grad_check_report(arch, dims, seed)
        .expect("grad_check dims must form a valid model")
        .max_rel_error
}

pub fn grad_check_report(arch: GradCheckArch, dims: (usize, usize, usize), seed: u64) -> Result<GradCheckReport> {
    let mut rng = rng_for(&[0x6772_6164, seed]);
    let mut model = ModelParams::<f64>::init(arch.spec(dims), seed)?;
    for t in model.params.0.iter_mut() {
        t.mapv_inplace(|v| v + rng.random_range(-0.1..0.1));
    }
    let (x, hops) = toy_batch(arch, dims.0, &mut rng)?;
    let labels: Vec<usize> = (0..hops.last().unwrap().len())
        .map(|_| rng.random_range(0..dims.2))
        .collect();
    check(&model, &x, &hops, &labels)
}

fn toy_batch(arch: GradCheckArch, dim: usize, rng: &mut impl Rng) -> Result<(Array2<f64>, Vec<Hop>)> {
    let x = Array2::from_shape_simple_fn((6, dim), || rng.random_range(-1.0..1.0));
    let hops = match arch {
        GradCheckArch::Mlp => vec![Hop::identity(6), Hop::identity(6)],
        _ => vec![
            Hop::new(
                6,
                vec![0, 1, 2, 5],
                vec![vec![1, 3, 4], vec![0], vec![], vec![1, 2, 3, 4]],
            )?,
            Hop::identity(4),
        ],
    };
    Ok((x, hops))
}

fn check(model: &ModelParams<f64>, x: &Array2<f64>, hops: &[Hop], labels: &[usize]) -> Result<GradCheckReport> {
    let tape = model.forward(x.clone(), hops)?;
    let base_pattern = tape.branch_pattern();
    let out = softmax_cross_entropy(tape.logits(), labels)?;
    let grads = model.backward(&tape, hops, out.d_logits);

    let eval = |m: &ModelParams<f64>| -> Result<(f64, Vec<usize>)> {
        let t = m.forward(x.clone(), hops)?;
        let loss = softmax_cross_entropy(t.logits(), labels)?.loss;
        Ok((loss, t.branch_pattern()))
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        skipped_at_kinks: 0,
    };
    let mut probe = model.clone();
    for (ti, g) in grads.0.iter().enumerate() {
        for (idx, &analytic) in g.indexed_iter() {
            let orig = probe.params.0[ti][idx];
            probe.params.0[ti][idx] = orig + EPS;
            let (lp, pp) = eval(&probe)?;
            probe.params.0[ti][idx] = orig - EPS;
            let (lm, pm) = eval(&probe)?;
            probe.params.0[ti][idx] = orig;
            if pp != base_pattern || pm != base_pattern {
                report.skipped_at_kinks += 1;
                continue;
            }
            let numeric = (lp - lm) / (2.0 * EPS);
            let denom = analytic.abs().max(numeric.abs()).max(FLOOR);
            let rel = (analytic - numeric).abs() / denom;
            report.max_rel_error = report.max_rel_error.max(rel);
            report.checked += 1;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mlp_small_dims() {
        assert!(grad_check(GradCheckArch::Mlp, (4, 3, 2), 0) < 1e-4);
    }

    #[test]
    fn gat_two_heads() {
        assert!(grad_check(GradCheckArch::GatBlock { heads: 2 }, (4, 4, 2), 0) < 1e-4);
    }

    #[test]
    fn most_entries_are_checked() {
        let r = grad_check_report(GradCheckArch::SageBlock, (5, 6, 3), 1).unwrap();
        assert!(r.checked > 10 * r.skipped_at_kinks.max(1));
    }

    #[test]
    fn zero_input_gives_zero_first_layer_gradient() {
        let model = ModelParams::<f64>::init(GradCheckArch::GcnBlock.spec((3, 4, 2)), 5).unwrap();
        let x = Array2::zeros((6, 3));
        let (_, hops) = toy_batch(GradCheckArch::GcnBlock, 3, &mut rng_for(&[0])).unwrap();
        let tape = model.forward(x, &hops).unwrap();
        let out = softmax_cross_entropy(tape.logits(), &[0, 1, 0, 1]).unwrap();
        let grads = model.backward(&tape, &hops, out.d_logits);
        assert!(grads.0[0].iter().all(|&v| v == 0.0));
    }
}
