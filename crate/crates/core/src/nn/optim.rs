use ndarray::Zip;
use serde::{Deserialize, Serialize};

use super::{ModelParams, ParamSet, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl SgdConfig {
    pub fn new(lr: f64) -> Self {
        SgdConfig {
            lr,
            momentum: 0.9,
            weight_decay: 5e-4,
        }
    }

    pub fn plain(lr: f64) -> Self {
        SgdConfig {
            lr,
            momentum: 0.0,
            weight_decay: 0.0,
        }
    }
}

/// SGD with classic momentum; weight decay is folded into the gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<F: Real = f32> {
    pub config: SgdConfig,
    pub velocity: Option<ParamSet<F>>,
}

impl<F: Real> OptimizerState<F> {
    pub fn new(config: SgdConfig) -> Self {
        OptimizerState {
            config,
            velocity: None,
        }
    }

    pub fn reset(&mut self) {
        self.velocity = None;
    }

    /// `v <- mu v + g + wd p`, then `p <- p - lr v`.
    pub fn step(&mut self, params: &mut ParamSet<F>, grads: &ParamSet<F>) {
        assert!(params.same_shape(grads), "gradient shape differs from parameters");
        let velocity = self
            .velocity
            .get_or_insert_with(|| ParamSet::zeros_like(params));
        let mu = F::lit(self.config.momentum);
        let wd = F::lit(self.config.weight_decay);
        let lr = F::lit(self.config.lr);
        for ((p, g), v) in params.0.iter_mut().zip(&grads.0).zip(velocity.0.iter_mut()) {
            Zip::from(p).and(g).and(v).for_each(|p, &g, v| {
                *v = mu * *v + g + wd * *p;
                *p -= lr * *v;
            });
        }
    }
}

/// Functional form of [`OptimizerState::step`].
pub fn sgd_step<F: Real>(
    p: &ModelParams<F>,
    o: &mut OptimizerState<F>,
    grads: &ParamSet<F>,
) -> ModelParams<F> {
    let mut next = p.clone();
    o.step(&mut next.params, grads);
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn scalar_set(v: f64) -> ParamSet<f64> {
        ParamSet(vec![Array2::from_elem((1, 1), v)])
    }

    #[test]
    fn plain_sgd_is_gradient_descent() {
        let mut p = scalar_set(1.0);
        let mut o = OptimizerState::new(SgdConfig::plain(0.1));
        o.step(&mut p, &scalar_set(2.0));
        assert_eq!(p.0[0][[0, 0]], 1.0 - 0.1 * 2.0);
    }

    #[test]
    fn second_step_delta_includes_momentum() {
        let cfg = SgdConfig {
            lr: 0.1,
            momentum: 0.9,
            weight_decay: 0.0,
        };
        let mut p = scalar_set(0.0);
        let mut o = OptimizerState::new(cfg);
        let g = scalar_set(1.0);
        o.step(&mut p, &g);
        let before = p.0[0][[0, 0]];
        o.step(&mut p, &g);
        let delta = before - p.0[0][[0, 0]];
        assert!((delta - 0.1 * 1.0 * 1.9).abs() < 1e-15);
    }

    #[test]
    fn trajectory_matches_scalar_recurrence() {
        let cfg = SgdConfig::new(0.05);
        let grads = [0.3, -1.2, 0.7, 0.0, 2.5];
        let mut p = scalar_set(0.8);
        let mut o = OptimizerState::new(cfg);
        let (mut ps, mut vs) = (0.8f64, 0.0f64);
        for g in grads {
            o.step(&mut p, &scalar_set(g));
            vs = 0.9 * vs + g + 5e-4 * ps;
            ps -= 0.05 * vs;
            assert!((p.0[0][[0, 0]] - ps).abs() < 1e-7);
        }
    }

    #[test]
    fn reset_clears_velocity() {
        let mut p = scalar_set(0.0);
        let mut o = OptimizerState::new(SgdConfig::new(0.1));
        o.step(&mut p, &scalar_set(1.0));
        assert!(o.velocity.is_some());
        o.reset();
        assert!(o.velocity.is_none());
    }
}
