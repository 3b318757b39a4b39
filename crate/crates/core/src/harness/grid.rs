use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::experiment::run_on;
use crate::error::{Error, Result};
use crate::graph::GraphBundle;

/// Learning rates and hidden sizes to try.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpace {
    pub lrs: Vec<f64>,
    pub hiddens: Vec<usize>,
}

impl Default for GridSpace {
    fn default() -> Self {
        GridSpace {
            lrs: vec![0.005, 0.01, 0.025, 0.05, 0.075, 0.1],
            hiddens: vec![64, 128, 256],
        }
    }
}

impl GridSpace {
    pub fn points(&self) -> Vec<(f64, usize)> {
        self.lrs
            .iter()
            .flat_map(|&lr| self.hiddens.iter().map(move |&h| (lr, h)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub lr: f64,
    pub hidden: usize,
    /// Mean over repeats of the selected model's validation loss.
    pub val_loss: f64,
}

/// Lower loss first, then lower learning rate, then smaller hidden size.
pub fn grid_order(a: &GridPoint, b: &GridPoint) -> Ordering {
    a.val_loss
        .total_cmp(&b.val_loss)
        .then(a.lr.total_cmp(&b.lr))
        .then(a.hidden.cmp(&b.hidden))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: ExperimentConfig,
    pub best_point: GridPoint,
    /// Every evaluated point, in the space's enumeration order.
    pub evaluated: Vec<GridPoint>,
}

/// Picks the best point from already evaluated ones.
pub fn select_best(points: &[GridPoint]) -> Option<GridPoint> {
    points.iter().copied().min_by(grid_order)
}

/// Trains `base` at every point of `space` (in parallel) and keeps the one
/// with the lowest validation loss.
pub fn grid_search(g: &GraphBundle, dataset: &str, base: &ExperimentConfig, space: &GridSpace) -> Result<GridResult> {
    let points = space.points();
    if points.is_empty() {
        return Err(Error::Config("grid search space is empty".into()));
    }
    let evaluated = points
        .par_iter()
        .map(|&(lr, hidden)| {
            let report = run_on(g, dataset, &base.clone().with_hyper(lr, hidden))?;
            Ok(GridPoint {
                lr,
                hidden,
                val_loss: report.val_loss_mean,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best_point = select_best(&evaluated).expect("non-empty");
    Ok(GridResult {
        best: base.clone().with_hyper(best_point.lr, best_point.hidden).resolved(),
        best_point,
        evaluated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{Family, Protocol};
    use crate::harness::synth::{synth_graph, SynthSpec};

    #[test]
    fn default_space_has_eighteen_points() {
        assert_eq!(GridSpace::default().points().len(), 18);
    }

    #[test]
    fn ties_prefer_lower_lr_then_smaller_hidden() {
        let p = |lr, hidden| GridPoint { lr, hidden, val_loss: 1.0 };
        let pts = [p(0.1, 64), p(0.01, 256), p(0.01, 128), p(0.05, 64)];
        assert_eq!(select_best(&pts), Some(p(0.01, 128)));
        let mut better = p(0.1, 256);
        better.val_loss = 0.5;
        assert_eq!(select_best(&[pts[0], better]), Some(better));
    }

    #[test]
    fn empty_space_is_an_error() {
        let g = synth_graph(&SynthSpec::new(20, 2, 0.9, 4, 3.0, 0)).unwrap();
        let space = GridSpace { lrs: vec![], hiddens: vec![64] };
        let base = ExperimentConfig::new(Family::Mlp, Protocol::Retexo);
        assert!(matches!(grid_search(&g, "t", &base, &space), Err(Error::Config(_))));
    }

    #[test]
    fn single_point_space_returns_it() {
        let g = synth_graph(&SynthSpec::new(40, 2, 0.9, 4, 3.0, 0)).unwrap();
        let space = GridSpace { lrs: vec![0.05], hiddens: vec![8] };
        let base = ExperimentConfig::new(Family::Gcn, Protocol::Retexo).with_rounds(3).with_repeats(1);
        let r = grid_search(&g, "t", &base, &space).unwrap();
        assert_eq!((r.best.lr, r.best.hidden), (Some(0.05), Some(8)));
        assert_eq!(r.evaluated.len(), 1);
    }
}
