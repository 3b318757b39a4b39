use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopDecision {
    Continue,
    Stop,
}

/// Tracks the best validation loss seen so far.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarlyStopTracker {
    /// `None` disables stopping; the best round is still tracked.
    pub patience: Option<usize>,
    pub best_loss: f64,
    pub best_round: Option<usize>,
}

impl EarlyStopTracker {
    pub fn new(patience: Option<usize>) -> Self {
        EarlyStopTracker {
            patience,
            best_loss: f64::INFINITY,
            best_round: None,
        }
    }

    /// Records round `round`'s loss and reports whether it is a new best.
    pub fn observe(&mut self, round: usize, loss: f64) -> bool {
        let improved = loss < self.best_loss;
        if improved {
            self.best_loss = loss;
            self.best_round = Some(round);
        }
        improved
    }

    /// Decision after `round` has been observed.
    pub fn decide(&self, round: usize) -> StopDecision {
        match (self.patience, self.best_round) {
            (Some(p), Some(best)) if round - best >= p => StopDecision::Stop,
            (Some(p), None) if round + 1 >= p => StopDecision::Stop,
            _ => StopDecision::Continue,
        }
    }
}

/// Observes one round and decides whether training continues.
pub fn early_stop_check(tracker: &mut EarlyStopTracker, round: usize, val_loss: f64) -> StopDecision {
    tracker.observe(round, val_loss);
    tracker.decide(round)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stop_round(losses: &[f64], patience: usize) -> Option<usize> {
        let mut t = EarlyStopTracker::new(Some(patience));
        losses
            .iter()
            .enumerate()
            .find(|&(r, &l)| early_stop_check(&mut t, r, l) == StopDecision::Stop)
            .map(|(r, _)| r)
    }

    /// Independent reference: first index whose trailing `patience` window
    /// holds no new strict minimum.
    fn scan(losses: &[f64], patience: usize) -> Option<usize> {
        let mut best = f64::INFINITY;
        let mut since = 0usize;
        for (r, &l) in losses.iter().enumerate() {
            if l < best {
                best = l;
                since = 0;
            } else {
                since += 1;
            }
            if since >= patience {
                return Some(r);
            }
        }
        None
    }

    #[test]
    fn decreasing_never_stops() {
        let losses: Vec<f64> = (0..400).map(|r| 10.0 - r as f64 * 0.01).collect();
        assert_eq!(stop_round(&losses, 30), None);
    }

    #[test]
    fn constant_stops_at_best_plus_patience() {
        assert_eq!(stop_round(&[1.0; 100], 30), Some(30));
    }

    #[test]
    fn noisy_sequence_matches_scan() {
        let mut x = 0x1234_5678u64;
        let losses: Vec<f64> = (0..2000)
            .map(|r| {
                x = crate::rng::splitmix64(x);
                1.0 / (1.0 + r as f64 * 0.01) + (x % 1000) as f64 * 1e-3
            })
            .collect();
        for p in [1, 5, 30] {
            assert_eq!(stop_round(&losses, p), scan(&losses, p));
        }
    }

    #[test]
    fn nan_is_never_an_improvement() {
        let mut t = EarlyStopTracker::new(None);
        assert!(!t.observe(0, f64::NAN));
        assert!(t.observe(1, 3.0));
        assert_eq!(t.decide(1000), StopDecision::Continue);
    }
}
