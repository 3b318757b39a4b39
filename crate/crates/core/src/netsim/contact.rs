use serde::{Deserialize, Serialize};

use crate::rng::{domain, unit_f64};

/// Whether two clients can reach each other.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum Availability {
    Always,
    /// Each contact attempt succeeds independently with probability `p`.
    Probabilistic { p: f64, seed: u64 },
    /// The link is up for the whole round with probability `keep`;
    /// retrying does not help.
    EdgeDrop { keep: f64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactSchedule {
    pub availability: Availability,
    /// Contact attempts allowed before a message-passing round times out.
    pub attempts: u32,
}

impl Default for ContactSchedule {
    fn default() -> Self {
        ContactSchedule::always()
    }
}

impl ContactSchedule {
    pub fn always() -> Self {
        ContactSchedule {
            availability: Availability::Always,
            attempts: 1,
        }
    }

    pub fn edge_drop(keep: f64, seed: u64) -> Self {
        ContactSchedule {
            availability: Availability::EdgeDrop { keep, seed },
            attempts: 1,
        }
    }

    pub fn probabilistic(p: f64, seed: u64, attempts: u32) -> Self {
        ContactSchedule {
            availability: Availability::Probabilistic { p, seed },
            attempts,
        }
    }

    /// Symmetric in `(u, v)` and a pure function of the schedule, the
    /// unordered pair and the round.
    pub fn contact(&self, u: usize, v: usize, round: u64) -> bool {
        let (a, b) = (u.min(v) as u64, u.max(v) as u64);
        match self.availability {
            Availability::Always => true,
            Availability::EdgeDrop { keep, seed } => {
                keep >= 1.0 || unit_f64(&[domain::CONTACT, seed, 0, round, a, b]) < keep
            }
            Availability::Probabilistic { p, seed } => (0..self.attempts as u64)
                .any(|t| unit_f64(&[domain::CONTACT, seed, 1, round, a, b, t]) < p),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn always_connects() {
        assert!(ContactSchedule::always().contact(3, 9, 0));
        let full = ContactSchedule::edge_drop(1.0, 5);
        assert!((0..100).all(|i| full.contact(i, i + 1, 2)));
    }

    #[test]
    fn edge_drop_half_keeps_about_half() {
        let s = ContactSchedule::edge_drop(0.5, 11);
        let kept = (0..10_000).filter(|&i| s.contact(i, i + 10_000, 1)).count();
        assert!((kept as f64 / 1e4 - 0.5).abs() < 0.02);
    }

    #[test]
    fn more_attempts_help() {
        let one = ContactSchedule::probabilistic(0.3, 2, 1);
        let five = ContactSchedule::probabilistic(0.3, 2, 5);
        let c1 = (0..5000).filter(|&i| one.contact(i, i + 1, 0)).count();
        let c5 = (0..5000).filter(|&i| five.contact(i, i + 1, 0)).count();
        assert!(c5 > c1);
        assert!(((c5 as f64 / 5000.0) - (1.0 - 0.7f64.powi(5))).abs() < 0.03);
    }
}
