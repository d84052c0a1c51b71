//! Virtual queues enforcing long-run capacity targets.
//!
//! Each constrained agent carries a nonnegative backlog that grows by 1 when
//! the agent is selected and drains by its target share every round:
//!
//! `Q'_a = max(Q_a + 1{a = selected} - alpha_a, 0)`
//!
//! The queue acts as a time-varying shadow-price estimate: selection
//! penalizes agent scores by `eta * Q_a`, discouraging overuse while the
//! backlog is positive. Unconstrained agents have no queue (pinned at 0).

use alloc::vec;
use alloc::vec::Vec;

use crate::domain::CapacityProfile;
use crate::error::Error;
use crate::Result;

/// Per-agent virtual queue state plus the penalty weight `eta`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QueueBank {
    q: Vec<f64>,
    eta: f64,
    profile: CapacityProfile,
}

impl QueueBank {
    /// Fresh bank with all queues at 0.
    pub fn new(profile: CapacityProfile, eta: f64) -> Result<Self> {
        if !eta.is_finite() || eta < 0.0 {
            return Err(Error::NonFinite { place: "eta" });
        }
        Ok(Self {
            q: vec![0.0; profile.num_agents()],
            eta,
            profile,
        })
    }

    pub fn queues(&self) -> &[f64] {
        &self.q
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn profile(&self) -> &CapacityProfile {
        &self.profile
    }

    /// One round of the queue recursion after `selected` received the task.
    /// Every constrained queue updates (the drain applies whether or not the
    /// agent was selected); unconstrained queues stay at 0.
    pub fn step(&mut self, selected: usize) -> Result<()> {
        let agents = self.q.len();
        if selected >= agents {
            return Err(Error::InvalidAgent {
                agent: selected,
                agents,
            });
        }
        for a in 0..agents {
            if self.profile.is_unconstrained(a) {
                continue;
            }
            let arrival = if a == selected { 1.0 } else { 0.0 };
            self.q[a] = (self.q[a] + arrival - self.profile.alpha(a)).max(0.0);
        }
        Ok(())
    }

    /// Batch form of the recursion: `Q'_a = max(Q_a + N_a - B * alpha_a, 0)`
    /// where `counts` are per-agent assignment counts over a batch of `batch`
    /// tasks.
    pub fn batch_step(&mut self, counts: &[u64], batch: u64) -> Result<()> {
        if counts.len() != self.q.len() {
            return Err(Error::DimensionMismatch {
                expected: self.q.len(),
                got: counts.len(),
            });
        }
        let total: u64 = counts.iter().sum();
        if total != batch {
            return Err(Error::CountMismatch {
                expected: batch,
                got: total,
            });
        }
        for a in 0..self.q.len() {
            if self.profile.is_unconstrained(a) {
                continue;
            }
            self.q[a] =
                (self.q[a] + counts[a] as f64 - batch as f64 * self.profile.alpha(a)).max(0.0);
        }
        Ok(())
    }

    /// Score penalties `eta * Q_a`; exactly 0 for unconstrained agents.
    pub fn penalties(&self) -> Vec<f64> {
        self.q.iter().map(|&q| self.eta * q).collect()
    }
}
