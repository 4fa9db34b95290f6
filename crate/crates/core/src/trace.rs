//! Time-indexed belief snapshots of one run.

use crate::belief::BeliefState;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: u64,
    pub states: Vec<BeliefState>,
}

/// Belief snapshots at `t = stride, 2 * stride, …` plus the final step.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefTrace {
    stride: u64,
    horizon: u64,
    snapshots: Vec<Snapshot>,
}

impl BeliefTrace {
    pub fn new(stride: u64, horizon: u64) -> Self {
        let stride = stride.max(1);
        Self {
            stride,
            horizon,
            snapshots: Vec::with_capacity((horizon / stride) as usize + 1),
        }
    }

    pub fn stride(&self) -> u64 {
        self.stride
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    /// Whether step `t` is stored.
    pub fn keeps(&self, t: u64) -> bool {
        t % self.stride == 0 || t == self.horizon
    }

    pub fn record(&mut self, t: u64, states: &[BeliefState]) {
        if self.keeps(t) {
            self.snapshots.push(Snapshot {
                t,
                states: states.to_vec(),
            });
        }
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn last(&self) -> Option<&Snapshot> {
        self.snapshots.last()
    }

    pub fn at(&self, t: u64) -> Option<&Snapshot> {
        self.snapshots
            .binary_search_by_key(&t, |s| s.t)
            .ok()
            .map(|i| &self.snapshots[i])
    }

    /// `(t, ln mu_agent(theta))` over the stored steps.
    pub fn log_mu_series(&self, agent: usize, theta: usize) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.snapshots
            .iter()
            .map(move |s| (s.t, s.states[agent].log_mu[theta]))
    }
}
