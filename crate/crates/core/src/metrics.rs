//! Rejection rates, their theoretical lower bounds, consistency checks and
//! communication counts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hypothesis::SourceSet;
use crate::network::DistanceMatrix;
use crate::trace::BeliefTrace;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("rate is undefined at t = 0")]
    ZeroTime,
    #[error("no snapshot stored at t = {0}")]
    MissingStep(u64),
}

/// `-ln mu / t`.
pub fn empirical_rate(log_mu: f64, t: u64) -> Result<f64, MetricsError> {
    if t == 0 {
        return Err(MetricsError::ZeroTime);
    }
    Ok(-log_mu / t as f64)
}

/// Rejection rate of `theta` by `agent` at step `t` of a stored trace.
pub fn trace_rate(
    trace: &BeliefTrace,
    agent: usize,
    theta: usize,
    truth: usize,
    t: u64,
) -> Result<f64, MetricsError> {
    if theta == truth {
        log::warn!("rejection rate requested for the true hypothesis {}", truth + 1);
    }
    let snap = trace.at(t).ok_or(MetricsError::MissingStep(t))?;
    empirical_rate(snap.states[agent].log_mu[theta], t)
}

/// Lower bound on the rejection rate of `theta` at `agent` under sparse
/// monitoring: `max over sources v of alpha^d(v, agent) * K_v(truth, theta)`.
pub fn rate_bound_event(
    sources: &SourceSet,
    distances: &DistanceMatrix,
    alpha: f64,
    agent: usize,
    truth: usize,
    theta: usize,
) -> f64 {
    let set = sources.sources(truth, theta);
    if set.is_empty() {
        log::warn!(
            "no agent separates hypothesis {} from {}: rate bound is 0",
            truth + 1,
            theta + 1
        );
        return 0.0;
    }
    set.into_iter()
        .filter_map(|v| {
            distances
                .get(v, agent)
                .map(|d| alpha.powi(d as i32) * sources.kl(v, truth, theta))
        })
        .fold(0.0, f64::max)
}

/// Lower bound under `bits`-bit adaptive quantization:
/// `max over sources v of min(bits * ln 2, K_v(truth, theta))`.
pub fn rate_bound_quantized(sources: &SourceSet, bits: u32, truth: usize, theta: usize) -> f64 {
    let cap = f64::from(bits) * std::f64::consts::LN_2;
    let set = sources.sources(truth, theta);
    if set.is_empty() {
        log::warn!(
            "no agent separates hypothesis {} from {}: rate bound is 0",
            truth + 1,
            theta + 1
        );
        return 0.0;
    }
    set.into_iter()
        .map(|v| cap.min(sources.kl(v, truth, theta)))
        .fold(0.0, f64::max)
}

/// Steps `t` with `t > horizon - ceil(fraction * horizon)`.
pub fn final_window_start(horizon: u64, fraction: f64) -> u64 {
    let width = (fraction * horizon as f64).ceil() as u64;
    horizon.saturating_sub(width) + 1
}

/// Every `(t, ln mu)` with `t >= from` has `mu >= threshold`.
pub fn consistency_check<I>(series: I, from: u64, threshold: f64) -> bool
where
    I: IntoIterator<Item = (u64, f64)>,
{
    let log_threshold = threshold.ln();
    series
        .into_iter()
        .filter(|&(t, _)| t >= from)
        .all(|(_, log_mu)| log_mu >= log_threshold)
}

/// Consistency flag per agent over the final `window_fraction` of the run.
pub fn consistent_agents(
    trace: &BeliefTrace,
    truth: usize,
    threshold: f64,
    window_fraction: f64,
) -> Vec<bool> {
    let from = final_window_start(trace.horizon(), window_fraction);
    let agents = trace.last().map_or(0, |s| s.states.len());
    (0..agents)
        .map(|i| consistency_check(trace.log_mu_series(i, truth), from, threshold))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    /// One-based.
    pub agent: usize,
    /// One-based.
    pub theta: usize,
    pub empirical: f64,
    /// Asymptotic lower bound, where one is known.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    /// `empirical - bound`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RateReport {
    pub t: u64,
    pub rows: Vec<RateRow>,
}

impl RateReport {
    /// Empirical rate at the last stored step for every agent and false
    /// hypothesis, next to `bound(agent, theta)`.
    pub fn from_trace<F>(trace: &BeliefTrace, truth: usize, mut bound: F) -> Self
    where
        F: FnMut(usize, usize) -> Option<f64>,
    {
        let Some(last) = trace.last() else {
            return Self::default();
        };
        let mut rows = Vec::new();
        for (i, state) in last.states.iter().enumerate() {
            for theta in (0..state.log_mu.len()).filter(|&th| th != truth) {
                let empirical = empirical_rate(state.log_mu[theta], last.t).unwrap_or(f64::NAN);
                let b = bound(i, theta);
                rows.push(RateRow {
                    agent: i + 1,
                    theta: theta + 1,
                    empirical,
                    bound: b,
                    margin: b.map(|b| empirical - b),
                });
            }
        }
        Self { t: last.t, rows }
    }

    pub fn get(&self, agent: usize, theta: usize) -> Option<&RateRow> {
        self.rows
            .iter()
            .find(|r| r.agent == agent + 1 && r.theta == theta + 1)
    }
}

/// One message over one directed link about one hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinkUse {
    pub t: u64,
    pub sender: usize,
    pub receiver: usize,
    pub theta: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkStats {
    /// One-based.
    pub sender: usize,
    /// One-based.
    pub receiver: usize,
    /// One-based.
    pub theta: usize,
    pub count: u64,
    pub last_t: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CommReport {
    pub links: Vec<LinkStats>,
    /// Messages sent, by one-based agent id order.
    pub sent_per_agent: Vec<u64>,
    pub total: u64,
    /// Messages a protocol sending on every link at every monitoring step
    /// would have used.
    pub budget: u64,
}

impl CommReport {
    pub fn link(&self, sender: usize, receiver: usize, theta: usize) -> Option<&LinkStats> {
        self.links
            .iter()
            .find(|l| l.sender == sender + 1 && l.receiver == receiver + 1 && l.theta == theta + 1)
    }

    /// Count on a link, zero if never used.
    pub fn count(&self, sender: usize, receiver: usize, theta: usize) -> u64 {
        self.link(sender, receiver, theta).map_or(0, |l| l.count)
    }
}

/// Exact per-link counts and last-use times.
pub fn comm_stats<I>(uses: I, agents: usize, budget: u64) -> CommReport
where
    I: IntoIterator<Item = LinkUse>,
{
    let mut map: BTreeMap<(usize, usize, usize), (u64, u64)> = BTreeMap::new();
    let mut sent_per_agent = vec![0u64; agents];
    let mut total = 0;
    for u in uses {
        let entry = map.entry((u.sender, u.receiver, u.theta)).or_insert((0, 0));
        entry.0 += 1;
        entry.1 = entry.1.max(u.t);
        sent_per_agent[u.sender] += 1;
        total += 1;
    }
    let links = map
        .into_iter()
        .map(|((s, r, th), (count, last_t))| LinkStats {
            sender: s + 1,
            receiver: r + 1,
            theta: th + 1,
            count,
            last_t,
        })
        .collect();
    CommReport {
        links,
        sent_per_agent,
        total,
        budget,
    }
}
