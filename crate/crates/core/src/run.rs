//! Seeded runs, run summaries and seed sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{dense_baseline_step, BeliefState};
use crate::event::{event_triggered_round, time_varying_round, BroadcastEvent, TriggerLedger};
use crate::metrics::{
    comm_stats, consistent_agents, final_window_start, rate_bound_event, rate_bound_quantized,
    CommReport, LinkUse, RateReport,
};
use crate::network::DistanceMatrix;
use crate::quant::{
    check_bit_budget, decode_belief, quantized_round, BinIndex, BitBudgetCheck, QuantError, QuantMessage,
    QuantState,
};
use crate::rng::agent_rngs;
use crate::scenario::{Protocol, Scenario};
use crate::trace::BeliefTrace;

/// Normalization drift that aborts a run.
pub const DRIFT_ABORT: f64 = 1e-6;

/// Normalization drift the invariant report treats as clean.
pub const DRIFT_CLEAN: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invariant breach at step {step}: {detail}")]
    InvariantBreach { step: u64, detail: String },
    #[error("audit failure: {0}")]
    Audit(String),
    #[error(transparent)]
    Quant(#[from] QuantError),
    #[error("sweep needs at least one seed")]
    NoSeeds,
    #[error("output error: {0}")]
    Output(String),
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides the scenario's seed.
    pub seed: Option<u64>,
    /// Overrides the scenario's trace stride.
    pub stride: Option<u64>,
    /// Replay and cross-check every broadcast.
    pub audit: bool,
}

/// Runtime invariant results. Audit-only checks are `None` without `--audit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub max_normalization_drift: f64,
    pub mubar_monotone: bool,
    pub truth_finite: bool,
    pub q_monotone: Option<bool>,
    pub q_truth_finite: Option<bool>,
    pub ledger_coherent: Option<bool>,
    pub views_consistent: Option<bool>,
    pub event_replay: Option<bool>,
    pub over_approximation: Option<bool>,
    pub bin_width_bound: Option<bool>,
}

impl InvariantReport {
    fn new() -> Self {
        Self {
            max_normalization_drift: 0.0,
            mubar_monotone: true,
            truth_finite: true,
            q_monotone: None,
            q_truth_finite: None,
            ledger_coherent: None,
            views_consistent: None,
            event_replay: None,
            over_approximation: None,
            bin_width_bound: None,
        }
    }

    /// Every check that ran passed.
    pub fn all_passed(&self) -> bool {
        self.max_normalization_drift <= DRIFT_CLEAN
            && self.mubar_monotone
            && self.truth_finite
            && [
                self.q_monotone,
                self.q_truth_finite,
                self.ledger_coherent,
                self.views_consistent,
                self.event_replay,
                self.over_approximation,
                self.bin_width_bound,
            ]
            .iter()
            .all(|c| c.unwrap_or(true))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencySummary {
    pub threshold: f64,
    pub window_start: u64,
    pub agents: Vec<bool>,
    pub all: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub algorithm: String,
    pub seed: u64,
    pub horizon: u64,
    /// One-based.
    pub true_state: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// `mu_i(truth)` at the horizon.
    pub final_truth_belief: Vec<f64>,
    pub consistency: ConsistencySummary,
    pub rates: RateReport,
    pub communication: CommReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bit_budget: Option<Vec<BitBudgetCheck>>,
    pub invariants: InvariantReport,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub seed: u64,
    pub trace: BeliefTrace,
    pub events: Vec<BroadcastEvent>,
    pub messages: Vec<QuantMessage>,
    pub summary: Summary,
}

/// Per-step checks that run whether or not auditing is on.
struct StepMonitor {
    previous_mubar: Vec<Vec<f64>>,
    previous_q: Option<Vec<Vec<f64>>>,
    report: InvariantReport,
    audit: bool,
}

impl StepMonitor {
    fn new(initial: &[BeliefState], quant: Option<&QuantState>, audit: bool) -> Self {
        let mut report = InvariantReport::new();
        if audit {
            report.ledger_coherent = Some(true);
            report.views_consistent = Some(true);
            report.event_replay = Some(true);
            report.over_approximation = Some(true);
            report.bin_width_bound = Some(true);
        }
        if quant.is_some() {
            report.q_monotone = Some(true);
            report.q_truth_finite = Some(true);
        }
        Self {
            previous_mubar: initial.iter().map(|s| s.log_mubar.clone()).collect(),
            previous_q: quant.map(|q| (0..initial.len()).map(|i| q.own_row(i).to_vec()).collect()),
            report,
            audit,
        }
    }

    fn check_beliefs(&mut self, t: u64, states: &[BeliefState], truth: usize) -> Result<(), RunError> {
        for (i, state) in states.iter().enumerate() {
            let drift = state.normalization_drift();
            if !(drift <= DRIFT_ABORT) {
                return Err(RunError::InvariantBreach {
                    step: t,
                    detail: format!("agent {} normalization drift {drift:e}", i + 1),
                });
            }
            let r = &mut self.report;
            r.max_normalization_drift = r.max_normalization_drift.max(drift);
            let previous = &mut self.previous_mubar[i];
            if state.log_mubar.iter().zip(previous.iter()).any(|(now, before)| now > before) {
                r.mubar_monotone = false;
            }
            previous.copy_from_slice(&state.log_mubar);
            if !state.log_pi[truth].is_finite() || !state.log_mubar[truth].is_finite() {
                r.truth_finite = false;
            }
        }
        Ok(())
    }

    fn check_quant(&mut self, states: &[BeliefState], quant: &QuantState, messages: &[QuantMessage], truth: usize, graph: &crate::network::Graph) {
        let previous = self.previous_q.as_mut().expect("quantized run");
        if self.audit {
            for msg in messages {
                let log_mu = states[msg.sender].log_mu[msg.theta];
                if msg.log_q_new < log_mu {
                    self.report.over_approximation = Some(false);
                }
                let log_q_prev = previous[msg.sender][msg.theta];
                if msg.log_q_new != decode_belief(log_q_prev, msg.bin)
                    || !within_bin_width(log_q_prev, log_mu, msg.bin)
                {
                    self.report.bin_width_bound = Some(false);
                }
            }
            if !quant.views_consistent(graph) {
                self.report.views_consistent = Some(false);
            }
        }
        for (i, row) in previous.iter_mut().enumerate() {
            let now = quant.own_row(i);
            if now.iter().zip(row.iter()).any(|(a, b)| a > b) {
                self.report.q_monotone = Some(false);
            }
            if !now[truth].is_finite() {
                self.report.q_truth_finite = Some(false);
            }
            row.copy_from_slice(now);
        }
    }
}

/// `q_new - mu <= q_prev / 2^B` for `q_new = q_prev * J / 2^B`, which holds
/// iff `mu >= q_prev * (J - 1) / 2^B`. Compared in log space with slack for
/// the absolute rounding error of logs of this magnitude.
pub fn within_bin_width(log_q_prev: f64, log_mu: f64, bin: BinIndex) -> bool {
    if bin.get() == 1 {
        return true;
    }
    let edge = ((bin.get() - 1) as f64).ln() - f64::from(bin.bits()) * std::f64::consts::LN_2;
    let slack = 8.0 * f64::EPSILON * log_q_prev.abs().max(log_mu.abs()).max(1.0);
    log_mu - log_q_prev >= edge - slack
}

/// Runs one seeded simulation to the horizon.
pub fn run(scenario: &Scenario, options: &RunOptions) -> Result<RunOutput, RunError> {
    let seed = options.seed.unwrap_or(scenario.file.seed);
    let stride = options.stride.unwrap_or(scenario.file.output.stride);
    let horizon = scenario.horizon();
    let n = scenario.agent_count();
    let m = scenario.hypothesis_count();
    let truth = scenario.truth;
    let models = &scenario.models;

    let mut rngs = agent_rngs(seed, n);
    let mut states = scenario.initial.clone();
    let mut trace = BeliefTrace::new(stride, horizon);
    let mut events = Vec::new();
    let mut messages = Vec::new();
    let mut ledger = TriggerLedger::new(n, m);
    let mut quant = match &scenario.protocol {
        Protocol::Quantized { bits } => Some(QuantState::new(n, bits.clone())?),
        _ => None,
    };
    let base = scenario.base_graph();
    let mut monitor = StepMonitor::new(&states, quant.as_ref(), options.audit);
    let mut signals = vec![0usize; n];

    for t in 1..=horizon {
        for (i, (model, rng)) in models.iter().zip(rngs.iter_mut()).enumerate() {
            signals[i] = model.sample(truth, rng);
        }
        let message_start = messages.len();
        match &scenario.protocol {
            Protocol::EventTriggered { policy, .. } => event_triggered_round(
                policy, &mut states, &mut ledger, &base, models, &signals, t, &mut events,
            ),
            Protocol::TimeVarying { policy } => {
                let graph = scenario.network.graph_at(t);
                time_varying_round(
                    policy, &mut states, &mut ledger, &graph, models, &signals, t, &mut events,
                );
            }
            Protocol::DenseBaseline => {
                dense_baseline_step(&mut states, &base, models, &signals);
                for (i, state) in states.iter().enumerate() {
                    for &j in base.neighbors(i) {
                        for (theta, &log_value) in state.log_mu.iter().enumerate() {
                            events.push(BroadcastEvent {
                                t,
                                sender: i,
                                receiver: j,
                                theta,
                                log_value,
                            });
                        }
                    }
                }
            }
            Protocol::Quantized { .. } => {
                let q = quant.as_mut().expect("quantized state");
                quantized_round(
                    &mut states, q, &base, models, &signals, t, &mut messages, options.audit,
                )?;
            }
        }
        monitor.check_beliefs(t, &states, truth)?;
        if let Some(q) = &quant {
            monitor.check_quant(&states, q, &messages[message_start..], truth, &base);
        }
        if options.audit
            && matches!(scenario.protocol, Protocol::EventTriggered { .. } | Protocol::TimeVarying { .. })
            && !ledger.is_coherent()
        {
            monitor.report.ledger_coherent = Some(false);
        }
        trace.record(t, &states);
    }

    if options.audit {
        let policy = match &scenario.protocol {
            Protocol::EventTriggered { policy, .. } | Protocol::TimeVarying { policy } => Some(policy),
            _ => None,
        };
        if let Some(policy) = policy {
            if let Err(e) = policy.audit(n, m, &events) {
                log::error!("event replay audit failed: {e}");
                monitor.report.event_replay = Some(false);
            }
        } else {
            monitor.report.event_replay = None;
        }
        if quant.is_none() {
            monitor.report.views_consistent = None;
            monitor.report.over_approximation = None;
            monitor.report.bin_width_bound = None;
        } else {
            monitor.report.ledger_coherent = None;
        }
        if matches!(scenario.protocol, Protocol::DenseBaseline) {
            monitor.report.ledger_coherent = None;
        }
    }

    let summary = summarize(scenario, seed, &trace, &events, &messages, monitor.report);
    Ok(RunOutput {
        seed,
        trace,
        events,
        messages,
        summary,
    })
}

/// Builds the run summary from the trace and message logs alone.
pub fn summarize(
    scenario: &Scenario,
    seed: u64,
    trace: &BeliefTrace,
    events: &[BroadcastEvent],
    messages: &[QuantMessage],
    invariants: InvariantReport,
) -> Summary {
    let n = scenario.agent_count();
    let m = scenario.hypothesis_count() as u64;
    let truth = scenario.truth;
    let horizon = scenario.horizon();
    let base = scenario.base_graph();
    let sources = &scenario.sources;
    let directed = 2 * base.edge_count() as u64;
    let mut warnings = Vec::new();

    for theta in (0..scenario.hypothesis_count()).filter(|&th| th != truth) {
        let set = sources.sources(truth, theta);
        if set.is_empty() {
            warnings.push(format!(
                "no agent can distinguish hypothesis {} from the truth; its rejection is not guaranteed",
                theta + 1
            ));
        } else if matches!(scenario.protocol, Protocol::TimeVarying { .. })
            && !scenario.network.union_rooted_at(1, &set).unwrap_or(false)
        {
            warnings.push(format!(
                "recurring edges do not reach every agent from the sources of hypothesis {}; its rejection is not guaranteed",
                theta + 1
            ));
        }
    }

    let distances = base.distances();
    let (alpha, bit_budget, budget) = match &scenario.protocol {
        Protocol::EventTriggered { policy, alpha } => {
            (Some(*alpha), None, policy.schedule.len() as u64 * directed * m)
        }
        Protocol::DenseBaseline => (Some(1.0), None, horizon * directed * m),
        Protocol::Quantized { bits } => {
            let checks = check_bit_budget(sources, bits);
            for c in checks.iter().filter(|c| !c.satisfied) {
                warnings.push(format!(
                    "hypothesis {}: {} bits is below {:.4}, so quantization caps its rejection rate",
                    c.theta, c.configured, c.required
                ));
            }
            (None, Some(checks), horizon * directed * m)
        }
        Protocol::TimeVarying { .. } => {
            let total: u64 = (1..=horizon)
                .map(|t| 2 * scenario.network.graph_at(t).edge_count() as u64)
                .sum();
            (None, None, total * m)
        }
    };
    if let Some(a) = alpha {
        if a < crate::event::ALPHA_FLOOR {
            warnings.push(format!("alpha≈0 ({a:e}): no exponential rate guaranteed"));
        }
    }

    let rates = RateReport::from_trace(trace, truth, |i, theta| {
        rate_bound(scenario, &distances, i, theta)
    });

    let uses = events
        .iter()
        .map(|e| LinkUse {
            t: e.t,
            sender: e.sender,
            receiver: e.receiver,
            theta: e.theta,
        })
        .chain(messages.iter().flat_map(|msg| {
            base.neighbors(msg.sender).iter().map(move |&j| LinkUse {
                t: msg.t,
                sender: msg.sender,
                receiver: j,
                theta: msg.theta,
            })
        }));
    let communication = comm_stats(uses, n, budget);

    let c = &scenario.file.consistency;
    let agents = consistent_agents(trace, truth, c.threshold, c.window_fraction);
    let consistency = ConsistencySummary {
        threshold: c.threshold,
        window_start: final_window_start(horizon, c.window_fraction),
        all: agents.iter().all(|&ok| ok),
        agents,
    };

    let final_truth_belief = trace
        .last()
        .map(|s| s.states.iter().map(|st| st.log_mu[truth].exp()).collect())
        .unwrap_or_default();

    Summary {
        scenario: scenario.name().to_string(),
        algorithm: scenario.file.algorithm.label().to_string(),
        seed,
        horizon,
        true_state: truth + 1,
        alpha,
        final_truth_belief,
        consistency,
        rates,
        communication,
        bit_budget,
        invariants,
        warnings,
    }
}

fn rate_bound(scenario: &Scenario, distances: &DistanceMatrix, agent: usize, theta: usize) -> Option<f64> {
    let sources = &scenario.sources;
    let truth = scenario.truth;
    match &scenario.protocol {
        Protocol::EventTriggered { alpha, .. } => {
            Some(rate_bound_event(sources, distances, *alpha, agent, truth, theta))
        }
        Protocol::DenseBaseline => Some(rate_bound_event(sources, distances, 1.0, agent, truth, theta)),
        Protocol::Quantized { bits } => Some(rate_bound_quantized(sources, bits[theta], truth, theta)),
        Protocol::TimeVarying { .. } => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    /// One-based.
    pub agent: usize,
    /// One-based.
    pub theta: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
}

/// Rate bounds of a scenario, computed without running it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub scenario: String,
    pub algorithm: String,
    /// One-based.
    pub true_state: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub rows: Vec<BoundRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bit_budget: Option<Vec<BitBudgetCheck>>,
}

pub fn bounds(scenario: &Scenario) -> BoundsReport {
    let distances = scenario.base_graph().distances();
    let truth = scenario.truth;
    let mut rows = Vec::new();
    for agent in 0..scenario.agent_count() {
        for theta in (0..scenario.hypothesis_count()).filter(|&th| th != truth) {
            rows.push(BoundRow {
                agent: agent + 1,
                theta: theta + 1,
                bound: rate_bound(scenario, &distances, agent, theta),
            });
        }
    }
    let (alpha, bit_budget) = match &scenario.protocol {
        Protocol::EventTriggered { alpha, .. } => (Some(*alpha), None),
        Protocol::DenseBaseline => (Some(1.0), None),
        Protocol::Quantized { bits } => (None, Some(check_bit_budget(&scenario.sources, bits))),
        Protocol::TimeVarying { .. } => (None, None),
    };
    BoundsReport {
        scenario: scenario.name().to_string(),
        algorithm: scenario.file.algorithm.label().to_string(),
        true_state: truth + 1,
        alpha,
        rows,
        bit_budget,
    }
}

/// Minimum, median and maximum over seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let k = sorted.len();
        let median = if k % 2 == 1 {
            sorted[k / 2]
        } else {
            0.5 * (sorted[k / 2 - 1] + sorted[k / 2])
        };
        Self {
            min: sorted[0],
            median,
            max: sorted[k - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSpread {
    pub agent: usize,
    pub theta: usize,
    pub empirical: Spread,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSpread {
    pub sender: usize,
    pub receiver: usize,
    pub theta: usize,
    pub count: Spread,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub scenario: String,
    pub seeds: Vec<u64>,
    pub consistency_pass_rate: f64,
    pub invariants_pass_rate: f64,
    pub rates: Vec<RateSpread>,
    pub links: Vec<LinkSpread>,
    pub total_messages: Spread,
}

impl Aggregate {
    pub fn from_summaries(summaries: &[Summary]) -> Self {
        let runs = summaries.len() as f64;
        let pass = |f: &dyn Fn(&Summary) -> bool| summaries.iter().filter(|s| f(s)).count() as f64 / runs;

        let first = &summaries[0];
        let rates = first
            .rates
            .rows
            .iter()
            .map(|row| {
                let values: Vec<f64> = summaries
                    .iter()
                    .map(|s| {
                        s.rates
                            .rows
                            .iter()
                            .find(|r| r.agent == row.agent && r.theta == row.theta)
                            .map_or(f64::NAN, |r| r.empirical)
                    })
                    .collect();
                RateSpread {
                    agent: row.agent,
                    theta: row.theta,
                    empirical: Spread::of(&values),
                }
            })
            .collect();

        let mut keys: Vec<(usize, usize, usize)> = summaries
            .iter()
            .flat_map(|s| s.communication.links.iter().map(|l| (l.sender, l.receiver, l.theta)))
            .collect();
        keys.sort_unstable();
        keys.dedup();
        let links = keys
            .into_iter()
            .map(|(sender, receiver, theta)| {
                let values: Vec<f64> = summaries
                    .iter()
                    .map(|s| {
                        s.communication
                            .links
                            .iter()
                            .find(|l| l.sender == sender && l.receiver == receiver && l.theta == theta)
                            .map_or(0.0, |l| l.count as f64)
                    })
                    .collect();
                LinkSpread {
                    sender,
                    receiver,
                    theta,
                    count: Spread::of(&values),
                }
            })
            .collect();

        let totals: Vec<f64> = summaries.iter().map(|s| s.communication.total as f64).collect();
        Self {
            scenario: first.scenario.clone(),
            seeds: summaries.iter().map(|s| s.seed).collect(),
            consistency_pass_rate: pass(&|s| s.consistency.all),
            invariants_pass_rate: pass(&|s| s.invariants.all_passed()),
            rates,
            links,
            total_messages: Spread::of(&totals),
        }
    }

    pub fn rate(&self, agent: usize, theta: usize) -> Option<&Spread> {
        self.rates
            .iter()
            .find(|r| r.agent == agent + 1 && r.theta == theta + 1)
            .map(|r| &r.empirical)
    }
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub runs: Vec<Summary>,
    pub aggregate: Aggregate,
}

/// Runs every seed in parallel. `on_run` sees each full output (for
/// persisting per-seed files) before its trace is dropped.
pub fn sweep<F>(scenario: &Scenario, seeds: &[u64], options: &RunOptions, on_run: F) -> Result<SweepReport, RunError>
where
    F: Fn(&RunOutput) -> Result<(), RunError> + Sync,
{
    if seeds.is_empty() {
        return Err(RunError::NoSeeds);
    }
    let runs = seeds
        .par_iter()
        .map(|&seed| {
            let opts = RunOptions {
                seed: Some(seed),
                ..options.clone()
            };
            let out = run(scenario, &opts)?;
            on_run(&out)?;
            Ok(out.summary)
        })
        .collect::<Result<Vec<_>, RunError>>()?;
    let aggregate = Aggregate::from_summaries(&runs);
    Ok(SweepReport { runs, aggregate })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spread_of_single_value() {
        let s = Spread::of(&[0.5]);
        assert_eq!((s.min, s.median, s.max), (0.5, 0.5, 0.5));
    }

    #[test]
    fn spread_even_median() {
        let s = Spread::of(&[4.0, 1.0, 3.0, 2.0]);
        assert_eq!((s.min, s.median, s.max), (1.0, 2.5, 4.0));
    }

    #[test]
    fn short_run_is_deterministic() {
        let mut file = crate::scenario::preset_file("fig3").unwrap();
        file.horizon = 200;
        let scenario = Scenario::from_file(file).unwrap();
        let a = run(&scenario, &RunOptions::default()).unwrap();
        let b = run(&scenario, &RunOptions::default()).unwrap();
        assert_eq!(a.summary, b.summary);
        assert_eq!(a.events, b.events);
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn sweep_with_one_seed_matches_the_run() {
        let mut file = crate::scenario::preset_file("fig4").unwrap();
        file.horizon = 300;
        let scenario = Scenario::from_file(file).unwrap();
        let report = sweep(&scenario, &[9], &RunOptions::default(), |_| Ok(())).unwrap();
        let single = run(&scenario, &RunOptions { seed: Some(9), ..Default::default() }).unwrap();
        assert_eq!(report.runs[0], single.summary);
        let agg = &report.aggregate;
        for row in &single.summary.rates.rows {
            let s = agg.rate(row.agent - 1, row.theta - 1).unwrap();
            assert_eq!((s.min, s.median, s.max), (row.empirical, row.empirical, row.empirical));
        }
        assert_eq!(agg.consistency_pass_rate, if single.summary.consistency.all { 1.0 } else { 0.0 });
        assert!(matches!(sweep(&scenario, &[], &RunOptions::default(), |_| Ok(())), Err(RunError::NoSeeds)));
    }
}
