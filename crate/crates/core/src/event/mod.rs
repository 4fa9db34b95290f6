//! Event-triggered communication: the threshold function, the per-pair
//! broadcast ledger, the trigger condition, protocol rounds and a replay
//! audit of the broadcast log.
//!
//! An agent `i` sends `mu_i(theta)` to neighbor `j` at a monitoring time
//! `t_k` only if
//!
//! ```text
//! mu_i(theta) < gamma(t_k) * min(last_sent_i_to_j(theta), last_sent_j_to_i(theta))
//! ```
//!
//! At `t_1` the whole belief vector goes to every neighbor unconditionally.

mod schedule;

pub use schedule::{
    alpha_numeric, alpha_of, EventSchedule, IntervalFn, ALPHA_FLOOR, ALPHA_PROBE_TIME,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{local_step, BeliefState};
use crate::hypothesis::LikelihoodModel;
use crate::network::Graph;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TriggerError {
    #[error("horizon must be at least 1")]
    Horizon,
    #[error("invalid event-interval function: {0}")]
    Interval(String),
    #[error("invalid threshold function: {0}")]
    Threshold(String),
}

/// Multiplicative innovation factor `gamma(t)` in `(0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Threshold {
    /// `gamma(t) = value`
    Constant { value: f64 },
    /// `gamma(t) = min(1, c * t^-a)`
    Power { c: f64, a: f64 },
}

impl Threshold {
    pub fn validate(&self) -> Result<(), TriggerError> {
        match *self {
            Self::Constant { value } => {
                if !(value > 0.0 && value <= 1.0) {
                    return Err(TriggerError::Threshold(format!(
                        "constant {value} outside (0, 1]"
                    )));
                }
            }
            Self::Power { c, a } => {
                if !(c > 0.0 && c.is_finite()) {
                    return Err(TriggerError::Threshold(format!("scale {c} must be positive")));
                }
                if !(a >= 0.0 && a.is_finite()) {
                    return Err(TriggerError::Threshold(format!(
                        "exponent {a} must be non-negative"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `ln gamma(t)`.
    pub fn log_at(&self, t: u64) -> f64 {
        match *self {
            Self::Constant { value } => value.ln(),
            Self::Power { c, a } => (c.ln() - a * (t as f64).ln()).min(0.0),
        }
    }

    pub fn at(&self, t: u64) -> f64 {
        self.log_at(t).exp()
    }

    /// `ln(1/gamma(t)) / t -> 0`. Both built-in families decay at most
    /// polynomially.
    pub fn is_subexponential(&self) -> bool {
        true
    }
}

/// Trigger condition in log domain, strict inequality.
pub fn should_broadcast(log_mu: f64, log_last_sent: f64, log_last_heard: f64, log_gamma: f64) -> bool {
    log_mu < log_gamma + log_last_sent.min(log_last_heard)
}

/// Last value exchanged about each hypothesis along each directed pair.
///
/// Both endpoints keep their own copy: the sender's record of what it sent
/// and the receiver's record of what it heard. Unused pairs read as `ln 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriggerLedger {
    agents: usize,
    hypotheses: usize,
    // sent[(i * n + j) * m + theta]: i's record of its last send to j
    sent: Vec<f64>,
    // heard[(j * n + i) * m + theta]: j's record of its last receipt from i
    heard: Vec<f64>,
}

impl TriggerLedger {
    pub fn new(agents: usize, hypotheses: usize) -> Self {
        let len = agents * agents * hypotheses;
        Self {
            agents,
            hypotheses,
            sent: vec![0.0; len],
            heard: vec![0.0; len],
        }
    }

    fn slot(&self, a: usize, b: usize, theta: usize) -> usize {
        (a * self.agents + b) * self.hypotheses + theta
    }

    /// `sender`'s record of the last value it sent to `receiver`.
    pub fn last_sent(&self, sender: usize, receiver: usize, theta: usize) -> f64 {
        self.sent[self.slot(sender, receiver, theta)]
    }

    /// `receiver`'s record of the last value it heard from `sender`.
    pub fn last_heard(&self, receiver: usize, sender: usize, theta: usize) -> f64 {
        self.heard[self.slot(receiver, sender, theta)]
    }

    /// Applies one delivered broadcast to both endpoints' records.
    pub fn record(&mut self, sender: usize, receiver: usize, theta: usize, log_value: f64) {
        let s = self.slot(sender, receiver, theta);
        let r = self.slot(receiver, sender, theta);
        self.sent[s] = log_value;
        self.heard[r] = log_value;
    }

    /// Sender-side and receiver-side copies agree bitwise.
    pub fn is_coherent(&self) -> bool {
        for i in 0..self.agents {
            for j in 0..self.agents {
                for theta in 0..self.hypotheses {
                    let a = self.sent[self.slot(i, j, theta)];
                    let b = self.heard[self.slot(j, i, theta)];
                    if a.to_bits() != b.to_bits() {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// One delivered message `sender -> receiver` carrying `ln mu_sender(theta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BroadcastEvent {
    pub t: u64,
    pub sender: usize,
    pub receiver: usize,
    pub theta: usize,
    pub log_value: f64,
}

/// When agents may talk and how much innovation they need.
#[derive(Debug, Clone, PartialEq)]
pub struct TriggerPolicy {
    pub schedule: EventSchedule,
    pub threshold: Threshold,
    /// Send everything at `t = 1` regardless of the condition.
    pub unconditional_first: bool,
}

impl TriggerPolicy {
    /// Monitoring schedule `g`, threshold `gamma`, full exchange at `t_1`.
    pub fn event_triggered(schedule: EventSchedule, threshold: Threshold) -> Self {
        Self {
            schedule,
            threshold,
            unconditional_first: true,
        }
    }

    /// Condition checked at every step with a constant threshold and never
    /// contacted pairs reading as `1`; used with time-varying graphs.
    pub fn every_step(horizon: u64, gamma: f64) -> Result<Self, TriggerError> {
        let threshold = Threshold::Constant { value: gamma };
        threshold.validate()?;
        Ok(Self {
            schedule: EventSchedule::build(IntervalFn::every_step(), horizon)?,
            threshold,
            unconditional_first: false,
        })
    }

    /// Communication phase of step `t`: decide every `(i, j, theta)` send from
    /// the ledger as it stood before the step, then deliver, record and merge.
    /// Appends this step's broadcasts to `events`.
    pub fn communicate(
        &self,
        states: &mut [BeliefState],
        ledger: &mut TriggerLedger,
        graph: &Graph,
        t: u64,
        events: &mut Vec<BroadcastEvent>,
    ) {
        let start = events.len();
        let unconditional = self.unconditional_first && t == 1;
        if unconditional || self.schedule.contains(t) {
            let log_gamma = self.threshold.log_at(t);
            for (i, state) in states.iter().enumerate() {
                for &j in graph.neighbors(i) {
                    for (theta, &log_mu) in state.log_mu.iter().enumerate() {
                        let send = unconditional
                            || should_broadcast(
                                log_mu,
                                ledger.last_sent(i, j, theta),
                                ledger.last_heard(i, j, theta),
                                log_gamma,
                            );
                        if send {
                            events.push(BroadcastEvent {
                                t,
                                sender: i,
                                receiver: j,
                                theta,
                                log_value: log_mu,
                            });
                        }
                    }
                }
            }
        }
        let mut heard: Vec<Vec<(usize, f64)>> = vec![Vec::new(); states.len()];
        for e in &events[start..] {
            ledger.record(e.sender, e.receiver, e.theta, e.log_value);
            heard[e.receiver].push((e.theta, e.log_value));
        }
        for (state, heard) in states.iter_mut().zip(&heard) {
            state
                .mubar_merge(heard)
                .expect("normalized beliefs never exceed 1");
        }
    }

    /// A full protocol step: local updates, then communication.
    #[allow(clippy::too_many_arguments)]
    pub fn round(
        &self,
        states: &mut [BeliefState],
        ledger: &mut TriggerLedger,
        graph: &Graph,
        models: &[LikelihoodModel],
        signals: &[usize],
        t: u64,
        events: &mut Vec<BroadcastEvent>,
    ) {
        local_step(states, models, signals);
        self.communicate(states, ledger, graph, t, events);
    }

    /// Replays a broadcast log from an empty ledger and checks that every
    /// conditional send satisfied the trigger condition against the ledger
    /// at the start of its step.
    pub fn audit(&self, agents: usize, hypotheses: usize, events: &[BroadcastEvent]) -> Result<(), AuditError> {
        let mut ledger = TriggerLedger::new(agents, hypotheses);
        let mut index = 0;
        while index < events.len() {
            let t = events[index].t;
            let end = index + events[index..].iter().take_while(|e| e.t == t).count();
            let step = &events[index..end];
            let unconditional = self.unconditional_first && t == 1;
            if !unconditional && !self.schedule.contains(t) {
                return Err(AuditError::OffSchedule { t });
            }
            if !unconditional {
                let log_gamma = self.threshold.log_at(t);
                for e in step {
                    let sent = ledger.last_sent(e.sender, e.receiver, e.theta);
                    let heard = ledger.last_heard(e.sender, e.receiver, e.theta);
                    if !should_broadcast(e.log_value, sent, heard, log_gamma) {
                        return Err(AuditError::ConditionNotMet {
                            event: *e,
                            bound: log_gamma + sent.min(heard),
                        });
                    }
                }
            }
            for e in step {
                ledger.record(e.sender, e.receiver, e.theta, e.log_value);
            }
            index = end;
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AuditError {
    #[error("broadcast at t={t}, which is not a monitoring time")]
    OffSchedule { t: u64 },
    #[error("broadcast {event:?} does not satisfy the trigger condition (bound {bound})")]
    ConditionNotMet { event: BroadcastEvent, bound: f64 },
}

/// One step with monitoring schedule `g`, threshold `gamma` and a full
/// exchange at `t_1`.
#[allow(clippy::too_many_arguments)]
pub fn event_triggered_round(
    policy: &TriggerPolicy,
    states: &mut [BeliefState],
    ledger: &mut TriggerLedger,
    graph: &Graph,
    models: &[LikelihoodModel],
    signals: &[usize],
    t: u64,
    events: &mut Vec<BroadcastEvent>,
) {
    policy.round(states, ledger, graph, models, signals, t, events);
}

/// One step of the time-varying variant: condition checked every step on
/// the instantaneous graph with constant `gamma`.
#[allow(clippy::too_many_arguments)]
pub fn time_varying_round(
    policy: &TriggerPolicy,
    states: &mut [BeliefState],
    ledger: &mut TriggerLedger,
    graph_at_t: &Graph,
    models: &[LikelihoodModel],
    signals: &[usize],
    t: u64,
    events: &mut Vec<BroadcastEvent>,
) {
    debug_assert!(!policy.unconditional_first);
    policy.round(states, ledger, graph_at_t, models, signals, t, events);
}
