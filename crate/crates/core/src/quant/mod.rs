//! Adaptive quantization of beliefs.
//!
//! Each agent keeps, per hypothesis, the upper end `q` of its quantizer range
//! `[0, q]`, starting at 1. When its belief drops strictly below `q` it sends
//! the `B`-bit index of the bin holding the belief and shrinks `q` to that
//! bin's upper edge. Neighbors hold the same `q` and decode the index
//! exactly. Values of `q` are kept as natural logs.

pub mod wire;

pub use wire::{payload_len, read_bin, write_bin, WireError, WireMessage};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{local_step, BeliefState};
use crate::hypothesis::{LikelihoodModel, SourceSet};
use crate::network::Graph;

/// Widest supported bin index; `J / 2^B` stays exact in binary64.
pub const MAX_BITS: u32 = 52;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantError {
    #[error("bit width {0} outside 1..={MAX_BITS}")]
    Bits(u32),
    #[error("range [{lo}, {hi}] is empty or inverted")]
    Range { lo: f64, hi: f64 },
    #[error("value {x} outside [{lo}, {hi}]")]
    OutOfRange { x: f64, lo: f64, hi: f64 },
    #[error("belief ln {log_mu} is not below the range end ln {log_q}")]
    NotBelowRange { log_mu: f64, log_q: f64 },
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("agent {receiver} decoded q={decoded} from agent {sender} on hypothesis {theta}, sender holds {expected}")]
    ViewMismatch {
        sender: usize,
        receiver: usize,
        theta: usize,
        decoded: f64,
        expected: f64,
    },
}

/// Bin index `J` in `1..=2^B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BinIndex {
    index: u64,
    bits: u32,
}

impl BinIndex {
    pub fn new(index: u64, bits: u32) -> Result<Self, WireError> {
        if bits == 0 || bits > MAX_BITS {
            return Err(WireError::Bits(bits));
        }
        if index == 0 || index > 1u64 << bits {
            return Err(WireError::BinRange { index, bits });
        }
        Ok(Self { index, bits })
    }

    pub fn get(self) -> u64 {
        self.index
    }

    pub fn bits(self) -> u32 {
        self.bits
    }
}

fn check_bits(bits: u32) -> Result<f64, QuantError> {
    if bits == 0 || bits > MAX_BITS {
        return Err(QuantError::Bits(bits));
    }
    Ok((1u64 << bits) as f64)
}

/// Upper edge of `x`'s bin when `[lo, hi]` is cut into `2^bits` equal bins.
pub fn quantize(x: f64, lo: f64, hi: f64, bits: u32) -> Result<f64, QuantError> {
    let bins = check_bits(bits)?;
    if !(lo < hi) {
        return Err(QuantError::Range { lo, hi });
    }
    if !(lo <= x && x <= hi) {
        return Err(QuantError::OutOfRange { x, lo, hi });
    }
    let width = (hi - lo) / bins;
    Ok(lo + width * ((x - lo) / width).ceil())
}

/// Receiver side: the new range end implied by bin `bin` of `[0, q_prev]`.
pub fn decode_belief(log_q_prev: f64, bin: BinIndex) -> f64 {
    let bins = (1u64 << bin.bits()) as f64;
    log_q_prev + (bin.get() as f64 / bins).ln()
}

/// Sender side: bins `mu` within `[0, q_prev)`, returning the new range end
/// and the index to transmit.
///
/// The index is `ceil(r * 2^B)` with `r = mu / q_prev`, clamped to at least
/// 1, then nudged to the smallest bin whose decoded end is not below `mu` in
/// log space. The nudge only matters when `mu` sits on a bin edge and the
/// ratio and log computations round apart.
pub fn encode_belief(log_q_prev: f64, log_mu: f64, bits: u32) -> Result<(f64, BinIndex), QuantError> {
    let bins = check_bits(bits)?;
    if !(log_mu < log_q_prev) {
        return Err(QuantError::NotBelowRange {
            log_mu,
            log_q: log_q_prev,
        });
    }
    let top = 1u64 << bits;
    let ratio = (log_mu - log_q_prev).exp();
    let mut index = ((ratio * bins).ceil() as u64).clamp(1, top);
    let mut bin = BinIndex::new(index, bits)?;
    let mut log_q = decode_belief(log_q_prev, bin);
    while log_q < log_mu && index < top {
        index += 1;
        bin = BinIndex::new(index, bits)?;
        log_q = decode_belief(log_q_prev, bin);
    }
    while index > 1 {
        let lower = BinIndex::new(index - 1, bits)?;
        let log_lower = decode_belief(log_q_prev, lower);
        if log_lower < log_mu {
            break;
        }
        index -= 1;
        bin = lower;
        log_q = log_lower;
    }
    Ok((log_q, bin))
}

/// Bits per hypothesis above which quantization no longer caps the
/// rejection rate: `max over true states and agents of K / ln 2`.
pub fn full_rate_bits(sources: &SourceSet, theta: usize) -> f64 {
    let worst = (0..sources.hypotheses())
        .filter(|&truth| truth != theta)
        .map(|truth| sources.max_kl(truth, theta))
        .fold(0.0, f64::max);
    worst / std::f64::consts::LN_2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitBudgetCheck {
    pub theta: usize,
    pub configured: u32,
    pub required: f64,
    pub satisfied: bool,
}

/// Compares configured bit budgets against [`full_rate_bits`].
pub fn check_bit_budget(sources: &SourceSet, bits: &[u32]) -> Vec<BitBudgetCheck> {
    bits.iter()
        .enumerate()
        .map(|(theta, &configured)| {
            let required = full_rate_bits(sources, theta);
            BitBudgetCheck {
                theta: theta + 1,
                configured,
                required,
                satisfied: f64::from(configured) >= required,
            }
        })
        .collect()
}

/// A broadcast of one quantized belief, as logged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantMessage {
    pub t: u64,
    pub sender: usize,
    pub theta: usize,
    pub bin: BinIndex,
    pub log_q_new: f64,
}

/// Range ends `q` held by every agent for itself and for its neighbors.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantState {
    agents: usize,
    hypotheses: usize,
    bits: Vec<u32>,
    // own[i * m + theta]
    own: Vec<f64>,
    // held[(i * n + j) * m + theta]: agent i's copy of q_j(theta)
    held: Vec<f64>,
}

impl QuantState {
    pub fn new(agents: usize, bits: Vec<u32>) -> Result<Self, QuantError> {
        for &b in &bits {
            check_bits(b)?;
        }
        let m = bits.len();
        Ok(Self {
            agents,
            hypotheses: m,
            bits,
            own: vec![0.0; agents * m],
            held: vec![0.0; agents * agents * m],
        })
    }

    pub fn bits(&self) -> &[u32] {
        &self.bits
    }

    /// `ln q_agent(theta)` as held by the agent itself.
    pub fn log_q(&self, agent: usize, theta: usize) -> f64 {
        self.own[agent * self.hypotheses + theta]
    }

    pub fn own_row(&self, agent: usize) -> &[f64] {
        let m = self.hypotheses;
        &self.own[agent * m..(agent + 1) * m]
    }

    /// `holder`'s copy of `owner`'s range ends.
    pub fn held_row(&self, holder: usize, owner: usize) -> &[f64] {
        let start = (holder * self.agents + owner) * self.hypotheses;
        &self.held[start..start + self.hypotheses]
    }

    /// Every neighbor's copy of every agent's `q` equals the original bitwise.
    pub fn views_consistent(&self, graph: &Graph) -> bool {
        (0..self.agents).all(|i| {
            graph.neighbors(i).iter().all(|&j| {
                self.held_row(i, j)
                    .iter()
                    .zip(self.own_row(j))
                    .all(|(a, b)| a.to_bits() == b.to_bits())
            })
        })
    }

    /// Encode step for every agent and hypothesis whose belief fell below
    /// its range end. Appends the resulting broadcasts.
    pub fn encode_all(
        &mut self,
        states: &[BeliefState],
        t: u64,
        messages: &mut Vec<QuantMessage>,
    ) -> Result<(), QuantError> {
        let m = self.hypotheses;
        for (i, state) in states.iter().enumerate() {
            for (theta, &log_mu) in state.log_mu.iter().enumerate() {
                let slot = i * m + theta;
                if log_mu < self.own[slot] {
                    let (log_q_new, bin) = encode_belief(self.own[slot], log_mu, self.bits[theta])?;
                    self.own[slot] = log_q_new;
                    messages.push(QuantMessage {
                        t,
                        sender: i,
                        theta,
                        bin,
                        log_q_new,
                    });
                }
            }
        }
        Ok(())
    }

    /// Every neighbor of each sender decodes the message against its own
    /// copy of the sender's previous `q`. Silent senders keep their held
    /// value. With `audit`, each decoded value is checked against the
    /// sender's.
    pub fn deliver(
        &mut self,
        graph: &Graph,
        messages: &[QuantMessage],
        audit: bool,
    ) -> Result<(), QuantError> {
        let (n, m) = (self.agents, self.hypotheses);
        for msg in messages {
            for &receiver in graph.neighbors(msg.sender) {
                let slot = (receiver * n + msg.sender) * m + msg.theta;
                let decoded = decode_belief(self.held[slot], msg.bin);
                if audit && decoded.to_bits() != msg.log_q_new.to_bits() {
                    return Err(QuantError::ViewMismatch {
                        sender: msg.sender + 1,
                        receiver: receiver + 1,
                        theta: msg.theta + 1,
                        decoded,
                        expected: msg.log_q_new,
                    });
                }
                self.held[slot] = decoded;
            }
        }
        Ok(())
    }
}

/// One step of the quantized min-rule.
#[allow(clippy::too_many_arguments)]
pub fn quantized_round(
    states: &mut [BeliefState],
    quant: &mut QuantState,
    graph: &Graph,
    models: &[LikelihoodModel],
    signals: &[usize],
    t: u64,
    messages: &mut Vec<QuantMessage>,
    audit: bool,
) -> Result<(), QuantError> {
    local_step(states, models, signals);
    let start = messages.len();
    quant.encode_all(states, t, messages)?;
    quant.deliver(graph, &messages[start..], audit)?;
    for (i, state) in states.iter_mut().enumerate() {
        let views = graph.neighbors(i).iter().map(|&j| quant.held_row(i, j));
        state.mubar_merge_quantized(views);
    }
    Ok(())
}
