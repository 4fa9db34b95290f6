//! Event-monitoring times, the interval function `g`, its integral `G` and
//! the attenuation limit `alpha`.

use serde::{Deserialize, Serialize};

use super::TriggerError;

/// Horizon at which the numeric `alpha` estimate is taken.
pub const ALPHA_PROBE_TIME: f64 = 1e6;

/// Numeric `alpha` estimates below this mean the schedule grows too fast for
/// any exponential rate guarantee.
pub const ALPHA_FLOOR: f64 = 1e-6;

/// Gap `g(k)` between the `k`-th and `(k+1)`-th monitoring times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum IntervalFn {
    /// `g(k) = value`
    Constant { value: u64 },
    /// `g(k) = k^p`
    Polynomial { p: u32 },
    /// `g(k) = p^k`
    Exponential { p: u64 },
    /// `g(k) = values[k-1]`, holding the last entry afterwards; linear in
    /// between integers.
    Table { values: Vec<f64> },
}

impl IntervalFn {
    pub fn every_step() -> Self {
        Self::Constant { value: 1 }
    }

    pub fn validate(&self) -> Result<(), TriggerError> {
        match self {
            Self::Constant { value } if *value == 0 => {
                Err(TriggerError::Interval("constant gap must be at least 1".into()))
            }
            Self::Polynomial { p } if *p == 0 => {
                Err(TriggerError::Interval("polynomial degree must be positive".into()))
            }
            Self::Exponential { p } if *p == 0 => {
                Err(TriggerError::Interval("exponential base must be positive".into()))
            }
            Self::Table { values } => {
                if values.is_empty() {
                    return Err(TriggerError::Interval("interval table is empty".into()));
                }
                let mut previous = 1.0;
                for (index, &v) in values.iter().enumerate() {
                    let k = index + 1;
                    if !v.is_finite() || v.fract() != 0.0 {
                        return Err(TriggerError::Interval(format!(
                            "g({k}) = {v} is not an integer"
                        )));
                    }
                    if v < previous {
                        return Err(TriggerError::Interval(format!(
                            "g({k}) = {v} breaks monotonicity or falls below 1"
                        )));
                    }
                    previous = v;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// `g(k)` at a positive integer, saturating at `u64::MAX`.
    pub fn gap(&self, k: u64) -> u64 {
        match self {
            Self::Constant { value } => *value,
            Self::Polynomial { p } => k.checked_pow(*p).unwrap_or(u64::MAX),
            Self::Exponential { p } => u32::try_from(k)
                .ok()
                .and_then(|e| p.checked_pow(e))
                .unwrap_or(u64::MAX),
            Self::Table { values } => {
                let index = (k.max(1) - 1) as usize;
                let v = values.get(index).or(values.last()).copied().unwrap_or(1.0);
                v as u64
            }
        }
    }

    /// Continuous extension of `g` on `[1, inf)`.
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Constant { value } => *value as f64,
            Self::Polynomial { p } => x.powi(*p as i32),
            Self::Exponential { p } => (*p as f64).powf(x),
            Self::Table { values } => {
                let x = x.max(1.0);
                let lo = x.floor();
                let i = lo as usize - 1;
                if i + 1 >= values.len() {
                    return *values.last().unwrap_or(&1.0);
                }
                let frac = x - lo;
                values[i] + frac * (values[i + 1] - values[i])
            }
        }
    }

    /// Closed-form `alpha` where one is known.
    pub fn alpha_closed_form(&self) -> Option<f64> {
        match self {
            Self::Constant { .. } | Self::Polynomial { .. } => Some(1.0),
            Self::Exponential { p } => Some(1.0 / (*p as f64 * *p as f64)),
            Self::Table { .. } => None,
        }
    }
}

/// `alpha = lim G(G^{-1}(t) - 2) / t`: closed form for the built-in families,
/// numeric estimate otherwise.
pub fn alpha_of(interval: &IntervalFn) -> f64 {
    match interval.alpha_closed_form() {
        Some(a) => a,
        None => {
            let a = alpha_numeric(interval, ALPHA_PROBE_TIME);
            if a < ALPHA_FLOOR {
                log::warn!("alpha≈0 ({a:e}): rate-bound hypothesis on the monitoring schedule violated");
            }
            a
        }
    }
}

/// Evaluates `G(G^{-1}(t) - 2) / t` with `G` integrated by Simpson's rule
/// on unit cells and `G^{-1}` found by bisection.
pub fn alpha_numeric(interval: &IntervalFn, t: f64) -> f64 {
    let mut integral = CumulativeIntegral::new(interval);
    let z = integral.inverse(t);
    integral.value(z - 2.0) / t
}

/// `G(z) = ∫_1^z g`, cached at integer nodes.
struct CumulativeIntegral<'a> {
    g: &'a IntervalFn,
    // nodes[k] = G(1 + k)
    nodes: Vec<f64>,
}

impl<'a> CumulativeIntegral<'a> {
    fn new(g: &'a IntervalFn) -> Self {
        Self { g, nodes: vec![0.0] }
    }

    fn cell(&self, a: f64, b: f64) -> f64 {
        let mid = 0.5 * (a + b);
        (b - a) / 6.0 * (self.g.eval(a) + 4.0 * self.g.eval(mid) + self.g.eval(b))
    }

    fn extend_to(&mut self, cells: usize) {
        while self.nodes.len() <= cells {
            let k = self.nodes.len() as f64;
            let next = self.nodes[self.nodes.len() - 1] + self.cell(k, k + 1.0);
            self.nodes.push(next);
        }
    }

    fn value(&mut self, z: f64) -> f64 {
        if z <= 1.0 {
            // g >= 1 near the left end, so G is at most linear below 1
            return (z - 1.0) * self.g.eval(1.0);
        }
        let whole = (z - 1.0).floor() as usize;
        self.extend_to(whole);
        let base = 1.0 + whole as f64;
        self.nodes[whole] + self.cell(base, z)
    }

    fn inverse(&mut self, target: f64) -> f64 {
        let mut lo = 1.0;
        let mut hi = 2.0;
        while self.value(hi) < target {
            lo = hi;
            hi = 1.0 + 2.0 * (hi - 1.0);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.value(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Monitoring times `t_1 = 1, t_{k+1} = t_k + g(k)` up to a horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSchedule {
    interval: IntervalFn,
    times: Vec<u64>,
    member: Vec<bool>,
}

impl EventSchedule {
    pub fn build(interval: IntervalFn, horizon: u64) -> Result<Self, TriggerError> {
        if horizon == 0 {
            return Err(TriggerError::Horizon);
        }
        interval.validate()?;
        let mut member = vec![false; horizon as usize + 1];
        let mut times = Vec::new();
        let mut t: u64 = 1;
        let mut k: u64 = 1;
        while t <= horizon {
            times.push(t);
            member[t as usize] = true;
            t = t.saturating_add(interval.gap(k));
            k += 1;
        }
        Ok(Self {
            interval,
            times,
            member,
        })
    }

    pub fn interval(&self) -> &IntervalFn {
        &self.interval
    }

    pub fn horizon(&self) -> u64 {
        self.member.len() as u64 - 1
    }

    pub fn times(&self) -> &[u64] {
        &self.times
    }

    pub fn contains(&self, t: u64) -> bool {
        self.member.get(t as usize).copied().unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}
