//! Per-agent belief state and the min-rule updates, all in log domain.
//!
//! One step for agent `i` runs in this order: local Bayesian update of `pi`,
//! min-rule update of `mu` against the previous lowest-heard tracker, then
//! (after any communication) a merge into the tracker.

use thiserror::Error;

use crate::hypothesis::LikelihoodModel;
use crate::logmath::{logsumexp, normalize_in_place};
use crate::network::Graph;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BeliefError {
    #[error("prior has {found} entries, expected {expected}")]
    PriorLength { expected: usize, found: usize },
    #[error("prior entry {index} is {value}; priors must be strictly positive")]
    NonPositivePrior { index: usize, value: f64 },
    #[error("heard log-value {value} for hypothesis {hypothesis} exceeds 0 (belief above 1)")]
    BeliefAboveOne { hypothesis: usize, value: f64 },
    #[error("hypothesis index {0} out of range")]
    UnknownHypothesis(usize),
}

/// Local belief `pi`, actual belief `mu` and lowest-heard tracker `mubar` of
/// one agent, stored as natural logs.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    pub log_pi: Vec<f64>,
    pub log_mu: Vec<f64>,
    pub log_mubar: Vec<f64>,
}

impl BeliefState {
    /// Uniform `1/m` for all three vectors.
    pub fn uniform(m: usize) -> Self {
        let v = vec![-(m as f64).ln(); m];
        Self {
            log_pi: v.clone(),
            log_mu: v.clone(),
            log_mubar: v,
        }
    }

    /// Starts `pi` and `mu` from the given linear priors (normalized here) and
    /// sets the tracker equal to `mu`.
    pub fn from_priors(pi: &[f64], mu: &[f64]) -> Result<Self, BeliefError> {
        let log_pi = log_prior(pi, pi.len())?;
        let log_mu = log_prior(mu, pi.len())?;
        Ok(Self {
            log_pi,
            log_mubar: log_mu.clone(),
            log_mu,
        })
    }

    pub fn hypotheses(&self) -> usize {
        self.log_mu.len()
    }

    /// Replaces `pi` with the posterior after observing `signal`.
    pub fn bayes_update(&mut self, model: &LikelihoodModel, signal: usize) {
        for (theta, lp) in self.log_pi.iter_mut().enumerate() {
            *lp += model.log_likelihood(signal, theta);
        }
        normalize_in_place(&mut self.log_pi);
    }

    /// `mu(theta) ∝ min(mubar(theta), pi(theta))` using the tracker from the
    /// previous step.
    ///
    /// # Panics
    ///
    /// If every entrywise minimum is `-inf`, which positivity of the
    /// initial beliefs and full-support likelihoods rule out.
    pub fn min_rule_update(&mut self) {
        for ((mu, &bar), &pi) in self
            .log_mu
            .iter_mut()
            .zip(&self.log_mubar)
            .zip(&self.log_pi)
        {
            *mu = bar.min(pi);
        }
        let shift = normalize_in_place(&mut self.log_mu);
        assert!(
            shift.is_finite(),
            "min-rule normalizer is {shift}: beliefs lost all mass"
        );
    }

    /// Tracker merge with the values heard this step. The agent's own new
    /// `mu` is always included.
    pub fn mubar_merge(&mut self, heard: &[(usize, f64)]) -> Result<(), BeliefError> {
        for &(hypothesis, value) in heard {
            if hypothesis >= self.log_mubar.len() {
                return Err(BeliefError::UnknownHypothesis(hypothesis));
            }
            if value > 0.0 {
                return Err(BeliefError::BeliefAboveOne { hypothesis, value });
            }
        }
        self.merge_own();
        for &(hypothesis, value) in heard {
            let slot = &mut self.log_mubar[hypothesis];
            *slot = slot.min(value);
        }
        Ok(())
    }

    /// Tracker merge against every neighbor's currently held quantizer
    /// endpoint, broadcasting or not.
    pub fn mubar_merge_quantized<'a, I>(&mut self, held_q: I)
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        self.merge_own();
        for q in held_q {
            for (bar, &value) in self.log_mubar.iter_mut().zip(q) {
                *bar = bar.min(value);
            }
        }
    }

    fn merge_own(&mut self) {
        for (bar, &mu) in self.log_mubar.iter_mut().zip(&self.log_mu) {
            *bar = bar.min(mu);
        }
    }

    /// `|logsumexp(log_pi)|` and `|logsumexp(log_mu)|`, whichever is larger.
    pub fn normalization_drift(&self) -> f64 {
        logsumexp(&self.log_pi)
            .abs()
            .max(logsumexp(&self.log_mu).abs())
    }
}

fn log_prior(values: &[f64], expected: usize) -> Result<Vec<f64>, BeliefError> {
    if values.len() != expected || values.is_empty() {
        return Err(BeliefError::PriorLength {
            expected,
            found: values.len(),
        });
    }
    for (index, &value) in values.iter().enumerate() {
        if !(value > 0.0) || !value.is_finite() {
            return Err(BeliefError::NonPositivePrior { index, value });
        }
    }
    let mut logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    normalize_in_place(&mut logs);
    Ok(logs)
}

/// Local updates shared by every protocol: Bayes then min-rule, per agent.
pub fn local_step(states: &mut [BeliefState], models: &[LikelihoodModel], signals: &[usize]) {
    for ((state, model), &signal) in states.iter_mut().zip(models).zip(signals) {
        state.bayes_update(model, signal);
        state.min_rule_update();
    }
}

/// Reference round where every agent sends its whole `mu` to every neighbor.
pub fn dense_baseline_step(
    states: &mut [BeliefState],
    graph: &Graph,
    models: &[LikelihoodModel],
    signals: &[usize],
) {
    local_step(states, models, signals);
    let snapshot: Vec<Vec<f64>> = states.iter().map(|s| s.log_mu.clone()).collect();
    let mut heard = Vec::new();
    for (i, state) in states.iter_mut().enumerate() {
        heard.clear();
        for &j in graph.neighbors(i) {
            heard.extend(snapshot[j].iter().copied().enumerate());
        }
        state
            .mubar_merge(&heard)
            .expect("normalized beliefs never exceed 1");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lin(v: &[f64]) -> Vec<f64> {
        v.iter().map(|x| x.exp()).collect()
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < tol, "{a:?} vs {b:?}");
        }
    }

    fn binary(agent: usize, a: f64, b: f64) -> LikelihoodModel {
        LikelihoodModel::new(agent, vec![vec![a, 1.0 - a], vec![b, 1.0 - b]]).unwrap()
    }

    #[test]
    fn bayes_update_hand_normalized() {
        let mut s = BeliefState::uniform(2);
        s.bayes_update(&binary(0, 0.7, 0.6), 0);
        assert_close(&lin(&s.log_pi), &[7.0 / 13.0, 6.0 / 13.0], 1e-12);
        // mu and mubar untouched
        assert_eq!(s.log_mu, BeliefState::uniform(2).log_mu);
        assert_eq!(s.log_mubar, BeliefState::uniform(2).log_mubar);
    }

    #[test]
    fn bayes_update_noop_when_signal_uninformative() {
        let mut s = BeliefState::from_priors(&[0.2, 0.3, 0.5], &[0.2, 0.3, 0.5]).unwrap();
        let before = s.log_pi.clone();
        let model = LikelihoodModel::uninformative(0, 3, vec![0.4, 0.6]).unwrap();
        s.bayes_update(&model, 1);
        assert_close(&s.log_pi, &before, 1e-15);
    }

    #[test]
    fn single_hypothesis_stays_certain() {
        let mut s = BeliefState::uniform(1);
        let model = LikelihoodModel::new(0, vec![vec![0.3, 0.7]]).unwrap();
        for signal in [0, 1, 1, 0] {
            s.bayes_update(&model, signal);
            s.min_rule_update();
            assert_eq!(s.log_pi, vec![0.0]);
            assert_eq!(s.log_mu, vec![0.0]);
        }
    }

    #[test]
    fn min_rule_entrywise_min_then_normalize() {
        let mut s = BeliefState::uniform(2);
        s.log_mubar = vec![0.2f64.ln(), 0.8f64.ln()];
        s.log_pi = vec![0.5f64.ln(), 0.5f64.ln()];
        s.min_rule_update();
        assert_close(&lin(&s.log_mu), &[0.2 / 0.7, 0.5 / 0.7], 1e-12);
    }

    #[test]
    fn min_rule_returns_pi_when_tracker_dominates() {
        let mut s = BeliefState::uniform(3);
        s.log_mubar = vec![0.0, 0.0, 0.0];
        s.log_pi = vec![0.1f64.ln(), 0.3f64.ln(), 0.6f64.ln()];
        s.min_rule_update();
        assert_close(&s.log_mu, &s.log_pi.clone(), 1e-15);

        s.log_mubar = s.log_pi.clone();
        s.min_rule_update();
        assert_close(&s.log_mu, &s.log_pi.clone(), 1e-15);
    }

    #[test]
    #[should_panic(expected = "lost all mass")]
    fn min_rule_panics_without_mass() {
        let mut s = BeliefState::uniform(2);
        s.log_mubar = vec![f64::NEG_INFINITY; 2];
        s.min_rule_update();
    }

    #[test]
    fn merge_self_only() {
        let mut s = BeliefState::uniform(2);
        s.log_mubar = vec![0.3f64.ln(), 0.1f64.ln()];
        s.log_mu = vec![0.25f64.ln(), 0.75f64.ln()];
        s.mubar_merge(&[]).unwrap();
        assert_eq!(s.log_mubar, vec![0.25f64.ln(), 0.1f64.ln()]);
    }

    #[test]
    fn merge_min_of_three() {
        let mut s = BeliefState::uniform(2);
        s.log_mubar = vec![0.3f64.ln(), 0.5f64.ln()];
        s.log_mu = vec![0.25f64.ln(), 0.75f64.ln()];
        s.mubar_merge(&[(0, 0.1f64.ln())]).unwrap();
        assert_eq!(s.log_mubar[0], 0.1f64.ln());
    }

    #[test]
    fn merge_is_per_hypothesis() {
        let mut s = BeliefState::uniform(2);
        s.log_mubar = vec![0.4f64.ln(), 0.6f64.ln()];
        s.log_mu = vec![0.45f64.ln(), 0.55f64.ln()];
        let heard = [(1, 0.01f64.ln()), (1, 0.02f64.ln()), (1, 0.03f64.ln())];
        s.mubar_merge(&heard).unwrap();
        assert_eq!(s.log_mubar, vec![0.4f64.ln(), 0.01f64.ln()]);
    }

    #[test]
    fn merge_rejects_beliefs_above_one() {
        let mut s = BeliefState::uniform(2);
        let before = s.clone();
        let err = s.mubar_merge(&[(0, 0.5)]).unwrap_err();
        assert!(matches!(err, BeliefError::BeliefAboveOne { hypothesis: 0, .. }));
        assert_eq!(s, before);
    }

    #[test]
    fn quantized_merge_cases() {
        let mut s = BeliefState::uniform(1);
        s.log_mubar = vec![0.5f64.ln()];
        s.log_mu = vec![0.4f64.ln()];
        let a = [0.25f64.ln()];
        let b = [0.6f64.ln()];
        s.mubar_merge_quantized([a.as_slice(), b.as_slice()]);
        assert_eq!(s.log_mubar, vec![0.25f64.ln()]);

        // neighbors still at the initial endpoint 1
        let mut s = BeliefState::uniform(2);
        s.log_mu = vec![0.3f64.ln(), 0.7f64.ln()];
        let one = [0.0, 0.0];
        s.mubar_merge_quantized([one.as_slice(), one.as_slice()]);
        assert_eq!(s.log_mubar, vec![0.3f64.ln(), 0.5f64.ln()]);

        // no neighbors at all
        let mut s = BeliefState::uniform(2);
        s.log_mu = vec![0.3f64.ln(), 0.7f64.ln()];
        s.mubar_merge_quantized(std::iter::empty());
        assert_eq!(s.log_mubar, vec![0.3f64.ln(), 0.5f64.ln()]);
    }

    #[test]
    fn priors_are_validated_and_normalized() {
        let s = BeliefState::from_priors(&[1.0, 3.0], &[2.0, 2.0]).unwrap();
        assert_close(&lin(&s.log_pi), &[0.25, 0.75], 1e-15);
        assert_eq!(s.log_mubar, s.log_mu);
        assert!(matches!(
            BeliefState::from_priors(&[1.0, 0.0], &[0.5, 0.5]),
            Err(BeliefError::NonPositivePrior { index: 1, .. })
        ));
        assert!(matches!(
            BeliefState::from_priors(&[0.5, 0.5], &[1.0]),
            Err(BeliefError::PriorLength { .. })
        ));
    }

    #[test]
    fn dense_baseline_uniform_when_nobody_informative() {
        let graph = Graph::path(3).unwrap();
        let models: Vec<_> = (0..3).map(|i| binary(i, 0.5, 0.5)).collect();
        let mut states = vec![BeliefState::uniform(2); 3];
        for step in 0..50 {
            let signals = [step % 2, (step / 2) % 2, 0];
            dense_baseline_step(&mut states, &graph, &models, &signals);
        }
        for s in &states {
            assert_close(&lin(&s.log_mu), &[0.5, 0.5], 1e-12);
        }
    }

    #[test]
    fn dense_baseline_spreads_low_belief() {
        let graph = Graph::path(3).unwrap();
        let models = vec![binary(0, 0.9, 0.1), binary(1, 0.5, 0.5), binary(2, 0.5, 0.5)];
        let mut states = vec![BeliefState::uniform(2); 3];
        for _ in 0..200 {
            dense_baseline_step(&mut states, &graph, &models, &[0, 0, 1]);
        }
        for s in &states {
            assert!(s.log_mu[0].exp() > 0.999);
            assert!(s.normalization_drift() < 1e-9);
        }
    }
}
