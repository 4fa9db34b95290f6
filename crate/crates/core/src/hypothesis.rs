//! Hypotheses, per-agent likelihood models, signal sampling and source sets.
//!
//! Agents and hypotheses are indexed from zero inside the library. Anything
//! written for humans (errors, CSV, summaries) shows them one-based.

use std::collections::HashSet;

use rand::Rng;
use thiserror::Error;

/// Tolerance for row sums of a likelihood table.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// A KL divergence above this counts as informative.
pub const SOURCE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("hypothesis set must contain at least one hypothesis")]
    NoHypotheses,
    #[error("duplicate hypothesis label `{0}`")]
    DuplicateLabel(String),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("zero or negative entry at index {index} of the reference distribution (full support required)")]
    ZeroReference { index: usize },
    #[error("agent {agent}: likelihood table has {rows} rows, expected {expected}")]
    RowCount {
        agent: usize,
        rows: usize,
        expected: usize,
    },
    #[error("agent {agent}, row {row}: signal space is empty")]
    EmptySignalSpace { agent: usize, row: usize },
    #[error("agent {agent}, row {row}: expected {expected} signals, found {found}")]
    RaggedRow {
        agent: usize,
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("agent {agent}, row {row}: entry {column} is {value}, likelihoods must be strictly positive")]
    NonPositive {
        agent: usize,
        row: usize,
        column: usize,
        value: f64,
    },
    #[error("agent {agent}, row {row}: entries sum to {sum}, expected 1")]
    RowSum { agent: usize, row: usize, sum: f64 },
    #[error("hypothesis index {index} out of range for {count} hypotheses")]
    UnknownHypothesis { index: usize, count: usize },
}

/// The finite set of candidate states of the world.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HypothesisSet {
    labels: Vec<String>,
}

impl HypothesisSet {
    pub fn new(labels: Vec<String>) -> Result<Self, ModelError> {
        if labels.is_empty() {
            return Err(ModelError::NoHypotheses);
        }
        let mut seen = HashSet::new();
        for label in &labels {
            if !seen.insert(label.as_str()) {
                return Err(ModelError::DuplicateLabel(label.clone()));
            }
        }
        Ok(Self { labels })
    }

    /// `theta_1 … theta_m`.
    pub fn numbered(m: usize) -> Result<Self, ModelError> {
        Self::new((1..=m).map(|k| format!("theta_{k}")).collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn check_index(&self, index: usize) -> Result<(), ModelError> {
        if index < self.labels.len() {
            Ok(())
        } else {
            Err(ModelError::UnknownHypothesis {
                index,
                count: self.labels.len(),
            })
        }
    }
}

/// Conditional signal distributions `l_i(. | theta)` of a single agent.
///
/// Row `p` is the distribution of the agent's signal when hypothesis `p` is
/// true. Rows are validated once here, so sampling and updates never need to
/// re-check support.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodModel {
    agent: usize,
    table: Vec<Vec<f64>>,
    log_table: Vec<Vec<f64>>,
}

impl LikelihoodModel {
    pub fn new(agent: usize, table: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        let shown = agent + 1;
        let width = table.first().map_or(0, Vec::len);
        for (row_idx, row) in table.iter().enumerate() {
            if row.is_empty() {
                return Err(ModelError::EmptySignalSpace {
                    agent: shown,
                    row: row_idx + 1,
                });
            }
            if row.len() != width {
                return Err(ModelError::RaggedRow {
                    agent: shown,
                    row: row_idx + 1,
                    expected: width,
                    found: row.len(),
                });
            }
            for (column, &value) in row.iter().enumerate() {
                if !(value > 0.0) || !value.is_finite() {
                    return Err(ModelError::NonPositive {
                        agent: shown,
                        row: row_idx + 1,
                        column: column + 1,
                        value,
                    });
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(ModelError::RowSum {
                    agent: shown,
                    row: row_idx + 1,
                    sum,
                });
            }
        }
        if table.is_empty() {
            return Err(ModelError::NoHypotheses);
        }
        let log_table = table
            .iter()
            .map(|row| row.iter().map(|p| p.ln()).collect())
            .collect();
        Ok(Self {
            agent,
            table,
            log_table,
        })
    }

    /// Every hypothesis induces the same signal distribution.
    pub fn uninformative(agent: usize, hypotheses: usize, signal: Vec<f64>) -> Result<Self, ModelError> {
        Self::new(agent, vec![signal; hypotheses])
    }

    pub fn agent(&self) -> usize {
        self.agent
    }

    pub fn hypotheses(&self) -> usize {
        self.table.len()
    }

    pub fn signal_count(&self) -> usize {
        self.table[0].len()
    }

    pub fn row(&self, hypothesis: usize) -> &[f64] {
        &self.table[hypothesis]
    }

    pub fn table(&self) -> &[Vec<f64>] {
        &self.table
    }

    /// `ln l(signal | hypothesis)`.
    pub fn log_likelihood(&self, signal: usize, hypothesis: usize) -> f64 {
        self.log_table[hypothesis][signal]
    }

    /// Draws one private signal under `true_state`.
    pub fn sample<R: Rng + ?Sized>(&self, true_state: usize, rng: &mut R) -> usize {
        sample_index(&self.table[true_state], rng)
    }
}

/// Inverse-CDF draw from a finite distribution.
///
/// Zero-probability entries are never returned.
pub fn sample_index<R: Rng + ?Sized>(probabilities: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut cumulative = 0.0;
    let mut last_positive = 0;
    for (index, &p) in probabilities.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        last_positive = index;
        cumulative += p;
        if u < cumulative {
            return index;
        }
    }
    // u landed in the rounding slack above the final cumulative sum
    last_positive
}

/// `D(p || q)` in nats, with `0 ln(0/q) = 0`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64, ModelError> {
    if p.len() != q.len() {
        return Err(ModelError::DimensionMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    let mut total = 0.0;
    for (index, (&pw, &qw)) in p.iter().zip(q).enumerate() {
        if !(qw > 0.0) {
            return Err(ModelError::ZeroReference { index });
        }
        if pw > 0.0 {
            total += pw * (pw / qw).ln();
        }
    }
    // Gibbs: negative values only come from rounding
    Ok(total.max(0.0))
}

/// Per-agent KL divergences between every ordered pair of hypotheses, and
/// the agents that can tell each pair apart.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSet {
    agents: usize,
    hypotheses: usize,
    // kl[(i * m + p) * m + q] = K_i(theta_p, theta_q)
    kl: Vec<f64>,
}

impl SourceSet {
    pub fn compute(models: &[LikelihoodModel], hypotheses: &HypothesisSet) -> Result<Self, ModelError> {
        let m = hypotheses.len();
        let mut kl = Vec::with_capacity(models.len() * m * m);
        for model in models {
            if model.hypotheses() != m {
                return Err(ModelError::RowCount {
                    agent: model.agent() + 1,
                    rows: model.hypotheses(),
                    expected: m,
                });
            }
            for p in 0..m {
                for q in 0..m {
                    kl.push(kl_divergence(model.row(p), model.row(q))?);
                }
            }
        }
        Ok(Self {
            agents: models.len(),
            hypotheses: m,
            kl,
        })
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn hypotheses(&self) -> usize {
        self.hypotheses
    }

    /// `K_agent(theta_p, theta_q)`.
    pub fn kl(&self, agent: usize, p: usize, q: usize) -> f64 {
        self.kl[(agent * self.hypotheses + p) * self.hypotheses + q]
    }

    pub fn is_source(&self, agent: usize, p: usize, q: usize) -> bool {
        self.kl(agent, p, q) > SOURCE_TOLERANCE
    }

    /// Agents able to distinguish `theta_p` from `theta_q`, ascending.
    pub fn sources(&self, p: usize, q: usize) -> Vec<usize> {
        (0..self.agents).filter(|&i| self.is_source(i, p, q)).collect()
    }

    /// Every ordered pair of distinct hypotheses has at least one source.
    pub fn globally_identifiable(&self) -> bool {
        (0..self.hypotheses).all(|p| {
            (0..self.hypotheses).all(|q| p == q || !self.sources(p, q).is_empty())
        })
    }

    /// `max_i K_i(p, q)`.
    pub fn max_kl(&self, p: usize, q: usize) -> f64 {
        (0..self.agents)
            .map(|i| self.kl(i, p, q))
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn binary(agent: usize, a: f64, b: f64) -> LikelihoodModel {
        LikelihoodModel::new(agent, vec![vec![a, 1.0 - a], vec![b, 1.0 - b]]).unwrap()
    }

    #[test]
    fn kl_reference_values() {
        let k = kl_divergence(&[0.8, 0.2], &[0.2, 0.8]).unwrap();
        assert!((k - 0.8318).abs() < 5e-5, "{k}");
        assert_eq!(kl_divergence(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        // 0.7 ln(7/6) + 0.3 ln(3/4), summed by hand
        let k = kl_divergence(&[0.7, 0.3], &[0.6, 0.4]).unwrap();
        assert!((k - 0.021601).abs() < 1e-6, "{k}");
    }

    #[test]
    fn kl_rejects_bad_inputs() {
        assert_eq!(
            kl_divergence(&[0.5, 0.5], &[1.0]),
            Err(ModelError::DimensionMismatch { left: 2, right: 1 })
        );
        assert_eq!(
            kl_divergence(&[0.5, 0.5], &[1.0, 0.0]),
            Err(ModelError::ZeroReference { index: 1 })
        );
    }

    #[test]
    fn kl_treats_zero_mass_in_p_as_zero() {
        let k = kl_divergence(&[1.0, 0.0], &[0.5, 0.5]).unwrap();
        assert!((k - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn hypothesis_set_validation() {
        assert_eq!(HypothesisSet::new(vec![]), Err(ModelError::NoHypotheses));
        assert!(matches!(
            HypothesisSet::new(vec!["a".into(), "a".into()]),
            Err(ModelError::DuplicateLabel(_))
        ));
        assert_eq!(HypothesisSet::numbered(3).unwrap().len(), 3);
    }

    #[test]
    fn likelihood_validation_names_agent_and_row() {
        let err = LikelihoodModel::new(1, vec![vec![0.5, 0.5], vec![0.6, 0.3]]).unwrap_err();
        assert!(matches!(err, ModelError::RowSum { agent: 2, row: 2, .. }), "{err:?}");
        let err = LikelihoodModel::new(0, vec![vec![1.0, 0.0]]).unwrap_err();
        assert!(matches!(err, ModelError::NonPositive { column: 2, .. }));
        let err = LikelihoodModel::new(0, vec![vec![0.5, 0.5], vec![1.0]]).unwrap_err();
        assert!(matches!(err, ModelError::RaggedRow { .. }));
    }

    #[test]
    fn first_scenario_has_single_source() {
        let hyps = HypothesisSet::numbered(2).unwrap();
        let models = vec![binary(0, 0.7, 0.6), binary(1, 0.5, 0.5), binary(2, 0.5, 0.5)];
        let sources = SourceSet::compute(&models, &hyps).unwrap();
        assert_eq!(sources.sources(0, 1), vec![0]);
        assert_eq!(sources.sources(1, 0), vec![0]);
        assert!(sources.sources(0, 0).is_empty());
        assert!((sources.kl(0, 0, 1) - 0.021601).abs() < 1e-6);
    }

    #[test]
    fn identical_models_have_no_sources() {
        let hyps = HypothesisSet::numbered(3).unwrap();
        let models: Vec<_> = (0..4)
            .map(|i| LikelihoodModel::uninformative(i, 3, vec![0.2, 0.3, 0.5]).unwrap())
            .collect();
        let sources = SourceSet::compute(&models, &hyps).unwrap();
        for p in 0..3 {
            for q in 0..3 {
                assert!(sources.sources(p, q).is_empty());
            }
        }
        assert!(!sources.globally_identifiable());
    }

    #[test]
    fn symmetric_binary_kl_in_both_directions() {
        let hyps = HypothesisSet::numbered(2).unwrap();
        let sources = SourceSet::compute(&[binary(0, 0.8, 0.2)], &hyps).unwrap();
        assert!((sources.kl(0, 0, 1) - 0.8318).abs() < 5e-5);
        assert!((sources.kl(0, 1, 0) - 0.8318).abs() < 5e-5);
    }

    #[test]
    fn source_membership_is_direction_specific() {
        // theta_1 and theta_2 agree, theta_3 differs: the agent separates 1|3
        // and 2|3 in both directions but never 1|2.
        let hyps = HypothesisSet::numbered(3).unwrap();
        let model = LikelihoodModel::new(
            0,
            vec![vec![0.5, 0.5], vec![0.5, 0.5], vec![0.9, 0.1]],
        )
        .unwrap();
        let sources = SourceSet::compute(&[model], &hyps).unwrap();
        assert!(sources.is_source(0, 0, 2));
        assert!(sources.is_source(0, 2, 1));
        assert!(!sources.is_source(0, 0, 1));
        assert!(!sources.is_source(0, 1, 0));
        // asymmetric magnitudes
        assert!((sources.kl(0, 0, 2) - sources.kl(0, 2, 0)).abs() > 0.1);
    }

    #[test]
    fn mismatched_hypothesis_count_is_rejected() {
        let hyps = HypothesisSet::numbered(3).unwrap();
        let err = SourceSet::compute(&[binary(0, 0.7, 0.6)], &hyps).unwrap_err();
        assert!(matches!(err, ModelError::RowCount { rows: 2, expected: 3, .. }));
    }

    #[test]
    fn point_mass_always_sampled() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            assert_eq!(sample_index(&[1.0, 0.0, 0.0], &mut rng), 0);
        }
        for _ in 0..1000 {
            assert_eq!(sample_index(&[0.0, 0.0, 1.0], &mut rng), 2);
        }
    }

    #[test]
    fn empirical_frequency_matches_likelihood() {
        let model = binary(0, 0.7, 0.6);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 100_000;
        let zeros = (0..draws).filter(|_| model.sample(0, &mut rng) == 0).count();
        let freq = zeros as f64 / draws as f64;
        assert!((freq - 0.7).abs() < 0.01, "{freq}");
    }

    #[test]
    fn sampling_is_reproducible() {
        let model = binary(0, 0.7, 0.6);
        let mut a = ChaCha8Rng::seed_from_u64(99);
        let mut b = ChaCha8Rng::seed_from_u64(99);
        let xs: Vec<_> = (0..500).map(|_| model.sample(1, &mut a)).collect();
        let ys: Vec<_> = (0..500).map(|_| model.sample(1, &mut b)).collect();
        assert_eq!(xs, ys);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn distribution(len: usize) -> impl Strategy<Value = Vec<f64>> {
            proptest::collection::vec(0.01f64..1.0, len).prop_map(|w| {
                let s: f64 = w.iter().sum();
                w.into_iter().map(|x| x / s).collect()
            })
        }

        proptest! {
            #[test]
            fn kl_is_nonnegative_and_zero_on_diagonal(
                (p, q) in (2usize..6).prop_flat_map(|n| (distribution(n), distribution(n)))
            ) {
                let k = kl_divergence(&p, &q).unwrap();
                prop_assert!(k >= 0.0);
                prop_assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
                if p != q {
                    let gap: f64 = p.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum();
                    if gap > 1e-3 {
                        prop_assert!(k > 0.0);
                    }
                }
            }
        }
    }
}
