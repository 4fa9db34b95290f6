#![allow(dead_code)]

use minrule::event::{IntervalFn, Threshold};
use minrule::scenario::{AgentSpec, AlgorithmSpec, ConsistencySpec, NetworkSpec, OutputSpec, ScenarioFile, SCHEMA_VERSION};
use minrule::trace::BeliefTrace;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random strictly positive likelihood rows, `hypotheses` x `signals`.
pub fn random_table(rng: &mut ChaCha8Rng, hypotheses: usize, signals: usize) -> Vec<Vec<f64>> {
    (0..hypotheses)
        .map(|_| {
            let raw: Vec<f64> = (0..signals).map(|_| rng.gen_range(0.2..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let mut row: Vec<f64> = raw.iter().map(|x| x / total).collect();
            let head: f64 = row[..signals - 1].iter().sum();
            row[signals - 1] = 1.0 - head;
            row
        })
        .collect()
}

pub fn random_scenario(name: &str, network: NetworkSpec, algorithm: AlgorithmSpec, horizon: u64, model_seed: u64) -> ScenarioFile {
    let n = network.agent_count();
    let mut rng = ChaCha8Rng::seed_from_u64(model_seed);
    ScenarioFile {
        schema_version: SCHEMA_VERSION,
        name: name.into(),
        hypotheses: vec!["a".into(), "b".into(), "c".into()],
        true_state: 2,
        agents: (0..n)
            .map(|_| AgentSpec {
                likelihood: random_table(&mut rng, 3, 3),
                prior: None,
            })
            .collect(),
        network,
        algorithm,
        horizon,
        seed: 0,
        output: OutputSpec::default(),
        consistency: ConsistencySpec::default(),
    }
}

/// Event-triggered with the trigger always open and monitoring every step.
pub fn always_open() -> AlgorithmSpec {
    AlgorithmSpec::EventTriggered {
        interval: IntervalFn::Constant { value: 1 },
        threshold: Threshold::Constant { value: 1.0 },
    }
}

/// Largest absolute difference between two full traces over every stored
/// step, agent and log-belief entry.
pub fn max_trace_gap(a: &BeliefTrace, b: &BeliefTrace) -> f64 {
    assert_eq!(a.snapshots().len(), b.snapshots().len());
    let mut gap = 0.0f64;
    for (sa, sb) in a.snapshots().iter().zip(b.snapshots()) {
        assert_eq!(sa.t, sb.t);
        for (x, y) in sa.states.iter().zip(&sb.states) {
            for (u, v) in [(&x.log_pi, &y.log_pi), (&x.log_mu, &y.log_mu), (&x.log_mubar, &y.log_mubar)] {
                for (p, q) in u.iter().zip(v) {
                    let d = if p == q { 0.0 } else { (p - q).abs() };
                    gap = gap.max(if d.is_nan() { f64::INFINITY } else { d });
                }
            }
        }
    }
    gap
}
