mod common;

use common::{always_open, max_trace_gap, random_scenario};
use minrule::run::{run, RunOptions};
use minrule::scenario::{AgentSpec, AlgorithmSpec, NetworkSpec};
use minrule::Scenario;

fn opts(seed: u64) -> RunOptions {
    RunOptions {
        seed: Some(seed),
        stride: Some(1),
        audit: true,
    }
}

#[test]
fn open_trigger_matches_dense_baseline() {
    for network in [NetworkSpec::Path { n: 4 }, NetworkSpec::Ring { n: 5 }] {
        let event = Scenario::from_file(random_scenario("e", network.clone(), always_open(), 300, 11)).unwrap();
        let dense =
            Scenario::from_file(random_scenario("d", network, AlgorithmSpec::DenseBaseline, 300, 11)).unwrap();
        for seed in 0..2 {
            let a = run(&event, &opts(seed)).unwrap();
            let b = run(&dense, &opts(seed)).unwrap();
            assert_eq!(max_trace_gap(&a.trace, &b.trace), 0.0);
            assert!(a.summary.invariants.all_passed());
        }
    }
}

#[test]
fn time_varying_on_static_graph_matches_open_trigger() {
    let network = NetworkSpec::Ring { n: 4 };
    let event = Scenario::from_file(random_scenario("e", network.clone(), always_open(), 300, 5)).unwrap();
    let tv = Scenario::from_file(random_scenario("t", network, AlgorithmSpec::TimeVarying { gamma: 1.0 }, 300, 5))
        .unwrap();
    let a = run(&event, &opts(3)).unwrap();
    let b = run(&tv, &opts(3)).unwrap();
    assert_eq!(max_trace_gap(&a.trace, &b.trace), 0.0);
    assert!(b.summary.invariants.all_passed());
}

#[test]
fn isolated_source_leaves_others_undecided() {
    let mut file = minrule::scenario::preset_file("line-switching").unwrap();
    // agent 1 is the only source; it never gets an edge
    file.network = NetworkSpec::Periodic {
        n: 3,
        period: vec![vec![[2, 3]], vec![]],
    };
    file.horizon = 3000;
    let scenario = Scenario::from_file(file).unwrap();
    let out = run(&scenario, &opts(0)).unwrap();
    let last = out.trace.last().unwrap();
    assert!(last.states[0].log_mu[1] < -20.0);
    for agent in [1, 2] {
        assert!(last.states[agent].log_mu[1].exp() > 0.1, "agent {}", agent + 1);
    }
    assert!(!out.summary.consistency.all);
    assert!(out.summary.warnings.iter().any(|w| w.contains("recurring edges")));
    assert!(out.summary.invariants.all_passed());
}

#[test]
fn runs_are_reproducible_and_seed_sensitive() {
    let scenario = Scenario::preset("fig3").unwrap();
    let a = run(&scenario, &opts(4)).unwrap();
    let b = run(&scenario, &opts(4)).unwrap();
    let c = run(&scenario, &opts(5)).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.events, b.events);
    assert_eq!(
        serde_json::to_string(&a.summary).unwrap(),
        serde_json::to_string(&b.summary).unwrap()
    );
    assert_ne!(a.trace, c.trace);
}

#[test]
fn fine_quantization_tracks_dense_baseline() {
    let mut quant = minrule::scenario::preset_file("fig4").unwrap();
    quant.algorithm = AlgorithmSpec::Quantized { bits: vec![40, 40] };
    quant.horizon = 500;
    let mut dense = quant.clone();
    dense.algorithm = AlgorithmSpec::DenseBaseline;
    let q = run(&Scenario::from_file(quant).unwrap(), &opts(2)).unwrap();
    let d = run(&Scenario::from_file(dense).unwrap(), &opts(2)).unwrap();
    for (sq, sd) in q.trace.snapshots().iter().zip(d.trace.snapshots()) {
        for (x, y) in sq.states.iter().zip(&sd.states) {
            for (u, v) in x.log_mu.iter().zip(&y.log_mu) {
                assert!((u.exp() - v.exp()).abs() < 1e-6, "t={} {} vs {}", sq.t, u, v);
            }
        }
    }
    assert!(q.summary.invariants.all_passed());
}

#[test]
fn uninformative_network_stays_at_prior() {
    let mut file = minrule::scenario::preset_file("fig3").unwrap();
    file.agents[0] = AgentSpec {
        likelihood: vec![vec![0.5, 0.5], vec![0.5, 0.5]],
        prior: None,
    };
    file.horizon = 100;
    let out = run(&Scenario::from_file(file).unwrap(), &opts(0)).unwrap();
    for s in &out.trace.last().unwrap().states {
        for &x in &s.log_mu {
            assert!((x - 0.5f64.ln()).abs() < 1e-12);
        }
    }
    assert!(out.summary.warnings.iter().any(|w| w.contains("no agent can distinguish")));
}
