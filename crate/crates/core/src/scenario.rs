//! Scenario documents: JSON schema, validation into runnable form, and the
//! built-in presets.
//!
//! Agent ids, hypothesis indices and edge endpoints are one-based in the
//! document.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::BeliefState;
use crate::event::{alpha_of, EventSchedule, IntervalFn, Threshold, TriggerPolicy};
use crate::hypothesis::{HypothesisSet, LikelihoodModel, SourceSet};
use crate::network::{Graph, GraphSequence};
use crate::quant::MAX_BITS;
use crate::rng::topology_rng;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub name: String,
    pub hypotheses: Vec<String>,
    /// One-based index into `hypotheses`.
    pub true_state: usize,
    pub agents: Vec<AgentSpec>,
    pub network: NetworkSpec,
    pub algorithm: AlgorithmSpec,
    pub horizon: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub consistency: ConsistencySpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    /// One row per hypothesis, one column per signal.
    pub likelihood: Vec<Vec<f64>>,
    /// Initial local and actual belief; uniform when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkSpec {
    Path { n: usize },
    Ring { n: usize },
    Complete { n: usize },
    /// Random recursive tree, fixed by its own seed.
    RandomTree { n: usize, seed: u64 },
    Edges { n: usize, edges: Vec<[usize; 2]> },
    /// Edge sets applied at `t = 1, 2, …` and repeated.
    Periodic { n: usize, period: Vec<Vec<[usize; 2]>> },
}

impl NetworkSpec {
    pub fn agent_count(&self) -> usize {
        match *self {
            Self::Path { n }
            | Self::Ring { n }
            | Self::Complete { n }
            | Self::RandomTree { n, .. }
            | Self::Edges { n, .. }
            | Self::Periodic { n, .. } => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlgorithmSpec {
    EventTriggered {
        interval: IntervalFn,
        threshold: Threshold,
    },
    /// Bits per hypothesis, in hypothesis order.
    Quantized { bits: Vec<u32> },
    DenseBaseline,
    /// Trigger checked every step with constant `gamma`; allows periodic
    /// networks.
    TimeVarying { gamma: f64 },
}

impl AlgorithmSpec {
    pub fn label(&self) -> &'static str {
        match self {
            Self::EventTriggered { .. } => "event_triggered",
            Self::Quantized { .. } => "quantized",
            Self::DenseBaseline => "dense_baseline",
            Self::TimeVarying { .. } => "time_varying",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_stride")]
    pub stride: u64,
    #[serde(default = "default_true")]
    pub logs: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            stride: default_stride(),
            logs: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsistencySpec {
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_window")]
    pub window_fraction: f64,
}

impl Default for ConsistencySpec {
    fn default() -> Self {
        Self {
            threshold: default_threshold(),
            window_fraction: default_window(),
        }
    }
}

fn default_stride() -> u64 {
    1
}
fn default_true() -> bool {
    true
}
fn default_threshold() -> f64 {
    0.99
}
fn default_window() -> f64 {
    0.1
}

/// A single problem found while validating a scenario.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed scenario: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("invalid scenario:\n{}", .0.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Issue>),
}

/// How agents talk in a validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub enum Protocol {
    EventTriggered { policy: TriggerPolicy, alpha: f64 },
    Quantized { bits: Vec<u32> },
    DenseBaseline,
    TimeVarying { policy: TriggerPolicy },
}

/// A validated, runnable scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub hypotheses: HypothesisSet,
    pub models: Vec<LikelihoodModel>,
    pub sources: SourceSet,
    pub network: GraphSequence,
    pub initial: Vec<BeliefState>,
    pub protocol: Protocol,
    /// Zero-based.
    pub truth: usize,
}

impl Scenario {
    pub fn from_file(file: ScenarioFile) -> Result<Self, ScenarioError> {
        let mut issues = Vec::new();
        let mut push = |path: &str, message: String| {
            issues.push(Issue {
                path: path.to_string(),
                message,
            })
        };

        if file.schema_version != SCHEMA_VERSION {
            push(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", file.schema_version),
            );
        }
        let hypotheses = match HypothesisSet::new(file.hypotheses.clone()) {
            Ok(h) => Some(h),
            Err(e) => {
                push("hypotheses", e.to_string());
                None
            }
        };
        let m = file.hypotheses.len();
        if file.true_state == 0 || file.true_state > m {
            push(
                "true_state",
                format!("{} is not in 1..={m}", file.true_state),
            );
        }
        if file.horizon == 0 {
            push("horizon", "must be at least 1".into());
        }
        if file.output.stride == 0 {
            push("output.stride", "must be at least 1".into());
        }
        let c = &file.consistency;
        if !(c.threshold > 0.0 && c.threshold <= 1.0) {
            push("consistency.threshold", format!("{} outside (0, 1]", c.threshold));
        }
        if !(c.window_fraction > 0.0 && c.window_fraction <= 1.0) {
            push(
                "consistency.window_fraction",
                format!("{} outside (0, 1]", c.window_fraction),
            );
        }

        let n = file.network.agent_count();
        if file.agents.len() != n {
            push(
                "agents",
                format!("{} agents listed but the network has {n}", file.agents.len()),
            );
        }
        let mut models = Vec::with_capacity(file.agents.len());
        let mut initial = Vec::with_capacity(file.agents.len());
        for (i, agent) in file.agents.iter().enumerate() {
            if agent.likelihood.len() != m {
                push(
                    &format!("agents[{i}].likelihood"),
                    format!(
                        "agent {}: {} rows for {m} hypotheses",
                        i + 1,
                        agent.likelihood.len()
                    ),
                );
            } else {
                match LikelihoodModel::new(i, agent.likelihood.clone()) {
                    Ok(model) => models.push(model),
                    Err(e) => push(&format!("agents[{i}].likelihood"), e.to_string()),
                }
            }
            match &agent.prior {
                None => initial.push(BeliefState::uniform(m)),
                Some(prior) => match BeliefState::from_priors(prior, prior) {
                    Ok(s) if prior.len() == m => initial.push(s),
                    Ok(_) => push(
                        &format!("agents[{i}].prior"),
                        format!("{} entries for {m} hypotheses", prior.len()),
                    ),
                    Err(e) => push(&format!("agents[{i}].prior"), e.to_string()),
                },
            }
        }
        let network = match build_network(&file.network) {
            Ok(net) => Some(net),
            Err(issue) => {
                issues.push(issue);
                None
            }
        };

        let horizon = file.horizon.max(1);
        let protocol = match &file.algorithm {
            AlgorithmSpec::EventTriggered {
                interval,
                threshold,
            } => {
                let mut ok = true;
                if let Err(e) = interval.validate() {
                    issues.push(Issue {
                        path: "algorithm.interval".into(),
                        message: e.to_string(),
                    });
                    ok = false;
                }
                if let Err(e) = threshold.validate() {
                    issues.push(Issue {
                        path: "algorithm.threshold".into(),
                        message: e.to_string(),
                    });
                    ok = false;
                }
                if ok && !threshold.is_subexponential() {
                    issues.push(Issue {
                        path: "algorithm.threshold".into(),
                        message: "threshold must decay sub-exponentially".into(),
                    });
                    ok = false;
                }
                if ok {
                    let schedule = EventSchedule::build(interval.clone(), horizon)
                        .expect("interval validated above");
                    Some(Protocol::EventTriggered {
                        alpha: alpha_of(interval),
                        policy: TriggerPolicy::event_triggered(schedule, threshold.clone()),
                    })
                } else {
                    None
                }
            }
            AlgorithmSpec::Quantized { bits } => {
                let mut ok = true;
                if bits.len() != m {
                    issues.push(Issue {
                        path: "algorithm.bits".into(),
                        message: format!("{} entries for {m} hypotheses", bits.len()),
                    });
                    ok = false;
                }
                for (k, &b) in bits.iter().enumerate() {
                    if b == 0 || b > MAX_BITS {
                        issues.push(Issue {
                            path: format!("algorithm.bits[{k}]"),
                            message: format!("{b} outside 1..={MAX_BITS}"),
                        });
                        ok = false;
                    }
                }
                ok.then(|| Protocol::Quantized { bits: bits.clone() })
            }
            AlgorithmSpec::DenseBaseline => Some(Protocol::DenseBaseline),
            AlgorithmSpec::TimeVarying { gamma } => match TriggerPolicy::every_step(horizon, *gamma) {
                Ok(policy) => Some(Protocol::TimeVarying { policy }),
                Err(e) => {
                    issues.push(Issue {
                        path: "algorithm.gamma".into(),
                        message: e.to_string(),
                    });
                    None
                }
            },
        };

        if let Some(net) = &network {
            let static_only = !matches!(file.algorithm, AlgorithmSpec::TimeVarying { .. });
            match net {
                GraphSequence::Static(g) if static_only && !g.is_connected() => issues.push(Issue {
                    path: "network".into(),
                    message: format!("{} requires a connected graph", file.algorithm.label()),
                }),
                GraphSequence::Periodic(_) | GraphSequence::Finite(_) if static_only => {
                    issues.push(Issue {
                        path: "network".into(),
                        message: format!(
                            "{} requires a static network; use time_varying for schedules",
                            file.algorithm.label()
                        ),
                    })
                }
                _ => {}
            }
        }

        let sources = match (&hypotheses, models.len() == file.agents.len()) {
            (Some(h), true) => match SourceSet::compute(&models, h) {
                Ok(s) => Some(s),
                Err(e) => {
                    issues.push(Issue {
                        path: "agents".into(),
                        message: e.to_string(),
                    });
                    None
                }
            },
            _ => None,
        };

        if !issues.is_empty() {
            return Err(ScenarioError::Invalid(issues));
        }
        Ok(Self {
            truth: file.true_state - 1,
            hypotheses: hypotheses.expect("validated"),
            models,
            sources: sources.expect("validated"),
            network: network.expect("validated"),
            initial,
            protocol: protocol.expect("validated"),
            file,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let file: ScenarioFile = serde_json::from_str(text)?;
        Self::from_file(file)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn preset(name: &str) -> Result<Self, ScenarioError> {
        let file = preset_file(name).ok_or_else(|| ScenarioError::UnknownPreset(name.to_string()))?;
        Self::from_file(file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.file).expect("scenario documents always serialize")
    }

    pub fn name(&self) -> &str {
        &self.file.name
    }

    pub fn horizon(&self) -> u64 {
        self.file.horizon
    }

    pub fn agent_count(&self) -> usize {
        self.models.len()
    }

    pub fn hypothesis_count(&self) -> usize {
        self.hypotheses.len()
    }

    /// The static graph, or the one-period union for schedules.
    pub fn base_graph(&self) -> Graph {
        match &self.network {
            GraphSequence::Static(g) => g.clone(),
            seq => seq
                .recurring_union()
                .unwrap_or_else(|_| Graph::edgeless(seq.agent_count()).expect("agents exist")),
        }
    }
}

fn edge_list(n: usize, edges: &[[usize; 2]], path: &str) -> Result<Graph, Issue> {
    let mut zero_based = Vec::with_capacity(edges.len());
    for (k, &[a, b]) in edges.iter().enumerate() {
        if a == 0 || b == 0 {
            return Err(Issue {
                path: format!("{path}[{k}]"),
                message: "agent ids start at 1".into(),
            });
        }
        zero_based.push((a - 1, b - 1));
    }
    Graph::from_edges(n, &zero_based).map_err(|e| Issue {
        path: path.to_string(),
        message: e.to_string(),
    })
}

fn build_network(spec: &NetworkSpec) -> Result<GraphSequence, Issue> {
    let issue = |e: crate::network::GraphError| Issue {
        path: "network".into(),
        message: e.to_string(),
    };
    let graph = match spec {
        NetworkSpec::Path { n } => Graph::path(*n).map_err(issue)?,
        NetworkSpec::Ring { n } => Graph::ring(*n).map_err(issue)?,
        NetworkSpec::Complete { n } => Graph::complete(*n).map_err(issue)?,
        NetworkSpec::RandomTree { n, seed } => {
            Graph::random_tree(*n, &mut topology_rng(*seed)).map_err(issue)?
        }
        NetworkSpec::Edges { n, edges } => edge_list(*n, edges, "network.edges")?,
        NetworkSpec::Periodic { n, period } => {
            let graphs = period
                .iter()
                .enumerate()
                .map(|(k, edges)| edge_list(*n, edges, &format!("network.period[{k}]")))
                .collect::<Result<Vec<_>, _>>()?;
            return GraphSequence::periodic(graphs).map_err(issue);
        }
    };
    Ok(GraphSequence::Static(graph))
}

/// Names of the built-in scenarios.
pub const PRESETS: &[(&str, &str)] = &[
    (
        "fig3",
        "event-triggered min-rule, 3-agent path, agent 1 at 0.7/0.6, g=1, gamma(t)=1/t^2, T=4000",
    ),
    (
        "fig3-dense",
        "same network and models as fig3, every agent sends everything every step",
    ),
    (
        "fig4",
        "quantized min-rule, 3-agent path, agent 1 at 0.8/0.2, 1 bit per hypothesis, T=4000",
    ),
    ("fig4-b2", "fig4 with 2 bits per hypothesis"),
    (
        "line-switching",
        "time-varying 3-agent line alternating edges 1-2 and 2-3, gamma=0.5, T=8000",
    ),
];

fn binary_agent(p0: f64, p1: f64) -> AgentSpec {
    AgentSpec {
        likelihood: vec![vec![p0, 1.0 - p0], vec![p1, 1.0 - p1]],
        prior: None,
    }
}

fn three_agent_line(name: &str, source: AgentSpec, network: NetworkSpec, algorithm: AlgorithmSpec, horizon: u64) -> ScenarioFile {
    ScenarioFile {
        schema_version: SCHEMA_VERSION,
        name: name.to_string(),
        hypotheses: vec!["theta_1".into(), "theta_2".into()],
        true_state: 1,
        agents: vec![source, binary_agent(0.5, 0.5), binary_agent(0.5, 0.5)],
        network,
        algorithm,
        horizon,
        seed: 0,
        output: OutputSpec::default(),
        consistency: ConsistencySpec::default(),
    }
}

/// Scenario document for a built-in preset.
pub fn preset_file(name: &str) -> Option<ScenarioFile> {
    let fig3_threshold = Threshold::Power { c: 1.0, a: 2.0 };
    let file = match name {
        "fig3" => three_agent_line(
            name,
            binary_agent(0.7, 0.6),
            NetworkSpec::Path { n: 3 },
            AlgorithmSpec::EventTriggered {
                interval: IntervalFn::every_step(),
                threshold: fig3_threshold,
            },
            4000,
        ),
        "fig3-dense" => three_agent_line(
            name,
            binary_agent(0.7, 0.6),
            NetworkSpec::Path { n: 3 },
            AlgorithmSpec::DenseBaseline,
            4000,
        ),
        "fig4" | "fig4-b2" => three_agent_line(
            name,
            binary_agent(0.8, 0.2),
            NetworkSpec::Path { n: 3 },
            AlgorithmSpec::Quantized {
                bits: if name == "fig4" { vec![1, 1] } else { vec![2, 2] },
            },
            4000,
        ),
        "line-switching" => three_agent_line(
            name,
            binary_agent(0.7, 0.6),
            NetworkSpec::Periodic {
                n: 3,
                period: vec![vec![[1, 2]], vec![[2, 3]]],
            },
            AlgorithmSpec::TimeVarying { gamma: 0.5 },
            8000,
        ),
        _ => return None,
    };
    Some(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fig3_preset_contents() {
        let s = Scenario::preset("fig3").unwrap();
        assert_eq!(s.agent_count(), 3);
        assert_eq!(s.horizon(), 4000);
        assert_eq!(s.models[0].row(0), &[0.7, 0.30000000000000004]);
        assert_eq!(s.models[0].row(1)[0], 0.6);
        assert_eq!(s.sources.sources(0, 1), vec![0]);
        assert_eq!(s.base_graph().edges(), vec![(0, 1), (1, 2)]);
        match &s.protocol {
            Protocol::EventTriggered { policy, alpha } => {
                assert_eq!(*alpha, 1.0);
                assert_eq!(policy.schedule.len(), 4000);
                assert!((policy.threshold.at(10) - 0.01).abs() < 1e-15);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fig4_preset_contents() {
        let s = Scenario::preset("fig4").unwrap();
        assert_eq!(s.models[0].row(0)[0], 0.8);
        assert_eq!(s.models[0].row(1)[0], 0.2);
        assert_eq!(s.protocol, Protocol::Quantized { bits: vec![1, 1] });
    }

    #[test]
    fn every_preset_validates() {
        for (name, _) in PRESETS {
            Scenario::preset(name).unwrap();
        }
        assert!(matches!(
            Scenario::preset("nope"),
            Err(ScenarioError::UnknownPreset(_))
        ));
    }

    #[test]
    fn bad_row_sum_names_agent_and_row() {
        let mut file = preset_file("fig3").unwrap();
        file.agents[1].likelihood[0] = vec![0.5, 0.4];
        let err = Scenario::from_file(file).unwrap_err();
        let text = err.to_string();
        assert!(text.contains("agents[1].likelihood"), "{text}");
        assert!(text.contains("agent 2, row 1"), "{text}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut value = serde_json::to_value(preset_file("fig3").unwrap()).unwrap();
        value["colour"] = serde_json::json!("blue");
        let err = Scenario::from_json(&value.to_string()).unwrap_err();
        assert!(matches!(err, ScenarioError::Parse(_)));

        let mut value = serde_json::to_value(preset_file("fig3").unwrap()).unwrap();
        value["algorithm"]["gamma"] = serde_json::json!(0.5);
        assert!(Scenario::from_json(&value.to_string()).is_err());
    }

    #[test]
    fn collects_every_issue() {
        let mut file = preset_file("fig4").unwrap();
        file.true_state = 3;
        file.horizon = 0;
        file.algorithm = AlgorithmSpec::Quantized { bits: vec![0] };
        let Err(ScenarioError::Invalid(issues)) = Scenario::from_file(file) else {
            panic!("expected validation failure");
        };
        let paths: Vec<_> = issues.iter().map(|i| i.path.as_str()).collect();
        assert!(paths.contains(&"true_state"));
        assert!(paths.contains(&"horizon"));
        assert!(paths.contains(&"algorithm.bits"));
        assert!(paths.contains(&"algorithm.bits[0]"));
    }

    #[test]
    fn disconnected_graph_rejected_for_static_protocols() {
        let mut file = preset_file("fig3").unwrap();
        file.network = NetworkSpec::Edges {
            n: 3,
            edges: vec![[1, 2]],
        };
        let err = Scenario::from_file(file).unwrap_err().to_string();
        assert!(err.contains("connected"), "{err}");
    }

    #[test]
    fn schedules_need_the_time_varying_protocol() {
        let mut file = preset_file("line-switching").unwrap();
        file.algorithm = AlgorithmSpec::DenseBaseline;
        assert!(Scenario::from_file(file).is_err());
    }

    #[test]
    fn agent_count_must_match_network() {
        let mut file = preset_file("fig3").unwrap();
        file.agents.pop();
        let err = Scenario::from_file(file).unwrap_err().to_string();
        assert!(err.contains("2 agents listed but the network has 3"), "{err}");
    }

    #[test]
    fn round_trip_through_json() {
        for (name, _) in PRESETS {
            let s = Scenario::preset(name).unwrap();
            let again = Scenario::from_json(&s.to_json()).unwrap();
            assert_eq!(again.file, s.file);
            assert_eq!(again.models, s.models);
            assert_eq!(again.protocol, s.protocol);
        }
    }

    #[test]
    fn defaults_fill_optional_sections() {
        let text = r#"{
            "schema_version": 1,
            "name": "tiny",
            "hypotheses": ["a", "b"],
            "true_state": 2,
            "agents": [
                {"likelihood": [[0.9, 0.1], [0.1, 0.9]], "prior": [0.3, 0.7]},
                {"likelihood": [[0.5, 0.5], [0.5, 0.5]]}
            ],
            "network": {"kind": "edges", "n": 2, "edges": [[1, 2]]},
            "algorithm": {"kind": "dense_baseline"},
            "horizon": 10
        }"#;
        let s = Scenario::from_json(text).unwrap();
        assert_eq!(s.truth, 1);
        assert_eq!(s.file.output.stride, 1);
        assert_eq!(s.file.consistency.threshold, 0.99);
        assert!((s.initial[0].log_pi[1].exp() - 0.7).abs() < 1e-15);
    }
}
