use std::fs;

use minrule::output::write_run;
use minrule::run::{run, RunOptions};
use minrule::scenario::{preset_file, ScenarioError, PRESETS};
use minrule::{Scenario, ScenarioFile};

#[test]
fn presets_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    for (name, _) in PRESETS {
        let scenario = Scenario::preset(name).unwrap();
        let path = dir.path().join(format!("{name}.json"));
        fs::write(&path, scenario.to_json()).unwrap();
        let loaded = Scenario::load(&path).unwrap();
        assert_eq!(loaded.file, scenario.file, "{name}");
        let again: ScenarioFile = serde_json::from_str(&loaded.to_json()).unwrap();
        assert_eq!(again, scenario.file);
    }
}

#[test]
fn loaded_file_runs_like_the_preset() {
    let dir = tempfile::tempdir().unwrap();
    let mut file = preset_file("fig3").unwrap();
    file.horizon = 200;
    let path = dir.path().join("s.json");
    fs::write(&path, serde_json::to_string(&file).unwrap()).unwrap();
    let a = run(&Scenario::load(&path).unwrap(), &RunOptions::default()).unwrap();
    let b = run(&Scenario::from_file(file).unwrap(), &RunOptions::default()).unwrap();
    assert_eq!(a.trace, b.trace);

    let out = dir.path().join("out");
    write_run(&out, &a, true).unwrap();
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["algorithm"], "event_triggered");
    assert_eq!(summary["horizon"], 200);
}

#[test]
fn missing_file_is_an_io_error() {
    let err = Scenario::load(std::path::Path::new("/nonexistent/s.json")).unwrap_err();
    assert!(matches!(err, ScenarioError::Io { .. }));
    assert_eq!(minrule::SimError::from(err).exit_code(), 3);
}

#[test]
fn invalid_file_reports_every_problem() {
    let mut file = preset_file("fig3").unwrap();
    file.true_state = 5;
    file.agents[2].likelihood[0] = vec![0.5, 0.6];
    file.horizon = 0;
    let err = Scenario::from_file(file).unwrap_err();
    let ScenarioError::Invalid(issues) = &err else {
        panic!("{err}");
    };
    assert!(issues.len() >= 3, "{issues:?}");
    assert_eq!(minrule::SimError::from(err).exit_code(), 1);
}

#[test]
fn shipped_example_is_valid() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/ring-event.json");
    let scenario = Scenario::load(&path).unwrap();
    assert_eq!(scenario.agent_count(), 5);
    assert_eq!(scenario.hypothesis_count(), 3);
}
