//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rewoo::accounting::Tokenizer;
use rewoo::engine::{run_task, EngineDeps, ExecutionRecord, Paradigm, ReactAction, Task};
use rewoo::model::ScriptedModel;
use rewoo::tools::catalog::{builtin_registry, ToolBackends, ToolConfig};
use rewoo::tools::http::FixtureBackend;
use rewoo::trajectory::{load_trajectory, script_for, Trajectory};

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn listed(kind: &str) -> Vec<PathBuf> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(fixtures_dir().join("trajectories").join(kind))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "txt"))
        .collect();
    out.sort();
    out
}

pub fn rewoo_trajectories() -> Vec<PathBuf> {
    listed("rewoo")
}

pub fn react_trajectories() -> Vec<PathBuf> {
    listed("react")
}

pub fn all_trajectories() -> Vec<(PathBuf, Trajectory)> {
    rewoo_trajectories()
        .into_iter()
        .chain(react_trajectories())
        .map(|p| {
            let t = load_trajectory(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            (p, t)
        })
        .collect()
}

fn tools_used(traj: &Trajectory) -> Vec<String> {
    let mut names: Vec<String> = match traj {
        Trajectory::Rewoo(t) => t.blueprint.steps.iter().map(|s| s.tool_name.clone()).collect(),
        Trajectory::React(t) => t
            .steps
            .iter()
            .filter_map(|s| match &s.step.action {
                ReactAction::Tool { name, .. } => Some(name.clone()),
                _ => None,
            })
            .collect(),
    };
    names.sort();
    names.dedup();
    names
}

/// Re-runs a trajectory through the engine with a script derived from it.
pub fn rerun(traj: &Trajectory) -> ExecutionRecord {
    let kinds = builtin_registry(&ToolConfig::default(), &ToolBackends::default()).unwrap();
    let script = script_for(traj, &kinds).unwrap();
    let fixtures = Arc::new(FixtureBackend::new());
    for f in script.tool_fixtures {
        fixtures.insert(f);
    }
    let model = Arc::new(ScriptedModel::queue(Tokenizer::Whitespace, script.completions));
    let backends = ToolBackends {
        fixtures: Some(fixtures),
        live: false,
        api_key: None,
        model: Some((model.clone(), "scripted".to_string(), Tokenizer::Whitespace)),
    };
    let reg = builtin_registry(&ToolConfig::default(), &backends).unwrap();
    let deps = EngineDeps::new(model.clone(), "scripted", Arc::new(reg));
    let mut task = Task::new("fixture", traj.question());
    task.toolset = tools_used(traj);
    let paradigm = match traj {
        Trajectory::Rewoo(_) => Paradigm::Rewoo,
        Trajectory::React(_) => Paradigm::React,
    };
    let rec = run_task(&task, paradigm, &deps).unwrap();
    assert_eq!(model.remaining(), 0, "script not fully consumed");
    rec
}

pub fn bin() -> std::process::Command {
    std::process::Command::new(env!("CARGO_BIN_EXE_rewoo"))
}
