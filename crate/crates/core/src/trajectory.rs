//! Worked trajectories stored as text, and their conversion into a model
//! script plus tool fixtures so a run can be recorded for replay.
//!
//! A plan-work-solve trajectory:
//!
//! ```text
//! Question: ...
//! --- Planner ---
//! Plan: ...
//! #E1 = Tool[...]
//! --- Solver ---
//! Plan: ...
//! Evidence: ...
//! --- Answer ---
//! ...
//! ```
//!
//! An interleaved trajectory has a `--- Trace ---` section of
//! `Thought:`/`Action:`/`Observation:` lines instead of the planner and
//! solver sections, and no answer section (the `Finish` action carries it).

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::blueprint::{Blueprint, BlueprintError};
use crate::engine::{parse_react_step, EngineError, ReactAction, ReactStep};
use crate::tools::http::ToolFixture;
use crate::tools::{substitute_evidence, EvidenceMap, SubstitutionPolicy, ToolKind, ToolRegistry};

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("reading {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("missing section {0}")]
    MissingSection(&'static str),
    #[error("missing Question line")]
    MissingQuestion,
    #[error("planner section: {0}")]
    Planner(#[from] BlueprintError),
    #[error("trace step {index}: {source}")]
    Step { index: usize, source: EngineError },
    #[error("{plans} plans but {evidence} evidence blocks")]
    EvidenceCount { plans: usize, evidence: usize },
    #[error("trace does not end with a Finish action")]
    NoFinish,
    #[error("tool {0} is not registered")]
    UnknownTool(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewooTrajectory {
    pub question: String,
    pub planner_output: String,
    pub blueprint: Blueprint,
    /// `(plan description, evidence)` from the solver section.
    pub evidence: Vec<(String, String)>,
    pub answer: String,
}

/// One interleaved step: the completion the model produced and the
/// observation that followed it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceStep {
    pub completion: String,
    pub step: ReactStep,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReactTrajectory {
    pub question: String,
    pub steps: Vec<TraceStep>,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Trajectory {
    Rewoo(RewooTrajectory),
    React(ReactTrajectory),
}

impl Trajectory {
    pub fn question(&self) -> &str {
        match self {
            Trajectory::Rewoo(t) => &t.question,
            Trajectory::React(t) => &t.question,
        }
    }

    pub fn answer(&self) -> &str {
        match self {
            Trajectory::Rewoo(t) => &t.answer,
            Trajectory::React(t) => &t.answer,
        }
    }
}

const PLANNER: &str = "--- Planner ---";
const SOLVER: &str = "--- Solver ---";
const ANSWER: &str = "--- Answer ---";
const TRACE: &str = "--- Trace ---";

/// Splits text into the preamble and `(header, body)` sections.
fn sections(text: &str) -> (String, Vec<(String, String)>) {
    let mut preamble = String::new();
    let mut out: Vec<(String, String)> = Vec::new();
    for line in text.lines() {
        let t = line.trim();
        if t.starts_with("--- ") && t.ends_with(" ---") {
            out.push((t.to_string(), String::new()));
            continue;
        }
        let body = match out.last_mut() {
            Some((_, b)) => b,
            None => &mut preamble,
        };
        body.push_str(line);
        body.push('\n');
    }
    for (_, b) in &mut out {
        *b = b.trim().to_string();
    }
    (preamble, out)
}

fn section<'a>(all: &'a [(String, String)], name: &'static str) -> Result<&'a str, TrajectoryError> {
    all.iter().find(|(h, _)| h == name).map(|(_, b)| b.as_str()).ok_or(TrajectoryError::MissingSection(name))
}

/// Blocks that each start at a line beginning with `label`.
fn blocks<'a>(text: &'a str, label: &str) -> Vec<&'a str> {
    let mut starts: Vec<usize> = Vec::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        if line.trim_start().starts_with(label) {
            starts.push(offset);
        }
        offset += line.len();
    }
    starts.iter().enumerate().map(|(i, s)| text[*s..starts.get(i + 1).copied().unwrap_or(text.len())].trim()).collect()
}

fn parse_evidence(solver: &str) -> Vec<(String, String)> {
    blocks(solver, "Plan:")
        .into_iter()
        .map(|b| {
            let b = b.trim_start().trim_start_matches("Plan:");
            match b.find("Evidence:") {
                Some(i) => (b[..i].trim().to_string(), b[i + "Evidence:".len()..].trim().to_string()),
                None => (b.trim().to_string(), String::new()),
            }
        })
        .collect()
}

fn parse_trace(trace: &str) -> Result<Vec<TraceStep>, TrajectoryError> {
    let mut steps = Vec::new();
    for (index, block) in blocks(trace, "Thought:").into_iter().enumerate() {
        let (completion, observation) = match block.find("\nObservation:") {
            Some(i) => (block[..i].trim(), Some(block[i + "\nObservation:".len()..].trim())),
            None => (block, None),
        };
        let mut step =
            parse_react_step(completion).map_err(|source| TrajectoryError::Step { index: index + 1, source })?;
        step.observation = observation.unwrap_or_default().to_string();
        steps.push(TraceStep { completion: completion.to_string(), step });
    }
    Ok(steps)
}

pub fn parse_trajectory(text: &str) -> Result<Trajectory, TrajectoryError> {
    let (preamble, all) = sections(text);
    let question = preamble
        .lines()
        .find_map(|l| l.trim().strip_prefix("Question:"))
        .map(|q| q.trim().to_string())
        .ok_or(TrajectoryError::MissingQuestion)?;
    if let Ok(trace) = section(&all, TRACE) {
        let steps = parse_trace(trace)?;
        let answer = match steps.last().map(|s| &s.step.action) {
            Some(ReactAction::Finish { answer }) => answer.clone(),
            _ => return Err(TrajectoryError::NoFinish),
        };
        return Ok(Trajectory::React(ReactTrajectory { question, steps, answer }));
    }
    let planner_output = section(&all, PLANNER)?.to_string();
    let blueprint = Blueprint::parse(&planner_output)?;
    let evidence = parse_evidence(section(&all, SOLVER)?);
    if evidence.len() != blueprint.len() {
        return Err(TrajectoryError::EvidenceCount { plans: blueprint.len(), evidence: evidence.len() });
    }
    let answer = section(&all, ANSWER)?.to_string();
    Ok(Trajectory::Rewoo(RewooTrajectory { question, planner_output, blueprint, evidence, answer }))
}

pub fn load_trajectory(path: &Path) -> Result<Trajectory, TrajectoryError> {
    let text = fs::read_to_string(path)
        .map_err(|e| TrajectoryError::Io { path: path.display().to_string(), reason: e.to_string() })?;
    parse_trajectory(&text)
}

/// What a recording run needs: model completions in call order and fixture
/// answers for non-deterministic, non-model tools.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Script {
    pub completions: Vec<String>,
    pub tool_fixtures: Vec<ToolFixture>,
}

/// Derives the script that reproduces `traj` through the engine. Model-backed
/// tool outputs become completions; deterministic tools are left to run.
pub fn script_for(traj: &Trajectory, reg: &ToolRegistry) -> Result<Script, TrajectoryError> {
    let kind = |name: &str| reg.get(name).map(|s| s.kind).ok_or_else(|| TrajectoryError::UnknownTool(name.to_string()));
    let mut script = Script::default();
    match traj {
        Trajectory::Rewoo(t) => {
            script.completions.push(t.planner_output.clone());
            let mut ev = EvidenceMap::new();
            for (step, (_, evidence)) in t.blueprint.steps.iter().zip(&t.evidence) {
                let input = substitute_evidence(&step.tool_input, &ev, SubstitutionPolicy::Lenient)
                    .expect("lenient substitution cannot fail")
                    .text;
                match kind(&step.tool_name)? {
                    ToolKind::ModelBacked => script.completions.push(evidence.clone()),
                    ToolKind::Deterministic => {}
                    _ => script.tool_fixtures.push(ToolFixture {
                        tool: step.tool_name.clone(),
                        input,
                        output: evidence.clone(),
                    }),
                }
                let _ = ev.insert(step.var, evidence.clone());
            }
            script.completions.push(t.answer.clone());
        }
        Trajectory::React(t) => {
            for s in &t.steps {
                script.completions.push(s.completion.clone());
                if let ReactAction::Tool { name, input } = &s.step.action {
                    match kind(name)? {
                        ToolKind::ModelBacked => script.completions.push(s.step.observation.clone()),
                        ToolKind::Deterministic => {}
                        _ => script.tool_fixtures.push(ToolFixture {
                            tool: name.clone(),
                            input: input.clone(),
                            output: s.step.observation.clone(),
                        }),
                    }
                }
            }
        }
    }
    Ok(script)
}
