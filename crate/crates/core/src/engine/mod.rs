//! Task runs under each paradigm: plan-work-solve, the interleaved
//! thought/action/observation loop, and the single-call baselines.

mod react;
mod rewoo;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::accounting::{CallKind, LedgerEntry, TokenLedger, Tokenizer};
use crate::blueprint::{split_tool_call, Blueprint, BlueprintError, ParseMode};
use crate::model::{
    LanguageModel, ModelError, ModelRequest, ModelResponse, DEFAULT_CONTEXT_LIMIT, DEFAULT_MAX_OUTPUT_TOKENS,
};
use crate::prompting::{self, ComposedPrompt, Exemplar, PromptError, PromptTemplate, ToolDescription};
use crate::tools::{EvidenceMap, FailureInjection, Invocation, ToolError, ToolRegistry};

pub use react::run_react;
pub use rewoo::run_rewoo;

pub const DEFAULT_MAX_STEPS: usize = 7;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("planner output did not parse: {0}")]
    PlannerParseFailure(BlueprintError),
    #[error("no Action line in completion")]
    NoAction,
    #[error("malformed action {0:?}")]
    MalformedAction(String),
    #[error("unknown exemplar set {0:?}")]
    UnknownExemplarSet(String),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tool(#[from] ToolError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Paradigm {
    Rewoo,
    React,
    Direct,
    Cot,
}

impl Paradigm {
    pub const ALL: [Paradigm; 4] = [Paradigm::Rewoo, Paradigm::React, Paradigm::Direct, Paradigm::Cot];

    pub fn as_str(self) -> &'static str {
        match self {
            Paradigm::Rewoo => "rewoo",
            Paradigm::React => "react",
            Paradigm::Direct => "direct",
            Paradigm::Cot => "cot",
        }
    }
}

impl fmt::Display for Paradigm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Paradigm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rewoo" => Ok(Paradigm::Rewoo),
            "react" => Ok(Paradigm::React),
            "direct" => Ok(Paradigm::Direct),
            "cot" => Ok(Paradigm::Cot),
            other => Err(format!("unknown paradigm {other:?} (expected rewoo, react, direct or cot)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    pub question: String,
    #[serde(default)]
    pub gold_answer: Option<String>,
    #[serde(default)]
    pub toolset: Vec<String>,
    /// Key into the exemplar sets; empty means zero-shot.
    #[serde(default)]
    pub exemplar_set: String,
}

impl Task {
    pub fn new(id: impl Into<String>, question: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            question: question.into(),
            gold_answer: None,
            toolset: Vec::new(),
            exemplar_set: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ReactAction {
    Tool {
        name: String,
        input: String,
    },
    Finish {
        answer: String,
    },
    /// The completion had no usable action; it is kept as the thought.
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReactStep {
    pub thought: String,
    pub action: ReactAction,
    #[serde(default)]
    pub observation: String,
}

pub const INVALID_ACTION: &str = "Invalid action";

impl ReactStep {
    /// The step as it appears in later prompts.
    pub fn render(&self) -> String {
        match &self.action {
            ReactAction::Tool { name, input } => {
                format!("Thought: {}\nAction: {}[{}]\nObservation: {}", self.thought, name, input, self.observation)
            }
            ReactAction::Finish { answer } => format!("Thought: {}\nAction: Finish[{}]", self.thought, answer),
            ReactAction::Invalid => format!("Thought: {}\nObservation: {}", self.thought, self.observation),
        }
    }

    pub fn is_finish(&self) -> bool {
        matches!(self.action, ReactAction::Finish { .. })
    }
}

/// Finds the first `label` that starts a line (after leading whitespace)
/// and returns the byte offset just past it.
fn find_label(text: &str, label: &str) -> Option<(usize, usize)> {
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim_start();
        if trimmed.starts_with(label) {
            let start = offset + (line.len() - trimmed.len());
            return Some((start, start + label.len()));
        }
        offset += line.len();
    }
    None
}

/// Parses one ReAct completion into thought and action.
///
/// The thought is the text after the first `Thought:` (or everything before
/// `Action:` when the label is missing). The action runs from the first
/// `Action:` to the next `Observation:` or `Thought:` line.
pub fn parse_react_step(completion: &str) -> Result<ReactStep, EngineError> {
    let (action_start, action_body) = find_label(completion, "Action:").ok_or(EngineError::NoAction)?;
    let thought = match find_label(completion, "Thought:") {
        Some((s, body)) if s < action_start => completion[body..action_start].trim(),
        _ => completion[..action_start].trim(),
    };
    let rest = &completion[action_body..];
    let end = [find_label(rest, "Observation:"), find_label(rest, "Thought:")]
        .into_iter()
        .flatten()
        .map(|(s, _)| s)
        .min()
        .unwrap_or(rest.len());
    let action_text = rest[..end].trim();
    let (name, input) =
        split_tool_call(action_text).ok_or_else(|| EngineError::MalformedAction(action_text.to_string()))?;
    let action = if name.eq_ignore_ascii_case("finish") {
        ReactAction::Finish { answer: input }
    } else {
        ReactAction::Tool { name, input }
    };
    Ok(ReactStep { thought: thought.to_string(), action, observation: String::new() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarningKind {
    PlannerParse,
    DependencyGraph,
    UnresolvedReference,
    ToolFailure,
    UnknownTool,
    InvalidAction,
    StepLimit,
    EmptyAnswer,
    TaskFailed,
    UnparseableVerdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Warning {
    pub kind: WarningKind,
    pub message: String,
}

impl Warning {
    pub fn new(kind: WarningKind, message: impl Into<String>) -> Self {
        Self { kind, message: message.into() }
    }
}

/// Full trace of one task run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionRecord {
    pub task_id: String,
    pub question: String,
    pub paradigm: Paradigm,
    #[serde(default)]
    pub toolset: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blueprint: Option<Blueprint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence: Option<EvidenceMap>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub react_trace: Option<Vec<ReactStep>>,
    /// Raw completion of a single-call run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completion: Option<String>,
    #[serde(default)]
    pub tool_calls: Vec<Invocation>,
    pub answer: String,
    pub ledger: TokenLedger,
    pub steps: usize,
    #[serde(default)]
    pub warnings: Vec<Warning>,
}

impl ExecutionRecord {
    fn empty(task: &Task, paradigm: Paradigm) -> Self {
        Self {
            task_id: task.id.clone(),
            question: task.question.clone(),
            paradigm,
            toolset: task.toolset.clone(),
            blueprint: None,
            evidence: None,
            react_trace: None,
            completion: None,
            tool_calls: Vec::new(),
            answer: String::new(),
            ledger: TokenLedger::default(),
            steps: 0,
            warnings: Vec::new(),
        }
    }

    pub fn warn(&mut self, kind: WarningKind, message: impl Into<String>) {
        self.warnings.push(Warning::new(kind, message));
    }
}

/// Counts reasoning lines of a step-by-step completion: non-empty lines,
/// not counting a closing `Answer:` line, at least one.
pub fn cot_reasoning_lines(completion: &str) -> usize {
    let lines: Vec<&str> = completion.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    let n = match lines.last() {
        Some(l) if l.starts_with("Answer:") => lines.len() - 1,
        _ => lines.len(),
    };
    n.max(1)
}

/// Step count of a finished run: plans plus the solver call, thoughts, or
/// one for a direct answer.
pub fn step_count(rec: &ExecutionRecord) -> usize {
    match rec.paradigm {
        Paradigm::Rewoo => rec.blueprint.as_ref().map_or(0, Blueprint::len) + 1,
        Paradigm::React => rec.react_trace.as_ref().map_or(0, Vec::len),
        Paradigm::Direct => 1,
        Paradigm::Cot => cot_reasoning_lines(rec.completion.as_deref().unwrap_or("")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineOptions {
    /// Strict aborts on malformed planner output, unresolved references,
    /// unknown tools and malformed actions; lenient records warnings.
    pub strict: bool,
    pub parallel_waves: bool,
    pub max_steps: usize,
    pub context_limit: Option<u64>,
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            strict: false,
            parallel_waves: false,
            max_steps: DEFAULT_MAX_STEPS,
            context_limit: Some(DEFAULT_CONTEXT_LIMIT),
            temperature: 0.0,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
        }
    }
}

impl EngineOptions {
    pub fn parse_mode(&self) -> ParseMode {
        if self.strict {
            ParseMode::Strict
        } else {
            ParseMode::Lenient
        }
    }
}

/// Shared, read-only handles a run needs.
#[derive(Clone)]
pub struct EngineDeps {
    pub model: Arc<dyn LanguageModel>,
    pub model_id: String,
    pub registry: Arc<ToolRegistry>,
    pub templates: Arc<PromptTemplate>,
    pub exemplars: Arc<BTreeMap<String, Vec<Exemplar>>>,
    pub tokenizer: Tokenizer,
    pub injection: FailureInjection,
    pub options: EngineOptions,
}

impl EngineDeps {
    pub fn new(model: Arc<dyn LanguageModel>, model_id: impl Into<String>, registry: Arc<ToolRegistry>) -> Self {
        Self {
            model,
            model_id: model_id.into(),
            registry,
            templates: Arc::new(PromptTemplate::default()),
            exemplars: Arc::new(BTreeMap::new()),
            tokenizer: Tokenizer::Whitespace,
            injection: FailureInjection::off(),
            options: EngineOptions::default(),
        }
    }

    pub(crate) fn exemplars_for(&self, task: &Task) -> Result<&[Exemplar], EngineError> {
        if task.exemplar_set.is_empty() {
            return Ok(&[]);
        }
        self.exemplars
            .get(&task.exemplar_set)
            .map(Vec::as_slice)
            .ok_or_else(|| EngineError::UnknownExemplarSet(task.exemplar_set.clone()))
    }

    pub(crate) fn tools_for(&self, task: &Task) -> Result<Vec<ToolDescription>, EngineError> {
        Ok(self.registry.descriptions(&task.toolset)?)
    }

    /// One model call with the context guard applied, plus its ledger entry.
    pub(crate) fn call(
        &self,
        prompt: &ComposedPrompt,
        kind: CallKind,
        stop: &[&str],
    ) -> Result<(ModelResponse, LedgerEntry), EngineError> {
        if let Some(limit) = self.options.context_limit {
            let tokens = self.tokenizer.count(&prompt.text);
            if tokens > limit {
                return Err(ModelError::ContextLimit { tokens, limit }.into());
            }
        }
        let req = ModelRequest {
            prompt: prompt.text.clone(),
            model_id: self.model_id.clone(),
            temperature: self.options.temperature,
            max_output_tokens: self.options.max_output_tokens,
            stop_sequences: stop.iter().map(|s| s.to_string()).collect(),
        };
        let resp = self.model.complete(&req)?;
        let entry = LedgerEntry {
            call_kind: kind,
            input_tokens: resp.input_tokens,
            output_tokens: resp.output_tokens,
            breakdown: Some(prompt.breakdown(&self.tokenizer, resp.input_tokens)),
        };
        Ok((resp, entry))
    }
}

/// Runs `task` once under `paradigm`.
pub fn run_task(task: &Task, paradigm: Paradigm, deps: &EngineDeps) -> Result<ExecutionRecord, EngineError> {
    match paradigm {
        Paradigm::Rewoo => run_rewoo(task, deps),
        Paradigm::React => run_react(task, deps, deps.options.max_steps),
        Paradigm::Direct => run_single(task, deps, Paradigm::Direct),
        Paradigm::Cot => run_single(task, deps, Paradigm::Cot),
    }
}

/// The direct and step-by-step baselines: one model call, no tools.
pub fn run_single(task: &Task, deps: &EngineDeps, style: Paradigm) -> Result<ExecutionRecord, EngineError> {
    let prompt = match style {
        Paradigm::Cot => prompting::compose_cot_prompt(&deps.templates, deps.exemplars_for(task)?, &task.question)?,
        _ => prompting::compose_direct_prompt(&deps.templates, &task.question)?,
    };
    let (resp, entry) = deps.call(&prompt, CallKind::Single, &[])?;
    let mut rec = ExecutionRecord::empty(task, if style == Paradigm::Cot { Paradigm::Cot } else { Paradigm::Direct });
    rec.ledger.push(entry);
    let completion = resp.text;
    rec.answer = match rec.paradigm {
        Paradigm::Cot => {
            let last = completion.lines().map(str::trim).rfind(|l| !l.is_empty()).unwrap_or("");
            last.strip_prefix("Answer:").unwrap_or(last).trim().to_string()
        }
        _ => completion.trim().to_string(),
    };
    if rec.answer.is_empty() {
        rec.warn(WarningKind::EmptyAnswer, "model returned an empty answer");
    }
    rec.completion = Some(completion);
    rec.steps = step_count(&rec);
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ScriptedModel;
    use crate::tools::catalog::{builtin_registry, ToolBackends, ToolConfig};

    pub(crate) fn deps_with(model: ScriptedModel) -> EngineDeps {
        let reg = builtin_registry(&ToolConfig::default(), &ToolBackends::default()).unwrap();
        EngineDeps::new(Arc::new(model), "test-model", Arc::new(reg))
    }

    #[test]
    fn parse_finish() {
        let s = parse_react_step("Thought: I now know the final answer\nAction: Finish[Dave Stevens]").unwrap();
        assert_eq!(s.thought, "I now know the final answer");
        assert_eq!(s.action, ReactAction::Finish { answer: "Dave Stevens".into() });
        assert!(s.observation.is_empty());
    }

    #[test]
    fn parse_tool_action() {
        let s = parse_react_step("Thought: t\nAction: Calculator[(50 * 4) / 20]").unwrap();
        assert_eq!(s.action, ReactAction::Tool { name: "Calculator".into(), input: "(50 * 4) / 20".into() });
    }

    #[test]
    fn parse_without_action() {
        assert!(matches!(parse_react_step("no structure here"), Err(EngineError::NoAction)));
        assert!(matches!(parse_react_step("Thought: x\nAction: just words"), Err(EngineError::MalformedAction(_))));
    }

    #[test]
    fn parse_quotes_and_trailing_observation() {
        let s = parse_react_step(
            "Thought: found her.\nAction: Finish[Lisa \"Left Eye\" Lopes]\nObservation: should be ignored [x]",
        )
        .unwrap();
        assert_eq!(s.action, ReactAction::Finish { answer: "Lisa \"Left Eye\" Lopes".into() });
    }

    #[test]
    fn parse_missing_thought_label() {
        let s = parse_react_step("I should search.\nAction: Search[x]").unwrap();
        assert_eq!(s.thought, "I should search.");
    }

    #[test]
    fn render_round_trips_through_parse() {
        let step = ReactStep {
            thought: "t".into(),
            action: ReactAction::Tool { name: "Search".into(), input: "The Rocketeer".into() },
            observation: "obs".into(),
        };
        let parsed = parse_react_step(&step.render()).unwrap();
        assert_eq!(parsed.action, step.action);
        assert_eq!(parsed.thought, "t");
    }

    #[test]
    fn direct_run() {
        let deps = deps_with(ScriptedModel::queue(Tokenizer::Whitespace, ["Paris"]));
        let rec = run_single(&Task::new("t1", "What is the capital of France?"), &deps, Paradigm::Direct).unwrap();
        assert_eq!(rec.answer, "Paris");
        assert_eq!(rec.steps, 1);
        assert_eq!(rec.ledger.calls(), 1);
        assert!(rec.warnings.is_empty());
    }

    #[test]
    fn direct_empty_answer_warns() {
        let deps = deps_with(ScriptedModel::queue(Tokenizer::Whitespace, [""]));
        let rec = run_single(&Task::new("t1", "Q?"), &deps, Paradigm::Direct).unwrap();
        assert_eq!(rec.answer, "");
        assert_eq!(rec.warnings[0].kind, WarningKind::EmptyAnswer);
    }

    #[test]
    fn cot_counts_reasoning_lines() {
        let deps = deps_with(ScriptedModel::queue(
            Tokenizer::Whitespace,
            ["4 grandparents give 50 each, so 200.\n200 / 20 = 10 birds.\n10 birds have 20 wings.\nAnswer: 20"],
        ));
        let rec = run_single(&Task::new("t1", "How many wings?"), &deps, Paradigm::Cot).unwrap();
        assert_eq!(rec.steps, 3);
        assert_eq!(rec.answer, "20");
        let deps = deps_with(ScriptedModel::queue(Tokenizer::Whitespace, ["a\nb\nc"]));
        let rec = run_single(&Task::new("t1", "Q?"), &deps, Paradigm::Cot).unwrap();
        assert_eq!(rec.steps, 3);
        assert_eq!(rec.answer, "c");
    }

    #[test]
    fn context_guard() {
        let mut deps = deps_with(ScriptedModel::queue(Tokenizer::Whitespace, ["x"]));
        deps.options.context_limit = Some(3);
        assert!(matches!(
            run_single(&Task::new("t1", "a question that is long"), &deps, Paradigm::Direct),
            Err(EngineError::Model(ModelError::ContextLimit { .. }))
        ));
    }

    #[test]
    fn unknown_exemplar_set() {
        let deps = deps_with(ScriptedModel::queue(Tokenizer::Whitespace, ["x"]));
        let mut task = Task::new("t1", "Q?");
        task.exemplar_set = "missing".into();
        assert!(matches!(run_single(&task, &deps, Paradigm::Cot), Err(EngineError::UnknownExemplarSet(_))));
    }

    #[test]
    fn paradigm_parsing() {
        assert_eq!("ReWOO".parse::<Paradigm>().unwrap(), Paradigm::Rewoo);
        assert!("plan".parse::<Paradigm>().is_err());
    }
}
