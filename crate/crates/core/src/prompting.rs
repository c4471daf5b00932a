//! Planner, Solver, ReAct and single-call prompt composition.
//!
//! Templates are plain text with `{name}` placeholders. A section written as
//! `{#name}...{/name}` is kept only when the value of `name` is non-empty,
//! which is how the exemplar block disappears in zero-shot prompts. Unknown
//! `{...}` sequences are left untouched.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::accounting::{Breakdown, Tokenizer};
use crate::blueprint::{Blueprint, BlueprintError, PlanStep};
use crate::engine::ReactStep;

pub const DEFAULT_PLANNER: &str = include_str!("../templates/planner.txt");
pub const DEFAULT_SOLVER: &str = include_str!("../templates/solver.txt");
pub const DEFAULT_REACT: &str = include_str!("../templates/react.txt");
pub const DEFAULT_DIRECT: &str = include_str!("../templates/direct.txt");
pub const DEFAULT_COT: &str = include_str!("../templates/cot.txt");

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("{template} template has no {{{placeholder}}} placeholder")]
    MissingPlaceholder { template: &'static str, placeholder: &'static str },
    #[error("task text is empty")]
    EmptyTask,
    #[error("at least one tool is required")]
    NoTools,
    #[error("duplicate tool name {0}")]
    DuplicateTool(String),
    #[error("exemplar {index}: {reason}")]
    BadExemplar { index: usize, reason: String },
    #[error("exemplar {index}: planner demo does not parse: {source}")]
    ExemplarPlan { index: usize, source: BlueprintError },
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}: {source}")]
    Json { path: String, line: usize, source: serde_json::Error },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolDescription {
    pub name: String,
    pub description: String,
}

impl ToolDescription {
    pub fn new(name: impl Into<String>, description: impl Into<String>) -> Self {
        Self { name: name.into(), description: description.into() }
    }
}

/// A worked demonstration. `planner_demo` is blueprint text for the planner,
/// `tao_demo` the same question solved as Thought/Action/Observation lines.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planner_demo: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tao_demo: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cot_demo: Option<String>,
    #[serde(default)]
    pub source_tag: String,
}

impl Exemplar {
    fn validate(&self, index: usize) -> Result<(), PromptError> {
        if self.planner_demo.is_none() && self.tao_demo.is_none() {
            return Err(PromptError::BadExemplar { index, reason: "needs a planner_demo or a tao_demo".into() });
        }
        if let Some(demo) = &self.planner_demo {
            Blueprint::parse(demo).map_err(|source| PromptError::ExemplarPlan { index, source })?;
        }
        Ok(())
    }
}

/// Reads an exemplar bundle: JSONL `{question, planner_demo, tao_demo, source_tag}`.
pub fn load_exemplars(path: &Path) -> Result<Vec<Exemplar>, PromptError> {
    let text =
        fs::read_to_string(path).map_err(|source| PromptError::Io { path: path.display().to_string(), source })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let ex: Exemplar = serde_json::from_str(line).map_err(|source| PromptError::Json {
            path: path.display().to_string(),
            line: i + 1,
            source,
        })?;
        ex.validate(out.len())?;
        out.push(ex);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub planner_context: String,
    pub solver_context: String,
    pub react_context: String,
    pub direct_context: String,
    pub cot_context: String,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self {
            planner_context: DEFAULT_PLANNER.to_string(),
            solver_context: DEFAULT_SOLVER.to_string(),
            react_context: DEFAULT_REACT.to_string(),
            direct_context: DEFAULT_DIRECT.to_string(),
            cot_context: DEFAULT_COT.to_string(),
        }
    }
}

impl PromptTemplate {
    /// Loads `planner.txt`, `solver.txt`, `react.txt`, `direct.txt` and
    /// `cot.txt` from `dir`; missing files keep the default text.
    pub fn load_dir(dir: &Path) -> Result<Self, PromptError> {
        let mut tpl = Self::default();
        for (file, slot) in [
            ("planner.txt", &mut tpl.planner_context),
            ("solver.txt", &mut tpl.solver_context),
            ("react.txt", &mut tpl.react_context),
            ("direct.txt", &mut tpl.direct_context),
            ("cot.txt", &mut tpl.cot_context),
        ] {
            let path = dir.join(file);
            if path.exists() {
                *slot = fs::read_to_string(&path)
                    .map_err(|source| PromptError::Io { path: path.display().to_string(), source })?;
            }
        }
        Ok(tpl)
    }
}

/// A composed prompt plus the text of each accountable component, so the
/// caller can split its token count into question/context/exemplars/steps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComposedPrompt {
    pub text: String,
    pub question: String,
    pub exemplars: String,
    pub steps: String,
}

impl ComposedPrompt {
    /// Token breakdown for a call whose measured input was `input_tokens`.
    /// Question, exemplars and steps are counted directly; context is what
    /// remains, so the parts always sum to `input_tokens`.
    pub fn breakdown(&self, tok: &Tokenizer, input_tokens: u64) -> Breakdown {
        let question = tok.count(&self.question);
        let exemplars = tok.count(&self.exemplars);
        let steps = tok.count(&self.steps);
        Breakdown::with_residual_context(input_tokens, question, exemplars, steps)
    }
}

fn require(template: &str, name: &'static str, placeholder: &'static str) -> Result<(), PromptError> {
    if template.contains(&format!("{{{placeholder}}}")) {
        Ok(())
    } else {
        Err(PromptError::MissingPlaceholder { template: name, placeholder })
    }
}

/// Expands sections and placeholders.
pub fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut text = template.to_string();
    for (name, value) in values {
        let open = format!("{{#{name}}}");
        let close = format!("{{/{name}}}");
        while let Some(start) = text.find(&open) {
            let Some(rel_end) = text[start..].find(&close) else { break };
            let end = start + rel_end;
            let inner = text[start + open.len()..end].to_string();
            let replacement = if value.is_empty() { String::new() } else { inner };
            text.replace_range(start..end + close.len(), &replacement);
        }
    }
    for (name, value) in values {
        text = text.replace(&format!("{{{name}}}"), value);
    }
    text
}

/// `(1) Name[input]: description` lines.
pub fn render_tools(tools: &[ToolDescription]) -> Result<String, PromptError> {
    let mut seen = std::collections::HashSet::new();
    for t in tools {
        if !seen.insert(t.name.as_str()) {
            return Err(PromptError::DuplicateTool(t.name.clone()));
        }
    }
    Ok(tools
        .iter()
        .enumerate()
        .map(|(i, t)| format!("({}) {}[input]: {}", i + 1, t.name, t.description))
        .collect::<Vec<_>>()
        .join("\n"))
}

fn check_task(question: &str) -> Result<(), PromptError> {
    if question.trim().is_empty() {
        Err(PromptError::EmptyTask)
    } else {
        Ok(())
    }
}

pub fn render_planner_exemplars(exemplars: &[Exemplar]) -> String {
    exemplars
        .iter()
        .filter_map(|e| e.planner_demo.as_ref().map(|demo| format!("Task: {}\n\n{}", e.question, demo.trim_end())))
        .collect::<Vec<_>>()
        .join("\n\n")
}

pub fn render_react_exemplars(exemplars: &[Exemplar]) -> String {
    exemplars
        .iter()
        .filter_map(|e| e.tao_demo.as_ref().map(|demo| format!("Question: {}\n{}", e.question, demo.trim_end())))
        .collect::<Vec<_>>()
        .join("\n\n")
}

pub fn compose_planner_prompt(
    tpl: &PromptTemplate,
    tools: &[ToolDescription],
    exemplars: &[Exemplar],
    question: &str,
) -> Result<ComposedPrompt, PromptError> {
    let ctx = &tpl.planner_context;
    require(ctx, "planner", "tools")?;
    require(ctx, "planner", "exemplars")?;
    require(ctx, "planner", "task")?;
    check_task(question)?;
    if tools.is_empty() {
        return Err(PromptError::NoTools);
    }
    let tool_text = render_tools(tools)?;
    let exemplar_text = render_planner_exemplars(exemplars);
    let text = fill(ctx, &[("tools", &tool_text), ("exemplars", &exemplar_text), ("task", question)]);
    Ok(ComposedPrompt { text, question: question.to_string(), exemplars: exemplar_text, steps: String::new() })
}

/// The zero-shot planner context without a task, used as the instruction of
/// exported planner training records.
pub fn planner_instruction(tpl: &PromptTemplate, tools: &[ToolDescription]) -> Result<String, PromptError> {
    require(&tpl.planner_context, "planner", "tools")?;
    require(&tpl.planner_context, "planner", "task")?;
    let tool_text = render_tools(tools)?;
    Ok(fill(&tpl.planner_context, &[("tools", &tool_text), ("exemplars", ""), ("task", "")]).trim_end().to_string())
}

/// `Plan: <desc>\nEvidence:\n<evidence>` blocks, one per pair.
pub fn render_plan_evidence(pairs: &[(PlanStep, String)]) -> String {
    pairs
        .iter()
        .map(|(step, evidence)| format!("Plan: {}\nEvidence:\n{}", step.description, evidence))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn compose_solver_prompt(
    tpl: &PromptTemplate,
    question: &str,
    pairs: &[(PlanStep, String)],
) -> Result<ComposedPrompt, PromptError> {
    let ctx = &tpl.solver_context;
    require(ctx, "solver", "plans")?;
    require(ctx, "solver", "task")?;
    check_task(question)?;
    let plans = render_plan_evidence(pairs);
    let text = fill(ctx, &[("plans", &plans), ("task", question)]);
    Ok(ComposedPrompt { text, question: question.to_string(), exemplars: String::new(), steps: plans })
}

/// History lines for ReAct prompts. A FINISH step is never fed back, so only
/// tool and invalid steps are rendered.
pub fn render_history(history: &[ReactStep]) -> String {
    history.iter().map(ReactStep::render).collect::<Vec<_>>().join("\n")
}

/// Rebuilds the complete ReAct prompt: context, tools, exemplars, question
/// and every prior step.
pub fn compose_react_prompt(
    tpl: &PromptTemplate,
    tools: &[ToolDescription],
    exemplars: &[Exemplar],
    question: &str,
    history: &[ReactStep],
) -> Result<ComposedPrompt, PromptError> {
    let ctx = &tpl.react_context;
    require(ctx, "react", "tools")?;
    require(ctx, "react", "task")?;
    require(ctx, "react", "history")?;
    check_task(question)?;
    if tools.is_empty() {
        return Err(PromptError::NoTools);
    }
    let tool_text = render_tools(tools)?;
    let exemplar_text = render_react_exemplars(exemplars);
    let steps = render_history(history);
    let text =
        fill(ctx, &[("tools", &tool_text), ("exemplars", &exemplar_text), ("task", question), ("history", &steps)]);
    Ok(ComposedPrompt { text, question: question.to_string(), exemplars: exemplar_text, steps })
}

pub fn compose_direct_prompt(tpl: &PromptTemplate, question: &str) -> Result<ComposedPrompt, PromptError> {
    require(&tpl.direct_context, "direct", "task")?;
    check_task(question)?;
    Ok(ComposedPrompt {
        text: fill(&tpl.direct_context, &[("task", question)]),
        question: question.to_string(),
        exemplars: String::new(),
        steps: String::new(),
    })
}

/// Step-by-step prompt with at most one exemplar (the first that carries a
/// `cot_demo`).
pub fn compose_cot_prompt(
    tpl: &PromptTemplate,
    exemplars: &[Exemplar],
    question: &str,
) -> Result<ComposedPrompt, PromptError> {
    require(&tpl.cot_context, "cot", "task")?;
    check_task(question)?;
    let exemplar_text = exemplars
        .iter()
        .find_map(|e| e.cot_demo.as_ref().map(|d| format!("Question: {}\n{}", e.question, d.trim_end())))
        .unwrap_or_default();
    Ok(ComposedPrompt {
        text: fill(&tpl.cot_context, &[("exemplars", &exemplar_text), ("task", question)]),
        question: question.to_string(),
        exemplars: exemplar_text,
        steps: String::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blueprint::EvidenceVarId;
    use crate::engine::ReactAction;

    fn tools() -> Vec<ToolDescription> {
        crate::tools::catalog::descriptions(&["Google", "Wikipedia", "WolframAlpha", "Calculator", "LLM", "SearchSOTU"])
            .unwrap()
    }

    fn thomas() -> Exemplar {
        Exemplar {
            question: "Thomas, Toby, and Rebecca worked a total of 157 hours in one week.".into(),
            planner_demo: Some(
                "Plan: Given Thomas worked x hours, solve with Wolfram Alpha.\n#E1 = WolframAlpha[Solve x + (2x - 10) + ((2x - 10) - 8) = 157]".into(),
            ),
            tao_demo: Some("Thought: solve it\nAction: WolframAlpha[Solve x]\nObservation: x = 37".into()),
            cot_demo: None,
            source_tag: "gsm8k".into(),
        }
    }

    const Q: &str = "Who made the 1989 comic book, the film version of which Jon Raymond Polito appeared in?";

    #[test]
    fn planner_prompt_opening_and_shape() {
        let p = compose_planner_prompt(&PromptTemplate::default(), &tools(), &[thomas()], Q).unwrap();
        assert!(p.text.starts_with("For the following task, make plans that can solve the problem step by step."));
        assert!(p.text.contains("(1) Google[input]: Worker that searches results from Google."));
        assert!(p.text.contains("(6) SearchSOTU[input]:"));
        assert!(p.text.contains("For example,\n\nTask: Thomas"));
        assert!(p.text.contains("Each Plan should be followed by only one #E.\n\n"));
        assert!(p.text.trim_end().ends_with(Q));
    }

    #[test]
    fn zero_shot_planner_omits_exemplar_section() {
        let p = compose_planner_prompt(&PromptTemplate::default(), &tools(), &[], Q).unwrap();
        assert!(!p.text.contains("For example"));
        assert!(!p.text.contains("{#exemplars}"));
        assert!(p.exemplars.is_empty());
    }

    #[test]
    fn planner_errors() {
        let tpl = PromptTemplate::default();
        assert!(matches!(compose_planner_prompt(&tpl, &tools(), &[], "  "), Err(PromptError::EmptyTask)));
        assert!(matches!(compose_planner_prompt(&tpl, &[], &[], Q), Err(PromptError::NoTools)));
        let broken = PromptTemplate { planner_context: "no placeholders {tools} {exemplars}".into(), ..tpl };
        assert!(matches!(
            compose_planner_prompt(&broken, &tools(), &[], Q),
            Err(PromptError::MissingPlaceholder { placeholder: "task", .. })
        ));
    }

    fn step(i: u32, desc: &str) -> PlanStep {
        PlanStep {
            description: desc.into(),
            var: EvidenceVarId::new(i).unwrap(),
            tool_name: "Calculator".into(),
            tool_input: String::new(),
        }
    }

    #[test]
    fn solver_prompt_with_gsm8k_evidence() {
        let pairs: Vec<(PlanStep, String)> = [("a", "200"), ("b", "200.0"), ("c", "10.0"), ("d", "20.0")]
            .iter()
            .enumerate()
            .map(|(i, (d, e))| (step(i as u32 + 1, d), e.to_string()))
            .collect();
        let p = compose_solver_prompt(&PromptTemplate::default(), "How many wings?", &pairs).unwrap();
        let idx = p.text.rfind("Evidence:\n").unwrap();
        assert!(p.text[idx..].starts_with("Evidence:\n20.0\n"));
        assert!(p.text.contains("Respond with the answer directly with no extra words."));
        assert!(p.text.contains("Use them with caution since long evidence might contain irrelevant information."));
    }

    #[test]
    fn solver_prompt_without_pairs_is_context_and_question() {
        let p = compose_solver_prompt(&PromptTemplate::default(), "What?", &[]).unwrap();
        assert!(!p.text.contains("Plan:"));
        assert!(p.text.trim_end().ends_with("What?"));
        assert!(p.steps.is_empty());
    }

    #[test]
    fn solver_renders_failures_verbatim() {
        let pairs = vec![(step(1, "look"), "No evidence found.".to_string())];
        let p = compose_solver_prompt(&PromptTemplate::default(), "What?", &pairs).unwrap();
        assert!(p.text.contains("Plan: look\nEvidence:\nNo evidence found."));
    }

    fn tao(thought: &str, tool: &str, input: &str, obs: &str) -> ReactStep {
        ReactStep {
            thought: thought.into(),
            action: ReactAction::Tool { name: tool.into(), input: input.into() },
            observation: obs.into(),
        }
    }

    #[test]
    fn react_prompt_first_call_and_with_history() {
        let tpl = PromptTemplate::default();
        let first = compose_react_prompt(&tpl, &tools(), &[thomas()], Q, &[]).unwrap();
        assert!(first.steps.is_empty());
        assert!(first.text.contains("Here are some examples."));
        assert!(first.text.trim_end().ends_with(Q));

        let h = vec![tao(
            "I need to search Jon Raymond Polito.",
            "Search",
            "Jon Raymond Polito",
            "Jon Raymond Polito was an American character actor.",
        )];
        let second = compose_react_prompt(&tpl, &tools(), &[thomas()], Q, &h).unwrap();
        assert!(second.text.contains("Action: Search[Jon Raymond Polito]"));
        assert!(second.text.trim_end().ends_with("Observation: Jon Raymond Polito was an American character actor."));
    }

    #[test]
    fn react_prompt_tokens_grow_with_history() {
        let tpl = PromptTemplate::default();
        let tok = Tokenizer::Whitespace;
        let mut history = Vec::new();
        let mut last = tok.count(&compose_react_prompt(&tpl, &tools(), &[thomas()], Q, &history).unwrap().text);
        for j in 0..5 {
            history.push(tao(&format!("thought {j}"), "Calculator", "1 + 1", "2"));
            let now = tok.count(&compose_react_prompt(&tpl, &tools(), &[thomas()], Q, &history).unwrap().text);
            assert!(now > last);
            last = now;
        }
    }

    #[test]
    fn composition_is_deterministic() {
        let tpl = PromptTemplate::default();
        let a = compose_planner_prompt(&tpl, &tools(), &[thomas()], Q).unwrap();
        let b = compose_planner_prompt(&tpl, &tools(), &[thomas()], Q).unwrap();
        assert_eq!(a.text.as_bytes(), b.text.as_bytes());
    }

    #[test]
    fn breakdown_sums_to_input() {
        let tok = Tokenizer::Whitespace;
        let p = compose_planner_prompt(&PromptTemplate::default(), &tools(), &[thomas()], Q).unwrap();
        let total = tok.count(&p.text);
        let b = p.breakdown(&tok, total);
        assert_eq!(b.total(), total);
        assert_eq!(b.question, tok.count(Q));
        assert_eq!(b.exemplars, tok.count(&render_planner_exemplars(&[thomas()])));
    }

    #[test]
    fn fill_sections_and_unknown_braces() {
        assert_eq!(fill("a{#x}[{x}]{/x}b {y}", &[("x", "")]), "ab {y}");
        assert_eq!(fill("a{#x}[{x}]{/x}b", &[("x", "1")]), "a[1]b");
    }

    #[test]
    fn exemplar_validation() {
        let mut bad = thomas();
        bad.planner_demo = Some("Plan: dangling".into());
        assert!(matches!(bad.validate(0), Err(PromptError::ExemplarPlan { .. })));
        let empty = Exemplar { planner_demo: None, tao_demo: None, ..thomas() };
        assert!(matches!(empty.validate(0), Err(PromptError::BadExemplar { .. })));
    }

    #[test]
    fn planner_instruction_is_zero_shot_context() {
        let inst = planner_instruction(&PromptTemplate::default(), &tools()).unwrap();
        assert!(inst.ends_with("Each Plan should be followed by only one #E."));
        assert!(!inst.contains("For example"));
    }
}
