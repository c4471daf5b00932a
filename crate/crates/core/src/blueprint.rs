//! Blueprint data model and the Planner output parser.
//!
//! A blueprint is the ordered list of `(Plan, #E)` tuples a planner emits in
//! one completion:
//!
//! ```text
//! Plan: Search for more information about Jon Raymond Polito.
//! #E1 = Wikipedia[Jon Raymond Polito]
//! Plan: Search for more information about the 1989 comic book.
//! #E2 = LLM[What is the name of the 1989 comic book? Given context: #E1]
//! ```
//!
//! Parsing is line oriented. A description runs from `Plan:` up to the first
//! line that opens with an assignment (`#Ek =`), and an assignment statement
//! runs until the next `Plan:` or assignment line. The tool input is the text
//! between the first `[` after the tool name and the last `]` of the
//! statement, so inputs may themselves contain brackets or span lines.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

static VAR_REF: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"#E(\d+)").unwrap());
static ASSIGNMENT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"#E(\d+)\s*=").unwrap());
static IDENT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[A-Za-z][A-Za-z0-9]*$").unwrap());

/// An evidence variable, `#Ek` with `k >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct EvidenceVarId(u32);

impl EvidenceVarId {
    pub fn new(index: u32) -> Option<Self> {
        (index >= 1).then_some(Self(index))
    }

    pub fn index(self) -> u32 {
        self.0
    }
}

impl fmt::Display for EvidenceVarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#E{}", self.0)
    }
}

impl FromStr for EvidenceVarId {
    type Err = BlueprintError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s.strip_prefix("#E").ok_or_else(|| BlueprintError::BadVariable(s.to_string()))?;
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || digits.starts_with('0') {
            return Err(BlueprintError::BadVariable(s.to_string()));
        }
        digits.parse().ok().and_then(Self::new).ok_or_else(|| BlueprintError::BadVariable(s.to_string()))
    }
}

impl TryFrom<String> for EvidenceVarId {
    type Error = BlueprintError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<EvidenceVarId> for String {
    fn from(value: EvidenceVarId) -> Self {
        value.to_string()
    }
}

/// Every evidence reference in `text`, in order of appearance.
///
/// Digits are matched maximally, so `#E12` is a reference to `#E12` and never
/// to `#E1`. `#E0` is not a valid variable and is skipped.
pub fn find_references(text: &str) -> Vec<EvidenceVarId> {
    VAR_REF.captures_iter(text).filter_map(|c| c[1].parse().ok().and_then(EvidenceVarId::new)).collect()
}

/// Byte ranges and ids of every reference in `text`.
pub(crate) fn reference_spans(text: &str) -> Vec<(std::ops::Range<usize>, Option<EvidenceVarId>)> {
    VAR_REF
        .captures_iter(text)
        .map(|c| {
            let m = c.get(0).unwrap();
            (m.range(), c[1].parse().ok().and_then(EvidenceVarId::new))
        })
        .collect()
}

pub fn is_identifier(name: &str) -> bool {
    IDENT.is_match(name)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanStep {
    pub description: String,
    pub var: EvidenceVarId,
    pub tool_name: String,
    pub tool_input: String,
}

impl PlanStep {
    pub fn references(&self) -> Vec<EvidenceVarId> {
        find_references(&self.tool_input)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Blueprint {
    pub steps: Vec<PlanStep>,
    pub source_text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseMode {
    #[default]
    Strict,
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum BlueprintError {
    #[error("malformed step at line {line}: {reason}")]
    MalformedStep { line: usize, reason: String },
    #[error("duplicate evidence variable {0}")]
    DuplicateVar(EvidenceVarId),
    #[error("bad tool call syntax at line {line}: {statement}")]
    BadToolSyntax { line: usize, statement: String },
    #[error("invalid evidence variable {0:?}")]
    BadVariable(String),
    #[error("{from} references {to}, which is defined later")]
    ForwardReference { from: EvidenceVarId, to: EvidenceVarId },
    #[error("{from} references undefined variable {to}")]
    UndefinedReference { from: EvidenceVarId, to: EvidenceVarId },
    #[error("dependency cycle through {0}")]
    CycleDetected(EvidenceVarId),
}

/// A problem the lenient parser skipped over.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseWarning {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ParseWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedBlueprint {
    pub blueprint: Blueprint,
    pub warnings: Vec<ParseWarning>,
}

enum Line<'a> {
    Plan { desc: &'a str, inline_assignment: Option<&'a str> },
    Assignment(&'a str),
    Other(&'a str),
}

fn classify(line: &str) -> Line<'_> {
    let trimmed = line.trim();
    if let Some(rest) = trimmed.strip_prefix("Plan:") {
        // "Plan: ... #E1 = Tool[...]" on a single line
        if let Some(m) = ASSIGNMENT.find(rest) {
            if rest[m.end()..].trim_start().starts_with(|c: char| c.is_ascii_alphabetic()) {
                return Line::Plan { desc: rest[..m.start()].trim(), inline_assignment: Some(&rest[m.start()..]) };
            }
        }
        return Line::Plan { desc: rest.trim(), inline_assignment: None };
    }
    match ASSIGNMENT.find(trimmed) {
        Some(m) if m.start() == 0 => Line::Assignment(trimmed),
        _ => Line::Other(trimmed),
    }
}

struct PendingPlan {
    line: usize,
    lines: Vec<String>,
}

struct Statement {
    line: usize,
    text: String,
}

struct Parser {
    mode: ParseMode,
    steps: Vec<PlanStep>,
    seen: HashSet<EvidenceVarId>,
    warnings: Vec<ParseWarning>,
    plan: Option<PendingPlan>,
    statement: Option<Statement>,
}

impl Parser {
    fn problem(&mut self, err: BlueprintError, line: usize) -> Result<(), BlueprintError> {
        match self.mode {
            ParseMode::Strict => Err(err),
            ParseMode::Lenient => {
                self.warnings.push(ParseWarning { line, message: err.to_string() });
                Ok(())
            }
        }
    }

    fn open_plan(&mut self, line: usize, desc: &str) -> Result<(), BlueprintError> {
        self.close_statement()?;
        if let Some(prev) = self.plan.take() {
            self.problem(
                BlueprintError::MalformedStep {
                    line: prev.line,
                    reason: "Plan is not followed by an #E assignment".into(),
                },
                prev.line,
            )?;
        }
        let lines = if desc.is_empty() { Vec::new() } else { vec![desc.to_string()] };
        self.plan = Some(PendingPlan { line, lines });
        Ok(())
    }

    fn open_statement(&mut self, line: usize, text: &str) -> Result<(), BlueprintError> {
        self.close_statement()?;
        self.statement = Some(Statement { line, text: text.to_string() });
        Ok(())
    }

    fn close_statement(&mut self) -> Result<(), BlueprintError> {
        let Some(stmt) = self.statement.take() else {
            return Ok(());
        };
        let plan = self.plan.take();
        let description = plan.as_ref().map(|p| p.lines.join("\n")).unwrap_or_default();
        if plan.is_none() {
            return self.problem(
                BlueprintError::MalformedStep {
                    line: stmt.line,
                    reason: "#E assignment without a preceding Plan".into(),
                },
                stmt.line,
            );
        }
        if description.is_empty() {
            let line = plan.map(|p| p.line).unwrap_or(stmt.line);
            return self.problem(BlueprintError::MalformedStep { line, reason: "empty Plan description".into() }, line);
        }
        let (var, tool_name, tool_input) = match split_statement(&stmt.text) {
            Some(parts) => parts,
            None => {
                return self.problem(
                    BlueprintError::BadToolSyntax { line: stmt.line, statement: stmt.text.clone() },
                    stmt.line,
                );
            }
        };
        if !self.seen.insert(var) {
            return self.problem(BlueprintError::DuplicateVar(var), stmt.line);
        }
        self.steps.push(PlanStep { description, var, tool_name, tool_input });
        Ok(())
    }

    fn other(&mut self, line: usize, text: &str) {
        if let Some(stmt) = self.statement.as_mut() {
            stmt.text.push('\n');
            stmt.text.push_str(text);
        } else if let Some(plan) = self.plan.as_mut() {
            if !text.is_empty() {
                plan.lines.push(text.to_string());
            }
        } else if !text.is_empty() && self.mode == ParseMode::Lenient {
            self.warnings.push(ParseWarning { line, message: format!("ignored text outside a plan: {text}") });
        }
    }

    fn finish(mut self) -> Result<(Vec<PlanStep>, Vec<ParseWarning>), BlueprintError> {
        self.close_statement()?;
        if let Some(prev) = self.plan.take() {
            self.problem(
                BlueprintError::MalformedStep {
                    line: prev.line,
                    reason: "Plan is not followed by an #E assignment".into(),
                },
                prev.line,
            )?;
        }
        Ok((self.steps, self.warnings))
    }
}

/// Splits `#Ek = Tool[input]` into its parts. The input ends at the last `]`.
fn split_statement(text: &str) -> Option<(EvidenceVarId, String, String)> {
    let caps = ASSIGNMENT.captures(text)?;
    let var = caps[1].parse().ok().and_then(EvidenceVarId::new)?;
    let rest = &text[caps.get(0)?.end()..];
    let (tool_name, input) = split_tool_call(rest)?;
    Some((var, tool_name, input))
}

/// Splits `Tool[input]` into name and trimmed input. The input runs from the
/// first `[` to the last `]`; the name must be an identifier.
pub fn split_tool_call(text: &str) -> Option<(String, String)> {
    let open = text.find('[')?;
    let close = text.rfind(']')?;
    if close < open {
        return None;
    }
    let tool_name = text[..open].trim();
    if !is_identifier(tool_name) {
        return None;
    }
    Some((tool_name.to_string(), text[open + 1..close].trim().to_string()))
}

/// Parses planner output.
///
/// In [`ParseMode::Strict`] the first problem is returned as an error. In
/// [`ParseMode::Lenient`] this never fails: malformed blocks are skipped and
/// reported as warnings.
pub fn parse_blueprint(text: &str, mode: ParseMode) -> Result<ParsedBlueprint, BlueprintError> {
    let mut parser =
        Parser { mode, steps: Vec::new(), seen: HashSet::new(), warnings: Vec::new(), plan: None, statement: None };
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        match classify(raw) {
            Line::Plan { desc, inline_assignment } => {
                parser.open_plan(line, desc)?;
                if let Some(stmt) = inline_assignment {
                    parser.open_statement(line, stmt)?;
                }
            }
            Line::Assignment(stmt) => parser.open_statement(line, stmt)?,
            Line::Other(text) => parser.other(line, text),
        }
    }
    let (steps, warnings) = parser.finish()?;
    Ok(ParsedBlueprint { blueprint: Blueprint { steps, source_text: text.to_string() }, warnings })
}

impl Blueprint {
    /// Strict parse.
    pub fn parse(text: &str) -> Result<Self, BlueprintError> {
        parse_blueprint(text, ParseMode::Strict).map(|p| p.blueprint)
    }

    /// Lenient parse; never fails.
    pub fn parse_lenient(text: &str) -> (Self, Vec<ParseWarning>) {
        let parsed = parse_blueprint(text, ParseMode::Lenient).expect("lenient parsing reports problems as warnings");
        (parsed.blueprint, parsed.warnings)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn step(&self, var: EvidenceVarId) -> Option<&PlanStep> {
        self.steps.iter().find(|s| s.var == var)
    }

    /// Equality of the parsed steps, ignoring the source text.
    pub fn same_steps(&self, other: &Blueprint) -> bool {
        self.steps == other.steps
    }
}

/// Canonical text form. Re-parsing the output yields the same steps.
pub fn render_blueprint(bp: &Blueprint) -> String {
    let mut out = String::new();
    for step in &bp.steps {
        out.push_str("Plan: ");
        out.push_str(&step.description);
        out.push('\n');
        out.push_str(&format!("{} = {}[{}]\n", step.var, step.tool_name, step.tool_input));
    }
    out
}

/// Dependencies between the evidence variables of a blueprint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepGraph {
    pub edges: BTreeMap<EvidenceVarId, BTreeSet<EvidenceVarId>>,
    pub topo_order: Vec<EvidenceVarId>,
}

impl DepGraph {
    pub fn dependencies(&self, var: EvidenceVarId) -> impl Iterator<Item = EvidenceVarId> + '_ {
        self.edges.get(&var).into_iter().flatten().copied()
    }

    /// Groups `topo_order` into waves whose members only depend on earlier
    /// waves. Members keep their topological order within a wave.
    pub fn waves(&self) -> Vec<Vec<EvidenceVarId>> {
        let mut depth: HashMap<EvidenceVarId, usize> = HashMap::new();
        let mut waves: Vec<Vec<EvidenceVarId>> = Vec::new();
        for &var in &self.topo_order {
            let d = self.dependencies(var).filter_map(|dep| depth.get(&dep)).map(|d| d + 1).max().unwrap_or(0);
            depth.insert(var, d);
            if waves.len() <= d {
                waves.resize_with(d + 1, Vec::new);
            }
            waves[d].push(var);
        }
        waves
    }
}

/// Builds the dependency graph. A reference is valid only if it names a
/// variable defined by an earlier step with a smaller index.
pub fn build_dep_graph(bp: &Blueprint) -> Result<DepGraph, BlueprintError> {
    let position: HashMap<EvidenceVarId, usize> = bp.steps.iter().enumerate().map(|(i, s)| (s.var, i)).collect();
    let mut edges = BTreeMap::new();
    for (i, step) in bp.steps.iter().enumerate() {
        let mut deps = BTreeSet::new();
        for r in step.references() {
            if r == step.var {
                return Err(BlueprintError::CycleDetected(r));
            }
            match position.get(&r) {
                None => return Err(BlueprintError::UndefinedReference { from: step.var, to: r }),
                Some(&j) if j > i || r > step.var => {
                    return Err(BlueprintError::ForwardReference { from: step.var, to: r })
                }
                Some(_) => {
                    deps.insert(r);
                }
            }
        }
        edges.insert(step.var, deps);
    }
    let topo_order = topological_order(bp, &edges)?;
    Ok(DepGraph { edges, topo_order })
}

/// Kahn's algorithm, always picking the ready step that comes first in source
/// order.
fn topological_order(
    bp: &Blueprint,
    edges: &BTreeMap<EvidenceVarId, BTreeSet<EvidenceVarId>>,
) -> Result<Vec<EvidenceVarId>, BlueprintError> {
    let mut remaining: HashMap<EvidenceVarId, usize> = edges.iter().map(|(v, deps)| (*v, deps.len())).collect();
    let mut done = Vec::with_capacity(bp.steps.len());
    while done.len() < bp.steps.len() {
        let next = bp.steps.iter().map(|s| s.var).find(|v| remaining.get(v) == Some(&0)).ok_or_else(|| {
            let stuck = bp.steps.iter().map(|s| s.var).find(|v| remaining.contains_key(v)).unwrap();
            BlueprintError::CycleDetected(stuck)
        })?;
        remaining.remove(&next);
        for (v, deps) in edges {
            if deps.contains(&next) {
                if let Some(n) = remaining.get_mut(v) {
                    *n -= 1;
                }
            }
        }
        done.push(next);
    }
    Ok(done)
}
