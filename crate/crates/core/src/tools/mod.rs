//! The Worker layer: tool registry, evidence substitution and failure
//! injection.
//!
//! Tools are looked up by name (or alias) in an immutable [`ToolRegistry`].
//! [`invoke`] never lets a handler failure escape: errors become the
//! configured failure text and are recorded on the returned
//! [`Invocation`]. Only an unknown tool name is reported as an error, and the
//! engine decides whether that aborts the run.

pub mod calculator;
pub mod catalog;
pub mod http;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::accounting::LedgerEntry;
use crate::blueprint::{reference_spans, EvidenceVarId};
use crate::model::ModelError;
use crate::prompting::ToolDescription;

pub use calculator::{eval_arithmetic, CalcError};

pub const DEFAULT_FAILURE_TEXT: &str = "No evidence found.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolKind {
    Deterministic,
    Http,
    ModelBacked,
    Stub,
}

#[derive(Debug, Error)]
pub enum ToolError {
    #[error("unknown tool: {0}")]
    UnknownTool(String),
    #[error("tool {0} registered twice")]
    DuplicateTool(String),
    #[error("alias {alias} points at unregistered tool {target}")]
    DanglingAlias { alias: String, target: String },
    #[error("no evidence for {0}")]
    UnresolvedReference(EvidenceVarId),
    #[error("evidence for {0} inserted twice")]
    DuplicateEvidence(EvidenceVarId),
    #[error(transparent)]
    Calc(#[from] CalcError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("no fixture for {tool}[{input}]")]
    FixtureMiss { tool: String, input: String },
    #[error("{0} has no backend configured")]
    NotConfigured(String),
    #[error("HTTP error: {0}")]
    Http(String),
    #[error("fixture file {path}: {message}")]
    Fixture { path: String, message: String },
}

/// What a handler returns: evidence text plus ledger entries for any model
/// calls the tool made itself.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ToolOutput {
    pub text: String,
    pub ledger: Vec<LedgerEntry>,
}

impl ToolOutput {
    pub fn text(text: impl Into<String>) -> Self {
        Self { text: text.into(), ledger: Vec::new() }
    }
}

/// Handlers are shared across concurrently running tasks.
pub trait ToolHandler: Send + Sync {
    fn call(&self, input: &str) -> Result<ToolOutput, ToolError>;
}

impl<F> ToolHandler for F
where
    F: Fn(&str) -> Result<ToolOutput, ToolError> + Send + Sync,
{
    fn call(&self, input: &str) -> Result<ToolOutput, ToolError> {
        self(input)
    }
}

#[derive(Clone)]
pub struct ToolSpec {
    pub name: String,
    pub description: String,
    pub kind: ToolKind,
    pub handler: Arc<dyn ToolHandler>,
}

impl ToolSpec {
    pub fn new(
        name: impl Into<String>,
        description: impl Into<String>,
        kind: ToolKind,
        handler: impl ToolHandler + 'static,
    ) -> Self {
        Self { name: name.into(), description: description.into(), kind, handler: Arc::new(handler) }
    }
}

impl fmt::Debug for ToolSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ToolSpec").field("name", &self.name).field("kind", &self.kind).finish()
    }
}

/// Named tools in registration order, plus aliases. Build it once, then
/// share it behind an `Arc`.
#[derive(Debug, Clone, Default)]
pub struct ToolRegistry {
    tools: IndexMap<String, ToolSpec>,
    aliases: IndexMap<String, (String, Option<String>)>,
    max_evidence_chars: Option<usize>,
}

impl ToolRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, spec: ToolSpec) -> Result<(), ToolError> {
        if self.tools.contains_key(&spec.name) || self.aliases.contains_key(&spec.name) {
            return Err(ToolError::DuplicateTool(spec.name));
        }
        self.tools.insert(spec.name.clone(), spec);
        Ok(())
    }

    /// Makes `alias` resolve to `target`. `description` replaces the
    /// target's description when the alias is shown in a prompt.
    pub fn alias(&mut self, alias: &str, target: &str, description: Option<&str>) -> Result<(), ToolError> {
        if self.tools.contains_key(alias) || self.aliases.contains_key(alias) {
            return Err(ToolError::DuplicateTool(alias.to_string()));
        }
        if !self.tools.contains_key(target) {
            return Err(ToolError::DanglingAlias { alias: alias.to_string(), target: target.to_string() });
        }
        self.aliases.insert(alias.to_string(), (target.to_string(), description.map(str::to_string)));
        Ok(())
    }

    /// Cuts every evidence text to at most `n` characters. Off by default.
    pub fn set_max_evidence_chars(&mut self, n: Option<usize>) {
        self.max_evidence_chars = n;
    }

    pub fn get(&self, name: &str) -> Option<&ToolSpec> {
        match self.aliases.get(name) {
            Some((target, _)) => self.tools.get(target),
            None => self.tools.get(name),
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.get(name).is_some()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tools.keys().map(String::as_str).chain(self.aliases.keys().map(String::as_str))
    }

    /// Prompt descriptions for `names`, in the order given.
    pub fn descriptions(&self, names: &[String]) -> Result<Vec<ToolDescription>, ToolError> {
        names
            .iter()
            .map(|n| {
                let description = match self.aliases.get(n) {
                    Some((_, Some(d))) => d.clone(),
                    _ => self.get(n).ok_or_else(|| ToolError::UnknownTool(n.clone()))?.description.clone(),
                };
                Ok(ToolDescription::new(n.clone(), description))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectionMode {
    #[default]
    Off,
    AllFail,
    Named(Vec<String>),
}

/// Forces matching tools to answer with `failure_text` without running.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureInjection {
    pub mode: InjectionMode,
    pub failure_text: String,
}

impl Default for FailureInjection {
    fn default() -> Self {
        Self::off()
    }
}

impl FailureInjection {
    pub fn off() -> Self {
        Self { mode: InjectionMode::Off, failure_text: DEFAULT_FAILURE_TEXT.into() }
    }

    pub fn all_fail() -> Self {
        Self { mode: InjectionMode::AllFail, ..Self::off() }
    }

    pub fn named<I: IntoIterator<Item = S>, S: Into<String>>(names: I) -> Self {
        Self { mode: InjectionMode::Named(names.into_iter().map(Into::into).collect()), ..Self::off() }
    }

    /// Parses the command-line form: `off`, `all`, or comma-separated names.
    pub fn parse(spec: &str) -> Self {
        match spec.trim() {
            "" | "off" | "none" => Self::off(),
            "all" => Self::all_fail(),
            names => Self::named(names.split(',').map(str::trim).filter(|s| !s.is_empty())),
        }
    }

    pub fn applies_to(&self, tool: &str) -> bool {
        match &self.mode {
            InjectionMode::Off => false,
            InjectionMode::AllFail => true,
            InjectionMode::Named(names) => names.iter().any(|n| n == tool),
        }
    }
}

/// Outcome of one tool call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Invocation {
    pub tool: String,
    pub input: String,
    pub output: String,
    #[serde(default)]
    pub injected: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ledger: Vec<LedgerEntry>,
}

/// Runs `name` on an already substituted `input`.
///
/// Injection is checked first, so an injected failure never touches the
/// handler. Handler errors are folded into the failure text.
pub fn invoke(reg: &ToolRegistry, inj: &FailureInjection, name: &str, input: &str) -> Result<Invocation, ToolError> {
    let mut inv = Invocation {
        tool: name.to_string(),
        input: input.to_string(),
        output: inj.failure_text.clone(),
        injected: false,
        error: None,
        ledger: Vec::new(),
    };
    if inj.applies_to(name) {
        inv.injected = true;
        return Ok(inv);
    }
    let spec = reg.get(name).ok_or_else(|| ToolError::UnknownTool(name.to_string()))?;
    match spec.handler.call(input) {
        Ok(out) => {
            inv.output = match reg.max_evidence_chars {
                Some(n) => out.text.chars().take(n).collect(),
                None => out.text,
            };
            inv.ledger = out.ledger;
        }
        Err(e) => {
            tracing::debug!(tool = name, error = %e, "tool failed");
            inv.error = Some(e.to_string());
        }
    }
    Ok(inv)
}

/// Evidence gathered during one run, iterated in ascending variable order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EvidenceMap {
    entries: BTreeMap<EvidenceVarId, String>,
}

impl EvidenceMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, var: EvidenceVarId, evidence: impl Into<String>) -> Result<(), ToolError> {
        if self.entries.contains_key(&var) {
            return Err(ToolError::DuplicateEvidence(var));
        }
        self.entries.insert(var, evidence.into());
        Ok(())
    }

    pub fn get(&self, var: EvidenceVarId) -> Option<&str> {
        self.entries.get(&var).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (EvidenceVarId, &str)> {
        self.entries.iter().map(|(k, v)| (*k, v.as_str()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubstitutionPolicy {
    Strict,
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Substituted {
    pub text: String,
    pub unresolved: Vec<EvidenceVarId>,
}

/// Replaces each `#Ek` in `input` that has evidence with that evidence.
/// Unresolved references fail under the strict policy and are kept verbatim
/// (and listed in `unresolved`) under the lenient one.
pub fn substitute_evidence(
    input: &str,
    ev: &EvidenceMap,
    policy: SubstitutionPolicy,
) -> Result<Substituted, ToolError> {
    let mut text = String::with_capacity(input.len());
    let mut unresolved = Vec::new();
    let mut last = 0;
    for (range, var) in reference_spans(input) {
        let Some(var) = var else { continue };
        text.push_str(&input[last..range.start]);
        match ev.get(var) {
            Some(e) => text.push_str(e),
            None if policy == SubstitutionPolicy::Strict => return Err(ToolError::UnresolvedReference(var)),
            None => {
                unresolved.push(var);
                text.push_str(&input[range.clone()]);
            }
        }
        last = range.end;
    }
    text.push_str(&input[last..]);
    Ok(Substituted { text, unresolved })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(i: u32) -> EvidenceVarId {
        EvidenceVarId::new(i).unwrap()
    }

    fn calc_registry() -> ToolRegistry {
        let mut reg = ToolRegistry::new();
        reg.register(ToolSpec::new(
            "Calculator",
            "math",
            ToolKind::Deterministic,
            calculator::Calculator::deterministic(),
        ))
        .unwrap();
        reg.register(ToolSpec::new("Broken", "always fails", ToolKind::Stub, |_: &str| {
            Err(ToolError::NotConfigured("Broken".into()))
        }))
        .unwrap();
        reg
    }

    #[test]
    fn substitutes_known_references() {
        let mut ev = EvidenceMap::new();
        ev.insert(e(2), "37").unwrap();
        let s = substitute_evidence("(2 * #E2 - 10) - 8", &ev, SubstitutionPolicy::Strict).unwrap();
        assert_eq!(s.text, "(2 * 37 - 10) - 8");
        assert!(s.unresolved.is_empty());
    }

    #[test]
    fn text_without_references_is_unchanged() {
        let s = substitute_evidence("plain text", &EvidenceMap::new(), SubstitutionPolicy::Strict).unwrap();
        assert_eq!(s.text, "plain text");
    }

    #[test]
    fn lenient_keeps_unresolved_with_maximal_munch() {
        let mut ev = EvidenceMap::new();
        ev.insert(e(1), "one").unwrap();
        let s = substitute_evidence("use #E10", &ev, SubstitutionPolicy::Lenient).unwrap();
        assert_eq!(s.text, "use #E10");
        assert_eq!(s.unresolved, vec![e(10)]);
        assert!(matches!(
            substitute_evidence("use #E10", &ev, SubstitutionPolicy::Strict),
            Err(ToolError::UnresolvedReference(v)) if v == e(10)
        ));
    }

    #[test]
    fn evidence_map_inserts_once_and_iterates_in_order() {
        let mut ev = EvidenceMap::new();
        ev.insert(e(3), "c").unwrap();
        ev.insert(e(1), "a").unwrap();
        assert!(ev.insert(e(1), "again").is_err());
        let order: Vec<_> = ev.iter().map(|(k, _)| k.index()).collect();
        assert_eq!(order, vec![1, 3]);
        let json = serde_json::to_string(&ev).unwrap();
        assert_eq!(json, r##"{"#E1":"a","#E3":"c"}"##);
        assert_eq!(serde_json::from_str::<EvidenceMap>(&json).unwrap(), ev);
    }

    #[test]
    fn invoke_calculator() {
        let inv = invoke(&calc_registry(), &FailureInjection::off(), "Calculator", "50 * 4").unwrap();
        assert_eq!(inv.output, "200");
        assert!(inv.error.is_none());
    }

    #[test]
    fn injection_short_circuits_every_tool() {
        let inj = FailureInjection::all_fail();
        for name in ["Calculator", "Broken", "NotRegistered"] {
            let inv = invoke(&calc_registry(), &inj, name, "x").unwrap();
            assert_eq!(inv.output, "No evidence found.");
            assert!(inv.injected);
        }
        let named = FailureInjection::named(["Calculator"]);
        assert!(invoke(&calc_registry(), &named, "Calculator", "1+1").unwrap().injected);
    }

    #[test]
    fn handler_errors_become_failure_text() {
        let inv = invoke(&calc_registry(), &FailureInjection::off(), "Calculator", "1/0").unwrap();
        assert_eq!(inv.output, DEFAULT_FAILURE_TEXT);
        assert!(inv.error.unwrap().contains("division by zero"));
        let inv = invoke(&calc_registry(), &FailureInjection::off(), "Broken", "x").unwrap();
        assert_eq!(inv.output, DEFAULT_FAILURE_TEXT);
    }

    #[test]
    fn unknown_tool_is_an_error() {
        assert!(matches!(
            invoke(&calc_registry(), &FailureInjection::off(), "Nope", "x"),
            Err(ToolError::UnknownTool(n)) if n == "Nope"
        ));
    }

    #[test]
    fn aliases_resolve_and_reject_duplicates() {
        let mut reg = calc_registry();
        reg.alias("Calc", "Calculator", Some("alias text")).unwrap();
        assert!(reg.contains("Calc"));
        assert!(reg.alias("Calc", "Calculator", None).is_err());
        assert!(reg.alias("X", "Missing", None).is_err());
        let d = reg.descriptions(&["Calc".into(), "Calculator".into()]).unwrap();
        assert_eq!(d[0].description, "alias text");
        assert_eq!(d[1].description, "math");
    }

    #[test]
    fn injection_spec_parsing() {
        assert_eq!(FailureInjection::parse("off").mode, InjectionMode::Off);
        assert_eq!(FailureInjection::parse("all").mode, InjectionMode::AllFail);
        assert_eq!(
            FailureInjection::parse("Google, Wikipedia").mode,
            InjectionMode::Named(vec!["Google".into(), "Wikipedia".into()])
        );
    }

    #[test]
    fn evidence_truncation() {
        let mut reg = calc_registry();
        reg.set_max_evidence_chars(Some(2));
        let inv = invoke(&reg, &FailureInjection::off(), "Calculator", "1000 + 1").unwrap();
        assert_eq!(inv.output, "10");
    }
}
