//! Network-facing and canned tool handlers, and the fixture backend that
//! stands in for the network in tests and replays.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::{Arc, RwLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ToolError, ToolHandler, ToolOutput};
use crate::accounting::{Breakdown, CallKind, LedgerEntry, Tokenizer};
use crate::model::{LanguageModel, ModelRequest};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// One line of a tool fixture file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolFixture {
    pub tool: String,
    pub input: String,
    pub output: String,
}

#[derive(Debug, Default)]
struct FixtureTable {
    by_key: HashMap<(String, String), String>,
    ordered: Vec<ToolFixture>,
}

/// Canned tool answers keyed by `(tool, trimmed input)`.
#[derive(Debug, Default)]
pub struct FixtureBackend {
    entries: RwLock<FixtureTable>,
}

impl FixtureBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn load(path: &Path) -> Result<Self, ToolError> {
        let err = |message: String| ToolError::Fixture { path: path.display().to_string(), message };
        let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let backend = Self::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let f: ToolFixture = serde_json::from_str(line).map_err(|e| err(format!("line {}: {e}", i + 1)))?;
            backend.insert(f);
        }
        Ok(backend)
    }

    /// Keeps the first output for a key.
    pub fn insert(&self, f: ToolFixture) {
        let mut guard = self.entries.write().unwrap();
        let key = (f.tool.clone(), f.input.trim().to_string());
        if let std::collections::hash_map::Entry::Vacant(slot) = guard.by_key.entry(key) {
            slot.insert(f.output.clone());
            guard.ordered.push(f);
        }
    }

    pub fn lookup(&self, tool: &str, input: &str) -> Option<String> {
        self.entries.read().unwrap().by_key.get(&(tool.to_string(), input.trim().to_string())).cloned()
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().ordered.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn save(&self, path: &Path) -> Result<(), ToolError> {
        let err = |e: std::io::Error| ToolError::Fixture { path: path.display().to_string(), message: e.to_string() };
        let mut f = fs::File::create(path).map_err(err)?;
        for fx in &self.entries.read().unwrap().ordered {
            writeln!(f, "{}", serde_json::to_string(fx).expect("fixture serializes")).map_err(err)?;
        }
        Ok(())
    }
}

/// A search-style tool. With a fixture backend it answers only from
/// fixtures; otherwise it issues `GET <endpoint>?q=<input>` and returns the
/// response body.
pub struct HttpTool {
    name: String,
    endpoint: Option<String>,
    api_key: Option<String>,
    fixtures: Option<Arc<FixtureBackend>>,
    client: Option<reqwest::blocking::Client>,
}

impl HttpTool {
    pub fn with_fixtures(name: &str, fixtures: Arc<FixtureBackend>) -> Self {
        Self { name: name.to_string(), endpoint: None, api_key: None, fixtures: Some(fixtures), client: None }
    }

    pub fn live(name: &str, endpoint: &str, api_key: Option<String>, timeout: Duration) -> Result<Self, ToolError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ToolError::Http(e.to_string()))?;
        Ok(Self {
            name: name.to_string(),
            endpoint: Some(endpoint.to_string()),
            api_key,
            fixtures: None,
            client: Some(client),
        })
    }

    pub fn unconfigured(name: &str) -> Self {
        Self { name: name.to_string(), endpoint: None, api_key: None, fixtures: None, client: None }
    }
}

impl ToolHandler for HttpTool {
    fn call(&self, input: &str) -> Result<ToolOutput, ToolError> {
        if let Some(fx) = &self.fixtures {
            return fx
                .lookup(&self.name, input)
                .map(ToolOutput::text)
                .ok_or_else(|| ToolError::FixtureMiss { tool: self.name.clone(), input: input.to_string() });
        }
        let (Some(endpoint), Some(client)) = (&self.endpoint, &self.client) else {
            return Err(ToolError::NotConfigured(self.name.clone()));
        };
        let url =
            reqwest::Url::parse_with_params(endpoint, &[("q", input)]).map_err(|e| ToolError::Http(e.to_string()))?;
        let mut req = client.get(url);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| ToolError::Http(e.to_string()))?;
        let status = resp.status();
        let body = resp.text().map_err(|e| ToolError::Http(e.to_string()))?;
        if !status.is_success() {
            return Err(ToolError::Http(format!("{status}: {body}")));
        }
        Ok(ToolOutput::text(body.trim().to_string()))
    }
}

/// Returns configured canned text, preferring a fixture entry when one
/// matches the input.
pub struct StubTool {
    name: String,
    canned: String,
    fixtures: Option<Arc<FixtureBackend>>,
}

impl StubTool {
    pub fn new(name: &str, canned: impl Into<String>, fixtures: Option<Arc<FixtureBackend>>) -> Self {
        Self { name: name.to_string(), canned: canned.into(), fixtures }
    }
}

impl ToolHandler for StubTool {
    fn call(&self, input: &str) -> Result<ToolOutput, ToolError> {
        let hit = self.fixtures.as_ref().and_then(|f| f.lookup(&self.name, input));
        Ok(ToolOutput::text(hit.unwrap_or_else(|| self.canned.clone())))
    }
}

pub const LLM_TOOL_INSTRUCTION: &str = "Respond in short directly with no extra words.";

/// The `LLM` tool: a model call with a terse-answer instruction. Its tokens
/// land in the run's ledger as [`CallKind::ToolModel`] entries.
pub struct LlmTool {
    model: Arc<dyn LanguageModel>,
    model_id: String,
    tokenizer: Tokenizer,
}

impl LlmTool {
    pub fn new(model: Arc<dyn LanguageModel>, model_id: &str, tokenizer: Tokenizer) -> Self {
        Self { model, model_id: model_id.to_string(), tokenizer }
    }
}

impl ToolHandler for LlmTool {
    fn call(&self, input: &str) -> Result<ToolOutput, ToolError> {
        let prompt = format!("{LLM_TOOL_INSTRUCTION}\n\n{input}");
        let resp = self.model.complete(&ModelRequest::new(prompt, self.model_id.clone()))?;
        let steps = self.tokenizer.count(input);
        Ok(ToolOutput {
            text: resp.text.trim().to_string(),
            ledger: vec![LedgerEntry {
                call_kind: CallKind::ToolModel,
                input_tokens: resp.input_tokens,
                output_tokens: resp.output_tokens,
                breakdown: Some(Breakdown::with_residual_context(resp.input_tokens, 0, 0, steps)),
            }],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ScriptedModel;

    fn backend() -> Arc<FixtureBackend> {
        let b = FixtureBackend::new();
        b.insert(ToolFixture {
            tool: "Wikipedia".into(),
            input: "Melanie C".into(),
            output: "Could not find [Melanie C]. Similar: ['Melanie C', 'Melanie C discography']".into(),
        });
        Arc::new(b)
    }

    #[test]
    fn fixture_backend_answers_and_misses() {
        let tool = HttpTool::with_fixtures("Wikipedia", backend());
        let out = tool.call(" Melanie C ").unwrap();
        assert!(out.text.starts_with("Could not find [Melanie C]. Similar:"));
        assert!(matches!(tool.call("Spice Girls"), Err(ToolError::FixtureMiss { .. })));
    }

    #[test]
    fn fixture_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tools.jsonl");
        backend().save(&path).unwrap();
        let loaded = FixtureBackend::load(&path).unwrap();
        assert_eq!(loaded.len(), 1);
        assert!(loaded.lookup("Wikipedia", "Melanie C").is_some());
    }

    #[test]
    fn unconfigured_http_tool_fails_without_network() {
        assert!(matches!(HttpTool::unconfigured("Google").call("x"), Err(ToolError::NotConfigured(_))));
    }

    #[test]
    fn stub_prefers_fixture() {
        let b = FixtureBackend::new();
        b.insert(ToolFixture { tool: "Time".into(), input: "".into(), output: "10:00 AM".into() });
        let stub = StubTool::new("Time", "12:00 PM", Some(Arc::new(b)));
        assert_eq!(stub.call("").unwrap().text, "10:00 AM");
        assert_eq!(stub.call("other").unwrap().text, "12:00 PM");
    }

    #[test]
    fn llm_tool_prompt_and_ledger() {
        let model = Arc::new(ScriptedModel::from_fn(Tokenizer::Whitespace, |req| {
            assert!(req.prompt.starts_with(LLM_TOOL_INSTRUCTION));
            Some(" The Rocketeer. ".to_string())
        }));
        let tool = LlmTool::new(model, "m", Tokenizer::Whitespace);
        let out = tool.call("What is the name of the 1989 comic book?").unwrap();
        assert_eq!(out.text, "The Rocketeer.");
        let entry = &out.ledger[0];
        assert_eq!(entry.call_kind, CallKind::ToolModel);
        assert_eq!(entry.breakdown.unwrap().total(), entry.input_tokens);
    }
}
