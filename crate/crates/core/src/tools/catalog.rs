//! Built-in tool descriptions and the default registry.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::calculator::Calculator;
use super::http::{FixtureBackend, HttpTool, LlmTool, StubTool, DEFAULT_TIMEOUT};
use super::{ToolError, ToolKind, ToolRegistry, ToolSpec};
use crate::accounting::Tokenizer;
use crate::model::LanguageModel;
use crate::prompting::ToolDescription;

const GOOGLE: &str = "Worker that searches results from Google. Useful when you need to find short and succinct answers about a specific topic. The input should be a search query.";
const WIKIPEDIA: &str = "Worker that search for similar page contents from Wikipedia. Useful when you need to get holistic knowledge about people, places, companies, historical events, or other subjects. The response is long and might contain some irrelevant information. The input should be a search query.";
const WOLFRAM: &str =
    "Useful when you need to solve a Mathematical or Algebraic equation. Input should be an equation or function.";
const CALCULATOR: &str = "A calculator that can compute arithmetic expressions. Useful when you need to perform math calculations. Input should be a mathematical expression";
const LLM: &str = "A pretrained LLM like yourself. Useful when you need to act with general world knowledge and common sense. Prioritize it when you are confident in solving the problem yourself. Input can be any instruction.";
const SEARCH_SOTU: &str = "A vector store that searches for similar and related content in a document: state_of_the_union. The result is a huge chunk of text related to your search but can also contain irrelevant info. The input should be a search query.";
const SEARCH: &str = "Searches Wikipedia for an exact entity and returns the first paragraphs of its page, or similar page titles if it does not exist. The input should be an entity name.";
const SEARCH_DOC: &str =
    "Searches a user-provided document store for passages related to the query. The input should be a search query.";
const YELP: &str = "Worker that gives restaurant information including reviews, ratings and prices from Yelp. Input should be a search query.";
const TWITTER: &str = "Worker that searches results from Twitter. Useful when you need to find tweets about a topic. Input should be a search query.";
const LOCATION: &str = "Worker that retrieves user's current location. Input should be empty";
const TIME: &str = "Worker that retrieves current time. Input should be empty";
const EMAIL: &str = "Worker that can send Emails. Useful when you need to send someone email. Input should be in three parts: the target email address, subject and body, separated by a semicolon.";
const STOCK: &str = "Worker that retrieves current stock market analysis and recommendations. Input should be empty.";
const TRADE_STOCK: &str = "Worker that connects to BackTrader to operate a trading strategy. Input should be in two parts, Stock ticker and indicator level, separated by semicolon.";
const DRAW: &str = "Worker that can draw and save a picture based on your prompt. Input should be a descriptive prompt for your picture.";

/// Every built-in tool: name, description and kind. `Search` is an alias of
/// `Wikipedia` with its own description.
pub const BUILTINS: &[(&str, &str, ToolKind)] = &[
    ("Google", GOOGLE, ToolKind::Http),
    ("Wikipedia", WIKIPEDIA, ToolKind::Http),
    ("WolframAlpha", WOLFRAM, ToolKind::Http),
    ("Calculator", CALCULATOR, ToolKind::Deterministic),
    ("LLM", LLM, ToolKind::ModelBacked),
    ("SearchSOTU", SEARCH_SOTU, ToolKind::Http),
    ("SearchDoc", SEARCH_DOC, ToolKind::Http),
    ("Yelp", YELP, ToolKind::Stub),
    ("Twitter", TWITTER, ToolKind::Stub),
    ("Location", LOCATION, ToolKind::Stub),
    ("Time", TIME, ToolKind::Stub),
    ("Email", EMAIL, ToolKind::Stub),
    ("Stock", STOCK, ToolKind::Stub),
    ("TradeStock", TRADE_STOCK, ToolKind::Stub),
    ("Draw", DRAW, ToolKind::Stub),
];

pub const ALIASES: &[(&str, &str, &str)] = &[("Search", "Wikipedia", SEARCH)];

pub fn description(name: &str) -> Option<&'static str> {
    BUILTINS
        .iter()
        .find(|(n, _, _)| *n == name)
        .map(|(_, d, _)| *d)
        .or_else(|| ALIASES.iter().find(|(a, _, _)| *a == name).map(|(_, _, d)| *d))
}

/// Prompt descriptions of built-in tools, in the order given.
pub fn descriptions(names: &[&str]) -> Result<Vec<ToolDescription>, ToolError> {
    names
        .iter()
        .map(|n| {
            description(n).map(|d| ToolDescription::new(*n, d)).ok_or_else(|| ToolError::UnknownTool(n.to_string()))
        })
        .collect()
}

/// Tool settings from the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolConfig {
    /// Live endpoints for http tools, by tool name. Only used with `--live`.
    pub endpoints: BTreeMap<String, String>,
    pub timeout_secs: u64,
    /// Canned replies for stub tools, by tool name.
    pub canned: BTreeMap<String, String>,
    pub max_evidence_chars: Option<usize>,
    pub program_aided_calculator: bool,
}

impl Default for ToolConfig {
    fn default() -> Self {
        Self {
            endpoints: BTreeMap::new(),
            timeout_secs: DEFAULT_TIMEOUT.as_secs(),
            canned: BTreeMap::new(),
            max_evidence_chars: None,
            program_aided_calculator: false,
        }
    }
}

/// Where tool answers come from.
#[derive(Clone, Default)]
pub struct ToolBackends {
    pub fixtures: Option<Arc<FixtureBackend>>,
    /// Allows http tools with a configured endpoint to reach the network.
    pub live: bool,
    pub api_key: Option<String>,
    /// Model, model id and tokenizer for model-backed tools.
    pub model: Option<(Arc<dyn LanguageModel>, String, Tokenizer)>,
}

fn canned_default(name: &str) -> String {
    format!("{name} returned no data.")
}

/// Registers every built-in tool plus the `Search` alias.
pub fn builtin_registry(cfg: &ToolConfig, backends: &ToolBackends) -> Result<ToolRegistry, ToolError> {
    let mut reg = ToolRegistry::new();
    let timeout = Duration::from_secs(cfg.timeout_secs);
    for (name, desc, kind) in BUILTINS {
        let spec = match kind {
            ToolKind::Http => {
                let handler = match (&backends.fixtures, cfg.endpoints.get(*name)) {
                    (Some(fx), _) => HttpTool::with_fixtures(name, fx.clone()),
                    (None, Some(url)) if backends.live => HttpTool::live(name, url, backends.api_key.clone(), timeout)?,
                    _ => HttpTool::unconfigured(name),
                };
                ToolSpec::new(*name, *desc, *kind, handler)
            }
            ToolKind::Stub => {
                let canned = cfg.canned.get(*name).cloned().unwrap_or_else(|| canned_default(name));
                ToolSpec::new(*name, *desc, *kind, StubTool::new(name, canned, backends.fixtures.clone()))
            }
            ToolKind::Deterministic => {
                let calc = match (&backends.model, cfg.program_aided_calculator) {
                    (Some((m, id, tok)), true) => Calculator::program_aided(m.clone(), id, *tok),
                    _ => Calculator::deterministic(),
                };
                ToolSpec::new(*name, *desc, *kind, calc)
            }
            ToolKind::ModelBacked => match &backends.model {
                Some((m, id, tok)) => ToolSpec::new(*name, *desc, *kind, LlmTool::new(m.clone(), id, *tok)),
                None => ToolSpec::new(*name, *desc, *kind, |_: &str| Err(ToolError::NotConfigured("LLM".into()))),
            },
        };
        reg.register(spec)?;
    }
    // aliases share the target's fixtures only if no entry exists under the
    // alias name, so fixture files may key either name
    for (alias, target, desc) in ALIASES {
        if let Some(fx) = &backends.fixtures {
            let fx = fx.clone();
            let target_handler = reg.get(target).expect("target registered").handler.clone();
            let alias_name = alias.to_string();
            reg.register(ToolSpec::new(*alias, *desc, ToolKind::Http, move |input: &str| {
                match fx.lookup(&alias_name, input) {
                    Some(out) => Ok(super::ToolOutput::text(out)),
                    None => target_handler.call(input),
                }
            }))?;
        } else {
            reg.alias(alias, target, Some(desc))?;
        }
    }
    reg.set_max_evidence_chars(cfg.max_evidence_chars);
    Ok(reg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tools::http::ToolFixture;
    use crate::tools::{invoke, FailureInjection};

    #[test]
    fn catalog_texts() {
        let d = descriptions(&["Calculator", "Draw"]).unwrap();
        assert!(d[0].description.starts_with("A calculator that can compute arithmetic expressions."));
        assert!(d[1].description.ends_with("descriptive prompt for your picture."));
        assert!(descriptions(&["Nope"]).is_err());
        assert!(description("Search").is_some());
    }

    #[test]
    fn builtin_registry_without_backends() {
        let reg = builtin_registry(&ToolConfig::default(), &ToolBackends::default()).unwrap();
        for (name, _, _) in BUILTINS {
            assert!(reg.contains(name));
        }
        assert!(reg.contains("Search"));
        let off = FailureInjection::off();
        assert_eq!(invoke(&reg, &off, "Calculator", "50 * 4").unwrap().output, "200");
        // no network by default: http tools fail into the failure text
        let inv = invoke(&reg, &off, "Google", "anything").unwrap();
        assert_eq!(inv.output, "No evidence found.");
        assert!(inv.error.is_some());
        assert_eq!(invoke(&reg, &off, "Time", "").unwrap().output, "Time returned no data.");
    }

    #[test]
    fn melanie_c_from_fixture() {
        let fx = FixtureBackend::new();
        fx.insert(ToolFixture {
            tool: "Wikipedia".into(),
            input: "Melanie C".into(),
            output: "Could not find [Melanie C]. Similar: ['Melanie C']".into(),
        });
        fx.insert(ToolFixture { tool: "Search".into(), input: "Rocketeer".into(), output: "film".into() });
        let backends = ToolBackends { fixtures: Some(Arc::new(fx)), ..Default::default() };
        let reg = builtin_registry(&ToolConfig::default(), &backends).unwrap();
        let off = FailureInjection::off();
        assert!(invoke(&reg, &off, "Wikipedia", "Melanie C").unwrap().output.starts_with("Could not find [Melanie C]"));
        assert_eq!(invoke(&reg, &off, "Search", "Rocketeer").unwrap().output, "film");
        assert!(invoke(&reg, &off, "Search", "Melanie C").unwrap().output.starts_with("Could not find"));
    }
}
