//! Token counting, per-call ledgers, closed-form input-token predictors and
//! dollar cost.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AccountingError {
    #[error("unknown byte-pair vocabulary {0:?} (expected cl100k_base, o200k_base, p50k_base or r50k_base)")]
    UnknownVocabulary(String),
    #[error("unknown tokenizer scheme {0:?}")]
    UnknownScheme(String),
    #[error("ledger entry {0} has no component breakdown")]
    MissingBreakdown(usize),
    #[error("negative price {price} for {model}")]
    NegativePrice { model: String, price: f64 },
    #[error("reading pricing table {path}: {reason}")]
    Pricing { path: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BpeVocabulary {
    Cl100kBase,
    O200kBase,
    P50kBase,
    R50kBase,
}

impl BpeVocabulary {
    pub fn id(self) -> &'static str {
        match self {
            Self::Cl100kBase => "cl100k_base",
            Self::O200kBase => "o200k_base",
            Self::P50kBase => "p50k_base",
            Self::R50kBase => "r50k_base",
        }
    }

    fn bpe(self) -> &'static tiktoken_rs::CoreBPE {
        match self {
            Self::Cl100kBase => tiktoken_rs::cl100k_base_singleton(),
            Self::O200kBase => tiktoken_rs::o200k_base_singleton(),
            Self::P50kBase => tiktoken_rs::p50k_base_singleton(),
            Self::R50kBase => tiktoken_rs::r50k_base_singleton(),
        }
    }
}

impl FromStr for BpeVocabulary {
    type Err = AccountingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cl100k_base" => Ok(Self::Cl100kBase),
            "o200k_base" => Ok(Self::O200kBase),
            "p50k_base" => Ok(Self::P50kBase),
            "r50k_base" => Ok(Self::R50kBase),
            other => Err(AccountingError::UnknownVocabulary(other.to_string())),
        }
    }
}

/// Token counter. `whitespace` counts maximal runs of non-whitespace; the
/// byte-pair schemes use the vocabularies bundled with `tiktoken-rs`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Tokenizer {
    #[default]
    Whitespace,
    BytePair(BpeVocabulary),
}

impl Tokenizer {
    pub fn count(&self, text: &str) -> u64 {
        match self {
            Tokenizer::Whitespace => text.split_whitespace().count() as u64,
            Tokenizer::BytePair(vocab) => vocab.bpe().encode_ordinary(text).len() as u64,
        }
    }
}

/// Free function form of [`Tokenizer::count`].
pub fn count_tokens(text: &str, tok: &Tokenizer) -> u64 {
    tok.count(text)
}

impl FromStr for Tokenizer {
    type Err = AccountingError;

    /// `whitespace`, or `bpe:<vocabulary>` / a bare vocabulary id.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "whitespace" => Ok(Tokenizer::Whitespace),
            other => {
                let vocab = other.strip_prefix("bpe:").unwrap_or(other);
                if other.starts_with("bpe:") || vocab.ends_with("_base") {
                    Ok(Tokenizer::BytePair(vocab.parse()?))
                } else {
                    Err(AccountingError::UnknownScheme(other.to_string()))
                }
            }
        }
    }
}

impl fmt::Display for Tokenizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tokenizer::Whitespace => f.write_str("whitespace"),
            Tokenizer::BytePair(v) => write!(f, "bpe:{}", v.id()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallKind {
    Planner,
    Solver,
    ReactStep,
    ToolModel,
    Single,
}

/// Input tokens of one call split by prompt component.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Breakdown {
    pub question: u64,
    pub context: u64,
    pub exemplars: u64,
    pub steps: u64,
}

impl Breakdown {
    /// Counts question, exemplars and steps directly and attributes the rest
    /// of `input_tokens` to context.
    pub fn with_residual_context(input_tokens: u64, question: u64, exemplars: u64, steps: u64) -> Self {
        let named = question + exemplars + steps;
        Self { question, exemplars, steps, context: input_tokens.saturating_sub(named) }
    }

    pub fn total(&self) -> u64 {
        self.question + self.context + self.exemplars + self.steps
    }
}

impl std::ops::AddAssign for Breakdown {
    fn add_assign(&mut self, rhs: Self) {
        self.question += rhs.question;
        self.context += rhs.context;
        self.exemplars += rhs.exemplars;
        self.steps += rhs.steps;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub call_kind: CallKind,
    pub input_tokens: u64,
    pub output_tokens: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub breakdown: Option<Breakdown>,
}

/// Per-run record of every model call.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenLedger {
    pub entries: Vec<LedgerEntry>,
}

impl TokenLedger {
    pub fn push(&mut self, entry: LedgerEntry) {
        self.entries.push(entry);
    }

    pub fn extend(&mut self, entries: impl IntoIterator<Item = LedgerEntry>) {
        self.entries.extend(entries);
    }

    pub fn calls(&self) -> usize {
        self.entries.len()
    }

    pub fn calls_of(&self, kind: CallKind) -> usize {
        self.entries.iter().filter(|e| e.call_kind == kind).count()
    }

    pub fn input_tokens(&self) -> u64 {
        self.entries.iter().map(|e| e.input_tokens).sum()
    }

    pub fn output_tokens(&self) -> u64 {
        self.entries.iter().map(|e| e.output_tokens).sum()
    }

    pub fn total_tokens(&self) -> u64 {
        self.input_tokens() + self.output_tokens()
    }

    /// Input tokens of the paradigm's own calls, excluding model-backed tools.
    pub fn primary_input_tokens(&self) -> u64 {
        self.entries.iter().filter(|e| e.call_kind != CallKind::ToolModel).map(|e| e.input_tokens).sum()
    }
}

/// Sums the per-component input tokens over every call of a ledger.
pub fn decompose_ledger(ledger: &TokenLedger) -> Result<Breakdown, AccountingError> {
    let mut sum = Breakdown::default();
    for (i, e) in ledger.entries.iter().enumerate() {
        sum += e.breakdown.ok_or(AccountingError::MissingBreakdown(i))?;
    }
    Ok(sum)
}

/// Total input tokens of an interleaved thought/action/observation run:
/// `k(q + c + s) + sum_{j=1}^{k-1} (k - j) * tao_j`, where `tao_sizes[j-1]`
/// is the size of the j-th triple and `k = tao_sizes.len()`.
pub fn predict_tao_tokens(question: u64, context: u64, exemplars: u64, tao_sizes: &[u64]) -> u64 {
    let k = tao_sizes.len() as u64;
    let repeated = k * (question + context + exemplars);
    let accumulated: u64 = tao_sizes
        .iter()
        .enumerate()
        .take(tao_sizes.len().saturating_sub(1))
        .map(|(idx, size)| (k - (idx as u64 + 1)) * size)
        .sum();
    repeated + accumulated
}

/// Total input tokens of a plan-work-solve run: one planner call
/// (`c_planner + s + q`) and one solver call (`c_solver + q + sum PE`).
pub fn predict_rewoo_tokens(
    question: u64,
    planner_context: u64,
    solver_context: u64,
    exemplars: u64,
    plan_evidence_sizes: &[u64],
) -> u64 {
    (planner_context + exemplars + question) + (solver_context + question + plan_evidence_sizes.iter().sum::<u64>())
}

pub const DEFAULT_PRICE_PER_1K: f64 = 0.002;

/// Dollar cost of 1000 queries averaging `avg_tokens_per_query` tokens each,
/// at `price_per_1k` dollars per 1000 tokens.
pub fn cost_per_1k(avg_tokens_per_query: f64, price_per_1k: f64) -> f64 {
    avg_tokens_per_query * 1000.0 * price_per_1k / 1000.0
}

/// Price per 1000 tokens by model id, with a fallback for unlisted models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingTable {
    #[serde(default = "default_price")]
    pub default_price: f64,
    #[serde(default)]
    pub prices: BTreeMap<String, f64>,
}

fn default_price() -> f64 {
    DEFAULT_PRICE_PER_1K
}

impl Default for PricingTable {
    fn default() -> Self {
        Self { default_price: DEFAULT_PRICE_PER_1K, prices: BTreeMap::new() }
    }
}

impl PricingTable {
    pub fn uniform(price: f64) -> Result<Self, AccountingError> {
        let table = Self { default_price: price, prices: BTreeMap::new() };
        table.validate()?;
        Ok(table)
    }

    /// TOML document: `default_price = 0.002` and a `[prices]` table.
    pub fn load(path: &Path) -> Result<Self, AccountingError> {
        let err = |reason: String| AccountingError::Pricing { path: path.display().to_string(), reason };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let table: Self = toml::from_str(&text).map_err(|e| err(e.to_string()))?;
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<(), AccountingError> {
        let all =
            std::iter::once(("<default>", self.default_price)).chain(self.prices.iter().map(|(k, v)| (k.as_str(), *v)));
        for (model, price) in all {
            if price.is_nan() || price < 0.0 {
                return Err(AccountingError::NegativePrice { model: model.to_string(), price });
            }
        }
        Ok(())
    }

    pub fn price_for(&self, model_id: &str) -> f64 {
        self.prices.get(model_id).copied().unwrap_or(self.default_price)
    }
}
