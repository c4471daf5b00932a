//! Answer scoring, benchmark aggregation and planner instruction export.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::accounting::cost_per_1k;
use crate::blueprint::render_blueprint;
use crate::engine::{run_task, EngineDeps, ExecutionRecord, Paradigm, Task, Warning, WarningKind};
use crate::model::{LanguageModel, ModelError, ModelRequest};
use crate::prompting::{planner_instruction, PromptError, PromptTemplate};
use crate::tools::{catalog, ToolError};

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error("records and scores are not aligned: {0}")]
    AlignmentMismatch(String),
    #[error("record {0} is not a plan-work-solve run")]
    NotRewoo(String),
    #[error("{path}: {reason}")]
    Dataset { path: String, reason: String },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Tool(#[from] ToolError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

const ARTICLES: [&str; 3] = ["a", "an", "the"];

/// Lowercases, strips punctuation, drops leading articles and collapses
/// whitespace.
pub fn normalize_answer(text: &str) -> String {
    let lowered: String =
        text.to_lowercase().chars().filter(|c| !(c.is_ascii_punctuation() || is_unicode_punctuation(*c))).collect();
    let mut words: &[&str] = &lowered.split_whitespace().collect::<Vec<_>>();
    while let Some((first, rest)) = words.split_first() {
        if !ARTICLES.contains(first) {
            break;
        }
        words = rest;
    }
    words.join(" ")
}

fn is_unicode_punctuation(c: char) -> bool {
    matches!(c, '\u{2010}'..='\u{2027}' | '\u{00a1}' | '\u{00bf}' | '\u{00ab}' | '\u{00bb}' | '\u{3001}' | '\u{3002}')
}

pub fn exact_match(pred: &str, gold: &str) -> u8 {
    u8::from(normalize_answer(pred) == normalize_answer(gold))
}

fn multiset_f1<T: Eq + std::hash::Hash>(pred: impl Iterator<Item = T>, gold: impl Iterator<Item = T>) -> f64 {
    let mut counts: HashMap<T, i64> = HashMap::new();
    let mut n_pred = 0usize;
    for t in pred {
        *counts.entry(t).or_default() += 1;
        n_pred += 1;
    }
    let mut n_gold = 0usize;
    let mut overlap = 0usize;
    for t in gold {
        n_gold += 1;
        if let Some(c) = counts.get_mut(&t) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    match (n_pred, n_gold) {
        (0, 0) => 1.0,
        (0, _) | (_, 0) => 0.0,
        _ if overlap == 0 => 0.0,
        _ => {
            let p = overlap as f64 / n_pred as f64;
            let r = overlap as f64 / n_gold as f64;
            2.0 * p * r / (p + r)
        }
    }
}

/// F1 over the character multisets of the normalized strings. Whitespace is
/// not counted as a character.
pub fn char_f1(pred: &str, gold: &str) -> f64 {
    let (p, g) = (normalize_answer(pred), normalize_answer(gold));
    multiset_f1(p.chars().filter(|c| !c.is_whitespace()), g.chars().filter(|c| !c.is_whitespace()))
}

/// SQuAD-style F1 over normalized word multisets.
pub fn token_f1(pred: &str, gold: &str) -> f64 {
    let (p, g) = (normalize_answer(pred), normalize_answer(gold));
    multiset_f1(p.split_whitespace(), g.split_whitespace())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum F1Mode {
    #[default]
    Char,
    Token,
}

impl F1Mode {
    pub fn score(self, pred: &str, gold: &str) -> f64 {
        match self {
            F1Mode::Char => char_f1(pred, gold),
            F1Mode::Token => token_f1(pred, gold),
        }
    }
}

const JUDGE_PROMPT: &str = "You are grading an answer to a question. Decide whether the predicted answer has the same meaning as the gold answer. Abbreviations, different formatting and extra words are fine as long as the meaning matches.

Question: {question}
Gold answer: {gold}
Predicted answer: {pred}

Reply with Yes or No.";

pub fn judge_prompt(question: &str, pred: &str, gold: &str) -> String {
    JUDGE_PROMPT.replace("{question}", question).replace("{gold}", gold).replace("{pred}", pred)
}

/// Reads a leading yes/no, ignoring case and punctuation.
pub fn parse_verdict(text: &str) -> Option<u8> {
    let first = text.split_whitespace().next()?;
    let word: String = first.chars().filter(|c| c.is_alphabetic()).collect::<String>().to_lowercase();
    match word.as_str() {
        "yes" => Some(1),
        "no" => Some(0),
        _ => None,
    }
}

/// Asks a judge model whether `pred` means `gold`. An unparseable verdict
/// scores 0 and comes back with a warning.
pub fn judge_accuracy(
    question: &str,
    pred: &str,
    gold: &str,
    model: &dyn LanguageModel,
    model_id: &str,
) -> Result<(u8, Option<Warning>), ModelError> {
    let resp = model.complete(&ModelRequest::new(judge_prompt(question, pred, gold), model_id))?;
    Ok(match parse_verdict(&resp.text) {
        Some(v) => (v, None),
        None => (0, Some(Warning::new(WarningKind::UnparseableVerdict, format!("judge said {:?}", resp.text.trim())))),
    })
}

/// One dataset line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetItem {
    pub id: String,
    pub question: String,
    #[serde(default)]
    pub answer: Option<String>,
}

pub fn load_dataset(path: &Path) -> Result<Vec<DatasetItem>, EvaluationError> {
    let err = |reason: String| EvaluationError::Dataset { path: path.display().to_string(), reason };
    let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    let mut items = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item: DatasetItem = serde_json::from_str(line).map_err(|e| err(format!("line {}: {e}", i + 1)))?;
        if item.question.trim().is_empty() {
            return Err(err(format!("line {}: empty question", i + 1)));
        }
        items.push(item);
    }
    Ok(items)
}

/// Turns dataset items into tasks sharing one toolset and exemplar set.
pub fn tasks_from(items: &[DatasetItem], toolset: &[String], exemplar_set: &str) -> Vec<Task> {
    items
        .iter()
        .map(|it| Task {
            id: it.id.clone(),
            question: it.question.clone(),
            gold_answer: it.answer.clone(),
            toolset: toolset.to_vec(),
            exemplar_set: exemplar_set.to_string(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredResult {
    pub task_id: String,
    pub paradigm: Paradigm,
    pub answer: String,
    pub em: u8,
    pub f1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judge_acc: Option<u8>,
    pub tokens: u64,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub steps: usize,
    #[serde(default)]
    pub failed: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<Warning>,
}

impl ScoredResult {
    /// The judge verdict when there is one, exact match otherwise.
    pub fn accuracy(&self) -> u8 {
        self.judge_acc.unwrap_or(self.em)
    }
}

/// One row of the results table. Acc, F1 and EM are percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub benchmark: String,
    pub paradigm: Paradigm,
    pub n_tools: usize,
    pub n_exemplars: usize,
    pub n: usize,
    pub acc: f64,
    pub f1: f64,
    pub em: f64,
    pub avg_tokens: f64,
    pub avg_input_tokens: f64,
    pub avg_output_tokens: f64,
    pub avg_steps: f64,
    pub cost_1k: f64,
    pub failed: usize,
}

#[derive(Clone)]
pub struct Judge {
    pub model: Arc<dyn LanguageModel>,
    pub model_id: String,
}

#[derive(Clone)]
pub struct BenchmarkConfig {
    pub benchmark: String,
    pub price_per_1k: f64,
    pub parallelism: usize,
    pub f1_mode: F1Mode,
    pub judge: Option<Judge>,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            benchmark: "custom".into(),
            price_per_1k: crate::accounting::DEFAULT_PRICE_PER_1K,
            parallelism: 1,
            f1_mode: F1Mode::Char,
            judge: None,
        }
    }
}

/// Everything a benchmark run produced, ordered by task id.
#[derive(Debug, Clone)]
pub struct BenchmarkRun {
    pub report: BenchmarkReport,
    pub results: Vec<ScoredResult>,
    pub records: Vec<ExecutionRecord>,
}

fn score_task(
    task: &Task,
    paradigm: Paradigm,
    deps: &EngineDeps,
    cfg: &BenchmarkConfig,
) -> (ScoredResult, Option<ExecutionRecord>) {
    let gold = task.gold_answer.clone().unwrap_or_default();
    match run_task(task, paradigm, deps) {
        Ok(rec) => {
            let mut warnings = rec.warnings.clone();
            let judge_acc = cfg.judge.as_ref().map(|j| {
                match judge_accuracy(&task.question, &rec.answer, &gold, j.model.as_ref(), &j.model_id) {
                    Ok((v, w)) => {
                        warnings.extend(w);
                        v
                    }
                    Err(e) => {
                        warnings.push(Warning::new(WarningKind::UnparseableVerdict, format!("judge call failed: {e}")));
                        0
                    }
                }
            });
            let result = ScoredResult {
                task_id: task.id.clone(),
                paradigm,
                answer: rec.answer.clone(),
                em: exact_match(&rec.answer, &gold),
                f1: cfg.f1_mode.score(&rec.answer, &gold),
                judge_acc,
                tokens: rec.ledger.total_tokens(),
                input_tokens: rec.ledger.input_tokens(),
                output_tokens: rec.ledger.output_tokens(),
                steps: rec.steps,
                failed: false,
                warnings,
            };
            (result, Some(rec))
        }
        Err(e) => {
            tracing::warn!(task = %task.id, error = %e, "task failed");
            let result = ScoredResult {
                task_id: task.id.clone(),
                paradigm,
                answer: String::new(),
                em: 0,
                f1: 0.0,
                judge_acc: cfg.judge.as_ref().map(|_| 0),
                tokens: 0,
                input_tokens: 0,
                output_tokens: 0,
                steps: 0,
                failed: true,
                warnings: vec![Warning::new(WarningKind::TaskFailed, e.to_string())],
            };
            (result, None)
        }
    }
}

/// Runs and scores every task. Failed tasks score zero and carry a warning.
pub fn run_benchmark(
    tasks: &[Task],
    paradigm: Paradigm,
    deps: &EngineDeps,
    cfg: &BenchmarkConfig,
) -> Result<BenchmarkRun, EvaluationError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism.max(1))
        .build()
        .map_err(|e| EvaluationError::ThreadPool(e.to_string()))?;
    let mut scored: Vec<(ScoredResult, Option<ExecutionRecord>)> =
        pool.install(|| tasks.par_iter().map(|t| score_task(t, paradigm, deps, cfg)).collect());
    scored.sort_by(|a, b| a.0.task_id.cmp(&b.0.task_id));

    let n_tools = tasks.first().map_or(0, |t| t.toolset.len());
    let n_exemplars = tasks.first().and_then(|t| deps.exemplars.get(&t.exemplar_set)).map_or(0, Vec::len);
    let (results, records): (Vec<_>, Vec<_>) = scored.into_iter().unzip();
    let report = aggregate(&cfg.benchmark, paradigm, n_tools, n_exemplars, &results, cfg.price_per_1k);
    Ok(BenchmarkRun { report, results, records: records.into_iter().flatten().collect() })
}

/// Folds scored results into a report row.
pub fn aggregate(
    benchmark: &str,
    paradigm: Paradigm,
    n_tools: usize,
    n_exemplars: usize,
    results: &[ScoredResult],
    price_per_1k: f64,
) -> BenchmarkReport {
    let n = results.len();
    let mean =
        |f: &dyn Fn(&ScoredResult) -> f64| if n == 0 { 0.0 } else { results.iter().map(f).sum::<f64>() / n as f64 };
    let avg_tokens = mean(&|r| r.tokens as f64);
    BenchmarkReport {
        benchmark: benchmark.to_string(),
        paradigm,
        n_tools,
        n_exemplars,
        n,
        acc: 100.0 * mean(&|r| r.accuracy() as f64),
        f1: 100.0 * mean(&|r| r.f1),
        em: 100.0 * mean(&|r| r.em as f64),
        avg_tokens,
        avg_input_tokens: mean(&|r| r.input_tokens as f64),
        avg_output_tokens: mean(&|r| r.output_tokens as f64),
        avg_steps: mean(&|r| r.steps as f64),
        cost_1k: cost_per_1k(avg_tokens, price_per_1k),
        failed: results.iter().filter(|r| r.failed).count(),
    }
}

/// Aligned text table in the column order Paradigm, #Tools, n, Acc, F1, EM,
/// #Tokens, #Steps, $Cost_1k.
pub fn render_table(reports: &[BenchmarkReport]) -> String {
    let header = ["Paradigm", "#Tools", "n", "Acc", "F1", "EM", "#Tokens", "#Steps", "$Cost_1k"];
    let rows: Vec<[String; 9]> = reports
        .iter()
        .map(|r| {
            [
                r.paradigm.to_string(),
                r.n_tools.to_string(),
                r.n.to_string(),
                format!("{:.2}", r.acc),
                format!("{:.2}", r.f1),
                format!("{:.2}", r.em),
                format!("{:.1}", r.avg_tokens),
                format!("{:.2}", r.avg_steps),
                format!("{:.2}", r.cost_1k),
            ]
        })
        .collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let line = |cells: Vec<&str>, out: &mut String| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(header.to_vec(), &mut out);
    for row in &rows {
        line(row.iter().map(String::as_str).collect(), &mut out);
    }
    out
}

/// A planner training triple.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionRecord {
    pub instruction: String,
    pub input: String,
    pub output: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFilter {
    #[default]
    Em,
    Judge,
}

/// Keeps the plans of correctly answered runs as instruction data. The
/// instruction is the zero-shot planner context for the record's toolset.
pub fn export_planner_instructions(
    records: &[ExecutionRecord],
    scores: &[ScoredResult],
    filter: ExportFilter,
    tpl: &PromptTemplate,
) -> Result<Vec<InstructionRecord>, EvaluationError> {
    let by_id: BTreeMap<&str, &ScoredResult> = scores.iter().map(|s| (s.task_id.as_str(), s)).collect();
    if by_id.len() != scores.len() {
        return Err(EvaluationError::AlignmentMismatch("duplicate task id in scores".into()));
    }
    // failed tasks are scored but leave no record
    let completed = scores.iter().filter(|s| !s.failed).count();
    if records.len() != completed {
        return Err(EvaluationError::AlignmentMismatch(format!(
            "{} records but {completed} completed scores",
            records.len()
        )));
    }
    let mut out = Vec::new();
    for rec in records {
        let score = by_id
            .get(rec.task_id.as_str())
            .ok_or_else(|| EvaluationError::AlignmentMismatch(format!("no score for task {}", rec.task_id)))?;
        let bp = match (&rec.paradigm, &rec.blueprint) {
            (Paradigm::Rewoo, Some(bp)) => bp,
            _ => return Err(EvaluationError::NotRewoo(rec.task_id.clone())),
        };
        let correct = match filter {
            ExportFilter::Em => score.em == 1,
            ExportFilter::Judge => score.judge_acc == Some(1),
        };
        if !correct {
            continue;
        }
        let names: Vec<&str> = rec.toolset.iter().map(String::as_str).collect();
        let tools = catalog::descriptions(&names)?;
        out.push(InstructionRecord {
            instruction: planner_instruction(tpl, &tools)?,
            input: rec.question.clone(),
            output: render_blueprint(bp),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accounting::{TokenLedger, Tokenizer};
    use crate::blueprint::Blueprint;
    use crate::model::ScriptedModel;
    use crate::tools::catalog::{builtin_registry, ToolBackends, ToolConfig};
    use proptest::prelude::*;

    #[test]
    fn normalization_examples() {
        assert_eq!(normalize_answer("Dave Stevens."), "dave stevens");
        assert_eq!(normalize_answer(""), "");
        assert_eq!(normalize_answer("The Rocketeer"), "rocketeer");
        assert_eq!(normalize_answer("  Lisa  \"Left Eye\"   Lopes "), "lisa left eye lopes");
        assert_eq!(normalize_answer("the end of a road"), "end of a road");
    }

    #[test]
    fn exact_match_examples() {
        assert_eq!(exact_match("Dave Stevens.", "Dave Stevens"), 1);
        assert_eq!(exact_match("CA.", "California"), 0);
        assert_eq!(exact_match("anything", "anything"), 1);
    }

    #[test]
    fn char_f1_examples() {
        assert_eq!(char_f1("Dave Stevens", "Dave Stevens"), 1.0);
        assert_eq!(char_f1("abc", "xyz"), 0.0);
        assert!((char_f1("abc", "abd") - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(char_f1("", ""), 1.0);
        assert_eq!(char_f1("", "x"), 0.0);
        assert_eq!(char_f1("x", ""), 0.0);
    }

    #[test]
    fn token_f1_variant() {
        assert!((token_f1("left eye lopes", "lisa left eye lopes") - 2.0 * 0.75 / 1.75).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn em_implies_full_f1(a in ".{0,20}", b in ".{0,20}") {
            let f = char_f1(&a, &b);
            prop_assert!((0.0..=1.0).contains(&f));
            prop_assert!((f - char_f1(&b, &a)).abs() < 1e-12);
            if exact_match(&a, &b) == 1 {
                prop_assert_eq!(f, 1.0);
            }
        }
    }

    #[test]
    fn verdicts() {
        assert_eq!(parse_verdict("Yes"), Some(1));
        assert_eq!(parse_verdict("No."), Some(0));
        assert_eq!(parse_verdict("yes, they match"), Some(1));
        assert_eq!(parse_verdict("Maybe"), None);
        assert_eq!(parse_verdict(""), None);
    }

    #[test]
    fn judge_scores() {
        let yes = ScriptedModel::queue(Tokenizer::Whitespace, ["Yes"]);
        assert_eq!(judge_accuracy("Which state?", "CA.", "California", &yes, "judge").unwrap(), (1, None));
        let odd = ScriptedModel::queue(Tokenizer::Whitespace, ["Perhaps"]);
        let (v, w) = judge_accuracy("q", "a", "b", &odd, "judge").unwrap();
        assert_eq!(v, 0);
        assert_eq!(w.unwrap().kind, WarningKind::UnparseableVerdict);
    }

    fn deps(model: ScriptedModel) -> EngineDeps {
        let reg = builtin_registry(&ToolConfig::default(), &ToolBackends::default()).unwrap();
        EngineDeps::new(Arc::new(model), "m", Arc::new(reg))
    }

    fn items(n: usize) -> Vec<DatasetItem> {
        (0..n)
            .map(|i| DatasetItem { id: format!("t{i}"), question: format!("q{i}?"), answer: Some(format!("a{i}")) })
            .collect()
    }

    #[test]
    fn benchmark_all_correct() {
        let model = ScriptedModel::from_fn(Tokenizer::Whitespace, |req| {
            let q = req.prompt.rsplit("Question: ").next().unwrap();
            Some(q.trim_start_matches('q').split('?').next().map(|i| format!("a{i}")).unwrap())
        });
        let tasks = tasks_from(&items(2), &[], "");
        let run = run_benchmark(&tasks, Paradigm::Direct, &deps(model), &BenchmarkConfig::default()).unwrap();
        assert_eq!(run.report.n, 2);
        assert_eq!((run.report.acc, run.report.em, run.report.f1), (100.0, 100.0, 100.0));
        assert_eq!(run.report.avg_steps, 1.0);
    }

    #[test]
    fn failed_task_scores_zero() {
        let model = ScriptedModel::queue(Tokenizer::Whitespace, ["a0"]);
        let tasks = tasks_from(&items(2), &[], "");
        let run = run_benchmark(&tasks, Paradigm::Direct, &deps(model), &BenchmarkConfig::default()).unwrap();
        assert_eq!(run.report.failed, 1);
        assert_eq!(run.report.em, 50.0);
        let failed = run.results.iter().find(|r| r.failed).unwrap();
        assert_eq!(failed.warnings[0].kind, WarningKind::TaskFailed);
        assert_eq!(run.records.len(), 1);
    }

    #[test]
    fn empty_benchmark() {
        let run = run_benchmark(
            &[],
            Paradigm::Rewoo,
            &deps(ScriptedModel::queue(Tokenizer::Whitespace, [""; 0])),
            &BenchmarkConfig::default(),
        )
        .unwrap();
        assert_eq!(run.report.n, 0);
        assert_eq!(run.report.avg_tokens, 0.0);
        assert!(render_table(&[run.report]).starts_with("Paradigm"));
    }

    #[test]
    fn table_layout() {
        let r = aggregate("hotpotqa", Paradigm::Rewoo, 6, 2, &[], 0.002);
        let table = render_table(&[r]);
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("Paradigm  #Tools  n"));
        assert!(lines[1].starts_with("rewoo"));
    }

    fn record(id: &str, plan: &str) -> ExecutionRecord {
        ExecutionRecord {
            task_id: id.into(),
            question: format!("question {id}"),
            paradigm: Paradigm::Rewoo,
            toolset: vec!["Calculator".into(), "LLM".into()],
            blueprint: Some(Blueprint::parse(plan).unwrap()),
            evidence: None,
            react_trace: None,
            completion: None,
            tool_calls: vec![],
            answer: String::new(),
            ledger: TokenLedger::default(),
            steps: 2,
            warnings: vec![],
        }
    }

    fn score(id: &str, em: u8) -> ScoredResult {
        ScoredResult {
            task_id: id.into(),
            paradigm: Paradigm::Rewoo,
            answer: String::new(),
            em,
            f1: em as f64,
            judge_acc: None,
            tokens: 0,
            input_tokens: 0,
            output_tokens: 0,
            steps: 2,
            failed: false,
            warnings: vec![],
        }
    }

    #[test]
    fn export_filters_correct_runs() {
        let plan = "Plan: add\n#E1 = Calculator[1 + 1]";
        let recs: Vec<_> = ["a", "b", "c"].iter().map(|id| record(id, plan)).collect();
        let scores = vec![score("a", 1), score("b", 0), score("c", 1)];
        let out = export_planner_instructions(&recs, &scores, ExportFilter::Em, &PromptTemplate::default()).unwrap();
        assert_eq!(out.len(), 2);
        for r in &out {
            assert_eq!(Blueprint::parse(&r.output).unwrap().len(), 1);
            assert!(r.instruction.contains("(1) Calculator[input]"));
        }
        assert!(export_planner_instructions(&[], &[], ExportFilter::Em, &PromptTemplate::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn export_alignment_errors() {
        let recs = vec![record("a", "Plan: x\n#E1 = LLM[y]")];
        let tpl = PromptTemplate::default();
        assert!(matches!(
            export_planner_instructions(&recs, &[score("z", 1)], ExportFilter::Em, &tpl),
            Err(EvaluationError::AlignmentMismatch(_))
        ));
        assert!(matches!(
            export_planner_instructions(&recs, &[], ExportFilter::Em, &tpl),
            Err(EvaluationError::AlignmentMismatch(_))
        ));
    }
}
