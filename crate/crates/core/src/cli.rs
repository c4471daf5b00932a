//! Command-line interface: `solve`, `bench`, `export-instructions` and
//! `fixtures`.
//!
//! Exit codes: 0 on success, 1 for usage and configuration errors, 2 for
//! failures while running.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::accounting::cost_per_1k;
use crate::config::{
    Backend, ConfigFile, EnvConfig, Overrides, RunConfig, CONFIG_FILE, DATASET_FILE, EXEMPLARS_FILE, REPLAY_FILE,
    TOOLS_FILE,
};
use crate::engine::{run_task, EngineDeps, ExecutionRecord, Paradigm, Task};
use crate::evaluation::{
    export_planner_instructions, load_dataset, render_table, run_benchmark, tasks_from, BenchmarkConfig,
    BenchmarkReport, ExportFilter, Judge, ScoredResult,
};
use crate::model::{
    digest, HttpChatModel, HttpModelConfig, LanguageModel, ReplayMode, ReplayModel, ReplayStore, ScriptedModel,
};
use crate::prompting::{load_exemplars, Exemplar, PromptTemplate};
use crate::tools::catalog::{builtin_registry, ToolBackends};
use crate::tools::http::FixtureBackend;
use crate::trajectory::{load_trajectory, script_for, Trajectory};

const DEFAULT_EXEMPLAR_SET: &str = "default";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Config(m) | CliError::Runtime(m) => m,
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "rewoo", version, about = "Plan-work-solve runs, baselines and token accounting")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one question and print the answer, steps, tokens and cost.
    Solve {
        question: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run a JSONL dataset under one or more paradigms and print the table.
    Bench {
        /// Dataset of {id, question, answer} lines; defaults to the replay
        /// directory's dataset.jsonl.
        dataset: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Turn correctly answered plan-work-solve runs into planner
    /// instruction data.
    ExportInstructions {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "em")]
        filter: FilterArg,
        #[arg(long)]
        templates: Option<PathBuf>,
    },
    /// Build or verify replay corpora.
    #[command(subcommand)]
    Fixtures(FixturesCommand),
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum FilterArg {
    Em,
    Judge,
}

#[derive(Debug, Subcommand)]
pub enum FixturesCommand {
    /// Record replay.jsonl and tools.jsonl in a corpus directory from
    /// trajectory files.
    Record {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(required = true)]
        trajectories: Vec<PathBuf>,
    },
    /// Check digests and token counts of a corpus's replay records.
    Check {
        #[arg(long)]
        corpus: PathBuf,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Comma-separated paradigms: rewoo, react, direct, cot.
    #[arg(long)]
    pub paradigm: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// Comma-separated tool names.
    #[arg(long)]
    pub tools: Option<String>,
    /// Exemplar JSONL file.
    #[arg(long)]
    pub exemplars: Option<PathBuf>,
    /// Directory of template overrides.
    #[arg(long)]
    pub templates: Option<PathBuf>,
    /// Replay recorded completions from a corpus directory.
    #[arg(long, conflicts_with = "record")]
    pub replay: Option<PathBuf>,
    /// Record completions into a corpus directory (needs --script or --live).
    #[arg(long)]
    pub record: Option<PathBuf>,
    /// JSONL file of scripted completions, one JSON string per line.
    #[arg(long)]
    pub script: Option<PathBuf>,
    /// Allow network calls to the configured model endpoint and tools.
    #[arg(long)]
    pub live: bool,
    /// off, all, or comma-separated tool names.
    #[arg(long)]
    pub inject_failure: Option<String>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// whitespace or bpe:<vocabulary>.
    #[arg(long)]
    pub tokenizer: Option<String>,
    /// Price in USD per 1k tokens.
    #[arg(long)]
    pub price: Option<f64>,
    #[arg(long)]
    pub parallelism: Option<usize>,
    /// Output file (solve) or directory (bench).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Abort on malformed model output instead of recovering.
    #[arg(long)]
    pub strict: bool,
    /// Run independent plan steps concurrently.
    #[arg(long)]
    pub parallel_waves: bool,
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(str::to_string).collect()
}

impl RunArgs {
    fn overrides(&self) -> Result<Overrides, CliError> {
        let paradigms = match &self.paradigm {
            Some(p) => Some(
                split_list(p)
                    .iter()
                    .map(|x| x.parse::<Paradigm>().map_err(CliError::Usage))
                    .collect::<Result<Vec<_>, _>>()?,
            ),
            None => None,
        };
        Ok(Overrides {
            paradigms,
            model: self.model.clone(),
            tools: self.tools.as_deref().map(split_list),
            exemplars: self.exemplars.clone(),
            templates: self.templates.clone(),
            inject_failure: self.inject_failure.clone(),
            max_steps: self.max_steps,
            tokenizer: self.tokenizer.clone(),
            price: self.price,
            parallelism: self.parallelism,
            strict: self.strict,
            parallel_waves: self.parallel_waves,
        })
    }

    fn corpus_dir(&self) -> Option<&Path> {
        self.replay.as_deref().or(self.record.as_deref())
    }

    fn backend(&self) -> Result<Backend, CliError> {
        if let Some(dir) = &self.replay {
            if self.script.is_some() || self.live {
                return Err(CliError::Usage("--replay cannot be combined with --script or --live".into()));
            }
            return Ok(Backend::Replay(dir.clone()));
        }
        match (&self.script, self.live) {
            (Some(_), true) => Err(CliError::Usage("choose one of --script and --live".into())),
            (Some(p), false) => Ok(Backend::Script(p.clone())),
            (None, true) => Ok(Backend::Live),
            (None, false) => {
                Err(CliError::Usage("no model backend: pass --replay <dir>, --script <file> or --live".into()))
            }
        }
    }
}

/// A replay store being recorded and the file it is saved to.
type Recording = Option<(Arc<ReplayStore>, PathBuf)>;

/// Everything built from flags, config and the corpus directory.
struct Session {
    cfg: RunConfig,
    deps: EngineDeps,
    exemplar_set: String,
    store: Recording,
}

impl Session {
    fn toolset_task(&self, task: &mut Task, paradigm: Paradigm) {
        task.toolset = self.cfg.toolset(paradigm).to_vec();
        task.exemplar_set = self.exemplar_set.clone();
    }

    fn finish(&self) -> Result<(), CliError> {
        if let Some((store, path)) = &self.store {
            store.save(path).map_err(runtime_err)?;
        }
        Ok(())
    }
}

fn load_script(path: &Path) -> Result<Vec<String>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str::<String>(l).map_err(|e| config_err(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

fn build_session(run: &RunArgs) -> Result<Session, CliError> {
    let backend = run.backend()?;
    if let Some(dir) = run.corpus_dir() {
        if matches!(backend, Backend::Replay(_)) && !dir.join(REPLAY_FILE).exists() {
            return Err(CliError::Config(format!("replay fixture {} not found", dir.join(REPLAY_FILE).display())));
        }
    }
    let file = match (&run.config, run.corpus_dir()) {
        (Some(p), _) => ConfigFile::load(p).map_err(config_err)?,
        (None, Some(dir)) if dir.join(CONFIG_FILE).exists() => {
            ConfigFile::load(&dir.join(CONFIG_FILE)).map_err(config_err)?
        }
        _ => ConfigFile::default(),
    };
    let mut flags = run.overrides()?;
    if flags.exemplars.is_none() && file.exemplars.is_none() {
        if let Some(dir) = run.corpus_dir() {
            let p = dir.join(EXEMPLARS_FILE);
            if p.exists() {
                flags.exemplars = Some(p);
            }
        }
    }
    let cfg = RunConfig::resolve(&file, &EnvConfig::from_env(), &flags).map_err(config_err)?;

    let upstream: Option<Arc<dyn LanguageModel>> = match &backend {
        Backend::Replay(_) => None,
        Backend::Script(p) => Some(Arc::new(ScriptedModel::queue(cfg.tokenizer, load_script(p)?))),
        Backend::Live => {
            let mut http = HttpModelConfig { api_key: cfg.api_key.clone(), ..Default::default() };
            if let Some(e) = &cfg.endpoint {
                http.endpoint = e.clone();
            }
            Some(Arc::new(HttpChatModel::new(http, cfg.tokenizer).map_err(config_err)?))
        }
    };
    let (model, store): (Arc<dyn LanguageModel>, Recording) = match (&backend, &run.record) {
        (Backend::Replay(dir), _) => {
            let store = Arc::new(ReplayStore::load(&dir.join(REPLAY_FILE), ReplayMode::Replay).map_err(config_err)?);
            (Arc::new(ReplayModel::replay(store)), None)
        }
        (_, Some(dir)) => {
            fs::create_dir_all(dir).map_err(runtime_err)?;
            let path = dir.join(REPLAY_FILE);
            let store = Arc::new(ReplayStore::load(&path, ReplayMode::Record).map_err(config_err)?);
            let m = ReplayModel::wrapping(store.clone(), upstream.expect("record has an upstream"));
            (Arc::new(m), Some((store, path)))
        }
        _ => (upstream.expect("non-replay backends have an upstream"), None),
    };

    let fixtures = match run.corpus_dir().map(|d| d.join(TOOLS_FILE)) {
        Some(p) if p.exists() => Some(Arc::new(FixtureBackend::load(&p).map_err(config_err)?)),
        _ => None,
    };
    let backends = ToolBackends {
        fixtures,
        live: run.live,
        api_key: cfg.api_key.clone(),
        model: Some((model.clone(), cfg.model_id.clone(), cfg.tokenizer)),
    };
    let registry = builtin_registry(&cfg.tool_settings, &backends).map_err(config_err)?;
    for p in &cfg.paradigms {
        for t in cfg.toolset(*p) {
            if !registry.contains(t) {
                return Err(CliError::Config(format!("unknown tool {t}")));
            }
        }
    }
    let templates = match &cfg.templates {
        Some(dir) => PromptTemplate::load_dir(dir).map_err(config_err)?,
        None => PromptTemplate::default(),
    };
    let mut sets: BTreeMap<String, Vec<Exemplar>> = BTreeMap::new();
    let mut exemplar_set = String::new();
    if let Some(p) = &cfg.exemplars {
        sets.insert(DEFAULT_EXEMPLAR_SET.into(), load_exemplars(p).map_err(config_err)?);
        exemplar_set = DEFAULT_EXEMPLAR_SET.into();
    }

    let deps = EngineDeps {
        model,
        model_id: cfg.model_id.clone(),
        registry: Arc::new(registry),
        templates: Arc::new(templates),
        exemplars: Arc::new(sets),
        tokenizer: cfg.tokenizer,
        injection: cfg.injection.clone(),
        options: cfg.engine.clone(),
    };
    Ok(Session { cfg, deps, exemplar_set, store })
}

fn write_jsonl<T: serde::Serialize>(path: &Path, items: &[T]) -> Result<(), CliError> {
    let mut f = fs::File::create(path).map_err(|e| runtime_err(format!("{}: {e}", path.display())))?;
    for it in items {
        writeln!(f, "{}", serde_json::to_string(it).map_err(runtime_err)?).map_err(runtime_err)?;
    }
    Ok(())
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| config_err(format!("{}:{}: {e}", path.display(), i + 1))))
        .collect()
}

fn cmd_solve(question: &str, run: &RunArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let session = build_session(run)?;
    let paradigm = session.cfg.paradigms[0];
    let mut task = Task::new("cli", question);
    session.toolset_task(&mut task, paradigm);
    let rec = run_task(&task, paradigm, &session.deps).map_err(runtime_err)?;
    session.finish()?;
    let tokens = rec.ledger.total_tokens();
    let cost = cost_per_1k(tokens as f64, session.cfg.price_per_1k) / 1000.0;
    let w = |e: std::io::Error| runtime_err(e);
    writeln!(out, "Answer: {}", rec.answer).map_err(w)?;
    writeln!(out, "Paradigm: {paradigm}").map_err(w)?;
    writeln!(out, "Steps: {}", rec.steps).map_err(w)?;
    writeln!(out, "Tokens: {tokens} (input {}, output {})", rec.ledger.input_tokens(), rec.ledger.output_tokens())
        .map_err(w)?;
    writeln!(out, "Est. cost: ${cost:.6}").map_err(w)?;
    for warning in &rec.warnings {
        eprintln!("warning: {:?}: {}", warning.kind, warning.message);
    }
    if let Some(path) = &run.out {
        fs::write(path, serde_json::to_string_pretty(&rec).map_err(runtime_err)? + "\n").map_err(runtime_err)?;
    }
    Ok(())
}

fn cmd_bench(dataset: Option<&Path>, run: &RunArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let session = build_session(run)?;
    let dataset_path = match (dataset, run.corpus_dir()) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(dir)) => dir.join(DATASET_FILE),
        (None, None) => return Err(CliError::Usage("bench needs a dataset path".into())),
    };
    let items = load_dataset(&dataset_path).map_err(config_err)?;
    let judge =
        session.cfg.judge_model.as_ref().map(|id| Judge { model: session.deps.model.clone(), model_id: id.clone() });
    let mut reports: Vec<BenchmarkReport> = Vec::new();
    if let Some(dir) = &run.out {
        fs::create_dir_all(dir).map_err(runtime_err)?;
    }
    for paradigm in &session.cfg.paradigms {
        let tasks = tasks_from(&items, session.cfg.toolset(*paradigm), &session.exemplar_set);
        let bench = BenchmarkConfig {
            benchmark: session.cfg.benchmark.clone(),
            price_per_1k: session.cfg.price_per_1k,
            parallelism: if run.script.is_some() { 1 } else { session.cfg.parallelism },
            f1_mode: session.cfg.f1_mode,
            judge: judge.clone(),
        };
        let result = run_benchmark(&tasks, *paradigm, &session.deps, &bench).map_err(runtime_err)?;
        for r in &result.results {
            for w in &r.warnings {
                eprintln!("warning: {} {}: {:?}: {}", paradigm, r.task_id, w.kind, w.message);
            }
        }
        if let Some(dir) = &run.out {
            write_jsonl(&dir.join(format!("results-{paradigm}.jsonl")), &result.results)?;
            write_jsonl(&dir.join(format!("records-{paradigm}.jsonl")), &result.records)?;
        }
        reports.push(result.report);
    }
    session.finish()?;
    if let Some(dir) = &run.out {
        fs::write(dir.join("report.json"), serde_json::to_string_pretty(&reports).map_err(runtime_err)? + "\n")
            .map_err(runtime_err)?;
    }
    write!(out, "{}", render_table(&reports)).map_err(runtime_err)?;
    Ok(())
}

fn cmd_export(
    records: &Path,
    scores: &Path,
    out_path: &Path,
    filter: FilterArg,
    templates: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let recs: Vec<ExecutionRecord> = read_jsonl(records)?;
    let scores: Vec<ScoredResult> = read_jsonl(scores)?;
    let tpl = match templates {
        Some(d) => PromptTemplate::load_dir(d).map_err(config_err)?,
        None => PromptTemplate::default(),
    };
    let filter = match filter {
        FilterArg::Em => ExportFilter::Em,
        FilterArg::Judge => ExportFilter::Judge,
    };
    let exported = export_planner_instructions(&recs, &scores, filter, &tpl).map_err(runtime_err)?;
    write_jsonl(out_path, &exported)?;
    writeln!(out, "exported {} of {} records", exported.len(), recs.len()).map_err(runtime_err)?;
    Ok(())
}

fn cmd_record(corpus: &Path, trajectories: &[PathBuf], out: &mut dyn Write) -> Result<(), CliError> {
    let file = match corpus.join(CONFIG_FILE) {
        p if p.exists() => ConfigFile::load(&p).map_err(config_err)?,
        _ => ConfigFile::default(),
    };
    let mut flags = Overrides::default();
    if file.exemplars.is_none() && corpus.join(EXEMPLARS_FILE).exists() {
        flags.exemplars = Some(corpus.join(EXEMPLARS_FILE));
    }
    let cfg = RunConfig::resolve(&file, &EnvConfig::default(), &flags).map_err(config_err)?;
    let items = load_dataset(&corpus.join(DATASET_FILE)).map_err(config_err)?;
    let kinds = builtin_registry(&cfg.tool_settings, &ToolBackends::default()).map_err(config_err)?;
    let templates = match &cfg.templates {
        Some(dir) => PromptTemplate::load_dir(dir).map_err(config_err)?,
        None => PromptTemplate::default(),
    };
    let mut sets = BTreeMap::new();
    let mut exemplar_set = String::new();
    if let Some(p) = &cfg.exemplars {
        sets.insert(DEFAULT_EXEMPLAR_SET.to_string(), load_exemplars(p).map_err(config_err)?);
        exemplar_set = DEFAULT_EXEMPLAR_SET.to_string();
    }
    let sets = Arc::new(sets);
    let templates = Arc::new(templates);

    let store = Arc::new(ReplayStore::new(ReplayMode::Record));
    let fixtures = Arc::new(FixtureBackend::new());
    for path in trajectories {
        let traj = load_trajectory(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let item = items
            .iter()
            .find(|it| it.question.trim() == traj.question().trim())
            .ok_or_else(|| config_err(format!("{}: question not in dataset", path.display())))?;
        let paradigm = match traj {
            Trajectory::Rewoo(_) => Paradigm::Rewoo,
            Trajectory::React(_) => Paradigm::React,
        };
        let script = script_for(&traj, &kinds).map_err(config_err)?;
        for f in script.tool_fixtures {
            fixtures.insert(f);
        }
        let scripted = Arc::new(ScriptedModel::queue(cfg.tokenizer, script.completions));
        let model: Arc<dyn LanguageModel> = Arc::new(ReplayModel::wrapping(store.clone(), scripted.clone()));
        let backends = ToolBackends {
            fixtures: Some(fixtures.clone()),
            live: false,
            api_key: None,
            model: Some((model.clone(), cfg.model_id.clone(), cfg.tokenizer)),
        };
        let registry = builtin_registry(&cfg.tool_settings, &backends).map_err(config_err)?;
        let deps = EngineDeps {
            model,
            model_id: cfg.model_id.clone(),
            registry: Arc::new(registry),
            templates: templates.clone(),
            exemplars: sets.clone(),
            tokenizer: cfg.tokenizer,
            injection: Default::default(),
            options: cfg.engine.clone(),
        };
        let mut task = Task::new(item.id.clone(), item.question.clone());
        task.toolset = cfg.toolset(paradigm).to_vec();
        task.exemplar_set = exemplar_set.clone();
        let rec = run_task(&task, paradigm, &deps).map_err(|e| runtime_err(format!("{}: {e}", path.display())))?;
        if rec.answer != traj.answer().trim() {
            return Err(runtime_err(format!(
                "{}: run answered {:?}, trajectory says {:?}",
                path.display(),
                rec.answer,
                traj.answer()
            )));
        }
        if scripted.remaining() != 0 {
            return Err(runtime_err(format!(
                "{}: {} scripted completions unused",
                path.display(),
                scripted.remaining()
            )));
        }
        writeln!(out, "recorded {} ({paradigm}, {} calls)", item.id, rec.ledger.calls()).map_err(runtime_err)?;
    }
    store.save(&corpus.join(REPLAY_FILE)).map_err(runtime_err)?;
    fixtures.save(&corpus.join(TOOLS_FILE)).map_err(runtime_err)?;
    Ok(())
}

fn cmd_check(corpus: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let file = match corpus.join(CONFIG_FILE) {
        p if p.exists() => ConfigFile::load(&p).map_err(config_err)?,
        _ => ConfigFile::default(),
    };
    let cfg = RunConfig::resolve(&file, &EnvConfig::default(), &Overrides::default()).map_err(config_err)?;
    let store = ReplayStore::load(&corpus.join(REPLAY_FILE), ReplayMode::Replay).map_err(config_err)?;
    let mut bad = 0;
    for rec in store.records() {
        if rec.digest != digest(&rec.prompt, &rec.model_id, cfg.engine.temperature) {
            writeln!(out, "digest mismatch: {}", rec.digest).map_err(runtime_err)?;
            bad += 1;
        }
        let counted = cfg.tokenizer.count(&rec.prompt);
        if counted != rec.input_tokens {
            writeln!(out, "token mismatch: {} stores {} but counts {counted}", rec.digest, rec.input_tokens)
                .map_err(runtime_err)?;
            bad += 1;
        }
    }
    writeln!(out, "{} records, {bad} problems", store.len()).map_err(runtime_err)?;
    if bad > 0 {
        return Err(CliError::Runtime(format!("{bad} fixture problems")));
    }
    Ok(())
}

/// Runs the command line and returns the process exit code. Output goes to
/// `out`; errors and warnings go to stderr.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let result = match &cli.command {
        Command::Solve { question, run } => cmd_solve(question, run, out),
        Command::Bench { dataset, run } => cmd_bench(dataset.as_deref(), run, out),
        Command::ExportInstructions { records, scores, out: path, filter, templates } => {
            cmd_export(records, scores, path, *filter, templates.as_deref(), out)
        }
        Command::Fixtures(FixturesCommand::Record { corpus, trajectories }) => cmd_record(corpus, trajectories, out),
        Command::Fixtures(FixturesCommand::Check { corpus }) => cmd_check(corpus, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String) {
        let mut buf = Vec::new();
        let code = run(std::iter::once("rewoo").chain(args.iter().copied()), &mut buf);
        (code, String::from_utf8(buf).unwrap())
    }

    #[test]
    fn help_exits_zero_and_bad_flags_exit_one() {
        assert_eq!(run_capture(&["--help"]).0, 0);
        assert_eq!(run_capture(&["solve"]).0, 1);
        assert_eq!(run_capture(&["solve", "q", "--bogus"]).0, 1);
    }

    #[test]
    fn solve_needs_a_backend() {
        assert_eq!(run_capture(&["solve", "q"]).0, 1);
    }

    #[test]
    fn missing_replay_fixture_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let (code, _) = run_capture(&["solve", "--replay", dir.path().to_str().unwrap(), "q"]);
        assert_eq!(code, 1);
    }

    #[test]
    fn solve_direct_with_script() {
        let dir = tempfile::tempdir().unwrap();
        let script = dir.path().join("script.jsonl");
        fs::write(&script, "\"Paris\"\n").unwrap();
        let (code, out) =
            run_capture(&["solve", "--paradigm", "direct", "--script", script.to_str().unwrap(), "Capital of France?"]);
        assert_eq!(code, 0);
        assert!(out.starts_with("Answer: Paris\n"));
        assert!(out.contains("Steps: 1"));
    }

    #[test]
    fn bench_empty_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("d.jsonl");
        fs::write(&data, "").unwrap();
        let script = dir.path().join("s.jsonl");
        fs::write(&script, "").unwrap();
        let (code, out) = run_capture(&["bench", data.to_str().unwrap(), "--script", script.to_str().unwrap()]);
        assert_eq!(code, 0);
        assert_eq!(out.lines().count(), 2);
    }

    #[test]
    fn runtime_failure_exits_two() {
        let dir = tempfile::tempdir().unwrap();
        let script = dir.path().join("s.jsonl");
        fs::write(&script, "").unwrap();
        let (code, _) = run_capture(&["solve", "--paradigm", "direct", "--script", script.to_str().unwrap(), "q"]);
        assert_eq!(code, 2);
    }
}
