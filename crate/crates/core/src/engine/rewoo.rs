//! Plan, work, solve.

use rayon::prelude::*;

use super::{EngineDeps, EngineError, ExecutionRecord, Paradigm, Task, WarningKind};
use crate::accounting::CallKind;
use crate::blueprint::{build_dep_graph, parse_blueprint, EvidenceVarId, PlanStep};
use crate::prompting;
use crate::tools::{invoke, substitute_evidence, EvidenceMap, Invocation, SubstitutionPolicy, ToolError};

/// One planner call, tool calls in dependency order, one solver call.
///
/// Tool failures never abort: they become evidence text. In lenient mode an
/// unusable dependency graph is reported and the steps run in source order.
pub fn run_rewoo(task: &Task, deps: &EngineDeps) -> Result<ExecutionRecord, EngineError> {
    let tools = deps.tools_for(task)?;
    let exemplars = deps.exemplars_for(task)?;
    let mut rec = ExecutionRecord::empty(task, Paradigm::Rewoo);

    let planner_prompt = prompting::compose_planner_prompt(&deps.templates, &tools, exemplars, &task.question)?;
    let (plan_resp, entry) = deps.call(&planner_prompt, CallKind::Planner, &[])?;
    rec.ledger.push(entry);

    let parsed =
        parse_blueprint(&plan_resp.text, deps.options.parse_mode()).map_err(EngineError::PlannerParseFailure)?;
    for w in &parsed.warnings {
        rec.warn(WarningKind::PlannerParse, w.to_string());
    }
    let blueprint = parsed.blueprint;

    let waves: Vec<Vec<EvidenceVarId>> = match build_dep_graph(&blueprint) {
        Ok(graph) if deps.options.parallel_waves => graph.waves(),
        Ok(graph) => graph.topo_order.iter().map(|v| vec![*v]).collect(),
        Err(e) if deps.options.strict => return Err(EngineError::PlannerParseFailure(e)),
        Err(e) => {
            rec.warn(WarningKind::DependencyGraph, format!("{e}; running steps in source order"));
            blueprint.steps.iter().map(|s| vec![s.var]).collect()
        }
    };

    let mut evidence = EvidenceMap::new();
    for wave in waves {
        let steps: Vec<&PlanStep> = wave.iter().filter_map(|v| blueprint.step(*v)).collect();
        let outcomes: Vec<Result<(Invocation, Vec<EvidenceVarId>), EngineError>> = if steps.len() > 1 {
            steps.par_iter().map(|s| work(s, &evidence, deps)).collect()
        } else {
            steps.iter().map(|s| work(s, &evidence, deps)).collect()
        };
        for (step, outcome) in steps.iter().zip(outcomes) {
            let (mut inv, unresolved) = outcome?;
            for var in unresolved {
                rec.warn(
                    WarningKind::UnresolvedReference,
                    format!("{} refers to {var}, which has no evidence", step.var),
                );
            }
            if let Some(err) = &inv.error {
                rec.warn(WarningKind::ToolFailure, format!("{}: {err}", step.var));
            }
            rec.ledger.extend(std::mem::take(&mut inv.ledger));
            // duplicate vars were already rejected or skipped by the parser
            let _ = evidence.insert(step.var, inv.output.clone());
            rec.tool_calls.push(inv);
        }
    }

    let pairs: Vec<(PlanStep, String)> =
        blueprint.steps.iter().map(|s| (s.clone(), evidence.get(s.var).unwrap_or_default().to_string())).collect();
    let solver_prompt = prompting::compose_solver_prompt(&deps.templates, &task.question, &pairs)?;
    let (solve_resp, entry) = deps.call(&solver_prompt, CallKind::Solver, &[])?;
    rec.ledger.push(entry);

    rec.answer = solve_resp.text.trim().to_string();
    if rec.answer.is_empty() {
        rec.warn(WarningKind::EmptyAnswer, "solver returned an empty answer");
    }
    rec.blueprint = Some(blueprint);
    rec.evidence = Some(evidence);
    rec.steps = super::step_count(&rec);
    Ok(rec)
}

/// Substitutes evidence into one step's input and invokes its tool.
fn work(
    step: &PlanStep,
    evidence: &EvidenceMap,
    deps: &EngineDeps,
) -> Result<(Invocation, Vec<EvidenceVarId>), EngineError> {
    let policy = if deps.options.strict { SubstitutionPolicy::Strict } else { SubstitutionPolicy::Lenient };
    let sub = substitute_evidence(&step.tool_input, evidence, policy)?;
    let inv = match invoke(&deps.registry, &deps.injection, &step.tool_name, &sub.text) {
        Ok(inv) => inv,
        Err(ToolError::UnknownTool(name)) if !deps.options.strict => Invocation {
            tool: name.clone(),
            input: sub.text.clone(),
            output: format!("Unknown tool: {name}"),
            injected: false,
            error: Some(format!("unknown tool: {name}")),
            ledger: Vec::new(),
        },
        Err(e) => return Err(e.into()),
    };
    Ok((inv, sub.unresolved))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accounting::Tokenizer;
    use crate::engine::tests::deps_with;
    use crate::model::ScriptedModel;
    use crate::tools::FailureInjection;

    const GSM8K_PLAN: &str = "Plan: Calculate the total amount of money John received from his 4 grandparents.
#E1 = Calculator[50 * 4]
Plan: Calculate the total cost of all the birds.
#E2 = Calculator[20 * (#E1 / 20)]
Plan: Calculate the total number of birds John can buy.
#E3 = Calculator[#E1 / 20]
Plan: Calculate the total number of wings all the birds have.
#E4 = Calculator[#E3 * 2]";

    fn gsm8k_task() -> Task {
        let mut t = Task::new(
            "gsm8k-birds",
            "John decides to buy some birds.  He got 50 dollars from each of his 4 grandparents.  If each bird costs $20, how many wings did all the birds have?",
        );
        t.toolset = vec!["Calculator".into()];
        t
    }

    #[test]
    fn gsm8k_run() {
        let deps = deps_with(ScriptedModel::queue(Tokenizer::Whitespace, [GSM8K_PLAN, "20"]));
        let rec = run_rewoo(&gsm8k_task(), &deps).unwrap();
        assert_eq!(rec.answer, "20");
        assert_eq!(rec.tool_calls.len(), 4);
        assert_eq!(rec.ledger.calls(), 2);
        let outputs: Vec<&str> = rec.tool_calls.iter().map(|c| c.output.as_str()).collect();
        assert_eq!(outputs, ["200", "200.0", "10.0", "20.0"]);
        assert_eq!(rec.tool_calls[1].input, "20 * (200 / 20)");
        assert_eq!(rec.steps, 5);
        assert!(rec.warnings.is_empty());
    }

    #[test]
    fn solver_prompt_carries_plans_and_evidence() {
        let seen = std::sync::Arc::new(std::sync::Mutex::new(Vec::new()));
        let log = seen.clone();
        let model = ScriptedModel::from_fn(Tokenizer::Whitespace, move |req| {
            log.lock().unwrap().push(req.prompt.clone());
            Some(if log.lock().unwrap().len() == 1 { GSM8K_PLAN.to_string() } else { "20".to_string() })
        });
        run_rewoo(&gsm8k_task(), &deps_with(model)).unwrap();
        let prompts = seen.lock().unwrap();
        assert!(prompts[1].contains("Plan: Calculate the total number of wings all the birds have.\nEvidence:\n20.0"));
        assert!(!prompts[1].contains("Calculator["));
    }

    #[test]
    fn zero_step_plan_still_solves() {
        let deps = deps_with(ScriptedModel::queue(Tokenizer::Whitespace, ["I cannot plan this.", "Paris"]));
        let mut task = gsm8k_task();
        task.question = "Capital of France?".into();
        let rec = run_rewoo(&task, &deps).unwrap();
        assert_eq!(rec.answer, "Paris");
        assert_eq!(rec.blueprint.as_ref().unwrap().len(), 0);
        assert_eq!(rec.steps, 1);
        assert_eq!(rec.ledger.calls(), 2);
    }

    #[test]
    fn all_fail_injection() {
        let mut deps = deps_with(ScriptedModel::queue(Tokenizer::Whitespace, [GSM8K_PLAN, "unknown"]));
        deps.injection = FailureInjection::all_fail();
        let rec = run_rewoo(&gsm8k_task(), &deps).unwrap();
        assert_eq!(rec.tool_calls.len(), 4);
        assert!(rec.evidence.unwrap().iter().all(|(_, e)| e == "No evidence found."));
        assert_eq!(rec.answer, "unknown");
    }

    #[test]
    fn parallel_waves_match_sequential() {
        let plan =
            "Plan: a\n#E1 = Calculator[1 + 1]\nPlan: b\n#E2 = Calculator[2 * 3]\nPlan: c\n#E3 = Calculator[#E1 + #E2]";
        let seq =
            run_rewoo(&gsm8k_task(), &deps_with(ScriptedModel::queue(Tokenizer::Whitespace, [plan, "8"]))).unwrap();
        let mut deps = deps_with(ScriptedModel::queue(Tokenizer::Whitespace, [plan, "8"]));
        deps.options.parallel_waves = true;
        let par = run_rewoo(&gsm8k_task(), &deps).unwrap();
        assert_eq!(seq.evidence, par.evidence);
        assert_eq!(par.evidence.unwrap().get(EvidenceVarId::new(3).unwrap()), Some("8"));
        assert_eq!(seq.tool_calls, par.tool_calls);
    }

    #[test]
    fn unknown_tool_lenient_and_strict() {
        let plan = "Plan: look it up\n#E1 = Bing[x]";
        let rec =
            run_rewoo(&gsm8k_task(), &deps_with(ScriptedModel::queue(Tokenizer::Whitespace, [plan, "?"]))).unwrap();
        assert_eq!(rec.evidence.unwrap().get(EvidenceVarId::new(1).unwrap()), Some("Unknown tool: Bing"));
        let mut deps = deps_with(ScriptedModel::queue(Tokenizer::Whitespace, [plan, "?"]));
        deps.options.strict = true;
        assert!(matches!(run_rewoo(&gsm8k_task(), &deps), Err(EngineError::Tool(ToolError::UnknownTool(_)))));
    }

    #[test]
    fn forward_reference_lenient_runs_in_source_order() {
        let plan = "Plan: a\n#E1 = Calculator[#E2 + 1]\nPlan: b\n#E2 = Calculator[2]";
        let rec =
            run_rewoo(&gsm8k_task(), &deps_with(ScriptedModel::queue(Tokenizer::Whitespace, [plan, "?"]))).unwrap();
        let kinds: Vec<_> = rec.warnings.iter().map(|w| w.kind).collect();
        assert!(kinds.contains(&WarningKind::DependencyGraph));
        assert!(kinds.contains(&WarningKind::UnresolvedReference));
        assert_eq!(rec.tool_calls[0].input, "#E2 + 1");

        let mut deps = deps_with(ScriptedModel::queue(Tokenizer::Whitespace, [plan, "?"]));
        deps.options.strict = true;
        assert!(matches!(run_rewoo(&gsm8k_task(), &deps), Err(EngineError::PlannerParseFailure(_))));
    }

    #[test]
    fn record_serialization_round_trips() {
        let deps = deps_with(ScriptedModel::queue(Tokenizer::Whitespace, [GSM8K_PLAN, "20"]));
        let rec = run_rewoo(&gsm8k_task(), &deps).unwrap();
        let json = serde_json::to_string(&rec).unwrap();
        assert_eq!(serde_json::from_str::<ExecutionRecord>(&json).unwrap(), rec);
    }
}
