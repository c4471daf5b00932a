//! The interleaved thought/action/observation baseline.

use super::{
    parse_react_step, EngineDeps, EngineError, ExecutionRecord, Paradigm, ReactAction, ReactStep, Task, WarningKind,
    INVALID_ACTION,
};
use crate::accounting::CallKind;
use crate::prompting;
use crate::tools::{invoke, ToolError};

/// Stops the model before it invents its own observation.
pub const REACT_STOP: &str = "Observation:";

/// Loops until a `Finish` action or `max_steps` calls. Every call rebuilds
/// the full prompt with all prior steps, and each is a ledger entry.
pub fn run_react(task: &Task, deps: &EngineDeps, max_steps: usize) -> Result<ExecutionRecord, EngineError> {
    let tools = deps.tools_for(task)?;
    let exemplars = deps.exemplars_for(task)?;
    let mut rec = ExecutionRecord::empty(task, Paradigm::React);
    let mut trace: Vec<ReactStep> = Vec::new();
    let mut finished = None;

    for _ in 0..max_steps {
        let prompt = prompting::compose_react_prompt(&deps.templates, &tools, exemplars, &task.question, &trace)?;
        let (resp, entry) = deps.call(&prompt, CallKind::ReactStep, &[REACT_STOP])?;
        rec.ledger.push(entry);

        let mut step = match parse_react_step(&resp.text) {
            Ok(step) => step,
            Err(e @ (EngineError::NoAction | EngineError::MalformedAction(_))) => {
                if deps.options.strict {
                    return Err(e);
                }
                rec.warn(WarningKind::InvalidAction, e.to_string());
                ReactStep {
                    thought: resp.text.trim().to_string(),
                    action: ReactAction::Invalid,
                    observation: INVALID_ACTION.into(),
                }
            }
            Err(e) => return Err(e),
        };

        match &step.action {
            ReactAction::Finish { answer } => {
                finished = Some(answer.clone());
                trace.push(step);
                break;
            }
            ReactAction::Tool { name, input } => match invoke(&deps.registry, &deps.injection, name, input) {
                Ok(mut inv) => {
                    if let Some(err) = &inv.error {
                        rec.warn(WarningKind::ToolFailure, format!("{name}: {err}"));
                    }
                    rec.ledger.extend(std::mem::take(&mut inv.ledger));
                    step.observation = inv.output.clone();
                    rec.tool_calls.push(inv);
                }
                Err(ToolError::UnknownTool(n)) if !deps.options.strict => {
                    rec.warn(WarningKind::UnknownTool, format!("unknown tool: {n}"));
                    step.observation = format!("Unknown tool: {n}");
                }
                Err(e) => return Err(e.into()),
            },
            ReactAction::Invalid => {}
        }
        trace.push(step);
    }

    match finished {
        Some(answer) => rec.answer = answer.trim().to_string(),
        None => rec.warn(WarningKind::StepLimit, format!("no Finish action within {max_steps} steps")),
    }
    rec.react_trace = Some(trace);
    rec.steps = super::step_count(&rec);
    Ok(rec)
}
