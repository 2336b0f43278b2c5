use std::time::Instant;

use crate::client::{text_bindings, ChatMessage, PromptLibrary, Role, TemplateId};
use crate::env::{Action, Observation, Task, World};
use crate::memory::MemoryContext;

use super::parse::{parse_action_output, parse_generated_plan, parse_plan_output, PlanParseError};
use super::ports::{ActorPort, ActorRequest, HistoryItem, MemoryPort, PlannerPort, PlannerRequest};
use super::types::{EpisodeLimits, Plan, Subgoal, Termination, Trajectory, TrajectoryStep};
use super::AgentError;

/// Action grammar shown to the actor.
pub const ACTION_SPACE: &str = "\
Click(element_id) - click the element with this tree index
Type(element_id, \"text\") - replace the contents of an input field
Scroll(up|down, rows) - move the visible window
Select(element_id, \"option\") - choose an option of a dropdown
Stop(\"answer\") - end the episode and report the final answer
ToolInvoke(tool_name, {\"param\": \"value\"}) - call a registered tool";

pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

/// Milliseconds since construction.
pub struct SystemClock(Instant);

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock(Instant::now())
    }
}

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        self.0.elapsed().as_millis() as u64
    }
}

/// Always zero; makes trajectories byte-reproducible.
#[derive(Clone, Copy, Debug, Default)]
pub struct FrozenClock;

impl Clock for FrozenClock {
    fn now_ms(&self) -> u64 {
        0
    }
}

pub struct PlanningInput<'a> {
    pub step_index: usize,
    pub task: &'a Task,
    pub observation: &'a Observation,
    pub memory: &'a MemoryContext,
    pub history: &'a [HistoryItem],
    pub previous_plan: Option<&'a Plan>,
}

fn render_history_observations(history: &[HistoryItem]) -> String {
    if history.is_empty() {
        return "None".into();
    }
    history
        .iter()
        .enumerate()
        .map(|(i, h)| format!("Screenshot {}:\n{}", i + 1, h.observation.render()))
        .collect::<Vec<_>>()
        .join("\n")
}

fn render_history_actions(history: &[HistoryItem]) -> String {
    if history.is_empty() {
        return "None".into();
    }
    history
        .iter()
        .enumerate()
        .map(|(i, h)| format!("{}. {} -> {}", i + 1, h.action, h.note))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn planner_messages(prompts: &PromptLibrary, input: &PlanningInput<'_>) -> Result<Vec<ChatMessage>, AgentError> {
    let memory = input.memory.render_discrete();
    let messages = if input.step_index == 0 || input.previous_plan.is_none() {
        prompts.render(
            TemplateId::PlanGenerate,
            &text_bindings([("QUERY", input.task.instruction.clone()), ("DISCRETE MEMORY", memory)]),
        )?
    } else {
        prompts.render(
            TemplateId::PlanUpdate,
            &text_bindings([
                ("DISCRETE MEMORY", memory),
                ("PLAN", input.previous_plan.map(|p| p.raw.clone()).unwrap_or_default()),
                ("SCREENSHOTS", render_history_observations(input.history)),
                ("ACTIONS", render_history_actions(input.history)),
                ("SCREENSHOT", input.observation.render()),
            ]),
        )?
    };
    Ok(messages)
}

/// Asks the planner for the current plan and subgoal. After
/// `limits.attempts()` unparseable replies the first plan step stands in for
/// a missing subgoal; with no parseable plan at all the step fails.
pub fn plan_step(
    planner: &mut dyn PlannerPort,
    prompts: &PromptLibrary,
    input: &PlanningInput<'_>,
    limits: &EpisodeLimits,
) -> Result<(Plan, Subgoal), AgentError> {
    let messages = planner_messages(prompts, input)?;
    let fresh = input.step_index == 0 || input.previous_plan.is_none();
    let mut salvage: Option<Plan> = None;
    let mut last_err = PlanParseError::MissingPlan;
    for attempt in 0..limits.attempts() {
        let text = planner.propose(&PlannerRequest {
            step_index: input.step_index,
            task: input.task,
            observation: input.observation,
            memory: input.memory,
            history: input.history,
            previous_plan: input.previous_plan,
            messages: &messages,
            attempt,
        })?;
        let parsed = if fresh {
            parse_generated_plan(&text)
        } else {
            parse_plan_output(&text)
        };
        match parsed {
            Ok(ok) => return Ok(ok),
            Err(PlanParseError::MissingSubgoal(plan)) => {
                log::debug!("planner reply without subgoal (attempt {})", attempt + 1);
                salvage = Some(plan);
                last_err = PlanParseError::MissingSubgoal(Plan::from_steps(vec![]));
            }
            Err(e) => last_err = e,
        }
    }
    match salvage {
        Some(plan) => {
            let subgoal = Subgoal::new(plan.steps[0].clone());
            log::warn!("planner never produced a subgoal; using first plan step");
            Ok((plan, subgoal))
        }
        None => Err(AgentError::PlannerOutput(last_err.to_string())),
    }
}

pub fn actor_messages(
    prompts: &PromptLibrary,
    task: &Task,
    plan: &Plan,
    subgoal: &Subgoal,
    observation: &Observation,
) -> Result<Vec<ChatMessage>, AgentError> {
    let mut messages = prompts.render(
        TemplateId::ActionGenerate,
        &text_bindings([
            ("QUERY", task.instruction.clone()),
            ("PLAN", format!("{}\nCurrent subgoal: {}", plan.raw, subgoal.text)),
            ("ACTION_SPACE", ACTION_SPACE.to_string()),
        ]),
    )?;
    let obs = format!("\nCurrent Observation:\n{}\n", observation.render());
    match messages.iter_mut().rfind(|m| m.role == Role::User) {
        Some(user) => user.push_text(&obs),
        None => messages.push(ChatMessage::text(Role::User, obs)),
    }
    Ok(messages)
}

pub fn act_step(
    actor: &mut dyn ActorPort,
    prompts: &PromptLibrary,
    task: &Task,
    plan: &Plan,
    subgoal: &Subgoal,
    observation: &Observation,
    limits: &EpisodeLimits,
) -> Result<Action, AgentError> {
    let messages = actor_messages(prompts, task, plan, subgoal, observation)?;
    let mut last = String::new();
    for attempt in 0..limits.attempts() {
        let text = actor.act(&ActorRequest {
            task,
            plan,
            subgoal,
            observation,
            action_space: ACTION_SPACE,
            messages: &messages,
            attempt,
        })?;
        match parse_action_output(&text) {
            Ok(action) => return Ok(action),
            Err(e) => {
                log::debug!("unparseable actor reply {text:?}: {e}");
                last = format!("{e} in {text:?}");
            }
        }
    }
    Err(AgentError::ActorOutput(last))
}

/// Drives planner, actor and memory through one episode.
pub struct EpisodeRunner<'a> {
    pub prompts: &'a PromptLibrary,
    pub limits: EpisodeLimits,
    pub clock: &'a dyn Clock,
}

impl Default for EpisodeRunner<'static> {
    fn default() -> Self {
        static CLOCK: FrozenClock = FrozenClock;
        EpisodeRunner {
            prompts: PromptLibrary::builtin(),
            limits: EpisodeLimits::default(),
            clock: &CLOCK,
        }
    }
}

impl EpisodeRunner<'_> {
    /// Errors only when the world rejects the task; planner, actor and
    /// memory failures end the episode as a failed trajectory.
    pub fn run(
        &self,
        world: &mut World,
        task: &Task,
        planner: &mut dyn PlannerPort,
        actor: &mut dyn ActorPort,
        memory: &mut dyn MemoryPort,
    ) -> Result<Trajectory, AgentError> {
        let started = self.clock.now_ms();
        let mut observation = world.reset(task)?;
        let mut steps: Vec<TrajectoryStep> = Vec::new();
        let mut history: Vec<HistoryItem> = Vec::new();
        let mut recent_obs: Vec<Observation> = vec![observation.clone()];
        let mut recent_actions: Vec<Action> = Vec::new();
        let mut plan: Option<Plan> = None;
        let mut final_answer = None;
        let mut termination = None;
        let window = self.limits.history_window;

        let mut memory_ctx = match memory.begin(task, &observation) {
            Ok(ctx) => ctx,
            Err(e) => {
                termination = Some(Termination::MemoryError(e.to_string()));
                MemoryContext::empty(crate::memory::DEFAULT_DIM)
            }
        };

        for step_index in 0..self.limits.max_steps {
            if termination.is_some() {
                break;
            }
            let step_start = self.clock.now_ms();
            let hist_from = history.len().saturating_sub(window);
            let planned = plan_step(
                planner,
                self.prompts,
                &PlanningInput {
                    step_index,
                    task,
                    observation: &observation,
                    memory: &memory_ctx,
                    history: &history[hist_from..],
                    previous_plan: plan.as_ref(),
                },
                &self.limits,
            );
            let (new_plan, subgoal) = match planned {
                Ok(p) => p,
                Err(e) => {
                    termination = Some(Termination::PlannerError(e.to_string()));
                    break;
                }
            };
            plan = Some(new_plan.clone());
            let mut record = TrajectoryStep {
                observation: observation.clone(),
                plan: new_plan,
                subgoal,
                action: None,
                note: String::new(),
                result_page: None,
                changed: false,
                memory_update: None,
                wall_ms: 0,
            };
            if record.subgoal.is_stop {
                record.note = "planner yielded STOP".into();
                record.wall_ms = self.clock.now_ms().saturating_sub(step_start);
                steps.push(record);
                termination = Some(Termination::StopSubgoal);
                break;
            }
            let action = match act_step(
                actor,
                self.prompts,
                task,
                &record.plan,
                &record.subgoal,
                &observation,
                &self.limits,
            ) {
                Ok(a) => a,
                Err(e) => {
                    record.note = e.to_string();
                    record.wall_ms = self.clock.now_ms().saturating_sub(step_start);
                    steps.push(record);
                    termination = Some(Termination::ActorError(e.to_string()));
                    break;
                }
            };
            let outcome = world.step(&action)?;
            history.push(HistoryItem {
                observation: observation.clone(),
                action: action.clone(),
                note: outcome.note.clone(),
            });
            recent_actions.push(action.clone());
            recent_obs.push(outcome.observation.clone());
            if recent_obs.len() > window + 1 {
                recent_obs.remove(0);
            }
            if recent_actions.len() > window {
                recent_actions.remove(0);
            }
            record.action = Some(action.clone());
            record.note = outcome.note;
            record.result_page = Some(outcome.observation.page_id.clone());
            record.changed = outcome.changed;
            observation = outcome.observation;

            if outcome.terminal {
                if let Action::Stop { answer } = &action {
                    final_answer = Some(answer.clone());
                }
                termination = Some(Termination::StopAction);
            } else {
                match memory.after_step(task, &recent_obs, &recent_actions, &memory_ctx) {
                    Ok(Some((decision, ctx))) => {
                        record.memory_update = Some(decision);
                        memory_ctx = ctx;
                    }
                    Ok(None) => {}
                    Err(e) => termination = Some(Termination::MemoryError(e.to_string())),
                }
            }
            record.wall_ms = self.clock.now_ms().saturating_sub(step_start);
            steps.push(record);
        }

        let answer = final_answer.as_deref();
        Ok(Trajectory {
            task: task.clone(),
            success: world.check_goal(task, answer),
            goal_met: world.goal_progress(task, answer),
            steps,
            final_answer,
            termination: termination.unwrap_or(Termination::StepLimit),
            total_ms: self.clock.now_ms().saturating_sub(started),
        })
    }
}

/// Runs one episode with the bundled prompts and a wall clock.
pub fn run_episode(
    world: &mut World,
    task: &Task,
    planner: &mut dyn PlannerPort,
    actor: &mut dyn ActorPort,
    memory: &mut dyn MemoryPort,
    limits: EpisodeLimits,
) -> Result<Trajectory, AgentError> {
    let clock = SystemClock::default();
    EpisodeRunner {
        prompts: PromptLibrary::builtin(),
        limits,
        clock: &clock,
    }
    .run(world, task, planner, actor, memory)
}
