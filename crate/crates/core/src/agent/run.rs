//! The agent loop: plan, ground, act, verify, and reflect on failure.

use std::rc::Rc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actions::{execute_script, Action, ActionScript, ExecutionHooks, ExecutionTrace};
use crate::canonical::Fnv64;
use crate::design::{interpret_floorplan, render_sketch, segment_sketch, DesignTask, SegmentSet, TaskError};
use crate::document::{BuildingDocument, Geometry};
use crate::env::{layout, new_session, EnvState, FaultConfig, GuiFrame};
use crate::evaluation::{evaluate_document, Category};
use crate::floorplan::FloorplanModel;
use crate::geometry::CanvasGeometry;
use crate::grounding::{build_set_of_marks, frame_diff, MarkScope, SetOfMarks};
use crate::planning::{plan_flat, retrieve_for, steps_to_json, GeneralStep, SubStep, SubStepKind};
use crate::retrieval::{DocChunk, DocIndex, DEFAULT_TOP_K};

use super::backend::{Backend, Payload};
use super::parse::{parse_action_response, parse_plan_response, parse_supervisor_response, PlanResponse};
use super::prompts::{render_prompt, PromptVars};
use super::scripted::{verify_pure, verify_vision, PureEvidence};
use super::{
    AblationConfig, Approval, BackendConfig, BackendKind, ConfigError, ErrorClass, ErrorEvent, RetryPolicy, Role,
    Verdict,
};

/// Grounding rounds one Vision-Driven attempt may take.
pub const MAX_GROUNDING_ROUNDS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub backend: BackendConfig,
    /// Seeds the fault generator.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub fault_rate: f64,
    #[serde(default)]
    pub ablations: AblationConfig,
    #[serde(default)]
    pub policy: RetryPolicy,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    /// Record prompts, responses and the action log.
    #[serde(default)]
    pub keep_trace: bool,
    #[serde(default)]
    pub budget_secs: Option<f64>,
}

fn default_top_k() -> usize {
    DEFAULT_TOP_K
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            backend: BackendConfig::default(),
            seed: 0,
            fault_rate: 0.0,
            ablations: AblationConfig::NONE,
            policy: RetryPolicy::default(),
            top_k: DEFAULT_TOP_K,
            keep_trace: false,
            budget_secs: None,
        }
    }
}

/// Input perturbation for a nominal fault rate: every click and every typed
/// string is perturbed with probability `rate`.
pub fn fault_for_rate(rate: f64, seed: u64) -> FaultConfig {
    let p = rate.clamp(0.0, 1.0);
    FaultConfig { click_offset_prob: p, key_drop_prob: p, seed, ..FaultConfig::default() }
}

/// Fault stream of one task under a sweep seed, so tasks of one seed see
/// independent perturbations.
pub fn fault_seed(seed: u64, task_id: &str) -> u64 {
    let mut bytes = seed.to_le_bytes().to_vec();
    bytes.extend_from_slice(task_id.as_bytes());
    Fnv64::hash_bytes(&bytes)
}

#[derive(Debug, Error)]
pub enum TaskRunError {
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("top_k must be at least 1")]
    TopK,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub role: Role,
    pub prompt: String,
    pub response: Option<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum LogEntry {
    Action(Action),
    Undo,
}

/// Enough to replay the session frame by frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskTrace {
    pub canvas: CanvasGeometry,
    pub fault: FaultConfig,
    pub log: Vec<LogEntry>,
    pub interactions: Vec<Interaction>,
}

impl TaskTrace {
    /// Environment state after the first `n` log entries.
    pub fn replay(&self, n: usize) -> EnvState {
        let mut env = new_session(self.canvas, self.fault);
        for entry in self.log.iter().take(n) {
            match entry {
                LogEntry::Action(a) => {
                    for ev in a.expand() {
                        env.apply_event(&ev);
                    }
                }
                LogEntry::Undo => env.undo_last(),
            }
        }
        env
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubtaskTally {
    pub category: Category,
    pub attempted: u32,
    pub succeeded: u32,
}

/// Deterministic outcome of one task run; timing lives in [`TaskRun`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub task_id: String,
    pub end_to_end: Approval,
    pub census_match: bool,
    pub subtasks: Vec<SubtaskTally>,
    pub events: Vec<ErrorEvent>,
    pub actions_executed: u64,
    pub retries: u32,
    pub config: ConfigEcho,
}

/// The run settings a report was produced under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub backend: BackendKind,
    pub seed: u64,
    pub ablations: AblationConfig,
    pub fault_rate: f64,
}

impl ConfigEcho {
    pub fn label(&self) -> String {
        self.ablations.label()
    }
}

impl RunReport {
    pub fn is_success(&self) -> bool {
        self.end_to_end == Approval::Success
    }

    pub fn tally(&self, c: Category) -> (u32, u32) {
        self.subtasks.iter().find(|t| t.category == c).map_or((0, 0), |t| (t.attempted, t.succeeded))
    }
}

#[derive(Debug, Clone)]
pub struct TaskRun {
    pub report: RunReport,
    pub document: BuildingDocument,
    pub trace: TaskTrace,
    pub wall_clock_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubstepOutcome {
    pub success: bool,
    /// Already satisfied before acting.
    pub skipped: bool,
    pub attempts: u32,
    pub events: Vec<ErrorEvent>,
}

/// What the agent perceives of the design: raster inputs with axis-aligned
/// footprints go through sketch segmentation, everything else through the
/// exact segments of the design.
pub fn perceive_floorplan(task: &DesignTask, truth: &FloorplanModel) -> Result<FloorplanModel, String> {
    let seg = if task.modality.is_raster() && task.footprint.is_axis_aligned() {
        segment_sketch(&render_sketch(truth))
    } else {
        SegmentSet::from_model(truth)
    };
    interpret_floorplan(&seg, truth.canvas, task.storeys).map_err(|e| e.to_string())
}

/// Per-task agent state shared by all substeps.
pub struct RunContext<'a> {
    pub env: EnvState,
    backend: &'a dyn Backend,
    render: bool,
    keep_trace: bool,
    pub ablations: AblationConfig,
    pub policy: RetryPolicy,
    pub retries_left: u32,
    pub retries: u32,
    pub actions: u64,
    pub log: Vec<LogEntry>,
    pub interactions: Vec<Interaction>,
    pub retrieved: Vec<DocChunk>,
    /// Class of the first substep that failed for good.
    pub root_cause: Option<ErrorClass>,
    screen: Option<(u64, Rc<SetOfMarks>)>,
    task_text: String,
    fp_text: String,
}

/// Flags a click that lands outside the dialog on top while one is open.
#[derive(Default)]
struct GroundingAudit {
    miss: Option<String>,
}

impl ExecutionHooks for GroundingAudit {
    fn before(&mut self, _index: usize, action: &Action, env: &EnvState) {
        if *action != Action::LeftClick || self.miss.is_some() {
            return;
        }
        if let Some(d) = env.top_dialog() {
            let r = layout::dialog_outer(d.kind);
            if !r.contains(env.cursor.x, env.cursor.y) {
                self.miss = Some(format!(
                    "clicked ({}, {}) outside the {} dialog",
                    env.cursor.x,
                    env.cursor.y,
                    layout::title(d.kind)
                ));
            }
        }
    }
}

fn describe(sub: &SubStep) -> String {
    format!("{} ({}): {}", sub.index, sub.kind.label(), sub.description)
}

fn marks_text(m: &SetOfMarks) -> String {
    m.elements
        .iter()
        .map(|e| {
            let v = e.value.as_ref().map(|v| format!(" = {v:?}")).unwrap_or_default();
            format!(
                "[{}] {:?} ({}, {}, {}, {}) {:?}{v}",
                e.mark_id, e.role, e.bbox.x0, e.bbox.y0, e.bbox.x1, e.bbox.y1, e.label
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn docs_text(d: &[DocChunk]) -> String {
    d.iter().map(|c| format!("## {}\n{}", c.heading_path, c.body)).collect::<Vec<_>>().join("\n\n")
}

impl<'a> RunContext<'a> {
    pub fn new(
        env: EnvState,
        backend: &'a dyn Backend,
        config: &RunConfig,
        task: &DesignTask,
        fp: &FloorplanModel,
    ) -> Self {
        let render = backend.reads_prompt() || config.keep_trace;
        RunContext {
            env,
            backend,
            render,
            keep_trace: config.keep_trace,
            ablations: config.ablations,
            policy: config.policy,
            retries_left: config.policy.max_total_retries_per_task,
            retries: 0,
            actions: 0,
            log: Vec::new(),
            interactions: Vec::new(),
            retrieved: Vec::new(),
            root_cause: None,
            screen: None,
            task_text: if render { task.prose.clone() } else { String::new() },
            fp_text: if render { String::from_utf8(fp.to_canonical_json()).expect("utf8") } else { String::new() },
        }
    }

    fn base_vars(&self) -> PromptVars {
        let mut v = PromptVars::new();
        v.insert("Task Description", self.task_text.clone());
        v.insert("Interpreted Floorplan Metadata", self.fp_text.clone());
        v
    }

    fn ask(
        &mut self,
        role: Role,
        extra: impl FnOnce() -> Vec<(&'static str, String)>,
        payload: &Payload<'_>,
    ) -> Result<String, String> {
        let prompt = if self.render {
            let mut vars = self.base_vars();
            vars.extend(extra());
            render_prompt(role, &vars).map_err(|e| e.to_string())?
        } else {
            String::new()
        };
        let r = self.backend.complete(role, &prompt, payload).map_err(|e| e.to_string());
        if self.keep_trace {
            self.interactions.push(Interaction {
                role,
                prompt,
                response: r.as_ref().ok().cloned(),
                error: r.as_ref().err().cloned(),
            });
        }
        r
    }

    fn exec(&mut self, script: &ActionScript, hooks: &mut dyn ExecutionHooks) -> ExecutionTrace {
        let t = execute_script(script, &mut self.env, hooks);
        self.actions += script.len() as u64;
        if self.keep_trace {
            self.log.extend(script.actions.iter().cloned().map(LogEntry::Action));
        }
        t
    }

    fn undo_to(&mut self, before: &BuildingDocument) {
        for _ in 0..crate::env::MAX_UNDO {
            if self.env.document == *before || self.env.undo_depth() == 0 {
                break;
            }
            self.env.undo_last();
            if self.keep_trace {
                self.log.push(LogEntry::Undo);
            }
        }
    }

    /// Full-screen reading of the current frame, cached per frame.
    fn screen(&mut self) -> Rc<SetOfMarks> {
        let fp = self.env.frame_fingerprint();
        if let Some((f, m)) = &self.screen {
            if *f == fp {
                return m.clone();
            }
        }
        let m = Rc::new(build_set_of_marks(&self.env.render(), MarkScope::FullScreen));
        self.screen = Some((fp, m.clone()));
        m
    }

    pub fn close_dialogs(&mut self) {
        let n = self.env.dialog_stack.len();
        if n > 0 {
            self.exec(&ActionScript::new(vec![Action::PressEscape; n]), &mut crate::actions::NoHooks);
        }
    }

    fn evidence(&self, before_max: u64, trace: &ExecutionTrace) -> PureEvidence {
        let info = self.env.object_info();
        let created = info.as_ref().is_some_and(|i| i.id > before_max);
        let host = info.as_ref().and_then(|i| match i.geometry {
            Geometry::Opening { host_wall, .. } => {
                self.env.document.element(host_wall).and_then(|w| w.wall_endpoints())
            }
            _ => None,
        });
        PureEvidence {
            info,
            created,
            flags: trace.flags().filter(|f| !f.is_fault()).cloned().collect(),
            host,
            canvas: self.env.canvas,
        }
    }

    /// Ask the right supervisor about the current state.
    fn supervise(&mut self, sub: &SubStep, ev: Option<&PureEvidence>, executed: &str) -> Result<Verdict, String> {
        let vision = sub.goal.as_ref().is_none_or(|g| g.is_state_goal());
        let resp = if vision {
            let screen = self.screen();
            let extra = || {
                vec![
                    ("Current Substep", describe(sub)),
                    ("Executed Actions", executed.to_string()),
                    ("Observation", marks_text(&screen)),
                ]
            };
            self.ask(Role::SupervisorVision, extra, &Payload::VerifyVision { substep: sub, screen: &screen })?
        } else {
            let ev = ev.ok_or("no evidence for a created element")?;
            let extra = || {
                vec![
                    ("Current Substep", describe(sub)),
                    ("Executed Actions", executed.to_string()),
                    ("Observation", serde_json::to_string(&(&ev.info, &ev.flags)).expect("json")),
                ]
            };
            self.ask(Role::SupervisorPure, extra, &Payload::VerifyPure { substep: sub, evidence: ev })?
        };
        parse_supervisor_response(&resp).map_err(|e| e.to_string())
    }

    /// Ground truth check used when supervision is ablated: the same rules,
    /// never shown to the agent.
    fn audit(&mut self, sub: &SubStep, ev: Option<&PureEvidence>) -> Verdict {
        match (&sub.goal, ev) {
            (Some(g), _) if g.is_state_goal() => verify_vision(g, &self.screen()),
            (_, Some(ev)) => verify_pure(sub, ev),
            _ => Verdict::success(),
        }
    }
}

/// Attribute a failed attempt. Without a mis-grounded click or an input
/// anomaly, the failure either follows from an earlier unrecovered one
/// (a missing layer or host wall) and inherits its class, or the plan
/// itself was wrong.
fn classify(miss: &Option<String>, trace: &ExecutionTrace, root: Option<ErrorClass>) -> ErrorClass {
    if miss.is_some() {
        ErrorClass::Grounding
    } else if trace.flags().next().is_some() {
        ErrorClass::Execution
    } else {
        root.unwrap_or(ErrorClass::Planning)
    }
}

struct Attempt {
    verdict: Result<Verdict, String>,
    class: ErrorClass,
    miss: Option<String>,
}

fn pure_attempt(ctx: &mut RunContext<'_>, sub: &SubStep, script: &ActionScript, supervised: bool) -> Attempt {
    let before_max = ctx.env.document.elements.iter().map(|e| e.id).max().unwrap_or(0);
    let mut audit = GroundingAudit::default();
    let trace = ctx.exec(script, &mut audit);
    let ev = ctx.evidence(before_max, &trace);
    let verdict =
        if supervised { ctx.supervise(sub, Some(&ev), &script.to_string()) } else { Ok(ctx.audit(sub, Some(&ev))) };
    let class = if verdict.is_err() { ErrorClass::Planning } else { classify(&audit.miss, &trace, ctx.root_cause) };
    Attempt { verdict, class, miss: audit.miss }
}

fn vision_attempt(
    ctx: &mut RunContext<'_>,
    sub: &SubStep,
    initial: Option<&GuiFrame>,
    feedback: &str,
    supervised: bool,
) -> Attempt {
    let mut audit = GroundingAudit::default();
    let mut combined = ExecutionTrace::default();
    let mut executed = Vec::new();
    for _ in 0..MAX_GROUNDING_ROUNDS {
        let frame = ctx.env.render();
        let scope = match (ctx.ablations.disable_dynamic_grounding, initial) {
            (false, Some(init)) => {
                frame_diff(init, &frame).ok().flatten().map_or(MarkScope::FullScreen, MarkScope::Region)
            }
            _ => MarkScope::FullScreen,
        };
        let marks = build_set_of_marks(&frame, scope);
        let retrieved = std::mem::take(&mut ctx.retrieved);
        let extra = || {
            vec![
                ("Current Substep", describe(sub)),
                ("Marked Elements", marks_text(&marks)),
                ("Reasons", feedback.to_string()),
            ]
        };
        let resp = ctx.ask(
            Role::ActionGenerator,
            extra,
            &Payload::Actions { substep: sub, marks: &marks, retrieved: &retrieved },
        );
        ctx.retrieved = retrieved;
        let (script, more) = match resp.and_then(|r| parse_action_response(&r).map_err(|e| e.to_string())) {
            Ok(x) => x,
            Err(e) => return Attempt { verdict: Err(e), class: ErrorClass::Planning, miss: None },
        };
        let t = ctx.exec(&script, &mut audit);
        combined.entries.extend(t.entries);
        executed.extend(script.actions);
        if !more {
            break;
        }
    }
    let executed = ActionScript::new(executed).to_string();
    let verdict = if supervised { ctx.supervise(sub, None, &executed) } else { Ok(ctx.audit(sub, None)) };
    let class = if verdict.is_err() { ErrorClass::Planning } else { classify(&audit.miss, &combined, ctx.root_cause) };
    Attempt { verdict, class, miss: audit.miss }
}

/// Run one substep: check state goals first, act, verify, and on a failed
/// verification undo the attempt's document changes and retry with the
/// supervisor's feedback, within the per-substep and per-task limits.
pub fn run_substep_with_reflection(
    ctx: &mut RunContext<'_>,
    sub: &SubStep,
    label: &str,
    initial: Option<&GuiFrame>,
) -> SubstepOutcome {
    let supervised = !ctx.ablations.disable_supervision;
    let state_goal = sub.goal.as_ref().is_some_and(|g| g.is_state_goal());
    if supervised && state_goal {
        if let Ok(v) = ctx.supervise(sub, None, "") {
            if v.is_success() {
                return SubstepOutcome { success: true, skipped: true, attempts: 0, events: Vec::new() };
            }
        }
    }
    let mut events = Vec::new();
    let mut feedback = String::new();
    let mut script = sub.actions.clone();
    let mut attempts = 0;
    loop {
        attempts += 1;
        let before = ctx.env.document.clone();
        let a = match sub.kind {
            SubStepKind::PureAction => {
                let s = script.clone().unwrap_or_default();
                pure_attempt(ctx, sub, &s, supervised)
            }
            SubStepKind::VisionDriven => vision_attempt(ctx, sub, initial, &feedback, supervised),
        };
        let verdict = match a.verdict {
            Ok(v) if v.is_success() => return SubstepOutcome { success: true, skipped: false, attempts, events },
            Ok(v) => v,
            Err(e) => Verdict::fail(format!("unusable response: {e}")),
        };
        let reason = match &a.miss {
            Some(m) => format!("{m}; {}", verdict.reasons),
            None => verdict.reasons.clone(),
        };
        events.push(ErrorEvent { substep: label.to_string(), class: a.class, reason });
        if !supervised || attempts >= ctx.policy.max_attempts_per_substep || ctx.retries_left == 0 {
            ctx.root_cause.get_or_insert(a.class);
            return SubstepOutcome { success: false, skipped: false, attempts, events };
        }
        ctx.retries_left -= 1;
        ctx.retries += 1;
        if !state_goal {
            ctx.undo_to(&before);
        }
        feedback = verdict.reasons.clone();
        if verdict.corrected_actions.is_some() {
            script = verdict.corrected_actions;
        }
    }
}

fn top_storey(fp: &FloorplanModel) -> u32 {
    fp.storeys.iter().map(|s| s.index).max().unwrap_or(1)
}

fn plan_event(label: impl Into<String>, reason: impl Into<String>) -> ErrorEvent {
    ErrorEvent { substep: label.into(), class: ErrorClass::Planning, reason: reason.into() }
}

/// Execute one design task end to end and score the resulting document
/// against `truth`.
pub fn run_task(
    task: &DesignTask,
    truth: &FloorplanModel,
    config: &RunConfig,
    backend: &dyn Backend,
    index: &DocIndex,
) -> Result<TaskRun, TaskRunError> {
    task.validate()?;
    config.policy.validate()?;
    config.backend.validate()?;
    if config.top_k == 0 {
        return Err(TaskRunError::TopK);
    }
    let started = Instant::now();
    let deadline = config.budget_secs.map(|s| started + Duration::from_secs_f64(s));
    let fault = fault_for_rate(config.fault_rate, fault_seed(config.seed, &task.id));
    let env = new_session(truth.canvas, fault);
    let mut events = Vec::new();

    let perceived = perceive_floorplan(task, truth);
    let fp = perceived.as_ref().unwrap_or(truth);
    let mut ctx = RunContext::new(env, backend, config, task, fp);
    match &perceived {
        Err(e) => events.push(plan_event("perception", format!("design could not be interpreted: {e}"))),
        Ok(fp) if config.ablations.disable_hierarchy => run_flat(&mut ctx, task, fp, index, deadline, &mut events),
        Ok(fp) => run_hierarchical(&mut ctx, task, fp, index, config.top_k, deadline, &mut events),
    }

    let eval = evaluate_document(&ctx.env.document, truth);
    let subtasks = Category::ALL
        .into_iter()
        .map(|category| {
            let (attempted, succeeded) = eval.tally(category);
            SubtaskTally { category, attempted, succeeded }
        })
        .collect();
    let report = RunReport {
        task_id: task.id.clone(),
        end_to_end: if eval.all_passed() && eval.census_match { Approval::Success } else { Approval::Fail },
        census_match: eval.census_match,
        subtasks,
        events,
        actions_executed: ctx.actions,
        retries: ctx.retries,
        config: ConfigEcho {
            backend: config.backend.kind,
            seed: config.seed,
            ablations: config.ablations,
            fault_rate: config.fault_rate,
        },
    };
    Ok(TaskRun {
        report,
        document: ctx.env.document.clone(),
        trace: TaskTrace { canvas: truth.canvas, fault, log: ctx.log, interactions: ctx.interactions },
        wall_clock_secs: started.elapsed().as_secs_f64(),
    })
}

fn over_budget(deadline: Option<Instant>, label: &str, events: &mut Vec<ErrorEvent>) -> bool {
    let over = deadline.is_some_and(|d| Instant::now() > d);
    if over {
        events.push(ErrorEvent {
            substep: label.into(),
            class: ErrorClass::Execution,
            reason: "time budget exhausted".into(),
        });
    }
    over
}

fn run_hierarchical(
    ctx: &mut RunContext<'_>,
    task: &DesignTask,
    fp: &FloorplanModel,
    index: &DocIndex,
    top_k: usize,
    deadline: Option<Instant>,
    events: &mut Vec<ErrorEvent>,
) {
    let steps = match ctx
        .ask(Role::HighLevelPlanner, Vec::new, &Payload::HighLevel { task, fp })
        .and_then(|r| parse_plan_response(Role::HighLevelPlanner, &r).map_err(|e| e.to_string()))
    {
        Ok(PlanResponse::Steps(s)) => s,
        Ok(PlanResponse::SubSteps(_)) => unreachable!("high-level parse yields steps"),
        Err(e) => return events.push(plan_event("plan", e)),
    };
    let top = top_storey(fp);
    let steps_text =
        if ctx.render { serde_json::to_string_pretty(&steps_to_json(&steps)).expect("json") } else { String::new() };
    for mut step in steps {
        if step.storey == 0 {
            step.storey = top;
        }
        let label = format!("step {}", step.index);
        if over_budget(deadline, &label, events) {
            return;
        }
        ctx.close_dialogs();
        ctx.retrieved = match retrieve_for(index, step.class, top_k) {
            Ok(r) => r,
            Err(e) => {
                events.push(plan_event(&label, e.to_string()));
                continue;
            }
        };
        let retrieved = std::mem::take(&mut ctx.retrieved);
        let extra = || {
            vec![
                ("Current General Step", format!("{}\n\nFull plan:\n{steps_text}", describe_step(&step))),
                ("Retrieved Documentation", docs_text(&retrieved)),
            ]
        };
        let resp = ctx.ask(
            Role::LowLevelPlanner,
            extra,
            &Payload::LowLevel { step: &step, retrieved: &retrieved, fp, canvas: &fp.canvas },
        );
        ctx.retrieved = retrieved;
        let subs = match resp.and_then(|r| parse_plan_response(Role::LowLevelPlanner, &r).map_err(|e| e.to_string())) {
            Ok(PlanResponse::SubSteps(s)) => s,
            Ok(PlanResponse::Steps(_)) => unreachable!("low-level parse yields substeps"),
            Err(e) => {
                events.push(plan_event(&label, e));
                continue;
            }
        };
        let initial = subs.iter().any(|s| s.kind == SubStepKind::VisionDriven).then(|| ctx.env.render());
        for mut sub in subs {
            sub.class = step.class;
            sub.storey = step.storey;
            let l = format!("{label} / sub_step_{}", sub.index);
            if over_budget(deadline, &l, events) {
                return;
            }
            let out = run_substep_with_reflection(ctx, &sub, &l, initial.as_ref());
            events.extend(out.events);
        }
    }
}

fn describe_step(step: &GeneralStep) -> String {
    format!("step {}: {} [{}] {}", step.index, step.class.name(), step.components.join(", "), step.description)
}

/// Without the hierarchy the whole task is one substep list planned from a
/// single retrieval.
fn run_flat(
    ctx: &mut RunContext<'_>,
    task: &DesignTask,
    fp: &FloorplanModel,
    index: &DocIndex,
    deadline: Option<Instant>,
    events: &mut Vec<ErrorEvent>,
) {
    let plan = match plan_flat(task, fp, index, &fp.canvas) {
        Ok(p) => p,
        Err(e) => return events.push(plan_event("plan", e.to_string())),
    };
    for (class, storey, e) in &plan.errors {
        events.push(plan_event(format!("{} storey {storey}", class.name()), e.clone()));
    }
    let initial = ctx.env.render();
    ctx.retrieved = index
        .retrieve(&task.prose, DEFAULT_TOP_K)
        .map(|r| r.into_iter().map(|(c, _)| c.clone()).collect())
        .unwrap_or_default();
    for sub in &plan.substeps {
        let l = format!("flat / sub_step_{}", sub.index);
        if over_budget(deadline, &l, events) {
            return;
        }
        let out = run_substep_with_reflection(ctx, sub, &l, Some(&initial));
        events.extend(out.events);
    }
}
