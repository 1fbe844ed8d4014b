//! Agent-loop behaviour driven step by step through the public API.

use bimpilot::actions::Action;
use bimpilot::agent::{
    run_substep_with_reflection, run_task, AblationConfig, RetryPolicy, RunConfig, RunContext, ScriptedBackend,
    SubstepOutcome,
};
use bimpilot::bench::{aggregate, generate_benchmark};
use bimpilot::canonical::to_canonical;
use bimpilot::design::{synthesize_floorplan, DesignTask, Footprint, Modality};
use bimpilot::document::{BuildingDocument, Census};
use bimpilot::env::{new_session, FaultConfig, InputEvent, ORGANIZATION_COMBO};
use bimpilot::evaluation::evaluate_document;
use bimpilot::floorplan::FloorplanModel;
use bimpilot::planning::{plan_high_level, plan_low_level, retrieve_for, StepClass, SubGoal, SubStep, SubStepKind};
use bimpilot::retrieval::DocIndex;
use proptest::prelude::*;

fn task(footprint: Footprint, storeys: u32, rooms: u32) -> DesignTask {
    DesignTask {
        id: "a".into(),
        modality: Modality::TextOnly,
        footprint,
        storeys,
        rooms,
        modifications: vec![],
        prose: "A house.".into(),
    }
}

struct Driven {
    outcomes: Vec<(StepClass, SubStep, SubstepOutcome)>,
    document: BuildingDocument,
    actions: u64,
}

/// Run every planned substep in order; before substep `target` (counted over
/// the whole plan) force the `click`-th left click of its script off target.
fn drive(t: &DesignTask, fp: &FloorplanModel, cfg: &RunConfig, target: Option<(usize, usize)>) -> Driven {
    let index = DocIndex::builtin();
    let env = new_session(fp.canvas, FaultConfig::default());
    let mut ctx = RunContext::new(env, &ScriptedBackend, cfg, t, fp);
    let mut outcomes = Vec::new();
    let mut n = 0;
    for step in plan_high_level(t, fp).unwrap() {
        ctx.close_dialogs();
        ctx.retrieved = retrieve_for(&index, step.class, cfg.top_k).unwrap();
        let subs = plan_low_level(&step, &ctx.retrieved, fp, &fp.canvas).unwrap();
        let initial = subs.iter().any(|s| s.kind == SubStepKind::VisionDriven).then(|| ctx.env.render());
        for mut sub in subs {
            sub.class = step.class;
            sub.storey = step.storey;
            if let Some((_, click)) = target.filter(|(at, _)| *at == n) {
                let script = &sub.actions.as_ref().unwrap().actions;
                let pos = script.iter().enumerate().filter(|(_, a)| **a == Action::LeftClick).nth(click).unwrap().0;
                ctx.env.forced_offsets.insert(ctx.env.step_counter + pos as u64);
            }
            let out = run_substep_with_reflection(
                &mut ctx,
                &sub,
                &format!("step {} / sub_step_{}", step.index, sub.index),
                initial.as_ref(),
            );
            outcomes.push((step.class, sub, out));
            n += 1;
        }
    }
    Driven { outcomes, document: ctx.env.document.clone(), actions: ctx.actions }
}

fn clicks(sub: &SubStep) -> usize {
    sub.actions.as_ref().map_or(0, |s| s.actions.iter().filter(|a| **a == Action::LeftClick).count())
}

fn rectangle() -> (DesignTask, FloorplanModel) {
    let t = task(Footprint::Rectangle, 1, 3);
    let fp = synthesize_floorplan(&t, 3).unwrap();
    (t, fp)
}

#[test]
fn driving_the_plan_matches_run_task() {
    let (t, fp) = rectangle();
    let d = drive(&t, &fp, &RunConfig::default(), None);
    assert!(d.outcomes.iter().all(|(_, _, o)| o.success && o.events.is_empty()));
    assert!(evaluate_document(&d.document, &fp).all_passed());
    let run = run_task(&t, &fp, &RunConfig::default(), &ScriptedBackend, &DocIndex::builtin()).unwrap();
    assert_eq!(run.document.census(), d.document.census());
}

#[test]
fn satisfied_vision_goal_executes_nothing() {
    let (t, fp) = rectangle();
    let mut env = new_session(fp.canvas, FaultConfig::default());
    env.apply_event(&InputEvent::KeyCombo(ORGANIZATION_COMBO.into()));
    let mut ctx = RunContext::new(env, &ScriptedBackend, &RunConfig::default(), &t, &fp);
    let sub = SubStep {
        index: 1,
        kind: SubStepKind::VisionDriven,
        class: StepClass::Layer,
        storey: 1,
        description: "Check that the Organization dialog is open".into(),
        actions: None,
        coordinates: None,
        goal: Some(SubGoal::DialogOpen(bimpilot::env::DialogKind::Organization)),
    };
    let out = run_substep_with_reflection(&mut ctx, &sub, "s", None);
    assert!(out.success && out.skipped);
    assert_eq!((out.attempts, ctx.actions), (0, 0));
}

#[test]
fn clean_suite_never_retries() {
    let index = DocIndex::builtin();
    for t in generate_benchmark(0).unwrap() {
        let run = run_task(&t.task, &t.ground_truth, &RunConfig::default(), &ScriptedBackend, &index).unwrap();
        assert!(run.report.is_success(), "{}", t.task.id);
        assert_eq!(run.report.retries, 0, "{}", t.task.id);
        assert!(run.report.events.is_empty(), "{}", t.task.id);
        let total: usize = run.document.census().total.values().sum();
        assert_eq!(total, run.document.elements.len());
        assert_eq!(run.document.census(), t.expected_census);
    }
}

#[test]
fn failures_are_partitioned_and_counted() {
    let suite = generate_benchmark(0).unwrap();
    let index = DocIndex::builtin();
    let mut reports = Vec::new();
    for a in ["", "grounding", "supervision", "hierarchy"] {
        let cfg =
            RunConfig { fault_rate: 0.15, ablations: AblationConfig::parse_list(a).unwrap(), ..RunConfig::default() };
        for t in suite.iter().take(8) {
            let r = run_task(&t.task, &t.ground_truth, &cfg, &ScriptedBackend, &index).unwrap().report;
            assert!(r.is_success() || !r.events.is_empty(), "{} {a} failed silently", r.task_id);
            let again = run_task(&t.task, &t.ground_truth, &cfg, &ScriptedBackend, &index).unwrap().report;
            assert_eq!(to_canonical(&r), to_canonical(&again));
            reports.push(r);
        }
    }
    let agg = aggregate(&reports).unwrap();
    for row in &agg.rows {
        let counted: u64 = row.taxonomy.iter().map(|c| c.count).sum();
        let events: usize = reports.iter().filter(|r| r.config.label() == row.config).map(|r| r.events.len()).sum();
        assert_eq!(counted, events as u64, "{}", row.config);
        for c in &row.categories {
            let attempted: u64 =
                reports.iter().filter(|r| r.config.label() == row.config).map(|r| r.tally(c.category).0 as u64).sum();
            assert_eq!(c.attempted, attempted);
        }
    }
}

fn creation_targets(d: &Driven) -> Vec<(usize, usize, StepClass)> {
    d.outcomes
        .iter()
        .enumerate()
        .filter(|(_, (c, s, _))| s.kind == SubStepKind::PureAction && clicks(s) > 0 && *c != StepClass::Layer)
        .flat_map(|(i, (c, s, _))| (0..clicks(s)).map(move |k| (i, k, *c)))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn single_click_fault_is_recovered(pick in any::<prop::sample::Index>(), attempts in 2u32..=4) {
        let (t, fp) = rectangle();
        let clean = drive(&t, &fp, &RunConfig::default(), None);
        let targets = creation_targets(&clean);
        let (at, click, class) = targets[pick.index(targets.len())];
        let policy = RetryPolicy { max_attempts_per_substep: attempts, ..RetryPolicy::default() };

        let cfg = RunConfig { policy, ..RunConfig::default() };
        let faulted = drive(&t, &fp, &cfg, Some((at, click)));
        prop_assert!(faulted.outcomes.iter().all(|(_, _, o)| o.success), "{:?} click {click} not recovered", class);
        // Undo-safety: the retried substep leaves no duplicate behind.
        prop_assert_eq!(faulted.document.census(), clean.document.census());
        prop_assert!(evaluate_document(&faulted.document, &fp).all_passed());
        prop_assert!(faulted.actions >= clean.actions);

        if matches!(class, StepClass::ExternalWalls | StepClass::InternalWalls) {
            let cfg = RunConfig { policy, ablations: AblationConfig::parse_list("supervision").unwrap(), ..RunConfig::default() };
            let blind = drive(&t, &fp, &cfg, Some((at, click)));
            prop_assert!(!blind.outcomes[at].2.success, "unsupervised wall fault went unnoticed");
            prop_assert!(!evaluate_document(&blind.document, &fp).all_passed());
        }
    }
}

#[test]
fn census_of_a_document_counts_every_element() {
    let (t, fp) = rectangle();
    let d = drive(&t, &fp, &RunConfig::default(), None);
    let c: Census = d.document.census();
    assert_eq!(c.total.values().sum::<usize>(), d.document.elements.len());
}
