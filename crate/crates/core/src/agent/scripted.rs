//! Deterministic decision rules behind the scripted backend: action
//! generation from marks, and the two supervisor checks.

use crate::actions::{Action, ActionScript};
use crate::document::{ElementKind, Geometry};
use crate::env::{layout, DialogKind, EnvFlag, ObjectInfo, Rect, WidgetRole};
use crate::geometry::{gui_to_doc, CanvasGeometry, GuiPoint};
use crate::grounding::{MarkedElement, SetOfMarks};
use crate::planning::{extract_shortcut, format_number, roof_script, StepClass, SubGoal, SubStep};
use crate::retrieval::DocChunk;

use super::Verdict;

/// Output of one action-generation round.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub actions: ActionScript,
    /// Another grounding round is needed once the screen has updated.
    pub more: bool,
    /// The mark the actions click, if any.
    pub chosen: Option<MarkedElement>,
}

fn click(e: &MarkedElement) -> [Action; 2] {
    let (x, y) = e.bbox.center();
    [Action::MoveMouseTo { x, y }, Action::LeftClick]
}

fn has_field(marks: &SetOfMarks, label: &str) -> bool {
    marks.elements.iter().any(|e| e.role == WidgetRole::TextField && e.label == label)
}

/// Close whatever is open and bring the goal's dialog back.
fn reopen(dialog: DialogKind, retrieved: &[DocChunk]) -> Generated {
    let mut actions = vec![Action::PressEscape; crate::env::MAX_DIALOGS];
    let (subject, select) = match dialog {
        DialogKind::RoofParams => (StepClass::Roof.shortcut_subject(), true),
        _ => (StepClass::Layer.shortcut_subject(), false),
    };
    let combo = extract_shortcut(retrieved, subject);
    if let Some(c) = &combo {
        if select {
            actions.push(Action::SelectAll);
        }
        actions.push(Action::Shortcut(c.clone()));
    }
    Generated { actions: ActionScript::new(actions), more: combo.is_some(), chosen: None }
}

fn done(actions: Vec<Action>, chosen: &MarkedElement) -> Generated {
    Generated { actions: ActionScript::new(actions), more: false, chosen: Some(chosen.clone()) }
}

/// Choose actions for a Vision-Driven goal. Targets are found by label; the
/// lowest-numbered mark carrying the label wins.
pub fn generate_actions(goal: &SubGoal, marks: &SetOfMarks, retrieved: &[DocChunk]) -> Generated {
    match goal {
        SubGoal::LayerCreated { name } => match marks.first_labelled("New...") {
            Some(b) => {
                let mut a = click(b).to_vec();
                a.extend([Action::SelectAll, Action::TypeName(name.clone()), Action::PressEnter]);
                done(a, b)
            }
            None => reopen(DialogKind::Organization, retrieved),
        },
        SubGoal::LayerElevation { elevation, .. } => {
            if has_field(marks, "Elevation") {
                let t = marks.first_labelled("Elevation").expect("field present");
                let mut a = click(t).to_vec();
                a.extend([Action::SelectAll, Action::TypeName(elevation.to_string()), Action::PressEnter]);
                done(a, t)
            } else if let Some(b) = marks.first_labelled("Edit...") {
                Generated { actions: ActionScript::new(click(b).to_vec()), more: true, chosen: Some(b.clone()) }
            } else {
                reopen(DialogKind::Organization, retrieved)
            }
        }
        SubGoal::FieldValue { dialog, field, value } => {
            if has_field(marks, field) {
                let t = marks.first_labelled(field).expect("field present");
                let mut a = click(t).to_vec();
                a.extend([Action::SelectAll, Action::TypeName(value.clone())]);
                done(a, t)
            } else {
                reopen(*dialog, retrieved)
            }
        }
        SubGoal::DialogOpen(kind) => {
            let mut g = reopen(*kind, retrieved);
            g.actions.actions.retain(|a| *a != Action::PressEscape);
            g.more = false;
            g
        }
        SubGoal::DialogsClosed => {
            Generated { actions: ActionScript::new(vec![Action::PressEscape]), more: false, chosen: None }
        }
        _ => Generated { actions: ActionScript::default(), more: false, chosen: None },
    }
}

/// Dialogs whose title is visible at its standard position.
fn visible_dialogs(screen: &SetOfMarks) -> Vec<DialogKind> {
    [DialogKind::Organization, DialogKind::LayerEdit, DialogKind::RoofParams]
        .into_iter()
        .filter(|k| {
            let r = layout::dialog_rect(*k);
            screen.elements.iter().any(|e| {
                e.role == WidgetRole::Label
                    && e.label == layout::title(*k)
                    && e.bbox.x0 == r.x0 + 12
                    && e.bbox.y0 == r.y0 + 6
            })
        })
        .collect()
}

/// `(name, elevation)` rows of a visible Organization dialog, top to bottom.
pub fn read_org_rows(screen: &SetOfMarks) -> Option<Vec<(String, String)>> {
    if !visible_dialogs(screen).contains(&DialogKind::Organization) {
        return None;
    }
    let labels = || screen.elements.iter().filter(|e| e.role == WidgetRole::Label && e.bbox.y0 >= layout::ORG_ROW_Y);
    Some(
        labels()
            .filter(|e| e.bbox.x0 == layout::ORG_NAME_X)
            .map(|n| {
                let elev = labels()
                    .find(|e| e.bbox.x0 == layout::ORG_ELEVATION_X && e.bbox.y0 == n.bbox.y0)
                    .map(|e| e.label.clone())
                    .unwrap_or_default();
                (n.label.clone(), elev)
            })
            .collect(),
    )
}

fn inside(r: &Rect, b: &Rect) -> bool {
    b.x0 >= r.x0 && b.y0 >= r.y0 && b.x1 <= r.x1 && b.y1 <= r.y1
}

/// Check a GUI-state goal against a full-screen reading of the frame.
pub fn verify_vision(goal: &SubGoal, screen: &SetOfMarks) -> Verdict {
    let dialogs = visible_dialogs(screen);
    match goal {
        SubGoal::DialogOpen(k) if dialogs.contains(k) => Verdict::success(),
        SubGoal::DialogOpen(k) => Verdict::fail(format!("the {} dialog is not visible", layout::title(*k))),
        SubGoal::DialogsClosed if dialogs.is_empty() => Verdict::success(),
        SubGoal::DialogsClosed => Verdict::fail(format!(
            "dialogs still open: {}",
            dialogs.iter().map(|k| layout::title(*k)).collect::<Vec<_>>().join(", ")
        )),
        SubGoal::LayerCreated { name } => match read_org_rows(screen) {
            None => Verdict::fail(format!("the Organization dialog is not visible, cannot confirm layer {name}")),
            Some(rows) if rows.iter().any(|(n, _)| n == name) => Verdict::success(),
            Some(_) => Verdict::fail(format!("no design layer named {name} is listed")),
        },
        SubGoal::LayerElevation { name, elevation } => {
            let want = elevation.to_string();
            match read_org_rows(screen) {
                None => Verdict::fail(format!(
                    "the Organization dialog is not visible, cannot confirm the elevation of {name}"
                )),
                Some(rows) => match rows.iter().find(|(n, _)| n == name) {
                    Some((_, e)) if *e == want => Verdict::success(),
                    Some((_, e)) => Verdict::fail(format!("layer {name} has Elevation {e}, expected {want}")),
                    None if rows.iter().any(|(n, _)| *n == want) => Verdict::fail(format!(
                        "mismatched field: Name was changed to {want} instead of Elevation; layer {name} is gone"
                    )),
                    None => Verdict::fail(format!("no design layer named {name} is listed")),
                },
            }
        }
        SubGoal::FieldValue { dialog, field, value } => {
            let area = layout::dialog_rect(*dialog);
            match screen
                .elements
                .iter()
                .find(|e| e.role == WidgetRole::TextField && e.label == *field && inside(&area, &e.bbox))
            {
                None => Verdict::fail(format!("the {field} field is not visible")),
                Some(e) if e.value.as_deref() == Some(value.as_str()) => Verdict::success(),
                Some(e) => Verdict::fail(format!(
                    "field {field} holds {:?}, expected {value:?}",
                    e.value.clone().unwrap_or_default()
                )),
            }
        }
        _ => Verdict::fail("the goal concerns a created element, not the screen"),
    }
}

/// What the pure supervisor sees after a scripted substep.
#[derive(Debug, Clone, PartialEq)]
pub struct PureEvidence {
    /// Info panel contents; `None` when nothing exists yet.
    pub info: Option<ObjectInfo>,
    /// Whether the shown object was created by this attempt.
    pub created: bool,
    pub flags: Vec<EnvFlag>,
    /// Endpoints of the shown opening's host wall.
    pub host: Option<([i64; 2], [i64; 2])>,
    pub canvas: CanvasGeometry,
}

fn doc(p: GuiPoint, canvas: &CanvasGeometry) -> [i64; 2] {
    let (x, y) = gui_to_doc(p, canvas);
    [x, y]
}

fn same_segment(a: ([i64; 2], [i64; 2]), b: ([i64; 2], [i64; 2])) -> bool {
    let near = |p: [i64; 2], q: [i64; 2]| {
        (p[0] - q[0]).abs() <= crate::evaluation::ENDPOINT_TOLERANCE_MM
            && (p[1] - q[1]).abs() <= crate::evaluation::ENDPOINT_TOLERANCE_MM
    };
    (near(a.0, b.0) && near(a.1, b.1)) || (near(a.0, b.1) && near(a.1, b.0))
}

fn flag_reason(flags: &[EnvFlag]) -> Option<String> {
    if flags.contains(&EnvFlag::SlabBoundaryOpen) {
        return Some("the picked walls cannot form a closed boundary (open boundary), no slab was created".into());
    }
    if flags.contains(&EnvFlag::NoHostWall) {
        return Some("the click did not land on a host wall".into());
    }
    (!flags.is_empty()).then(|| format!("the application reported {flags:?}"))
}

fn check_element(goal: &SubGoal, ev: &PureEvidence) -> Result<(), String> {
    let info = ev.info.as_ref().filter(|_| ev.created);
    let expect = |kind: ElementKind, layer: &str| -> Result<&ObjectInfo, String> {
        let Some(i) = info else {
            return Err(format!("no {} was created", kind.label().to_lowercase()));
        };
        if i.kind != kind {
            return Err(format!("created a {} instead of a {}", i.kind.label(), kind.label()));
        }
        if i.layer_name != layer {
            return Err(format!("{} was placed on layer {} instead of {layer}", kind.label(), i.layer_name));
        }
        Ok(i)
    };
    match goal {
        SubGoal::Wall { layer, start, end, .. } => {
            let i = expect(ElementKind::Wall, layer)?;
            let want = (doc(*start, &ev.canvas), doc(*end, &ev.canvas));
            match &i.geometry {
                Geometry::Wall { start, end, .. } if same_segment((*start, *end), want) => Ok(()),
                Geometry::Wall { start, end, .. } => {
                    Err(format!("wall runs {start:?}-{end:?} instead of {:?}-{:?}", want.0, want.1))
                }
                _ => Err("unexpected wall geometry".into()),
            }
        }
        SubGoal::Opening { layer, kind, host_start, host_end, .. } => {
            expect(*kind, layer)?;
            let want = (doc(*host_start, &ev.canvas), doc(*host_end, &ev.canvas));
            match ev.host {
                Some(h) if same_segment(h, want) => Ok(()),
                _ => Err(format!("{} is hosted on the wrong wall", kind.label())),
            }
        }
        SubGoal::Slab { layer, boundary, .. } => match &expect(ElementKind::Slab, layer)?.geometry {
            Geometry::Slab { boundary_walls, .. } if boundary_walls.len() == *boundary => Ok(()),
            Geometry::Slab { boundary_walls, .. } => {
                Err(format!("slab uses {} boundary walls instead of {boundary}", boundary_walls.len()))
            }
            _ => Err("unexpected slab geometry".into()),
        },
        SubGoal::Roof { layer, pitch, .. } => match &expect(ElementKind::Roof, layer)?.geometry {
            Geometry::Roof { pitch: p, .. } if p == pitch => Ok(()),
            Geometry::Roof { pitch: p, .. } => {
                Err(format!("roof pitch is {} instead of {}", format_number(*p), format_number(*pitch)))
            }
            _ => Err("unexpected roof geometry".into()),
        },
        _ => Err("the goal concerns the screen, not a created element".into()),
    }
}

/// Check the element a Pure-Action substep created. On failure the verdict
/// carries the script to retry with.
pub fn verify_pure(sub: &SubStep, ev: &PureEvidence) -> Verdict {
    let Some(goal) = &sub.goal else {
        return match flag_reason(&ev.flags) {
            Some(r) => Verdict::fail(r),
            None => Verdict::success(),
        };
    };
    let outcome = match flag_reason(&ev.flags) {
        Some(r) => Err(r),
        None => check_element(goal, ev),
    };
    match outcome {
        Ok(()) => Verdict::success(),
        Err(reason) => {
            let mut v = Verdict::fail(reason);
            v.corrected_actions = match goal {
                SubGoal::Roof { pitch, combo, .. } => Some(roof_script(combo, *pitch)),
                _ => sub.actions.clone(),
            };
            v
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actions::{execute_script, NoHooks};
    use crate::env::{new_session, EnvState, FaultConfig, InputEvent, ORGANIZATION_COMBO};
    use crate::grounding::{build_set_of_marks, MarkScope};
    use crate::retrieval::DocIndex;

    fn env() -> EnvState {
        new_session(CanvasGeometry::default(), FaultConfig::default())
    }

    fn screen(e: &EnvState) -> SetOfMarks {
        build_set_of_marks(&e.render(), MarkScope::FullScreen)
    }

    fn docs() -> Vec<DocChunk> {
        DocIndex::builtin().chunks().to_vec()
    }

    fn run(e: &mut EnvState, g: &Generated) {
        execute_script(&g.actions, e, &mut NoHooks);
    }

    #[test]
    fn create_and_elevate_layer_through_marks() {
        let mut e = env();
        e.apply_event(&InputEvent::KeyCombo(ORGANIZATION_COMBO.into()));
        let goal = SubGoal::LayerCreated { name: "02-Floor".into() };
        assert!(!verify_vision(&goal, &screen(&e)).is_success());
        let g = generate_actions(&goal, &screen(&e), &docs());
        run(&mut e, &g);
        assert!(verify_vision(&goal, &screen(&e)).is_success());

        let goal = SubGoal::LayerElevation { name: "02-Floor".into(), elevation: 3000 };
        let first = generate_actions(&goal, &screen(&e), &docs());
        assert!(first.more);
        run(&mut e, &first);
        // Full-screen marks put the info-panel decoy first.
        let second = generate_actions(&goal, &screen(&e), &docs());
        assert!(second.chosen.as_ref().unwrap().bbox.x0 >= layout::INFO_X);
        run(&mut e, &second);
        let v = verify_vision(&goal, &screen(&e));
        assert!(!v.is_success());
        assert!(v.reasons.contains("Name was changed to 3000"), "{}", v.reasons);
    }

    #[test]
    fn reopen_when_dialog_is_gone() {
        let e = env();
        let g = generate_actions(&SubGoal::LayerCreated { name: "x".into() }, &screen(&e), &docs());
        assert!(g.more);
        assert_eq!(g.actions.actions.last(), Some(&Action::Shortcut(ORGANIZATION_COMBO.into())));
        let g = generate_actions(&SubGoal::LayerCreated { name: "x".into() }, &screen(&e), &[]);
        assert!(!g.more);
    }

    #[test]
    fn dialog_goals() {
        let mut e = env();
        assert!(verify_vision(&SubGoal::DialogsClosed, &screen(&e)).is_success());
        e.apply_event(&InputEvent::KeyCombo(ORGANIZATION_COMBO.into()));
        assert!(verify_vision(&SubGoal::DialogOpen(DialogKind::Organization), &screen(&e)).is_success());
        assert!(!verify_vision(&SubGoal::DialogsClosed, &screen(&e)).is_success());
        assert_eq!(read_org_rows(&screen(&e)).unwrap(), [("Design Layer-1".to_string(), "0".to_string())]);
    }

    #[test]
    fn open_slab_boundary_reason() {
        let sub = SubStep {
            index: 1,
            kind: crate::planning::SubStepKind::PureAction,
            class: StepClass::Slab,
            storey: 1,
            description: String::new(),
            actions: Some(ActionScript::new(vec![Action::PressEnter])),
            coordinates: None,
            goal: Some(SubGoal::Slab { id: "slab_floor1".into(), layer: "01-Floor".into(), boundary: 4 }),
        };
        let ev = PureEvidence {
            info: None,
            created: false,
            flags: vec![EnvFlag::SlabBoundaryOpen],
            host: None,
            canvas: CanvasGeometry::default(),
        };
        let v = verify_pure(&sub, &ev);
        assert!(v.reasons.contains("open boundary"));
        assert_eq!(v.corrected_actions, sub.actions);
    }
}
