//! Prompt templates, one per role, with `<Placeholder>` markers.

use std::collections::BTreeMap;

use thiserror::Error;

use super::Role;

pub const PLACEHOLDERS: [&str; 9] = [
    "Task Description",
    "Interpreted Floorplan Metadata",
    "Current General Step",
    "Retrieved Documentation",
    "Current Substep",
    "Marked Elements",
    "Reasons",
    "Executed Actions",
    "Observation",
];

pub type PromptVars = BTreeMap<&'static str, String>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("prompt placeholder <{0}> has no value")]
    Missing(String),
}

const HIGH_LEVEL: &str = r#"You plan the construction of a building model in a BIM authoring application. You receive the design task and the interpreted floorplan. Break the work into general steps that follow the usual modelling workflow.

Task description:
<Task Description>

Floorplan (walls, openings and storeys with coordinates):
<Interpreted Floorplan Metadata>

Rules:
1. Create one design layer per storey; the number of storeys comes from the task description.
2. Every storey has the same layout. Per storey, in order: layer, external walls, slab, internal walls, windows, doors. Finish with a single roof step.
3. Name every component together with its storey, for example wall3_floor2.

Answer with this JSON object only, no other text:
{
    "step 1": {"class": "Layer", "component": "layer_floor1", "description": "..."},
    "step 2": {"class": "ExternalWalls", "component": "wall1_floor1, wall2_floor1", "description": "..."}
}
"#;

const LOW_LEVEL: &str = r#"You turn one general step into executable substeps, using the retrieved documentation of the application.

Current general step:
<Current General Step>

Retrieved documentation:
<Retrieved Documentation>

Floorplan:
<Interpreted Floorplan Metadata>

Substeps come in two kinds:
- Vision-Driven: the actions depend on what is on screen (dialog buttons, input fields). Give no actions.
- Pure-Action: coordinates are known from the floorplan. Give the complete action list.
Available actions: move_mouse_to(x, y), left_click(), type_name(text), press_escape(), press_enter(), shortcut(combo), select_all().

Answer with this JSON object only, no other text:
{
    "sub_step_1": {"action name": "...", "action_type": "Vision-Driven", "description": "..."},
    "sub_step_2": {"action name": "...", "action_type": "Pure-Action", "actions": "['shortcut(combo=\"9\")', 'move_mouse_to(x=.., y=..)', 'left_click()']", "coordinates": [[0, 0]], "description": "..."}
}
"#;

const ACTION_GENERATOR: &str = r#"You generate GUI actions for one substep from a screenshot whose widgets carry numbered marks.

Substep:
<Current Substep>

Marked elements (id, role, bounding box, text):
<Marked Elements>

Supervisor feedback from the previous attempt:
<Reasons>

Click a widget by moving the mouse to the centre of its box. Set "continue" to true when more actions are needed after the screen has updated.

Answer with this JSON object only, no other text:
{
    "action name": "...",
    "actions": "['move_mouse_to(x=.., y=..)', 'left_click()']",
    "continue": false
}
"#;

const SUPERVISOR_VISION: &str = r#"You check whether a substep succeeded by looking at the current screen.

Substep:
<Current Substep>

Executed actions:
<Executed Actions>

Screen contents:
<Observation>

For a dialog that should be open, check it is visible. For text entry, check the right field holds exactly the intended text. If not, explain which field or widget is wrong.

Answer in exactly this format:
approved_value:
success/fail

reasons:
success, or the reason for the failure
"#;

const SUPERVISOR_PURE: &str = r#"You check the element created by a scripted substep against the plan, using the object information panel.

Substep:
<Current Substep>

Executed actions:
<Executed Actions>

Object information and environment messages:
<Observation>

If the created element does not match the substep, fail it and give a corrected action list.

Answer in exactly this format:
approved_value:
success/fail

reasons:
success, or the reason for the failure

actions:
{
    "action name": "...",
    "actions": "['...']"
}
"#;

pub fn template(role: Role) -> &'static str {
    match role {
        Role::HighLevelPlanner => HIGH_LEVEL,
        Role::LowLevelPlanner => LOW_LEVEL,
        Role::ActionGenerator => ACTION_GENERATOR,
        Role::SupervisorVision => SUPERVISOR_VISION,
        Role::SupervisorPure => SUPERVISOR_PURE,
    }
}

/// Substitute every placeholder of the role's template. Substituted values
/// are not rescanned.
pub fn render_prompt(role: Role, vars: &PromptVars) -> Result<String, PromptError> {
    render_text(template(role), vars)
}

pub(crate) fn render_text(text: &str, vars: &PromptVars) -> Result<String, PromptError> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(i) = rest.find('<') {
        out.push_str(&rest[..i]);
        let tail = &rest[i + 1..];
        match PLACEHOLDERS.iter().find(|p| tail.starts_with(*p) && tail[p.len()..].starts_with('>')) {
            Some(p) => {
                out.push_str(vars.get(p).ok_or_else(|| PromptError::Missing(p.to_string()))?);
                rest = &tail[p.len() + 1..];
            }
            None => {
                out.push('<');
                rest = tail;
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}
