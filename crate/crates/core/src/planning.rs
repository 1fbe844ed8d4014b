//! Hierarchical planning: general steps per storey, then typed substeps with
//! pre-generated scripts for everything that needs no visual inspection.
//!
//! Tool shortcuts are not hard-coded: the low-level planner reads them out of
//! the documentation chunks retrieved for the step, so a plan built from the
//! wrong chunks fails with [`PlanError::MissingShortcut`].

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::actions::{normalize_combo, serialize_script, Action, ActionScript};
use crate::canonical::to_canonical;
use crate::design::DesignTask;
use crate::document::ElementKind;
use crate::env::DialogKind;
use crate::floorplan::{FloorplanModel, OpeningKind, StoreySpec, WallKind, WallSpec};
use crate::geometry::{map_to_gui, CanvasGeometry, GeometryError, GuiPoint};
use crate::retrieval::{DocChunk, DocIndex, RetrievalError, DEFAULT_TOP_K};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("task asks for {task} storeys but the floorplan has {plan}")]
    StoreyMismatch { task: u32, plan: usize },
    #[error("no shortcut for the {0} found in the retrieved documentation")]
    MissingShortcut(String),
    #[error("component {0} is not in the floorplan")]
    UnknownComponent(String),
    #[error("storey {0} is not in the floorplan")]
    UnknownStorey(u32),
    #[error("component {id} cannot be placed on screen: {source}")]
    Unmappable { id: String, source: GeometryError },
    #[error("retrieval failed: {0}")]
    Retrieval(String),
}

impl From<RetrievalError> for PlanError {
    fn from(e: RetrievalError) -> Self {
        PlanError::Retrieval(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StepClass {
    Layer,
    ExternalWalls,
    Slab,
    InternalWalls,
    Windows,
    Doors,
    Roof,
}

impl StepClass {
    pub const ALL: [StepClass; 7] = [
        StepClass::Layer,
        StepClass::ExternalWalls,
        StepClass::Slab,
        StepClass::InternalWalls,
        StepClass::Windows,
        StepClass::Doors,
        StepClass::Roof,
    ];

    /// Subject of the manual line `"<subject> shortcut: <combo>"`.
    pub fn shortcut_subject(self) -> &'static str {
        match self {
            StepClass::Layer => "Organization dialog",
            StepClass::ExternalWalls | StepClass::InternalWalls => "Wall tool",
            StepClass::Slab => "Slab tool",
            StepClass::Windows => "Window tool",
            StepClass::Doors => "Door tool",
            StepClass::Roof => "Roof tool",
        }
    }

    /// Documentation query issued before planning a step of this class.
    pub fn query(self) -> &'static str {
        match self {
            StepClass::Layer => "create a design layer in the Organization dialog shortcut",
            StepClass::ExternalWalls | StepClass::InternalWalls => "draw walls with the Wall tool shortcut",
            StepClass::Slab => "create a slab from boundary walls with the Slab tool shortcut",
            StepClass::Windows => "insert a window into a wall with the Window tool shortcut",
            StepClass::Doors => "insert a door into a wall with the Door tool shortcut",
            StepClass::Roof => "create a roof over selected walls with the Roof tool shortcut",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StepClass::Layer => "Layer",
            StepClass::ExternalWalls => "ExternalWalls",
            StepClass::Slab => "Slab",
            StepClass::InternalWalls => "InternalWalls",
            StepClass::Windows => "Windows",
            StepClass::Doors => "Doors",
            StepClass::Roof => "Roof",
        }
    }

    pub fn from_name(s: &str) -> Option<StepClass> {
        StepClass::ALL.into_iter().find(|c| c.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralStep {
    pub index: usize,
    pub class: StepClass,
    /// Storey the step works on; the roof step names the top storey.
    pub storey: u32,
    pub components: Vec<String>,
    pub description: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SubStepKind {
    VisionDriven,
    PureAction,
}

impl SubStepKind {
    pub fn label(self) -> &'static str {
        match self {
            SubStepKind::VisionDriven => "Vision-Driven",
            SubStepKind::PureAction => "Pure-Action",
        }
    }
}

/// Machine-checkable outcome a substep is meant to achieve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SubGoal {
    DialogOpen(DialogKind),
    DialogsClosed,
    LayerCreated {
        name: String,
    },
    LayerElevation {
        name: String,
        elevation: i64,
    },
    FieldValue {
        dialog: DialogKind,
        field: String,
        value: String,
    },
    Wall {
        id: String,
        layer: String,
        start: GuiPoint,
        end: GuiPoint,
    },
    Opening {
        id: String,
        layer: String,
        kind: ElementKind,
        host_start: GuiPoint,
        host_end: GuiPoint,
    },
    Slab {
        id: String,
        layer: String,
        boundary: usize,
    },
    /// `combo` lets a supervisor rebuild the whole roof script on retry.
    Roof {
        layer: String,
        pitch: f64,
        combo: String,
    },
}

impl SubGoal {
    /// Goals that describe GUI state rather than a newly created element;
    /// these are checked before acting.
    pub fn is_state_goal(&self) -> bool {
        matches!(
            self,
            SubGoal::DialogOpen(_)
                | SubGoal::DialogsClosed
                | SubGoal::LayerCreated { .. }
                | SubGoal::LayerElevation { .. }
                | SubGoal::FieldValue { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubStep {
    pub index: usize,
    pub kind: SubStepKind,
    pub class: StepClass,
    pub storey: u32,
    pub description: String,
    pub actions: Option<ActionScript>,
    pub coordinates: Option<Vec<GuiPoint>>,
    #[serde(default)]
    pub goal: Option<SubGoal>,
}

impl SubStep {
    /// Whether the substep satisfies the Pure/Vision action invariant.
    pub fn is_well_formed(&self) -> bool {
        match self.kind {
            SubStepKind::PureAction => self.actions.as_ref().is_some_and(|a| !a.is_empty()),
            SubStepKind::VisionDriven => self.actions.is_none(),
        }
    }
}

/// `"30"` for whole numbers, the shortest decimal otherwise.
pub fn format_number(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

fn storey_name(fp: &FloorplanModel, index: u32) -> Result<&StoreySpec, PlanError> {
    fp.storeys.iter().find(|s| s.index == index).ok_or(PlanError::UnknownStorey(index))
}

/// Split general steps per storey in the fixed workflow order, with one
/// roof step at the end. Empty classes are left out.
pub fn plan_high_level(task: &DesignTask, fp: &FloorplanModel) -> Result<Vec<GeneralStep>, PlanError> {
    if fp.storeys.len() != task.storeys as usize {
        return Err(PlanError::StoreyMismatch { task: task.storeys, plan: fp.storeys.len() });
    }
    let mut steps = Vec::new();
    let mut push = |class: StepClass, storey: u32, components: Vec<String>, description: String| {
        if !components.is_empty() {
            steps.push(GeneralStep { index: steps.len() + 1, class, storey, components, description });
        }
    };
    for s in &fp.storeys {
        let walls = |kind: WallKind| -> Vec<String> {
            fp.storey_walls(s.index).filter(|w| w.kind == kind).map(|w| w.id.clone()).collect()
        };
        let openings = |kind: OpeningKind| -> Vec<String> {
            fp.storey_openings(s.index).into_iter().filter(|o| o.kind == kind).map(|o| o.id.clone()).collect()
        };
        let f = s.index;
        push(
            StepClass::Layer,
            f,
            vec![format!("layer_floor{f}")],
            format!(
                "Create design layer {} with elevation {} mm and wall height {} mm",
                s.name, s.elevation, s.wall_height
            ),
        );
        let external = walls(WallKind::External);
        let has_walls = fp.storey_walls(f).next().is_some();
        push(StepClass::ExternalWalls, f, external, format!("Draw the external walls of {}", s.name));
        push(
            StepClass::Slab,
            f,
            if has_walls { vec![format!("slab_floor{f}")] } else { vec![] },
            format!("Create the floor slab of {} from its external walls", s.name),
        );
        push(StepClass::InternalWalls, f, walls(WallKind::Internal), format!("Draw the internal walls of {}", s.name));
        push(StepClass::Windows, f, openings(OpeningKind::Window), format!("Insert the windows of {}", s.name));
        push(StepClass::Doors, f, openings(OpeningKind::Door), format!("Insert the doors of {}", s.name));
    }
    if let (Some(roof), Some(top)) = (&fp.roof, fp.storeys.last()) {
        push(
            StepClass::Roof,
            top.index,
            vec!["roof".into()],
            format!("Create a {:?} roof with pitch {} degrees over {}", roof.kind, format_number(roof.pitch), top.name),
        );
    }
    Ok(steps)
}

/// Every component id a faithful plan must cover, in plan order.
pub fn plan_components(fp: &FloorplanModel) -> Vec<String> {
    let mut ids = Vec::new();
    for s in &fp.storeys {
        ids.push(format!("layer_floor{}", s.index));
        let walls: Vec<&WallSpec> = fp.storey_walls(s.index).collect();
        ids.extend(walls.iter().map(|w| w.id.clone()));
        if !walls.is_empty() {
            ids.push(format!("slab_floor{}", s.index));
        }
        ids.extend(fp.storey_openings(s.index).into_iter().map(|o| o.id.clone()));
    }
    if fp.roof.is_some() {
        ids.push("roof".into());
    }
    ids
}

/// Read `"<subject> shortcut: <combo>"` out of the chunks, first match wins.
pub fn extract_shortcut(chunks: &[DocChunk], subject: &str) -> Option<String> {
    let needle = format!("{subject} shortcut:");
    chunks.iter().find_map(|c| {
        let at = c.body.find(&needle)?;
        let token = c.body[at + needle.len()..].split_whitespace().next()?;
        normalize_combo(token.trim_end_matches(['.', ',', ';']))
    })
}

/// Retrieve the documentation for a step class.
pub fn retrieve_for(index: &DocIndex, class: StepClass, k: usize) -> Result<Vec<DocChunk>, PlanError> {
    Ok(index.retrieve(class.query(), k)?.into_iter().map(|(c, _)| c.clone()).collect())
}

fn gui(id: &str, p: crate::geometry::ImagePoint, canvas: &CanvasGeometry) -> Result<GuiPoint, PlanError> {
    map_to_gui(p, canvas).map_err(|source| PlanError::Unmappable { id: id.to_string(), source })
}

fn click_at(p: GuiPoint) -> [Action; 2] {
    [Action::MoveMouseTo { x: p.x, y: p.y }, Action::LeftClick]
}

/// Full script that opens the roof dialog, sets the pitch and commits.
pub fn roof_script(combo: &str, pitch: f64) -> ActionScript {
    ActionScript::new(vec![
        Action::SelectAll,
        Action::Shortcut(combo.to_string()),
        Action::SelectAll,
        Action::TypeName(format_number(pitch)),
        Action::PressEnter,
    ])
}

/// Break a general step into substeps. Element steps become Pure-Action
/// scripts; layer and roof steps interleave dialog scripts with
/// Vision-Driven field entry.
pub fn plan_low_level(
    step: &GeneralStep,
    retrieved: &[DocChunk],
    fp: &FloorplanModel,
    canvas: &CanvasGeometry,
) -> Result<Vec<SubStep>, PlanError> {
    let subject = step.class.shortcut_subject();
    let combo = extract_shortcut(retrieved, subject).ok_or_else(|| PlanError::MissingShortcut(subject.to_string()))?;
    let storey = storey_name(fp, step.storey)?;
    let layer = storey.name.clone();
    let mut out: Vec<SubStep> = Vec::new();
    let mut push = |kind: SubStepKind,
                    description: String,
                    actions: Option<Vec<Action>>,
                    coords: Option<Vec<GuiPoint>>,
                    goal: SubGoal| {
        out.push(SubStep {
            index: out.len() + 1,
            kind,
            class: step.class,
            storey: step.storey,
            description,
            actions: actions.map(ActionScript::new),
            coordinates: coords,
            goal: Some(goal),
        });
    };
    let pure = SubStepKind::PureAction;
    let vision = SubStepKind::VisionDriven;

    match step.class {
        StepClass::Layer => {
            push(
                pure,
                "Open the Organization dialog".into(),
                Some(vec![Action::Shortcut(combo)]),
                None,
                SubGoal::DialogOpen(DialogKind::Organization),
            );
            push(
                vision,
                format!("Click New... and name the new design layer {layer}"),
                None,
                None,
                SubGoal::LayerCreated { name: layer.clone() },
            );
            push(
                vision,
                format!("Click Edit... and set the Elevation of {layer} to {}", storey.elevation),
                None,
                None,
                SubGoal::LayerElevation { name: layer.clone(), elevation: storey.elevation },
            );
            push(
                pure,
                "Close the Organization dialog".into(),
                Some(vec![Action::PressEnter]),
                None,
                SubGoal::DialogsClosed,
            );
        }
        StepClass::ExternalWalls | StepClass::InternalWalls => {
            for id in &step.components {
                let w = fp.wall(id).ok_or_else(|| PlanError::UnknownComponent(id.clone()))?;
                let (a, b) = (gui(id, w.start, canvas)?, gui(id, w.end, canvas)?);
                let mut script = vec![Action::Shortcut(combo.clone())];
                script.extend(click_at(a));
                script.extend(click_at(b));
                script.push(Action::PressEnter);
                push(
                    pure,
                    format!("Draw {id} from ({}, {}) to ({}, {})", a.x, a.y, b.x, b.y),
                    Some(script),
                    Some(vec![a, b]),
                    SubGoal::Wall { id: id.clone(), layer: layer.clone(), start: a, end: b },
                );
            }
        }
        StepClass::Windows | StepClass::Doors => {
            for id in &step.components {
                let o =
                    fp.openings.iter().find(|o| &o.id == id).ok_or_else(|| PlanError::UnknownComponent(id.clone()))?;
                let host = fp.wall(&o.host_wall).ok_or_else(|| PlanError::UnknownComponent(o.host_wall.clone()))?;
                let p = gui(id, host.point_at(o.t), canvas)?;
                let (hs, he) = (gui(&host.id, host.start, canvas)?, gui(&host.id, host.end, canvas)?);
                let mut script = vec![Action::Shortcut(combo.clone())];
                script.extend(click_at(p));
                script.push(Action::PressEnter);
                let kind = match o.kind {
                    OpeningKind::Door => ElementKind::Door,
                    OpeningKind::Window => ElementKind::Window,
                };
                push(
                    pure,
                    format!("Insert {id} into {} at ({}, {})", host.id, p.x, p.y),
                    Some(script),
                    Some(vec![p]),
                    SubGoal::Opening { id: id.clone(), layer: layer.clone(), kind, host_start: hs, host_end: he },
                );
            }
        }
        StepClass::Slab => {
            let boundary: Vec<&WallSpec> =
                fp.storey_walls(step.storey).filter(|w| w.kind == WallKind::External).collect();
            let mut script = vec![Action::Shortcut(combo)];
            let mut coords = Vec::new();
            for w in &boundary {
                let m = gui(&w.id, w.point_at(0.5), canvas)?;
                script.extend(click_at(m));
                coords.push(m);
            }
            script.push(Action::PressEnter);
            let id = step.components.first().cloned().unwrap_or_default();
            push(
                pure,
                format!("Pick the {} external walls of {layer} and create the slab", boundary.len()),
                Some(script),
                Some(coords),
                SubGoal::Slab { id, layer: layer.clone(), boundary: boundary.len() },
            );
        }
        StepClass::Roof => {
            let pitch = fp.roof.as_ref().ok_or_else(|| PlanError::UnknownComponent("roof".into()))?.pitch;
            push(
                pure,
                "Select all walls of the top storey and open the Roof dialog".into(),
                Some(vec![Action::SelectAll, Action::Shortcut(combo.clone())]),
                None,
                SubGoal::DialogOpen(DialogKind::RoofParams),
            );
            push(
                vision,
                format!("Set the roof Pitch to {}", format_number(pitch)),
                None,
                None,
                SubGoal::FieldValue {
                    dialog: DialogKind::RoofParams,
                    field: "Pitch".into(),
                    value: format_number(pitch),
                },
            );
            push(
                pure,
                "Confirm the Roof dialog".into(),
                Some(vec![Action::PressEnter]),
                None,
                SubGoal::Roof { layer, pitch, combo },
            );
        }
    }
    Ok(out)
}

/// Plan of the hierarchy-ablated agent: one retrieval for the whole task,
/// one flat substep list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatPlan {
    pub substeps: Vec<SubStep>,
    /// Steps that could not be planned from the single retrieval.
    pub errors: Vec<(StepClass, u32, String)>,
}

/// Without the step hierarchy the planner retrieves documentation once,
/// with the task prose, and only creates the first storey's layer.
pub fn plan_flat(
    task: &DesignTask,
    fp: &FloorplanModel,
    index: &DocIndex,
    canvas: &CanvasGeometry,
) -> Result<FlatPlan, PlanError> {
    let steps = plan_high_level(task, fp)?;
    let retrieved: Vec<DocChunk> =
        index.retrieve(&task.prose, DEFAULT_TOP_K)?.into_iter().map(|(c, _)| c.clone()).collect();
    let first = fp.storeys.first().map(|s| s.index);
    let mut plan = FlatPlan { substeps: Vec::new(), errors: Vec::new() };
    for step in steps.iter().filter(|s| s.class != StepClass::Layer || Some(s.storey) == first) {
        match plan_low_level(step, &retrieved, fp, canvas) {
            Ok(subs) => plan.substeps.extend(subs),
            Err(e) => plan.errors.push((step.class, step.storey, e.to_string())),
        }
    }
    for (i, s) in plan.substeps.iter_mut().enumerate() {
        s.index = i + 1;
    }
    Ok(plan)
}

/// `{"step N": {"class", "component", "description"}}`.
pub fn steps_to_json(steps: &[GeneralStep]) -> Value {
    let mut m = Map::new();
    for s in steps {
        m.insert(
            format!("step {}", s.index),
            json!({ "class": s.class.name(), "component": s.components, "description": s.description }),
        );
    }
    Value::Object(m)
}

/// `{"sub_step_N": {"action_type", "description", "actions"?}}`.
pub fn substeps_to_json(subs: &[SubStep]) -> Value {
    let mut m = Map::new();
    for s in subs {
        let mut o = Map::new();
        o.insert("action_type".into(), json!(s.kind.label()));
        o.insert("description".into(), json!(s.description));
        if let Some(a) = &s.actions {
            o.insert("actions".into(), json!(serialize_script(a)));
        }
        if let Some(c) = &s.coordinates {
            o.insert("coordinates".into(), json!(c.iter().map(|p| [p.x, p.y]).collect::<Vec<_>>()));
        }
        if let Some(g) = &s.goal {
            o.insert("goal".into(), serde_json::to_value(g).expect("goal serializes"));
        }
        m.insert(format!("sub_step_{}", s.index), Value::Object(o));
    }
    Value::Object(m)
}

pub fn plan_to_canonical(steps: &[GeneralStep]) -> Vec<u8> {
    to_canonical(&steps_to_json(steps))
}
