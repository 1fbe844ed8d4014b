//! Deterministic mock BIM-authoring environment: tools, shortcuts, dialogs,
//! undo, object info, seeded fault injection and frame rendering.

mod render;

use std::collections::BTreeSet;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::canonical::{quantize, Fnv64};
use crate::document::{BuildingDocument, Element, ElementKind, Geometry, Layer};
use crate::geometry::{gui_to_doc, point_segment_distance, CanvasGeometry, GuiPoint, MM_PER_GUI_PX};

pub use render::{
    layout, palette, render_frame, text_origin, GuiFrame, Rect, Widget, WidgetRole, BUTTON_H, DIALOG_BORDER,
    DIALOG_BORDER_COLOR, FIELD_H, FIELD_W, LABEL_H,
};

/// Wall pick and opening host tolerance in GUI pixels.
pub const HIT_TOLERANCE_PX: f64 = 6.0;
pub const MAX_DIALOGS: usize = 3;
pub const MAX_UNDO: usize = 64;
/// Text fields hold at most this many characters.
pub const FIELD_CAPACITY: usize = 19;
pub const DEFAULT_WALL_THICKNESS_MM: i64 = 200;
pub const DEFAULT_ROOF_PITCH: &str = "45";

pub const WALL_COMBO: &str = "9";
pub const SLAB_COMBO: &str = "alt+shift+2";
pub const WINDOW_COMBO: &str = "shift+d";
pub const DOOR_COMBO: &str = "alt+shift+d";
pub const ROOF_COMBO: &str = "ctrl+alt+shift+1";
pub const ORGANIZATION_COMBO: &str = "ctrl+shift+o";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tool {
    None,
    Wall,
    Slab,
    Window,
    Door,
    Roof,
}

impl Tool {
    pub fn opening_kind(self) -> Option<ElementKind> {
        match self {
            Tool::Window => Some(ElementKind::Window),
            Tool::Door => Some(ElementKind::Door),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DialogKind {
    Organization,
    LayerEdit,
    RoofParams,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TextField {
    pub caption: String,
    pub value: String,
    /// Set by select-all: the next typed text replaces the value.
    pub replace_pending: bool,
}

impl TextField {
    fn new(caption: &str, value: &str) -> Self {
        TextField { caption: caption.into(), value: value.into(), replace_pending: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dialog {
    pub kind: DialogKind,
    pub fields: Vec<TextField>,
    pub focus: Option<usize>,
    /// Layer edited by a LayerEdit dialog.
    pub target_layer: Option<u32>,
}

impl Dialog {
    fn organization() -> Self {
        Dialog { kind: DialogKind::Organization, fields: vec![], focus: None, target_layer: None }
    }

    fn layer_edit(layer: &Layer, focus: usize) -> Self {
        Dialog {
            kind: DialogKind::LayerEdit,
            fields: vec![
                TextField::new("Name", &layer.name),
                TextField::new("Elevation", &layer.elevation.to_string()),
                TextField::new("Wall Height", &layer.wall_height.to_string()),
            ],
            focus: Some(focus),
            target_layer: Some(layer.index),
        }
    }

    fn roof_params() -> Self {
        Dialog {
            kind: DialogKind::RoofParams,
            fields: vec![TextField::new("Pitch", DEFAULT_ROOF_PITCH)],
            focus: Some(0),
            target_layer: None,
        }
    }

    pub fn field(&self, caption: &str) -> Option<&TextField> {
        self.fields.iter().find(|f| f.caption == caption)
    }

    pub fn focused_field(&self) -> Option<&TextField> {
        self.focus.and_then(|i| self.fields.get(i))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultConfig {
    pub click_offset_prob: f64,
    pub offset_magnitude: i32,
    pub key_drop_prob: f64,
    pub seed: u64,
}

impl Default for FaultConfig {
    fn default() -> Self {
        FaultConfig { click_offset_prob: 0.0, offset_magnitude: 12, key_drop_prob: 0.0, seed: 0 }
    }
}

impl FaultConfig {
    pub fn is_active(&self) -> bool {
        self.click_offset_prob > 0.0 || self.key_drop_prob > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InputEvent {
    MouseMove(GuiPoint),
    LeftClick,
    KeyText(String),
    KeyEnter,
    KeyEscape,
    KeyCombo(String),
    SelectAll,
}

/// Anomalies raised by events. Faults are recorded alongside so the
/// supervisor can attribute failures to perturbed input.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EnvFlag {
    UnknownShortcut(String),
    ShortcutBlocked(String),
    NoHostWall,
    NoWallPicked,
    SlabBoundaryOpen,
    NoSelection,
    ClickOutsideDialog,
    InvalidField(String),
    IncompleteWall,
    DegenerateWall,
    NoFocusedField,
    TextTruncated,
    DialogLimit,
    FaultClickOffset { dx: i32, dy: i32 },
    FaultKeyDropped,
}

impl EnvFlag {
    pub fn is_fault(&self) -> bool {
        matches!(self, EnvFlag::FaultClickOffset { .. } | EnvFlag::FaultKeyDropped)
    }
}

/// Metadata of the most recently created element, as the info panel shows it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectInfo {
    pub id: u64,
    pub kind: ElementKind,
    pub layer: u32,
    pub layer_name: String,
    pub geometry: Geometry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Snapshot {
    document: BuildingDocument,
    active_layer: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StagedOpening {
    host: u64,
    t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub canvas: CanvasGeometry,
    pub active_tool: Tool,
    pub dialog_stack: Vec<Dialog>,
    /// Pending canvas clicks of the wall tool.
    pub click_buffer: Vec<GuiPoint>,
    /// Walls picked by the slab tool.
    pub slab_picks: Vec<u64>,
    staged: Vec<StagedOpening>,
    pub cursor: GuiPoint,
    pub active_layer: u32,
    pub document: BuildingDocument,
    pub selection: BTreeSet<u64>,
    undo_stack: Vec<Snapshot>,
    pub fault: FaultConfig,
    /// Event indices whose click is forced off-target (test hook).
    pub forced_offsets: BTreeSet<u64>,
    rng: ChaCha8Rng,
    rng_draws: u64,
    pub step_counter: u64,
    pub flags: Vec<EnvFlag>,
}

/// Start a session on an empty document with the default layer.
pub fn new_session(canvas: CanvasGeometry, fault: FaultConfig) -> EnvState {
    EnvState {
        canvas,
        active_tool: Tool::None,
        dialog_stack: Vec::new(),
        click_buffer: Vec::new(),
        slab_picks: Vec::new(),
        staged: Vec::new(),
        cursor: GuiPoint::new(0, 0),
        active_layer: 1,
        document: BuildingDocument::default(),
        selection: BTreeSet::new(),
        undo_stack: Vec::new(),
        fault,
        forced_offsets: BTreeSet::new(),
        rng: ChaCha8Rng::seed_from_u64(fault.seed),
        rng_draws: 0,
        step_counter: 0,
        flags: Vec::new(),
    }
}

fn doc_to_gui(p: [i64; 2]) -> (f64, f64) {
    (p[0] as f64 / MM_PER_GUI_PX, p[1] as f64 / MM_PER_GUI_PX)
}

impl EnvState {
    pub fn undo_depth(&self) -> usize {
        self.undo_stack.len()
    }

    pub fn rng_draws(&self) -> u64 {
        self.rng_draws
    }

    pub fn top_dialog(&self) -> Option<&Dialog> {
        self.dialog_stack.last()
    }

    pub fn active_layer(&self) -> &Layer {
        self.document.layer(self.active_layer).expect("active layer exists")
    }

    fn flag(&mut self, f: EnvFlag) {
        self.flags.push(f);
    }

    fn snapshot(&mut self) {
        if self.undo_stack.len() == MAX_UNDO {
            self.undo_stack.remove(0);
        }
        self.undo_stack.push(Snapshot { document: self.document.clone(), active_layer: self.active_layer });
    }

    fn next_id(&self) -> u64 {
        self.document.elements.iter().map(|e| e.id).max().unwrap_or(0) + 1
    }

    fn push_element(&mut self, kind: ElementKind, geometry: Geometry) -> u64 {
        self.snapshot();
        let id = self.next_id();
        self.document.elements.push(Element { id, kind, layer: self.active_layer, geometry });
        id
    }

    /// Wall on the active layer nearest to a GUI point, within tolerance.
    fn wall_near(&self, q: GuiPoint) -> Option<(u64, f64)> {
        let p = gui_to_doc(q, &self.canvas);
        let p = (p.0 as f64 / MM_PER_GUI_PX, p.1 as f64 / MM_PER_GUI_PX);
        self.document
            .elements
            .iter()
            .filter(|e| e.layer == self.active_layer)
            .filter_map(|e| {
                let (a, b) = e.wall_endpoints()?;
                let (d, t) = point_segment_distance(p, doc_to_gui(a), doc_to_gui(b));
                (d <= HIT_TOLERANCE_PX).then_some((e.id, d, t))
            })
            .min_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)))
            .map(|(id, _, t)| (id, t))
    }

    /// Advance the fault generator once for this event, if faults are live.
    fn draw(&mut self) -> Option<u64> {
        if !self.fault.is_active() {
            return None;
        }
        self.rng_draws += 1;
        Some(self.rng.next_u64())
    }

    /// Apply one input event. Never fails; anomalies become flags.
    pub fn apply_event(&mut self, ev: &InputEvent) {
        let index = self.step_counter;
        self.step_counter += 1;
        let draw = self.draw();
        let u = draw.map(|d| (d >> 11) as f64 / (1u64 << 53) as f64);
        match ev {
            InputEvent::MouseMove(p) => self.cursor = *p,
            InputEvent::LeftClick => {
                let mut at = self.cursor;
                let forced = self.forced_offsets.contains(&index);
                if forced || u.is_some_and(|u| u < self.fault.click_offset_prob) {
                    let bits = draw.unwrap_or(index);
                    let m = self.fault.offset_magnitude;
                    let s = if bits & 2 == 0 { m } else { -m };
                    let (dx, dy) = if bits & 1 == 0 { (s, 0) } else { (0, s) };
                    at = GuiPoint::new(at.x + dx, at.y + dy);
                    self.flag(EnvFlag::FaultClickOffset { dx, dy });
                }
                self.click(at);
            }
            InputEvent::KeyText(text) => {
                if u.is_some_and(|u| u < self.fault.key_drop_prob) {
                    self.flag(EnvFlag::FaultKeyDropped);
                } else {
                    self.type_text(text);
                }
            }
            InputEvent::KeyEnter => self.enter(),
            InputEvent::KeyEscape => self.escape(),
            InputEvent::KeyCombo(combo) => self.combo(combo),
            InputEvent::SelectAll => self.select_all(),
        }
    }

    fn combo(&mut self, combo: &str) {
        let known = [WALL_COMBO, SLAB_COMBO, WINDOW_COMBO, DOOR_COMBO, ROOF_COMBO, ORGANIZATION_COMBO];
        if !known.contains(&combo) {
            self.flag(EnvFlag::UnknownShortcut(combo.to_string()));
            return;
        }
        if !self.dialog_stack.is_empty() {
            self.flag(EnvFlag::ShortcutBlocked(combo.to_string()));
            return;
        }
        match combo {
            WALL_COMBO => self.set_tool(Tool::Wall),
            SLAB_COMBO => self.set_tool(Tool::Slab),
            WINDOW_COMBO => self.set_tool(Tool::Window),
            DOOR_COMBO => self.set_tool(Tool::Door),
            ROOF_COMBO => {
                self.set_tool(Tool::Roof);
                self.open(Dialog::roof_params());
            }
            _ => self.open(Dialog::organization()),
        }
    }

    fn set_tool(&mut self, tool: Tool) {
        self.active_tool = tool;
        self.click_buffer.clear();
        self.slab_picks.clear();
        self.staged.clear();
    }

    fn open(&mut self, d: Dialog) {
        if self.dialog_stack.len() >= MAX_DIALOGS {
            self.flag(EnvFlag::DialogLimit);
            return;
        }
        self.dialog_stack.push(d);
    }

    fn click(&mut self, at: GuiPoint) {
        if let Some(top) = self.dialog_stack.last() {
            let kind = top.kind;
            match layout::hit_dialog(self, kind, at) {
                None => {
                    // Modal: a click outside resets focus to the first field.
                    let top = self.dialog_stack.last_mut().expect("dialog open");
                    if !top.fields.is_empty() {
                        top.focus = Some(0);
                    }
                    self.flag(EnvFlag::ClickOutsideDialog);
                }
                Some(layout::DialogHit::Field(i)) => {
                    let top = self.dialog_stack.last_mut().expect("dialog open");
                    top.focus = Some(i);
                }
                Some(layout::DialogHit::New) => self.new_layer(),
                Some(layout::DialogHit::Edit) => {
                    let layer = self.active_layer().clone();
                    self.open(Dialog::layer_edit(&layer, 1));
                }
                Some(layout::DialogHit::Row(index)) => self.active_layer = index,
                Some(layout::DialogHit::Ok) => self.enter(),
                Some(layout::DialogHit::Inert) => {}
            }
            return;
        }
        if let Some(tool) = layout::hit_toolbar(at) {
            match tool {
                Tool::Roof => self.combo(ROOF_COMBO),
                t => self.set_tool(t),
            }
            return;
        }
        if !self.canvas.contains_gui(&at) {
            return;
        }
        match self.active_tool {
            Tool::Wall => self.click_buffer.push(at),
            Tool::Slab => match self.wall_near(at) {
                Some((id, _)) => {
                    if let Some(i) = self.slab_picks.iter().position(|w| *w == id) {
                        self.slab_picks.remove(i);
                    } else {
                        self.slab_picks.push(id);
                    }
                }
                None => self.flag(EnvFlag::NoWallPicked),
            },
            Tool::Window | Tool::Door => match self.wall_near(at) {
                Some((host, t)) if t > 0.0 && t < 1.0 => self.staged.push(StagedOpening { host, t: quantize(t) }),
                _ => self.flag(EnvFlag::NoHostWall),
            },
            Tool::None | Tool::Roof => {}
        }
    }

    fn new_layer(&mut self) {
        self.snapshot();
        let index = self.document.layers.iter().map(|l| l.index).max().unwrap_or(0) + 1;
        let layer = Layer { index, name: format!("Design Layer-{index}"), elevation: 0, wall_height: 3000 };
        self.document.layers.push(layer.clone());
        self.active_layer = index;
        self.open(Dialog::layer_edit(&layer, 0));
    }

    fn type_text(&mut self, text: &str) {
        let Some(top) = self.dialog_stack.last_mut() else {
            self.flag(EnvFlag::NoFocusedField);
            return;
        };
        let Some(field) = top.focus.and_then(|i| top.fields.get_mut(i)) else {
            self.flag(EnvFlag::NoFocusedField);
            return;
        };
        if field.replace_pending {
            field.value.clear();
            field.replace_pending = false;
        }
        field.value.push_str(text);
        if field.value.chars().count() > FIELD_CAPACITY {
            field.value = field.value.chars().take(FIELD_CAPACITY).collect();
            self.flag(EnvFlag::TextTruncated);
        }
    }

    fn select_all(&mut self) {
        if let Some(top) = self.dialog_stack.last_mut() {
            if let Some(field) = top.focus.and_then(|i| top.fields.get_mut(i)) {
                field.replace_pending = true;
            } else {
                self.flag(EnvFlag::NoFocusedField);
            }
            return;
        }
        let layer = self.active_layer;
        self.selection = self.document.elements.iter().filter(|e| e.layer == layer).map(|e| e.id).collect();
    }

    fn escape(&mut self) {
        if self.dialog_stack.pop().is_some() {
            return;
        }
        self.click_buffer.clear();
        self.slab_picks.clear();
        self.staged.clear();
    }

    fn enter(&mut self) {
        if let Some(top) = self.dialog_stack.last().cloned() {
            self.confirm(top);
            return;
        }
        match self.active_tool {
            Tool::Wall => self.commit_walls(),
            Tool::Slab => self.commit_slab(),
            Tool::Window | Tool::Door => self.commit_openings(),
            Tool::None | Tool::Roof => {}
        }
    }

    fn confirm(&mut self, d: Dialog) {
        match d.kind {
            DialogKind::Organization => {
                self.dialog_stack.pop();
            }
            DialogKind::LayerEdit => {
                let name = d.fields[0].value.clone();
                let elevation = d.fields[1].value.parse::<i64>();
                let height = d.fields[2].value.parse::<i64>();
                let (Ok(elevation), Ok(height)) = (elevation, height) else {
                    self.flag(EnvFlag::InvalidField("numeric field".into()));
                    return;
                };
                if name.is_empty() || height <= 0 {
                    self.flag(EnvFlag::InvalidField(if name.is_empty() { "Name" } else { "Wall Height" }.into()));
                    return;
                }
                self.snapshot();
                let target = d.target_layer.expect("layer edit has a target");
                if let Some(l) = self.document.layers.iter_mut().find(|l| l.index == target) {
                    l.name = name;
                    l.elevation = elevation;
                    l.wall_height = height;
                }
                self.dialog_stack.pop();
            }
            DialogKind::RoofParams => {
                self.dialog_stack.pop();
                let Ok(pitch) = d.fields[0].value.parse::<f64>() else {
                    self.flag(EnvFlag::InvalidField("Pitch".into()));
                    return;
                };
                let walls: Vec<&Element> = self
                    .selection
                    .iter()
                    .filter_map(|id| self.document.element(*id))
                    .filter(|e| e.kind == ElementKind::Wall)
                    .collect();
                if walls.is_empty() {
                    self.flag(EnvFlag::NoSelection);
                    return;
                }
                let mut min = [i64::MAX; 2];
                let mut max = [i64::MIN; 2];
                for (a, b) in walls.iter().filter_map(|w| w.wall_endpoints()) {
                    for p in [a, b] {
                        min = [min[0].min(p[0]), min[1].min(p[1])];
                        max = [max[0].max(p[0]), max[1].max(p[1])];
                    }
                }
                let ids = walls.iter().map(|w| w.id).collect();
                self.push_element(ElementKind::Roof, Geometry::Roof { min, max, pitch: quantize(pitch), walls: ids });
                self.selection.clear();
            }
        }
    }

    fn commit_walls(&mut self) {
        let pts = std::mem::take(&mut self.click_buffer);
        if pts.len() < 2 {
            if !pts.is_empty() {
                self.flag(EnvFlag::IncompleteWall);
            }
            return;
        }
        let height = self.active_layer().wall_height;
        for w in pts.windows(2) {
            let (a, b) = (gui_to_doc(w[0], &self.canvas), gui_to_doc(w[1], &self.canvas));
            if a == b {
                self.flag(EnvFlag::DegenerateWall);
                continue;
            }
            self.push_element(
                ElementKind::Wall,
                Geometry::Wall { start: [a.0, a.1], end: [b.0, b.1], height, thickness: DEFAULT_WALL_THICKNESS_MM },
            );
        }
    }

    fn commit_slab(&mut self) {
        let picks = std::mem::take(&mut self.slab_picks);
        let walls: Vec<([i64; 2], [i64; 2])> =
            picks.iter().filter_map(|id| self.document.element(*id)?.wall_endpoints()).collect();
        match closed_cycle(&walls) {
            Some(outline) => {
                let mut ids = picks;
                ids.sort_unstable();
                self.push_element(ElementKind::Slab, Geometry::Slab { boundary_walls: ids, outline });
            }
            None => self.flag(EnvFlag::SlabBoundaryOpen),
        }
    }

    fn commit_openings(&mut self) {
        let kind = self.active_tool.opening_kind().expect("opening tool");
        let width = if kind == ElementKind::Door { 800 } else { 600 };
        for s in std::mem::take(&mut self.staged) {
            self.push_element(kind, Geometry::Opening { host_wall: s.host, t: s.t, width });
        }
    }

    /// Restore the previous document snapshot; no-op on an empty stack.
    pub fn undo_last(&mut self) {
        if let Some(s) = self.undo_stack.pop() {
            self.document = s.document;
            self.active_layer = s.active_layer;
            let doc = &self.document;
            self.selection.retain(|id| doc.element(*id).is_some());
        }
    }

    pub fn object_info(&self) -> Option<ObjectInfo> {
        let e = self.document.elements.iter().max_by_key(|e| e.id)?;
        Some(ObjectInfo {
            id: e.id,
            kind: e.kind,
            layer: e.layer,
            layer_name: self.document.layer(e.layer).map(|l| l.name.clone()).unwrap_or_default(),
            geometry: e.geometry.clone(),
        })
    }

    pub fn export_document(&self) -> Vec<u8> {
        self.document.to_canonical_json()
    }

    /// Hash of everything that affects the rendered frame. Equal
    /// fingerprints imply equal frames.
    pub fn frame_fingerprint(&self) -> u64 {
        #[derive(Serialize)]
        struct View<'a> {
            document: &'a BuildingDocument,
            active_layer: u32,
            dialogs: &'a [Dialog],
            selection: &'a BTreeSet<u64>,
            clicks: &'a [GuiPoint],
            picks: &'a [u64],
            staged: &'a [StagedOpening],
        }
        let v = View {
            document: &self.document,
            active_layer: self.active_layer,
            dialogs: &self.dialog_stack,
            selection: &self.selection,
            clicks: &self.click_buffer,
            picks: &self.slab_picks,
            staged: &self.staged,
        };
        Fnv64::hash_bytes(&serde_json::to_vec(&v).expect("view serializes"))
    }

    /// Hash of the full state, including fault generator position.
    pub fn state_hash(&self) -> u64 {
        let mut h = self.frame_fingerprint();
        for v in
            [self.step_counter, self.rng_draws, self.cursor.x as u64, self.cursor.y as u64, self.active_tool as u64]
        {
            h = Fnv64::hash_bytes(&[h.to_le_bytes(), v.to_le_bytes()].concat());
        }
        h
    }

    pub fn render(&self) -> GuiFrame {
        render_frame(self)
    }
}

/// Outline of a single closed cycle formed by the walls, if they form one:
/// connected, every vertex of degree two, at least three edges.
pub fn closed_cycle(walls: &[([i64; 2], [i64; 2])]) -> Option<Vec<[i64; 2]>> {
    if walls.len() < 3 {
        return None;
    }
    let mut degree = std::collections::BTreeMap::<[i64; 2], usize>::new();
    for (a, b) in walls {
        if a == b {
            return None;
        }
        *degree.entry(*a).or_default() += 1;
        *degree.entry(*b).or_default() += 1;
    }
    if degree.values().any(|d| *d != 2) {
        return None;
    }
    let mut used = vec![false; walls.len()];
    let start = walls[0].0;
    let mut outline = vec![start];
    let mut cur = walls[0].1;
    used[0] = true;
    while cur != start {
        outline.push(cur);
        let next = walls.iter().enumerate().find(|(i, (a, b))| !used[*i] && (*a == cur || *b == cur))?;
        used[next.0] = true;
        cur = if next.1 .0 == cur { next.1 .1 } else { next.1 .0 };
    }
    used.iter().all(|u| *u).then_some(outline)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env() -> EnvState {
        new_session(CanvasGeometry::default(), FaultConfig::default())
    }

    fn run(e: &mut EnvState, evs: &[InputEvent]) {
        for ev in evs {
            e.apply_event(ev);
        }
    }

    fn click(x: i32, y: i32) -> [InputEvent; 2] {
        [InputEvent::MouseMove(GuiPoint::new(x, y)), InputEvent::LeftClick]
    }

    fn wall(e: &mut EnvState, a: (i32, i32), b: (i32, i32)) {
        e.apply_event(&InputEvent::KeyCombo("9".into()));
        run(e, &click(a.0, a.1));
        run(e, &click(b.0, b.1));
        e.apply_event(&InputEvent::KeyEnter);
    }

    #[test]
    fn default_session() {
        let e = env();
        assert_eq!(e.document.layers.len(), 1);
        assert_eq!(e.document.census().total_elements(), 0);
        assert_eq!(e.active_tool, Tool::None);
        assert_eq!(new_session(CanvasGeometry::default(), FaultConfig::default()).state_hash(), e.state_hash());
    }

    #[test]
    fn wall_tool_creates_wall_in_document_mm() {
        let mut e = env();
        wall(&mut e, (660, 490), (816, 490));
        let c = e.document.census();
        assert_eq!(c.count(ElementKind::Wall), 1);
        assert_eq!(c.total_elements(), 1);
        let w = &e.document.elements[0];
        assert_eq!(w.wall_endpoints(), Some(([5000, 4100], [6560, 4100])));
        assert_eq!(e.object_info().unwrap().kind, ElementKind::Wall);
    }

    #[test]
    fn escape_with_empty_buffer_only_counts() {
        let mut e = env();
        let before = e.clone();
        e.apply_event(&InputEvent::KeyEscape);
        assert_eq!(e.step_counter, 1);
        e.step_counter = 0;
        assert_eq!(e, before);
    }

    fn square(e: &mut EnvState) {
        wall(e, (300, 200), (500, 200));
        wall(e, (500, 200), (500, 400));
        wall(e, (500, 400), (300, 400));
        wall(e, (300, 400), (300, 200));
    }

    #[test]
    fn slab_needs_closed_boundary() {
        let mut e = env();
        square(&mut e);
        e.apply_event(&InputEvent::KeyCombo("alt+shift+2".into()));
        run(&mut e, &click(400, 200));
        run(&mut e, &click(400, 200));
        e.apply_event(&InputEvent::KeyEnter);
        assert_eq!(e.document.census().count(ElementKind::Slab), 0);
        assert_eq!(e.flags.last(), Some(&EnvFlag::SlabBoundaryOpen));

        for (x, y) in [(400, 200), (500, 300), (400, 400), (300, 300)] {
            run(&mut e, &click(x, y));
        }
        e.apply_event(&InputEvent::KeyEnter);
        assert_eq!(e.document.census().count(ElementKind::Slab), 1);
    }

    #[test]
    fn openings_need_a_host() {
        let mut e = env();
        square(&mut e);
        e.apply_event(&InputEvent::KeyCombo("alt+shift+d".into()));
        run(&mut e, &click(400, 300));
        assert_eq!(e.flags.last(), Some(&EnvFlag::NoHostWall));
        run(&mut e, &click(350, 203));
        e.apply_event(&InputEvent::KeyEnter);
        let info = e.object_info().unwrap();
        assert_eq!(info.kind, ElementKind::Door);
        let Geometry::Opening { host_wall, t, .. } = info.geometry else { panic!() };
        assert_eq!(host_wall, 1);
        assert_eq!(t, 0.25);
    }

    #[test]
    fn undo_restores_snapshots() {
        let mut e = env();
        e.undo_last();
        assert_eq!(e.document, BuildingDocument::default());
        wall(&mut e, (300, 200), (500, 200));
        wall(&mut e, (500, 200), (500, 400));
        e.undo_last();
        assert_eq!(e.document.census().count(ElementKind::Wall), 1);
        e.undo_last();
        assert_eq!(e.document.census().total_elements(), 0);
        assert!(e.object_info().is_none());
    }

    #[test]
    fn undo_stack_is_bounded() {
        let mut e = env();
        for i in 0..70 {
            wall(&mut e, (200 + i, 200), (200 + i, 300));
        }
        assert_eq!(e.undo_depth(), MAX_UNDO);
    }

    #[test]
    fn layer_dialog_flow() {
        let mut e = env();
        e.apply_event(&InputEvent::KeyCombo("ctrl+shift+o".into()));
        assert_eq!(e.top_dialog().unwrap().kind, DialogKind::Organization);
        let new = layout::button_center(DialogKind::Organization, "New...");
        run(&mut e, &click(new.x, new.y));
        assert_eq!(e.top_dialog().unwrap().kind, DialogKind::LayerEdit);
        run(&mut e, &[InputEvent::SelectAll, InputEvent::KeyText("01-Floor".into()), InputEvent::KeyEnter]);
        assert_eq!(e.document.layer(2).unwrap().name, "01-Floor");
        assert_eq!(e.active_layer, 2);
        // Shortcuts are blocked while a dialog is open.
        e.apply_event(&InputEvent::KeyCombo("9".into()));
        assert!(matches!(e.flags.last(), Some(EnvFlag::ShortcutBlocked(_))));
        e.apply_event(&InputEvent::KeyEnter);
        assert!(e.dialog_stack.is_empty());
    }

    #[test]
    fn click_outside_dialog_resets_focus() {
        let mut e = env();
        e.apply_event(&InputEvent::KeyCombo("ctrl+shift+o".into()));
        let edit = layout::button_center(DialogKind::Organization, "Edit...");
        run(&mut e, &click(edit.x, edit.y));
        assert_eq!(e.top_dialog().unwrap().focus, Some(1));
        run(&mut e, &click(1150, 130));
        assert_eq!(e.top_dialog().unwrap().focus, Some(0));
        assert_eq!(e.flags.last(), Some(&EnvFlag::ClickOutsideDialog));
    }

    #[test]
    fn roof_over_selection() {
        let mut e = env();
        e.apply_event(&InputEvent::KeyCombo("ctrl+alt+shift+1".into()));
        e.apply_event(&InputEvent::KeyEnter);
        assert_eq!(e.flags.last(), Some(&EnvFlag::NoSelection));
        square(&mut e);
        run(
            &mut e,
            &[
                InputEvent::SelectAll,
                InputEvent::KeyCombo("ctrl+alt+shift+1".into()),
                InputEvent::SelectAll,
                InputEvent::KeyText("30".into()),
                InputEvent::KeyEnter,
            ],
        );
        let info = e.object_info().unwrap();
        assert_eq!(info.kind, ElementKind::Roof);
        assert_eq!(
            info.geometry,
            Geometry::Roof { min: [1400, 1200], max: [3400, 3200], pitch: 30.0, walls: vec![1, 2, 3, 4] }
        );
    }

    #[test]
    fn unknown_shortcut_flagged() {
        let mut e = env();
        e.apply_event(&InputEvent::KeyCombo("ctrl+q".into()));
        assert_eq!(e.flags, vec![EnvFlag::UnknownShortcut("ctrl+q".into())]);
    }

    #[test]
    fn zero_fault_probabilities_never_draw() {
        let mut e = new_session(CanvasGeometry::default(), FaultConfig { seed: 99, ..FaultConfig::default() });
        square(&mut e);
        assert_eq!(e.rng_draws(), 0);
        let mut f = env();
        square(&mut f);
        assert_eq!(e.document, f.document);
    }

    #[test]
    fn faults_draw_once_per_event_and_are_deterministic() {
        let cfg = FaultConfig { click_offset_prob: 0.5, offset_magnitude: 12, key_drop_prob: 0.5, seed: 7 };
        let mut a = new_session(CanvasGeometry::default(), cfg);
        let mut b = new_session(CanvasGeometry::default(), cfg);
        square(&mut a);
        square(&mut b);
        assert_eq!(a.rng_draws(), a.step_counter);
        assert_eq!(a.state_hash(), b.state_hash());
        assert!(a.flags.iter().any(EnvFlag::is_fault));
    }

    #[test]
    fn forced_offset_moves_click() {
        let mut e = env();
        e.forced_offsets.insert(2);
        wall(&mut e, (300, 200), (500, 200));
        let (a, _) = e.document.elements[0].wall_endpoints().unwrap();
        assert_ne!(a, [1400, 1200]);
        assert!(matches!(e.flags[0], EnvFlag::FaultClickOffset { .. }));
    }

    #[test]
    fn cycle_oracle() {
        let p = |x, y| [x, y];
        let tri = [(p(0, 0), p(10, 0)), (p(10, 0), p(0, 10)), (p(0, 10), p(0, 0))];
        assert!(closed_cycle(&tri).is_some());
        assert!(closed_cycle(&tri[..2]).is_none());
        let two = [tri[0], tri[1], tri[2], (p(50, 50), p(60, 50)), (p(60, 50), p(50, 60)), (p(50, 60), p(50, 50))];
        assert!(closed_cycle(&two).is_none());
    }
}
