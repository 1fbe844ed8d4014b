//! Screen layout and deterministic frame rendering.

use serde::{Deserialize, Serialize};

use super::{Dialog, DialogKind, EnvState, Tool};
use crate::document::{ElementKind, Geometry};
use crate::geometry::{FRAME_HEIGHT, FRAME_WIDTH, MM_PER_GUI_PX};
use crate::raster::{Raster, Rgb, BLACK, CELL_H, CHAR_ADVANCE, WHITE};

pub const DIALOG_BORDER: i32 = 2;
pub const DIALOG_BORDER_COLOR: Rgb = [40, 40, 40];
pub const LABEL_H: i32 = 20;
pub const BUTTON_H: i32 = 28;
pub const FIELD_W: i32 = 240;
pub const FIELD_H: i32 = 22;

const BACKGROUND: Rgb = [212, 212, 212];
const DIALOG_FILL: Rgb = [228, 228, 236];
const INFO_FILL: Rgb = [240, 244, 240];
const BUTTON_FILL: Rgb = [200, 200, 212];
const FIELD_FOCUS_FILL: Rgb = [255, 255, 224];
const FIELD_SELECTED_FILL: Rgb = [200, 220, 255];

const SLAB_FILL: Rgb = [232, 232, 210];
const INACTIVE_WALL: Rgb = [190, 190, 190];
const SELECTED: Rgb = [0, 120, 255];
const PICKED: Rgb = [0, 160, 0];
const DOOR: Rgb = [220, 0, 0];
const WINDOW: Rgb = [0, 0, 220];
const ROOF: Rgb = [150, 90, 40];
const STAGED: Rgb = [255, 140, 0];

/// Border palette; each colour is used by exactly one widget style.
pub mod palette {
    use crate::raster::Rgb;
    pub const RAISED_LIGHT: Rgb = [236, 236, 252];
    pub const RAISED_DARK: Rgb = [72, 72, 96];
    pub const SUNKEN_DARK: Rgb = [80, 64, 64];
    pub const SUNKEN_LIGHT: Rgb = [252, 236, 236];
    pub const CANVAS: Rgb = [96, 96, 128];
    pub const INFO: Rgb = [96, 128, 96];
    pub const LABEL: Rgb = [200, 180, 200];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WidgetRole {
    Button,
    TextField,
    CanvasPanel,
    InfoPanel,
    Label,
}

/// Inclusive pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Rect {
    pub x0: i32,
    pub y0: i32,
    pub x1: i32,
    pub y1: i32,
}

impl Rect {
    pub const fn new(x0: i32, y0: i32, x1: i32, y1: i32) -> Self {
        Rect { x0, y0, x1, y1 }
    }

    pub const fn sized(x: i32, y: i32, w: i32, h: i32) -> Self {
        Rect { x0: x, y0: y, x1: x + w - 1, y1: y + h - 1 }
    }

    pub fn contains(&self, x: i32, y: i32) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    pub fn intersects(&self, o: &Rect) -> bool {
        self.x0 <= o.x1 && o.x0 <= self.x1 && self.y0 <= o.y1 && o.y0 <= self.y1
    }

    pub fn expand(&self, d: i32) -> Rect {
        Rect::new(self.x0 - d, self.y0 - d, self.x1 + d, self.y1 + d)
    }

    pub fn center(&self) -> (i32, i32) {
        ((self.x0 + self.x1) / 2, (self.y0 + self.y1) / 2)
    }

    pub fn width(&self) -> i32 {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> i32 {
        self.y1 - self.y0 + 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Widget {
    pub id: usize,
    pub bbox: Rect,
    pub role: WidgetRole,
    pub label: String,
    pub value: String,
}

#[derive(Clone, PartialEq, Eq)]
pub struct GuiFrame {
    pub width: u32,
    pub height: u32,
    pub raster: Raster,
    pub widgets: Vec<Widget>,
}

impl std::fmt::Debug for GuiFrame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "GuiFrame({}x{}, {} widgets)", self.width, self.height, self.widgets.len())
    }
}

impl GuiFrame {
    pub fn to_ppm(&self) -> Vec<u8> {
        self.raster.to_ppm()
    }

    pub fn hash(&self) -> u64 {
        crate::canonical::Fnv64::hash_bytes(&self.raster.pixels)
    }
}

/// Fixed screen layout and hit testing.
pub mod layout {
    use super::*;
    use crate::geometry::GuiPoint;

    pub const TOOLBAR: [(Tool, &str); 5] = [
        (Tool::Wall, "Wall"),
        (Tool::Slab, "Slab"),
        (Tool::Window, "Window"),
        (Tool::Door, "Door"),
        (Tool::Roof, "Roof"),
    ];
    pub const CANVAS_BOX: Rect = Rect::new(158, 78, 1122, 722);
    pub const INFO_BOX: Rect = Rect::new(1124, 80, 1275, 719);
    pub const INFO_X: i32 = 1130;
    /// Static captions of the info panel, with their rows.
    pub const INFO_DECOYS: [(&str, i32); 3] = [("Name", 96), ("Elevation", 124), ("Wall Height", 152)];
    pub const INFO_KIND_Y: i32 = 208;

    pub const ORG_ROW_Y: i32 = 200;
    pub const ORG_ROW_PITCH: i32 = 22;
    pub const ORG_NAME_X: i32 = 392;
    pub const ORG_ELEVATION_X: i32 = 640;

    pub fn toolbar_button(k: usize) -> Rect {
        Rect::sized(16, 100 + 40 * k as i32, 120, BUTTON_H)
    }

    pub fn label_rect(x: i32, y: i32, text: &str) -> Rect {
        Rect::sized(x, y, CHAR_ADVANCE as i32 * text.chars().count() as i32 + 6, LABEL_H)
    }

    /// Interior of a dialog; the 2-px border lies outside it.
    pub fn dialog_rect(kind: DialogKind) -> Rect {
        match kind {
            DialogKind::Organization => Rect::new(380, 170, 899, 629),
            DialogKind::LayerEdit => Rect::new(420, 300, 859, 499),
            DialogKind::RoofParams => Rect::new(440, 320, 839, 479),
        }
    }

    pub fn dialog_outer(kind: DialogKind) -> Rect {
        dialog_rect(kind).expand(DIALOG_BORDER)
    }

    pub fn title(kind: DialogKind) -> &'static str {
        match kind {
            DialogKind::Organization => "Organization",
            DialogKind::LayerEdit => "Layer",
            DialogKind::RoofParams => "Roof",
        }
    }

    fn buttons(kind: DialogKind) -> Vec<(&'static str, Rect)> {
        match kind {
            DialogKind::Organization => vec![
                ("New...", Rect::sized(400, 588, 100, BUTTON_H)),
                ("Edit...", Rect::sized(520, 588, 100, BUTTON_H)),
                ("OK", Rect::sized(780, 588, 100, BUTTON_H)),
            ],
            DialogKind::LayerEdit => vec![("OK", Rect::sized(740, 460, 100, BUTTON_H))],
            DialogKind::RoofParams => vec![("OK", Rect::sized(720, 440, 100, BUTTON_H))],
        }
    }

    /// Row y and caption x of each text field.
    fn field_rows(kind: DialogKind) -> Vec<(i32, i32)> {
        match kind {
            DialogKind::Organization => vec![],
            DialogKind::LayerEdit => vec![(340, 432), (380, 432), (420, 432)],
            DialogKind::RoofParams => vec![(370, 452)],
        }
    }

    pub const FIELD_X: i32 = 590;

    pub fn button_center(kind: DialogKind, label: &str) -> GuiPoint {
        let (_, r) = buttons(kind).into_iter().find(|(l, _)| *l == label).expect("known button");
        let (x, y) = r.center();
        GuiPoint::new(x, y)
    }

    pub fn field_rect(kind: DialogKind, i: usize) -> Rect {
        let (y, _) = field_rows(kind)[i];
        Rect::sized(FIELD_X, y, FIELD_W, FIELD_H)
    }

    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub enum DialogHit {
        New,
        Edit,
        Ok,
        Field(usize),
        Row(u32),
        Inert,
    }

    /// One drawable item of a dialog together with its click semantics.
    pub(crate) struct Item {
        pub rect: Rect,
        pub role: WidgetRole,
        pub label: String,
        pub value: String,
        pub hit: DialogHit,
        pub focused: bool,
        pub selected: bool,
    }

    pub(crate) fn dialog_items(state: &EnvState, d: &Dialog) -> Vec<Item> {
        let r = dialog_rect(d.kind);
        let mut items = Vec::new();
        let label = |x: i32, y: i32, text: String, hit: DialogHit| Item {
            rect: label_rect(x, y, &text),
            role: WidgetRole::Label,
            label: text,
            value: String::new(),
            hit,
            focused: false,
            selected: false,
        };
        items.push(label(r.x0 + 12, r.y0 + 6, title(d.kind).to_string(), DialogHit::Inert));
        if d.kind == DialogKind::Organization {
            for (k, l) in state.document.layers.iter().enumerate() {
                let y = ORG_ROW_Y + ORG_ROW_PITCH * k as i32;
                if y + LABEL_H > buttons(d.kind)[0].1.y0 {
                    break;
                }
                items.push(label(ORG_NAME_X, y, l.name.clone(), DialogHit::Row(l.index)));
                items.push(label(ORG_ELEVATION_X, y, l.elevation.to_string(), DialogHit::Row(l.index)));
            }
        }
        for (i, ((y, cx), f)) in field_rows(d.kind).into_iter().zip(&d.fields).enumerate() {
            items.push(label(cx, y, f.caption.clone(), DialogHit::Field(i)));
            items.push(Item {
                rect: Rect::sized(FIELD_X, y, FIELD_W, FIELD_H),
                role: WidgetRole::TextField,
                label: f.caption.clone(),
                value: f.value.clone(),
                hit: DialogHit::Field(i),
                focused: d.focus == Some(i),
                selected: f.replace_pending,
            });
        }
        for (text, rect) in buttons(d.kind) {
            let hit = match text {
                "New..." => DialogHit::New,
                "Edit..." => DialogHit::Edit,
                _ => DialogHit::Ok,
            };
            items.push(Item {
                rect,
                role: WidgetRole::Button,
                label: text.to_string(),
                value: String::new(),
                hit,
                focused: false,
                selected: false,
            });
        }
        items
    }

    /// What a click at `at` hits in the top dialog; `None` when outside it.
    pub fn hit_dialog(state: &EnvState, kind: DialogKind, at: GuiPoint) -> Option<DialogHit> {
        if !dialog_outer(kind).contains(at.x, at.y) {
            return None;
        }
        let d = state.dialog_stack.last().expect("dialog open");
        Some(
            dialog_items(state, d)
                .into_iter()
                .find(|i| i.rect.contains(at.x, at.y))
                .map(|i| i.hit)
                .unwrap_or(DialogHit::Inert),
        )
    }

    pub fn hit_toolbar(at: GuiPoint) -> Option<Tool> {
        TOOLBAR.iter().enumerate().find(|(k, _)| toolbar_button(*k).contains(at.x, at.y)).map(|(_, (t, _))| *t)
    }

    pub fn info_label(state: &EnvState) -> Option<&'static str> {
        state.object_info().map(|i| i.kind.label())
    }
}

fn fill(r: &mut Raster, rect: Rect, c: Rgb) {
    r.fill_rect(rect.x0 as i64, rect.y0 as i64, rect.x1 as i64, rect.y1 as i64, c);
}

fn border(r: &mut Raster, rect: Rect, top_left: Rgb, bottom_right: Rgb) {
    let (x0, y0, x1, y1) = (rect.x0 as i64, rect.y0 as i64, rect.x1 as i64, rect.y1 as i64);
    r.fill_rect(x0, y0, x1 - 1, y0, top_left);
    r.fill_rect(x0, y0, x0, y1 - 1, top_left);
    r.fill_rect(x0, y1, x1, y1, bottom_right);
    r.fill_rect(x1, y0, x1, y1, bottom_right);
}

/// Text origin inside a widget box.
pub fn text_origin(rect: &Rect) -> (i32, i32) {
    (rect.x0 + 4, rect.y0 + (rect.height() - CELL_H as i32) / 2)
}

fn draw_widget(r: &mut Raster, rect: Rect, role: WidgetRole, text: &str, fill_color: Rgb) {
    let (tl, br) = match role {
        WidgetRole::Button => (palette::RAISED_LIGHT, palette::RAISED_DARK),
        WidgetRole::TextField => (palette::SUNKEN_DARK, palette::SUNKEN_LIGHT),
        WidgetRole::CanvasPanel => (palette::CANVAS, palette::CANVAS),
        WidgetRole::InfoPanel => (palette::INFO, palette::INFO),
        WidgetRole::Label => (palette::LABEL, palette::LABEL),
    };
    fill(r, Rect::new(rect.x0 + 1, rect.y0 + 1, rect.x1 - 1, rect.y1 - 1), fill_color);
    border(r, rect, tl, br);
    if !text.is_empty() {
        let (x, y) = text_origin(&rect);
        r.draw_text(x as i64, y as i64, text, BLACK);
    }
}

struct Builder {
    raster: Raster,
    widgets: Vec<Widget>,
}

impl Builder {
    fn widget(&mut self, rect: Rect, role: WidgetRole, label: &str, value: &str, fill_color: Rgb) {
        let text = if role == WidgetRole::TextField { value } else { label };
        draw_widget(&mut self.raster, rect, role, text, fill_color);
        self.widgets.push(Widget { id: 0, bbox: rect, role, label: label.into(), value: value.into() });
    }
}

fn to_screen(state: &EnvState, p: [i64; 2]) -> (f64, f64) {
    (
        f64::from(state.canvas.origin_x) + p[0] as f64 / MM_PER_GUI_PX,
        f64::from(state.canvas.origin_y) + p[1] as f64 / MM_PER_GUI_PX,
    )
}

/// Scanline fill of a simple polygon (pixel centres, even-odd rule).
fn fill_polygon(r: &mut Raster, pts: &[(f64, f64)], c: Rgb) {
    if pts.len() < 3 {
        return;
    }
    let ymin = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min).floor() as i64;
    let ymax = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max).ceil() as i64;
    for y in ymin.max(0)..=ymax {
        let yc = y as f64 + 0.5;
        let mut xs = Vec::new();
        for i in 0..pts.len() {
            let (a, b) = (pts[i], pts[(i + 1) % pts.len()]);
            if (a.1 <= yc) != (b.1 <= yc) {
                xs.push(a.0 + (yc - a.1) / (b.1 - a.1) * (b.0 - a.0));
            }
        }
        xs.sort_by(f64::total_cmp);
        for pair in xs.chunks(2) {
            if let [x0, x1] = pair {
                let (xa, xb) = ((x0 - 0.5).ceil() as i64, (x1 - 0.5).floor() as i64);
                r.fill_rect(xa, y, xb, y, c);
            }
        }
    }
}

fn draw_elements(state: &EnvState, r: &mut Raster) {
    let doc = &state.document;
    let active = state.active_layer;
    let walls = |id: u64| doc.element(id).and_then(|e| e.wall_endpoints());
    for e in doc.elements.iter().filter(|e| e.kind == ElementKind::Slab && e.layer == active) {
        if let Geometry::Slab { outline, .. } = &e.geometry {
            let pts: Vec<_> = outline.iter().map(|p| to_screen(state, *p)).collect();
            fill_polygon(r, &pts, SLAB_FILL);
        }
    }
    for pass in [false, true] {
        for e in doc.elements.iter().filter(|e| (e.layer == active) == pass) {
            let Some((a, b)) = e.wall_endpoints() else { continue };
            let color = if !pass {
                INACTIVE_WALL
            } else if state.slab_picks.contains(&e.id) {
                PICKED
            } else if state.selection.contains(&e.id) {
                SELECTED
            } else {
                BLACK
            };
            r.draw_line(to_screen(state, a), to_screen(state, b), 1.5, color);
        }
    }
    for e in doc.elements.iter().filter(|e| e.layer == active) {
        match &e.geometry {
            Geometry::Opening { host_wall, t, width } => {
                let Some((a, b)) = walls(*host_wall) else { continue };
                let (pa, pb) = (to_screen(state, a), to_screen(state, b));
                let len = (pb.0 - pa.0).hypot(pb.1 - pa.1);
                let half = *width as f64 / MM_PER_GUI_PX / 2.0 / len;
                let lerp = |s: f64| (pa.0 + (pb.0 - pa.0) * s, pa.1 + (pb.1 - pa.1) * s);
                let color = if e.kind == ElementKind::Door { DOOR } else { WINDOW };
                r.draw_line(lerp((t - half).max(0.0)), lerp((t + half).min(1.0)), 2.0, color);
            }
            Geometry::Roof { min, max, .. } => {
                let (p, q) = (to_screen(state, *min), to_screen(state, *max));
                r.stroke_rect(p.0 as i64, p.1 as i64, q.0 as i64, q.1 as i64, ROOF);
            }
            _ => {}
        }
    }
    for s in &state.staged {
        if let Some((a, b)) = walls(s.host) {
            let (pa, pb) = (to_screen(state, a), to_screen(state, b));
            let (x, y) = ((pa.0 + (pb.0 - pa.0) * s.t) as i64, (pa.1 + (pb.1 - pa.1) * s.t) as i64);
            r.fill_rect(x - 2, y - 2, x + 2, y + 2, STAGED);
        }
    }
    for q in &state.click_buffer {
        r.fill_rect(q.x as i64 - 1, q.y as i64 - 1, q.x as i64 + 1, q.y as i64 + 1, BLACK);
    }
}

/// Render the full 1280x800 frame and its widget tree.
pub fn render_frame(state: &EnvState) -> GuiFrame {
    let mut b =
        Builder { raster: Raster::new(FRAME_WIDTH as usize, FRAME_HEIGHT as usize, BACKGROUND), widgets: vec![] };

    for (k, (_, label)) in layout::TOOLBAR.iter().enumerate() {
        b.widget(layout::toolbar_button(k), WidgetRole::Button, label, "", BUTTON_FILL);
    }
    b.widget(layout::CANVAS_BOX, WidgetRole::CanvasPanel, "", "", WHITE);
    draw_elements(state, &mut b.raster);

    b.widget(layout::INFO_BOX, WidgetRole::InfoPanel, "", "", INFO_FILL);
    for (text, y) in layout::INFO_DECOYS {
        b.widget(layout::label_rect(layout::INFO_X, y, text), WidgetRole::Label, text, "", INFO_FILL);
    }
    if let Some(kind) = layout::info_label(state) {
        b.widget(layout::label_rect(layout::INFO_X, layout::INFO_KIND_Y, kind), WidgetRole::Label, kind, "", INFO_FILL);
    }

    let n = state.dialog_stack.len();
    for (level, d) in state.dialog_stack.iter().enumerate() {
        let outer = layout::dialog_outer(d.kind);
        fill(&mut b.raster, outer, DIALOG_BORDER_COLOR);
        fill(&mut b.raster, layout::dialog_rect(d.kind), DIALOG_FILL);
        // Widgets hidden by a dialog stacked above are not part of the tree.
        let covers: Vec<Rect> = state.dialog_stack[level + 1..n].iter().map(|u| layout::dialog_outer(u.kind)).collect();
        for item in layout::dialog_items(state, d) {
            let fill_color = match item.role {
                WidgetRole::TextField if item.selected => FIELD_SELECTED_FILL,
                WidgetRole::TextField if item.focused => FIELD_FOCUS_FILL,
                WidgetRole::TextField => WHITE,
                WidgetRole::Button => BUTTON_FILL,
                _ => DIALOG_FILL,
            };
            if covers.iter().any(|c| c.intersects(&item.rect)) {
                draw_widget(&mut b.raster, item.rect, item.role, "", fill_color);
                continue;
            }
            b.widget(item.rect, item.role, &item.label, &item.value, fill_color);
        }
    }
    let mut widgets = b.widgets;
    widgets.sort_by_key(|w| (w.bbox.y0, w.bbox.x0));
    for (i, w) in widgets.iter_mut().enumerate() {
        w.id = i + 1;
    }
    GuiFrame { width: FRAME_WIDTH, height: FRAME_HEIGHT, raster: b.raster, widgets }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{new_session, FaultConfig, InputEvent};
    use crate::geometry::CanvasGeometry;

    #[test]
    fn deterministic_and_sized() {
        let s = new_session(CanvasGeometry::default(), FaultConfig::default());
        let (a, b) = (render_frame(&s), render_frame(&s));
        assert_eq!(a, b);
        assert_eq!(a.to_ppm().len(), 16 + 1280 * 800 * 3);
        assert!(a.to_ppm().starts_with(b"P6\n1280 800\n255\n"));
        let decoys: Vec<_> =
            a.widgets.iter().filter(|w| w.role == WidgetRole::Label).map(|w| w.label.as_str()).collect();
        assert_eq!(decoys, ["Name", "Elevation", "Wall Height"]);
    }

    #[test]
    fn widgets_in_raster_order_and_non_overlapping() {
        let mut s = new_session(CanvasGeometry::default(), FaultConfig::default());
        s.apply_event(&InputEvent::KeyCombo("ctrl+shift+o".into()));
        let edit = layout::button_center(DialogKind::Organization, "Edit...");
        s.apply_event(&InputEvent::MouseMove(edit));
        s.apply_event(&InputEvent::LeftClick);
        let f = render_frame(&s);
        for (i, w) in f.widgets.iter().enumerate() {
            assert_eq!(w.id, i + 1);
            for v in &f.widgets[i + 1..] {
                let contains = |a: &Rect, b: &Rect| a.x0 <= b.x0 && a.y0 <= b.y0 && a.x1 >= b.x1 && a.y1 >= b.y1;
                assert!(
                    !w.bbox.intersects(&v.bbox) || contains(&w.bbox, &v.bbox) || contains(&v.bbox, &w.bbox),
                    "{w:?} {v:?}"
                );
            }
        }
        let elevation = f.widgets.iter().find(|w| w.role == WidgetRole::TextField && w.label == "Elevation").unwrap();
        assert_eq!(elevation.value, "0");
    }
}
