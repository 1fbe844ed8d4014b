//! Screen parsing over rendered frames: change regions, widget detection by
//! border style, exact bitmap OCR, and numbered set-of-marks.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{palette, text_origin, GuiFrame, Rect, WidgetRole};
use crate::raster::{font, Raster, Rgb, BLACK, CELL_W, CHAR_ADVANCE, FONT_SCALE, GLYPH_H, GLYPH_W};

/// A diff larger than this is taken to be a dialog opening rather than a
/// cursor-sized change.
pub const DIALOG_CHANGE_PX: u64 = 2000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GroundingError {
    #[error("frame sizes differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DiffRegion {
    pub bbox: Rect,
    pub changed_pixel_count: u64,
}

impl DiffRegion {
    pub fn looks_like_dialog(&self) -> bool {
        self.changed_pixel_count > DIALOG_CHANGE_PX
    }
}

/// Tight bounding box of all differing pixels, or `None` for equal frames.
pub fn frame_diff(initial: &GuiFrame, current: &GuiFrame) -> Result<Option<DiffRegion>, GroundingError> {
    raster_diff(&initial.raster, &current.raster)
}

pub fn raster_diff(a: &Raster, b: &Raster) -> Result<Option<DiffRegion>, GroundingError> {
    if a.width != b.width || a.height != b.height {
        return Err(GroundingError::DimensionMismatch(a.width, a.height, b.width, b.height));
    }
    let stride = a.width * 3;
    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
    let mut count = 0u64;
    let rows = a.pixels.chunks_exact(stride.max(1)).zip(b.pixels.chunks_exact(stride.max(1)));
    for (y, (ra, rb)) in rows.enumerate() {
        if ra == rb {
            continue;
        }
        for (x, (pa, pb)) in ra.chunks_exact(3).zip(rb.chunks_exact(3)).enumerate() {
            if pa != pb {
                x0 = x0.min(x);
                x1 = x1.max(x);
                y0 = y0.min(y);
                y1 = y1.max(y);
                count += 1;
            }
        }
    }
    Ok((count > 0).then(|| DiffRegion {
        bbox: Rect::new(x0 as i32, y0 as i32, x1 as i32, y1 as i32),
        changed_pixel_count: count,
    }))
}

/// Border styles as (top/left colour, bottom/right colour, role).
const STYLES: [(Rgb, Rgb, WidgetRole); 5] = [
    (palette::RAISED_LIGHT, palette::RAISED_DARK, WidgetRole::Button),
    (palette::SUNKEN_DARK, palette::SUNKEN_LIGHT, WidgetRole::TextField),
    (palette::CANVAS, palette::CANVAS, WidgetRole::CanvasPanel),
    (palette::INFO, palette::INFO, WidgetRole::InfoPanel),
    (palette::LABEL, palette::LABEL, WidgetRole::Label),
];

/// Try to trace a full widget border whose top-left corner is at `(x, y)`.
fn trace(r: &Raster, x: usize, y: usize, a: Rgb, b: Rgb) -> Option<Rect> {
    let (w, h) = (r.width, r.height);
    let mut xe = x;
    while xe + 1 < w && r.get(xe + 1, y) == a {
        xe += 1;
    }
    let mut ye = y;
    while ye + 1 < h && r.get(x, ye + 1) == a {
        ye += 1;
    }
    // A two-tone border ends each light edge one pixel short of the corner.
    let (x1, y1) = if a == b { (xe, ye) } else { (xe + 1, ye + 1) };
    if x1 >= w || y1 >= h || x1 < x + 2 || y1 < y + 2 {
        return None;
    }
    let bottom = (x..=x1).all(|i| r.get(i, y1) == b);
    let right = (y..=y1).all(|j| r.get(x1, j) == b);
    (bottom && right).then(|| Rect::new(x as i32, y as i32, x1 as i32, y1 as i32))
}

const BLOCK: usize = 16;

/// Rectangles found by border-colour scan, in raster order of their
/// top-left corners. With `region`, only boxes fully inside it are kept.
pub fn detect_widgets(frame: &GuiFrame, region: Option<Rect>) -> Vec<(Rect, WidgetRole)> {
    let r = &frame.raster;
    let full = Rect::new(0, 0, r.width as i32 - 1, r.height as i32 - 1);
    let area = region.unwrap_or(full);
    let (ax0, ay0) = (area.x0.max(0) as usize, area.y0.max(0) as usize);
    let (ax1, ay1) = (area.x1.min(full.x1) as usize, area.y1.min(full.y1) as usize);
    let mut found = Vec::new();
    let stride = r.width * 3;
    let px = |row: &[u8], x: usize| -> Rgb { [row[x * 3], row[x * 3 + 1], row[x * 3 + 2]] };
    for y in ay0..=ay1 {
        let row = &r.pixels[y * stride..(y + 1) * stride];
        let up = (y > 0).then(|| &r.pixels[(y - 1) * stride..y * stride]);
        if up.is_some_and(|u| u[ax0 * 3..(ax1 + 1) * 3] == row[ax0 * 3..(ax1 + 1) * 3]) {
            continue;
        }
        let mut skip_to = 0;
        for x in ax0..=ax1 {
            // Blocks identical to the row above hold no corners.
            if x % BLOCK == 0 && x + BLOCK <= ax1 + 1 {
                if let Some(u) = up {
                    if u[x * 3..(x + BLOCK) * 3] == row[x * 3..(x + BLOCK) * 3] {
                        skip_to = x + BLOCK;
                    }
                }
            }
            if x < skip_to {
                continue;
            }
            let c = px(row, x);
            // A corner never continues a run of its own colour.
            if (x > 0 && px(row, x - 1) == c) || up.is_some_and(|u| px(u, x) == c) {
                continue;
            }
            // Border colours are pairwise distinct, so at most one style applies.
            let Some(&(a, b, role)) = STYLES.iter().find(|s| s.0 == c) else {
                continue;
            };
            if let Some(rect) = trace(r, x, y, a, b) {
                if rect.x1 <= area.x1 && rect.y1 <= area.y1 {
                    found.push((rect, role));
                }
            }
        }
    }
    found
}

fn read_cell(r: &Raster, x: usize, y: usize) -> Option<char> {
    let mut bits = [0u8; GLYPH_H];
    for (row, bits_row) in bits.iter_mut().enumerate() {
        for col in 0..GLYPH_W {
            let (px, py) = (x + col * FONT_SCALE, y + row * FONT_SCALE);
            if px >= r.width || py >= r.height {
                return None;
            }
            if r.get(px, py) == BLACK {
                *bits_row |= 1 << (GLYPH_W - 1 - col);
            }
        }
    }
    font().lookup(&bits)
}

/// Read the text drawn inside a widget box at the standard text origin.
/// Cells that match no glyph become `?`; trailing blanks are dropped.
pub fn ocr_text(frame: &GuiFrame, bbox: Rect) -> String {
    ocr_raster(&frame.raster, bbox)
}

pub fn ocr_raster(r: &Raster, bbox: Rect) -> String {
    let (x, y) = text_origin(&bbox);
    if x < 0 || y < 0 {
        return String::new();
    }
    let mut out = String::new();
    let mut cx = x as usize;
    while cx + CELL_W <= bbox.x1 as usize {
        out.push(read_cell(r, cx, y as usize).unwrap_or('?'));
        cx += CHAR_ADVANCE;
    }
    out.trim_end().to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MarkScope {
    Region(DiffRegion),
    FullScreen,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkedElement {
    pub mark_id: usize,
    pub bbox: Rect,
    pub role: WidgetRole,
    pub label: String,
    pub value: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetOfMarks {
    pub elements: Vec<MarkedElement>,
    pub scope: MarkScope,
    #[serde(skip)]
    pub overlay: Option<Raster>,
}

impl SetOfMarks {
    pub fn by_id(&self, id: usize) -> Option<&MarkedElement> {
        self.elements.iter().find(|e| e.mark_id == id)
    }

    /// Lowest-numbered element whose label equals `label`.
    pub fn first_labelled(&self, label: &str) -> Option<&MarkedElement> {
        self.elements.iter().find(|e| e.label == label)
    }
}

const BADGE: Rgb = [255, 200, 0];

/// Detect, read and number the widgets in scope, and draw the overlay.
pub fn build_set_of_marks(frame: &GuiFrame, scope: MarkScope) -> SetOfMarks {
    let region = match scope {
        MarkScope::Region(d) => Some(d.bbox),
        MarkScope::FullScreen => None,
    };
    let mut widgets = detect_widgets(frame, region);
    widgets.sort_by_key(|(r, _)| (r.y0, r.x0));
    let texts: Vec<String> = widgets
        .iter()
        .map(|(r, role)| match role {
            WidgetRole::CanvasPanel | WidgetRole::InfoPanel => String::new(),
            _ => ocr_text(frame, *r),
        })
        .collect();
    let elements: Vec<MarkedElement> = widgets
        .iter()
        .enumerate()
        .map(|(i, (bbox, role))| {
            let (label, value) = if *role == WidgetRole::TextField {
                // A field is named by the nearest caption to its left on the same row.
                let caption = widgets
                    .iter()
                    .enumerate()
                    .filter(|(_, (l, lr))| *lr == WidgetRole::Label && l.y0 == bbox.y0 && l.x1 < bbox.x0)
                    .max_by_key(|(_, (l, _))| l.x1)
                    .map(|(j, _)| texts[j].clone())
                    .unwrap_or_default();
                (caption, Some(texts[i].clone()))
            } else {
                (texts[i].clone(), None)
            };
            MarkedElement { mark_id: i + 1, bbox: *bbox, role: *role, label, value }
        })
        .collect();
    let mut overlay = frame.raster.clone();
    for e in &elements {
        let digits = e.mark_id.to_string();
        let (x, y) = (e.bbox.x0 as i64, e.bbox.y0 as i64);
        overlay.fill_rect(x, y, x + (CHAR_ADVANCE * digits.len()) as i64 + 2, y + 15, BADGE);
        overlay.draw_text(x + 2, y + 1, &digits, BLACK);
    }
    SetOfMarks { elements, scope, overlay: Some(overlay) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{layout, new_session, DialogKind, EnvState, FaultConfig, InputEvent};
    use crate::geometry::CanvasGeometry;

    fn env() -> EnvState {
        new_session(CanvasGeometry::default(), FaultConfig::default())
    }

    fn click(e: &mut EnvState, p: crate::geometry::GuiPoint) {
        e.apply_event(&InputEvent::MouseMove(p));
        e.apply_event(&InputEvent::LeftClick);
    }

    fn widget_set(frame: &GuiFrame) -> Vec<(Rect, WidgetRole)> {
        let mut v: Vec<_> = frame.widgets.iter().map(|w| (w.bbox, w.role)).collect();
        v.sort_by_key(|(r, _)| (r.y0, r.x0));
        v
    }

    #[test]
    fn identical_frames_have_no_diff() {
        let f = env().render();
        assert_eq!(frame_diff(&f, &f).unwrap(), None);
    }

    #[test]
    fn single_pixel_diff() {
        let a = env().render();
        let mut b = a.clone();
        b.raster.set(10, 20, [1, 2, 3]);
        let d = frame_diff(&a, &b).unwrap().unwrap();
        assert_eq!((d.bbox, d.changed_pixel_count), (Rect::new(10, 20, 10, 20), 1));
        assert!(!d.looks_like_dialog());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = env().render();
        let mut b = a.clone();
        b.raster = Raster::new(2, 2, BLACK);
        assert!(frame_diff(&a, &b).is_err());
    }

    #[test]
    fn dialog_diff_is_dialog_outer_rect() {
        let mut e = env();
        let before = e.render();
        e.apply_event(&InputEvent::KeyCombo("ctrl+shift+o".into()));
        let d = frame_diff(&before, &e.render()).unwrap().unwrap();
        assert_eq!(d.bbox, layout::dialog_outer(DialogKind::Organization));
        assert!(d.looks_like_dialog());
    }

    #[test]
    fn detection_matches_widget_tree() {
        let mut e = env();
        let f = e.render();
        assert_eq!(detect_widgets(&f, None), widget_set(&f));
        e.apply_event(&InputEvent::KeyCombo("ctrl+shift+o".into()));
        click(&mut e, layout::button_center(DialogKind::Organization, "New..."));
        let f = e.render();
        assert_eq!(detect_widgets(&f, None), widget_set(&f));
    }

    #[test]
    fn region_detection_is_the_dialog_only() {
        let mut e = env();
        e.apply_event(&InputEvent::KeyCombo("ctrl+shift+o".into()));
        let f = e.render();
        let outer = layout::dialog_outer(DialogKind::Organization);
        let inside: Vec<_> = widget_set(&f).into_iter().filter(|(r, _)| outer.contains(r.x0, r.y0)).collect();
        assert_eq!(detect_widgets(&f, Some(outer)), inside);
        assert!(detect_widgets(&f, Some(Rect::new(0, 0, 10, 10))).is_empty());
    }

    #[test]
    fn ocr_reads_widget_text() {
        let mut e = env();
        e.apply_event(&InputEvent::KeyCombo("ctrl+shift+o".into()));
        click(&mut e, layout::button_center(DialogKind::Organization, "Edit..."));
        let f = e.render();
        for w in f.widgets.iter().filter(|w| !matches!(w.role, WidgetRole::CanvasPanel | WidgetRole::InfoPanel)) {
            let expected = if w.role == WidgetRole::TextField { &w.value } else { &w.label };
            assert_eq!(&ocr_text(&f, w.bbox), expected, "{w:?}");
        }
    }

    #[test]
    fn full_screen_marks_put_decoy_first() {
        let mut e = env();
        e.apply_event(&InputEvent::KeyCombo("ctrl+shift+o".into()));
        let before = e.render();
        click(&mut e, layout::button_center(DialogKind::Organization, "Edit..."));
        let after = e.render();
        let full = build_set_of_marks(&after, MarkScope::FullScreen);
        let first = full.first_labelled("Elevation").unwrap();
        assert_eq!(first.role, WidgetRole::Label);
        assert!(first.bbox.x0 >= layout::INFO_BOX.x0);

        let region = frame_diff(&before, &after).unwrap().unwrap();
        let scoped = build_set_of_marks(&after, MarkScope::Region(region));
        assert!(scoped.elements.len() < full.elements.len());
        let fields: Vec<_> = scoped.elements.iter().filter(|m| m.role == WidgetRole::TextField).collect();
        assert_eq!(fields.iter().map(|m| m.label.as_str()).collect::<Vec<_>>(), ["Name", "Elevation", "Wall Height"]);
        assert_eq!(fields[1].value.as_deref(), Some("0"));
        assert!(scoped.first_labelled("Elevation").unwrap().bbox.x0 < layout::INFO_BOX.x0);
        let overlay = scoped.overlay.as_ref().unwrap();
        assert_eq!((overlay.width, overlay.height), (after.raster.width, after.raster.height));
    }
}
