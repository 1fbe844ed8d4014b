//! Sketch rasterization and stroke segmentation.

use serde::{Deserialize, Serialize};

use crate::floorplan::{FloorplanModel, OpeningKind, WallSpec};
use crate::geometry::ImagePoint;
use crate::raster::{Raster, Rgb, BLACK, WHITE};

pub(crate) const DOOR_MARK: Rgb = [220, 0, 0];
pub(crate) const WINDOW_MARK: Rgb = [0, 0, 220];

/// Half of the 4 px stroke, as `[c - HALF, c + HALF - 1]`.
const HALF: i64 = 2;
/// Shortest pixel run that counts as part of a wall stroke.
const MIN_RUN: usize = 12;
/// Tallest band of runs still treated as a single stroke.
const MAX_BAND: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    Horizontal,
    Vertical,
    Diagonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallRun {
    pub id: usize,
    /// Endpoint with the smaller `(y, x)`.
    pub start: ImagePoint,
    pub end: ImagePoint,
    pub axis: Axis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpeningMark {
    pub center: ImagePoint,
    /// Colour hint from the sketch, if any.
    pub hint: Option<OpeningKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSet {
    pub width: u32,
    pub height: u32,
    pub runs: Vec<WallRun>,
    pub marks: Vec<OpeningMark>,
}

fn ordered(a: ImagePoint, b: ImagePoint) -> (ImagePoint, ImagePoint) {
    if (b.y, b.x) < (a.y, a.x) {
        (b, a)
    } else {
        (a, b)
    }
}

fn axis_of(a: &ImagePoint, b: &ImagePoint) -> Axis {
    if a.y == b.y {
        Axis::Horizontal
    } else if a.x == b.x {
        Axis::Vertical
    } else {
        Axis::Diagonal
    }
}

fn is_int(p: &ImagePoint) -> bool {
    p.x.fract() == 0.0 && p.y.fract() == 0.0
}

impl SegmentSet {
    /// Segments straight from plan metadata (ground storey), bypassing the raster.
    pub fn from_model(fp: &FloorplanModel) -> SegmentSet {
        let mut runs: Vec<WallRun> = fp
            .storey_walls(1)
            .map(|w| {
                let (s, e) = ordered(w.start, w.end);
                WallRun { id: 0, start: s, end: e, axis: axis_of(&s, &e) }
            })
            .collect();
        sort_runs(&mut runs);
        let mut marks: Vec<OpeningMark> = fp
            .storey_openings(1)
            .iter()
            .filter_map(|o| {
                let w = fp.wall(&o.host_wall)?;
                Some(OpeningMark { center: w.point_at(o.t), hint: Some(o.kind) })
            })
            .collect();
        sort_marks(&mut marks);
        SegmentSet { width: fp.canvas.w_img, height: fp.canvas.h_img, runs, marks }
    }
}

fn sort_runs(runs: &mut [WallRun]) {
    let rank = |a: Axis| match a {
        Axis::Horizontal => 0,
        Axis::Vertical => 1,
        Axis::Diagonal => 2,
    };
    runs.sort_by(|a, b| {
        let ka = (rank(a.axis), a.start.y, a.start.x, a.end.y, a.end.x);
        let kb = (rank(b.axis), b.start.y, b.start.x, b.end.y, b.end.x);
        ka.partial_cmp(&kb).unwrap()
    });
    for (i, r) in runs.iter_mut().enumerate() {
        r.id = i;
    }
}

fn sort_marks(marks: &mut [OpeningMark]) {
    marks.sort_by(|a, b| (a.center.y, a.center.x).partial_cmp(&(b.center.y, b.center.x)).unwrap());
}

/// Draw a 4 px stroke along a wall, or a `len`-long piece of it centred at `c`.
pub(crate) fn stroke(r: &mut Raster, w: &WallSpec, piece: Option<(ImagePoint, f64)>, color: Rgb) {
    let (a, b) = (w.start, w.end);
    let exact = is_int(&a) && is_int(&b) && (a.x == b.x || a.y == b.y);
    match piece {
        None if exact => {
            let (x0, x1) = (a.x.min(b.x) as i64, a.x.max(b.x) as i64);
            let (y0, y1) = (a.y.min(b.y) as i64, a.y.max(b.y) as i64);
            r.fill_rect(x0 - HALF, y0 - HALF, x1 + HALF - 1, y1 + HALF - 1, color);
        }
        None => r.draw_line((a.x, a.y), (b.x, b.y), HALF as f64, color),
        Some((c, len)) => {
            let half_len = (len / 2.0).round() as i64;
            if exact && is_int(&c) {
                let (cx, cy) = (c.x as i64, c.y as i64);
                if a.y == b.y {
                    r.fill_rect(cx - half_len, cy - HALF, cx + half_len - 1, cy + HALF - 1, color);
                } else {
                    r.fill_rect(cx - HALF, cy - half_len, cx + HALF - 1, cy + half_len - 1, color);
                }
            } else {
                let l = w.length_px();
                let d = ((b.x - a.x) / l * len / 2.0, (b.y - a.y) / l * len / 2.0);
                r.draw_line((c.x - d.0, c.y - d.1), (c.x + d.0, c.y + d.1), HALF as f64, color);
            }
        }
    }
}

/// Rasterize the ground storey as a sketch: black wall strokes, red door and
/// blue window marks over them, white background.
pub fn render_sketch(fp: &FloorplanModel) -> Raster {
    let mut r = Raster::new(fp.canvas.w_img as usize, fp.canvas.h_img as usize, WHITE);
    for w in fp.storey_walls(1) {
        stroke(&mut r, w, None, BLACK);
    }
    let mm = fp.canvas.mm_per_image_px();
    for o in fp.storey_openings(1) {
        let Some(w) = fp.wall(&o.host_wall) else { continue };
        let color = match o.kind {
            OpeningKind::Door => DOOR_MARK,
            OpeningKind::Window => WINDOW_MARK,
        };
        stroke(&mut r, w, Some((w.point_at(o.t), o.width / mm)), color);
    }
    r
}

/// Disjoint-set forest over run indices.
struct Dsu(Vec<usize>);

impl Dsu {
    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Group long runs into bands along one direction. `lines` is the number of
/// scan lines and `len` the extent along each; `ink(line, i)` tests a pixel.
/// Returns `(lo, hi, first_line, last_line)` per band.
fn bands(lines: usize, len: usize, ink: impl Fn(usize, usize) -> bool) -> Vec<(usize, usize, usize, usize)> {
    let mut runs: Vec<(usize, usize, usize)> = Vec::new();
    let mut line_start = Vec::with_capacity(lines + 1);
    for l in 0..lines {
        line_start.push(runs.len());
        let mut i = 0;
        while i < len {
            if ink(l, i) {
                let s = i;
                while i < len && ink(l, i) {
                    i += 1;
                }
                if i - s >= MIN_RUN {
                    runs.push((l, s, i - 1));
                }
            } else {
                i += 1;
            }
        }
    }
    line_start.push(runs.len());
    let mut dsu = Dsu((0..runs.len()).collect());
    for l in 1..lines {
        for i in line_start[l]..line_start[l + 1] {
            for j in line_start[l - 1]..line_start[l] {
                if runs[i].1 <= runs[j].2 && runs[j].1 <= runs[i].2 {
                    dsu.union(i, j);
                }
            }
        }
    }
    let mut out: std::collections::BTreeMap<usize, (usize, usize, usize, usize)> = Default::default();
    for (i, &(l, s, e)) in runs.iter().enumerate() {
        let root = dsu.find(i);
        let b = out.entry(root).or_insert((s, e, l, l));
        b.0 = b.0.min(s);
        b.1 = b.1.max(e);
        b.2 = b.2.min(l);
        b.3 = b.3.max(l);
    }
    out.into_values().filter(|b| b.3 - b.2 < MAX_BAND).collect()
}

fn mark_kind(c: Rgb) -> Option<OpeningKind> {
    if c == DOOR_MARK {
        Some(OpeningKind::Door)
    } else if c == WINDOW_MARK {
        Some(OpeningKind::Window)
    } else {
        None
    }
}

/// Recover axis-aligned wall runs and opening marks from a sketch raster.
pub fn segment_sketch(r: &Raster) -> SegmentSet {
    let (w, h) = (r.width, r.height);
    let ink = |x: usize, y: usize| r.get(x, y) != WHITE;
    let half = HALF as f64;
    let mut runs = Vec::new();
    for (lo, hi, top, bottom) in bands(h, w, |y, x| ink(x, y)) {
        let y = (top + bottom + 1) as f64 / 2.0;
        runs.push(WallRun {
            id: 0,
            start: ImagePoint::new(lo as f64 + half, y),
            end: ImagePoint::new(hi as f64 + 1.0 - half, y),
            axis: Axis::Horizontal,
        });
    }
    for (lo, hi, left, right) in bands(w, h, ink) {
        let x = (left + right + 1) as f64 / 2.0;
        runs.push(WallRun {
            id: 0,
            start: ImagePoint::new(x, lo as f64 + half),
            end: ImagePoint::new(x, hi as f64 + 1.0 - half),
            axis: Axis::Vertical,
        });
    }
    sort_runs(&mut runs);

    // Coloured connected components become opening marks.
    let mut seen = vec![false; w * h];
    let mut marks = Vec::new();
    let mut stack = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let Some(kind) = mark_kind(r.get(x, y)) else { continue };
            if seen[y * w + x] {
                continue;
            }
            let color = r.get(x, y);
            let (mut x0, mut y0, mut x1, mut y1) = (x, y, x, y);
            seen[y * w + x] = true;
            stack.push((x, y));
            while let Some((cx, cy)) = stack.pop() {
                x0 = x0.min(cx);
                x1 = x1.max(cx);
                y0 = y0.min(cy);
                y1 = y1.max(cy);
                let nbrs = [(cx.wrapping_sub(1), cy), (cx + 1, cy), (cx, cy.wrapping_sub(1)), (cx, cy + 1)];
                for (nx, ny) in nbrs {
                    if nx < w && ny < h && !seen[ny * w + nx] && r.get(nx, ny) == color {
                        seen[ny * w + nx] = true;
                        stack.push((nx, ny));
                    }
                }
            }
            marks.push(OpeningMark {
                center: ImagePoint::new((x0 + x1 + 1) as f64 / 2.0, (y0 + y1 + 1) as f64 / 2.0),
                hint: Some(kind),
            });
        }
    }
    sort_marks(&mut marks);
    SegmentSet { width: w as u32, height: h as u32, runs, marks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floorplan::tests::rectangle_plan;

    #[test]
    fn empty_plan_renders_white() {
        let mut fp = rectangle_plan();
        fp.walls.clear();
        fp.openings.clear();
        let r = render_sketch(&fp);
        assert!(r.pixels.iter().all(|b| *b == 255));
        let seg = segment_sketch(&r);
        assert!(seg.runs.is_empty() && seg.marks.is_empty());
    }

    #[test]
    fn black_pixels_match_stroke_area() {
        let mut fp = rectangle_plan();
        fp.openings.clear();
        let r = render_sketch(&fp);
        let black = (0..r.height)
            .flat_map(|y| (0..r.width).map(move |x| (x, y)))
            .filter(|&(x, y)| r.get(x, y) == BLACK)
            .count();
        // Outer 404x304 box minus the inner 396x296 hole.
        assert_eq!(black, 404 * 304 - 396 * 296);
    }

    #[test]
    fn rectangle_segments_back_exactly() {
        let fp = rectangle_plan();
        let seg = segment_sketch(&render_sketch(&fp));
        let from_meta = SegmentSet::from_model(&fp);
        assert_eq!(seg.runs, from_meta.runs);
        assert_eq!(seg.marks.len(), 2);
        for (a, b) in seg.marks.iter().zip(&from_meta.marks) {
            assert!(a.center.dist(&b.center) <= 0.5, "{a:?} vs {b:?}");
            assert_eq!(a.hint, b.hint);
        }
    }
}
