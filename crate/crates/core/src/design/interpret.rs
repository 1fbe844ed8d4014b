//! Turn segmented strokes into a storey-replicated floorplan model.

use thiserror::Error;

use super::sketch::{Axis, SegmentSet, WallRun};
use super::synth::{assemble, Template};
use crate::canonical::quantize;
use crate::floorplan::{FloorplanModel, OpeningKind, WallKind};
use crate::geometry::{point_segment_distance, CanvasGeometry, ImagePoint};
use crate::raster::{Raster, BLACK, WHITE};

/// Endpoints closer than this are considered joined.
const JOIN_PX: f64 = 3.0;
/// Marks farther than this from every run are ignored.
const HOST_PX: f64 = 6.0;
/// Offset of the side samples used to classify a run.
const SIDE_PX: f64 = 6.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InterpretError {
    #[error("no wall strokes found")]
    Empty,
    #[error("exterior boundary is not a closed cycle; dangling runs {0:?}")]
    OpenBoundary(Vec<usize>),
    #[error("storey count must be at least 1")]
    NoStoreys,
    #[error("segment image {seg_w}x{seg_h} does not match canvas {w}x{h}")]
    SizeMismatch { seg_w: u32, seg_h: u32, w: u32, h: u32 },
}

fn pt(p: &crate::geometry::ImagePoint) -> (f64, f64) {
    (p.x, p.y)
}

/// Rasterize runs and flood the exterior from the image border.
fn exterior_mask(seg: &SegmentSet) -> (Vec<bool>, usize, usize) {
    let (w, h) = (seg.width as usize, seg.height as usize);
    let mut r = Raster::new(w, h, WHITE);
    for run in &seg.runs {
        r.draw_line(pt(&run.start), pt(&run.end), 2.0, BLACK);
        // Square off the joints so corners stay sealed.
        for p in [&run.start, &run.end] {
            r.fill_rect(p.x as i64 - 2, p.y as i64 - 2, p.x as i64 + 1, p.y as i64 + 1, BLACK);
        }
    }
    let mut ext = vec![false; w * h];
    let mut stack = Vec::new();
    for x in 0..w {
        stack.push((x, 0));
        stack.push((x, h - 1));
    }
    for y in 0..h {
        stack.push((0, y));
        stack.push((w - 1, y));
    }
    while let Some((x, y)) = stack.pop() {
        if ext[y * w + x] || r.get(x, y) != WHITE {
            continue;
        }
        ext[y * w + x] = true;
        if x > 0 {
            stack.push((x - 1, y));
        }
        if x + 1 < w {
            stack.push((x + 1, y));
        }
        if y > 0 {
            stack.push((x, y - 1));
        }
        if y + 1 < h {
            stack.push((x, y + 1));
        }
    }
    (ext, w, h)
}

/// Number of sides of a run that face the exterior (0, 1 or 2).
fn exterior_sides(run: &WallRun, mask: &(Vec<bool>, usize, usize)) -> usize {
    let (ext, w, h) = mask;
    let (a, b) = (pt(&run.start), pt(&run.end));
    let len = (b.0 - a.0).hypot(b.1 - a.1);
    let n = (-(b.1 - a.1) / len, (b.0 - a.0) / len);
    let m = ((a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0);
    [1.0, -1.0]
        .iter()
        .filter(|s| {
            let (x, y) = (m.0 + *s * n.0 * SIDE_PX, m.1 + *s * n.1 * SIDE_PX);
            if x < 0.0 || y < 0.0 || x >= *w as f64 || y >= *h as f64 {
                return true;
            }
            ext[y as usize * w + x as usize]
        })
        .count()
}

/// Split runs where their exterior classification changes at a junction
/// (a wall that continues past a reflex corner as an internal wall), then
/// classify every piece. Pieces keep the id of the run they came from.
fn classify(seg: &SegmentSet, mask: &(Vec<bool>, usize, usize)) -> (Vec<WallRun>, Vec<usize>) {
    let mut pieces = Vec::new();
    let mut sides = Vec::new();
    for run in &seg.runs {
        let (a, b) = (pt(&run.start), pt(&run.end));
        let mut cuts: Vec<(f64, ImagePoint)> = seg
            .runs
            .iter()
            .filter(|o| o.id != run.id)
            .flat_map(|o| [o.start, o.end])
            .filter_map(|p| {
                let (d, t) = point_segment_distance(pt(&p), a, b);
                // Snap the cut onto the run itself.
                (d <= 1.0 && t > 0.0 && t < 1.0).then(|| (t, run.start.lerp(&run.end, t)))
            })
            .map(|(t, p)| match run.axis {
                Axis::Horizontal => (t, ImagePoint::new(p.x.round(), run.start.y)),
                Axis::Vertical => (t, ImagePoint::new(run.start.x, p.y.round())),
                Axis::Diagonal => (t, p),
            })
            .collect();
        cuts.sort_by(|x, y| x.0.total_cmp(&y.0));
        cuts.dedup_by(|x, y| x.1.dist(&y.1) < 1e-9);
        let mut bounds = vec![run.start];
        bounds.extend(cuts.into_iter().map(|c| c.1));
        bounds.push(run.end);
        let mut cur: Option<(WallRun, usize)> = None;
        for w in bounds.windows(2) {
            let piece = WallRun { id: run.id, start: w[0], end: w[1], axis: run.axis };
            let s = exterior_sides(&piece, mask);
            cur = match cur {
                Some((mut c, cs)) if cs == s => {
                    c.end = piece.end;
                    Some((c, cs))
                }
                Some((c, cs)) => {
                    pieces.push(c);
                    sides.push(cs);
                    Some((piece, s))
                }
                None => Some((piece, s)),
            };
        }
        let (c, cs) = cur.expect("at least one piece");
        pieces.push(c);
        sides.push(cs);
    }
    (pieces, sides)
}

/// Interpret segments as the ground-storey layout and replicate it upwards.
///
/// Runs with one exterior side are external walls; openings on internal walls
/// are doors, on external walls windows, except the `(y, x)`-smallest external
/// one, which is the entrance door on the ground storey only.
pub fn interpret_floorplan(
    seg: &SegmentSet,
    canvas: CanvasGeometry,
    storeys: u32,
) -> Result<FloorplanModel, InterpretError> {
    if storeys == 0 {
        return Err(InterpretError::NoStoreys);
    }
    if seg.width != canvas.w_img || seg.height != canvas.h_img {
        return Err(InterpretError::SizeMismatch {
            seg_w: seg.width,
            seg_h: seg.height,
            w: canvas.w_img,
            h: canvas.h_img,
        });
    }
    if seg.runs.is_empty() {
        return Err(InterpretError::Empty);
    }
    let mask = exterior_mask(seg);
    let (pieces, sides) = classify(seg, &mask);

    let mut dangling: Vec<usize> = pieces.iter().zip(&sides).filter(|(_, s)| **s == 2).map(|(r, _)| r.id).collect();
    let external: Vec<&WallRun> = pieces.iter().zip(&sides).filter(|(_, s)| **s == 1).map(|(r, _)| r).collect();
    for r in &external {
        for p in [&r.start, &r.end] {
            let joins = external
                .iter()
                .filter(|o| o.id != r.id)
                .flat_map(|o| [&o.start, &o.end])
                .filter(|q| q.dist(p) <= JOIN_PX)
                .count();
            if joins != 1 && !dangling.contains(&r.id) {
                dangling.push(r.id);
            }
        }
    }
    if external.is_empty() || !dangling.is_empty() {
        dangling.sort_unstable();
        return Err(InterpretError::OpenBoundary(dangling));
    }

    let walls: Vec<_> = pieces
        .iter()
        .zip(&sides)
        .map(|(r, s)| (pt(&r.start), pt(&r.end), if *s == 1 { WallKind::External } else { WallKind::Internal }))
        .collect();

    let mut hosted = Vec::new();
    for m in &seg.marks {
        let c = pt(&m.center);
        let best = walls
            .iter()
            .enumerate()
            .map(|(i, (a, b, _))| (i, point_segment_distance(c, *a, *b)))
            .min_by(|x, y| x.1 .0.total_cmp(&y.1 .0));
        let Some((i, (d, _))) = best else { continue };
        if d > HOST_PX {
            continue;
        }
        let (a, b, kind) = walls[i];
        let len2 = (b.0 - a.0).powi(2) + (b.1 - a.1).powi(2);
        let t = quantize(((c.0 - a.0) * (b.0 - a.0) + (c.1 - a.1) * (b.1 - a.1)) / len2);
        if t <= 0.0 || t >= 1.0 {
            continue;
        }
        hosted.push((i, t, kind, c));
    }
    // Marks arrive sorted by (y, x); the first external one is the entrance.
    let entrance = hosted.iter().position(|h| h.2 == WallKind::External);
    let openings = hosted
        .iter()
        .enumerate()
        .map(|(j, (i, t, kind, _))| {
            let is_entrance = Some(j) == entrance;
            let k = if *kind == WallKind::Internal || is_entrance { OpeningKind::Door } else { OpeningKind::Window };
            (*i, *t, k, is_entrance)
        })
        .collect();
    Ok(assemble(canvas, storeys, Template { walls, openings }, Vec::new()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{render_sketch, segment_sketch, synthesize_floorplan, DesignTask, Footprint, Modality};

    fn task(footprint: Footprint, rooms: u32) -> DesignTask {
        DesignTask {
            id: "i".into(),
            modality: Modality::Sketch,
            footprint,
            storeys: 2,
            rooms,
            modifications: vec![],
            prose: String::new(),
        }
    }

    fn strip_rooms(mut fp: FloorplanModel) -> FloorplanModel {
        fp.rooms.clear();
        fp
    }

    #[test]
    fn round_trip_through_raster() {
        for (f, rooms) in [(Footprint::Rectangle, 5), (Footprint::LShape, 4), (Footprint::HShape, 6)] {
            for seed in 0..4 {
                let fp = synthesize_floorplan(&task(f, rooms), seed).unwrap();
                let seg = segment_sketch(&render_sketch(&fp));
                let back = interpret_floorplan(&seg, fp.canvas, 2).unwrap();
                assert_eq!(back, strip_rooms(fp), "{f:?} seed {seed}");
            }
        }
    }

    #[test]
    fn round_trip_through_metadata_for_diagonal_plans() {
        for f in [Footprint::Hexagon, Footprint::Octagon] {
            let fp = synthesize_floorplan(&task(f, 3), 1).unwrap();
            let back = interpret_floorplan(&SegmentSet::from_model(&fp), fp.canvas, 2).unwrap();
            assert_eq!(back.walls, fp.walls);
            assert_eq!(back.openings.len(), fp.openings.len());
            for (a, b) in back.openings.iter().zip(&fp.openings) {
                assert_eq!((&a.id, &a.host_wall, a.kind), (&b.id, &b.host_wall, b.kind));
                assert!((a.t - b.t).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn dangling_run_is_reported() {
        let seg = SegmentSet {
            width: 960,
            height: 640,
            runs: vec![WallRun {
                id: 0,
                start: ImagePoint::new(100.0, 100.0),
                end: ImagePoint::new(300.0, 100.0),
                axis: crate::design::Axis::Horizontal,
            }],
            marks: vec![],
        };
        let err = interpret_floorplan(&seg, CanvasGeometry::default(), 1).unwrap_err();
        assert_eq!(err, InterpretError::OpenBoundary(vec![0]));
    }
}
