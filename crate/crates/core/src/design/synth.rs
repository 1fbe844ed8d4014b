//! Parametric floorplan synthesis by guillotine partitioning, and the
//! room-level modifications applied on top of a synthesized plan.

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DesignTask, Footprint, LocationHint, Modification, SynthesisError};
use crate::canonical::{quantize, Fnv64};
use crate::floorplan::{
    FloorplanModel, OpeningKind, OpeningSpec, RoofKind, RoofSpec, RoomSpec, StoreySpec, WallKind, WallSpec,
    ROOF_PITCH_DEG,
};
use crate::geometry::{CanvasGeometry, ImagePoint};

pub const DOOR_WIDTH_MM: f64 = 800.0;
pub const WINDOW_WIDTH_MM: f64 = 600.0;
pub const EXTERNAL_THICKNESS_MM: f64 = 200.0;
pub const INTERNAL_THICKNESS_MM: f64 = 100.0;

/// Smallest room extent along either axis.
const MIN_ROOM_MM: f64 = 1200.0;
/// Clearance kept between a door and the ends of a shared wall portion.
const DOOR_MARGIN_MM: f64 = 200.0;

const EPS: f64 = 0.02;

/// Image sizes a synthesized plan may be drawn at (all 3:2).
const IMAGE_SIZES: [(u32, u32); 4] = [(960, 640), (1200, 800), (480, 320), (1440, 960)];

pub(crate) type P = (f64, f64);

fn q(p: P) -> P {
    (quantize(p.0), quantize(p.1))
}

fn to_img(p: P) -> ImagePoint {
    ImagePoint::new(p.0, p.1)
}

fn from_img(p: &ImagePoint) -> P {
    (p.x, p.y)
}

fn dist(a: P, b: P) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

fn lerp(a: P, b: P, t: f64) -> P {
    (a.0 + (b.0 - a.0) * t, a.1 + (b.1 - a.1) * t)
}

fn yx_less(a: P, b: P) -> bool {
    (a.1, a.0) < (b.1, b.0)
}

fn area(poly: &[P]) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        s += a.0 * b.1 - b.0 * a.1;
    }
    s.abs() / 2.0
}

fn centroid(poly: &[P]) -> P {
    let n = poly.len() as f64;
    let (sx, sy) = poly.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    (sx / n, sy / n)
}

fn bbox(poly: &[P]) -> (P, P) {
    let mut lo = (f64::INFINITY, f64::INFINITY);
    let mut hi = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in poly {
        lo = (lo.0.min(p.0), lo.1.min(p.1));
        hi = (hi.0.max(p.0), hi.1.max(p.1));
    }
    (lo, hi)
}

fn edges(poly: &[P]) -> impl Iterator<Item = (P, P)> + '_ {
    (0..poly.len()).map(move |i| (poly[i], poly[(i + 1) % poly.len()]))
}

fn coord(p: P, axis: usize) -> f64 {
    if axis == 0 {
        p.0
    } else {
        p.1
    }
}

/// Keep the part of a convex polygon with `sign * (coord - c) <= 0`.
fn clip(poly: &[P], axis: usize, c: f64, sign: f64) -> Vec<P> {
    let inside = |p: P| sign * (coord(p, axis) - c) <= 1e-9;
    let mut out: Vec<P> = Vec::new();
    for (a, b) in edges(poly) {
        let (ia, ib) = (inside(a), inside(b));
        if ia {
            out.push(a);
        }
        if ia != ib {
            let t = (c - coord(a, axis)) / (coord(b, axis) - coord(a, axis));
            let mut p = lerp(a, b, t);
            if axis == 0 {
                p.0 = c;
            } else {
                p.1 = c;
            }
            out.push(q(p));
        }
    }
    out.dedup_by(|a, b| dist(*a, *b) < 1e-9);
    while out.len() > 1 && dist(out[0], *out.last().unwrap()) < 1e-9 {
        out.pop();
    }
    out
}

/// Parameter interval of `s` that lies on the segment `f`, if collinear.
fn collinear_overlap(s: (P, P), f: (P, P)) -> Option<(f64, f64)> {
    let len = dist(s.0, s.1);
    if len < EPS {
        return None;
    }
    let d = ((s.1 .0 - s.0 .0) / len, (s.1 .1 - s.0 .1) / len);
    let off = |p: P| ((p.0 - s.0 .0) * d.1 - (p.1 - s.0 .1) * d.0).abs();
    if off(f.0) > EPS || off(f.1) > EPS {
        return None;
    }
    let proj = |p: P| ((p.0 - s.0 .0) * d.0 + (p.1 - s.0 .1) * d.1) / len;
    let (ta, tb) = (proj(f.0), proj(f.1));
    let lo = ta.min(tb).max(0.0);
    let hi = ta.max(tb).min(1.0);
    ((hi - lo) * len > EPS).then_some((lo, hi))
}

/// Horizontal (axis 1 constant) or vertical line key with the interval on it.
fn line_key(a: P, b: P) -> Option<((u8, i64), f64, f64)> {
    if (a.1 - b.1).abs() < EPS {
        Some(((0, (a.1 * 100.0).round() as i64), a.0.min(b.0), a.0.max(b.0)))
    } else if (a.0 - b.0).abs() < EPS {
        Some(((1, (a.0 * 100.0).round() as i64), a.1.min(b.1), a.1.max(b.1)))
    } else {
        None
    }
}

fn key_point(key: (u8, i64), v: f64) -> P {
    let c = key.1 as f64 / 100.0;
    if key.0 == 0 {
        (v, c)
    } else {
        (c, v)
    }
}

/// A room outline plus the footprint it sits in.
#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub canvas: CanvasGeometry,
    pub outline: Vec<(P, P)>,
    pub rooms: Vec<(String, Vec<P>)>,
    pub axis_aligned: bool,
}

/// Part of a room edge that lies on the footprint boundary.
#[derive(Debug, Clone, Copy)]
struct Portion {
    room: usize,
    edge: usize,
    /// Endpoint with the smaller `(y, x)`.
    a: P,
    b: P,
}

#[derive(Debug, Default)]
struct Analysis {
    portions: Vec<Portion>,
    /// Internal edge pieces per room.
    internal: Vec<(usize, P, P)>,
}

fn analyse(layout: &Layout) -> Analysis {
    let mut out = Analysis::default();
    for (ri, (_, poly)) in layout.rooms.iter().enumerate() {
        for e in edges(poly) {
            let mut covered: Vec<(f64, f64)> = Vec::new();
            for (fi, f) in layout.outline.iter().enumerate() {
                if let Some((lo, hi)) = collinear_overlap(e, *f) {
                    covered.push((lo, hi));
                    let (mut a, mut b) = (q(lerp(e.0, e.1, lo)), q(lerp(e.0, e.1, hi)));
                    if yx_less(b, a) {
                        std::mem::swap(&mut a, &mut b);
                    }
                    out.portions.push(Portion { room: ri, edge: fi, a, b });
                }
            }
            covered.sort_by(|x, y| x.0.total_cmp(&y.0));
            let mut t = 0.0;
            let len = dist(e.0, e.1);
            for (lo, hi) in covered.into_iter().chain(std::iter::once((1.0, 1.0))) {
                if (lo - t) * len > EPS {
                    out.internal.push((ri, q(lerp(e.0, e.1, t)), q(lerp(e.0, e.1, lo))));
                }
                t = t.max(hi);
            }
        }
    }
    out
}

/// Maximal collinear unions of internal pieces.
fn internal_walls(an: &Analysis) -> Vec<(P, P)> {
    let mut by_line: BTreeMap<(u8, i64), Vec<(f64, f64)>> = BTreeMap::new();
    for (_, a, b) in &an.internal {
        if let Some((k, lo, hi)) = line_key(*a, *b) {
            by_line.entry(k).or_default().push((lo, hi));
        }
    }
    let mut out = Vec::new();
    for (k, mut iv) in by_line {
        iv.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut cur = iv[0];
        for &(lo, hi) in &iv[1..] {
            if lo <= cur.1 + EPS {
                cur.1 = cur.1.max(hi);
            } else {
                out.push((q(key_point(k, cur.0)), q(key_point(k, cur.1))));
                cur = (lo, hi);
            }
        }
        out.push((q(key_point(k, cur.0)), q(key_point(k, cur.1))));
    }
    out
}

/// Longest shared internal portion between each pair of rooms.
fn adjacency(an: &Analysis, min_len: f64) -> BTreeMap<(usize, usize), (P, P)> {
    let mut out: BTreeMap<(usize, usize), (P, P)> = BTreeMap::new();
    for (i, x) in an.internal.iter().enumerate() {
        let Some((kx, xlo, xhi)) = line_key(x.1, x.2) else { continue };
        for y in &an.internal[i + 1..] {
            if x.0 == y.0 {
                continue;
            }
            let Some((ky, ylo, yhi)) = line_key(y.1, y.2) else { continue };
            if kx != ky {
                continue;
            }
            let (lo, hi) = (xlo.max(ylo), xhi.min(yhi));
            if hi - lo < min_len {
                continue;
            }
            let pair = (x.0.min(y.0), x.0.max(y.0));
            let seg = (key_point(kx, lo), key_point(kx, hi));
            let better = out.get(&pair).is_none_or(|s| dist(s.0, s.1) < hi - lo - EPS);
            if better {
                out.insert(pair, seg);
            }
        }
    }
    out
}

/// Abstract plan: walls by geometry, openings by host index.
pub(crate) struct Template {
    pub walls: Vec<(P, P, WallKind)>,
    /// (host index, t, kind, is the storey-1 entrance)
    pub openings: Vec<(usize, f64, OpeningKind, bool)>,
}

fn snap(v: f64, on: bool) -> f64 {
    if on {
        v.round()
    } else {
        v
    }
}

fn param_on(a: P, b: P, p: P) -> f64 {
    let len2 = (b.0 - a.0).powi(2) + (b.1 - a.1).powi(2);
    quantize(((p.0 - a.0) * (b.0 - a.0) + (p.1 - a.1) * (b.1 - a.1)) / len2)
}

fn build_template(layout: &Layout) -> Result<Template, SynthesisError> {
    let mm = layout.canvas.mm_per_image_px();
    let an = analyse(layout);
    // Walls start at their (y, x)-smallest endpoint so positions along them
    // are computed in the same direction an interpreter would use.
    let mut walls: Vec<(P, P, WallKind)> = layout
        .outline
        .iter()
        .map(|&(a, b)| if yx_less(b, a) { (b, a, WallKind::External) } else { (a, b, WallKind::External) })
        .collect();
    let n_ext = walls.len();
    let internal = internal_walls(&an);
    walls.extend(internal.iter().map(|(a, b)| (*a, *b, WallKind::Internal)));

    let min_window = 3.0 * WINDOW_WIDTH_MM / mm;
    let qualifying: Vec<&Portion> = an.portions.iter().filter(|p| dist(p.a, p.b) >= min_window - EPS).collect();
    let at = |p: &Portion, f: f64| {
        let v = lerp(p.a, p.b, f);
        (snap(v.0, layout.axis_aligned), snap(v.1, layout.axis_aligned))
    };
    let entrance = qualifying
        .iter()
        .min_by(|x, y| {
            let (a, b) = (at(x, 0.25), at(y, 0.25));
            (a.1, a.0).partial_cmp(&(b.1, b.0)).unwrap()
        })
        .copied()
        .ok_or(SynthesisError::NoEntrance)?;

    let mut openings = Vec::new();
    let host = |edge: usize, p: P| {
        let (a, b, _) = walls[edge];
        (edge, param_on(a, b, p))
    };
    for p in &qualifying {
        let same = std::ptr::eq(*p, entrance);
        let f = if same { 0.75 } else { 0.5 };
        let (h, t) = host(p.edge, at(p, f));
        openings.push((h, t, OpeningKind::Window, false));
    }
    let (h, t) = host(entrance.edge, at(entrance, 0.25));
    openings.push((h, t, OpeningKind::Door, true));

    // Doors along a BFS spanning tree from the entrance room.
    let adj = adjacency(&an, (DOOR_WIDTH_MM + 2.0 * DOOR_MARGIN_MM) / mm);
    let n = layout.rooms.len();
    let mut seen = vec![false; n];
    seen[entrance.room] = true;
    let mut queue = VecDeque::from([entrance.room]);
    while let Some(r) = queue.pop_front() {
        for (&(i, j), seg) in &adj {
            let other = if i == r {
                j
            } else if j == r {
                i
            } else {
                continue;
            };
            if seen[other] {
                continue;
            }
            seen[other] = true;
            queue.push_back(other);
            let m = lerp(seg.0, seg.1, 0.5);
            let m = (snap(m.0, layout.axis_aligned), snap(m.1, layout.axis_aligned));
            let (k, _, _) = line_key(seg.0, seg.1).expect("shared portions are axis-aligned");
            let wi = internal
                .iter()
                .position(|(a, b)| {
                    line_key(*a, *b).is_some_and(|(kw, lo, hi)| {
                        kw == k && {
                            let v = if k.0 == 0 { m.0 } else { m.1 };
                            v > lo && v < hi
                        }
                    })
                })
                .expect("shared portion lies on an internal wall");
            let (a, b) = internal[wi];
            openings.push((n_ext + wi, param_on(a, b, m), OpeningKind::Door, false));
        }
    }
    if let Some(r) = seen.iter().position(|s| !s) {
        return Err(SynthesisError::Unreachable(layout.rooms[r].0.clone()));
    }
    Ok(Template { walls, openings })
}

/// Turn an abstract plan into a storey-replicated model with canonical ids.
///
/// Walls are ordered by kind and then by their `(y, x)`-smallest endpoint,
/// which becomes the wall start; openings by kind, host and position.
pub(crate) fn assemble(
    canvas: CanvasGeometry,
    storeys: u32,
    template: Template,
    rooms: Vec<RoomSpec>,
) -> FloorplanModel {
    let mut walls: Vec<(P, P, WallKind, bool)> = template
        .walls
        .into_iter()
        .map(|(a, b, k)| if yx_less(b, a) { (b, a, k, true) } else { (a, b, k, false) })
        .collect();
    let mut order: Vec<usize> = (0..walls.len()).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (&walls[i], &walls[j]);
        (a.2, a.0 .1, a.0 .0, a.1 .1, a.1 .0).partial_cmp(&(b.2, b.0 .1, b.0 .0, b.1 .1, b.1 .0)).unwrap()
    });
    let mut rank = vec![0; walls.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    let mut openings: Vec<(usize, f64, OpeningKind, bool)> = template
        .openings
        .into_iter()
        .map(|(h, t, k, e)| (rank[h], if walls[h].3 { quantize(1.0 - t) } else { t }, k, e))
        .collect();
    openings.sort_by(|a, b| (a.2, a.0, a.1).partial_cmp(&(b.2, b.0, b.1)).unwrap());
    let sorted: Vec<_> = order.iter().map(|&i| walls[i]).collect();
    walls = sorted;

    let mut model = FloorplanModel {
        canvas,
        storeys: (1..=storeys).map(StoreySpec::standard).collect(),
        walls: Vec::new(),
        openings: Vec::new(),
        roof: Some(RoofSpec { pitch: ROOF_PITCH_DEG, kind: RoofKind::Hip }),
        rooms,
    };
    for s in 1..=storeys {
        let height = model.storeys[s as usize - 1].wall_height as f64;
        for (i, (a, b, kind, _)) in walls.iter().enumerate() {
            model.walls.push(WallSpec {
                id: format!("wall{}_floor{s}", i + 1),
                start: to_img(*a),
                end: to_img(*b),
                kind: *kind,
                thickness: match kind {
                    WallKind::External => EXTERNAL_THICKNESS_MM,
                    WallKind::Internal => INTERNAL_THICKNESS_MM,
                },
                height,
                storey: s,
            });
        }
        let (mut doors, mut windows) = (0, 0);
        for (h, t, kind, entrance) in &openings {
            if *entrance && s > 1 {
                continue;
            }
            let (id, width) = match kind {
                OpeningKind::Door => {
                    doors += 1;
                    (format!("door{doors}_floor{s}"), DOOR_WIDTH_MM)
                }
                OpeningKind::Window => {
                    windows += 1;
                    (format!("window{windows}_floor{s}"), WINDOW_WIDTH_MM)
                }
            };
            model.openings.push(OpeningSpec {
                id,
                host_wall: format!("wall{}_floor{s}", h + 1),
                t: *t,
                kind: *kind,
                width,
            });
        }
    }
    model
}

fn build(layout: &Layout, storeys: u32) -> Result<FloorplanModel, SynthesisError> {
    let template = build_template(layout)?;
    let rooms = layout
        .rooms
        .iter()
        .map(|(id, poly)| RoomSpec { id: id.clone(), polygon: poly.iter().map(|p| to_img(*p)).collect() })
        .collect();
    Ok(assemble(layout.canvas, storeys, template, rooms))
}

fn even(v: f64) -> f64 {
    (v / 2.0).round() * 2.0
}

/// Footprint outline (clockwise on screen) and its initial convex blocks.
fn footprint(kind: Footprint, canvas: &CanvasGeometry, rng: &mut ChaCha8Rng) -> (Vec<P>, Vec<Vec<P>>) {
    let (w, h) = (f64::from(canvas.w_img), f64::from(canvas.h_img));
    let f = 0.86 + 0.04 * rng.random::<f64>();
    let rect = |x0: f64, y0: f64, x1: f64, y1: f64| vec![(x0, y0), (x1, y0), (x1, y1), (x0, y1)];
    match kind {
        Footprint::Rectangle | Footprint::LShape | Footprint::HShape => {
            let (fw, fh) = (even(w * f), even(h * f));
            let (x0, y0) = (even((w - fw) / 2.0), even((h - fh) / 2.0));
            let (x1, y1) = (x0 + fw, y0 + fh);
            match kind {
                Footprint::Rectangle => (rect(x0, y0, x1, y1), vec![rect(x0, y0, x1, y1)]),
                Footprint::LShape => {
                    let xm = x0 + even(fw * 0.5);
                    let ym = y0 + even(fh * 0.45);
                    let outline = vec![(x0, y0), (xm, y0), (xm, ym), (x1, ym), (x1, y1), (x0, y1)];
                    (outline, vec![rect(x0, y0, xm, y1), rect(xm, ym, x1, y1)])
                }
                _ => {
                    let xa = x0 + even(fw * 0.36);
                    let xb = x1 - even(fw * 0.36);
                    let yc0 = y0 + even(fh * 0.3);
                    let yc1 = y1 - even(fh * 0.3);
                    let outline = vec![
                        (x0, y0),
                        (xa, y0),
                        (xa, yc0),
                        (xb, yc0),
                        (xb, y0),
                        (x1, y0),
                        (x1, y1),
                        (xb, y1),
                        (xb, yc1),
                        (xa, yc1),
                        (xa, y1),
                        (x0, y1),
                    ];
                    let blocks = vec![rect(x0, y0, xa, y1), rect(xa, yc0, xb, yc1), rect(xb, y0, x1, y1)];
                    (outline, blocks)
                }
            }
        }
        Footprint::Hexagon => {
            let fw = (w * f).min(h * f * 2.0 / 3f64.sqrt());
            let fh = fw * 3f64.sqrt() / 2.0;
            let (cx, cy) = (w / 2.0, h / 2.0);
            let outline: Vec<P> = [(-0.25, -0.5), (0.25, -0.5), (0.5, 0.0), (0.25, 0.5), (-0.25, 0.5), (-0.5, 0.0)]
                .iter()
                .map(|(u, v)| q((cx + u * fw, cy + v * fh)))
                .collect();
            (outline.clone(), vec![outline])
        }
        Footprint::Octagon => {
            let s = (w * f).min(h * f);
            let c = s / (2.0 + 2f64.sqrt());
            let (x0, y0) = ((w - s) / 2.0, (h - s) / 2.0);
            let (x1, y1) = (x0 + s, y0 + s);
            let outline: Vec<P> = [
                (x0 + c, y0),
                (x1 - c, y0),
                (x1, y0 + c),
                (x1, y1 - c),
                (x1 - c, y1),
                (x0 + c, y1),
                (x0, y1 - c),
                (x0, y0 + c),
            ]
            .iter()
            .map(|p| q(*p))
            .collect();
            (outline.clone(), vec![outline])
        }
    }
}

/// Longest boundary contact of a room outline.
fn max_contact(poly: &[P], outline: &[(P, P)]) -> f64 {
    let mut best: f64 = 0.0;
    for e in edges(poly) {
        for f in outline {
            if let Some((lo, hi)) = collinear_overlap(e, *f) {
                best = best.max((hi - lo) * dist(e.0, e.1));
            }
        }
    }
    best
}

/// Axis-aligned segments already present on the plan: internal pieces and
/// footprint edges.
fn existing_segments(layout: &Layout) -> Vec<((u8, i64), f64, f64)> {
    let an = analyse(layout);
    an.internal
        .iter()
        .map(|(_, a, b)| (*a, *b))
        .chain(layout.outline.iter().copied())
        .filter_map(|(a, b)| line_key(a, b))
        .collect()
}

/// Try to split room `idx`; returns the two children on success.
fn try_split(layout: &Layout, idx: usize) -> Option<(Vec<P>, Vec<P>)> {
    let mm = layout.canvas.mm_per_image_px();
    let poly = &layout.rooms[idx].1;
    let (lo, hi) = bbox(poly);
    let ext = (hi.0 - lo.0, hi.1 - lo.1);
    // Cut perpendicular to the longer side first.
    let axes = if ext.0 >= ext.1 { [0, 1] } else { [1, 0] };
    let existing = existing_segments(layout);
    let min_dim = MIN_ROOM_MM / mm;
    let min_contact = 3.0 * WINDOW_WIDTH_MM / mm;
    for axis in axes {
        for frac in [0.5, 0.4, 0.6, 0.34, 0.66] {
            let raw = coord(lo, axis) + frac * coord((ext.0, ext.1), axis);
            let c = if layout.axis_aligned { even(raw) } else { raw.round() };
            let a = clip(poly, axis, c, 1.0);
            let b = clip(poly, axis, c, -1.0);
            if a.len() < 3 || b.len() < 3 {
                continue;
            }
            let dims_ok = [&a, &b].iter().all(|p| {
                let (l, h) = bbox(p);
                h.0 - l.0 >= min_dim && h.1 - l.1 >= min_dim
            });
            if !dims_ok {
                continue;
            }
            if [&a, &b].iter().any(|p| max_contact(p, &layout.outline) < min_contact - EPS) {
                continue;
            }
            // The cut segment must not extend or touch a collinear wall.
            let cut: Vec<f64> =
                a.iter().filter(|p| (coord(**p, axis) - c).abs() < EPS).map(|p| coord(*p, 1 - axis)).collect();
            let (clo, chi) =
                cut.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |acc, v| (acc.0.min(*v), acc.1.max(*v)));
            let key = (if axis == 0 { 1 } else { 0 }, (c * 100.0).round() as i64);
            let touches = existing.iter().any(|(k, l, h)| *k == key && *l <= chi + EPS && *h >= clo - EPS);
            if touches {
                continue;
            }
            // Every room must stay reachable through a door-wide opening.
            let mut trial = layout.clone();
            split_at(&mut trial, idx, (a.clone(), b.clone()));
            if build_template(&trial).is_err() {
                continue;
            }
            return Some((a, b));
        }
    }
    None
}

fn next_room_id(layout: &Layout) -> String {
    let max = layout.rooms.iter().filter_map(|(id, _)| id.strip_prefix("room")?.parse::<u32>().ok()).max().unwrap_or(0);
    format!("room{}", max + 1)
}

fn split_at(layout: &mut Layout, idx: usize, children: (Vec<P>, Vec<P>)) {
    let id = next_room_id(layout);
    layout.rooms[idx].1 = children.0;
    layout.rooms.insert(idx + 1, (id, children.1));
}

fn seed_for(task: &DesignTask, seed: u64) -> u64 {
    seed ^ Fnv64::hash_bytes(task.id.as_bytes())
}

/// Image size used for a task/seed pair.
pub(crate) fn canvas_for(task: &DesignTask, seed: u64) -> CanvasGeometry {
    let (w, h) = IMAGE_SIZES[(seed_for(task, seed) % IMAGE_SIZES.len() as u64) as usize];
    CanvasGeometry::with_image(w, h)
}

fn base_layout(task: &DesignTask, seed: u64) -> Result<Layout, SynthesisError> {
    task.validate()?;
    let canvas = canvas_for(task, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed_for(task, seed));
    let (outline_poly, blocks) = footprint(task.footprint, &canvas, &mut rng);
    let outline: Vec<(P, P)> = edges(&outline_poly).collect();
    let mut layout = Layout {
        canvas,
        outline,
        rooms: blocks.into_iter().enumerate().map(|(i, b)| (format!("room{}", i + 1), b)).collect(),
        axis_aligned: task.footprint.is_axis_aligned(),
    };
    let infeasible = || SynthesisError::Infeasible { footprint: task.footprint, rooms: task.rooms };
    if layout.rooms.len() > task.rooms as usize {
        return Err(infeasible());
    }
    while layout.rooms.len() < task.rooms as usize {
        let mut order: Vec<usize> = (0..layout.rooms.len()).collect();
        order.sort_by(|&i, &j| area(&layout.rooms[j].1).total_cmp(&area(&layout.rooms[i].1)).then(i.cmp(&j)));
        let split = order.iter().find_map(|&i| try_split(&layout, i).map(|c| (i, c)));
        let (i, children) = split.ok_or_else(infeasible)?;
        split_at(&mut layout, i, children);
    }
    Ok(layout)
}

/// Synthesize the base plan of a task (modifications are not applied).
pub fn synthesize_floorplan(task: &DesignTask, seed: u64) -> Result<FloorplanModel, SynthesisError> {
    let layout = base_layout(task, seed)?;
    build(&layout, task.storeys)
}

fn layout_of(fp: &FloorplanModel) -> Layout {
    let outline: Vec<(P, P)> = fp
        .walls
        .iter()
        .filter(|w| w.storey == 1 && w.kind == WallKind::External)
        .map(|w| (from_img(&w.start), from_img(&w.end)))
        .collect();
    let axis_aligned = outline.iter().all(|(a, b)| line_key(*a, *b).is_some());
    Layout {
        canvas: fp.canvas,
        outline,
        rooms: fp.rooms.iter().map(|r| (r.id.clone(), r.polygon.iter().map(from_img).collect())).collect(),
        axis_aligned,
    }
}

fn hint_score(hint: LocationHint, poly: &[P], canvas: &CanvasGeometry) -> f64 {
    let (cx, cy) = centroid(poly);
    let (x, y) = (cx / f64::from(canvas.w_img), cy / f64::from(canvas.h_img));
    match hint {
        LocationHint::Largest => -area(poly),
        LocationHint::TopLeft => x + y,
        LocationHint::TopRight => -x + y,
        LocationHint::BottomLeft => x - y,
        LocationHint::BottomRight => -x - y,
        LocationHint::Left => x,
        LocationHint::Right => -x,
        LocationHint::Bottom => -y,
        LocationHint::Middle => (x - 0.5).hypot(y - 0.5),
    }
}

/// Convex union of two rooms sharing a complete edge, if it stays convex.
fn merge(a: &[P], b: &[P]) -> Option<Vec<P>> {
    let shared = edges(a).any(|(p, q2)| {
        edges(b).any(|(r, s)| (dist(p, s) < EPS && dist(q2, r) < EPS) || (dist(p, r) < EPS && dist(q2, s) < EPS))
    });
    if !shared {
        return None;
    }
    let mut pts: Vec<P> = a.iter().chain(b.iter()).copied().collect();
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.dedup_by(|x, y| dist(*x, *y) < EPS);
    let hull = convex_hull(&pts);
    ((area(&hull) - area(a) - area(b)).abs() < 1.0).then_some(hull)
}

/// Monotone chain hull; clockwise on screen, collinear points dropped.
fn convex_hull(pts: &[P]) -> Vec<P> {
    let cross = |o: P, a: P, b: P| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut lower: Vec<P> = Vec::new();
    for &p in pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 1e-9 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<P> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 1e-9 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Apply room-level edits and rebuild walls and openings from the rooms.
pub fn apply_modifications(fp: &FloorplanModel, mods: &[Modification]) -> Result<FloorplanModel, SynthesisError> {
    let mut layout = layout_of(fp);
    let find = |layout: &Layout, id: &str| {
        layout.rooms.iter().position(|(r, _)| r == id).ok_or_else(|| SynthesisError::UnknownRoom(id.to_string()))
    };
    for m in mods {
        match m {
            Modification::AddRoom(hint) => {
                let mut order: Vec<usize> = (0..layout.rooms.len()).collect();
                order.sort_by(|&i, &j| {
                    let (si, sj) = (
                        hint_score(*hint, &layout.rooms[i].1, &layout.canvas),
                        hint_score(*hint, &layout.rooms[j].1, &layout.canvas),
                    );
                    si.total_cmp(&sj).then(i.cmp(&j))
                });
                let split = order.iter().find_map(|&i| try_split(&layout, i).map(|c| (i, c)));
                let (i, children) = split.ok_or_else(|| SynthesisError::CannotSplit(format!("{hint:?}")))?;
                split_at(&mut layout, i, children);
            }
            Modification::SplitRoom(id) => {
                let i = find(&layout, id)?;
                let children = try_split(&layout, i).ok_or_else(|| SynthesisError::CannotSplit(id.clone()))?;
                split_at(&mut layout, i, children);
            }
            Modification::RemoveRoom(id) => {
                let i = find(&layout, id)?;
                let target = layout.rooms[i].1.clone();
                let (j, merged) = (0..layout.rooms.len())
                    .filter(|&j| j != i)
                    .find_map(|j| merge(&target, &layout.rooms[j].1).map(|m| (j, m)))
                    .ok_or_else(|| SynthesisError::CannotRemove(id.clone()))?;
                layout.rooms[j].1 = merged;
                layout.rooms.remove(i);
            }
        }
    }
    build(&layout, fp.storeys.len() as u32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::Modality;

    pub(crate) fn task(footprint: Footprint, storeys: u32, rooms: u32) -> DesignTask {
        DesignTask {
            id: format!("t-{footprint:?}-{rooms}"),
            modality: Modality::TextOnly,
            footprint,
            storeys,
            rooms,
            modifications: vec![],
            prose: String::new(),
        }
    }

    #[test]
    fn rectangle_three_rooms_two_storeys() {
        let fp = synthesize_floorplan(&task(Footprint::Rectangle, 2, 3), 7).unwrap();
        assert_eq!(fp.validate(), vec![]);
        assert_eq!(fp.storeys.len(), 2);
        assert_eq!(fp.rooms.len(), 3);
        let ext = fp.storey_walls(1).filter(|w| w.kind == WallKind::External).count();
        assert_eq!(ext, 4);
        assert_eq!(fp.storeys[1].elevation, 3000);
        // Entrance only on the ground floor.
        let d1 = fp.storey_openings(1).iter().filter(|o| o.kind == OpeningKind::Door).count();
        let d2 = fp.storey_openings(2).iter().filter(|o| o.kind == OpeningKind::Door).count();
        assert_eq!(d1, d2 + 1);
        assert_eq!(d2, 2);
    }

    #[test]
    fn polygon_footprints_have_expected_external_walls() {
        for (f, rooms, ext) in [
            (Footprint::Hexagon, 4, 6),
            (Footprint::Octagon, 3, 8),
            (Footprint::LShape, 4, 6),
            (Footprint::HShape, 6, 12),
        ] {
            for seed in 0..4 {
                let fp = synthesize_floorplan(&task(f, 1, rooms), seed).unwrap();
                assert_eq!(fp.validate(), vec![], "{f:?}");
                assert_eq!(fp.rooms.len(), rooms as usize);
                let n = fp.storey_walls(1).filter(|w| w.kind == WallKind::External).count();
                assert_eq!(n, ext, "{f:?}");
            }
        }
    }

    #[test]
    fn deterministic() {
        let t = task(Footprint::Rectangle, 1, 5);
        assert_eq!(synthesize_floorplan(&t, 3).unwrap(), synthesize_floorplan(&t, 3).unwrap());
    }

    #[test]
    fn infeasible_room_count() {
        let err = synthesize_floorplan(&task(Footprint::Rectangle, 1, 40), 0).unwrap_err();
        assert!(matches!(err, SynthesisError::Infeasible { .. }));
    }

    #[test]
    fn modifications_change_room_count() {
        let fp = synthesize_floorplan(&task(Footprint::Rectangle, 1, 4), 1).unwrap();
        let added = apply_modifications(&fp, &[Modification::AddRoom(LocationHint::Largest)]).unwrap();
        assert_eq!(added.rooms.len(), 5);
        assert_eq!(added.validate(), vec![]);
        let removed = apply_modifications(&fp, &[Modification::RemoveRoom("room1".into())]).unwrap();
        assert_eq!(removed.rooms.len(), 3);
        let err = apply_modifications(&fp, &[Modification::SplitRoom("room99".into())]).unwrap_err();
        assert_eq!(err, SynthesisError::UnknownRoom("room99".into()));
    }

    #[test]
    fn every_room_has_a_window() {
        let fp = synthesize_floorplan(&task(Footprint::Rectangle, 1, 7), 0).unwrap();
        let windows = fp.openings.iter().filter(|o| o.kind == OpeningKind::Window).count();
        assert!(windows >= 7);
    }
}
