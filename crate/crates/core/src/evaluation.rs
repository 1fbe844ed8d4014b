//! Scoring a building document against the ground-truth floorplan, per
//! subtask category and storey.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::document::{BuildingDocument, Census, Element, ElementKind, Geometry};
use crate::floorplan::{FloorplanModel, OpeningKind, WallKind, WallSpec};
use crate::geometry::{gui_to_doc, map_to_gui, MM_PER_GUI_PX};

/// Endpoint tolerance: one GUI pixel, in document millimetres.
pub const ENDPOINT_TOLERANCE_MM: i64 = MM_PER_GUI_PX as i64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    Layer,
    Wall,
    Slab,
    Openings,
    Roof,
}

impl Category {
    pub const ALL: [Category; 5] =
        [Category::Layer, Category::Wall, Category::Slab, Category::Openings, Category::Roof];

    pub fn name(self) -> &'static str {
        match self {
            Category::Layer => "Layer",
            Category::Wall => "Wall",
            Category::Slab => "Slab",
            Category::Openings => "Openings",
            Category::Roof => "Roof",
        }
    }
}

/// One subtask check: a category slice of one storey.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Check {
    pub category: Category,
    pub storey: u32,
    pub part: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evaluation {
    pub checks: Vec<Check>,
    pub census_match: bool,
}

impl Evaluation {
    /// (attempted, succeeded) subtasks of a category.
    pub fn tally(&self, c: Category) -> (u32, u32) {
        let of: Vec<&Check> = self.checks.iter().filter(|k| k.category == c).collect();
        (of.len() as u32, of.iter().filter(|k| k.passed).count() as u32)
    }

    pub fn all_passed(&self) -> bool {
        self.census_match && self.checks.iter().all(|c| c.passed)
    }

    pub fn category_passed(&self, c: Category) -> bool {
        self.checks.iter().filter(|k| k.category == c).all(|k| k.passed)
    }
}

type P = [i64; 2];

fn truth_doc_point(p: crate::geometry::ImagePoint, truth: &FloorplanModel) -> Option<P> {
    let q = map_to_gui(p, &truth.canvas).ok()?;
    let (x, y) = gui_to_doc(q, &truth.canvas);
    Some([x, y])
}

fn near(a: P, b: P) -> bool {
    (a[0] - b[0]).abs() <= ENDPOINT_TOLERANCE_MM && (a[1] - b[1]).abs() <= ENDPOINT_TOLERANCE_MM
}

fn same_segment((a, b): (P, P), (c, d): (P, P)) -> bool {
    (near(a, c) && near(b, d)) || (near(a, d) && near(b, c))
}

/// Census with empty layers dropped, for comparison.
fn trimmed(c: &Census) -> BTreeMap<String, BTreeMap<ElementKind, usize>> {
    c.per_layer.iter().filter(|(_, m)| m.values().any(|n| *n > 0)).map(|(k, v)| (k.clone(), v.clone())).collect()
}

/// Compare a document with the truth plan. Layers are matched by name;
/// extra layers that hold no elements are ignored.
pub fn evaluate_document(doc: &BuildingDocument, truth: &FloorplanModel) -> Evaluation {
    let mut checks = Vec::new();
    let mut check = |category, storey, part: &str, passed: bool, detail: String| {
        checks.push(Check { category, storey, part: part.to_string(), passed, detail });
    };
    let top = truth.storeys.last().map(|s| s.index);

    for s in &truth.storeys {
        let layer = doc.layer_by_name(&s.name);
        let on_layer: Vec<&Element> = match layer {
            Some(l) => doc.elements.iter().filter(|e| e.layer == l.index).collect(),
            None => vec![],
        };
        let layer_ok = layer.is_some_and(|l| l.elevation == s.elevation && l.wall_height == s.wall_height);
        let detail = match layer {
            None => format!("no layer named {}", s.name),
            Some(l) if !layer_ok => format!(
                "layer {} has elevation {} and wall height {}, expected {} and {}",
                s.name, l.elevation, l.wall_height, s.elevation, s.wall_height
            ),
            Some(_) => String::new(),
        };
        check(Category::Layer, s.index, "layer", layer_ok, detail);

        let doc_walls: Vec<(u64, (P, P))> = on_layer.iter().filter_map(|e| Some((e.id, e.wall_endpoints()?))).collect();
        let seg = |w: &WallSpec| Some((truth_doc_point(w.start, truth)?, truth_doc_point(w.end, truth)?));
        // Truth wall id → matching document wall id.
        let mut matched: BTreeMap<String, u64> = BTreeMap::new();
        let mut used = Vec::new();
        for w in truth.storey_walls(s.index) {
            let Some(t) = seg(w) else { continue };
            if let Some((id, _)) = doc_walls.iter().find(|(id, d)| !used.contains(id) && same_segment(t, *d)) {
                matched.insert(w.id.clone(), *id);
                used.push(*id);
            }
        }
        for (kind, part) in [(WallKind::External, "external"), (WallKind::Internal, "internal")] {
            let want: Vec<&WallSpec> = truth.storey_walls(s.index).filter(|w| w.kind == kind).collect();
            let missing: Vec<&str> =
                want.iter().filter(|w| !matched.contains_key(&w.id)).map(|w| w.id.as_str()).collect();
            let extra = if kind == WallKind::Internal { doc_walls.len() - used.len() } else { 0 };
            let ok = missing.is_empty() && extra == 0;
            let detail = if ok { String::new() } else { format!("missing walls {missing:?}, {extra} unexpected") };
            check(Category::Wall, s.index, part, ok, detail);
        }

        let external: Vec<u64> = truth
            .storey_walls(s.index)
            .filter(|w| w.kind == WallKind::External)
            .filter_map(|w| matched.get(&w.id).copied())
            .collect();
        let n_external = truth.storey_walls(s.index).filter(|w| w.kind == WallKind::External).count();
        let slabs: Vec<&&Element> = on_layer.iter().filter(|e| e.kind == ElementKind::Slab).collect();
        let slab_ok = match slabs.as_slice() {
            [one] => match &one.geometry {
                Geometry::Slab { boundary_walls, .. } => {
                    let mut b = boundary_walls.clone();
                    let mut x = external.clone();
                    b.sort_unstable();
                    x.sort_unstable();
                    x.len() == n_external && b == x
                }
                _ => false,
            },
            _ => false,
        };
        check(
            Category::Slab,
            s.index,
            "slab",
            slab_ok,
            if slab_ok { String::new() } else { format!("{} slabs on layer", slabs.len()) },
        );

        for (kind, ekind, part) in
            [(OpeningKind::Window, ElementKind::Window, "windows"), (OpeningKind::Door, ElementKind::Door, "doors")]
        {
            let mut want: BTreeMap<Option<u64>, usize> = BTreeMap::new();
            for o in truth.storey_openings(s.index).into_iter().filter(|o| o.kind == kind) {
                *want.entry(matched.get(&o.host_wall).copied()).or_default() += 1;
            }
            let mut got: BTreeMap<Option<u64>, usize> = BTreeMap::new();
            for e in on_layer.iter().filter(|e| e.kind == ekind) {
                if let Geometry::Opening { host_wall, .. } = e.geometry {
                    *got.entry(Some(host_wall)).or_default() += 1;
                }
            }
            let ok = !want.contains_key(&None) && want == got;
            check(
                Category::Openings,
                s.index,
                part,
                ok,
                if ok { String::new() } else { format!("{part}: want {want:?}, got {got:?}") },
            );
        }

        if Some(s.index) == top {
            if let Some(roof) = &truth.roof {
                let roofs: Vec<f64> = on_layer
                    .iter()
                    .filter_map(|e| match e.geometry {
                        Geometry::Roof { pitch, .. } => Some(pitch),
                        _ => None,
                    })
                    .collect();
                let ok = roofs.len() == 1 && roofs[0] == roof.pitch;
                check(
                    Category::Roof,
                    s.index,
                    "roof",
                    ok,
                    if ok { String::new() } else { format!("roof pitches {roofs:?}") },
                );
            }
        }
    }
    let census_match = trimmed(&doc.census()) == trimmed(&truth.expected_census());
    Evaluation { checks, census_match }
}
