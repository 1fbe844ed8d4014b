//! Interpreted floorplan model and its validation rules.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::canonical;
use crate::geometry::{CanvasGeometry, ImagePoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WallKind {
    External,
    Internal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OpeningKind {
    Door,
    Window,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallSpec {
    pub id: String,
    pub start: ImagePoint,
    pub end: ImagePoint,
    pub kind: WallKind,
    /// Millimetres.
    pub thickness: f64,
    /// Millimetres.
    pub height: f64,
    pub storey: u32,
}

impl WallSpec {
    pub fn length_px(&self) -> f64 {
        self.start.dist(&self.end)
    }

    pub fn point_at(&self, t: f64) -> ImagePoint {
        self.start.lerp(&self.end, t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpeningSpec {
    pub id: String,
    pub host_wall: String,
    /// Normalized position along the host wall, strictly inside (0, 1).
    pub t: f64,
    pub kind: OpeningKind,
    /// Millimetres.
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreySpec {
    pub index: u32,
    pub name: String,
    /// Z in millimetres.
    pub elevation: i64,
    /// Delta Z in millimetres.
    pub wall_height: i64,
}

impl StoreySpec {
    /// Standard storey: `0k-Floor`, 3000 mm per level.
    pub fn standard(index: u32) -> Self {
        StoreySpec {
            index,
            name: format!("{index:02}-Floor"),
            elevation: (i64::from(index) - 1) * STOREY_HEIGHT_MM,
            wall_height: STOREY_HEIGHT_MM,
        }
    }
}

pub const STOREY_HEIGHT_MM: i64 = 3000;
pub const ROOF_PITCH_DEG: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RoofKind {
    Hip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoofSpec {
    pub pitch: f64,
    pub kind: RoofKind,
}

/// A room outline; layouts are identical on every storey.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    pub id: String,
    pub polygon: Vec<ImagePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloorplanModel {
    pub canvas: CanvasGeometry,
    pub storeys: Vec<StoreySpec>,
    pub walls: Vec<WallSpec>,
    pub openings: Vec<OpeningSpec>,
    pub roof: Option<RoofSpec>,
    #[serde(default)]
    pub rooms: Vec<RoomSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Violation {
    DuplicateId(String),
    StoreyIndexGap(u32),
    GroundElevationNonZero(u32),
    ElevationNotIncreasing(u32),
    NonPositiveWallHeight(u32),
    DegenerateWall(String),
    NonPositiveThickness(String),
    NonPositiveHeight(String),
    UnknownStorey(String),
    WallOutsideImage(String),
    UnknownHostWall(String),
    OpeningOutOfRange(String),
    OpeningTooWide(String),
    BoundaryOpen(u32),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

fn vertex_key(p: &ImagePoint) -> (i64, i64) {
    // 1e-3 px grid; coordinates are quantized well above that.
    ((p.x * 1000.0).round() as i64, (p.y * 1000.0).round() as i64)
}

impl FloorplanModel {
    pub fn wall(&self, id: &str) -> Option<&WallSpec> {
        self.walls.iter().find(|w| w.id == id)
    }

    pub fn storey_walls(&self, storey: u32) -> impl Iterator<Item = &WallSpec> {
        self.walls.iter().filter(move |w| w.storey == storey)
    }

    /// Storey of an opening (its host wall's storey).
    pub fn opening_storey(&self, o: &OpeningSpec) -> Option<u32> {
        self.wall(&o.host_wall).map(|w| w.storey)
    }

    pub fn storey_openings(&self, storey: u32) -> Vec<&OpeningSpec> {
        self.openings.iter().filter(|o| self.opening_storey(o) == Some(storey)).collect()
    }

    pub fn to_canonical_json(&self) -> Vec<u8> {
        canonical::to_canonical(self)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, serde_json::Error> {
        serde_json::from_slice(bytes)
    }

    /// Check every structural invariant; an empty list means valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        for id in self.walls.iter().map(|w| &w.id).chain(self.openings.iter().map(|o| &o.id)) {
            if !seen.insert(id.clone()) {
                out.push(Violation::DuplicateId(id.clone()));
            }
        }

        for (i, s) in self.storeys.iter().enumerate() {
            if s.index != i as u32 + 1 {
                out.push(Violation::StoreyIndexGap(s.index));
            }
            if i == 0 && s.elevation != 0 {
                out.push(Violation::GroundElevationNonZero(s.index));
            }
            if i > 0 && s.elevation <= self.storeys[i - 1].elevation {
                out.push(Violation::ElevationNotIncreasing(s.index));
            }
            if s.wall_height <= 0 {
                out.push(Violation::NonPositiveWallHeight(s.index));
            }
        }

        let storey_ids: BTreeSet<u32> = self.storeys.iter().map(|s| s.index).collect();
        for w in &self.walls {
            if w.start.dist(&w.end) == 0.0 {
                out.push(Violation::DegenerateWall(w.id.clone()));
            }
            if w.thickness.is_nan() || w.thickness <= 0.0 {
                out.push(Violation::NonPositiveThickness(w.id.clone()));
            }
            if w.height.is_nan() || w.height <= 0.0 {
                out.push(Violation::NonPositiveHeight(w.id.clone()));
            }
            if !storey_ids.contains(&w.storey) {
                out.push(Violation::UnknownStorey(w.id.clone()));
            }
            if !self.canvas.contains_image(&w.start) || !self.canvas.contains_image(&w.end) {
                out.push(Violation::WallOutsideImage(w.id.clone()));
            }
        }

        let mm_per_px = self.canvas.mm_per_image_px();
        for o in &self.openings {
            match self.wall(&o.host_wall) {
                None => out.push(Violation::UnknownHostWall(o.id.clone())),
                Some(w) => {
                    if !(o.t > 0.0 && o.t < 1.0) {
                        out.push(Violation::OpeningOutOfRange(o.id.clone()));
                    }
                    if o.width.is_nan() || o.width >= w.length_px() * mm_per_px {
                        out.push(Violation::OpeningTooWide(o.id.clone()));
                    }
                }
            }
        }

        // External walls of each storey must close into cycles: every vertex
        // touched by an external wall has even, non-zero degree.
        for s in &self.storeys {
            let mut degree: BTreeMap<(i64, i64), u32> = BTreeMap::new();
            for w in self.storey_walls(s.index).filter(|w| w.kind == WallKind::External) {
                *degree.entry(vertex_key(&w.start)).or_default() += 1;
                *degree.entry(vertex_key(&w.end)).or_default() += 1;
            }
            let has_walls = self.storey_walls(s.index).next().is_some();
            if (has_walls && degree.is_empty()) || degree.values().any(|d| d % 2 == 1) {
                out.push(Violation::BoundaryOpen(s.index));
            }
        }
        out.sort();
        out
    }

    /// Number of rooms per storey, when the layout carries room outlines.
    pub fn room_count(&self) -> usize {
        self.rooms.len()
    }

    /// Expected element counts per storey name and kind for a faithful build.
    pub fn expected_census(&self) -> crate::document::Census {
        use crate::document::{Census, ElementKind};
        let mut census = Census::default();
        let top = self.storeys.last().map(|s| s.index);
        for s in &self.storeys {
            let walls = self.storey_walls(s.index).count();
            census.add(&s.name, ElementKind::Wall, walls);
            census.add(&s.name, ElementKind::Slab, usize::from(walls > 0));
            for o in self.storey_openings(s.index) {
                let kind = match o.kind {
                    OpeningKind::Door => ElementKind::Door,
                    OpeningKind::Window => ElementKind::Window,
                };
                census.add(&s.name, kind, 1);
            }
            if self.roof.is_some() && Some(s.index) == top {
                census.add(&s.name, ElementKind::Roof, 1);
            }
        }
        census
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// A 2-storey-capable rectangle with one window and one door.
    pub(crate) fn rectangle_plan() -> FloorplanModel {
        let p = |x: f64, y: f64| ImagePoint::new(x, y);
        let corners = [p(100.0, 100.0), p(500.0, 100.0), p(500.0, 400.0), p(100.0, 400.0)];
        let walls = (0..4)
            .map(|i| WallSpec {
                id: format!("wall{}_floor1", i + 1),
                start: corners[i],
                end: corners[(i + 1) % 4],
                kind: WallKind::External,
                thickness: 200.0,
                height: 3000.0,
                storey: 1,
            })
            .collect();
        FloorplanModel {
            canvas: CanvasGeometry::default(),
            storeys: vec![StoreySpec::standard(1)],
            walls,
            openings: vec![
                OpeningSpec {
                    id: "door1_floor1".into(),
                    host_wall: "wall1_floor1".into(),
                    t: 0.25,
                    kind: OpeningKind::Door,
                    width: 800.0,
                },
                OpeningSpec {
                    id: "window1_floor1".into(),
                    host_wall: "wall3_floor1".into(),
                    t: 0.5,
                    kind: OpeningKind::Window,
                    width: 600.0,
                },
            ],
            roof: Some(RoofSpec { pitch: ROOF_PITCH_DEG, kind: RoofKind::Hip }),
            rooms: vec![],
        }
    }

    #[test]
    fn well_formed_rectangle_is_valid() {
        assert_eq!(rectangle_plan().validate(), vec![]);
    }

    #[test]
    fn opening_out_of_range() {
        let mut fp = rectangle_plan();
        fp.openings[1].t = 1.2;
        assert_eq!(fp.validate(), vec![Violation::OpeningOutOfRange("window1_floor1".into())]);
    }

    #[test]
    fn elevation_not_increasing() {
        let mut fp = rectangle_plan();
        fp.storeys = vec![StoreySpec::standard(1), StoreySpec::standard(2), StoreySpec::standard(3)];
        fp.storeys[2].elevation = 2500;
        assert_eq!(fp.validate(), vec![Violation::ElevationNotIncreasing(3)]);
    }

    /// Each single-invariant mutation must be detected.
    #[test]
    fn mutations_are_detected() {
        type Mutation = (fn(&mut FloorplanModel), Violation);
        let cases: Vec<Mutation> = vec![
            (|f| f.walls[1].id = "wall1_floor1".into(), Violation::DuplicateId("wall1_floor1".into())),
            (|f| f.storeys[0].index = 2, Violation::StoreyIndexGap(2)),
            (|f| f.storeys[0].elevation = 1000, Violation::GroundElevationNonZero(1)),
            (|f| f.storeys[0].wall_height = 0, Violation::NonPositiveWallHeight(1)),
            (|f| f.walls[0].thickness = 0.0, Violation::NonPositiveThickness("wall1_floor1".into())),
            (|f| f.walls[0].height = -1.0, Violation::NonPositiveHeight("wall1_floor1".into())),
            (|f| f.openings[0].host_wall = "nope".into(), Violation::UnknownHostWall("door1_floor1".into())),
            (|f| f.openings[0].t = 0.0, Violation::OpeningOutOfRange("door1_floor1".into())),
            (|f| f.openings[0].width = 1e6, Violation::OpeningTooWide("door1_floor1".into())),
        ];
        for (mutate, expected) in cases {
            let mut fp = rectangle_plan();
            mutate(&mut fp);
            assert!(fp.validate().contains(&expected), "{expected:?} not detected: {:?}", fp.validate());
        }

        let mut fp = rectangle_plan();
        fp.walls[2].kind = WallKind::Internal;
        assert!(fp.validate().contains(&Violation::BoundaryOpen(1)));

        let mut fp = rectangle_plan();
        fp.walls[2].storey = 7;
        assert!(fp.validate().contains(&Violation::UnknownStorey("wall3_floor1".into())));

        let mut fp = rectangle_plan();
        fp.walls[1].end = fp.walls[1].start;
        assert!(fp.validate().contains(&Violation::DegenerateWall("wall2_floor1".into())));

        let mut fp = rectangle_plan();
        fp.walls[0].start = ImagePoint::new(-5.0, 100.0);
        assert!(fp.validate().contains(&Violation::WallOutsideImage("wall1_floor1".into())));
    }

    #[test]
    fn canonical_round_trip() {
        let fp = rectangle_plan();
        let bytes = fp.to_canonical_json();
        let back = FloorplanModel::from_json(&bytes).unwrap();
        assert_eq!(back, fp);
        assert_eq!(back.to_canonical_json(), bytes);
    }
}
