//! Design layer: parametric floorplan synthesis, sketch rasterization,
//! raster segmentation and interpretation into a [`FloorplanModel`].
//!
//! [`FloorplanModel`]: crate::floorplan::FloorplanModel

mod interpret;
mod sketch;
mod synth;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical;

pub use interpret::{interpret_floorplan, InterpretError};
pub use sketch::{render_sketch, segment_sketch, Axis, OpeningMark, SegmentSet, WallRun};
pub use synth::{
    apply_modifications, synthesize_floorplan, DOOR_WIDTH_MM, EXTERNAL_THICKNESS_MM, INTERNAL_THICKNESS_MM,
    WINDOW_WIDTH_MM,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Modality {
    TextOnly,
    Sketch,
    Dataset,
    SketchModified,
    DatasetModified,
}

impl Modality {
    pub fn is_modified(self) -> bool {
        matches!(self, Modality::SketchModified | Modality::DatasetModified)
    }

    /// Whether the design arrives as an image that must be segmented.
    pub fn is_raster(self) -> bool {
        !matches!(self, Modality::TextOnly)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Footprint {
    Rectangle,
    Hexagon,
    Octagon,
    HShape,
    LShape,
}

impl Footprint {
    pub fn is_axis_aligned(self) -> bool {
        !matches!(self, Footprint::Hexagon | Footprint::Octagon)
    }

    /// Rooms the footprint starts with before any interior split.
    pub fn base_rooms(self) -> u32 {
        match self {
            Footprint::LShape => 2,
            Footprint::HShape => 3,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LocationHint {
    Largest,
    TopLeft,
    TopRight,
    BottomLeft,
    BottomRight,
    Left,
    Right,
    Bottom,
    Middle,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Modification {
    AddRoom(LocationHint),
    SplitRoom(String),
    RemoveRoom(String),
}

impl Modification {
    pub fn room_delta(&self) -> i64 {
        match self {
            Modification::AddRoom(_) | Modification::SplitRoom(_) => 1,
            Modification::RemoveRoom(_) => -1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignTask {
    pub id: String,
    pub modality: Modality,
    pub footprint: Footprint,
    pub storeys: u32,
    pub rooms: u32,
    #[serde(default)]
    pub modifications: Vec<Modification>,
    pub prose: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TaskError {
    #[error("task {0}: storeys must be 1..=3")]
    Storeys(String),
    #[error("task {0}: at least one room is required")]
    Rooms(String),
    #[error("task {0}: modifications are only allowed for modified modalities")]
    UnexpectedModifications(String),
}

impl DesignTask {
    pub fn validate(&self) -> Result<(), TaskError> {
        if !(1..=3).contains(&self.storeys) {
            return Err(TaskError::Storeys(self.id.clone()));
        }
        if self.rooms == 0 {
            return Err(TaskError::Rooms(self.id.clone()));
        }
        if !self.modifications.is_empty() && !self.modality.is_modified() {
            return Err(TaskError::UnexpectedModifications(self.id.clone()));
        }
        Ok(())
    }

    /// Room count after all modifications.
    pub fn final_rooms(&self) -> i64 {
        i64::from(self.rooms) + self.modifications.iter().map(Modification::room_delta).sum::<i64>()
    }

    pub fn to_canonical_json(&self) -> Vec<u8> {
        canonical::to_canonical(self)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, serde_json::Error> {
        serde_json::from_slice(bytes)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthesisError {
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error("cannot fit {rooms} rooms into a {footprint:?} footprint")]
    Infeasible { footprint: Footprint, rooms: u32 },
    #[error("unknown room {0}")]
    UnknownRoom(String),
    #[error("room {0} cannot be split")]
    CannotSplit(String),
    #[error("removing room {0} leaves no valid merge")]
    CannotRemove(String),
    #[error("room {0} is unreachable from the entrance")]
    Unreachable(String),
    #[error("no exterior wall long enough for an entrance")]
    NoEntrance,
}
