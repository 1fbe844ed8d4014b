//! GUI-agent pipeline for authoring building models against a deterministic
//! mock BIM environment, plus the benchmark harness that evaluates it.

pub mod actions;
pub mod agent;
pub mod bench;
pub mod canonical;
pub mod design;
pub mod document;
pub mod env;
pub mod evaluation;
pub mod floorplan;
pub mod geometry;
pub mod grounding;
pub mod planning;
pub mod raster;
pub mod retrieval;
