//! The building document produced by the authoring environment, and the
//! per-kind element census used for evaluation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::canonical;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ElementKind {
    Wall,
    Slab,
    Door,
    Window,
    Roof,
}

impl ElementKind {
    pub const ALL: [ElementKind; 5] =
        [ElementKind::Wall, ElementKind::Slab, ElementKind::Door, ElementKind::Window, ElementKind::Roof];

    pub fn label(self) -> &'static str {
        match self {
            ElementKind::Wall => "Wall",
            ElementKind::Slab => "Slab",
            ElementKind::Door => "Door",
            ElementKind::Window => "Window",
            ElementKind::Roof => "Roof",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Layer {
    pub index: u32,
    pub name: String,
    pub elevation: i64,
    pub wall_height: i64,
}

/// Geometry in document millimetres, with kind-specific parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Geometry {
    Wall { start: [i64; 2], end: [i64; 2], height: i64, thickness: i64 },
    Slab { boundary_walls: Vec<u64>, outline: Vec<[i64; 2]> },
    Opening { host_wall: u64, t: f64, width: i64 },
    Roof { min: [i64; 2], max: [i64; 2], pitch: f64, walls: Vec<u64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Element {
    pub id: u64,
    pub kind: ElementKind,
    pub layer: u32,
    pub geometry: Geometry,
}

impl Element {
    pub fn wall_endpoints(&self) -> Option<([i64; 2], [i64; 2])> {
        match &self.geometry {
            Geometry::Wall { start, end, .. } => Some((*start, *end)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildingDocument {
    pub layers: Vec<Layer>,
    pub elements: Vec<Element>,
}

impl Default for BuildingDocument {
    fn default() -> Self {
        BuildingDocument {
            layers: vec![Layer { index: 1, name: "Design Layer-1".into(), elevation: 0, wall_height: 3000 }],
            elements: Vec::new(),
        }
    }
}

impl BuildingDocument {
    pub fn layer(&self, index: u32) -> Option<&Layer> {
        self.layers.iter().find(|l| l.index == index)
    }

    pub fn layer_by_name(&self, name: &str) -> Option<&Layer> {
        self.layers.iter().find(|l| l.name == name)
    }

    pub fn element(&self, id: u64) -> Option<&Element> {
        self.elements.iter().find(|e| e.id == id)
    }

    pub fn to_canonical_json(&self) -> Vec<u8> {
        canonical::to_canonical(self)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, serde_json::Error> {
        serde_json::from_slice(bytes)
    }

    /// Ids strictly increasing and every element on an existing layer.
    pub fn is_consistent(&self) -> bool {
        self.elements.windows(2).all(|w| w[0].id < w[1].id)
            && self.elements.iter().all(|e| self.layer(e.layer).is_some())
    }

    pub fn census(&self) -> Census {
        let mut c = Census::default();
        for e in &self.elements {
            let name = self.layer(e.layer).map(|l| l.name.clone()).unwrap_or_else(|| format!("#{}", e.layer));
            c.add(&name, e.kind, 1);
        }
        c
    }
}

/// Element counts per layer name and in total. Layers and kinds with a zero
/// count are omitted from `per_layer`; `total` always lists every kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Census {
    pub per_layer: BTreeMap<String, BTreeMap<ElementKind, usize>>,
    pub total: BTreeMap<ElementKind, usize>,
}

impl Default for Census {
    fn default() -> Self {
        Census { per_layer: BTreeMap::new(), total: ElementKind::ALL.iter().map(|k| (*k, 0)).collect() }
    }
}

impl Census {
    pub fn add(&mut self, layer: &str, kind: ElementKind, n: usize) {
        if n == 0 {
            return;
        }
        *self.per_layer.entry(layer.to_string()).or_default().entry(kind).or_default() += n;
        *self.total.entry(kind).or_default() += n;
    }

    pub fn count(&self, kind: ElementKind) -> usize {
        self.total.get(&kind).copied().unwrap_or(0)
    }

    pub fn total_elements(&self) -> usize {
        self.total.values().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wall(id: u64, layer: u32) -> Element {
        Element {
            id,
            kind: ElementKind::Wall,
            layer,
            geometry: Geometry::Wall { start: [0, 0], end: [1000, 0], height: 3000, thickness: 200 },
        }
    }

    #[test]
    fn empty_document_census_is_zero() {
        let c = BuildingDocument::default().census();
        assert!(c.per_layer.is_empty());
        assert_eq!(c.total.len(), 5);
        assert!(c.total.values().all(|n| *n == 0));
    }

    #[test]
    fn four_walls_and_a_slab() {
        let mut doc = BuildingDocument::default();
        for i in 1..=4 {
            doc.elements.push(wall(i, 1));
        }
        doc.elements.push(Element {
            id: 5,
            kind: ElementKind::Slab,
            layer: 1,
            geometry: Geometry::Slab { boundary_walls: vec![1, 2, 3, 4], outline: vec![] },
        });
        let c = doc.census();
        assert_eq!(c.count(ElementKind::Wall), 4);
        assert_eq!(c.count(ElementKind::Slab), 1);
        assert_eq!(c.total_elements(), doc.elements.len());
        assert_eq!(c.per_layer["Design Layer-1"].len(), 2);
        assert!(doc.is_consistent());
    }

    #[test]
    fn json_round_trip() {
        let mut doc = BuildingDocument::default();
        doc.elements.push(wall(1, 1));
        doc.elements.push(Element {
            id: 2,
            kind: ElementKind::Door,
            layer: 1,
            geometry: Geometry::Opening { host_wall: 1, t: 0.25, width: 800 },
        });
        let bytes = doc.to_canonical_json();
        assert!(bytes.ends_with(b"\n"));
        let back = BuildingDocument::from_json(&bytes).unwrap();
        assert_eq!(back, doc);
    }
}
