//! Image-space and GUI-space points and the mapping between them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Document millimetres per GUI pixel.
pub const MM_PER_GUI_PX: f64 = 10.0;

/// Default screen frame size.
pub const FRAME_WIDTH: u32 = 1280;
pub const FRAME_HEIGHT: u32 = 800;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("{axis} coordinate {value} outside [{lo}, {hi}]")]
    OutOfBounds { axis: &'static str, value: f64, lo: f64, hi: f64 },
    #[error("invalid canvas geometry: {0}")]
    InvalidCanvas(String),
}

/// A point in floorplan-image pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImagePoint {
    pub x: f64,
    pub y: f64,
}

impl ImagePoint {
    pub fn new(x: f64, y: f64) -> Self {
        ImagePoint { x, y }
    }

    pub fn dist(&self, other: &ImagePoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn lerp(&self, other: &ImagePoint, t: f64) -> ImagePoint {
        ImagePoint::new(self.x + (other.x - self.x) * t, self.y + (other.y - self.y) * t)
    }
}

/// A point in screen pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GuiPoint {
    pub x: i32,
    pub y: i32,
}

impl GuiPoint {
    pub fn new(x: i32, y: i32) -> Self {
        GuiPoint { x, y }
    }
}

/// Relationship between the floorplan image and the design panel on screen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CanvasGeometry {
    pub w_img: u32,
    pub h_img: u32,
    pub w_gui: u32,
    pub h_gui: u32,
    pub origin_x: u32,
    pub origin_y: u32,
}

impl Default for CanvasGeometry {
    fn default() -> Self {
        CanvasGeometry { w_img: 960, h_img: 640, w_gui: 960, h_gui: 640, origin_x: 160, origin_y: 80 }
    }
}

/// Round half away from zero.
pub fn round_half_away(x: f64) -> i64 {
    x.round() as i64
}

impl CanvasGeometry {
    pub fn with_image(w_img: u32, h_img: u32) -> Self {
        CanvasGeometry { w_img, h_img, ..CanvasGeometry::default() }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.w_img == 0 || self.h_img == 0 || self.w_gui == 0 || self.h_gui == 0 {
            return Err(GeometryError::InvalidCanvas("dimensions must be positive".into()));
        }
        if self.origin_x + self.w_gui >= FRAME_WIDTH || self.origin_y + self.h_gui >= FRAME_HEIGHT {
            return Err(GeometryError::InvalidCanvas("panel does not fit the frame".into()));
        }
        Ok(())
    }

    /// Millimetres of document space per image pixel along x.
    pub fn mm_per_image_px(&self) -> f64 {
        MM_PER_GUI_PX * f64::from(self.w_gui) / f64::from(self.w_img)
    }

    pub fn contains_image(&self, p: &ImagePoint) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x <= f64::from(self.w_img) && p.y <= f64::from(self.h_img)
    }

    /// Closed panel rectangle `[origin, origin + size]` on both axes.
    pub fn contains_gui(&self, q: &GuiPoint) -> bool {
        let (x0, y0) = (self.origin_x as i32, self.origin_y as i32);
        q.x >= x0 && q.y >= y0 && q.x <= x0 + self.w_gui as i32 && q.y <= y0 + self.h_gui as i32
    }
}

fn check(axis: &'static str, value: f64, hi: f64) -> Result<(), GeometryError> {
    if !(value >= 0.0 && value <= hi) {
        return Err(GeometryError::OutOfBounds { axis, value, lo: 0.0, hi });
    }
    Ok(())
}

/// Scale an image-space point into the design panel.
pub fn map_to_gui(p: ImagePoint, g: &CanvasGeometry) -> Result<GuiPoint, GeometryError> {
    check("x_i", p.x, f64::from(g.w_img))?;
    check("y_i", p.y, f64::from(g.h_img))?;
    let dx = round_half_away(p.x / f64::from(g.w_img) * f64::from(g.w_gui));
    let dy = round_half_away(p.y / f64::from(g.h_img) * f64::from(g.h_gui));
    Ok(GuiPoint::new(g.origin_x as i32 + dx as i32, g.origin_y as i32 + dy as i32))
}

/// Inverse of [`map_to_gui`] for points inside the panel.
pub fn map_to_image(q: GuiPoint, g: &CanvasGeometry) -> Result<ImagePoint, GeometryError> {
    let rx = f64::from(q.x) - f64::from(g.origin_x);
    let ry = f64::from(q.y) - f64::from(g.origin_y);
    check("x_gui", rx, f64::from(g.w_gui)).map_err(|_| GeometryError::OutOfBounds {
        axis: "x_gui",
        value: f64::from(q.x),
        lo: f64::from(g.origin_x),
        hi: f64::from(g.origin_x + g.w_gui),
    })?;
    check("y_gui", ry, f64::from(g.h_gui)).map_err(|_| GeometryError::OutOfBounds {
        axis: "y_gui",
        value: f64::from(q.y),
        lo: f64::from(g.origin_y),
        hi: f64::from(g.origin_y + g.h_gui),
    })?;
    Ok(ImagePoint::new(rx * f64::from(g.w_img) / f64::from(g.w_gui), ry * f64::from(g.h_img) / f64::from(g.h_gui)))
}

/// Document millimetres for a GUI point (relative to the panel origin).
pub fn gui_to_doc(q: GuiPoint, g: &CanvasGeometry) -> (i64, i64) {
    let s = MM_PER_GUI_PX as i64;
    ((i64::from(q.x) - i64::from(g.origin_x)) * s, (i64::from(q.y) - i64::from(g.origin_y)) * s)
}

/// Distance from point `p` to segment `a`–`b`, plus the clamped parameter.
pub fn point_segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return ((p.0 - a.0).hypot(p.1 - a.1), 0.0);
    }
    let t = (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0);
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - cx).hypot(p.1 - cy), t)
}
