//! Head bounding boxes and their pixel rasterization.

use serde::{Deserialize, Serialize};

/// Axis-aligned head detection in pixel coordinates.
///
/// `confidence` is carried through from the detector but never used in
/// scoring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadBox {
    pub x_min: f32,
    pub y_min: f32,
    pub x_max: f32,
    pub y_max: f32,
    pub confidence: f32,
    pub frame_index: u64,
}

/// Half-open pixel rectangle `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PixelRect {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl PixelRect {
    pub fn width(&self) -> u32 {
        self.x1.saturating_sub(self.x0)
    }

    pub fn height(&self) -> u32 {
        self.y1.saturating_sub(self.y0)
    }

    pub fn area(&self) -> u32 {
        self.width() * self.height()
    }

    pub fn is_empty(&self) -> bool {
        self.area() == 0
    }
}

// Pixels whose center c = p + 0.5 satisfies lo <= c < hi, i.e. p in [ceil(lo - 0.5), ceil(hi - 0.5)).
fn center_span(lo: f32, hi: f32) -> (i64, i64) {
    let start = (f64::from(lo) - 0.5).ceil() as i64;
    let end = (f64::from(hi) - 0.5).ceil() as i64;
    (start, end.max(start))
}

impl HeadBox {
    pub fn new(x_min: f32, y_min: f32, x_max: f32, y_max: f32) -> Self {
        Self {
            x_min,
            y_min,
            x_max,
            y_max,
            confidence: 1.0,
            frame_index: 0,
        }
    }

    pub fn with_frame(mut self, frame_index: u64) -> Self {
        self.frame_index = frame_index;
        self
    }

    pub fn with_confidence(mut self, confidence: f32) -> Self {
        self.confidence = confidence;
        self
    }

    pub fn is_finite(&self) -> bool {
        self.x_min.is_finite() && self.y_min.is_finite() && self.x_max.is_finite() && self.y_max.is_finite()
    }

    /// Clamp all corners into `[0, width] × [0, height]`.
    pub fn clamped(&self, width: u32, height: u32) -> Self {
        let (w, h) = (width as f32, height as f32);
        Self {
            x_min: self.x_min.clamp(0.0, w),
            y_min: self.y_min.clamp(0.0, h),
            x_max: self.x_max.clamp(0.0, w),
            y_max: self.y_max.clamp(0.0, h),
            ..*self
        }
    }

    /// Pixel-center rasterization without clamping. Returns `None` when any
    /// covered pixel lies outside a `width × height` frame.
    pub fn raster_within(&self, width: u32, height: u32) -> Option<PixelRect> {
        if !self.is_finite() {
            return None;
        }
        let (x0, x1) = center_span(self.x_min, self.x_max);
        let (y0, y1) = center_span(self.y_min, self.y_max);
        if x0 < 0 || y0 < 0 || x1 > i64::from(width) || y1 > i64::from(height) {
            return None;
        }
        Some(PixelRect {
            x0: x0 as u32,
            y0: y0 as u32,
            x1: x1 as u32,
            y1: y1 as u32,
        })
    }

    /// Pixel-center rasterization of the box intersected with the frame.
    pub fn raster_clamped(&self, width: u32, height: u32) -> PixelRect {
        let (x0, x1) = center_span(self.x_min, self.x_max);
        let (y0, y1) = center_span(self.y_min, self.y_max);
        let clip = |v: i64, hi: u32| v.clamp(0, i64::from(hi)) as u32;
        PixelRect {
            x0: clip(x0, width),
            y0: clip(y0, height),
            x1: clip(x1, width),
            y1: clip(y1, height),
        }
    }

    /// Degenerate after clamping: inverted corners or no covered pixel centers.
    pub fn is_degenerate(&self, width: u32, height: u32) -> bool {
        !self.is_finite()
            || self.x_min >= self.x_max
            || self.y_min >= self.y_max
            || self.raster_clamped(width, height).is_empty()
    }
}
