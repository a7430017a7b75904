//! Binary PPM overlays: flow magnitude as a gray background with abnormal
//! head boxes outlined in their category color.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use crowdflow_core::{AnomalyEvent, FlowField, MotionCategory};

const OUTLINE: u32 = 2;

pub fn color(category: MotionCategory) -> Option<[u8; 3]> {
    match category {
        MotionCategory::Fast => Some([255, 0, 0]),
        MotionCategory::Slow => Some([255, 255, 0]),
        MotionCategory::Halt => Some([0, 0, 255]),
        MotionCategory::Normal => None,
    }
}

pub struct Image {
    pub width: u32,
    pub height: u32,
    pub rgb: Vec<u8>,
}

impl Image {
    fn put(&mut self, x: u32, y: u32, c: [u8; 3]) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.rgb[i..i + 3].copy_from_slice(&c);
    }

    #[cfg(test)]
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }
}

/// Draw every highlighted event over the frame's flow magnitude. Returns the
/// image and the number of boxes drawn.
pub fn render(flow: &FlowField, events: &[AnomalyEvent]) -> (Image, usize) {
    let (w, h) = (flow.width(), flow.height());
    let mags: Vec<f32> = flow.vectors().iter().map(|[u, v]| u.hypot(*v)).collect();
    let peak = mags.iter().copied().fold(0.0f32, f32::max);
    let mut rgb = Vec::with_capacity(mags.len() * 3);
    for m in mags {
        let g = if peak > 0.0 { (m / peak * 200.0) as u8 } else { 0 };
        rgb.extend_from_slice(&[g, g, g]);
    }
    let mut img = Image {
        width: w,
        height: h,
        rgb,
    };
    let mut drawn = 0;
    for e in events {
        let Some(c) = color(e.category) else { continue };
        let r = e.head_box.raster_clamped(w, h);
        if r.is_empty() {
            continue;
        }
        drawn += 1;
        for y in r.y0..r.y1 {
            for x in r.x0..r.x1 {
                let edge = x < r.x0 + OUTLINE || x + OUTLINE >= r.x1 || y < r.y0 + OUTLINE || y + OUTLINE >= r.y1;
                if edge {
                    img.put(x, y, c);
                }
            }
        }
    }
    (img, drawn)
}

pub fn write_ppm(img: &Image, path: &Path) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write!(out, "P6\n{} {}\n255\n", img.width, img.height)?;
    out.write_all(&img.rgb)?;
    out.flush()
}
