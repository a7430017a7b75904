//! Per-person velocity from the flow inside each head box.
//!
//! Each box yields one scalar: the mean flow magnitude over its pixels,
//! normalized for apparent size either by dividing by the box area or by
//! resampling to a fixed `p × p` patch and applying the scale factor
//! `max(s, 1/s)` with `s = p² / area`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boxes::HeadBox;
use crate::io::FlowField;
use crate::regime::DensityRegime;

#[derive(Debug, Error, PartialEq)]
pub enum VelocityError {
    #[error("box [{x_min}, {y_min}, {x_max}, {y_max}] extends outside the {width}x{height} frame")]
    BoxOutsideFrame {
        x_min: f32,
        y_min: f32,
        x_max: f32,
        y_max: f32,
        width: u32,
        height: u32,
    },
    #[error("magnitude patch is empty")]
    EmptyPatch,
    #[error("unified-scale target size must be at least 2, got {0}")]
    TargetTooSmall(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizationScheme {
    AreaBased,
    UnifiedScale,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizationConfig {
    pub scheme: NormalizationScheme,
    /// Side of the square target patch for [`NormalizationScheme::UnifiedScale`].
    pub target_size: u32,
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        Self {
            scheme: NormalizationScheme::UnifiedScale,
            target_size: 32,
        }
    }
}

impl NormalizationConfig {
    pub fn area_based() -> Self {
        Self {
            scheme: NormalizationScheme::AreaBased,
            ..Self::default()
        }
    }

    pub fn unified(target_size: u32) -> Self {
        Self {
            scheme: NormalizationScheme::UnifiedScale,
            target_size,
        }
    }

    pub fn validate(&self) -> Result<(), VelocityError> {
        if self.scheme == NormalizationScheme::UnifiedScale && self.target_size < 2 {
            return Err(VelocityError::TargetTooSmall(self.target_size));
        }
        Ok(())
    }
}

/// Per-pixel flow magnitudes of one box, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnitudePatch {
    width: u32,
    height: u32,
    values: Vec<f32>,
}

impl MagnitudePatch {
    /// Panics if the shape does not match or a value is negative or not finite.
    pub fn new(width: u32, height: u32, values: Vec<f32>) -> Self {
        assert_eq!(values.len(), width as usize * height as usize, "patch shape");
        assert!(
            values.iter().all(|v| v.is_finite() && *v >= 0.0),
            "magnitudes must be finite and non-negative"
        );
        Self { width, height, values }
    }

    pub fn constant(width: u32, height: u32, value: f32) -> Self {
        Self::new(width, height, vec![value; width as usize * height as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.values[y as usize * self.width as usize + x as usize]
    }
}

/// One normalized per-person velocity with its provenance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityObservation {
    pub m_norm: f32,
    pub frame_index: u64,
    pub head_box: HeadBox,
    pub raw_mean: f32,
    pub box_area: u32,
    pub regime: DensityRegime,
}

#[inline]
fn magnitude([u, v]: [f32; 2]) -> f32 {
    // hypot avoids underflow of u² + v² for tiny but non-zero flow
    u.hypot(v)
}

/// Euclidean flow magnitude of every pixel covered by `head_box`.
pub fn pixel_magnitudes(flow: &FlowField, head_box: &HeadBox) -> Result<MagnitudePatch, VelocityError> {
    let rect = head_box
        .raster_within(flow.width(), flow.height())
        .ok_or(VelocityError::BoxOutsideFrame {
            x_min: head_box.x_min,
            y_min: head_box.y_min,
            x_max: head_box.x_max,
            y_max: head_box.y_max,
            width: flow.width(),
            height: flow.height(),
        })?;
    if rect.is_empty() {
        return Err(VelocityError::EmptyPatch);
    }
    let mut values = Vec::with_capacity(rect.area() as usize);
    for y in rect.y0..rect.y1 {
        let row = &flow.row(y)[rect.x0 as usize..rect.x1 as usize];
        values.extend(row.iter().copied().map(magnitude));
    }
    Ok(MagnitudePatch {
        width: rect.width(),
        height: rect.height(),
        values,
    })
}

/// Arithmetic mean of the patch, accumulated in `f64`.
pub fn mean_magnitude(patch: &MagnitudePatch) -> Result<f64, VelocityError> {
    if patch.is_empty() {
        return Err(VelocityError::EmptyPatch);
    }
    let sum: f64 = patch.values.iter().map(|&v| f64::from(v)).sum();
    Ok(sum / patch.values.len() as f64)
}

/// Area-based normalization: mean magnitude divided by box pixel count.
pub fn normalize_area(raw_mean: f64, box_area: u32) -> f64 {
    debug_assert!(box_area >= 1);
    raw_mean / f64::from(box_area)
}

// Source coordinate for output index i under half-pixel centers, edge-clamped.
#[inline]
fn source_coord(i: u32, src: u32, dst: u32) -> f64 {
    let pos = (f64::from(i) + 0.5) * (f64::from(src) / f64::from(dst)) - 0.5;
    pos.clamp(0.0, f64::from(src - 1))
}

/// Bilinear resampling to `p × p` with half-pixel centers and edge clamping.
///
/// Panics if the patch is empty or `p < 2`.
pub fn resample_bilinear(patch: &MagnitudePatch, p: u32) -> MagnitudePatch {
    assert!(!patch.is_empty(), "cannot resample an empty patch");
    assert!(p >= 2, "target size must be at least 2");
    let (sw, sh) = (patch.width, patch.height);

    let taps = |src: u32| -> Vec<(u32, u32, f64)> {
        (0..p)
            .map(|i| {
                let pos = source_coord(i, src, p);
                let lo = pos.floor() as u32;
                let hi = (lo + 1).min(src - 1);
                (lo, hi, pos - f64::from(lo))
            })
            .collect()
    };
    let xs = taps(sw);
    let ys = taps(sh);

    let mut values = Vec::with_capacity(p as usize * p as usize);
    for &(y0, y1, ty) in &ys {
        for &(x0, x1, tx) in &xs {
            let v00 = f64::from(patch.get(x0, y0));
            let v01 = f64::from(patch.get(x1, y0));
            let v10 = f64::from(patch.get(x0, y1));
            let v11 = f64::from(patch.get(x1, y1));
            // a + (b - a) t form is exact on constant neighborhoods.
            let top = v00 + (v01 - v00) * tx;
            let bottom = v10 + (v11 - v10) * tx;
            values.push((top + (bottom - top) * ty) as f32);
        }
    }
    MagnitudePatch {
        width: p,
        height: p,
        values,
    }
}

/// Intensity adjustment for a box of `box_area` pixels resampled to `p × p`:
/// `s` when `s = p² / area > 1`, otherwise `1 / s`.
pub fn scale_adjustment(box_area: u32, p: u32) -> f64 {
    let s = f64::from(p) * f64::from(p) / f64::from(box_area);
    if s > 1.0 {
        s
    } else {
        1.0 / s
    }
}

/// Unified-scale normalization of a box's magnitude patch.
///
/// The adjustment factor is constant over the patch, so it is applied to the
/// mean of the resampled values rather than to each value.
pub fn normalize_unified(
    patch: &MagnitudePatch,
    box_area: u32,
    cfg: &NormalizationConfig,
) -> Result<f64, VelocityError> {
    cfg.validate()?;
    if patch.is_empty() {
        return Err(VelocityError::EmptyPatch);
    }
    let resampled = resample_bilinear(patch, cfg.target_size);
    let mean = mean_magnitude(&resampled)?;
    Ok(mean * scale_adjustment(box_area, cfg.target_size))
}

/// Velocity of a single box, or `None` if the box covers no pixel of the frame.
pub fn observe_box(
    flow: &FlowField,
    head_box: &HeadBox,
    cfg: &NormalizationConfig,
    regime: DensityRegime,
) -> Option<VelocityObservation> {
    let clamped = head_box.clamped(flow.width(), flow.height());
    let patch = pixel_magnitudes(flow, &clamped).ok()?;
    let box_area = patch.width * patch.height;
    let raw_mean = mean_magnitude(&patch).ok()?;
    let m_norm = match cfg.scheme {
        NormalizationScheme::AreaBased => normalize_area(raw_mean, box_area),
        NormalizationScheme::UnifiedScale => normalize_unified(&patch, box_area, cfg).ok()?,
    };
    Some(VelocityObservation {
        m_norm: m_norm as f32,
        frame_index: head_box.frame_index,
        head_box: *head_box,
        raw_mean: raw_mean as f32,
        box_area,
        regime,
    })
}

/// One observation per box that covers at least one pixel, in input order.
pub fn estimate_velocities(
    flow: &FlowField,
    boxes: &[HeadBox],
    cfg: &NormalizationConfig,
    regime: DensityRegime,
) -> Vec<VelocityObservation> {
    boxes.iter().filter_map(|b| observe_box(flow, b, cfg, regime)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const REGIME: DensityRegime = DensityRegime::LowMedium;

    #[test]
    fn three_four_five() {
        let flow = FlowField::uniform(4, 4, [3.0, 4.0]);
        let patch = pixel_magnitudes(&flow, &HeadBox::new(1.0, 1.0, 3.0, 3.0)).unwrap();
        assert_eq!((patch.width(), patch.height()), (2, 2));
        assert!(patch.values().iter().all(|&v| v == 5.0));
    }

    #[test]
    fn zero_flow_zero_patch() {
        let flow = FlowField::zeros(4, 4);
        let patch = pixel_magnitudes(&flow, &HeadBox::new(0.0, 0.0, 4.0, 4.0)).unwrap();
        assert!(patch.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unit_vectors_have_unit_magnitude() {
        let mut flow = FlowField::zeros(2, 1);
        flow.set(0, 0, [1.0, 0.0]);
        flow.set(1, 0, [0.0, 1.0]);
        let patch = pixel_magnitudes(&flow, &HeadBox::new(0.0, 0.0, 2.0, 1.0)).unwrap();
        assert_eq!(patch.values(), &[1.0, 1.0]);
    }

    #[test]
    fn unclamped_box_rejected() {
        let flow = FlowField::zeros(4, 4);
        assert!(matches!(
            pixel_magnitudes(&flow, &HeadBox::new(2.0, 2.0, 6.0, 3.0)),
            Err(VelocityError::BoxOutsideFrame { .. })
        ));
    }

    #[test]
    fn mean_examples() {
        let p = MagnitudePatch::new(2, 2, vec![1.0, 2.0, 3.0, 6.0]);
        assert_eq!(mean_magnitude(&p).unwrap(), 3.0);
        assert_eq!(
            mean_magnitude(&MagnitudePatch::constant(3, 5, 1.7)).unwrap(),
            f64::from(1.7f32)
        );
        assert_eq!(
            mean_magnitude(&MagnitudePatch::new(0, 0, vec![])),
            Err(VelocityError::EmptyPatch)
        );
    }

    #[test]
    fn mean_matches_two_pass_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let (w, h) = (rng.random_range(1..60), rng.random_range(1..60));
            let vals: Vec<f32> = (0..w * h).map(|_| rng.random_range(0.0..20.0)).collect();
            // Oracle: sum rows separately, then the row sums.
            let mut total = 0.0f64;
            for row in vals.chunks(w as usize) {
                let mut s = 0.0f64;
                for &v in row {
                    s += f64::from(v);
                }
                total += s;
            }
            let oracle = total / f64::from(w * h);
            let got = mean_magnitude(&MagnitudePatch::new(w, h, vals)).unwrap();
            assert!((got - oracle).abs() <= 1e-6 * oracle.abs().max(1e-12));
        }
    }

    #[test]
    fn area_normalization() {
        assert_eq!(normalize_area(5.0, 25), 0.2);
        assert_eq!(normalize_area(0.0, 17), 0.0);
        assert_eq!(normalize_area(3.0, 1), 3.0);
    }

    #[test]
    fn resample_constant_and_single_pixel() {
        let c = MagnitudePatch::constant(5, 3, 2.25);
        let r = resample_bilinear(&c, 7);
        assert!(r.values().iter().all(|&v| v == 2.25));
        let one = MagnitudePatch::constant(1, 1, 4.5);
        let r = resample_bilinear(&one, 4);
        assert_eq!(r.values().len(), 16);
        assert!(r.values().iter().all(|&v| v == 4.5));
    }

    // Per-pixel oracle written independently of the tap tables above.
    fn oracle_resample(src: &[Vec<f64>], p: usize) -> Vec<Vec<f64>> {
        let sh = src.len();
        let sw = src[0].len();
        let mut out = vec![vec![0.0; p]; p];
        for (oy, row) in out.iter_mut().enumerate() {
            for (ox, cell) in row.iter_mut().enumerate() {
                let fy = ((oy as f64 + 0.5) * sh as f64 / p as f64 - 0.5)
                    .max(0.0)
                    .min((sh - 1) as f64);
                let fx = ((ox as f64 + 0.5) * sw as f64 / p as f64 - 0.5)
                    .max(0.0)
                    .min((sw - 1) as f64);
                let (y0, x0) = (fy.floor() as usize, fx.floor() as usize);
                let (y1, x1) = ((y0 + 1).min(sh - 1), (x0 + 1).min(sw - 1));
                let (wy, wx) = (fy - y0 as f64, fx - x0 as f64);
                *cell = src[y0][x0] * (1.0 - wx) * (1.0 - wy)
                    + src[y0][x1] * wx * (1.0 - wy)
                    + src[y1][x0] * (1.0 - wx) * wy
                    + src[y1][x1] * wx * wy;
            }
        }
        out
    }

    #[test]
    fn resample_two_by_two_against_oracle() {
        let patch = MagnitudePatch::new(2, 2, vec![0.0, 0.0, 10.0, 10.0]);
        let r = resample_bilinear(&patch, 4);
        let oracle = oracle_resample(&[vec![0.0, 0.0], vec![10.0, 10.0]], 4);
        for y in 0..4 {
            for x in 0..4 {
                assert!((f64::from(r.get(x, y)) - oracle[y as usize][x as usize]).abs() < 1e-5);
                if y > 0 {
                    assert!(r.get(x, y) >= r.get(x, y - 1));
                }
            }
        }
        // Rows: clamp, 2.5, 7.5, clamp.
        assert_eq!(r.get(0, 0), 0.0);
        assert_eq!(r.get(0, 1), 2.5);
        assert_eq!(r.get(0, 2), 7.5);
        assert_eq!(r.get(0, 3), 10.0);
    }

    #[test]
    fn resample_random_against_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..40 {
            let (w, h) = (rng.random_range(1..40usize), rng.random_range(1..40usize));
            let p = rng.random_range(2..48u32);
            let src: Vec<Vec<f64>> = (0..h)
                .map(|_| (0..w).map(|_| f64::from(rng.random_range(0.0f32..30.0))).collect())
                .collect();
            let flat: Vec<f32> = src.iter().flatten().map(|&v| v as f32).collect();
            let r = resample_bilinear(&MagnitudePatch::new(w as u32, h as u32, flat), p);
            let oracle = oracle_resample(&src, p as usize);
            for y in 0..p {
                for x in 0..p {
                    assert!((f64::from(r.get(x, y)) - oracle[y as usize][x as usize]).abs() < 1e-4);
                }
            }
        }
    }

    #[test]
    fn unified_small_box() {
        let patch = MagnitudePatch::constant(8, 8, 2.0);
        assert_eq!(
            normalize_unified(&patch, 64, &NormalizationConfig::unified(16)).unwrap(),
            8.0
        );
    }

    #[test]
    fn unified_large_box() {
        let patch = MagnitudePatch::constant(32, 32, 2.0);
        assert_eq!(
            normalize_unified(&patch, 1024, &NormalizationConfig::unified(16)).unwrap(),
            8.0
        );
    }

    #[test]
    fn unified_neutral_scale() {
        let patch = MagnitudePatch::new(4, 4, (0..16).map(|i| i as f32).collect());
        let cfg = NormalizationConfig::unified(4);
        let resampled = resample_bilinear(&patch, 4);
        assert_eq!(
            normalize_unified(&patch, 16, &cfg).unwrap(),
            mean_magnitude(&resampled).unwrap()
        );
    }

    #[test]
    fn unified_rejects_tiny_target() {
        let patch = MagnitudePatch::constant(2, 2, 1.0);
        assert_eq!(
            normalize_unified(&patch, 4, &NormalizationConfig::unified(1)),
            Err(VelocityError::TargetTooSmall(1))
        );
    }

    #[test]
    fn estimate_zero_flow() {
        let flow = FlowField::zeros(20, 20);
        let boxes = [HeadBox::new(0.0, 0.0, 5.0, 5.0), HeadBox::new(10.0, 3.0, 18.0, 9.0)];
        for cfg in [NormalizationConfig::area_based(), NormalizationConfig::default()] {
            let obs = estimate_velocities(&flow, &boxes, &cfg, REGIME);
            assert_eq!(obs.len(), 2);
            assert!(obs.iter().all(|o| o.m_norm == 0.0));
        }
    }

    #[test]
    fn estimate_area_based_single_box() {
        let flow = FlowField::uniform(20, 20, [3.0, 4.0]);
        let obs = estimate_velocities(
            &flow,
            &[HeadBox::new(2.0, 2.0, 7.0, 6.0)],
            &NormalizationConfig::area_based(),
            REGIME,
        );
        assert_eq!(obs[0].box_area, 20);
        assert_eq!(obs[0].raw_mean, 5.0);
        assert_eq!(obs[0].m_norm, (5.0f64 / 20.0) as f32);
    }

    #[test]
    fn estimate_is_composition_of_ops() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let (w, h) = (64u32, 48u32);
        let vectors = (0..w * h)
            .map(|_| [rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0)])
            .collect();
        let flow = FlowField::new(w, h, vectors).unwrap();
        let boxes: Vec<HeadBox> = (0..12)
            .map(|_| {
                let x = rng.random_range(0.0..50.0f32);
                let y = rng.random_range(0.0..35.0f32);
                HeadBox::new(x, y, x + rng.random_range(2.0..14.0), y + rng.random_range(2.0..13.0))
            })
            .collect();
        for cfg in [NormalizationConfig::area_based(), NormalizationConfig::unified(8)] {
            let obs = estimate_velocities(&flow, &boxes, &cfg, REGIME);
            assert_eq!(obs.len(), boxes.len());
            for (o, b) in obs.iter().zip(&boxes) {
                let b = b.clamped(w, h);
                let patch = pixel_magnitudes(&flow, &b).unwrap();
                let area = patch.width() * patch.height();
                let mean = mean_magnitude(&patch).unwrap();
                let expected = match cfg.scheme {
                    NormalizationScheme::AreaBased => normalize_area(mean, area),
                    NormalizationScheme::UnifiedScale => normalize_unified(&patch, area, &cfg).unwrap(),
                };
                assert_eq!(o.m_norm, expected as f32);
                assert_eq!(o.box_area, area);
            }
        }
    }

    #[test]
    fn observations_keep_box_order_and_skip_empty() {
        let flow = FlowField::uniform(10, 10, [1.0, 0.0]);
        let boxes = [
            HeadBox::new(0.0, 0.0, 2.0, 2.0).with_frame(3),
            HeadBox::new(1.6, 1.6, 2.4, 2.4).with_frame(3),
            HeadBox::new(5.0, 5.0, 9.0, 9.0).with_frame(3),
        ];
        let obs = estimate_velocities(&flow, &boxes, &NormalizationConfig::area_based(), REGIME);
        assert_eq!(obs.len(), 2);
        assert_eq!(obs[0].box_area, 4);
        assert_eq!(obs[1].box_area, 16);
        assert_eq!(obs[1].frame_index, 3);
    }

    proptest! {
        #[test]
        fn adjustment_factor_is_symmetric(area in 1u32..100_000, p in 2u32..128) {
            let s = f64::from(p) * f64::from(p) / f64::from(area);
            let f = scale_adjustment(area, p);
            prop_assert_eq!(f, s.max(1.0 / s));
            prop_assert!(f >= 1.0);
        }

        #[test]
        fn constant_field_is_exact(
            w in 1u32..40, h in 1u32..40, c in 0.0f32..50.0, p in 2u32..48,
        ) {
            let patch = MagnitudePatch::constant(w, h, c);
            let area = w * h;
            let got = normalize_unified(&patch, area, &NormalizationConfig::unified(p)).unwrap();
            prop_assert_eq!(got, mean_magnitude(&patch).unwrap() * scale_adjustment(area, p));
        }

        #[test]
        fn positivity_and_zero_iff_still(u in -5.0f32..5.0, v in -5.0f32..5.0, p in 2u32..40) {
            let flow = FlowField::uniform(16, 16, [u, v]);
            let b = [HeadBox::new(2.0, 3.0, 11.0, 9.0)];
            for cfg in [NormalizationConfig::area_based(), NormalizationConfig::unified(p)] {
                let o = estimate_velocities(&flow, &b, &cfg, REGIME)[0];
                prop_assert!(o.m_norm >= 0.0);
                prop_assert_eq!(o.m_norm == 0.0, u == 0.0 && v == 0.0);
            }
        }

        #[test]
        fn deterministic(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let vectors = (0..32 * 32).map(|_| [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]).collect();
            let flow = FlowField::new(32, 32, vectors).unwrap();
            let b = [HeadBox::new(1.3, 2.7, 20.2, 19.9), HeadBox::new(10.0, 10.0, 31.5, 30.0)];
            let cfg = NormalizationConfig::default();
            let a = estimate_velocities(&flow, &b, &cfg, REGIME);
            let c = estimate_velocities(&flow, &b, &cfg, REGIME);
            for (x, y) in a.iter().zip(&c) {
                prop_assert_eq!(x.m_norm.to_bits(), y.m_norm.to_bits());
            }
        }
    }
}
