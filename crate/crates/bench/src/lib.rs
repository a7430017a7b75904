//! Deterministic inputs shared by the benchmarks.

use crowdflow_core::anomaly::{train_regime, MotionModel, TrainingConfig};
use crowdflow_core::clustering::{cluster_descriptors, kmeans, mix_seed, ClusterDescriptor, ObservationSet};
use crowdflow_core::{DensityRegime, FlowField, HeadBox};

pub const WIDTH: u32 = 1280;
pub const HEIGHT: u32 = 720;

/// Uniform value in `[0, 1)` from a seed and an index.
pub fn unit(seed: u64, i: u64) -> f64 {
    (mix_seed(seed, i) >> 11) as f64 / (1u64 << 53) as f64
}

/// A 1280x720 field with smoothly varying flow.
pub fn hd_flow() -> FlowField {
    let mut vectors = Vec::with_capacity((WIDTH * HEIGHT) as usize);
    for y in 0..HEIGHT {
        for x in 0..WIDTH {
            let (fx, fy) = (x as f32 / WIDTH as f32, y as f32 / HEIGHT as f32);
            vectors.push([3.0 * (fx * 6.0).sin() + 1.0, 2.0 * (fy * 4.0).cos()]);
        }
    }
    FlowField::new(WIDTH, HEIGHT, vectors).expect("valid field")
}

/// `n` head boxes of 12 to 60 px scattered over the HD frame.
pub fn hd_boxes(n: usize) -> Vec<HeadBox> {
    (0..n as u64)
        .map(|i| {
            let side = 12.0 + 48.0 * unit(1, i);
            let x = unit(2, i) * (f64::from(WIDTH) - side);
            let y = unit(3, i) * (f64::from(HEIGHT) - side);
            HeadBox::new(x as f32, y as f32, (x + side) as f32, (y + side) as f32)
        })
        .collect()
}

/// Magnitudes in four bands (halted, slow, normal, fast) with jitter.
pub fn banded(n: usize) -> Vec<f32> {
    const BANDS: [(f64, f64); 4] = [(0.0, 0.2), (8.0, 2.0), (30.0, 4.0), (70.0, 6.0)];
    (0..n as u64)
        .map(|i| {
            let (c, w) = BANDS[(i % 4) as usize];
            (c + w * (unit(4, i) - 0.5)) as f32
        })
        .collect()
}

pub fn descriptors(data: &[f32], k: usize) -> Vec<ClusterDescriptor> {
    let model = kmeans(data, k, 7, 10).expect("k-means on fixture");
    cluster_descriptors(&model, data).expect("descriptors")
}

pub fn trained_model(data: &[f32]) -> MotionModel {
    let set = ObservationSet::from_magnitudes(data.to_vec());
    train_regime(DensityRegime::LowMedium, &set, &TrainingConfig::default())
        .expect("fixture trains")
        .model
}
