//! Synthetic crowd scenes with known ground truth.
//!
//! Each person is a rigid head moving at constant world speed under a
//! pinhole camera: box side is `head_size · f / depth` and pixel speed per
//! frame is `world_speed · f / (depth · fps)`. Flow is zero outside head
//! boxes; inside, it equals the owner's per-frame displacement plus optional
//! Gaussian noise. Overlaps are painted far to near, so the nearer person
//! wins each pixel.
//!
//! Scene documents are TOML:
//!
//! ```toml
//! [[scene]]
//! id = "concourse"
//! regime = "low-medium"
//! fps = 25.0
//! duration = 120
//! boundary_exclusion = 5
//! camera = { focal_px = 1000.0, resolution = [1280, 720] }
//!
//! [[scene.persons]]
//! world_speed = 1.4
//! heading = 0.0
//! depth = 10.0
//! head_size = 0.25
//! start = [40.0, 30.0]
//!
//! [[scene.injections]]
//! person = 0
//! frames = [40, 80]
//! multiplier = 3.0
//! ```

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boxes::HeadBox;
use crate::category::MotionCategory;
use crate::clustering::mix_seed;
use crate::io::{
    flow_file_name, write_detection_frame, write_flow_file, write_manifest, FlowError, FlowField, SceneManifest,
};
use crate::regime::DensityRegime;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("scene spec parse error: {0}")]
    Parse(String),
    #[error("scene {scene:?}: person {person} leaves the frame at frame {frame}")]
    PersonOutOfFrame { scene: String, person: usize, frame: u64 },
    #[error("scene {scene:?}: {reason}")]
    InvalidSpec { scene: String, reason: String },
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub focal_px: f64,
    pub resolution: [u32; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonSpec {
    /// Metres per second.
    pub world_speed: f64,
    /// Direction of motion in the image plane, radians from +x towards +y.
    pub heading: f64,
    /// Metres from the camera.
    pub depth: f64,
    /// Head side length in metres.
    pub head_size: f64,
    /// Box center at the scene's first frame, in pixels.
    pub start: [f64; 2],
    /// Ground-truth label when no injection is active. Defaults to halt for
    /// stationary persons and normal otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<MotionCategory>,
}

impl PersonSpec {
    pub fn box_side(&self, camera: &Camera) -> f64 {
        self.head_size * camera.focal_px / self.depth
    }

    /// Pixels per frame, without injections.
    pub fn pixel_speed(&self, camera: &Camera, fps: f64) -> f64 {
        self.world_speed * camera.focal_px / self.depth / fps
    }

    fn base_label(&self) -> MotionCategory {
        self.label.unwrap_or(if self.world_speed == 0.0 {
            MotionCategory::Halt
        } else {
            MotionCategory::Normal
        })
    }
}

/// Speed multiplier applied to one person over a frame range relative to
/// the scene start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Injection {
    pub person: usize,
    /// Half-open `[start, end)` offsets from the first frame of the scene.
    pub frames: [u64; 2],
    pub multiplier: f64,
}

impl Injection {
    pub fn category(&self, base: MotionCategory) -> MotionCategory {
        if self.multiplier == 0.0 {
            MotionCategory::Halt
        } else if self.multiplier < 1.0 {
            MotionCategory::Slow
        } else if self.multiplier > 1.0 {
            MotionCategory::Fast
        } else {
            base
        }
    }

    fn active(&self, offset: u64) -> bool {
        (self.frames[0]..self.frames[1]).contains(&offset)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub id: String,
    pub regime: DensityRegime,
    pub camera: Camera,
    pub fps: f64,
    pub duration: u64,
    /// First frame index. Defaults to right after the previous scene in the
    /// document.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_frame: Option<u64>,
    #[serde(default)]
    pub boundary_exclusion: u32,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub persons: Vec<PersonSpec>,
    #[serde(default)]
    pub injections: Vec<Injection>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct SpecDoc {
    scene: Vec<SceneSpec>,
}

/// Parse a scene document and assign start frames to scenes that lack one.
pub fn read_scene_specs(text: &str) -> Result<Vec<SceneSpec>, SynthError> {
    let doc: SpecDoc = toml::from_str(text).map_err(|e| SynthError::Parse(e.to_string()))?;
    let mut next = 0;
    let mut scenes = doc.scene;
    for s in &mut scenes {
        let start = *s.start_frame.get_or_insert(next);
        next = start + s.duration;
    }
    Ok(scenes)
}

pub fn write_scene_specs(specs: &[SceneSpec]) -> String {
    toml::to_string(&SpecDoc { scene: specs.to_vec() }).expect("scene specs serialize")
}

/// Ground truth for one person in one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PersonTruth {
    pub frame: u64,
    pub person: usize,
    /// Exact displacement magnitude painted into the box, pixels per frame.
    pub pixel_speed: f64,
    pub category: MotionCategory,
    #[serde(rename = "box")]
    pub bbox: [f32; 4],
}

/// Flow, detections and truth for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthFrame {
    pub frame: u64,
    pub flow: FlowField,
    pub boxes: Vec<HeadBox>,
    pub truth: Vec<PersonTruth>,
}

/// All frames of a scene, collected.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedScene {
    pub flows: Vec<FlowField>,
    pub detections: Vec<Vec<HeadBox>>,
    pub truth: Vec<Vec<PersonTruth>>,
}

/// Validated scene that renders frames on demand.
#[derive(Debug, Clone)]
pub struct SceneGenerator {
    spec: SceneSpec,
    seed: u64,
    start: u64,
    /// `centers[t][p]`: box center of person `p` at frame offset `t`.
    centers: Vec<Vec<[f64; 2]>>,
    /// `velocities[t][p]`: displacement painted at frame offset `t`.
    velocities: Vec<Vec<[f64; 2]>>,
    /// Persons sorted far to near.
    paint_order: Vec<usize>,
}

impl SceneGenerator {
    pub fn new(spec: &SceneSpec, seed: u64) -> Result<Self, SynthError> {
        validate(spec)?;
        let cam = &spec.camera;
        let n = spec.persons.len();
        let mut centers = Vec::with_capacity(spec.duration as usize);
        let mut velocities = Vec::with_capacity(spec.duration as usize);
        let mut pos: Vec<[f64; 2]> = spec.persons.iter().map(|p| p.start).collect();
        for t in 0..spec.duration {
            let vel: Vec<[f64; 2]> = (0..n)
                .map(|i| {
                    let p = &spec.persons[i];
                    let mult = spec
                        .injections
                        .iter()
                        .filter(|inj| inj.person == i && inj.active(t))
                        .map(|inj| inj.multiplier)
                        .next_back()
                        .unwrap_or(1.0);
                    let speed = p.pixel_speed(cam, spec.fps) * mult;
                    [speed * p.heading.cos(), speed * p.heading.sin()]
                })
                .collect();
            for (i, c) in pos.iter().enumerate() {
                let half = spec.persons[i].box_side(cam) / 2.0;
                let [w, h] = cam.resolution;
                if c[0] - half < 0.0 || c[1] - half < 0.0 || c[0] + half > f64::from(w) || c[1] + half > f64::from(h) {
                    return Err(SynthError::PersonOutOfFrame {
                        scene: spec.id.clone(),
                        person: i,
                        frame: spec.start_frame.unwrap_or(0) + t,
                    });
                }
            }
            centers.push(pos.clone());
            for (c, v) in pos.iter_mut().zip(&vel) {
                c[0] += v[0];
                c[1] += v[1];
            }
            velocities.push(vel);
        }
        let mut paint_order: Vec<usize> = (0..n).collect();
        paint_order.sort_by(|&a, &b| spec.persons[b].depth.total_cmp(&spec.persons[a].depth));
        Ok(Self {
            spec: spec.clone(),
            seed,
            start: spec.start_frame.unwrap_or(0),
            centers,
            velocities,
            paint_order,
        })
    }

    pub fn spec(&self) -> &SceneSpec {
        &self.spec
    }

    pub fn frames(&self) -> std::ops::Range<u64> {
        self.start..self.start + self.spec.duration
    }

    pub fn manifest(&self) -> SceneManifest {
        let [w, h] = self.spec.camera.resolution;
        SceneManifest {
            scene_id: self.spec.id.clone(),
            frame_range: self.frames(),
            density_regime: self.spec.regime,
            fps: self.spec.fps as f32,
            resolution: (w, h),
            boundary_exclusion: self.spec.boundary_exclusion,
        }
    }

    fn head_box(&self, offset: usize, person: usize, frame: u64) -> HeadBox {
        let c = self.centers[offset][person];
        let half = self.spec.persons[person].box_side(&self.spec.camera) / 2.0;
        HeadBox::new(
            (c[0] - half) as f32,
            (c[1] - half) as f32,
            (c[0] + half) as f32,
            (c[1] + half) as f32,
        )
        .with_frame(frame)
    }

    /// Render one frame. `frame` must lie in [`Self::frames`].
    pub fn frame(&self, frame: u64) -> SynthFrame {
        assert!(self.frames().contains(&frame), "frame {frame} outside scene");
        let t = (frame - self.start) as usize;
        let [w, h] = self.spec.camera.resolution;
        let mut flow = FlowField::zeros(w, h);
        let noise = (self.spec.noise_sigma > 0.0).then(|| {
            (
                Normal::new(0.0, self.spec.noise_sigma).expect("validated sigma"),
                ChaCha8Rng::seed_from_u64(mix_seed(self.seed, frame)),
            )
        });
        let mut noise = noise;
        let boxes: Vec<HeadBox> = (0..self.spec.persons.len())
            .map(|p| self.head_box(t, p, frame))
            .collect();
        for &p in &self.paint_order {
            let Some(rect) = boxes[p].raster_within(w, h) else {
                continue;
            };
            let [vx, vy] = self.velocities[t][p];
            for y in rect.y0..rect.y1 {
                for x in rect.x0..rect.x1 {
                    let uv = match noise.as_mut() {
                        Some((dist, rng)) => [(vx + dist.sample(rng)) as f32, (vy + dist.sample(rng)) as f32],
                        None => [vx as f32, vy as f32],
                    };
                    flow.set(x, y, uv);
                }
            }
        }
        let truth = (0..self.spec.persons.len())
            .map(|p| {
                let [vx, vy] = self.velocities[t][p];
                let base = self.spec.persons[p].base_label();
                let category = self
                    .spec
                    .injections
                    .iter()
                    .rfind(|inj| inj.person == p && inj.active(t as u64))
                    .map_or(base, |inj| inj.category(base));
                let b = &boxes[p];
                PersonTruth {
                    frame,
                    person: p,
                    pixel_speed: vx.hypot(vy),
                    category,
                    bbox: [b.x_min, b.y_min, b.x_max, b.y_max],
                }
            })
            .collect();
        SynthFrame {
            frame,
            flow,
            boxes,
            truth,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = SynthFrame> + '_ {
        self.frames().map(|f| self.frame(f))
    }
}

fn validate(spec: &SceneSpec) -> Result<(), SynthError> {
    let invalid = |reason: String| SynthError::InvalidSpec {
        scene: spec.id.clone(),
        reason,
    };
    let [w, h] = spec.camera.resolution;
    if w == 0 || h == 0 {
        return Err(invalid("resolution must be non-zero".into()));
    }
    if !(spec.camera.focal_px > 0.0 && spec.camera.focal_px.is_finite()) {
        return Err(invalid("focal length must be positive".into()));
    }
    if !(spec.fps > 0.0 && spec.fps.is_finite()) {
        return Err(invalid("fps must be positive".into()));
    }
    if spec.duration == 0 {
        return Err(invalid("duration must be at least one frame".into()));
    }
    if u64::from(spec.boundary_exclusion) * 2 >= spec.duration {
        return Err(invalid("boundary exclusion covers the whole scene".into()));
    }
    if !(spec.noise_sigma >= 0.0 && spec.noise_sigma.is_finite()) {
        return Err(invalid("noise sigma must be non-negative".into()));
    }
    for (i, p) in spec.persons.iter().enumerate() {
        let ok = p.depth > 0.0
            && p.head_size > 0.0
            && p.world_speed >= 0.0
            && [p.depth, p.head_size, p.world_speed, p.heading, p.start[0], p.start[1]]
                .iter()
                .all(|v| v.is_finite());
        if !ok {
            return Err(invalid(format!("person {i} has invalid geometry")));
        }
    }
    for inj in &spec.injections {
        if inj.person >= spec.persons.len() {
            return Err(invalid(format!("injection targets missing person {}", inj.person)));
        }
        if inj.frames[0] >= inj.frames[1] || inj.frames[1] > spec.duration {
            return Err(invalid(format!("injection frames {:?} outside scene", inj.frames)));
        }
        if !(inj.multiplier >= 0.0 && inj.multiplier.is_finite()) {
            return Err(invalid("injection multiplier must be non-negative".into()));
        }
    }
    Ok(())
}

/// Generate every frame of a scene in memory.
pub fn generate_scene(spec: &SceneSpec, seed: u64) -> Result<GeneratedScene, SynthError> {
    let generator = SceneGenerator::new(spec, seed)?;
    let mut out = GeneratedScene {
        flows: Vec::new(),
        detections: Vec::new(),
        truth: Vec::new(),
    };
    for f in generator.iter() {
        out.flows.push(f.flow);
        out.detections.push(f.boxes);
        out.truth.push(f.truth);
    }
    Ok(out)
}

#[derive(Serialize)]
struct TruthLine<'a> {
    scene: &'a str,
    #[serde(flatten)]
    truth: &'a PersonTruth,
}

/// Write a scene directory: `flows/frame_NNNNNN.flo`, `detections.jsonl`,
/// `manifest.toml` and `truth.jsonl`. Scenes must not overlap in frames.
pub fn write_scenes(dir: &Path, specs: &[SceneSpec], seed: u64) -> Result<Vec<SceneManifest>, SynthError> {
    let mut generators = specs
        .iter()
        .enumerate()
        .map(|(i, s)| SceneGenerator::new(s, mix_seed(seed, i as u64)))
        .collect::<Result<Vec<_>, _>>()?;
    generators.sort_by_key(|g| g.start);
    for pair in generators.windows(2) {
        if pair[0].frames().end > pair[1].start {
            return Err(SynthError::InvalidSpec {
                scene: pair[1].spec.id.clone(),
                reason: format!("overlaps scene {:?}", pair[0].spec.id),
            });
        }
    }
    if let Some(first) = generators.first() {
        if let Some(g) = generators
            .iter()
            .find(|g| g.spec.camera.resolution != first.spec.camera.resolution)
        {
            return Err(SynthError::InvalidSpec {
                scene: g.spec.id.clone(),
                reason: "all scenes in a directory must share one resolution".into(),
            });
        }
    }

    let flows = dir.join("flows");
    fs::create_dir_all(&flows)?;
    let mut detections = BufWriter::new(File::create(dir.join("detections.jsonl"))?);
    let mut truth = BufWriter::new(File::create(dir.join("truth.jsonl"))?);
    for g in &generators {
        for f in g.iter() {
            write_flow_file(&f.flow, flows.join(flow_file_name(f.frame)))?;
            write_detection_frame(&mut detections, f.frame, &f.boxes)?;
            for t in &f.truth {
                serde_json::to_writer(
                    &mut truth,
                    &TruthLine {
                        scene: &g.spec.id,
                        truth: t,
                    },
                )
                .map_err(io::Error::from)?;
                truth.write_all(b"\n")?;
            }
        }
    }
    detections.flush()?;
    truth.flush()?;
    let manifests: Vec<SceneManifest> = generators.iter().map(SceneGenerator::manifest).collect();
    fs::write(dir.join("manifest.toml"), write_manifest(&manifests))?;
    Ok(manifests)
}
