//! Scene manifests in TOML.
//!
//! ```toml
//! [[scene]]
//! id = "plaza-north"
//! frames = [0, 100]          # half-open [start, end)
//! regime = "high"            # "low-medium" | "high"
//! fps = 25.0
//! resolution = [1280, 720]
//! boundary_exclusion = 5
//! ```

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::regime::DensityRegime;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("manifest parse error: {0}")]
    Parse(String),
    #[error("scene {scene:?}: unknown regime {regime:?}")]
    UnknownRegime { scene: String, regime: String },
    #[error("scenes {first:?} and {second:?} overlap")]
    OverlappingScenes { first: String, second: String },
    #[error("scene {scene:?}: {reason}")]
    InvalidScene { scene: String, reason: String },
    #[error("scene {scene:?} resolution {found:?} differs from {expected:?}")]
    ResolutionMismatch {
        scene: String,
        expected: (u32, u32),
        found: (u32, u32),
    },
    #[error("manifest lists no scenes")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceneManifest {
    pub scene_id: String,
    pub frame_range: Range<u64>,
    pub density_regime: DensityRegime,
    pub fps: f32,
    pub resolution: (u32, u32),
    pub boundary_exclusion: u32,
}

impl SceneManifest {
    /// Frames kept for training once transitional frames at both scene
    /// boundaries are removed.
    pub fn training_frames(&self) -> Range<u64> {
        let excl = u64::from(self.boundary_exclusion);
        self.frame_range.start + excl..self.frame_range.end - excl
    }

    pub fn contains(&self, frame: u64) -> bool {
        self.frame_range.contains(&frame)
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct SceneRecord {
    id: String,
    frames: [u64; 2],
    regime: String,
    fps: f32,
    resolution: [u32; 2],
    #[serde(default)]
    boundary_exclusion: u32,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct ManifestDoc {
    #[serde(default)]
    scene: Vec<SceneRecord>,
}

/// Parse and validate a manifest. Scenes come back sorted by start frame.
pub fn read_manifest(text: &str) -> Result<Vec<SceneManifest>, ManifestError> {
    let doc: ManifestDoc = toml::from_str(text).map_err(|e| ManifestError::Parse(e.to_string()))?;
    let mut scenes = Vec::with_capacity(doc.scene.len());
    for rec in doc.scene {
        let density_regime = rec
            .regime
            .parse::<DensityRegime>()
            .map_err(|_| ManifestError::UnknownRegime {
                scene: rec.id.clone(),
                regime: rec.regime.clone(),
            })?;
        let [start, end] = rec.frames;
        let invalid = |reason: String| ManifestError::InvalidScene {
            scene: rec.id.clone(),
            reason,
        };
        if start >= end {
            return Err(invalid(format!("empty frame range [{start}, {end})")));
        }
        if 2 * u64::from(rec.boundary_exclusion) >= end - start {
            return Err(invalid(format!(
                "boundary exclusion {} leaves no frames in [{start}, {end})",
                rec.boundary_exclusion
            )));
        }
        if !(rec.fps.is_finite() && rec.fps > 0.0) {
            return Err(invalid(format!("fps must be positive, got {}", rec.fps)));
        }
        if rec.resolution[0] == 0 || rec.resolution[1] == 0 {
            return Err(invalid("zero resolution".to_string()));
        }
        scenes.push(SceneManifest {
            scene_id: rec.id,
            frame_range: start..end,
            density_regime,
            fps: rec.fps,
            resolution: (rec.resolution[0], rec.resolution[1]),
            boundary_exclusion: rec.boundary_exclusion,
        });
    }
    if scenes.is_empty() {
        return Err(ManifestError::Empty);
    }
    scenes.sort_by_key(|s| s.frame_range.start);
    for pair in scenes.windows(2) {
        if pair[1].frame_range.start < pair[0].frame_range.end {
            return Err(ManifestError::OverlappingScenes {
                first: pair[0].scene_id.clone(),
                second: pair[1].scene_id.clone(),
            });
        }
    }
    let expected = scenes[0].resolution;
    if let Some(s) = scenes.iter().find(|s| s.resolution != expected) {
        return Err(ManifestError::ResolutionMismatch {
            scene: s.scene_id.clone(),
            expected,
            found: s.resolution,
        });
    }
    Ok(scenes)
}

pub fn write_manifest(scenes: &[SceneManifest]) -> String {
    let doc = ManifestDoc {
        scene: scenes
            .iter()
            .map(|s| SceneRecord {
                id: s.scene_id.clone(),
                frames: [s.frame_range.start, s.frame_range.end],
                regime: s.density_regime.as_str().to_string(),
                fps: s.fps,
                resolution: [s.resolution.0, s.resolution.1],
                boundary_exclusion: s.boundary_exclusion,
            })
            .collect(),
    };
    toml::to_string(&doc).expect("manifest serializes")
}
