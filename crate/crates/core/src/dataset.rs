//! Scene directories on disk and the frame pipeline over them.
//!
//! A dataset is a manifest, a detections file and a directory of
//! `frame_NNNNNN.flo` files. Frames are processed in parallel batches and
//! results are delivered strictly in frame order.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::anomaly::{infer_frame, AnomalyEvent};
use crate::boxes::HeadBox;
use crate::clustering::ObservationSet;
use crate::io::{
    flow_file_name, read_detections, read_flow_file, read_manifest, DetectionError, DetectionFrame, FlowError,
    FlowField, ManifestError, SceneManifest,
};
use crate::model_store::ModelFile;
use crate::regime::DensityRegime;
use crate::velocity::{estimate_velocities, NormalizationConfig, VelocityObservation};

/// Frames handed to the thread pool at a time.
pub const DEFAULT_BATCH: usize = 32;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Detections(#[from] DetectionError),
    #[error("frame {frame}: {source}")]
    Flow { frame: u64, source: FlowError },
    #[error("frame {frame}: flow is {found:?}, manifest says {expected:?}")]
    ResolutionMismatch {
        frame: u64,
        expected: (u32, u32),
        found: (u32, u32),
    },
    #[error("no model for the {0} regime")]
    NoModelForRegime(DensityRegime),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetPaths {
    pub flows_dir: PathBuf,
    pub detections: PathBuf,
    pub manifest: PathBuf,
}

impl DatasetPaths {
    /// The layout written by the scene synthesizer.
    pub fn in_dir(root: impl AsRef<Path>) -> Self {
        let root = root.as_ref();
        Self {
            flows_dir: root.join("flows"),
            detections: root.join("detections.jsonl"),
            manifest: root.join("manifest.toml"),
        }
    }
}

/// Detections of one frame together with the scene it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameJob {
    pub frame: u64,
    pub scene: usize,
    pub boxes: Vec<HeadBox>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    paths: DatasetPaths,
    scenes: Vec<SceneManifest>,
    resolution: (u32, u32),
}

impl Dataset {
    pub fn open(paths: DatasetPaths) -> Result<Self, DatasetError> {
        let text = fs::read_to_string(&paths.manifest).map_err(|source| DatasetError::Io {
            path: paths.manifest.clone(),
            source,
        })?;
        let scenes = read_manifest(&text)?;
        let resolution = scenes[0].resolution;
        Ok(Self {
            paths,
            scenes,
            resolution,
        })
    }

    pub fn scenes(&self) -> &[SceneManifest] {
        &self.scenes
    }

    pub fn resolution(&self) -> (u32, u32) {
        self.resolution
    }

    pub fn paths(&self) -> &DatasetPaths {
        &self.paths
    }

    pub fn scene_of(&self, frame: u64) -> Option<usize> {
        let i = self.scenes.partition_point(|s| s.frame_range.end <= frame);
        (i < self.scenes.len() && self.scenes[i].contains(frame)).then_some(i)
    }

    /// Detection frames that fall inside some scene, in file order. Frames
    /// outside every scene are skipped.
    pub fn frames(&self) -> Result<impl Iterator<Item = Result<FrameJob, DatasetError>> + '_, DatasetError> {
        let file = File::open(&self.paths.detections).map_err(|source| DatasetError::Io {
            path: self.paths.detections.clone(),
            source,
        })?;
        let reader = read_detections(BufReader::new(file), self.resolution);
        Ok(reader.filter_map(move |item| match item {
            Ok(DetectionFrame { frame, boxes }) => match self.scene_of(frame) {
                Some(scene) => Some(Ok(FrameJob { frame, scene, boxes })),
                None => {
                    log::debug!("frame {frame} is outside every scene, skipping");
                    None
                }
            },
            Err(e) => Some(Err(e.into())),
        }))
    }

    pub fn load_flow(&self, frame: u64) -> Result<FlowField, DatasetError> {
        let path = self.paths.flows_dir.join(flow_file_name(frame));
        let flow = read_flow_file(&path).map_err(|source| DatasetError::Flow { frame, source })?;
        let found = (flow.width(), flow.height());
        if found != self.resolution {
            return Err(DatasetError::ResolutionMismatch {
                frame,
                expected: self.resolution,
                found,
            });
        }
        Ok(flow)
    }
}

/// Map `f` over `jobs` in parallel batches, handing results to `emit` in
/// input order. Stops at the first error in input order.
pub fn process_ordered<J, T, E, I, F, S>(jobs: I, batch: usize, f: F, mut emit: S) -> Result<(), E>
where
    I: IntoIterator<Item = Result<J, E>>,
    J: Send,
    T: Send,
    E: Send,
    F: Fn(J) -> Result<T, E> + Sync,
    S: FnMut(T) -> Result<(), E>,
{
    let batch = batch.max(1);
    let mut jobs = jobs.into_iter();
    loop {
        let mut chunk = Vec::with_capacity(batch);
        let mut pending_err = None;
        for job in jobs.by_ref().take(batch) {
            match job {
                Ok(j) => chunk.push(j),
                Err(e) => {
                    pending_err = Some(e);
                    break;
                }
            }
        }
        if chunk.is_empty() && pending_err.is_none() {
            return Ok(());
        }
        let results: Vec<Result<T, E>> = chunk.into_par_iter().map(&f).collect();
        for r in results {
            emit(r?)?;
        }
        if let Some(e) = pending_err {
            return Err(e);
        }
    }
}

/// Training observations grouped by regime.
#[derive(Debug, Clone, Default)]
pub struct CollectedObservations {
    pub per_regime: BTreeMap<DensityRegime, ObservationSet>,
    pub observations: Vec<VelocityObservation>,
    pub frames: usize,
    pub excluded_frames: usize,
}

/// Velocities of every box in every non-transitional frame.
pub fn collect_observations(
    dataset: &Dataset,
    cfg: &NormalizationConfig,
    batch: usize,
) -> Result<CollectedObservations, DatasetError> {
    let mut out = CollectedObservations::default();
    let mut excluded = 0;
    let jobs = dataset.frames()?.filter(|job| match job {
        Ok(j) if !dataset.scenes[j.scene].training_frames().contains(&j.frame) => {
            excluded += 1;
            false
        }
        _ => true,
    });
    process_ordered(
        jobs,
        batch,
        |job| {
            let scene = &dataset.scenes[job.scene];
            let flow = dataset.load_flow(job.frame)?;
            Ok((
                job.scene,
                estimate_velocities(&flow, &job.boxes, cfg, scene.density_regime),
            ))
        },
        |(scene, obs)| {
            let s = &dataset.scenes[scene];
            out.frames += 1;
            out.per_regime
                .entry(s.density_regime)
                .or_default()
                .extend_scene(&s.scene_id, obs.iter().map(|o| o.m_norm));
            out.observations.extend(obs);
            Ok(())
        },
    )?;
    out.excluded_frames = excluded;
    Ok(out)
}

/// Score every frame with the model for its scene's regime. `emit` receives
/// frames in order, including frames without detections.
pub fn infer_dataset<S>(dataset: &Dataset, models: &ModelFile, batch: usize, mut emit: S) -> Result<usize, DatasetError>
where
    S: FnMut(u64, &[AnomalyEvent]) -> Result<(), DatasetError>,
{
    for s in dataset.scenes() {
        if models.model_for(s.density_regime).is_none() {
            return Err(DatasetError::NoModelForRegime(s.density_regime));
        }
    }
    let mut frames = 0;
    process_ordered(
        dataset.frames()?,
        batch,
        |job| {
            let regime = dataset.scenes[job.scene].density_regime;
            let model = models.model_for(regime).expect("checked above");
            if job.boxes.is_empty() {
                return Ok((job.frame, Vec::new()));
            }
            let flow = dataset.load_flow(job.frame)?;
            Ok((job.frame, infer_frame(&flow, &job.boxes, model)))
        },
        |(frame, events)| {
            frames += 1;
            emit(frame, &events)
        },
    )?;
    Ok(frames)
}
