//! Process exit codes, one per error class.

use crowdflow_core::anomaly::AnomalyError;
use crowdflow_core::dataset::DatasetError;
use crowdflow_core::synth::SynthError;
use crowdflow_core::{ClusterError, DetectionError, FlowError, ManifestError, ModelStoreError, VelocityError};

use crate::config::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Config = 2,
    Flow = 3,
    Detections = 4,
    Manifest = 5,
    Velocity = 6,
    Clustering = 7,
    Anomaly = 8,
    ModelStore = 9,
    Synth = 10,
    Io = 11,
}

impl ExitKind {
    #[cfg(test)]
    pub const ALL: [ExitKind; 10] = [
        ExitKind::Config,
        ExitKind::Flow,
        ExitKind::Detections,
        ExitKind::Manifest,
        ExitKind::Velocity,
        ExitKind::Clustering,
        ExitKind::Anomaly,
        ExitKind::ModelStore,
        ExitKind::Synth,
        ExitKind::Io,
    ];

    pub fn code(self) -> i32 {
        self as i32
    }
}

fn from_dataset(e: &DatasetError) -> ExitKind {
    match e {
        DatasetError::Manifest(_) => ExitKind::Manifest,
        DatasetError::Detections(_) => ExitKind::Detections,
        DatasetError::Flow { .. } | DatasetError::ResolutionMismatch { .. } => ExitKind::Flow,
        DatasetError::NoModelForRegime(_) => ExitKind::ModelStore,
        DatasetError::Io { .. } => ExitKind::Io,
    }
}

/// The first error in the chain with a known class decides the code.
pub fn classify(err: &anyhow::Error) -> ExitKind {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return ExitKind::Config;
        }
        if let Some(e) = cause.downcast_ref::<DatasetError>() {
            return from_dataset(e);
        }
        if cause.is::<FlowError>() {
            return ExitKind::Flow;
        }
        if cause.is::<DetectionError>() {
            return ExitKind::Detections;
        }
        if cause.is::<ManifestError>() {
            return ExitKind::Manifest;
        }
        if cause.is::<VelocityError>() {
            return ExitKind::Velocity;
        }
        if cause.is::<ClusterError>() {
            return ExitKind::Clustering;
        }
        if let Some(e) = cause.downcast_ref::<AnomalyError>() {
            return match e {
                AnomalyError::Cluster(_) => ExitKind::Clustering,
                _ => ExitKind::Anomaly,
            };
        }
        if cause.is::<ModelStoreError>() {
            return ExitKind::ModelStore;
        }
        if cause.is::<SynthError>() {
            return ExitKind::Synth;
        }
    }
    ExitKind::Io
}
