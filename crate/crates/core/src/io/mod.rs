//! Readers and writers for the perception inputs: flow fields, head
//! detections and scene manifests.

pub mod detections;
pub mod flo;
pub mod manifest;

pub use detections::{read_detections, write_detection_frame, DetectionError, DetectionFrame, DetectionReader};
pub use flo::{
    flow_file_name, read_flow, read_flow_file, write_flow, write_flow_file, FlowError, FlowField, FLO_MAGIC,
};
pub use manifest::{read_manifest, write_manifest, ManifestError, SceneManifest};
