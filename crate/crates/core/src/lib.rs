//! Crowd anomaly detection from dense optical flow and head detections.
//!
//! The pipeline turns the flow inside each head box into one normalized
//! scalar velocity per person, learns four ordered motion categories
//! (halt, slow, normal, fast) per density regime with k-means and Ward
//! grouping, and scores new observations as a signed percentage deviation
//! from the learned normal band.
//!
//! ```
//! use crowdflow_core::{anomaly_score, categorize, CategoryThresholds, MotionCategory, NormalBounds};
//!
//! let bounds = NormalBounds::new(2.0, 4.0).unwrap();
//! let score = anomaly_score(5.0, &bounds);
//! assert_eq!(score, 25.0);
//! assert_eq!(categorize(score, &CategoryThresholds::default()), MotionCategory::Fast);
//! ```

pub mod anomaly;
pub mod boxes;
pub mod category;
pub mod clustering;
pub mod dataset;
pub mod diagnostics;
pub mod io;
pub mod model_store;
pub mod regime;
pub mod synth;
pub mod velocity;

pub use anomaly::{
    anomaly_score, categorize, infer_frame, normal_bounds, train, train_regime, write_event, AnomalyError,
    AnomalyEvent, CategoryThresholds, EventRecord, MotionModel, NormalBounds, TrainedRegime, TrainingConfig,
};
pub use boxes::{HeadBox, PixelRect};
pub use category::MotionCategory;
pub use clustering::{ClusterError, KMeansModel, ObservationSet};
pub use io::{DetectionError, FlowError, FlowField, ManifestError, SceneManifest};
pub use model_store::{load_model, save_model, ModelFile, ModelStoreError, TrainingFingerprint};
pub use regime::DensityRegime;
pub use synth::{generate_scene, SceneSpec, SynthError};
pub use velocity::{estimate_velocities, NormalizationConfig, NormalizationScheme, VelocityError, VelocityObservation};
