use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use crowdflow_core::anomaly::{CategoryThresholds, TrainingConfig};
use crowdflow_core::clustering::{DEFAULT_K_RANGE, DEFAULT_RESTARTS};
use crowdflow_core::dataset::{DatasetPaths, DEFAULT_BATCH};
use crowdflow_core::velocity::{NormalizationConfig, NormalizationScheme};
use serde::Deserialize;
use thiserror::Error;

pub const DEFAULT_SEED: u64 = 0x5EED;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Invalid(String),
    #[error("missing {what}: pass {flag} or set it in the config file")]
    Missing { what: &'static str, flag: &'static str },
    #[error("{what} {path} does not exist")]
    NotFound { what: &'static str, path: PathBuf },
    #[error("config file {path}: {message}")]
    File { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    AreaBased,
    UnifiedScale,
}

impl From<Scheme> for NormalizationScheme {
    fn from(s: Scheme) -> Self {
        match s {
            Scheme::AreaBased => NormalizationScheme::AreaBased,
            Scheme::UnifiedScale => NormalizationScheme::UnifiedScale,
        }
    }
}

/// Options shared by every subcommand. Each can also be set in a TOML file
/// passed with `--config`; values from the file win over flags.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunArgs {
    /// TOML file with any of these options (file values override flags)
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Scene directory holding flows/, detections.jsonl and manifest.toml
    #[arg(short = 'd', long, value_name = "DIR")]
    pub scene_dir: Option<PathBuf>,
    /// Directory of frame_NNNNNN.flo files (overrides the scene directory)
    #[arg(long, value_name = "DIR")]
    pub flows_dir: Option<PathBuf>,
    /// Head detections, JSON Lines (overrides the scene directory)
    #[arg(long, value_name = "FILE")]
    pub detections: Option<PathBuf>,
    /// Scene manifest, TOML (overrides the scene directory)
    #[arg(long, value_name = "FILE")]
    pub manifest: Option<PathBuf>,

    /// Model file to write (train) or read (infer, report)
    #[arg(short, long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Output file or directory; stdout when omitted
    #[arg(short, long, value_name = "PATH")]
    pub output: Option<PathBuf>,
    /// Training report destination; stdout when omitted
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
    /// Events file to summarize (report)
    #[arg(long, value_name = "FILE")]
    pub events: Option<PathBuf>,
    /// Scene specification (synth)
    #[arg(long, value_name = "FILE")]
    pub spec: Option<PathBuf>,
    /// Write PPM overlays of frames with abnormal events into this directory
    #[arg(long, value_name = "DIR")]
    pub overlays: Option<PathBuf>,

    #[arg(long, value_enum)]
    pub normalization: Option<Scheme>,
    /// Unified-scale patch side p
    #[arg(long)]
    pub patch_size: Option<u32>,
    #[arg(long)]
    pub k_min: Option<usize>,
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// K-means restarts per k
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Scores at or above this percentage are fast
    #[arg(long, allow_hyphen_values = true)]
    pub fast_at: Option<f32>,
    /// Scores at or below this percentage are halt
    #[arg(long, allow_hyphen_values = true)]
    pub halt_at: Option<f32>,
    /// Scores above the halt cut-off and at or below this are slow
    #[arg(long, allow_hyphen_values = true)]
    pub slow_at: Option<f32>,
    /// Frames per parallel batch
    #[arg(long)]
    pub batch: Option<usize>,
}

impl RunArgs {
    /// Apply the `--config` file, if any, on top of the flags.
    pub fn resolve(self) -> Result<RunConfig, ConfigError> {
        let merged = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| ConfigError::File {
                    path: path.clone(),
                    message: e.to_string(),
                })?;
                let file: RunArgs = toml::from_str(&text).map_err(|e| ConfigError::File {
                    path: path.clone(),
                    message: e.to_string(),
                })?;
                file.over(self)
            }
            None => self,
        };
        RunConfig::new(merged)
    }

    fn over(self, base: RunArgs) -> RunArgs {
        RunArgs {
            config: base.config,
            scene_dir: self.scene_dir.or(base.scene_dir),
            flows_dir: self.flows_dir.or(base.flows_dir),
            detections: self.detections.or(base.detections),
            manifest: self.manifest.or(base.manifest),
            model: self.model.or(base.model),
            output: self.output.or(base.output),
            report: self.report.or(base.report),
            events: self.events.or(base.events),
            spec: self.spec.or(base.spec),
            overlays: self.overlays.or(base.overlays),
            normalization: self.normalization.or(base.normalization),
            patch_size: self.patch_size.or(base.patch_size),
            k_min: self.k_min.or(base.k_min),
            k_max: self.k_max.or(base.k_max),
            seed: self.seed.or(base.seed),
            restarts: self.restarts.or(base.restarts),
            fast_at: self.fast_at.or(base.fast_at),
            halt_at: self.halt_at.or(base.halt_at),
            slow_at: self.slow_at.or(base.slow_at),
            batch: self.batch.or(base.batch),
        }
    }
}

/// Fully resolved options with defaults applied.
#[derive(Debug, Clone)]
pub struct RunConfig {
    args: RunArgs,
    pub normalization: NormalizationConfig,
    pub training: TrainingConfig,
    /// Present only when some threshold was set explicitly.
    pub threshold_override: Option<CategoryThresholds>,
    pub batch: usize,
}

impl RunConfig {
    fn new(args: RunArgs) -> Result<Self, ConfigError> {
        let defaults = NormalizationConfig::default();
        let normalization = NormalizationConfig {
            scheme: args.normalization.map_or(defaults.scheme, Into::into),
            target_size: args.patch_size.unwrap_or(defaults.target_size),
        };
        normalization
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;

        let d = CategoryThresholds::default();
        let thresholds = CategoryThresholds {
            fast_at: args.fast_at.unwrap_or(d.fast_at),
            slow_low: args.halt_at.unwrap_or(d.slow_low),
            slow_high: args.slow_at.unwrap_or(d.slow_high),
        };
        thresholds.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let explicit = args.fast_at.is_some() || args.halt_at.is_some() || args.slow_at.is_some();

        let k_min = args.k_min.unwrap_or(DEFAULT_K_RANGE.0);
        let k_max = args.k_max.unwrap_or(DEFAULT_K_RANGE.1);
        if k_min == 0 || k_max < k_min + 2 {
            return Err(ConfigError::Invalid(format!(
                "k range [{k_min}, {k_max}] needs k_min >= 1 and at least one interior k"
            )));
        }
        let restarts = args.restarts.unwrap_or(DEFAULT_RESTARTS);
        if restarts == 0 {
            return Err(ConfigError::Invalid("restarts must be at least 1".into()));
        }
        let batch = args.batch.unwrap_or(DEFAULT_BATCH);
        if batch == 0 {
            return Err(ConfigError::Invalid("batch must be at least 1".into()));
        }
        Ok(Self {
            training: TrainingConfig {
                k_min,
                k_max,
                seed: args.seed.unwrap_or(DEFAULT_SEED),
                restarts,
                normalization,
                thresholds,
            },
            normalization,
            threshold_override: explicit.then_some(thresholds),
            batch,
            args,
        })
    }

    /// Input locations, each of which must exist.
    pub fn dataset_paths(&self) -> Result<DatasetPaths, ConfigError> {
        let a = &self.args;
        let base = a.scene_dir.as_ref().map(DatasetPaths::in_dir);
        let pick = |explicit: &Option<PathBuf>, from_dir: Option<PathBuf>, what, flag| {
            explicit.clone().or(from_dir).ok_or(ConfigError::Missing { what, flag })
        };
        let paths = DatasetPaths {
            manifest: pick(
                &a.manifest,
                base.as_ref().map(|b| b.manifest.clone()),
                "manifest",
                "--manifest",
            )?,
            detections: pick(
                &a.detections,
                base.as_ref().map(|b| b.detections.clone()),
                "detections file",
                "--detections",
            )?,
            flows_dir: pick(
                &a.flows_dir,
                base.as_ref().map(|b| b.flows_dir.clone()),
                "flows directory",
                "--flows-dir",
            )?,
        };
        must_exist("manifest", &paths.manifest)?;
        must_exist("detections file", &paths.detections)?;
        must_exist("flows directory", &paths.flows_dir)?;
        Ok(paths)
    }

    pub fn model(&self) -> Result<&Path, ConfigError> {
        self.args.model.as_deref().ok_or(ConfigError::Missing {
            what: "model file",
            flag: "--model",
        })
    }

    pub fn existing_model(&self) -> Result<&Path, ConfigError> {
        let m = self.model()?;
        must_exist("model file", m)?;
        Ok(m)
    }

    pub fn spec(&self) -> Result<&Path, ConfigError> {
        let s = self.args.spec.as_deref().ok_or(ConfigError::Missing {
            what: "scene spec",
            flag: "--spec",
        })?;
        must_exist("scene spec", s)?;
        Ok(s)
    }

    pub fn output(&self) -> Option<&Path> {
        self.args.output.as_deref()
    }

    pub fn report(&self) -> Option<&Path> {
        self.args.report.as_deref()
    }

    pub fn events(&self) -> Option<&Path> {
        self.args.events.as_deref()
    }

    pub fn overlays(&self) -> Option<&Path> {
        self.args.overlays.as_deref()
    }

    pub fn seed(&self) -> u64 {
        self.training.seed
    }
}

fn must_exist(what: &'static str, path: &Path) -> Result<(), ConfigError> {
    if path.exists() {
        Ok(())
    } else {
        Err(ConfigError::NotFound {
            what,
            path: path.to_path_buf(),
        })
    }
}
