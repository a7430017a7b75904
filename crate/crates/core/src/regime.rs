use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Coarse crowd-density class. Each regime gets its own trained model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DensityRegime {
    LowMedium,
    High,
}

impl DensityRegime {
    pub const ALL: [DensityRegime; 2] = [DensityRegime::LowMedium, DensityRegime::High];

    pub fn as_str(self) -> &'static str {
        match self {
            DensityRegime::LowMedium => "low-medium",
            DensityRegime::High => "high",
        }
    }
}

impl fmt::Display for DensityRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownRegime(pub String);

impl fmt::Display for UnknownRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown density regime {:?}", self.0)
    }
}

impl std::error::Error for UnknownRegime {}

impl FromStr for DensityRegime {
    type Err = UnknownRegime;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "low-medium" | "low_medium" | "LowMedium" => Ok(DensityRegime::LowMedium),
            "high" | "High" => Ok(DensityRegime::High),
            other => Err(UnknownRegime(other.to_string())),
        }
    }
}

/// Optional density heuristic: boxes per kilopixel above the cutoff means
/// [`DensityRegime::High`]. Scenes are normally tagged in the manifest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityRule {
    pub boxes_per_kilopixel: f64,
}

impl DensityRule {
    pub fn classify(&self, box_count: usize, width: u32, height: u32) -> DensityRegime {
        let kilopixels = f64::from(width) * f64::from(height) / 1000.0;
        if kilopixels > 0.0 && box_count as f64 / kilopixels > self.boxes_per_kilopixel {
            DensityRegime::High
        } else {
            DensityRegime::LowMedium
        }
    }
}
