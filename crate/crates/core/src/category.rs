use std::fmt;

use serde::{Deserialize, Serialize};

/// Semantic motion categories in ascending velocity order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MotionCategory {
    Halt,
    Slow,
    Normal,
    Fast,
}

impl MotionCategory {
    pub const ORDERED: [MotionCategory; 4] = [
        MotionCategory::Halt,
        MotionCategory::Slow,
        MotionCategory::Normal,
        MotionCategory::Fast,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MotionCategory::Halt => "halt",
            MotionCategory::Slow => "slow",
            MotionCategory::Normal => "normal",
            MotionCategory::Fast => "fast",
        }
    }

    pub fn is_anomalous(self) -> bool {
        self != MotionCategory::Normal
    }
}

impl fmt::Display for MotionCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
