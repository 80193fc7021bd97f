use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::JointState;
use crate::transform::SimilarityTransform;

/// One trajectory row. Object poses are in the simulator frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryFrame {
    pub timestamp: f64,
    pub joints: Vec<f64>,
    #[serde(default)]
    pub objects: BTreeMap<String, SimilarityTransform>,
}

impl TrajectoryFrame {
    pub fn joint_state(&self) -> JointState {
        JointState(self.joints.clone())
    }
}

/// Timestamps strictly increase; every row has the same joint count.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Trajectory {
    frames: Vec<TrajectoryFrame>,
}

impl Trajectory {
    pub fn new(frames: Vec<TrajectoryFrame>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::Config("trajectory has no frames".into()));
        }
        let n = frames[0].joints.len();
        for (k, f) in frames.iter().enumerate() {
            if !f.timestamp.is_finite() || f.joints.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("frame {k}: non-finite value")));
            }
            if f.joints.len() != n {
                return Err(Error::Config(format!(
                    "frame {k}: {} joints, expected {n}",
                    f.joints.len()
                )));
            }
            if k > 0 && f.timestamp <= frames[k - 1].timestamp {
                return Err(Error::Config(format!("frame {k}: timestamps must strictly increase")));
            }
        }
        Ok(Self { frames })
    }

    pub fn frames(&self) -> &[TrajectoryFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn joint_count(&self) -> usize {
        self.frames.first().map_or(0, |f| f.joints.len())
    }

    /// Newline-delimited JSON, one frame per line; blank lines are skipped.
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut frames = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let f: TrajectoryFrame =
                serde_json::from_str(line).map_err(|e| Error::parse(source_name, i + 1, e.to_string()))?;
            frames.push(f);
        }
        Self::new(frames)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for f in &self.frames {
            out.push_str(&serde_json::to_string(f)?);
            out.push('\n');
        }
        Ok(out)
    }
}
