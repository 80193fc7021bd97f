//! Coordinate alignment between the simulator frame, the Gaussian scene
//! frame and real cameras.
//!
//! - [`estimate_frame_transform`]: averages per-joint candidates
//!   `T_simᵢ · T_gsᵢ⁻¹` into one rigid gs→sim transform.
//! - [`express_object`]: re-expresses a simulator object pose in the scene
//!   frame.
//! - [`layout_shift`]: integer-shift IoU search between two masks.
//! - [`localize_camera`]: photometric camera pose refinement against a
//!   frozen scene.

mod layout;
mod localize;

use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transform::{rotation_angle_between, SimilarityTransform};

pub use layout::{bev_camera, layout_shift, LayoutConfig, LayoutShift};
pub use localize::{localize_camera, LocalizeConfig, LocalizeResult};

/// One joint's pose seen from both frames.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FramePairObservation {
    #[serde(rename = "i")]
    pub joint_index: usize,
    /// Joint pose in the Gaussian scene (from forward kinematics).
    #[serde(rename = "T_gs")]
    pub t_gs: SimilarityTransform,
    /// Joint pose reported by the simulator.
    #[serde(rename = "T_sim")]
    pub t_sim: SimilarityTransform,
    #[serde(rename = "w", default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

pub fn load_observations(path: &Path) -> Result<Vec<FramePairObservation>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e.line(), e.to_string()))
}

/// Weighting schemes for per-joint candidates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightPreset {
    Uniform,
    /// Weight grows linearly toward the end effector: `wᵢ ∝ i`.
    Distal,
}

impl WeightPreset {
    pub fn apply(self, obs: &mut [FramePairObservation]) {
        for o in obs.iter_mut() {
            o.weight = match self {
                WeightPreset::Uniform => 1.0,
                WeightPreset::Distal => o.joint_index as f64 + 1.0,
            };
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateConfig {
    pub max_rotation_deg: f64,
    pub max_translation: f64,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            max_rotation_deg: 5.0,
            max_translation: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointResidual {
    pub joint_index: usize,
    pub weight: f64,
    pub rotation_deg: f64,
    pub translation: f64,
}

/// Averaged gs→sim transform plus per-joint disagreement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub gs_to_sim: SimilarityTransform,
    pub residuals: Vec<JointResidual>,
    pub warnings: Vec<String>,
}

impl AlignmentReport {
    pub fn sim_to_gs(&self) -> Result<SimilarityTransform> {
        self.gs_to_sim.inverse()
    }
}

pub fn estimate_frame_transform(obs: &[FramePairObservation]) -> Result<AlignmentReport> {
    estimate_frame_transform_with(obs, &EstimateConfig::default())
}

/// Weighted chordal quaternion mean of the candidate rotations (signs
/// aligned to the first candidate) with the weighted mean translation.
pub fn estimate_frame_transform_with(
    obs: &[FramePairObservation],
    cfg: &EstimateConfig,
) -> Result<AlignmentReport> {
    if obs.is_empty() {
        return Err(Error::Estimation("no observations".into()));
    }
    if let Some(o) = obs.iter().find(|o| !(o.weight >= 0.0) || !o.weight.is_finite()) {
        return Err(Error::Estimation(format!(
            "joint {} has invalid weight {}",
            o.joint_index, o.weight
        )));
    }
    let total: f64 = obs.iter().map(|o| o.weight).sum();
    if !(total > 0.0) {
        return Err(Error::Estimation("total weight is zero".into()));
    }

    let mut candidates = Vec::with_capacity(obs.len());
    for o in obs {
        for (name, t) in [("T_gs", &o.t_gs), ("T_sim", &o.t_sim)] {
            if !t.is_rigid(1e-6) {
                return Err(Error::Estimation(format!("joint {}: {name} is not rigid", o.joint_index)));
            }
        }
        candidates.push(o.t_sim.compose(&o.t_gs.inverse()?));
    }

    let weighted: Vec<(&SimilarityTransform, f64)> = candidates
        .iter()
        .zip(obs)
        .filter(|(_, o)| o.weight > 0.0)
        .map(|(c, o)| (c, o.weight))
        .collect();

    let mean = if weighted.iter().all(|(c, _)| *c == weighted[0].0) {
        *weighted[0].0
    } else {
        let quats: Vec<UnitQuaternion<f64>> = weighted
            .iter()
            .map(|(c, _)| Ok(c.decompose()?.quaternion()))
            .collect::<Result<_>>()?;
        let reference = quats[0].into_inner();
        let mut q_sum = Quaternion::new(0.0, 0.0, 0.0, 0.0);
        let mut t_sum = Vector3::zeros();
        for ((c, w), q) in weighted.iter().zip(&quats) {
            let mut q = q.into_inner();
            if q.dot(&reference) < 0.0 {
                q = -q;
            }
            q_sum += q * *w;
            t_sum += c.translation_vector() * *w;
        }
        if q_sum.norm() < 1e-12 {
            return Err(Error::Estimation("candidate rotations cancel out".into()));
        }
        let q = UnitQuaternion::from_quaternion(q_sum);
        SimilarityTransform::from_parts(1.0, &q, t_sum / total)
    };

    let mean_rot = mean.linear();
    let mut residuals = Vec::with_capacity(obs.len());
    let mut warnings = Vec::new();
    for (c, o) in candidates.iter().zip(obs) {
        let rotation_deg = rotation_angle_between(&mean_rot, &c.linear()).to_degrees();
        let translation = (c.translation_vector() - mean.translation_vector()).norm();
        if rotation_deg > cfg.max_rotation_deg || translation > cfg.max_translation {
            warnings.push(format!(
                "joint {} disagrees with the consensus by {rotation_deg:.3} deg / {translation:.4} m",
                o.joint_index
            ));
        }
        residuals.push(JointResidual {
            joint_index: o.joint_index,
            weight: o.weight,
            rotation_deg,
            translation,
        });
    }
    Ok(AlignmentReport {
        gs_to_sim: mean,
        residuals,
        warnings,
    })
}

/// `T_obj^gs = T_sim^gs · T_obj^sim`.
pub fn express_object(obj_in_sim: &SimilarityTransform, sim_to_gs: &SimilarityTransform) -> SimilarityTransform {
    sim_to_gs.compose(obj_in_sim)
}
