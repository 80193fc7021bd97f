//! Scene and object editing with similarity transforms, plus scene merging.
//!
//! A similarity transform `T = [r·R | t]` acts on a Gaussian as
//!
//! - mean: `μ' = r·R μ + t`
//! - log-scale: `s' = s + ln r`
//! - rotation: `q' = q(R) ⊗ q`, so `Σ' = r² · R Σ Rᵀ`
//!
//! Opacity and SH coefficients are left as they are; SH bands are not rotated
//! (exact for degree-0 color, approximate for higher bands).

mod script;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::splat::GaussianScene;
use crate::transform::{rotation_to_quaternion, RatioDecomposition, SimilarityTransform, ORTHONORMAL_TOL};

pub use script::{run_script, CompositionScript, ScriptStep};

/// Center point for object-local edits.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ObjectAnchor {
    pub center: Vector3<f64>,
}

impl ObjectAnchor {
    pub fn new(center: Vector3<f64>) -> Result<Self> {
        if center.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("object anchor must be finite".into()));
        }
        Ok(Self { center })
    }
}

pub fn decompose_ratio(t: &SimilarityTransform) -> Result<RatioDecomposition> {
    t.decompose()
}

pub fn transform_scene(scene: &GaussianScene, t: &SimilarityTransform) -> Result<GaussianScene> {
    let dec = t.decompose()?;
    let linear = t.linear();
    let trans = t.translation_vector();
    let q = dec.quaternion();
    let log_r = dec.ratio.ln();
    let mut out = scene.clone();
    for g in &mut out.gaussians {
        g.mean = linear * g.mean + trans;
        if log_r != 0.0 {
            g.log_scale = g.log_scale.add_scalar(log_r);
        }
        g.rotation = q * g.rotation;
    }
    Ok(out)
}

/// Rigid edit about an anchor: `μ' = R(μ − μ₀) + μ₀ + t`.
pub fn transform_object(
    scene: &GaussianScene,
    anchor: &ObjectAnchor,
    rotation: &Matrix3<f64>,
    translation: &Vector3<f64>,
) -> Result<GaussianScene> {
    let err = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
    if err > ORTHONORMAL_TOL || rotation.determinant() <= 0.0 {
        return Err(Error::InvalidTransform(format!(
            "object edit needs a proper rotation (orthonormality error {err:.3e}, det {:.6})",
            rotation.determinant()
        )));
    }
    let q = rotation_to_quaternion(rotation);
    let mut out = scene.clone();
    for g in &mut out.gaussians {
        g.mean = rotation * (g.mean - anchor.center) + anchor.center + translation;
        g.rotation = q * g.rotation;
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Default)]
pub struct MergeOptions {
    /// Zero-pad the lower-degree scene's SH when degrees differ.
    pub pad_sh: bool,
    /// Keep the addition's joint labels instead of resetting them to 0.
    pub keep_labels: bool,
}

/// Transforms `addition` by `t` and appends it after `base`.
pub fn merge_scenes(
    base: &GaussianScene,
    addition: &GaussianScene,
    t: &SimilarityTransform,
    opts: MergeOptions,
) -> Result<GaussianScene> {
    let mut out = base.clone();
    if addition.is_empty() {
        return Ok(out);
    }
    let mut moved = transform_scene(addition, t)?;
    if moved.sh_degree() != out.sh_degree() {
        if !opts.pad_sh {
            return Err(Error::Merge(format!(
                "sh degree {} vs {} (enable padding to merge)",
                out.sh_degree(),
                moved.sh_degree()
            )));
        }
        let degree = out.sh_degree().max(moved.sh_degree());
        out.set_sh_degree(degree);
        moved.set_sh_degree(degree);
    }
    let base_labelled = base.labels_bound() || base.is_empty();
    for mut g in moved.gaussians {
        if !opts.keep_labels {
            g.joint_label = base_labelled.then_some(0);
        }
        out.gaussians.push(g);
    }
    Ok(out)
}
