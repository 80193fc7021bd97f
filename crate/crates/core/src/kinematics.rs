//! Serial-chain forward kinematics and kinematic drive of labelled Gaussians.
//!
//! Each joint contributes the link matrix
//!
//! ```text
//! ⎡cos θ  −sin θ cos β   sin θ sin β   a cos θ⎤
//! ⎢sin θ   cos θ cos β  −cos θ sin β   a sin θ⎥
//! ⎢  0       sin β          cos β         d   ⎥
//! ⎣  0         0              0           1   ⎦
//! ```
//!
//! with `θ = theta_offset + angle`. Cumulative products from the base give
//! the pose of every joint frame. Gaussians labelled `k ≥ 1` ride on frame
//! `k`; label 0 is the static background.
//!
//! Chain files are plain text, one joint per row, base to tip:
//!
//! ```text
//! # beta  a  d  theta_offset  [theta_min theta_max]
//! 1.5707963 0 0.089159 0 -6.28 6.28
//! ```
//!
//! Limits, when given, bound the commanded joint angle (not `θ` itself).

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::splat::GaussianScene;
use crate::transform::{rotation_to_quaternion, SimilarityTransform};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointLimits {
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdhJoint {
    /// Twist about x, radians.
    pub beta: f64,
    /// Link length, meters.
    pub a: f64,
    /// Link offset, meters.
    pub d: f64,
    pub theta_offset: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limits: Option<JointLimits>,
}

impl MdhJoint {
    pub fn new(beta: f64, a: f64, d: f64, theta_offset: f64) -> Result<Self> {
        let joint = Self {
            beta,
            a,
            d,
            theta_offset,
            limits: None,
        };
        joint.validate()?;
        Ok(joint)
    }

    pub fn with_limits(mut self, min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && min <= max) {
            return Err(Error::Config(format!("invalid joint limits [{min}, {max}]")));
        }
        self.limits = Some(JointLimits { min, max });
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let vals = [self.beta, self.a, self.d, self.theta_offset];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!("non-finite joint parameter in {vals:?}")));
        }
        if self.beta.abs() > PI {
            return Err(Error::Config(format!("|beta| = {} exceeds π", self.beta.abs())));
        }
        Ok(())
    }
}

/// Joint-space configuration; the variable part of each joint angle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointState(pub Vec<f64>);

impl JointState {
    pub fn zeros(n: usize) -> Self {
        JointState(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn angles(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for JointState {
    fn from(v: Vec<f64>) -> Self {
        JointState(v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitViolation {
    pub joint: usize,
    pub angle: f64,
    pub min: f64,
    pub max: f64,
}

/// Ordered joints from base to end effector, with an optional base pose that
/// places the chain's base frame in the scene.
#[derive(Clone, Debug, PartialEq)]
pub struct MdhChain {
    joints: Vec<MdhJoint>,
    base: SimilarityTransform,
}

impl MdhChain {
    pub fn new(joints: Vec<MdhJoint>) -> Result<Self> {
        if joints.is_empty() {
            return Err(Error::Config("kinematic chain needs at least one joint".into()));
        }
        for j in &joints {
            j.validate()?;
        }
        Ok(Self {
            joints,
            base: SimilarityTransform::identity(),
        })
    }

    pub fn with_base(mut self, base: SimilarityTransform) -> Result<Self> {
        if !base.is_rigid(1e-9) {
            return Err(Error::InvalidTransform("chain base pose must be rigid".into()));
        }
        self.base = base;
        Ok(self)
    }

    pub fn joints(&self) -> &[MdhJoint] {
        &self.joints
    }

    pub fn joint_count(&self) -> usize {
        self.joints.len()
    }

    pub fn base(&self) -> &SimilarityTransform {
        &self.base
    }

    pub fn zero_state(&self) -> JointState {
        JointState::zeros(self.joints.len())
    }

    pub fn check_state(&self, state: &JointState) -> Result<()> {
        if state.len() != self.joints.len() {
            return Err(Error::Dimension(format!(
                "joint state has {} entries, chain has {} joints",
                state.len(),
                self.joints.len()
            )));
        }
        if let Some(i) = state.0.iter().position(|v| !v.is_finite()) {
            return Err(Error::Dimension(format!("joint {i} angle is not finite")));
        }
        Ok(())
    }

    /// Configured limits that `state` violates. Nothing is clamped.
    pub fn limit_violations(&self, state: &JointState) -> Vec<LimitViolation> {
        self.joints
            .iter()
            .zip(&state.0)
            .enumerate()
            .filter_map(|(i, (j, &angle))| {
                let lim = j.limits?;
                (angle < lim.min || angle > lim.max).then_some(LimitViolation {
                    joint: i,
                    angle,
                    min: lim.min,
                    max: lim.max,
                })
            })
            .collect()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut joints = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let vals = content
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::parse(source_name, i + 1, e.to_string()))?;
            let joint = match vals.len() {
                4 | 6 => MdhJoint::new(vals[0], vals[1], vals[2], vals[3])
                    .map_err(|e| Error::parse(source_name, i + 1, e.to_string()))?,
                n => {
                    return Err(Error::parse(
                        source_name,
                        i + 1,
                        format!("expected 4 or 6 columns, found {n}"),
                    ))
                }
            };
            let joint = if vals.len() == 6 {
                joint
                    .with_limits(vals[4], vals[5])
                    .map_err(|e| Error::parse(source_name, i + 1, e.to_string()))?
            } else {
                joint
            };
            joints.push(joint);
        }
        Self::new(joints)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# beta a d theta_offset [theta_min theta_max]\n");
        for j in &self.joints {
            out.push_str(&format!("{:?} {:?} {:?} {:?}", j.beta, j.a, j.d, j.theta_offset));
            if let Some(l) = j.limits {
                out.push_str(&format!(" {:?} {:?}", l.min, l.max));
            }
            out.push('\n');
        }
        out
    }
}

/// Link matrix for one joint at the given variable angle.
pub fn link_transform(joint: &MdhJoint, angle: f64) -> SimilarityTransform {
    let theta = joint.theta_offset + angle;
    let (st, ct) = theta.sin_cos();
    let (sb, cb) = joint.beta.sin_cos();
    #[rustfmt::skip]
    let m = Matrix4::new(
        ct, -st * cb,  st * sb, joint.a * ct,
        st,  ct * cb, -ct * sb, joint.a * st,
        0.0,      sb,       cb, joint.d,
        0.0,     0.0,      0.0, 1.0,
    );
    SimilarityTransform::from_matrix(m).expect("finite link matrix")
}

/// Cumulative transforms `base·T₁, base·T₁T₂, …`; the last is the end effector.
pub fn forward_kinematics(chain: &MdhChain, state: &JointState) -> Result<Vec<SimilarityTransform>> {
    chain.check_state(state)?;
    let mut acc = chain.base;
    Ok(chain
        .joints
        .iter()
        .zip(&state.0)
        .map(|(joint, &angle)| {
            acc = acc.compose(&link_transform(joint, angle));
            acc
        })
        .collect())
}

/// Attaches sidecar labels to a scene. Label 0 is static, `1..=J` follow
/// joint frames.
pub fn bind_labels(scene: &GaussianScene, labels: &[u32], joint_count: usize) -> Result<GaussianScene> {
    if labels.len() != scene.len() {
        return Err(Error::Binding(format!(
            "{} labels for {} gaussians",
            labels.len(),
            scene.len()
        )));
    }
    if let Some((i, l)) = labels.iter().enumerate().find(|(_, &l)| l as usize > joint_count) {
        return Err(Error::Binding(format!(
            "label {l} at gaussian {i} exceeds joint count {joint_count}"
        )));
    }
    let mut out = scene.clone();
    for (g, &l) in out.gaussians.iter_mut().zip(labels) {
        g.joint_label = Some(l);
    }
    Ok(out)
}

/// Per-joint rigid motions `FK_k(target) · FK_k(canonical)⁻¹`.
pub fn joint_motions(
    chain: &MdhChain,
    canonical: &JointState,
    target: &JointState,
) -> Result<Vec<SimilarityTransform>> {
    let from = forward_kinematics(chain, canonical)?;
    let to = forward_kinematics(chain, target)?;
    from.iter()
        .zip(&to)
        .map(|(c, t)| Ok(t.compose(&c.inverse()?)))
        .collect()
}

/// Moves every labelled Gaussian rigidly with its joint frame from the
/// canonical (labelled) pose to `target`.
pub fn drive_scene(
    scene: &GaussianScene,
    chain: &MdhChain,
    canonical: &JointState,
    target: &JointState,
) -> Result<GaussianScene> {
    if !scene.is_empty() && !scene.labels_bound() {
        return Err(Error::UnboundLabels);
    }
    let motions = joint_motions(chain, canonical, target)?;
    let parts: Vec<(Matrix3<f64>, Vector3<f64>, nalgebra::UnitQuaternion<f64>)> = motions
        .iter()
        .map(|m| {
            let r = m.linear();
            (r, m.translation_vector(), rotation_to_quaternion(&r))
        })
        .collect();

    let mut out = scene.clone();
    for g in &mut out.gaussians {
        let label = g.joint_label.unwrap_or(0) as usize;
        if label == 0 {
            continue;
        }
        let (r, t, q) = parts.get(label - 1).ok_or_else(|| {
            Error::Binding(format!("label {label} exceeds joint count {}", parts.len()))
        })?;
        g.mean = r * g.mean + t;
        g.rotation = q * g.rotation;
    }
    Ok(out)
}

/// Heuristic label generator: assigns each Gaussian to the nearest link
/// segment at the canonical pose, or 0 when farther than `max_distance` from
/// every link. Link `k` spans frame `k` to frame `k+1` (the last link is the
/// end-effector origin). Not a segmentation method, only a convenience for
/// synthetic or hand-authored scenes.
pub fn nearest_link_labels(
    scene: &GaussianScene,
    chain: &MdhChain,
    canonical: &JointState,
    max_distance: f64,
) -> Result<Vec<u32>> {
    let frames = forward_kinematics(chain, canonical)?;
    let origins: Vec<Vector3<f64>> = frames.iter().map(|f| f.translation_vector()).collect();
    let segments: Vec<(Vector3<f64>, Vector3<f64>)> = (0..origins.len())
        .map(|k| (origins[k], *origins.get(k + 1).unwrap_or(&origins[k])))
        .collect();
    Ok(scene
        .gaussians
        .iter()
        .map(|g| {
            let mut best = (f64::INFINITY, 0u32);
            for (k, (a, b)) in segments.iter().enumerate() {
                let d = point_segment_distance(&g.mean, a, b);
                if d < best.0 {
                    best = (d, k as u32 + 1);
                }
            }
            if best.0 <= max_distance {
                best.1
            } else {
                0
            }
        })
        .collect())
}

fn point_segment_distance(p: &Vector3<f64>, a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 {
        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p - (a + ab * t)).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::splat::{FrameId, Gaussian};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn z_joint() -> MdhJoint {
        MdhJoint::new(0.0, 0.0, 0.0, 0.0).unwrap()
    }

    #[test]
    fn zero_parameters_give_identity() {
        let t = link_transform(&z_joint(), 0.0);
        assert_eq!(*t.matrix(), Matrix4::identity());
    }

    #[test]
    fn quarter_turn_about_z() {
        let t = link_transform(&z_joint(), FRAC_PI_2);
        let m = t.matrix();
        assert!((m[(0, 0)]).abs() < 1e-12);
        assert!((m[(1, 0)] - 1.0).abs() < 1e-12);
        assert_eq!(m[(2, 0)], 0.0);
        assert_eq!(m[(3, 0)], 0.0);
        assert!(t.translation_vector().norm() < 1e-12);
    }

    #[test]
    fn link_length_and_offset() {
        let j = MdhJoint::new(0.0, 1.0, 2.0, 0.0).unwrap();
        let t = link_transform(&j, 0.0);
        assert_eq!(t.linear(), Matrix3::identity());
        assert_eq!(t.translation_vector(), Vector3::new(1.0, 0.0, 2.0));
    }

    #[test]
    fn two_45_degree_turns_make_90() {
        let chain = MdhChain::new(vec![z_joint(), z_joint()]).unwrap();
        let fk = forward_kinematics(&chain, &JointState(vec![FRAC_PI_4, FRAC_PI_4])).unwrap();
        let expected = link_transform(&z_joint(), FRAC_PI_2);
        assert!((fk[1].matrix() - expected.matrix()).abs().max() < 1e-12);
    }

    #[test]
    fn length_mismatch_is_dimension_error() {
        let chain = MdhChain::new(vec![z_joint()]).unwrap();
        assert!(matches!(
            forward_kinematics(&chain, &JointState(vec![0.0, 0.0])),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn beta_beyond_pi_is_rejected() {
        assert!(MdhJoint::new(3.5, 0.0, 0.0, 0.0).is_err());
    }

    fn labelled_scene(labels: &[u32]) -> GaussianScene {
        let mut s = GaussianScene::new(0, FrameId::Gs);
        for (i, _) in labels.iter().enumerate() {
            s.push(Gaussian::isotropic(Vector3::new(1.0, i as f64, 0.0), 0.05, 0.8, [1.0, 0.0, 0.0]))
                .unwrap();
        }
        bind_labels(&s, labels, 1).unwrap()
    }

    #[test]
    fn half_turn_moves_point_to_opposite_side() {
        let chain = MdhChain::new(vec![z_joint()]).unwrap();
        let scene = labelled_scene(&[1]);
        let out = drive_scene(&scene, &chain, &chain.zero_state(), &JointState(vec![PI])).unwrap();
        assert!((out.gaussians[0].mean - Vector3::new(-1.0, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn label_zero_is_static() {
        let chain = MdhChain::new(vec![z_joint()]).unwrap();
        let scene = labelled_scene(&[0, 0]);
        let out = drive_scene(&scene, &chain, &chain.zero_state(), &JointState(vec![1.0])).unwrap();
        assert_eq!(out, scene);
    }

    #[test]
    fn binding_rejects_out_of_range() {
        let mut s = GaussianScene::new(0, FrameId::Gs);
        s.push(Gaussian::isotropic(Vector3::zeros(), 0.1, 0.5, [1.0; 3])).unwrap();
        assert!(matches!(bind_labels(&s, &[2], 1), Err(Error::Binding(_))));
        assert!(matches!(bind_labels(&s, &[0, 0], 1), Err(Error::Binding(_))));
    }

    #[test]
    fn unbound_scene_cannot_be_driven() {
        let chain = MdhChain::new(vec![z_joint()]).unwrap();
        let mut s = GaussianScene::new(0, FrameId::Gs);
        s.push(Gaussian::isotropic(Vector3::zeros(), 0.1, 0.5, [1.0; 3])).unwrap();
        let err = drive_scene(&s, &chain, &chain.zero_state(), &chain.zero_state()).unwrap_err();
        assert!(err.to_string().contains("bind_labels"));
    }

    #[test]
    fn chain_file_round_trip() {
        let text = "# ur-like\n1.5707963267948966 0 0.089159 0 -3 3\n0 -0.425 0 0\n";
        let chain = MdhChain::parse(text, "arm.chain").unwrap();
        assert_eq!(chain.joint_count(), 2);
        assert_eq!(chain.joints()[0].limits, Some(JointLimits { min: -3.0, max: 3.0 }));
        let again = MdhChain::parse(&chain.to_text(), "again").unwrap();
        assert_eq!(again, chain);
        assert!(MdhChain::parse("1 2 3\n", "bad").is_err());
    }

    #[test]
    fn limits_are_reported_not_clamped() {
        let j = z_joint().with_limits(-1.0, 1.0).unwrap();
        let chain = MdhChain::new(vec![j, z_joint()]).unwrap();
        let v = chain.limit_violations(&JointState(vec![1.5, 10.0]));
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].joint, 0);
    }

    #[test]
    fn nearest_link_assigns_segments() {
        let chain = MdhChain::new(vec![
            MdhJoint::new(0.0, 1.0, 0.0, 0.0).unwrap(),
            MdhJoint::new(0.0, 1.0, 0.0, 0.0).unwrap(),
        ])
        .unwrap();
        let mut s = GaussianScene::new(0, FrameId::Gs);
        for x in [1.5, 2.0, 5.0] {
            s.push(Gaussian::isotropic(Vector3::new(x, 0.0, 0.0), 0.01, 0.5, [1.0; 3])).unwrap();
        }
        let labels = nearest_link_labels(&s, &chain, &chain.zero_state(), 0.1).unwrap();
        assert_eq!(labels, vec![1, 1, 0]);
    }
}
