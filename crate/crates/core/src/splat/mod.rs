//! Gaussian scenes and their on-disk formats.

mod labels;
mod ply;
pub mod sh;

use std::collections::BTreeMap;

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use labels::{load_labels, parse_labels, save_labels};
pub use ply::{load_splat_file, read_splat, save_splat_file, write_splat};

/// Default SH degree for newly created scenes.
pub const DEFAULT_SH_DEGREE: u8 = 3;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Named coordinate frame a scene is expressed in.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameId {
    #[default]
    Gs,
    Sim,
    World,
}

/// One 3D Gaussian.
///
/// `sh` is coefficient-major: `sh[3 * k + c]` is coefficient `k` of color
/// channel `c`, with `k` running over `(degree + 1)²` basis functions.
#[derive(Clone, Debug, PartialEq)]
pub struct Gaussian {
    pub mean: Vector3<f64>,
    pub rotation: UnitQuaternion<f64>,
    pub log_scale: Vector3<f64>,
    pub opacity_logit: f64,
    pub sh: Vec<f64>,
    /// Carried through file round trips, otherwise unused.
    pub normal: [f32; 3],
    pub joint_label: Option<u32>,
}

impl Gaussian {
    /// Degree-`degree` Gaussian with a constant color (higher bands zero).
    pub fn with_color(
        mean: Vector3<f64>,
        rotation: UnitQuaternion<f64>,
        log_scale: Vector3<f64>,
        opacity: f64,
        rgb: [f64; 3],
        degree: u8,
    ) -> Self {
        let mut sh = vec![0.0; 3 * sh::coeffs_per_channel(degree)];
        for c in 0..3 {
            sh[c] = sh::dc_from_color(rgb[c]);
        }
        Self {
            mean,
            rotation,
            log_scale,
            opacity_logit: logit(opacity),
            sh,
            normal: [0.0; 3],
            joint_label: None,
        }
    }

    /// Isotropic degree-0 Gaussian of standard deviation `sigma`.
    pub fn isotropic(mean: Vector3<f64>, sigma: f64, opacity: f64, rgb: [f64; 3]) -> Self {
        Self::with_color(
            mean,
            UnitQuaternion::identity(),
            Vector3::repeat(sigma.ln()),
            opacity,
            rgb,
            0,
        )
    }

    pub fn opacity(&self) -> f64 {
        sigmoid(self.opacity_logit)
    }

    pub fn scale(&self) -> Vector3<f64> {
        self.log_scale.map(f64::exp)
    }

    pub fn sh_degree(&self) -> u8 {
        sh::degree_for_coeffs(self.sh.len() / 3).expect("valid sh length")
    }

    /// `Σ = R(q) · diag(exp(2 s)) · R(q)ᵀ`.
    pub fn covariance(&self) -> Matrix3<f64> {
        covariance_of(self)
    }

    /// Raw SH color toward `view_dir` (unit vector from camera to Gaussian).
    pub fn color(&self, view_dir: &Vector3<f64>) -> [f64; 3] {
        eval_sh_color(self, view_dir)
    }

    /// Pads or truncates SH coefficients to `degree`.
    pub fn set_sh_degree(&mut self, degree: u8) {
        self.sh.resize(3 * sh::coeffs_per_channel(degree), 0.0);
    }
}

pub fn covariance_of(g: &Gaussian) -> Matrix3<f64> {
    let r = g.rotation.to_rotation_matrix().into_inner();
    let var = Matrix3::from_diagonal(&(g.log_scale * 2.0).map(f64::exp));
    let cov = r * var * r.transpose();
    // symmetrize away round-off
    (cov + cov.transpose()) * 0.5
}

pub fn eval_sh_color(g: &Gaussian, view_dir: &Vector3<f64>) -> [f64; 3] {
    sh::evaluate(&g.sh, view_dir)
}

/// Ordered collection of Gaussians sharing one SH degree.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianScene {
    pub gaussians: Vec<Gaussian>,
    sh_degree: u8,
    pub frame: FrameId,
}

impl GaussianScene {
    pub fn new(sh_degree: u8, frame: FrameId) -> Self {
        assert!(sh_degree <= 3, "sh degree must be 0..=3");
        Self {
            gaussians: Vec::new(),
            sh_degree,
            frame,
        }
    }

    pub fn from_gaussians(gaussians: Vec<Gaussian>, sh_degree: u8, frame: FrameId) -> Result<Self> {
        let mut scene = Self::new(sh_degree, frame);
        scene.gaussians.reserve(gaussians.len());
        for g in gaussians {
            scene.push(g)?;
        }
        Ok(scene)
    }

    pub fn sh_degree(&self) -> u8 {
        self.sh_degree
    }

    pub fn push(&mut self, g: Gaussian) -> Result<()> {
        let expected = 3 * sh::coeffs_per_channel(self.sh_degree);
        if g.sh.len() != expected {
            return Err(Error::Dimension(format!(
                "gaussian has {} sh coefficients, scene degree {} needs {expected}",
                g.sh.len(),
                self.sh_degree
            )));
        }
        self.gaussians.push(g);
        Ok(())
    }

    /// Changes the SH degree of every Gaussian, zero-padding or truncating.
    pub fn set_sh_degree(&mut self, degree: u8) {
        assert!(degree <= 3, "sh degree must be 0..=3");
        self.sh_degree = degree;
        for g in &mut self.gaussians {
            g.set_sh_degree(degree);
        }
    }

    pub fn len(&self) -> usize {
        self.gaussians.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaussians.is_empty()
    }

    /// True when every Gaussian carries a joint label.
    pub fn labels_bound(&self) -> bool {
        !self.gaussians.is_empty() && self.gaussians.iter().all(|g| g.joint_label.is_some())
    }

    /// Number of Gaussians per joint label (unlabelled Gaussians are skipped).
    pub fn label_histogram(&self) -> BTreeMap<u32, usize> {
        let mut hist = BTreeMap::new();
        for label in self.gaussians.iter().filter_map(|g| g.joint_label) {
            *hist.entry(label).or_insert(0) += 1;
        }
        hist
    }

    /// `Σ sigmoid(opacity_logit)`.
    pub fn total_opacity(&self) -> f64 {
        self.gaussians.iter().map(Gaussian::opacity).sum()
    }

    pub fn labels(&self) -> Vec<Option<u32>> {
        self.gaussians.iter().map(|g| g.joint_label).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    #[test]
    fn identity_covariance() {
        let g = Gaussian::isotropic(Vector3::zeros(), 1.0, 0.5, [0.5; 3]);
        assert_eq!(covariance_of(&g), Matrix3::identity());
    }

    #[test]
    fn log_scale_ln2_gives_four() {
        let mut g = Gaussian::isotropic(Vector3::zeros(), 1.0, 0.5, [0.5; 3]);
        g.log_scale = Vector3::new(LN_2, 0.0, 0.0);
        let cov = covariance_of(&g);
        let expected = Matrix3::from_diagonal(&Vector3::new(4.0, 1.0, 1.0));
        assert!((cov - expected).abs().max() < 1e-15);
    }

    #[test]
    fn degree_zero_color_is_isotropic() {
        let g = Gaussian::with_color(
            Vector3::zeros(),
            UnitQuaternion::identity(),
            Vector3::zeros(),
            0.5,
            [0.5, 0.5, 0.5],
            0,
        );
        for d in [Vector3::x(), Vector3::y(), -Vector3::z()] {
            assert_eq!(eval_sh_color(&g, &d), [0.5, 0.5, 0.5]);
        }
    }

    #[test]
    fn push_rejects_mismatched_degree() {
        let mut scene = GaussianScene::new(3, FrameId::Gs);
        let g = Gaussian::isotropic(Vector3::zeros(), 0.1, 0.5, [1.0, 0.0, 0.0]);
        assert!(scene.push(g).is_err());
    }

    #[test]
    fn histogram_counts_labels() {
        let mut scene = GaussianScene::new(0, FrameId::Gs);
        for label in [0, 1, 1, 2, 0, 1] {
            let mut g = Gaussian::isotropic(Vector3::zeros(), 0.1, 0.5, [1.0; 3]);
            g.joint_label = Some(label);
            scene.push(g).unwrap();
        }
        let hist = scene.label_histogram();
        assert_eq!(hist[&0], 2);
        assert_eq!(hist[&1], 3);
        assert_eq!(hist[&2], 1);
    }
}
