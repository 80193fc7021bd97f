use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transform::SimilarityTransform;

/// Pinhole intrinsics in pixels. Pixel `(x, y)` has its center at
/// `(x + 0.5, y + 0.5)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Intrinsics {
    /// Centered principal point with the given horizontal field of view.
    pub fn from_fov(width: usize, height: usize, hfov_deg: f64) -> Self {
        let fx = 0.5 * width as f64 / (0.5 * hfov_deg.to_radians()).tan();
        Self {
            fx,
            fy: fx,
            cx: 0.5 * width as f64,
            cy: 0.5 * height as f64,
            width,
            height,
        }
    }
}

/// Pinhole camera; `pose` maps camera coordinates (x right, y down,
/// z forward) to world coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraModel {
    pub intrinsics: Intrinsics,
    pose: SimilarityTransform,
}

/// JSON camera record: `{fx, fy, cx, cy, width, height, pose}` with `pose`
/// a row-major 4×4 world-from-camera matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraRecord {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub pose: Vec<f64>,
}

impl CameraModel {
    pub fn new(intrinsics: Intrinsics, pose: SimilarityTransform) -> Result<Self> {
        let Intrinsics {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        } = intrinsics;
        if !(fx > 0.0 && fy > 0.0) {
            return Err(Error::Config(format!("focal lengths must be positive ({fx}, {fy})")));
        }
        if width == 0 || height == 0 {
            return Err(Error::Config("image size must be nonzero".into()));
        }
        if !(cx > 0.0 && cx < width as f64 && cy > 0.0 && cy < height as f64) {
            return Err(Error::Config(format!(
                "principal point ({cx}, {cy}) outside {width}x{height} image"
            )));
        }
        if !pose.is_rigid(1e-6) {
            return Err(Error::InvalidTransform("camera pose must be rigid".into()));
        }
        Ok(Self { intrinsics, pose })
    }

    /// Camera at `eye` looking at `target`; `up` fixes the roll (image y
    /// points away from it). Falls back to another up axis when parallel.
    pub fn look_at(
        intrinsics: Intrinsics,
        eye: Vector3<f64>,
        target: Vector3<f64>,
        up: Vector3<f64>,
    ) -> Result<Self> {
        Self::new(intrinsics, look_at_pose(eye, target, up)?)
    }

    pub fn pose(&self) -> &SimilarityTransform {
        &self.pose
    }

    pub fn with_pose(&self, pose: SimilarityTransform) -> Result<Self> {
        Self::new(self.intrinsics, pose)
    }

    pub fn width(&self) -> usize {
        self.intrinsics.width
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height
    }

    pub fn center(&self) -> Vector3<f64> {
        self.pose.translation_vector()
    }

    /// World-to-camera rotation and translation.
    pub fn world_to_camera(&self) -> (Matrix3<f64>, Vector3<f64>) {
        let r = self.pose.linear().transpose();
        let t = -(r * self.pose.translation_vector());
        (r, t)
    }

    /// Camera for an image downsampled by `2^level` (box filter alignment).
    pub fn downscaled(&self, level: u32) -> Result<Self> {
        let s = 0.5f64.powi(level as i32);
        let k = self.intrinsics;
        let div = 1usize << level;
        Self::new(
            Intrinsics {
                fx: k.fx * s,
                fy: k.fy * s,
                cx: k.cx * s,
                cy: k.cy * s,
                width: k.width / div,
                height: k.height / div,
            },
            self.pose,
        )
    }

    pub fn to_record(&self) -> CameraRecord {
        let k = self.intrinsics;
        CameraRecord {
            fx: k.fx,
            fy: k.fy,
            cx: k.cx,
            cy: k.cy,
            width: k.width,
            height: k.height,
            pose: self.pose.to_row_major().to_vec(),
        }
    }

    pub fn from_record(rec: &CameraRecord) -> Result<Self> {
        Self::new(
            Intrinsics {
                fx: rec.fx,
                fy: rec.fy,
                cx: rec.cx,
                cy: rec.cy,
                width: rec.width,
                height: rec.height,
            },
            SimilarityTransform::from_row_major(&rec.pose)?,
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let rec: CameraRecord = serde_json::from_str(&text)
            .map_err(|e| Error::parse(path.display().to_string(), e.line(), e.to_string()))?;
        Self::from_record(&rec)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_record())?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

pub fn look_at_pose(eye: Vector3<f64>, target: Vector3<f64>, up: Vector3<f64>) -> Result<SimilarityTransform> {
    let forward = target - eye;
    if !(forward.norm() > 0.0) {
        return Err(Error::Config("look-at target coincides with eye".into()));
    }
    let forward = forward.normalize();
    let mut right = forward.cross(&up);
    if right.norm() < 1e-9 {
        let alt = if forward.y.abs() < 0.9 { Vector3::y() } else { Vector3::x() };
        right = forward.cross(&alt);
    }
    let right = right.normalize();
    let down = forward.cross(&right);
    let r = Matrix3::from_columns(&[right, down, forward]);
    Ok(SimilarityTransform::from_linear_translation(r, eye))
}
