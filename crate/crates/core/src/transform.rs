//! Homogeneous 4×4 transforms that may carry a uniform scale.
//!
//! [`SimilarityTransform`] is the currency shared by kinematics, editing,
//! alignment and cameras. The linear block is expected to be `r·R` with `R` a
//! proper rotation and `r > 0`; [`SimilarityTransform::decompose`] checks that
//! and is the only place the assumption is enforced.

use std::fmt;
use std::path::Path;

use nalgebra::{Isometry3, Matrix3, Matrix4, Rotation3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance on the diagonal of `R·Rᵀ` for the uniform-scale check.
pub const UNIFORM_SCALE_TOL: f64 = 1e-6;

/// Tolerance for `‖R_normᵀ R_norm − I‖∞`.
pub const ORTHONORMAL_TOL: f64 = 1e-6;

/// Scale ratios within this distance of one are treated as exactly rigid.
pub const RIGID_RATIO_SNAP: f64 = 1e-12;

#[derive(Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    matrix: Matrix4<f64>,
}

/// Scale ratio and normalized rotation extracted from a similarity transform.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatioDecomposition {
    pub ratio: f64,
    pub rotation: Matrix3<f64>,
}

impl RatioDecomposition {
    pub fn quaternion(&self) -> UnitQuaternion<f64> {
        rotation_to_quaternion(&self.rotation)
    }
}

impl fmt::Debug for SimilarityTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SimilarityTransform")
            .field("rows", &self.to_row_major())
            .finish()
    }
}

impl Default for SimilarityTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        Self {
            matrix: Matrix4::identity(),
        }
    }

    /// Wraps a homogeneous matrix. The bottom row must be exactly `(0,0,0,1)`.
    pub fn from_matrix(matrix: Matrix4<f64>) -> Result<Self> {
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidTransform("non-finite entry".into()));
        }
        let bottom = [matrix[(3, 0)], matrix[(3, 1)], matrix[(3, 2)], matrix[(3, 3)]];
        if bottom != [0.0, 0.0, 0.0, 1.0] {
            return Err(Error::InvalidTransform(format!(
                "bottom row must be (0,0,0,1), got {bottom:?}"
            )));
        }
        Ok(Self { matrix })
    }

    pub fn from_row_major(values: &[f64]) -> Result<Self> {
        if values.len() != 16 {
            return Err(Error::InvalidTransform(format!(
                "expected 16 row-major values, got {}",
                values.len()
            )));
        }
        Self::from_matrix(Matrix4::from_row_slice(values))
    }

    pub fn from_linear_translation(linear: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        let mut matrix = Matrix4::identity();
        matrix.fixed_view_mut::<3, 3>(0, 0).copy_from(&linear);
        matrix.fixed_view_mut::<3, 1>(0, 3).copy_from(&translation);
        Self { matrix }
    }

    /// `r·R(q)` linear block with translation `t`.
    pub fn from_parts(ratio: f64, rotation: &UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self::from_linear_translation(rotation.to_rotation_matrix().into_inner() * ratio, translation)
    }

    pub fn from_isometry(iso: &Isometry3<f64>) -> Self {
        Self {
            matrix: iso.to_homogeneous(),
        }
    }

    pub fn translation(t: Vector3<f64>) -> Self {
        Self::from_linear_translation(Matrix3::identity(), t)
    }

    pub fn rotation(q: &UnitQuaternion<f64>) -> Self {
        Self::from_parts(1.0, q, Vector3::zeros())
    }

    /// Compact form `tx ty tz qw qx qy qz r`.
    pub fn from_compact(values: &[f64]) -> Result<Self> {
        if values.len() != 8 {
            return Err(Error::InvalidTransform(format!(
                "compact form needs 8 values, got {}",
                values.len()
            )));
        }
        let q = nalgebra::Quaternion::new(values[3], values[4], values[5], values[6]);
        if q.norm() == 0.0 || !q.norm().is_finite() {
            return Err(Error::InvalidTransform("zero or non-finite quaternion".into()));
        }
        let r = values[7];
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::InvalidTransform(format!("scale ratio must be positive, got {r}")));
        }
        Ok(Self::from_parts(
            r,
            &UnitQuaternion::from_quaternion(q),
            Vector3::new(values[0], values[1], values[2]),
        ))
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.matrix
    }

    pub fn linear(&self) -> Matrix3<f64> {
        self.matrix.fixed_view::<3, 3>(0, 0).into_owned()
    }

    pub fn translation_vector(&self) -> Vector3<f64> {
        self.matrix.fixed_view::<3, 1>(0, 3).into_owned()
    }

    pub fn to_row_major(&self) -> [f64; 16] {
        let mut out = [0.0; 16];
        for r in 0..4 {
            for c in 0..4 {
                out[r * 4 + c] = self.matrix[(r, c)];
            }
        }
        out
    }

    /// `self · other`: applies `other` first.
    pub fn compose(&self, other: &SimilarityTransform) -> SimilarityTransform {
        let mut matrix = self.matrix * other.matrix;
        // keep the homogeneous row exact
        matrix[(3, 0)] = 0.0;
        matrix[(3, 1)] = 0.0;
        matrix[(3, 2)] = 0.0;
        matrix[(3, 3)] = 1.0;
        SimilarityTransform { matrix }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.linear() * p + self.translation_vector()
    }

    /// Inverse assuming a similarity linear block: `(r R)⁻¹ = Rᵀ / r`.
    pub fn inverse(&self) -> Result<SimilarityTransform> {
        let dec = self.decompose()?;
        let inv_linear = dec.rotation.transpose() / dec.ratio;
        let t = -(inv_linear * self.translation_vector());
        Ok(Self::from_linear_translation(inv_linear, t))
    }

    /// Inverse for a transform already known to be rigid or a similarity.
    /// Falls back to a general 4×4 inverse.
    pub fn inverse_general(&self) -> Result<SimilarityTransform> {
        match self.inverse() {
            Ok(inv) => Ok(inv),
            Err(_) => {
                let inv = self
                    .matrix
                    .try_inverse()
                    .ok_or_else(|| Error::InvalidTransform("singular matrix".into()))?;
                Self::from_matrix(inv)
            }
        }
    }

    /// Extracts the scale ratio `r = sqrt((R Rᵀ)₀₀)` and `R_norm = R / r`,
    /// verifying uniform scale, orthonormality and positive orientation.
    pub fn decompose(&self) -> Result<RatioDecomposition> {
        let linear = self.linear();
        let gram = linear * linear.transpose();
        let r_sq = gram[(0, 0)];
        if !(r_sq > 0.0) {
            return Err(Error::InvalidTransform(format!(
                "scale ratio must be positive, (R Rᵀ)₀₀ = {r_sq}"
            )));
        }
        for i in 1..3 {
            let rel = (gram[(i, i)] - r_sq).abs() / r_sq;
            if rel > UNIFORM_SCALE_TOL {
                return Err(Error::Decomposition(format!(
                    "non-uniform scale: (R Rᵀ) diagonal {:?}",
                    [gram[(0, 0)], gram[(1, 1)], gram[(2, 2)]]
                )));
            }
        }
        let mut ratio = r_sq.sqrt();
        if (ratio - 1.0).abs() <= RIGID_RATIO_SNAP {
            ratio = 1.0;
        }
        let rotation = linear / ratio;
        if rotation.determinant() <= 0.0 {
            return Err(Error::InvalidTransform("reflection (det < 0)".into()));
        }
        let err = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        if err > ORTHONORMAL_TOL {
            return Err(Error::Decomposition(format!(
                "normalized linear block is not orthonormal (error {err:.3e})"
            )));
        }
        Ok(RatioDecomposition { ratio, rotation })
    }

    pub fn is_rigid(&self, tol: f64) -> bool {
        let linear = self.linear();
        let err = (linear.transpose() * linear - Matrix3::identity()).abs().max();
        err <= tol && linear.determinant() > 0.0
    }

    /// Converts a rigid transform to an isometry; the rotation is projected
    /// onto SO(3) through a quaternion.
    pub fn to_isometry(&self) -> Result<Isometry3<f64>> {
        let dec = self.decompose()?;
        if (dec.ratio - 1.0).abs() > UNIFORM_SCALE_TOL {
            return Err(Error::InvalidTransform(format!(
                "expected a rigid transform, scale ratio is {}",
                dec.ratio
            )));
        }
        Ok(Isometry3::from_parts(
            Translation3::from(self.translation_vector()),
            dec.quaternion(),
        ))
    }

    /// Reads a transform file: either 16 numbers (row-major 4×4) or the
    /// compact 8-number form. Whitespace/comma separated; `#` starts a comment.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_text(&text, &path.display().to_string())
    }

    pub fn parse_text(text: &str, source_name: &str) -> Result<Self> {
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let content = line.split('#').next().unwrap_or("");
            for tok in content.split(|c: char| c.is_whitespace() || c == ',') {
                if tok.is_empty() {
                    continue;
                }
                let v: f64 = tok.parse().map_err(|_| {
                    Error::parse(source_name, lineno + 1, format!("not a number: {tok:?}"))
                })?;
                values.push(v);
            }
        }
        match values.len() {
            16 => Self::from_row_major(&values),
            8 => Self::from_compact(&values),
            n => Err(Error::parse(
                source_name,
                0,
                format!("expected 16 (matrix) or 8 (compact) values, found {n}"),
            )),
        }
    }

    pub fn to_text(&self) -> String {
        let rows = self.to_row_major();
        rows.chunks(4)
            .map(|r| format!("{:?} {:?} {:?} {:?}", r[0], r[1], r[2], r[3]))
            .collect::<Vec<_>>()
            .join("\n")
            + "\n"
    }
}

/// Nearest unit quaternion for an (approximately) orthonormal matrix.
pub fn rotation_to_quaternion(m: &Matrix3<f64>) -> UnitQuaternion<f64> {
    let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*m));
    UnitQuaternion::new_normalize(q.into_inner())
}

/// Rotation angle (radians) between two rotation matrices.
pub fn rotation_angle_between(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let rel = a.transpose() * b;
    let cos = ((rel.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    // acos is ill-conditioned near zero; use the skew part there
    let skew = Vector3::new(
        rel[(2, 1)] - rel[(1, 2)],
        rel[(0, 2)] - rel[(2, 0)],
        rel[(1, 0)] - rel[(0, 1)],
    );
    let sin = 0.5 * skew.norm();
    sin.atan2(cos)
}

/// JSON shape for transforms: a 16-element row-major array or the compact
/// 8-element `[tx,ty,tz,qw,qx,qy,qz,r]` array.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TransformRecord(pub Vec<f64>);

impl TransformRecord {
    pub fn to_transform(&self) -> Result<SimilarityTransform> {
        match self.0.len() {
            16 => SimilarityTransform::from_row_major(&self.0),
            8 => SimilarityTransform::from_compact(&self.0),
            n => Err(Error::InvalidTransform(format!(
                "transform record needs 16 or 8 values, got {n}"
            ))),
        }
    }
}

impl From<&SimilarityTransform> for TransformRecord {
    fn from(t: &SimilarityTransform) -> Self {
        TransformRecord(t.to_row_major().to_vec())
    }
}

impl Serialize for SimilarityTransform {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_row_major().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SimilarityTransform {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rec = TransformRecord::deserialize(d)?;
        rec.to_transform().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn identity_decomposes_to_unit_ratio() {
        let dec = SimilarityTransform::identity().decompose().unwrap();
        assert_eq!(dec.ratio, 1.0);
        assert_eq!(dec.rotation, Matrix3::identity());
    }

    #[test]
    fn bottom_row_must_be_exact() {
        let mut m = Matrix4::identity();
        m[(3, 0)] = 1e-300;
        assert!(SimilarityTransform::from_matrix(m).is_err());
    }

    #[test]
    fn rejects_reflection() {
        let m = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        let t = SimilarityTransform::from_linear_translation(m, Vector3::zeros());
        assert!(matches!(t.decompose(), Err(Error::InvalidTransform(_))));
    }

    #[test]
    fn rejects_non_uniform_scale() {
        let m = Matrix3::from_diagonal(&Vector3::new(1.0, 2.0, 1.0));
        let t = SimilarityTransform::from_linear_translation(m, Vector3::zeros());
        assert!(matches!(t.decompose(), Err(Error::Decomposition(_))));
    }

    #[test]
    fn inverse_of_scaled_rotation() {
        let q = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), FRAC_PI_2);
        let t = SimilarityTransform::from_parts(3.0, &q, Vector3::new(1.0, -2.0, 0.5));
        let id = t.compose(&t.inverse().unwrap());
        assert!((id.matrix() - Matrix4::identity()).abs().max() < 1e-12);
    }

    #[test]
    fn text_forms_parse() {
        let t = SimilarityTransform::parse_text("1 2 3 1 0 0 0 2 # compact", "inline").unwrap();
        assert_eq!(t.translation_vector(), Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(t.linear(), Matrix3::identity() * 2.0);
        let back = SimilarityTransform::parse_text(&t.to_text(), "inline").unwrap();
        assert_eq!(back, t);
        assert!(SimilarityTransform::parse_text("1 2 3", "inline").is_err());
    }

    #[test]
    fn angle_between_small_rotations_is_accurate() {
        let a = Matrix3::identity();
        let b = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), 1e-7)
            .to_rotation_matrix()
            .into_inner();
        assert!((rotation_angle_between(&a, &b) - 1e-7).abs() < 1e-15);
    }
}
