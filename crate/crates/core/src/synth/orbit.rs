use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::render::{CameraModel, Intrinsics};

/// Circular camera orbit around `center`; `+z` is up.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitSpec {
    pub center: [f64; 3],
    pub radius: f64,
    pub elevation_deg: f64,
    pub count: usize,
    #[serde(default)]
    pub azimuth_offset_deg: f64,
    pub width: usize,
    pub height: usize,
    pub hfov_deg: f64,
}

/// Camera `k` sits at `c + ρ(cos e·cos φₖ, cos e·sin φₖ, sin e)` with
/// `φₖ = offset + 2πk/count`, looking at `c`.
pub fn novel_view_sweep(orbit: &OrbitSpec) -> Result<Vec<CameraModel>> {
    if !(orbit.radius > 1e-9) || !orbit.radius.is_finite() {
        return Err(Error::Config(format!("orbit radius {} is degenerate", orbit.radius)));
    }
    if orbit.count == 0 {
        return Err(Error::Config("orbit needs at least one camera".into()));
    }
    if !(orbit.hfov_deg > 0.0 && orbit.hfov_deg < 180.0) {
        return Err(Error::Config(format!("orbit fov {} out of range", orbit.hfov_deg)));
    }
    let k = Intrinsics::from_fov(orbit.width, orbit.height, orbit.hfov_deg);
    let c = Vector3::from(orbit.center);
    let e = orbit.elevation_deg.to_radians();
    (0..orbit.count)
        .map(|i| {
            let phi = orbit.azimuth_offset_deg.to_radians() + std::f64::consts::TAU * i as f64 / orbit.count as f64;
            let eye = c + orbit.radius * Vector3::new(e.cos() * phi.cos(), e.cos() * phi.sin(), e.sin());
            CameraModel::look_at(k, eye, c, Vector3::z())
        })
        .collect()
}
