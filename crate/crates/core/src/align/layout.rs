use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Mask;
use crate::render::{CameraModel, Intrinsics};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayoutConfig {
    /// Height of the downward-facing camera above the base joint, meters.
    pub bev_height: f64,
    pub alpha_threshold: f64,
    /// Largest |dx|, |dy| searched, pixels.
    pub max_shift: i64,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        Self {
            bev_height: 1.6,
            alpha_threshold: 0.5,
            max_shift: 10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayoutShift {
    pub dx: i64,
    pub dy: i64,
    pub iou: f64,
}

/// Downward-facing camera `cfg.bev_height` above `base`; image x follows
/// world +x.
pub fn bev_camera(base: Vector3<f64>, cfg: &LayoutConfig, intrinsics: Intrinsics) -> Result<CameraModel> {
    if !(cfg.bev_height > 0.0) {
        return Err(Error::Config("bev height must be positive".into()));
    }
    let eye = base + Vector3::new(0.0, 0.0, cfg.bev_height);
    CameraModel::look_at(intrinsics, eye, base, Vector3::y())
}

/// Integer shift `(dx, dy)` of `gs_mask` that best overlaps `sim_mask`.
///
/// Ties on IoU go to the smallest `dx² + dy²`, then the lexicographically
/// smallest `(dx, dy)`.
pub fn layout_shift(gs_mask: &Mask, sim_mask: &Mask, cfg: &LayoutConfig) -> Result<LayoutShift> {
    if gs_mask.width != sim_mask.width || gs_mask.height != sim_mask.height {
        return Err(Error::Alignment(format!(
            "mask sizes differ: {}x{} vs {}x{}",
            gs_mask.width, gs_mask.height, sim_mask.width, sim_mask.height
        )));
    }
    if gs_mask.count() == 0 || sim_mask.count() == 0 {
        return Err(Error::Alignment("empty mask".into()));
    }
    if cfg.max_shift < 0 {
        return Err(Error::Config("max_shift must be non-negative".into()));
    }
    let (w, h) = (gs_mask.width as i64, gs_mask.height as i64);
    let gs_points: Vec<(i64, i64)> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .filter(|&(x, y)| gs_mask.get(x as usize, y as usize))
        .collect();
    let sim_count = sim_mask.count() as u64;

    let m = cfg.max_shift;
    let shifts: Vec<(i64, i64)> = (-m..=m).flat_map(|dx| (-m..=m).map(move |dy| (dx, dy))).collect();
    // (dx, dy, intersection, union)
    let scored: Vec<(i64, i64, u64, u64)> = shifts
        .par_iter()
        .map(|&(dx, dy)| {
            let mut inside = 0u64;
            let mut inter = 0u64;
            for &(x, y) in &gs_points {
                let (sx, sy) = (x + dx, y + dy);
                if sx < 0 || sy < 0 || sx >= w || sy >= h {
                    continue;
                }
                inside += 1;
                if sim_mask.get(sx as usize, sy as usize) {
                    inter += 1;
                }
            }
            (dx, dy, inter, inside + sim_count - inter)
        })
        .collect();

    let better = |a: &(i64, i64, u64, u64), b: &(i64, i64, u64, u64)| -> bool {
        // IoU comparison without division: a.i/a.u vs b.i/b.u
        let lhs = a.2 as u128 * b.3 as u128;
        let rhs = b.2 as u128 * a.3 as u128;
        if lhs != rhs {
            return lhs > rhs;
        }
        let na = a.0 * a.0 + a.1 * a.1;
        let nb = b.0 * b.0 + b.1 * b.1;
        if na != nb {
            return na < nb;
        }
        (a.0, a.1) < (b.0, b.1)
    };
    let best = scored
        .iter()
        .copied()
        .reduce(|best, c| if better(&c, &best) { c } else { best })
        .expect("at least one shift");
    Ok(LayoutShift {
        dx: best.0,
        dy: best.1,
        iou: if best.3 == 0 { 0.0 } else { best.2 as f64 / best.3 as f64 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob(w: usize, h: usize, x0: usize, y0: usize, bw: usize, bh: usize) -> Mask {
        let mut m = Mask::new(w, h);
        for y in y0..y0 + bh {
            for x in x0..x0 + bw {
                m.set(x, y, true);
            }
        }
        m
    }

    #[test]
    fn identical_masks_need_no_shift() {
        let m = blob(40, 30, 10, 10, 8, 5);
        let s = layout_shift(&m, &m, &LayoutConfig::default()).unwrap();
        assert_eq!((s.dx, s.dy, s.iou), (0, 0, 1.0));
    }

    #[test]
    fn recovers_translation() {
        let gs = blob(40, 30, 10, 10, 8, 5);
        let sim = gs.shifted(3, -2);
        let s = layout_shift(&gs, &sim, &LayoutConfig::default()).unwrap();
        assert_eq!((s.dx, s.dy, s.iou), (3, -2, 1.0));
    }

    #[test]
    fn disjoint_masks_report_zero_iou_at_origin() {
        let gs = blob(60, 30, 0, 0, 3, 3);
        let sim = blob(60, 30, 50, 20, 3, 3);
        let cfg = LayoutConfig {
            max_shift: 5,
            ..Default::default()
        };
        let s = layout_shift(&gs, &sim, &cfg).unwrap();
        assert_eq!((s.dx, s.dy, s.iou), (0, 0, 0.0));
    }

    #[test]
    fn empty_mask_is_an_error() {
        let gs = Mask::new(10, 10);
        let sim = blob(10, 10, 1, 1, 2, 2);
        assert!(layout_shift(&gs, &sim, &LayoutConfig::default()).is_err());
    }

    #[test]
    fn bev_camera_looks_down() {
        let cam = bev_camera(Vector3::zeros(), &LayoutConfig::default(), Intrinsics::from_fov(64, 64, 60.0)).unwrap();
        assert!((cam.center().z - 1.6).abs() < 1e-12);
        let forward = cam.pose().linear().column(2).into_owned();
        assert!((forward - Vector3::new(0.0, 0.0, -1.0)).norm() < 1e-12);
    }
}
