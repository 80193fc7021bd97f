use nalgebra::{Matrix6, UnitQuaternion, Vector3, Vector6};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::RgbImage;
use crate::render::{render_with, CameraModel, RenderOptions};
use crate::splat::GaussianScene;
use crate::transform::SimilarityTransform;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizeConfig {
    /// Outer iterations shared across all pyramid levels.
    pub budget: usize,
    pub levels: u32,
    pub rot_step_deg: f64,
    pub trans_step: f64,
    pub min_rot_step_deg: f64,
    pub min_trans_step: f64,
    /// Residual at or below which the search stops immediately.
    pub tolerance: f64,
    pub seed: u64,
    pub background: [f64; 3],
}

impl Default for LocalizeConfig {
    fn default() -> Self {
        Self {
            budget: 200,
            levels: 3,
            rot_step_deg: 0.5,
            trans_step: 0.005,
            min_rot_step_deg: 0.002,
            min_trans_step: 2e-5,
            tolerance: 1e-9,
            seed: 0,
            background: [0.0; 3],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizeResult {
    pub pose: SimilarityTransform,
    /// Mean absolute error at full resolution.
    pub residual: f64,
    pub initial_residual: f64,
    pub converged: bool,
    pub iterations: usize,
    /// `(level, residual)` after every accepted step; non-increasing per level.
    pub history: Vec<(u32, f64)>,
}

/// Right perturbation `pose · Exp(ξ)`, `ξ = (ω, v)`.
fn perturb(pose: &SimilarityTransform, xi: &Vector6<f64>) -> SimilarityTransform {
    let q = UnitQuaternion::from_scaled_axis(Vector3::new(xi[0], xi[1], xi[2]));
    let delta = SimilarityTransform::from_parts(1.0, &q, Vector3::new(xi[3], xi[4], xi[5]));
    pose.compose(&delta)
}

struct Level<'a> {
    scene: &'a GaussianScene,
    camera: CameraModel,
    observed: RgbImage,
    opts: RenderOptions,
}

impl Level<'_> {
    fn render(&self, pose: &SimilarityTransform) -> Result<RgbImage> {
        let cam = self.camera.with_pose(*pose)?;
        Ok(render_with(self.scene, &cam, &self.opts).rgb)
    }

    fn residual(&self, pose: &SimilarityTransform) -> Result<f64> {
        let img = self.render(pose)?;
        let r = mean_abs_diff(&img, &self.observed);
        if r.is_finite() {
            Ok(r)
        } else {
            Err(Error::NonFiniteResidual)
        }
    }
}

fn mean_abs_diff(a: &RgbImage, b: &RgbImage) -> f64 {
    let sum: f64 = a.data.iter().zip(&b.data).map(|(x, y)| (x - y).abs()).sum();
    sum / a.data.len() as f64
}

/// Refines a camera pose so that rendering `scene` reproduces `observed`.
///
/// Each iteration builds a central-difference Jacobian over the six tangent
/// directions and tries a damped Gauss-Newton step, then single-axis steps
/// in seeded order. Only steps that lower the mean-L1 residual are
/// accepted; when nothing improves the step sizes are halved.
pub fn localize_camera(
    scene: &GaussianScene,
    observed: &RgbImage,
    init: &CameraModel,
    cfg: &LocalizeConfig,
) -> Result<LocalizeResult> {
    if observed.width != init.width() || observed.height != init.height() {
        return Err(Error::Dimension(format!(
            "observed image is {}x{}, camera is {}x{}",
            observed.width,
            observed.height,
            init.width(),
            init.height()
        )));
    }
    if !(cfg.rot_step_deg > 0.0 && cfg.trans_step > 0.0) {
        return Err(Error::Config("localization steps must be positive".into()));
    }
    let opts = RenderOptions {
        background: cfg.background,
    };
    let mut pyramid = vec![observed.clone()];
    let mut levels = 1;
    while levels < cfg.levels.max(1) {
        let prev = pyramid.last().unwrap();
        if prev.width < 16 || prev.height < 16 {
            break;
        }
        pyramid.push(prev.downsample2());
        levels += 1;
    }
    let full = Level {
        scene,
        camera: *init,
        observed: observed.clone(),
        opts,
    };
    let init_pose = *init.pose();
    let initial_residual = full.residual(&init_pose)?;
    let mut result = LocalizeResult {
        pose: init_pose,
        residual: initial_residual,
        initial_residual,
        converged: initial_residual <= cfg.tolerance,
        iterations: 0,
        history: Vec::new(),
    };
    if result.converged {
        return Ok(result);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pose = init_pose;
    let mut remaining = cfg.budget;
    for level in (0..levels).rev() {
        let stage = if level == 0 {
            // a coarse-level optimum can be worse at full resolution
            if full.residual(&pose)? > initial_residual {
                pose = init_pose;
            }
            Level {
                scene,
                camera: *init,
                observed: observed.clone(),
                opts,
            }
        } else {
            Level {
                scene,
                camera: init.downscaled(level)?,
                observed: pyramid[level as usize].clone(),
                opts,
            }
        };
        let (p, done, used) = refine_level(&stage, pose, level, cfg, remaining, &mut rng, &mut result.history)?;
        pose = p;
        remaining -= used;
        result.iterations += used;
        if level == 0 {
            result.converged = done;
        }
    }
    result.residual = full.residual(&pose)?;
    result.pose = pose;
    Ok(result)
}

fn refine_level(
    stage: &Level,
    mut pose: SimilarityTransform,
    level: u32,
    cfg: &LocalizeConfig,
    budget: usize,
    rng: &mut ChaCha8Rng,
    history: &mut Vec<(u32, f64)>,
) -> Result<(SimilarityTransform, bool, usize)> {
    let mut f = stage.residual(&pose)?;
    let mut h_rot = cfg.rot_step_deg.to_radians();
    let mut h_trans = cfg.trans_step;
    let min_rot = cfg.min_rot_step_deg.to_radians();
    let mut lambda = 1e-3;
    let mut used = 0;
    loop {
        if f <= cfg.tolerance || (h_rot < min_rot && h_trans < cfg.min_trans_step) {
            return Ok((pose, true, used));
        }
        if used == budget {
            return Ok((pose, false, used));
        }
        used += 1;
        let steps = [h_rot, h_rot, h_rot, h_trans, h_trans, h_trans];

        let mut improved = false;
        if let Some(xi) = gauss_newton_step(stage, &pose, &steps, lambda)? {
            let cand = perturb(&pose, &xi);
            let fc = stage.residual(&cand)?;
            if fc < f {
                pose = cand;
                f = fc;
                improved = true;
                lambda = (lambda * 0.3).max(1e-9);
            } else {
                lambda = (lambda * 10.0).min(1e6);
            }
        }
        if !improved {
            let mut order: Vec<usize> = (0..12).collect();
            order.shuffle(rng);
            let candidates: Vec<(usize, SimilarityTransform)> = order
                .iter()
                .map(|&k| {
                    let mut xi = Vector6::zeros();
                    xi[k / 2] = if k % 2 == 0 { steps[k / 2] } else { -steps[k / 2] };
                    (k, perturb(&pose, &xi))
                })
                .collect();
            let scores: Vec<f64> = candidates
                .par_iter()
                .map(|(_, p)| stage.residual(p))
                .collect::<Result<_>>()?;
            // first strictly best in the seeded order
            let mut best: Option<usize> = None;
            for (i, &s) in scores.iter().enumerate() {
                if s < f && best.is_none_or(|b| s < scores[b]) {
                    best = Some(i);
                }
            }
            if let Some(b) = best {
                pose = candidates[b].1;
                f = scores[b];
                improved = true;
            }
        }
        if improved {
            history.push((level, f));
        } else {
            h_rot *= 0.5;
            h_trans *= 0.5;
        }
    }
}

/// Damped Gauss-Newton step from a central-difference Jacobian of the
/// per-pixel residual. `None` if the normal equations are singular.
fn gauss_newton_step(
    stage: &Level,
    pose: &SimilarityTransform,
    steps: &[f64; 6],
    lambda: f64,
) -> Result<Option<Vector6<f64>>> {
    let base = stage.render(pose)?;
    let columns: Vec<Vec<f64>> = (0..6)
        .into_par_iter()
        .map(|k| {
            let mut xi = Vector6::zeros();
            xi[k] = steps[k];
            let plus = stage.render(&perturb(pose, &xi))?;
            let minus = stage.render(&perturb(pose, &-xi))?;
            let inv = 0.5 / steps[k];
            Ok(plus.data.iter().zip(&minus.data).map(|(p, m)| (p - m) * inv).collect())
        })
        .collect::<Result<_>>()?;
    let residual: Vec<f64> = base.data.iter().zip(&stage.observed.data).map(|(a, b)| a - b).collect();

    let mut jtj = Matrix6::zeros();
    let mut jtr = Vector6::zeros();
    for i in 0..6 {
        for j in i..6 {
            let v: f64 = columns[i].iter().zip(&columns[j]).map(|(a, b)| a * b).sum();
            jtj[(i, j)] = v;
            jtj[(j, i)] = v;
        }
        jtr[i] = columns[i].iter().zip(&residual).map(|(a, b)| a * b).sum();
    }
    let mut damped = jtj;
    for i in 0..6 {
        damped[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
    }
    Ok(damped.cholesky().map(|c| -c.solve(&jtr)).filter(|xi| xi.iter().all(|v| v.is_finite())))
}
