//! Procedural scenes for demos, tests and benchmarks.

use nalgebra::{UnitQuaternion, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::kinematics::{forward_kinematics, JointState, MdhChain, MdhJoint};
use crate::render::{CameraModel, Intrinsics};
use crate::splat::{sh, FrameId, Gaussian, GaussianScene};

const PALETTE: [[f64; 3]; 8] = [
    [0.55, 0.55, 0.58],
    [0.85, 0.35, 0.20],
    [0.95, 0.75, 0.20],
    [0.30, 0.70, 0.35],
    [0.20, 0.55, 0.85],
    [0.55, 0.35, 0.80],
    [0.90, 0.45, 0.65],
    [0.25, 0.25, 0.28],
];

/// Six-joint UR5 with ±2π limits on every joint.
pub fn ur5_chain() -> MdhChain {
    use std::f64::consts::{FRAC_PI_2, TAU};
    let rows = [
        (FRAC_PI_2, 0.0, 0.089159),
        (0.0, -0.425, 0.0),
        (0.0, -0.39225, 0.0),
        (FRAC_PI_2, 0.0, 0.10915),
        (-FRAC_PI_2, 0.0, 0.09465),
        (0.0, 0.0, 0.0823),
    ];
    let joints = rows
        .iter()
        .map(|&(beta, a, d)| MdhJoint::new(beta, a, d, 0.0).and_then(|j| j.with_limits(-TAU, TAU)))
        .collect::<Result<Vec<_>>>()
        .expect("valid UR5 parameters");
    MdhChain::new(joints).expect("non-empty chain")
}

/// A flat checkered table of `n × n` splats centered on the origin at
/// height `z`, all labelled static.
pub fn table(n: usize, extent: f64, z: f64) -> Vec<Gaussian> {
    let mut out = Vec::with_capacity(n * n);
    let step = extent / n as f64;
    for i in 0..n {
        for j in 0..n {
            let x = -0.5 * extent + (i as f64 + 0.5) * step;
            let y = -0.5 * extent + (j as f64 + 0.5) * step;
            let shade = if (i / 2 + j / 2) % 2 == 0 { 0.78 } else { 0.62 };
            let mut g = Gaussian::with_color(
                Vector3::new(x, y, z),
                UnitQuaternion::identity(),
                Vector3::new((0.6 * step).ln(), (0.6 * step).ln(), (0.1 * step).ln()),
                0.95,
                [shade, shade * 0.92, shade * 0.8],
                0,
            );
            g.joint_label = Some(0);
            out.push(g);
        }
    }
    out
}

fn segment(a: Vector3<f64>, b: Vector3<f64>, radius: f64, label: u32, spacing: f64) -> Vec<Gaussian> {
    let len = (b - a).norm();
    // the tolerance keeps the count pose-independent
    let count = ((len / spacing - 1e-6).ceil() as usize).max(1);
    let color = PALETTE[label as usize % PALETTE.len()];
    (0..=count)
        .map(|i| {
            let t = i as f64 / count as f64;
            let mut g = Gaussian::isotropic(a + (b - a) * t, radius, 0.9, color);
            g.joint_label = Some(label);
            g
        })
        .collect()
}

/// Labelled arm standing on a table, captured at `canonical`.
///
/// The offset along each joint axis stays with the parent frame and the
/// offset along the common normal moves with the child frame, so every
/// Gaussian is rigid in the frame its label names.
pub fn arm_scene(chain: &MdhChain, canonical: &JointState, table_splats: usize) -> Result<GaussianScene> {
    let frames = forward_kinematics(chain, canonical)?;
    let mut gaussians = table(table_splats, 1.2, 0.0);
    let radius = 0.025;
    let spacing = 0.02;
    let mut prev = *chain.base();
    for (k, frame) in frames.iter().enumerate() {
        let joint = &chain.joints()[k];
        let origin = prev.translation_vector();
        let axis = prev.linear().column(2).into_owned();
        let elbow = origin + axis * joint.d;
        gaussians.extend(segment(origin, elbow, radius, k as u32, spacing));
        gaussians.extend(segment(elbow, frame.translation_vector(), radius, k as u32 + 1, spacing));
        prev = *frame;
    }
    // gripper fingers on the last frame
    let ee = frames.last().expect("chain has joints");
    let label = frames.len() as u32;
    for side in [-1.0, 1.0] {
        let a = ee.transform_point(&Vector3::new(0.0, side * 0.03, 0.0));
        let b = ee.transform_point(&Vector3::new(0.0, side * 0.03, 0.06));
        gaussians.extend(segment(a, b, 0.012, label, 0.01));
    }
    GaussianScene::from_gaussians(gaussians, 0, FrameId::Gs)
}

/// Joint labels of a scene built by [`arm_scene`].
pub fn scene_labels(scene: &GaussianScene) -> Vec<u32> {
    scene.gaussians.iter().map(|g| g.joint_label.unwrap_or(0)).collect()
}

/// Colored cube of side `size` centered at the origin.
pub fn cube(size: f64, rgb: [f64; 3], per_edge: usize) -> Result<GaussianScene> {
    let n = per_edge.max(2);
    let step = size / (n - 1) as f64;
    let mut gs = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let on_surface = [i, j, k].iter().any(|&v| v == 0 || v == n - 1);
                if !on_surface {
                    continue;
                }
                let p = Vector3::new(i as f64, j as f64, k as f64) * step - Vector3::repeat(0.5 * size);
                let shade = 0.8 + 0.2 * ((i + j + k) % 2) as f64;
                gs.push(Gaussian::isotropic(p, 0.6 * step, 0.95, rgb.map(|c| c * shade)));
            }
        }
    }
    GaussianScene::from_gaussians(gs, 0, FrameId::Gs)
}

/// Textured tabletop clutter with height variation, `count` Gaussians.
pub fn textured_scene(count: usize, seed: u64) -> Result<GaussianScene> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blobs: Vec<(Vector3<f64>, f64)> = (0..12)
        .map(|_| {
            (
                Vector3::new(rng.gen_range(-0.25..0.25), rng.gen_range(-0.25..0.25), 0.0),
                rng.gen_range(0.03..0.12),
            )
        })
        .collect();
    let mut gs = Vec::with_capacity(count);
    for _ in 0..count {
        let x: f64 = rng.gen_range(-0.3..0.3);
        let y: f64 = rng.gen_range(-0.3..0.3);
        let mut z = 0.0;
        for (c, h) in &blobs {
            let d2 = (x - c.x).powi(2) + (y - c.y).powi(2);
            z += h * (-d2 / (2.0 * 0.04f64.powi(2))).exp();
        }
        let rgb = [
            0.5 + 0.45 * (13.0 * x).sin() * (7.0 * y).cos(),
            0.5 + 0.45 * (11.0 * y + 3.0 * z).sin(),
            0.5 + 0.45 * (9.0 * (x + y)).cos(),
        ];
        let rot = UnitQuaternion::from_euler_angles(
            rng.gen_range(-0.3..0.3),
            rng.gen_range(-0.3..0.3),
            rng.gen_range(-3.1..3.1),
        );
        let s = rng.gen_range(0.004f64..0.012);
        gs.push(Gaussian::with_color(
            Vector3::new(x, y, z),
            rot,
            Vector3::new(s.ln(), (0.7 * s).ln(), (0.3 * s).ln()),
            rng.gen_range(0.6..0.98),
            rgb,
            0,
        ));
    }
    GaussianScene::from_gaussians(gs, 0, FrameId::Gs)
}

/// Random anisotropic Gaussians of the given SH degree inside a cube of
/// half-width `extent` around `center`.
pub fn random_scene(count: usize, degree: u8, center: Vector3<f64>, extent: f64, seed: u64) -> Result<GaussianScene> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_coeffs = sh::coeffs_per_channel(degree);
    let gs = (0..count)
        .map(|_| {
            let mean = center
                + Vector3::new(
                    rng.gen_range(-extent..extent),
                    rng.gen_range(-extent..extent),
                    rng.gen_range(-extent..extent),
                );
            let axis = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let rotation = UnitQuaternion::from_scaled_axis(axis * rng.gen_range(0.0..3.0));
            let log_scale = Vector3::new(
                rng.gen_range(-4.5..-2.0),
                rng.gen_range(-4.5..-2.0),
                rng.gen_range(-4.5..-2.0),
            );
            let mut sh_coeffs = vec![0.0; 3 * n_coeffs];
            for v in sh_coeffs.iter_mut().take(3) {
                *v = sh::dc_from_color(rng.gen_range(0.05..0.95));
            }
            for v in sh_coeffs.iter_mut().skip(3) {
                *v = rng.gen_range(-0.15..0.15);
            }
            Gaussian {
                mean,
                rotation,
                log_scale,
                opacity_logit: rng.gen_range(-2.0..4.0),
                sh: sh_coeffs,
                normal: [0.0; 3],
                joint_label: None,
            }
        })
        .collect();
    GaussianScene::from_gaussians(gs, degree, FrameId::Gs)
}

/// Camera at `eye` looking at `target` with `+z` up.
pub fn camera(width: usize, height: usize, hfov_deg: f64, eye: Vector3<f64>, target: Vector3<f64>) -> Result<CameraModel> {
    CameraModel::look_at(Intrinsics::from_fov(width, height, hfov_deg), eye, target, Vector3::z())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::drive_scene;

    #[test]
    fn arm_scene_is_fully_labelled() {
        let chain = ur5_chain();
        let scene = arm_scene(&chain, &chain.zero_state(), 10).unwrap();
        assert!(scene.labels_bound());
        let hist = scene.label_histogram();
        assert_eq!(*hist.keys().max().unwrap(), 6);
        assert!(hist[&0] >= 100);
    }

    #[test]
    fn arm_geometry_is_rigid_per_label() {
        let chain = ur5_chain();
        let canonical = chain.zero_state();
        let scene = arm_scene(&chain, &canonical, 4).unwrap();
        let target = JointState(vec![0.3, -0.7, 1.1, 0.2, -0.4, 0.9]);
        let driven = drive_scene(&scene, &chain, &canonical, &target).unwrap();
        let rebuilt = arm_scene(&chain, &target, 4).unwrap();
        assert_eq!(driven.len(), rebuilt.len());
        for (a, b) in driven.gaussians.iter().zip(&rebuilt.gaussians) {
            assert!((a.mean - b.mean).norm() < 1e-9, "{:?} vs {:?}", a.mean, b.mean);
        }
    }

    #[test]
    fn random_scene_is_seeded() {
        let a = random_scene(20, 3, Vector3::zeros(), 1.0, 7).unwrap();
        let b = random_scene(20, 3, Vector3::zeros(), 1.0, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.gaussians[0].sh.len(), 48);
    }
}
