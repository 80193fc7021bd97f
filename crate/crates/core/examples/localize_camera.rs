//! Recovers a perturbed camera pose from a rendered observation.
//!
//! `cargo run --release --example localize_camera -- [trials]`

use std::time::Instant;

use gstwin::align::{localize_camera, LocalizeConfig};
use gstwin::render::render;
use gstwin::synthetic::{camera, textured_scene};
use gstwin::transform::{rotation_angle_between, SimilarityTransform};
use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> gstwin::Result<()> {
    let trials: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(3);
    let scene = textured_scene(5000, 11)?;
    let truth = camera(160, 120, 60.0, Vector3::new(0.35, -0.45, 0.45), Vector3::new(0.0, 0.0, 0.03))?;
    let observed = render(&scene, &truth).rgb;

    for seed in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let axis = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)).normalize();
        let dir = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)).normalize();
        let delta = SimilarityTransform::from_parts(
            1.0,
            &UnitQuaternion::from_scaled_axis(axis * 1f64.to_radians()),
            dir * 0.01,
        );
        let start = truth.with_pose(truth.pose().compose(&delta))?;
        let t = Instant::now();
        let cfg = LocalizeConfig { seed, ..Default::default() };
        let r = localize_camera(&scene, &observed, &start, &cfg)?;
        let rot_err = rotation_angle_between(&r.pose.linear(), &truth.pose().linear()).to_degrees();
        let trans_err = (r.pose.translation_vector() - truth.pose().translation_vector()).norm();
        println!(
            "trial {seed}: residual {:.5} -> {:.6}, error {:.4} deg / {:.3} mm, {} iterations, {:.1} s{}",
            r.initial_residual,
            r.residual,
            rot_err,
            trans_err * 1e3,
            r.iterations,
            t.elapsed().as_secs_f64(),
            if r.converged { "" } else { " (budget exhausted)" }
        );
    }
    Ok(())
}
