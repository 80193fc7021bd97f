//! Poses a labelled arm with forward kinematics and renders a short motion.
//!
//! `cargo run --release --example drive_arm -- [out_dir]`

use std::path::PathBuf;

use gstwin::kinematics::{drive_scene, forward_kinematics, JointState};
use gstwin::render::render;
use gstwin::synthetic::{arm_scene, camera, ur5_chain};
use nalgebra::Vector3;

fn main() -> gstwin::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("gstwin-arm"));
    std::fs::create_dir_all(&out).map_err(|e| gstwin::Error::io(&out, e))?;

    let chain = ur5_chain();
    let canonical = chain.zero_state();
    // labels are authored at the canonical pose; every Gaussian follows its joint
    let scene = arm_scene(&chain, &canonical, 16)?;
    let cam = camera(256, 192, 65.0, Vector3::new(1.3, -1.3, 0.9), Vector3::new(0.0, 0.0, 0.3))?;

    for k in 0..6 {
        let s = k as f64 / 5.0;
        let target = JointState(vec![0.8 * s, -1.2 * s, 1.0 * s, -0.5 * s, 0.6 * s, 0.0]);
        let posed = drive_scene(&scene, &chain, &canonical, &target)?;
        let ee = forward_kinematics(&chain, &target)?.last().copied().expect("six joints");
        let path = out.join(format!("pose_{k}.png"));
        render(&posed, &cam).rgb.save_png(&path)?;
        let p = ee.translation_vector();
        println!("pose {k}: end effector at ({:.3}, {:.3}, {:.3}) -> {}", p.x, p.y, p.z, path.display());
    }
    Ok(())
}
