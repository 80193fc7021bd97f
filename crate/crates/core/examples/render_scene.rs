//! Renders a procedural tabletop to PNG plus a PFM depth map.
//!
//! `cargo run --release --example render_scene -- [out_dir]`

use std::path::PathBuf;

use gstwin::render::{render_with, RenderOptions};
use gstwin::synthetic::{camera, textured_scene};
use nalgebra::Vector3;

fn main() -> gstwin::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("gstwin-render"));
    std::fs::create_dir_all(&out).map_err(|e| gstwin::Error::io(&out, e))?;

    let scene = textured_scene(20_000, 7)?;
    let cam = camera(320, 240, 60.0, Vector3::new(0.45, -0.55, 0.5), Vector3::new(0.0, 0.0, 0.03))?;
    let frame = render_with(&scene, &cam, &RenderOptions { background: [0.08, 0.08, 0.1] });

    frame.rgb.save_png(&out.join("color.png"))?;
    frame.depth.save_pfm(&out.join("depth.pfm"))?;
    let covered = frame.alpha.data.iter().filter(|&&a| a > 0.5).count();
    println!(
        "{} gaussians -> {}x{}, {:.0}% of pixels covered, written to {}",
        scene.len(),
        cam.width(),
        cam.height(),
        100.0 * covered as f64 / frame.alpha.data.len() as f64,
        out.display()
    );
    Ok(())
}
