//! Places an object into a scene, edits it about its own center, and swaps
//! the background, both in code and through a composition script.
//!
//! `cargo run --release --example compose_scenes -- [out_dir]`

use std::path::PathBuf;

use gstwin::edit::{merge_scenes, run_script, transform_object, CompositionScript, MergeOptions, ObjectAnchor};
use gstwin::render::render;
use gstwin::splat::{load_splat_file, save_splat_file, write_splat};
use gstwin::synthetic::{camera, cube, textured_scene};
use gstwin::transform::SimilarityTransform;
use nalgebra::{Rotation3, UnitQuaternion, Vector3};

fn main() -> gstwin::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("gstwin-compose"));
    std::fs::create_dir_all(&out).map_err(|e| gstwin::Error::io(&out, e))?;

    save_splat_file(&textured_scene(8000, 3)?, &out.join("table.ply"))?;
    save_splat_file(&cube(0.1, [0.9, 0.3, 0.2], 6)?, &out.join("block.ply"))?;
    // files store single precision; start both paths from what is on disk
    let table = load_splat_file(&out.join("table.ply"))?;
    let block = load_splat_file(&out.join("block.ply"))?;

    // in code: spin the block about its center, then drop it on the table at half size
    let spin = Rotation3::from_axis_angle(&Vector3::z_axis(), 0.6).into_inner();
    let spun = transform_object(&block, &ObjectAnchor::new(Vector3::zeros())?, &spin, &Vector3::zeros())?;
    let place = SimilarityTransform::from_parts(0.5, &UnitQuaternion::identity(), Vector3::new(0.1, 0.05, 0.12));
    let composed = merge_scenes(&table, &spun, &place, MergeOptions::default())?;

    // the same edit as a script
    let script: CompositionScript = serde_json::from_value(serde_json::json!({
        "input": "table.ply",
        "steps": [
            { "op": "load", "name": "block", "path": "block.ply" },
            { "op": "transform_object", "name": "block", "anchor": [0, 0, 0],
              "rotation": spin.transpose().as_slice(), "translation": [0, 0, 0] },
            { "op": "merge", "base": "main", "addition": "block", "into": "main",
              "transform": place.to_row_major() },
            { "op": "save", "name": "main", "path": "composed.ply" }
        ]
    }))?;
    let scenes = run_script(&script, &out)?;
    let same = write_splat(&scenes["main"])? == write_splat(&composed)?;

    let cam = camera(320, 240, 60.0, Vector3::new(0.45, -0.55, 0.5), Vector3::new(0.0, 0.0, 0.05))?;
    render(&composed, &cam).rgb.save_png(&out.join("composed.png"))?;
    println!(
        "{} + {} gaussians -> {}; script output identical: {same}; written to {}",
        table.len(),
        block.len(),
        composed.len(),
        out.display()
    );
    Ok(())
}
