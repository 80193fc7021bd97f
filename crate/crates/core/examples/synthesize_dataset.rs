//! Replays a joint trajectory with a moving object into an image/depth
//! dataset with a JSONL manifest.
//!
//! `cargo run --release --example synthesize_dataset -- [out_dir]`

use std::collections::BTreeMap;
use std::path::PathBuf;

use gstwin::splat::{save_labels, save_splat_file};
use gstwin::synth::{replay_job_file, Trajectory, TrajectoryFrame};
use gstwin::synthetic::{arm_scene, camera, cube, scene_labels, ur5_chain};
use gstwin::transform::SimilarityTransform;
use nalgebra::Vector3;

fn main() -> gstwin::Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("gstwin-dataset"));
    std::fs::create_dir_all(&dir).map_err(|e| gstwin::Error::io(&dir, e))?;

    let chain = ur5_chain();
    let scene = arm_scene(&chain, &chain.zero_state(), 16)?;
    save_splat_file(&scene, &dir.join("arm.ply"))?;
    save_labels(&scene_labels(&scene), &dir.join("arm.labels"))?;
    std::fs::write(dir.join("ur5.chain"), chain.to_text()).map_err(|e| gstwin::Error::io(&dir, e))?;
    save_splat_file(&cube(0.06, [0.2, 0.6, 0.9], 5)?, &dir.join("cube.ply"))?;

    // a reach-and-lift motion; the cube rises with the gripper in the second half
    let frames = (0..12)
        .map(|k| {
            let s = k as f64 / 11.0;
            let lift = (s - 0.5).max(0.0) * 0.3;
            let mut objects = BTreeMap::new();
            objects.insert("cube".into(), SimilarityTransform::translation(Vector3::new(0.35, 0.15, 0.03 + lift)));
            TrajectoryFrame { timestamp: 0.1 * k as f64, joints: vec![0.5 * s, -0.9 * s, 1.1 * s, -0.4, 0.3, 0.0], objects }
        })
        .collect();
    std::fs::write(dir.join("traj.jsonl"), Trajectory::new(frames)?.to_jsonl()?).map_err(|e| gstwin::Error::io(&dir, e))?;

    let front = camera(160, 120, 65.0, Vector3::new(1.2, -1.2, 0.8), Vector3::new(0.0, 0.0, 0.3))?;
    let mut cam = serde_json::to_value(front.to_record())?;
    cam["id"] = "front".into();
    let job = serde_json::json!({
        "base_scene": "arm.ply",
        "chain": "ur5.chain",
        "labels": "arm.labels",
        "trajectory": "traj.jsonl",
        "cameras": [cam],
        "orbit": { "center": [0.0, 0.0, 0.3], "radius": 1.5, "elevation_deg": 25.0, "count": 3,
                   "width": 128, "height": 96, "hfov_deg": 65.0 },
        "objects": { "cube": { "scene": "cube.ply", "anchor": [0.0, 0.0, 0.0] } },
        "output_dir": "dataset"
    });
    std::fs::write(dir.join("job.json"), serde_json::to_string_pretty(&job)?).map_err(|e| gstwin::Error::io(&dir, e))?;

    let manifest = replay_job_file(&dir.join("job.json"))?;
    println!(
        "{} frames x {} cameras = {} records, config {}, written to {}",
        manifest.header.frames,
        manifest.header.cameras.len(),
        manifest.records.len(),
        &manifest.header.config_hash[..12],
        dir.join("dataset").display()
    );
    Ok(())
}
