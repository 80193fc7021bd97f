//! Estimates the transform between a simulator frame and the splat frame
//! from per-joint pose pairs, then refines a top-down layout by mask shift.

use gstwin::align::{bev_camera, estimate_frame_transform, express_object, layout_shift, FramePairObservation, LayoutConfig, WeightPreset};
use gstwin::kinematics::{forward_kinematics, JointState};
use gstwin::render::{render_mask, Intrinsics};
use gstwin::synthetic::{arm_scene, ur5_chain};
use gstwin::transform::SimilarityTransform;
use nalgebra::{UnitQuaternion, Vector3};

fn main() -> gstwin::Result<()> {
    let chain = ur5_chain();
    let state = JointState(vec![0.3, -0.8, 0.9, -0.2, 0.4, 0.1]);
    let frames = forward_kinematics(&chain, &state)?;

    // the simulator sees the same arm through an unknown rigid offset plus
    // a little per-joint noise
    let gs_to_sim = SimilarityTransform::from_parts(1.0, &UnitQuaternion::from_euler_angles(0.0, 0.0, 0.35), Vector3::new(0.4, -0.2, 0.02));
    let mut obs: Vec<FramePairObservation> = frames
        .iter()
        .enumerate()
        .map(|(i, t_gs)| {
            let wobble = SimilarityTransform::translation(Vector3::new(0.001 * i as f64, -0.0005, 0.0));
            FramePairObservation { joint_index: i, t_gs: *t_gs, t_sim: wobble.compose(&gs_to_sim).compose(t_gs), weight: 1.0 }
        })
        .collect();
    WeightPreset::Distal.apply(&mut obs);
    let report = estimate_frame_transform(&obs)?;
    println!("estimated gs->sim translation {:?}", report.gs_to_sim.translation_vector().as_slice());
    for r in &report.residuals {
        println!("  joint {}: {:.4} deg, {:.2} mm (w = {})", r.joint_index, r.rotation_deg, r.translation * 1e3, r.weight);
    }

    // an object pose reported by the simulator, expressed in the splat frame
    let cup_in_sim = SimilarityTransform::translation(Vector3::new(0.8, 0.1, 0.05));
    let cup_in_gs = express_object(&cup_in_sim, &report.sim_to_gs()?);
    println!("object in splat frame at {:?}", cup_in_gs.translation_vector().as_slice());

    // top-down masks: a rendered one and a "simulator" one offset by a few pixels
    let scene = arm_scene(&chain, &chain.zero_state(), 20)?;
    let cfg = LayoutConfig::default();
    let cam = bev_camera(Vector3::zeros(), &cfg, Intrinsics::from_fov(160, 160, 60.0))?;
    let gs_mask = render_mask(&scene, &cam, cfg.alpha_threshold)?;
    let sim_mask = gs_mask.shifted(3, -2);
    let shift = layout_shift(&gs_mask, &sim_mask, &cfg)?;
    println!("layout shift ({}, {}) px with IoU {:.3}", shift.dx, shift.dy, shift.iou);
    Ok(())
}
