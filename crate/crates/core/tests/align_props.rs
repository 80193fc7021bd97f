mod common;

use common::{random_rigid, random_rotation};
use gstwin::align::{
    estimate_frame_transform, express_object, layout_shift, localize_camera, FramePairObservation, LayoutConfig,
    LocalizeConfig,
};
use gstwin::raster::Mask;
use gstwin::render::render;
use gstwin::synthetic::{camera, textured_scene};
use gstwin::transform::SimilarityTransform;
use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Joint observations whose per-joint candidates scatter around `truth` by
/// up to `noise` radians / meters.
fn observations(rng: &mut ChaCha8Rng, truth: &SimilarityTransform, n: usize, noise: f64) -> Vec<FramePairObservation> {
    (0..n)
        .map(|i| {
            let t_gs = random_rigid(rng, 1.0);
            let jitter = SimilarityTransform::from_parts(
                1.0,
                &UnitQuaternion::from_scaled_axis(Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * noise),
                Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * noise,
            );
            FramePairObservation {
                joint_index: i,
                t_gs,
                t_sim: jitter.compose(truth).compose(&t_gs),
                weight: rng.gen_range(0.1..2.0),
            }
        })
        .collect()
}

fn blob_mask(rng: &mut ChaCha8Rng, w: usize, h: usize, margin: usize) -> Mask {
    let mut m = Mask::new(w, h);
    for _ in 0..4 {
        let cx = rng.gen_range(margin + 6..w - margin - 6) as f64;
        let cy = rng.gen_range(margin + 6..h - margin - 6) as f64;
        let (rx, ry) = (rng.gen_range(2.0..6.0), rng.gen_range(2.0..6.0));
        for y in 0..h {
            for x in 0..w {
                let (dx, dy) = ((x as f64 - cx) / rx, (y as f64 - cy) / ry);
                if dx * dx + dy * dy <= 1.0 {
                    m.set(x, y, true);
                }
            }
        }
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn estimate_is_rigid_under_noise(seed in any::<u64>(), n in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth = random_rigid(&mut rng, 2.0);
        let obs = observations(&mut rng, &truth, n, 0.05);
        let r = estimate_frame_transform(&obs).unwrap().gs_to_sim.linear();
        prop_assert!((r.transpose() * r - Matrix3::identity()).abs().max() < 1e-9);
    }

    #[test]
    fn estimate_is_left_equivariant(seed in any::<u64>(), n in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth = random_rigid(&mut rng, 2.0);
        let obs = observations(&mut rng, &truth, n, 0.05);
        let g = random_rigid(&mut rng, 2.0);
        let moved: Vec<_> = obs
            .iter()
            .map(|o| FramePairObservation { t_sim: g.compose(&o.t_sim), ..o.clone() })
            .collect();
        let a = estimate_frame_transform(&obs).unwrap().gs_to_sim;
        let b = estimate_frame_transform(&moved).unwrap().gs_to_sim;
        prop_assert!((g.compose(&a).matrix() - b.matrix()).abs().max() <= 1e-9);
    }

    #[test]
    fn consensus_is_returned_exactly(seed in any::<u64>(), n in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth = random_rigid(&mut rng, 2.0);
        // every candidate T_sim·T_gs⁻¹ is bitwise the same when T_gs = I
        let obs: Vec<_> = (0..n)
            .map(|i| FramePairObservation { joint_index: i, t_gs: SimilarityTransform::identity(), t_sim: truth, weight: 1.0 + i as f64 })
            .collect();
        let r = estimate_frame_transform(&obs).unwrap();
        prop_assert_eq!(r.gs_to_sim.matrix(), truth.matrix());
        prop_assert!(r.warnings.is_empty());
    }

    #[test]
    fn express_object_is_associative(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b, c) = (random_rigid(&mut rng, 2.0), random_rigid(&mut rng, 2.0), random_rigid(&mut rng, 2.0));
        let lhs = express_object(&express_object(&a, &b), &c);
        let rhs = express_object(&a, &c.compose(&b));
        prop_assert!((lhs.matrix() - rhs.matrix()).abs().max() <= 1e-12);
    }

    #[test]
    fn interior_mask_shift_is_exact(seed in any::<u64>(), dx in -10i64..=10, dy in -10i64..=10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gs = blob_mask(&mut rng, 64, 48, 10);
        let sim = gs.shifted(dx, dy);
        let s = layout_shift(&gs, &sim, &LayoutConfig::default()).unwrap();
        prop_assert_eq!((s.dx, s.dy), (dx, dy));
        prop_assert_eq!(s.iou, 1.0);
    }
}

#[test]
fn zero_total_weight_is_an_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut obs = observations(&mut rng, &SimilarityTransform::identity(), 3, 0.0);
    for o in &mut obs {
        o.weight = 0.0;
    }
    assert!(estimate_frame_transform(&obs).is_err());
    assert!(estimate_frame_transform(&[]).is_err());
}

#[test]
fn localization_never_worsens_the_residual() {
    let scene = textured_scene(1500, 4).unwrap();
    let truth = camera(64, 48, 60.0, Vector3::new(0.35, -0.45, 0.45), Vector3::new(0.0, 0.0, 0.03)).unwrap();
    let observed = render(&scene, &truth).rgb;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for trial in 0..3 {
        let q = UnitQuaternion::from_scaled_axis(random_rotation(&mut rng).axis().unwrap().into_inner() * 2f64.to_radians());
        let start = truth
            .with_pose(truth.pose().compose(&SimilarityTransform::from_parts(1.0, &q, Vector3::new(0.01, -0.01, 0.02))))
            .unwrap();
        let cfg = LocalizeConfig { budget: 10, seed: trial, ..Default::default() };
        let r = localize_camera(&scene, &observed, &start, &cfg).unwrap();
        assert!(r.residual <= r.initial_residual, "{} > {}", r.residual, r.initial_residual);
    }
}
