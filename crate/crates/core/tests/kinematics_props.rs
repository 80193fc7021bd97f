mod common;

use common::{fk_oracle, link_oracle, max_abs, random_chain};
use gstwin::kinematics::{drive_scene, forward_kinematics, link_transform, JointState, MdhChain, MdhJoint};
use gstwin::synthetic::{arm_scene, ur5_chain};
use nalgebra::{Matrix3, Matrix4};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{FRAC_PI_2, PI};

fn ur5_state() -> impl Strategy<Value = JointState> {
    prop::collection::vec(-PI..PI, 6).prop_map(JointState)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn fk_matches_brute_force_product(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (chain, state) = random_chain(&mut rng);
        let got = forward_kinematics(&chain, &state).unwrap();
        let want = fk_oracle(&chain, &state);
        prop_assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(&want) {
            prop_assert!(max_abs(&(g.matrix() - w)) <= 1e-12);
        }
    }

    #[test]
    fn link_rotation_is_orthonormal(beta in -PI..=PI, a in -2.0f64..2.0, d in -2.0f64..2.0, off in -PI..PI, q in -10.0f64..10.0) {
        let j = MdhJoint::new(beta, a, d, off).unwrap();
        let r = link_transform(&j, q).linear();
        prop_assert!((r.transpose() * r - Matrix3::identity()).abs().max() < 1e-12);
        prop_assert!(max_abs(&(link_transform(&j, q).matrix() - link_oracle(&j, q))) <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn driving_composes(mid in ur5_state(), target in ur5_state()) {
        let chain = ur5_chain();
        let canonical = chain.zero_state();
        let scene = arm_scene(&chain, &canonical, 3).unwrap();
        let two_hops = drive_scene(&drive_scene(&scene, &chain, &canonical, &mid).unwrap(), &chain, &mid, &target).unwrap();
        let direct = drive_scene(&scene, &chain, &canonical, &target).unwrap();
        for (a, b) in two_hops.gaussians.iter().zip(&direct.gaussians) {
            prop_assert!((a.mean - b.mean).norm() <= 1e-9);
        }
    }

    #[test]
    fn driving_is_rigid_per_label(target in ur5_state()) {
        let chain = ur5_chain();
        let canonical = chain.zero_state();
        let scene = arm_scene(&chain, &canonical, 3).unwrap();
        let driven = drive_scene(&scene, &chain, &canonical, &target).unwrap();
        let n = scene.len();
        for i in (0..n).step_by(3) {
            for j in (i + 1..n).step_by(5) {
                if scene.gaussians[i].joint_label != scene.gaussians[j].joint_label {
                    continue;
                }
                let before = (scene.gaussians[i].mean - scene.gaussians[j].mean).norm();
                let after = (driven.gaussians[i].mean - driven.gaussians[j].mean).norm();
                prop_assert!((before - after).abs() <= 1e-9);
            }
        }
    }
}

#[test]
fn hand_derived_links() {
    // quarter turn about z, then 2 up and 1 along the turned x axis
    let j = MdhJoint::new(0.0, 1.0, 2.0, 0.0).unwrap();
    #[rustfmt::skip]
    let want = Matrix4::new(
        0.0, -1.0, 0.0, 0.0,
        1.0,  0.0, 0.0, 1.0,
        0.0,  0.0, 1.0, 2.0,
        0.0,  0.0, 0.0, 1.0,
    );
    assert!(max_abs(&(link_transform(&j, FRAC_PI_2).matrix() - want)) <= 1e-12);

    // twist of a quarter turn about x at zero angle
    let j = MdhJoint::new(FRAC_PI_2, 1.0, 2.0, 0.0).unwrap();
    #[rustfmt::skip]
    let want = Matrix4::new(
        1.0, 0.0,  0.0, 1.0,
        0.0, 0.0, -1.0, 0.0,
        0.0, 1.0,  0.0, 2.0,
        0.0, 0.0,  0.0, 1.0,
    );
    assert!(max_abs(&(link_transform(&j, 0.0).matrix() - want)) <= 1e-12);

    // two such links stack
    let chain = MdhChain::new(vec![MdhJoint::new(0.0, 1.0, 2.0, 0.0).unwrap(); 2]).unwrap();
    let ee = forward_kinematics(&chain, &JointState(vec![FRAC_PI_2, FRAC_PI_2])).unwrap()[1];
    let p = ee.translation_vector();
    assert!((p - nalgebra::Vector3::new(-1.0, 1.0, 4.0)).norm() <= 1e-12, "{p:?}");
}

#[test]
fn wrong_state_length_is_rejected() {
    let chain = ur5_chain();
    assert!(forward_kinematics(&chain, &JointState(vec![0.0; 5])).is_err());
}
