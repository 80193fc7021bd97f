mod common;

use gstwin::splat::{covariance_of, read_splat, sh, write_splat, FrameId, Gaussian, GaussianScene};
use nalgebra::{SymmetricEigen, UnitQuaternion, Vector3};
use proptest::prelude::*;

/// Writes a standard-layout file by hand from raw per-vertex floats.
fn hand_written_file(degree: u8, vertices: &[Vec<f32>]) -> Vec<u8> {
    let rest = 3 * (sh::coeffs_per_channel(degree) - 1);
    let mut names: Vec<String> = ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"]
        .map(String::from)
        .to_vec();
    names.extend((0..rest).map(|i| format!("f_rest_{i}")));
    names.push("opacity".into());
    names.extend((0..3).map(|i| format!("scale_{i}")));
    names.extend((0..4).map(|i| format!("rot_{i}")));
    let mut out = format!("ply\nformat binary_little_endian 1.0\nelement vertex {}\n", vertices.len()).into_bytes();
    for n in names {
        out.extend(format!("property float {n}\n").bytes());
    }
    out.extend(b"end_header\n");
    for v in vertices {
        assert_eq!(v.len(), 17 + rest);
        for x in v {
            out.extend(x.to_le_bytes());
        }
    }
    out
}

fn vertex_strategy(degree: u8) -> impl Strategy<Value = Vec<f32>> {
    let rest = 3 * (sh::coeffs_per_channel(degree) - 1);
    (
        prop::collection::vec(-100.0f32..100.0, 9 + rest + 4),
        prop::array::uniform4(-1.0f32..1.0),
    )
        .prop_filter("non-degenerate rotation", |(_, q)| q.iter().map(|v| v * v).sum::<f32>() > 0.01)
        .prop_map(|(mut vals, q)| {
            let n = q.iter().map(|v| v * v).sum::<f32>().sqrt();
            vals.extend(q.iter().map(|v| v / n));
            vals
        })
}

fn file_strategy() -> impl Strategy<Value = Vec<u8>> {
    (0u8..=3).prop_flat_map(|degree| {
        prop::collection::vec(vertex_strategy(degree), 1..20).prop_map(move |vs| hand_written_file(degree, &vs))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn load_then_save_is_bit_exact(bytes in file_strategy()) {
        let scene = read_splat(&bytes).unwrap();
        prop_assert_eq!(write_splat(&scene).unwrap(), bytes);
    }

    #[test]
    fn covariance_is_symmetric_and_psd(bytes in file_strategy()) {
        let scene = read_splat(&bytes).unwrap();
        for g in &scene.gaussians {
            let mut g = g.clone();
            // keep scales in a physically meaningful range
            g.log_scale = g.log_scale.map(|s| s.clamp(-8.0, 3.0));
            let m = covariance_of(&g);
            prop_assert!((m - m.transpose()).abs().max() < 1e-12);
            let min_eig = SymmetricEigen::new(m).eigenvalues.min();
            prop_assert!(min_eig > -1e-9, "{}", min_eig);
        }
    }

    #[test]
    fn loaded_quaternions_are_unit(bytes in file_strategy(), stretch in 0.2f32..5.0) {
        // scale every stored quaternion away from unit length
        let mut bytes = bytes;
        let scene = read_splat(&bytes).unwrap();
        let rec = 4 * (17 + 3 * (sh::coeffs_per_channel(scene.sh_degree()) - 1));
        let body = bytes.len() - scene.len() * rec;
        for i in 0..scene.len() {
            for k in 0..4 {
                let at = body + i * rec + rec - 16 + 4 * k;
                let v = f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) * stretch;
                bytes[at..at + 4].copy_from_slice(&v.to_le_bytes());
            }
        }
        let loaded = read_splat(&bytes).unwrap();
        for g in &loaded.gaussians {
            prop_assert!((g.rotation.quaternion().norm() - 1.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn degree_zero_color_ignores_view(dc in prop::array::uniform3(-2.0f64..2.0), az in -3.1f64..3.1, el in -1.5f64..1.5) {
        let mut g = Gaussian::isotropic(Vector3::zeros(), 0.1, 0.5, [0.0; 3]);
        g.sh = dc.to_vec();
        let d = Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin());
        prop_assert_eq!(g.color(&d), g.color(&Vector3::z()));
    }
}

#[test]
fn single_vertex_file_round_trips() {
    let g = Gaussian::with_color(
        Vector3::new(0.25, -1.5, 3.0),
        UnitQuaternion::from_euler_angles(0.1, 0.2, 0.3),
        Vector3::new(-3.0, -2.5, -4.0),
        0.7,
        [0.1, 0.5, 0.9],
        3,
    );
    let scene = GaussianScene::from_gaussians(vec![g], 3, FrameId::Gs).unwrap();
    let bytes = write_splat(&scene).unwrap();
    let again = write_splat(&read_splat(&bytes).unwrap()).unwrap();
    assert_eq!(bytes, again);
    assert_eq!(read_splat(&bytes).unwrap().len(), 1);
}

#[test]
fn truncated_file_is_rejected() {
    let bytes = hand_written_file(0, &[vec![0.0; 13].into_iter().chain([1.0, 0.0, 0.0, 0.0]).collect()]);
    assert!(read_splat(&bytes[..bytes.len() - 3]).is_err());
}
