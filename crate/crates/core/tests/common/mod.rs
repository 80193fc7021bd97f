//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use gstwin::kinematics::{JointState, MdhChain, MdhJoint};
use gstwin::render::CameraModel;
use gstwin::splat::GaussianScene;
use gstwin::transform::SimilarityTransform;
use nalgebra::{Matrix3, Matrix4, UnitQuaternion, Vector3};
use rand::Rng;

pub const NEAR: f64 = 0.01;
pub const DILATION: f64 = 0.3;
pub const ALPHA_FLOOR: f64 = 1.0 / 255.0;
pub const ALPHA_CEIL: f64 = 0.99;
pub const T_STOP: f64 = 1e-4;

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Associated Legendre `P_l^m(x)` with the Condon–Shortley phase, by the
/// textbook recurrences.
pub fn legendre(l: u32, m: u32, x: f64) -> f64 {
    let mut pmm = 1.0;
    if m > 0 {
        let s = (1.0 - x * x).sqrt();
        let mut fact = 1.0;
        for _ in 0..m {
            pmm *= -fact * s;
            fact += 2.0;
        }
    }
    if l == m {
        return pmm;
    }
    let mut pmmp1 = x * (2 * m + 1) as f64 * pmm;
    if l == m + 1 {
        return pmmp1;
    }
    let mut pll = 0.0;
    for ll in (m + 2)..=l {
        pll = (x * (2 * ll - 1) as f64 * pmmp1 - (ll + m - 1) as f64 * pmm) / (ll - m) as f64;
        pmm = pmmp1;
        pmmp1 = pll;
    }
    pll
}

/// Real spherical harmonic of band `l`, order `m`, at unit direction `d`,
/// built from spherical angles.
pub fn real_sh(l: u32, m: i32, d: &Vector3<f64>) -> f64 {
    let theta = d.z.clamp(-1.0, 1.0).acos();
    let phi = d.y.atan2(d.x);
    let am = m.unsigned_abs();
    let k = ((2 * l + 1) as f64 / (4.0 * PI) * factorial(l - am) / factorial(l + am)).sqrt();
    let p = legendre(l, am, theta.cos());
    match m.cmp(&0) {
        std::cmp::Ordering::Equal => k * p,
        std::cmp::Ordering::Greater => 2f64.sqrt() * k * p * (am as f64 * phi).cos(),
        std::cmp::Ordering::Less => 2f64.sqrt() * k * p * (am as f64 * phi).sin(),
    }
}

/// View-dependent color from coefficient-major SH, offset by 0.5.
pub fn sh_color(coeffs: &[f64], d: &Vector3<f64>) -> [f64; 3] {
    let per_channel = coeffs.len() / 3;
    let mut rgb = [0.5; 3];
    let mut k = 0;
    'bands: for l in 0..4u32 {
        for m in -(l as i32)..=(l as i32) {
            if k == per_channel {
                break 'bands;
            }
            let y = real_sh(l, m, d);
            for (c, out) in rgb.iter_mut().enumerate() {
                *out += y * coeffs[3 * k + c];
            }
            k += 1;
        }
    }
    rgb
}

/// Rotation from a unit quaternion written out by components.
pub fn quat_matrix(q: &UnitQuaternion<f64>) -> Matrix3<f64> {
    let (w, x, y, z) = (q.w, q.i, q.j, q.k);
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

struct NaiveSplat {
    index: usize,
    depth: f64,
    mean: (f64, f64),
    conic: (f64, f64, f64),
    opacity: f64,
    color: [f64; 3],
}

pub struct NaiveImage {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<[f64; 3]>,
    pub alpha: Vec<f64>,
}

/// Reference compositor: projects every Gaussian, sorts the whole scene once
/// by `(depth, index)` and walks the full list for every pixel.
pub fn naive_render(scene: &GaussianScene, cam: &CameraModel, background: [f64; 3]) -> NaiveImage {
    let (rot, trans) = cam.world_to_camera();
    let center = cam.center();
    let k = cam.intrinsics;
    let (w, h) = (k.width as f64, k.height as f64);
    let mut splats = Vec::new();
    for (index, g) in scene.gaussians.iter().enumerate() {
        let p = rot * g.mean + trans;
        if p.z <= NEAR {
            continue;
        }
        let opacity = 1.0 / (1.0 + (-g.opacity_logit).exp());
        if opacity * 255.0 <= 1.0 {
            continue;
        }
        let r = quat_matrix(&g.rotation);
        let s2 = Matrix3::from_diagonal(&g.log_scale.map(|v| (2.0 * v).exp()));
        let cov = rot * (r * s2 * r.transpose()) * rot.transpose();
        let (x, y, z) = (p.x, p.y, p.z);
        let jac = nalgebra::Matrix2x3::new(k.fx / z, 0.0, -k.fx * x / (z * z), 0.0, k.fy / z, -k.fy * y / (z * z));
        let c2 = jac * cov * jac.transpose();
        let a = c2[(0, 0)] + DILATION;
        let b = 0.5 * (c2[(0, 1)] + c2[(1, 0)]);
        let c = c2[(1, 1)] + DILATION;
        let det = a * c - b * b;
        if det <= 0.0 {
            continue;
        }
        let mx = k.fx * x / z + k.cx;
        let my = k.fy * y / z + k.cy;
        // 3σ footprint of the major axis
        let half_tr = 0.5 * (a + c);
        let r3 = 3.0 * (half_tr + (half_tr * half_tr - det).max(0.0).sqrt()).sqrt();
        if mx + r3 < 0.0 || mx - r3 > w || my + r3 < 0.0 || my - r3 > h {
            continue;
        }
        let dir = (g.mean - center).normalize();
        let color = sh_color(&g.sh, &dir).map(|v| v.clamp(0.0, 1.0));
        splats.push(NaiveSplat {
            index,
            depth: z,
            mean: (mx, my),
            conic: (c / det, -b / det, a / det),
            opacity,
            color,
        });
    }
    splats.sort_by(|p, q| p.depth.partial_cmp(&q.depth).unwrap().then(p.index.cmp(&q.index)));

    let mut rgb = Vec::with_capacity(k.width * k.height);
    let mut alpha = Vec::with_capacity(k.width * k.height);
    for py in 0..k.height {
        for px in 0..k.width {
            let (fx, fy) = (px as f64 + 0.5, py as f64 + 0.5);
            let mut t = 1.0;
            let mut acc = [0.0; 3];
            for s in &splats {
                let dx = fx - s.mean.0;
                let dy = fy - s.mean.1;
                let q = s.conic.0 * dx * dx + 2.0 * s.conic.1 * dx * dy + s.conic.2 * dy * dy;
                if q < 0.0 {
                    continue;
                }
                let a = (s.opacity * (-0.5 * q).exp()).min(ALPHA_CEIL);
                if a < ALPHA_FLOOR {
                    continue;
                }
                for (acc, c) in acc.iter_mut().zip(s.color) {
                    *acc += c * a * t;
                }
                t *= 1.0 - a;
                if t < T_STOP {
                    break;
                }
            }
            rgb.push([acc[0] + t * background[0], acc[1] + t * background[1], acc[2] + t * background[2]]);
            alpha.push(1.0 - t);
        }
    }
    NaiveImage {
        width: k.width,
        height: k.height,
        rgb,
        alpha,
    }
}

fn rot_z(theta: f64) -> Matrix4<f64> {
    let (s, c) = theta.sin_cos();
    let mut m = Matrix4::identity();
    m[(0, 0)] = c;
    m[(0, 1)] = -s;
    m[(1, 0)] = s;
    m[(1, 1)] = c;
    m
}

fn rot_x(beta: f64) -> Matrix4<f64> {
    let (s, c) = beta.sin_cos();
    let mut m = Matrix4::identity();
    m[(1, 1)] = c;
    m[(1, 2)] = -s;
    m[(2, 1)] = s;
    m[(2, 2)] = c;
    m
}

fn shift(x: f64, y: f64, z: f64) -> Matrix4<f64> {
    let mut m = Matrix4::identity();
    m[(0, 3)] = x;
    m[(1, 3)] = y;
    m[(2, 3)] = z;
    m
}

/// Link matrix as a product of four elementary motions: turn about z, slide
/// along z, slide along x, twist about x.
pub fn link_oracle(j: &MdhJoint, angle: f64) -> Matrix4<f64> {
    rot_z(j.theta_offset + angle) * shift(0.0, 0.0, j.d) * shift(j.a, 0.0, 0.0) * rot_x(j.beta)
}

/// Every cumulative frame by left-to-right multiplication from the base.
pub fn fk_oracle(chain: &MdhChain, state: &JointState) -> Vec<Matrix4<f64>> {
    let mut acc = *chain.base().matrix();
    chain
        .joints()
        .iter()
        .zip(state.angles())
        .map(|(j, &q)| {
            acc *= link_oracle(j, q);
            acc
        })
        .collect()
}

pub fn random_chain<R: Rng>(rng: &mut R) -> (MdhChain, JointState) {
    let n = rng.gen_range(1..=8);
    let joints = (0..n)
        .map(|_| {
            MdhJoint::new(
                rng.gen_range(-PI..=PI),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-PI..PI),
            )
            .unwrap()
        })
        .collect();
    let base = random_rigid(rng, 1.0);
    let chain = MdhChain::new(joints).unwrap().with_base(base).unwrap();
    let state = JointState((0..n).map(|_| rng.gen_range(-2.0 * PI..2.0 * PI)).collect());
    (chain, state)
}

pub fn random_rotation<R: Rng>(rng: &mut R) -> UnitQuaternion<f64> {
    let axis = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    UnitQuaternion::from_scaled_axis(axis.normalize() * rng.gen_range(0.0..PI))
}

pub fn random_rigid<R: Rng>(rng: &mut R, reach: f64) -> SimilarityTransform {
    let t = Vector3::new(
        rng.gen_range(-reach..reach),
        rng.gen_range(-reach..reach),
        rng.gen_range(-reach..reach),
    );
    SimilarityTransform::from_parts(1.0, &random_rotation(rng), t)
}

pub fn random_similarity<R: Rng>(rng: &mut R, reach: f64) -> SimilarityTransform {
    let t = Vector3::new(
        rng.gen_range(-reach..reach),
        rng.gen_range(-reach..reach),
        rng.gen_range(-reach..reach),
    );
    SimilarityTransform::from_parts(rng.gen_range(0.2..5.0), &random_rotation(rng), t)
}

pub fn max_abs(m: &Matrix4<f64>) -> f64 {
    m.abs().max()
}

/// A small render-oracle scene: up to `count` Gaussians in front of a camera
/// looking at the origin.
pub fn oracle_scene(seed: u64, count: usize, size: usize) -> (GaussianScene, CameraModel) {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let degree = [0u8, 1, 3][(seed % 3) as usize];
    let scene = gstwin::synthetic::random_scene(count, degree, Vector3::zeros(), 0.6, seed).unwrap();
    let eye = Vector3::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(1.0..3.0));
    let cam = gstwin::synthetic::camera(size, size, rng.gen_range(40.0..70.0), eye, Vector3::zeros()).unwrap();
    (scene, cam)
}

/// Files for a small labelled UR5 workspace written into `dir`.
pub struct Fixture {
    pub dir: std::path::PathBuf,
    pub chain: MdhChain,
    pub scene: GaussianScene,
    pub camera: CameraModel,
}

impl Fixture {
    pub fn path(&self, name: &str) -> std::path::PathBuf {
        self.dir.join(name)
    }
}

pub fn write_fixture(dir: &std::path::Path, frames: usize) -> Fixture {
    use gstwin::synth::{Trajectory, TrajectoryFrame};
    use gstwin::synthetic::{arm_scene, cube, scene_labels, ur5_chain};

    let chain = ur5_chain();
    let scene = arm_scene(&chain, &chain.zero_state(), 6).unwrap();
    gstwin::splat::save_splat_file(&scene, &dir.join("arm.ply")).unwrap();
    gstwin::splat::save_labels(&scene_labels(&scene), &dir.join("arm.labels")).unwrap();
    std::fs::write(dir.join("ur5.chain"), chain.to_text()).unwrap();
    let camera = gstwin::synthetic::camera(64, 48, 70.0, Vector3::new(1.1, -1.1, 0.8), Vector3::new(0.0, 0.0, 0.3)).unwrap();
    camera.save(&dir.join("camera.json")).unwrap();
    let block = cube(0.08, [0.9, 0.2, 0.2], 4).unwrap();
    gstwin::splat::save_splat_file(&block, &dir.join("cube.ply")).unwrap();

    let rows = (0..frames)
        .map(|k| {
            let s = k as f64 / frames.max(1) as f64;
            let mut objects = std::collections::BTreeMap::new();
            objects.insert(
                "cube".to_string(),
                SimilarityTransform::translation(Vector3::new(0.3 + 0.1 * s, 0.2, 0.04)),
            );
            TrajectoryFrame {
                timestamp: 0.1 * k as f64,
                joints: vec![0.4 * s, -0.6 * s, 0.8 * s, -0.3, 0.2, 0.1 * s],
                objects,
            }
        })
        .collect();
    let traj = Trajectory::new(rows).unwrap();
    std::fs::write(dir.join("traj.jsonl"), traj.to_jsonl().unwrap()).unwrap();

    let job = serde_json::json!({
        "base_scene": "arm.ply",
        "chain": "ur5.chain",
        "labels": "arm.labels",
        "trajectory": "traj.jsonl",
        "cameras": [
            { "id": "front", "fx": camera.intrinsics.fx, "fy": camera.intrinsics.fy,
              "cx": camera.intrinsics.cx, "cy": camera.intrinsics.cy,
              "width": 64, "height": 48, "pose": camera.pose().to_row_major().to_vec() }
        ],
        "orbit": { "center": [0.0, 0.0, 0.3], "radius": 1.4, "elevation_deg": 30.0, "count": 2,
                   "width": 48, "height": 36, "hfov_deg": 70.0 },
        "objects": { "cube": { "scene": "cube.ply", "anchor": [0.0, 0.0, 0.0] } },
        "output_dir": "out"
    });
    std::fs::write(dir.join("job.json"), serde_json::to_string_pretty(&job).unwrap()).unwrap();

    let serve = serde_json::json!({
        "scene": "arm.ply",
        "chain": "ur5.chain",
        "labels": "arm.labels",
        "camera": serde_json::to_value(camera.to_record()).unwrap(),
        "episode": { "budget": 5, "initial": [0.0, -1.2, 0.6, 0.0, 0.0, 0.0], "table_z": -0.01 }
    });
    std::fs::write(dir.join("serve.json"), serde_json::to_string_pretty(&serve).unwrap()).unwrap();

    Fixture {
        dir: dir.to_path_buf(),
        chain,
        scene,
        camera,
    }
}
