//! Scores a degraded render against a clean one with L1, PSNR and SSIM.

use gstwin::metrics::{compare, diff_image};
use gstwin::render::render;
use gstwin::synthetic::{camera, textured_scene};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> gstwin::Result<()> {
    let scene = textured_scene(10_000, 5)?;
    let cam = camera(160, 120, 60.0, Vector3::new(0.45, -0.55, 0.5), Vector3::new(0.0, 0.0, 0.03))?;
    let clean = render(&scene, &cam).rgb;

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for sigma in [0.0, 0.01, 0.05, 0.1] {
        let mut noisy = clean.clone();
        for v in noisy.data.iter_mut() {
            *v = (*v + sigma * rng.gen_range(-1.0..1.0)).clamp(0.0, 1.0);
        }
        let m = compare(&clean, &noisy)?;
        println!("noise {sigma:>4}: L1 {:.4}  PSNR {:6.2} dB  SSIM {:.4}", m.l1, m.psnr, m.ssim);
    }

    // a slightly moved camera, the usual sim-to-real style comparison
    let moved = camera(160, 120, 60.0, Vector3::new(0.452, -0.548, 0.5), Vector3::new(0.0, 0.0, 0.03))?;
    let other = render(&scene, &moved).rgb;
    let m = compare(&clean, &other)?;
    let diff = diff_image(&clean, &other)?;
    let path = std::env::temp_dir().join("gstwin-diff.png");
    diff.save_png(&path)?;
    println!("2 mm camera shift: PSNR {:.2} dB, SSIM {:.4}, diff at {}", m.psnr, m.ssim, path.display());
    Ok(())
}
