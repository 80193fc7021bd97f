//! Times full-frame renders of a large random scene.
//!
//! `cargo run --release --example render_throughput -- [gaussians] [width] [height]`

use std::time::Instant;

use gstwin::render::render;
use gstwin::synthetic::{camera, random_scene};
use nalgebra::Vector3;

fn main() -> gstwin::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let count = args.first().copied().unwrap_or(100_000);
    let (w, h) = (args.get(1).copied().unwrap_or(640), args.get(2).copied().unwrap_or(480));
    let scene = random_scene(count, 3, Vector3::zeros(), 1.0, 42)?;
    let cam = camera(w, h, 60.0, Vector3::new(2.5, -2.5, 1.5), Vector3::zeros())?;
    render(&scene, &cam);
    let runs = 5;
    let mut times = Vec::new();
    for _ in 0..runs {
        let t = Instant::now();
        let out = render(&scene, &cam);
        times.push(t.elapsed().as_secs_f64() * 1e3);
        std::hint::black_box(out);
    }
    times.sort_by(f64::total_cmp);
    println!(
        "{count} gaussians at {w}x{h} on {} threads: median {:.1} ms (min {:.1}, max {:.1})",
        rayon::current_num_threads(),
        times[runs / 2],
        times[0],
        times[runs - 1]
    );
    Ok(())
}
