//! Tile-based software rasterizer for Gaussian scenes.
//!
//! Gaussians are projected with the local affine (EWA) approximation, sorted
//! front to back by camera depth (ties broken by scene index), binned into
//! 16×16 tiles and alpha-composited per pixel:
//!
//! ```text
//! C = Σᵢ cᵢ αᵢ Πⱼ<ᵢ (1 − αⱼ),   αᵢ = oᵢ · exp(−½ δᵢᵀ Σ₂D⁻¹ δᵢ)
//! ```

mod camera;

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::raster::{Mask, RgbImage, ScalarImage};
use crate::splat::{Gaussian, GaussianScene};

pub use camera::{look_at_pose, CameraModel, CameraRecord, Intrinsics};

pub const TILE_SIZE: usize = 16;
/// Added to the diagonal of every projected covariance, px².
pub const COV2D_DILATION: f64 = 0.3;
pub const NEAR_PLANE: f64 = 0.01;
pub const ALPHA_MIN: f64 = 1.0 / 255.0;
pub const ALPHA_MAX: f64 = 0.99;
pub const TRANSMITTANCE_MIN: f64 = 1e-4;
/// Slack, in pixels, on each side of a per-row ellipse span.
const SPAN_PAD: f64 = 1e-3;

/// Screen-space footprint of one Gaussian.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplatFragment {
    /// Index of the source Gaussian in its scene.
    pub index: u32,
    pub mean2d: Vector2<f64>,
    pub cov2d: Matrix2<f64>,
    /// Upper triangle `(a, b, c)` of `cov2d⁻¹`.
    pub conic: [f64; 3],
    pub depth: f64,
    pub opacity: f64,
    pub color: [f64; 3],
    /// Inclusive pixel range `[x0, x1] × [y0, y1]` where α can reach 1/255.
    pub pixel_rect: [u32; 4],
}

/// Per-camera constants shared by every projection.
struct Projector {
    rot: Matrix3<f64>,
    trans: Vector3<f64>,
    center: Vector3<f64>,
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: f64,
    height: f64,
}

impl Projector {
    fn new(cam: &CameraModel) -> Self {
        let (rot, trans) = cam.world_to_camera();
        let k = cam.intrinsics;
        Self {
            rot,
            trans,
            center: cam.center(),
            fx: k.fx,
            fy: k.fy,
            cx: k.cx,
            cy: k.cy,
            width: k.width as f64,
            height: k.height as f64,
        }
    }

    fn project(&self, g: &Gaussian, index: u32) -> Option<SplatFragment> {
        let p = self.rot * g.mean + self.trans;
        let z = p.z;
        if !(z > NEAR_PLANE) {
            return None;
        }
        let opacity = g.opacity();
        // α never reaches 1/255 anywhere
        if !(opacity * 255.0 > 1.0) {
            return None;
        }
        let inv_z = 1.0 / z;
        let mean2d = Vector2::new(self.fx * p.x * inv_z + self.cx, self.fy * p.y * inv_z + self.cy);

        let cov_cam = self.rot * g.covariance() * self.rot.transpose();
        let j = nalgebra::Matrix2x3::new(
            self.fx * inv_z,
            0.0,
            -self.fx * p.x * inv_z * inv_z,
            0.0,
            self.fy * inv_z,
            -self.fy * p.y * inv_z * inv_z,
        );
        let mut cov2d = j * cov_cam * j.transpose();
        cov2d[(0, 1)] = 0.5 * (cov2d[(0, 1)] + cov2d[(1, 0)]);
        cov2d[(1, 0)] = cov2d[(0, 1)];
        cov2d[(0, 0)] += COV2D_DILATION;
        cov2d[(1, 1)] += COV2D_DILATION;

        let (a, b, c) = (cov2d[(0, 0)], cov2d[(0, 1)], cov2d[(1, 1)]);
        let det = a * c - b * b;
        if !(det > 0.0) || !det.is_finite() {
            return None;
        }
        let mid = 0.5 * (a + c);
        let lambda_max = mid + (mid * mid - det).max(0.0).sqrt();
        let r3 = 3.0 * lambda_max.sqrt();
        if mean2d.x + r3 < 0.0
            || mean2d.x - r3 > self.width
            || mean2d.y + r3 < 0.0
            || mean2d.y - r3 > self.height
        {
            return None;
        }

        // Mahalanobis radius where o·exp(−½m²) = 1/255, padded slightly so the
        // rectangle is conservative against rounding.
        let m = (2.0 * (255.0 * opacity).ln()).sqrt();
        let ex = m * a.sqrt() + 1e-3;
        let ey = m * c.sqrt() + 1e-3;
        let x0 = (mean2d.x - ex - 0.5).ceil().max(0.0);
        let x1 = (mean2d.x + ex - 0.5).floor().min(self.width - 1.0);
        let y0 = (mean2d.y - ey - 0.5).ceil().max(0.0);
        let y1 = (mean2d.y + ey - 0.5).floor().min(self.height - 1.0);
        if x0 > x1 || y0 > y1 {
            return None;
        }

        let dir = (g.mean - self.center).normalize();
        let color = g.color(&dir).map(|v| v.clamp(0.0, 1.0));
        Some(SplatFragment {
            index,
            mean2d,
            cov2d,
            conic: [c / det, -b / det, a / det],
            depth: z,
            opacity,
            color,
            pixel_rect: [x0 as u32, x1 as u32, y0 as u32, y1 as u32],
        })
    }
}

/// Projects one Gaussian; `None` when culled (behind the near plane, 3σ
/// footprint outside the image, or never reaching α = 1/255 on a pixel).
pub fn project_gaussian(g: &Gaussian, cam: &CameraModel) -> Option<SplatFragment> {
    Projector::new(cam).project(g, 0)
}

#[inline(always)]
fn eval_alpha(frag: &SplatFragment, px: f64, py: f64) -> f64 {
    let dx = px - frag.mean2d.x;
    let dy = py - frag.mean2d.y;
    let [a, b, c] = frag.conic;
    let power = -0.5 * (a * dx * dx + c * dy * dy) - b * dx * dy;
    if power > 0.0 {
        return 0.0;
    }
    let alpha = (frag.opacity * power.exp()).min(ALPHA_MAX);
    if alpha < ALPHA_MIN {
        0.0
    } else {
        alpha
    }
}

/// Fragment opacity at a pixel position (pixel centers sit at `x + 0.5`).
/// Returns 0 below the 1/255 cutoff and caps at 0.99.
pub fn alpha_of(frag: &SplatFragment, pixel: &Vector2<f64>) -> f64 {
    debug_assert!(frag.cov2d.determinant() > 0.0);
    eval_alpha(frag, pixel.x, pixel.y)
}

/// Front-to-back compositing state for one pixel.
#[derive(Clone, Copy, Debug)]
pub struct PixelAccumulator {
    pub transmittance: f64,
    pub color: [f64; 3],
    pub depth: f64,
}

impl Default for PixelAccumulator {
    fn default() -> Self {
        Self {
            transmittance: 1.0,
            color: [0.0; 3],
            depth: 0.0,
        }
    }
}

impl PixelAccumulator {
    /// Adds a fragment behind everything added so far. Returns `false` once
    /// the pixel is saturated and further fragments are ignored.
    #[inline(always)]
    pub fn add(&mut self, color: [f64; 3], alpha: f64, depth: f64) -> bool {
        let w = alpha * self.transmittance;
        self.color[0] += color[0] * w;
        self.color[1] += color[1] * w;
        self.color[2] += color[2] * w;
        self.depth += depth * w;
        self.transmittance *= 1.0 - alpha;
        self.transmittance >= TRANSMITTANCE_MIN
    }

    /// `(rgb, expected depth, accumulated alpha)` over `background`.
    pub fn finish(&self, background: [f64; 3]) -> ([f64; 3], f64, f64) {
        let t = self.transmittance;
        let rgb = [
            self.color[0] + t * background[0],
            self.color[1] + t * background[1],
            self.color[2] + t * background[2],
        ];
        let alpha = 1.0 - t;
        let depth = if alpha > 0.0 { self.depth / alpha } else { 0.0 };
        (rgb, depth, alpha)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenderOutput {
    pub rgb: RgbImage,
    /// Alpha-weighted expected depth; 0 where nothing was hit.
    pub depth: ScalarImage,
    pub alpha: ScalarImage,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenderOptions {
    pub background: [f64; 3],
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self { background: [0.0; 3] }
    }
}

/// Projects every Gaussian and returns the visible fragments sorted by
/// `(depth, index)`.
pub fn project_scene(scene: &GaussianScene, cam: &CameraModel) -> Vec<SplatFragment> {
    let projector = Projector::new(cam);
    let mut frags: Vec<SplatFragment> = scene
        .gaussians
        .par_iter()
        .enumerate()
        .filter_map(|(i, g)| projector.project(g, i as u32))
        .collect();
    frags.par_sort_unstable_by(|a, b| a.depth.total_cmp(&b.depth).then(a.index.cmp(&b.index)));
    frags
}

pub fn render(scene: &GaussianScene, cam: &CameraModel) -> RenderOutput {
    render_with(scene, cam, &RenderOptions::default())
}

pub fn render_with(scene: &GaussianScene, cam: &CameraModel, opts: &RenderOptions) -> RenderOutput {
    let frags = project_scene(scene, cam);
    composite_tiles(&frags, cam.width(), cam.height(), opts)
}

/// Fields the compositor touches, packed for cache locality.
#[derive(Clone, Copy)]
struct Blend {
    mean: [f64; 2],
    conic: [f64; 3],
    opacity: f64,
    /// Inflated squared Mahalanobis radius where α drops to 1/255.
    m2: f64,
    color: [f64; 3],
    depth: f64,
    rect: [u32; 4],
}

impl Blend {
    fn new(f: &SplatFragment) -> Self {
        Self {
            mean: [f.mean2d.x, f.mean2d.y],
            conic: f.conic,
            opacity: f.opacity,
            m2: 2.0 * (255.0 * f.opacity).ln() * (1.0 + 1e-7) + 1e-9,
            color: f.color,
            depth: f.depth,
            rect: f.pixel_rect,
        }
    }
}

struct TileOutput {
    x0: usize,
    y0: usize,
    w: usize,
    h: usize,
    rgb: Vec<f64>,
    depth: Vec<f64>,
    alpha: Vec<f64>,
}

fn composite_tiles(frags: &[SplatFragment], width: usize, height: usize, opts: &RenderOptions) -> RenderOutput {
    let tiles_x = width.div_ceil(TILE_SIZE);
    let tiles_y = height.div_ceil(TILE_SIZE);
    let n_tiles = tiles_x * tiles_y;

    // Bin fragment indices per tile; fragments are already depth-sorted, so
    // each tile list inherits the order.
    let tile_range = |f: &SplatFragment| {
        let [x0, x1, y0, y1] = f.pixel_rect;
        (
            x0 as usize / TILE_SIZE,
            x1 as usize / TILE_SIZE,
            y0 as usize / TILE_SIZE,
            y1 as usize / TILE_SIZE,
        )
    };
    let mut counts = vec![0u32; n_tiles + 1];
    for f in frags {
        let (tx0, tx1, ty0, ty1) = tile_range(f);
        for ty in ty0..=ty1 {
            for tx in tx0..=tx1 {
                counts[ty * tiles_x + tx + 1] += 1;
            }
        }
    }
    for i in 1..=n_tiles {
        counts[i] += counts[i - 1];
    }
    let offsets = counts;
    let mut cursor: Vec<u32> = offsets[..n_tiles].to_vec();
    let mut lists = vec![0u32; offsets[n_tiles] as usize];
    for (fi, f) in frags.iter().enumerate() {
        let (tx0, tx1, ty0, ty1) = tile_range(f);
        for ty in ty0..=ty1 {
            for tx in tx0..=tx1 {
                let t = ty * tiles_x + tx;
                lists[cursor[t] as usize] = fi as u32;
                cursor[t] += 1;
            }
        }
    }

    let blends: Vec<Blend> = frags.par_iter().map(Blend::new).collect();
    let tiles: Vec<TileOutput> = (0..n_tiles)
        .into_par_iter()
        .map(|t| {
            let (tx, ty) = (t % tiles_x, t / tiles_x);
            let list = &lists[offsets[t] as usize..offsets[t + 1] as usize];
            render_tile(&blends, list, tx * TILE_SIZE, ty * TILE_SIZE, width, height, opts)
        })
        .collect();

    let mut rgb = RgbImage::new(width, height);
    let mut depth = ScalarImage::new(width, height);
    let mut alpha = ScalarImage::new(width, height);
    for tile in tiles {
        for ly in 0..tile.h {
            let y = tile.y0 + ly;
            let row = y * width + tile.x0;
            let src = ly * tile.w;
            rgb.data[3 * row..3 * (row + tile.w)].copy_from_slice(&tile.rgb[3 * src..3 * (src + tile.w)]);
            depth.data[row..row + tile.w].copy_from_slice(&tile.depth[src..src + tile.w]);
            alpha.data[row..row + tile.w].copy_from_slice(&tile.alpha[src..src + tile.w]);
        }
    }
    RenderOutput { rgb, depth, alpha }
}

fn render_tile(
    frags: &[Blend],
    list: &[u32],
    x0: usize,
    y0: usize,
    width: usize,
    height: usize,
    opts: &RenderOptions,
) -> TileOutput {
    let w = TILE_SIZE.min(width - x0);
    let h = TILE_SIZE.min(height - y0);
    let mut acc = [PixelAccumulator::default(); TILE_SIZE * TILE_SIZE];
    let mut open = [true; TILE_SIZE * TILE_SIZE];
    let mut row_open = [w; TILE_SIZE];
    let mut remaining = w * h;

    for &fi in list {
        let f = &frags[fi as usize];
        let [rx0, rx1, ry0, ry1] = f.rect;
        let lx0 = (rx0 as usize).max(x0) - x0;
        let lx1 = (rx1 as usize).min(x0 + w - 1) - x0;
        let ly0 = (ry0 as usize).max(y0) - y0;
        let ly1 = (ry1 as usize).min(y0 + h - 1) - y0;
        // Per row, only pixels inside the ellipse where α can reach 1/255
        // are visited; the bound is inflated so no such pixel is skipped.
        let [a, b, c] = f.conic;
        let [mx, my] = f.mean;
        let m2 = f.m2;
        let inv_a = 1.0 / a;
        // row_open is decremented inside the loop
        #[allow(clippy::needless_range_loop)]
        for ly in ly0..=ly1 {
            if row_open[ly] == 0 {
                continue;
            }
            let py = (y0 + ly) as f64 + 0.5;
            let dy = py - my;
            let disc = (b * dy) * (b * dy) - a * (c * dy * dy - m2);
            if disc < 0.0 {
                continue;
            }
            let root = disc.sqrt();
            let lo = mx + (-b * dy - root) * inv_a - 0.5 - SPAN_PAD;
            let hi = mx + (-b * dy + root) * inv_a - 0.5 + SPAN_PAD;
            let sx0 = (lo.ceil().max((x0 + lx0) as f64)) as usize - x0;
            let sx1 = hi.floor().min((x0 + lx1) as f64);
            if sx1 < (x0 + sx0) as f64 {
                continue;
            }
            let sx1 = sx1 as usize - x0;
            for lx in sx0..=sx1 {
                let k = ly * TILE_SIZE + lx;
                if !open[k] {
                    continue;
                }
                let dx = (x0 + lx) as f64 + 0.5 - mx;
                let power = -0.5 * (a * dx * dx + c * dy * dy) - b * dx * dy;
                if power > 0.0 || -2.0 * power > m2 {
                    continue;
                }
                let alpha = (f.opacity * power.exp()).min(ALPHA_MAX);
                if alpha < ALPHA_MIN {
                    continue;
                }
                if !acc[k].add(f.color, alpha, f.depth) {
                    open[k] = false;
                    row_open[ly] -= 1;
                    remaining -= 1;
                }
            }
        }
        if remaining == 0 {
            break;
        }
    }

    let mut out = TileOutput {
        x0,
        y0,
        w,
        h,
        rgb: vec![0.0; 3 * w * h],
        depth: vec![0.0; w * h],
        alpha: vec![0.0; w * h],
    };
    for ly in 0..h {
        for lx in 0..w {
            let (rgb, d, a) = acc[ly * TILE_SIZE + lx].finish(opts.background);
            let i = ly * w + lx;
            out.rgb[3 * i..3 * i + 3].copy_from_slice(&rgb);
            out.depth[i] = d;
            out.alpha[i] = a;
        }
    }
    out
}

/// Pixels whose accumulated opacity exceeds `alpha_threshold`.
pub fn render_mask(scene: &GaussianScene, cam: &CameraModel, alpha_threshold: f64) -> Result<Mask> {
    if !(alpha_threshold > 0.0 && alpha_threshold < 1.0) {
        return Err(Error::Config(format!(
            "mask threshold must lie in (0, 1), got {alpha_threshold}"
        )));
    }
    let out = render(scene, cam);
    Ok(mask_from_alpha(&out.alpha, alpha_threshold))
}

pub fn mask_from_alpha(alpha: &ScalarImage, threshold: f64) -> Mask {
    Mask {
        width: alpha.width,
        height: alpha.height,
        data: alpha.data.iter().map(|&a| a > threshold).collect(),
    }
}
