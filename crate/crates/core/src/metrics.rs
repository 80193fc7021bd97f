//! Image comparison: L1, PSNR, SSIM and keypoint pixel distance.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::RgbImage;

pub const PSNR_CAP: f64 = 100.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub l1: f64,
    pub psnr: f64,
    pub ssim: f64,
}

pub fn compare(a: &RgbImage, b: &RgbImage) -> Result<MetricReport> {
    check_shape(a, b)?;
    Ok(MetricReport {
        l1: l1(a, b)?,
        psnr: psnr(a, b)?,
        ssim: ssim(a, b)?,
    })
}

fn check_shape(a: &RgbImage, b: &RgbImage) -> Result<()> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "images are {}x{} and {}x{}",
            a.width, a.height, b.width, b.height
        )))
    }
}

pub fn l1(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    check_shape(a, b)?;
    let sum: f64 = a.data.iter().zip(&b.data).map(|(x, y)| (x - y).abs()).sum();
    Ok(sum / a.data.len().max(1) as f64)
}

pub fn mse(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    check_shape(a, b)?;
    let sum: f64 = a.data.iter().zip(&b.data).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sum / a.data.len().max(1) as f64)
}

/// Peak signal-to-noise ratio for a unit peak, capped at [`PSNR_CAP`].
pub fn psnr(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    let m = mse(a, b)?;
    if m <= 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (1.0 / m).log10()).min(PSNR_CAP))
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - half;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.map(|v| v / s)
}

/// Separable valid-mode filter of a single plane.
fn filter_valid(plane: &[f64], width: usize, height: usize, k: &[f64; SSIM_WINDOW]) -> (Vec<f64>, usize, usize) {
    let ow = width - SSIM_WINDOW + 1;
    let oh = height - SSIM_WINDOW + 1;
    let mut rows = vec![0.0; ow * height];
    for y in 0..height {
        for x in 0..ow {
            let src = &plane[y * width + x..y * width + x + SSIM_WINDOW];
            rows[y * ow + x] = src.iter().zip(k).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..SSIM_WINDOW).map(|i| rows[(y + i) * ow + x] * k[i]).sum();
        }
    }
    (out, ow, oh)
}

/// Mean SSIM over an 11×11 Gaussian window (σ = 1.5), averaged over
/// channels. Identical inputs give exactly 1.
pub fn ssim(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    check_shape(a, b)?;
    if a.width < SSIM_WINDOW || a.height < SSIM_WINDOW {
        return Err(Error::Dimension(format!(
            "ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {}x{}",
            a.width, a.height
        )));
    }
    let k = gaussian_window();
    let (w, h) = (a.width, a.height);
    let per_channel: Vec<f64> = (0..3)
        .into_par_iter()
        .map(|c| {
            let pa: Vec<f64> = a.data.iter().skip(c).step_by(3).copied().collect();
            let pb: Vec<f64> = b.data.iter().skip(c).step_by(3).copied().collect();
            let prod = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(p, q)| p * q).collect() };
            let (mu_a, ..) = filter_valid(&pa, w, h, &k);
            let (mu_b, ..) = filter_valid(&pb, w, h, &k);
            let (e_aa, ..) = filter_valid(&prod(&pa, &pa), w, h, &k);
            let (e_bb, ..) = filter_valid(&prod(&pb, &pb), w, h, &k);
            let (e_ab, ..) = filter_valid(&prod(&pa, &pb), w, h, &k);
            let n = mu_a.len();
            let mut sum = 0.0;
            for i in 0..n {
                let (ma, mb) = (mu_a[i], mu_b[i]);
                let var_a = e_aa[i] - ma * ma;
                let var_b = e_bb[i] - mb * mb;
                let cov = e_ab[i] - ma * mb;
                let num = (2.0 * (ma * mb) + SSIM_C1) * (2.0 * cov + SSIM_C2);
                let den = (ma * ma + mb * mb + SSIM_C1) * (var_a + var_b + SSIM_C2);
                sum += num / den;
            }
            sum / n as f64
        })
        .collect();
    Ok(per_channel.iter().sum::<f64>() / 3.0)
}

/// Per-pixel `|a − b|`.
pub fn diff_image(a: &RgbImage, b: &RgbImage) -> Result<RgbImage> {
    check_shape(a, b)?;
    Ok(RgbImage {
        width: a.width,
        height: a.height,
        data: a.data.iter().zip(&b.data).map(|(x, y)| (x - y).abs()).collect(),
    })
}

/// Mean Euclidean distance between corresponding annotated points.
pub fn keypoint_distance(a: &[[f64; 2]], b: &[[f64; 2]]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Dimension(format!(
            "need equal non-empty point lists, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let sum: f64 = a
        .iter()
        .zip(b)
        .map(|(p, q)| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt())
        .sum();
    Ok(sum / a.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameMetrics {
    pub name: String,
    #[serde(flatten)]
    pub metrics: MetricReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceReport {
    pub frames: Vec<FrameMetrics>,
    pub mean: MetricReport,
}

impl SequenceReport {
    pub fn to_table(&self) -> String {
        let mut out = format!("{:<32} {:>10} {:>10} {:>8}\n", "frame", "l1", "psnr", "ssim");
        for f in &self.frames {
            out.push_str(&format!(
                "{:<32} {:>10.6} {:>10.3} {:>8.4}\n",
                f.name, f.metrics.l1, f.metrics.psnr, f.metrics.ssim
            ));
        }
        out.push_str(&format!(
            "{:<32} {:>10.6} {:>10.3} {:>8.4}\n",
            "mean", self.mean.l1, self.mean.psnr, self.mean.ssim
        ));
        out
    }
}

fn png_names(dir: &Path) -> Result<BTreeSet<String>> {
    let mut names = BTreeSet::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.to_ascii_lowercase().ends_with(".png") {
            names.insert(name);
        }
    }
    Ok(names)
}

/// Compares same-named PNG frames in two directories. Writes `|a − b|`
/// images into `diff_dir` when given.
pub fn compare_sequence(dir_a: &Path, dir_b: &Path, diff_dir: Option<&Path>) -> Result<SequenceReport> {
    let names_a = png_names(dir_a)?;
    let names_b = png_names(dir_b)?;
    if names_a != names_b {
        let only_a: Vec<&String> = names_a.difference(&names_b).collect();
        let only_b: Vec<&String> = names_b.difference(&names_a).collect();
        return Err(Error::Dimension(format!(
            "frame sets differ; missing from {}: {:?}; missing from {}: {:?}",
            dir_b.display(),
            only_a,
            dir_a.display(),
            only_b
        )));
    }
    if names_a.is_empty() {
        return Err(Error::Dimension(format!("no png frames in {}", dir_a.display())));
    }
    if let Some(d) = diff_dir {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let names: Vec<String> = names_a.into_iter().collect();
    let frames: Vec<FrameMetrics> = names
        .par_iter()
        .map(|name| {
            let a = RgbImage::load_png(&dir_a.join(name))?;
            let b = RgbImage::load_png(&dir_b.join(name))?;
            let metrics = compare(&a, &b)?;
            if let Some(d) = diff_dir {
                diff_image(&a, &b)?.save_png(&PathBuf::from(d).join(name))?;
            }
            Ok(FrameMetrics {
                name: name.clone(),
                metrics,
            })
        })
        .collect::<Result<_>>()?;
    let n = frames.len() as f64;
    let mean = MetricReport {
        l1: frames.iter().map(|f| f.metrics.l1).sum::<f64>() / n,
        psnr: frames.iter().map(|f| f.metrics.psnr).sum::<f64>() / n,
        ssim: frames.iter().map(|f| f.metrics.ssim).sum::<f64>() / n,
    };
    Ok(SequenceReport { frames, mean })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize) -> RgbImage {
        let mut img = RgbImage::new(w, h);
        for y in 0..h {
            for x in 0..w {
                let v = 0.9 * ((x * 7 + y * 13) % 29) as f64 / 28.0;
                img.set_pixel(x, y, [v, 0.9 - v, 0.45]);
            }
        }
        img
    }

    #[test]
    fn identical_images() {
        let a = ramp(24, 20);
        let r = compare(&a, &a).unwrap();
        assert_eq!(r, MetricReport { l1: 0.0, psnr: 100.0, ssim: 1.0 });
    }

    #[test]
    fn uniform_bias_gives_twenty_db() {
        let a = ramp(24, 20);
        let mut b = a.clone();
        b.data.iter_mut().for_each(|v| *v += 0.1);
        assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 0.01);
        assert!((l1(&a, &b).unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn window_is_normalized() {
        let w = gaussian_window();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(w[0], w[10]);
    }

    #[test]
    fn small_images_and_mismatch_fail() {
        assert!(ssim(&ramp(10, 20), &ramp(10, 20)).is_err());
        assert!(compare(&ramp(12, 12), &ramp(13, 12)).is_err());
    }

    #[test]
    fn keypoints() {
        let d = keypoint_distance(&[[0.0, 0.0], [1.0, 1.0]], &[[3.0, 4.0], [1.0, 1.0]]).unwrap();
        assert_eq!(d, 2.5);
        assert!(keypoint_distance(&[], &[]).is_err());
    }
}
