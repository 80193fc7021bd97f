//! Real spherical-harmonic color evaluation in the layout used by 3DGS
//! training code (degree ≤ 3, Condon-Shortley phase folded into the
//! constants, `+0.5` DC offset).

use nalgebra::Vector3;

pub const SH_C0: f64 = 0.282_094_791_773_878_14;
pub const SH_C1: f64 = 0.488_602_511_902_919_9;
pub const SH_C2: [f64; 5] = [
    1.092_548_430_592_079_2,
    -1.092_548_430_592_079_2,
    0.315_391_565_252_520_05,
    -1.092_548_430_592_079_2,
    0.546_274_215_296_039_6,
];
pub const SH_C3: [f64; 7] = [
    -0.590_043_589_926_643_5,
    2.890_611_442_640_554,
    -0.457_045_799_464_465_8,
    0.373_176_332_590_115_4,
    -0.457_045_799_464_465_8,
    1.445_305_721_320_277,
    -0.590_043_589_926_643_5,
];

/// Number of SH coefficients per channel for a degree.
pub const fn coeffs_per_channel(degree: u8) -> usize {
    let d = degree as usize + 1;
    d * d
}

/// Inverse of [`coeffs_per_channel`]; `None` for counts that are not a
/// supported square.
pub fn degree_for_coeffs(per_channel: usize) -> Option<u8> {
    match per_channel {
        1 => Some(0),
        4 => Some(1),
        9 => Some(2),
        16 => Some(3),
        _ => None,
    }
}

/// Basis values `Y_k(dir)` for `k < (degree+1)²`, written into `out`.
pub fn basis(degree: u8, dir: &Vector3<f64>, out: &mut [f64; 16]) {
    let (x, y, z) = (dir.x, dir.y, dir.z);
    out[0] = SH_C0;
    if degree == 0 {
        return;
    }
    out[1] = -SH_C1 * y;
    out[2] = SH_C1 * z;
    out[3] = -SH_C1 * x;
    if degree == 1 {
        return;
    }
    let (xx, yy, zz) = (x * x, y * y, z * z);
    let (xy, yz, xz) = (x * y, y * z, x * z);
    out[4] = SH_C2[0] * xy;
    out[5] = SH_C2[1] * yz;
    out[6] = SH_C2[2] * (2.0 * zz - xx - yy);
    out[7] = SH_C2[3] * xz;
    out[8] = SH_C2[4] * (xx - yy);
    if degree == 2 {
        return;
    }
    out[9] = SH_C3[0] * y * (3.0 * xx - yy);
    out[10] = SH_C3[1] * xy * z;
    out[11] = SH_C3[2] * y * (4.0 * zz - xx - yy);
    out[12] = SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
    out[13] = SH_C3[4] * x * (4.0 * zz - xx - yy);
    out[14] = SH_C3[5] * z * (xx - yy);
    out[15] = SH_C3[6] * x * (xx - 3.0 * yy);
}

/// Evaluates coefficient-major SH (`coeffs[3k + c]`) at `dir`, adding 0.5.
pub fn evaluate(coeffs: &[f64], dir: &Vector3<f64>) -> [f64; 3] {
    let per_channel = coeffs.len() / 3;
    let degree = degree_for_coeffs(per_channel).expect("sh coefficient count");
    let mut y = [0.0; 16];
    basis(degree, dir, &mut y);
    let mut rgb = [0.5; 3];
    for (k, yk) in y.iter().take(per_channel).enumerate() {
        for (c, out) in rgb.iter_mut().enumerate() {
            *out += yk * coeffs[3 * k + c];
        }
    }
    rgb
}

/// DC coefficient that produces `color` for a degree-0 Gaussian.
pub fn dc_from_color(color: f64) -> f64 {
    (color - 0.5) / SH_C0
}
