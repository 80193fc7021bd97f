//! Binary little-endian PLY in the standard 3DGS property layout:
//!
//! ```text
//! x y z nx ny nz f_dc_0..2 f_rest_0..(R-1) opacity scale_0..2 rot_0..3
//! ```
//!
//! with `R = 3·((D+1)² − 1)` for SH degree `D ∈ 0..=3`. All properties are
//! `float`. `f_rest` is channel-major (all red coefficients, then green, then
//! blue); in memory the coefficients are stored coefficient-major.

use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};

use super::{sh, FrameId, Gaussian, GaussianScene};
use crate::error::{Error, Result};

/// Quaternions closer than this to unit norm are kept bit-for-bit.
const QUAT_NORM_TOL: f64 = 1e-6;

pub fn load_splat_file(path: &Path) -> Result<GaussianScene> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_splat(&bytes)
}

pub fn save_splat_file(scene: &GaussianScene, path: &Path) -> Result<()> {
    let bytes = write_splat(scene)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn expected_names(rest: usize) -> Vec<String> {
    let mut names: Vec<String> = ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    names.extend((0..rest).map(|i| format!("f_rest_{i}")));
    names.push("opacity".into());
    names.extend((0..3).map(|i| format!("scale_{i}")));
    names.extend((0..4).map(|i| format!("rot_{i}")));
    names
}

fn rest_count(degree: u8) -> usize {
    3 * (sh::coeffs_per_channel(degree) - 1)
}

struct Header {
    vertex_count: usize,
    degree: u8,
    body_offset: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    const END: &[u8] = b"end_header\n";
    let end = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| Error::Header {
            line: 1 + bytes.iter().filter(|&&b| b == b'\n').count(),
            message: "missing end_header".into(),
        })?;
    let body_offset = end + END.len();
    let text = std::str::from_utf8(&bytes[..end]).map_err(|_| Error::Header {
        line: 1,
        message: "header is not valid ASCII".into(),
    })?;

    let mut vertex_count = None;
    // (line number, property name)
    let mut properties: Vec<(usize, String)> = Vec::new();
    let mut saw_magic = false;
    let mut saw_format = false;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let fields: Vec<&str> = raw.split_whitespace().collect();
        let bad = |message: String| Error::Header { line, message };
        if !saw_magic {
            if fields != ["ply"] {
                return Err(bad(format!("expected 'ply', found {raw:?}")));
            }
            saw_magic = true;
            continue;
        }
        match fields.first().copied() {
            None => return Err(bad("empty header line".into())),
            Some("comment") | Some("obj_info") => {}
            Some("format") => {
                if fields.get(1) != Some(&"binary_little_endian") || fields.get(2) != Some(&"1.0") {
                    return Err(bad(format!("unsupported format {raw:?}")));
                }
                saw_format = true;
            }
            Some("element") => {
                if fields.len() != 3 {
                    return Err(bad(format!("malformed element line {raw:?}")));
                }
                if fields[1] != "vertex" || vertex_count.is_some() {
                    return Err(Error::UnsupportedLayout(format!(
                        "unexpected element {:?} on header line {line}",
                        fields[1]
                    )));
                }
                let n: usize = fields[2]
                    .parse()
                    .map_err(|_| bad(format!("invalid vertex count {:?}", fields[2])))?;
                vertex_count = Some(n);
            }
            Some("property") => {
                if vertex_count.is_none() {
                    return Err(bad("property before element declaration".into()));
                }
                if fields.len() != 3 {
                    return Err(bad(format!("malformed property line {raw:?}")));
                }
                if fields[1] != "float" && fields[1] != "float32" {
                    return Err(bad(format!("property {} has type {}, expected float", fields[2], fields[1])));
                }
                properties.push((line, fields[2].to_string()));
            }
            Some(other) => return Err(bad(format!("unknown header keyword {other:?}"))),
        }
    }
    if !saw_magic {
        return Err(Error::Header {
            line: 1,
            message: "empty header".into(),
        });
    }
    if !saw_format {
        return Err(Error::Header {
            line: 2,
            message: "missing format line".into(),
        });
    }
    let vertex_count = vertex_count.ok_or(Error::Header {
        line: 2,
        message: "missing 'element vertex' line".into(),
    })?;

    let fixed = 17;
    let rest = properties.len().checked_sub(fixed).ok_or_else(|| {
        Error::UnsupportedLayout(format!("{} properties, expected at least {fixed}", properties.len()))
    })?;
    let degree = (0..=3u8).find(|&d| rest_count(d) == rest).ok_or_else(|| {
        Error::UnsupportedLayout(format!("{rest} f_rest properties do not match any SH degree 0..=3"))
    })?;
    for ((line, name), want) in properties.iter().zip(expected_names(rest)) {
        if *name != want {
            return Err(Error::Header {
                line: *line,
                message: format!("expected property {want}, found {name}"),
            });
        }
    }
    Ok(Header {
        vertex_count,
        degree,
        body_offset,
    })
}

/// Parses a splat file held in memory.
pub fn read_splat(bytes: &[u8]) -> Result<GaussianScene> {
    let header = parse_header(bytes)?;
    let per_channel = sh::coeffs_per_channel(header.degree);
    let rest = rest_count(header.degree);
    let stride = 4 * (17 + rest);
    let body = &bytes[header.body_offset..];
    let needed = header
        .vertex_count
        .checked_mul(stride)
        .ok_or_else(|| Error::UnsupportedLayout("vertex count overflows".into()))?;
    if body.len() < needed {
        // offset of the first vertex that cannot be read completely
        let complete = body.len() / stride;
        return Err(Error::Truncated {
            offset: header.body_offset + complete * stride,
            expected: header.body_offset + needed,
        });
    }

    let mut scene = GaussianScene::new(header.degree, FrameId::Gs);
    scene.gaussians.reserve(header.vertex_count);
    let mut values = vec![0f32; 17 + rest];
    for i in 0..header.vertex_count {
        let rec = &body[i * stride..(i + 1) * stride];
        for (v, chunk) in values.iter_mut().zip(rec.chunks_exact(4)) {
            *v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        }
        let f = |k: usize| values[k] as f64;
        let mut coeffs = vec![0.0; 3 * per_channel];
        for c in 0..3 {
            coeffs[c] = f(6 + c);
            for k in 1..per_channel {
                coeffs[3 * k + c] = f(9 + c * (per_channel - 1) + (k - 1));
            }
        }
        let o = 9 + rest;
        let q = Quaternion::new(f(o + 4), f(o + 5), f(o + 6), f(o + 7));
        let norm = q.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::UnsupportedLayout(format!(
                "vertex {i} has a degenerate rotation quaternion"
            )));
        }
        let rotation = if (norm - 1.0).abs() <= QUAT_NORM_TOL {
            UnitQuaternion::new_unchecked(q)
        } else {
            UnitQuaternion::from_quaternion(q)
        };
        scene.gaussians.push(Gaussian {
            mean: Vector3::new(f(0), f(1), f(2)),
            rotation,
            log_scale: Vector3::new(f(o + 1), f(o + 2), f(o + 3)),
            opacity_logit: f(o),
            sh: coeffs,
            normal: [values[3], values[4], values[5]],
            joint_label: None,
        });
    }
    Ok(scene)
}

/// Serializes a scene in the standard 3DGS layout.
pub fn write_splat(scene: &GaussianScene) -> Result<Vec<u8>> {
    if scene.is_empty() {
        return Err(Error::EmptyScene);
    }
    let degree = scene.sh_degree();
    let per_channel = sh::coeffs_per_channel(degree);
    let rest = rest_count(degree);
    let mut out = Vec::with_capacity(1024 + scene.len() * 4 * (17 + rest));
    out.extend_from_slice(b"ply\nformat binary_little_endian 1.0\n");
    out.extend_from_slice(format!("element vertex {}\n", scene.len()).as_bytes());
    for name in expected_names(rest) {
        out.extend_from_slice(format!("property float {name}\n").as_bytes());
    }
    out.extend_from_slice(b"end_header\n");

    let put = |v: f32, out: &mut Vec<u8>| out.extend_from_slice(&v.to_le_bytes());
    for g in &scene.gaussians {
        for v in g.mean.iter() {
            put(*v as f32, &mut out);
        }
        for v in g.normal {
            put(v, &mut out);
        }
        for c in 0..3 {
            put(g.sh[c] as f32, &mut out);
        }
        for c in 0..3 {
            for k in 1..per_channel {
                put(g.sh[3 * k + c] as f32, &mut out);
            }
        }
        put(g.opacity_logit as f32, &mut out);
        for v in g.log_scale.iter() {
            put(*v as f32, &mut out);
        }
        let q = g.rotation.quaternion();
        for v in [q.w, q.i, q.j, q.k] {
            put(v as f32, &mut out);
        }
    }
    Ok(out)
}
